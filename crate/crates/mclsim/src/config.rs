//! Physical parameters, Sobolev index chain, contact law, and the run
//! configuration file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams<T> {
    pub mu: T,
    pub sigma: T,
    pub g: T,
    pub beta: T,
    pub kappa: T,
    pub gamma_jump: T,
    pub ell: T,
    pub volume: T,
    pub bottom_depth: T,
}

impl PhysicalParams<f64> {
    pub fn cast<T: Real>(&self) -> PhysicalParams<T> {
        PhysicalParams {
            mu: T::lit(self.mu),
            sigma: T::lit(self.sigma),
            g: T::lit(self.g),
            beta: T::lit(self.beta),
            kappa: T::lit(self.kappa),
            gamma_jump: T::lit(self.gamma_jump),
            ell: T::lit(self.ell),
            volume: T::lit(self.volume),
            bottom_depth: T::lit(self.bottom_depth),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SobolevIndices {
    pub omega_eq: f64,
    pub eps_max: f64,
    pub eps_minus: f64,
    pub eps_plus: f64,
    pub alpha: f64,
    pub q_minus: f64,
    pub q_plus: f64,
}

/// `min{1, −1 + π/ω}`.
pub fn eps_max(omega_eq: f64) -> f64 {
    (-1.0 + std::f64::consts::PI / omega_eq).min(1.0)
}

/// `2/(2 − ε)`.
pub fn lebesgue_exponent(eps: f64) -> f64 {
    2.0 / (2.0 - eps)
}

/// The chain inequalities in the order they are reported.
fn chain_checks(omega_eq: f64, alpha: f64, em: f64, ep: f64) -> Vec<(&'static str, bool)> {
    let emax = eps_max(omega_eq);
    vec![
        ("0 < omega_eq < pi", omega_eq > 0.0 && omega_eq < std::f64::consts::PI),
        ("0 < alpha", alpha > 0.0),
        ("alpha < eps_minus", alpha < em),
        ("eps_minus < eps_plus", em < ep),
        ("eps_plus < eps_max", ep < emax),
        ("alpha < eps_minus/2", alpha < em / 2.0),
        ("alpha < (eps_plus - eps_minus)/2", alpha < (ep - em) / 2.0),
        ("eps_plus <= (eps_minus + 1)/2", ep <= (em + 1.0) / 2.0),
    ]
}

pub fn derive_indices(omega_eq: f64, alpha: f64, eps_minus: f64, eps_plus: f64) -> Result<SobolevIndices> {
    if let Some((name, _)) = chain_checks(omega_eq, alpha, eps_minus, eps_plus).into_iter().find(|(_, ok)| !ok) {
        return Err(Error::ChainViolation(name.to_string()));
    }
    Ok(SobolevIndices {
        omega_eq,
        eps_max: eps_max(omega_eq),
        eps_minus,
        eps_plus,
        alpha,
        q_minus: lebesgue_exponent(eps_minus),
        q_plus: lebesgue_exponent(eps_plus),
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub name: String,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, name: &str, detail: String) {
        self.violations.push(Violation { name: name.to_string(), detail });
    }

    pub fn mentions(&self, name: &str) -> bool {
        self.violations.iter().any(|v| v.name == name)
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{} violations", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  {}: {}", v.name, v.detail)?;
        }
        for w in &self.warnings {
            writeln!(f, "  warning: {w}")?;
        }
        Ok(())
    }
}

/// Every violated inequality; an empty report means valid.
pub fn validate(params: &PhysicalParams<f64>, indices: &SobolevIndices) -> ValidationReport {
    let mut r = ValidationReport::default();
    let p = params;
    if p.gamma_jump.abs() >= p.sigma {
        r.push("Young relation", format!("|gamma_jump| = {} must be < sigma = {}", p.gamma_jump.abs(), p.sigma));
    }
    for (name, v) in
        [("mu", p.mu), ("sigma", p.sigma), ("beta", p.beta), ("kappa", p.kappa), ("ell", p.ell), ("volume", p.volume), ("bottom_depth", p.bottom_depth)]
    {
        if !(v > 0.0 && v.is_finite()) {
            r.push("positivity", format!("{name} = {v} must be > 0"));
        }
    }
    if !(p.g >= 0.0 && p.g.is_finite()) {
        r.push("positivity", format!("g = {} must be >= 0", p.g));
    }
    let ix = indices;
    for (name, ok) in chain_checks(ix.omega_eq, ix.alpha, ix.eps_minus, ix.eps_plus) {
        if !ok {
            r.push(name, format!("alpha = {}, eps_minus = {}, eps_plus = {}, eps_max = {}", ix.alpha, ix.eps_minus, ix.eps_plus, eps_max(ix.omega_eq)));
        }
    }
    let consistency = [
        ("eps_max = min{1, -1 + pi/omega_eq}", ix.eps_max, eps_max(ix.omega_eq)),
        ("q_minus = 2/(2 - eps_minus)", ix.q_minus, lebesgue_exponent(ix.eps_minus)),
        ("q_plus = 2/(2 - eps_plus)", ix.q_plus, lebesgue_exponent(ix.eps_plus)),
    ];
    for (name, got, want) in consistency {
        if (got - want).abs() > 1e-12 * want.abs().max(1.0) {
            r.push(name, format!("got {got}, expected {want}"));
        }
    }
    if !(1.0 < ix.q_minus && ix.q_minus < ix.q_plus && ix.q_plus < 2.0) {
        r.push("1 < q_minus < q_plus < 2", format!("q_minus = {}, q_plus = {}", ix.q_minus, ix.q_plus));
    }
    r
}

/// Contact-point response `𝒲`, split as `𝒲(z) = κ z + κ 𝒲̂(z)`.
#[derive(Clone, Debug, PartialEq)]
pub enum ContactLaw {
    /// `𝒲(z) = κ z + κ c z³`.
    Cubic { kappa: f64, c: f64 },
    /// Natural cubic spline through `(z_i, 𝒲(z_i))`.
    Tabulated { kappa: f64, spline: Spline },
}

impl ContactLaw {
    pub fn cubic(kappa: f64, c: f64) -> Self {
        ContactLaw::Cubic { kappa, c }
    }

    /// Tabulated response; `kappa` is read off as the spline slope at 0.
    pub fn tabulated(z: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        if z.len() != w.len() || z.len() < 3 {
            return Err(Error::Config("contact law table needs >= 3 matching (z, W) samples".into()));
        }
        if z.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::Config("contact law table abscissae must increase".into()));
        }
        let spline = Spline::natural(z, w);
        let kappa = spline.eval(0.0).1;
        Ok(ContactLaw::Tabulated { kappa, spline })
    }

    pub fn kappa(&self) -> f64 {
        match self {
            ContactLaw::Cubic { kappa, .. } | ContactLaw::Tabulated { kappa, .. } => *kappa,
        }
    }

    pub fn response(&self, z: f64) -> f64 {
        match self {
            ContactLaw::Cubic { kappa, c } => kappa * z + kappa * c * z * z * z,
            ContactLaw::Tabulated { spline, .. } => spline.eval(z).0,
        }
    }

    /// `𝒲̂(z) = 𝒲(z)/κ − z`.
    pub fn hat_w(&self, z: f64) -> f64 {
        match self {
            ContactLaw::Cubic { c, .. } => c * z * z * z,
            ContactLaw::Tabulated { .. } => self.response(z) / self.kappa() - z,
        }
    }

    /// Problems with the response on `[-range, range]`: `𝒲(0) = 0`,
    /// strict monotonicity.
    pub fn check(&self, range: f64, samples: usize) -> Vec<String> {
        let mut out = vec![];
        if self.response(0.0).abs() > 1e-12 {
            out.push("W(0) != 0".to_string());
        }
        if self.kappa() <= 0.0 {
            out.push("kappa = W'(0) must be > 0".to_string());
        }
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=samples {
            let z = -range + 2.0 * range * i as f64 / samples as f64;
            let v = self.response(z);
            if v <= prev {
                out.push(format!("W not strictly increasing near z = {z}"));
                break;
            }
            prev = v;
        }
        out
    }
}

/// Natural cubic spline.
#[derive(Clone, Debug, PartialEq)]
pub struct Spline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl Spline {
    pub fn natural(x: Vec<f64>, y: Vec<f64>) -> Self {
        let n = x.len();
        let mut m = vec![0.0; n];
        // Tridiagonal solve for second derivatives.
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            let h0 = x[i] - x[i - 1];
            let h1 = x[i + 1] - x[i];
            let a = h0 / 6.0;
            let b = (h0 + h1) / 3.0;
            let cc = h1 / 6.0;
            let rhs = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
            let denom = b - a * c[i - 1];
            c[i] = cc / denom;
            d[i] = (rhs - a * d[i - 1]) / denom;
        }
        for i in (1..n - 1).rev() {
            m[i] = d[i] - c[i] * m[i + 1];
        }
        Self { x, y, m }
    }

    /// Value and slope; linear extrapolation outside the table.
    pub fn eval(&self, z: f64) -> (f64, f64) {
        let n = self.x.len();
        let i = match self.x.iter().position(|&xi| xi > z) {
            Some(0) => 0,
            Some(k) => k - 1,
            None => n - 2,
        };
        let (x0, x1) = (self.x[i], self.x[i + 1]);
        let h = x1 - x0;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let (y0, y1) = (self.y[i], self.y[i + 1]);
        let slope_at = |t: f64| {
            let a = (x1 - t) / h;
            let b = (t - x0) / h;
            (y1 - y0) / h + h * ((3.0 * b * b - 1.0) * m1 - (3.0 * a * a - 1.0) * m0) / 6.0
        };
        if z < x0 || z > x1 {
            let edge = if z < x0 { x0 } else { x1 };
            let (ye, se) = (if z < x0 { y0 } else { y1 }, slope_at(edge));
            return (ye + se * (z - edge), se);
        }
        let a = (x1 - z) / h;
        let b = (z - x0) / h;
        let v = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        (v, slope_at(z))
    }
}

// ---------------------------------------------------------------------------
// Configuration file

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexInput {
    pub omega_eq: f64,
    pub alpha: f64,
    pub eps_minus: f64,
    pub eps_plus: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_minus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_plus: Option<f64>,
}

impl IndexInput {
    /// Indices as written in the file, filling derived entries when absent.
    pub fn as_indices(&self) -> SobolevIndices {
        SobolevIndices {
            omega_eq: self.omega_eq,
            eps_max: self.eps_max.unwrap_or_else(|| eps_max(self.omega_eq)),
            eps_minus: self.eps_minus,
            eps_plus: self.eps_plus,
            alpha: self.alpha,
            q_minus: self.q_minus.unwrap_or_else(|| lebesgue_exponent(self.eps_minus)),
            q_plus: self.q_plus.unwrap_or_else(|| lebesgue_exponent(self.eps_plus)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawConfig {
    #[serde(default)]
    pub c: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table_z: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table_w: Option<Vec<f64>>,
}

impl Default for LawConfig {
    fn default() -> Self {
        Self { c: 0.0, table_z: None, table_w: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscretizationConfig {
    /// Stream-function polynomial degree per direction.
    pub degree: usize,
    /// Gauss points per direction in the bulk.
    pub quadrature: usize,
    /// Polynomial degree of surface functions.
    pub surface_degree: usize,
    /// Cosine modes used by the lift and the spectral norms.
    pub cosine_modes: usize,
    /// Chebyshev collocation degree for the equilibrium.
    pub equilibrium_nodes: usize,
    /// Number of Galerkin basis fields `m`.
    pub basis_size: usize,
    /// Pressure polynomial degree per direction.
    pub pressure_degree: usize,
}

impl Default for DiscretizationConfig {
    fn default() -> Self {
        Self { degree: 10, quadrature: 18, surface_degree: 24, cosine_modes: 48, equilibrium_nodes: 64, basis_size: 60, pressure_degree: 6 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub epsilon: f64,
    /// User horizon; the effective horizon is `min(epsilon², t_final) * horizon_scale`.
    pub t_final: f64,
    pub horizon_scale: f64,
    pub steps: usize,
    pub amplitude: f64,
    /// Cosine mode index `k ≥ 1` of the initial perturbation.
    pub mode: usize,
    pub delta: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub epsilons: Vec<f64>,
    /// Use the user horizon verbatim instead of `min(epsilon², t_final)`.
    pub literal_horizon: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            t_final: 0.05,
            horizon_scale: 1.0,
            steps: 20,
            amplitude: 1e-3,
            mode: 1,
            delta: 2.0,
            tol: 1e-8,
            max_iter: 8,
            epsilons: vec![0.1, 0.05, 0.025, 0.0125],
            literal_horizon: false,
        }
    }
}

impl RunConfig {
    /// Horizon for a given ε.
    pub fn horizon(&self, epsilon: f64) -> f64 {
        let base = if self.literal_horizon { self.t_final } else { (epsilon * epsilon).min(self.t_final) };
        base * self.horizon_scale
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub physical: PhysicalParams<f64>,
    pub indices: IndexInput,
    #[serde(default)]
    pub law: LawConfig,
    #[serde(default)]
    pub discretization: DiscretizationConfig,
    #[serde(default)]
    pub run: RunConfig,
}

/// Prefix of environment overrides: `MCL_<SECTION>__<FIELD>=value`.
pub const ENV_PREFIX: &str = "MCL_";

impl Config {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let value: toml::Table = s.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        Self::from_table(value)
    }

    fn from_table(t: toml::Table) -> Result<Self> {
        toml::Value::Table(t).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }

    /// Load a file and apply `MCL_<SECTION>__<FIELD>` overrides from `env`.
    pub fn load(path: &Path, env: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        apply_env_overrides(&mut table, env)?;
        Self::from_table(table)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn contact_law(&self) -> Result<ContactLaw> {
        match (&self.law.table_z, &self.law.table_w) {
            (Some(z), Some(w)) => ContactLaw::tabulated(z.clone(), w.clone()),
            (None, None) => Ok(ContactLaw::cubic(self.physical.kappa, self.law.c)),
            _ => Err(Error::Config("law.table_z and law.table_w must be given together".into())),
        }
    }

    /// Parameter validation plus contact-law checks.
    pub fn validate(&self) -> ValidationReport {
        let mut r = validate(&self.physical, &self.indices.as_indices());
        match self.contact_law() {
            Ok(law) => {
                for msg in law.check(1.0, 200) {
                    r.push("contact law", msg);
                }
            }
            Err(e) => r.push("contact law", e.to_string()),
        }
        r
    }
}

pub fn apply_env_overrides(table: &mut toml::Table, env: impl IntoIterator<Item = (String, String)>) -> Result<()> {
    let mut vars: Vec<(String, String)> = env.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
    vars.sort();
    for (key, raw) in vars {
        let rest = &key[ENV_PREFIX.len()..];
        let Some((section, field)) = rest.split_once("__") else {
            return Err(Error::Config(format!("override {key} must look like {ENV_PREFIX}<SECTION>__<FIELD>")));
        };
        let (section, field) = (section.to_ascii_lowercase(), field.to_ascii_lowercase());
        let value = parse_override(&raw);
        let entry = table.entry(section.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        match entry {
            toml::Value::Table(t) => {
                t.insert(field, value);
            }
            _ => return Err(Error::Config(format!("section {section} is not a table"))),
        }
    }
    Ok(())
}

fn parse_override(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> PhysicalParams<f64> {
        PhysicalParams { mu: 1.0, sigma: 1.0, g: 1.0, beta: 1.0, kappa: 1.0, gamma_jump: 0.5, ell: 1.0, volume: 2.0, bottom_depth: 1.0 }
    }

    #[test]
    fn valid_example_has_no_violations() {
        let ix = derive_indices(std::f64::consts::FRAC_PI_2, 0.05, 0.3, 0.5).unwrap();
        assert!((ix.q_minus - 20.0 / 17.0).abs() < 1e-15);
        assert!((ix.q_plus - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(ix.eps_max, 1.0);
        assert!(validate(&params(), &ix).is_valid());
    }

    #[test]
    fn young_relation_violation_is_named() {
        let ix = derive_indices(std::f64::consts::FRAC_PI_2, 0.05, 0.3, 0.5).unwrap();
        let mut p = params();
        p.gamma_jump = 1.2;
        let r = validate(&p, &ix);
        assert!(r.mentions("Young relation"));
        assert_eq!(r.violations.len(), 1);
    }

    #[test]
    fn first_failed_inequality_is_reported() {
        let err = derive_indices(std::f64::consts::FRAC_PI_2, 0.2, 0.3, 0.5).unwrap_err();
        match err {
            Error::ChainViolation(name) => assert_eq!(name, "alpha < eps_minus/2"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn alpha_on_the_half_gap_is_rejected() {
        // (0.5 - 0.3)/2 = 0.1, and the inequality is strict.
        match derive_indices(std::f64::consts::FRAC_PI_2, 0.1, 0.3, 0.5).unwrap_err() {
            Error::ChainViolation(name) => assert_eq!(name, "alpha < (eps_plus - eps_minus)/2"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cubic_law_split() {
        let law = ContactLaw::cubic(2.0, 0.7);
        for z in [-0.9, -0.1, 0.0, 0.3, 1.0] {
            assert!((law.hat_w(z) - 0.7 * z * z * z).abs() < 1e-15);
            assert!((law.response(z) - 2.0 * (z + law.hat_w(z))).abs() < 1e-15);
        }
        assert!(law.check(1.0, 100).is_empty());
    }

    #[test]
    fn tabulated_law_reproduces_smooth_response() {
        let z: Vec<f64> = (0..41).map(|i| -1.0 + i as f64 * 0.05).collect();
        let w: Vec<f64> = z.iter().map(|&t| 1.5 * (t + 0.2 * t * t * t)).collect();
        let law = ContactLaw::tabulated(z, w).unwrap();
        assert!((law.kappa() - 1.5).abs() < 1e-3);
        assert!((law.response(0.33) - 1.5 * (0.33 + 0.2 * 0.33f64.powi(3))).abs() < 1e-4);
        assert!(law.check(1.0, 100).is_empty());
    }

    #[test]
    fn env_overrides_apply() {
        let text = r#"
[physical]
mu = 1.0
sigma = 1.0
g = 1.0
beta = 1.0
kappa = 1.0
gamma_jump = 0.3
ell = 1.0
volume = 2.0
bottom_depth = 1.0
[indices]
omega_eq = 1.5707963267948966
alpha = 0.05
eps_minus = 0.3
eps_plus = 0.5
"#;
        let mut table: toml::Table = text.parse().unwrap();
        apply_env_overrides(
            &mut table,
            vec![
                ("MCL_PHYSICAL__GAMMA_JUMP".to_string(), "0.4".to_string()),
                ("MCL_RUN__EPSILONS".to_string(), "[0.2, 0.1]".to_string()),
                ("OTHER".to_string(), "x".to_string()),
            ],
        )
        .unwrap();
        let cfg = Config::from_table(table).unwrap();
        assert_eq!(cfg.physical.gamma_jump, 0.4);
        assert_eq!(cfg.run.epsilons, vec![0.2, 0.1]);
        assert!(cfg.validate().is_valid());
        let back = Config::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }
}
