//! Shared fixtures for the integration tests: the example configuration and a
//! manufactured-solution harness whose derivatives come from an exact
//! polynomial-times-exponential algebra, independent of the crate's jets.

#![allow(dead_code)]

use std::path::PathBuf;

use mclsim::config::{Config, PhysicalParams};
use mclsim::discretization::{build_candidates, build_initial_basis, push_forward, PointField};
use mclsim::equilibrium::solve_equilibrium;
use mclsim::geometry::{build_geometry, GeometryCache};
use mclsim::jet::{Jet, EXPONENTS};
use mclsim::linear_solver::{project_velocity, Forcing, ForcingSample, LinearProblem, PressureSpace, Trajectory};
use mclsim::nonlinear_driver::{Workspace, WorkspaceSizes};
use mclsim::surface::SurfaceFunction;
use mclsim::{Error, Mesh};

pub fn example_config_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/example.toml")
}

pub fn example_config() -> Config {
    let text = std::fs::read_to_string(example_config_path()).expect("example config");
    Config::from_toml_str(&text).expect("example config parses")
}

pub fn workspace(cfg: &Config) -> Workspace<f64> {
    let d = &cfg.discretization;
    let sizes = WorkspaceSizes {
        degree: d.degree,
        quadrature: d.quadrature,
        pressure_degree: d.pressure_degree,
        lift_modes: d.cosine_modes,
        equilibrium_nodes: d.equilibrium_nodes,
        basis_size: d.basis_size,
    };
    Workspace::new(cfg.physical.clone(), cfg.contact_law().unwrap(), sizes).unwrap()
}

/// `e^{ax+by} Σ c[i][j] xⁱ yʲ`, closed under differentiation.
#[derive(Clone, Debug)]
pub struct ExpPoly {
    pub c: Vec<Vec<f64>>,
    pub a: f64,
    pub b: f64,
}

impl ExpPoly {
    pub fn poly(c: Vec<Vec<f64>>) -> Self {
        Self { c, a: 0.0, b: 0.0 }
    }

    fn size(&self) -> usize {
        self.c.len()
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let mut s = 0.0;
        for (i, row) in self.c.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                s += v * x.powi(i as i32) * y.powi(j as i32);
            }
        }
        s * (self.a * x + self.b * y).exp()
    }

    pub fn dx(&self) -> Self {
        let n = self.size();
        let mut c = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                c[i][j] = self.a * self.c[i][j] + if i + 1 < n { (i + 1) as f64 * self.c[i + 1][j] } else { 0.0 };
            }
        }
        Self { c, a: self.a, b: self.b }
    }

    pub fn dy(&self) -> Self {
        let n = self.size();
        let mut c = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                c[i][j] = self.b * self.c[i][j] + if j + 1 < n { (j + 1) as f64 * self.c[i][j + 1] } else { 0.0 };
            }
        }
        Self { c, a: self.a, b: self.b }
    }

    pub fn d(&self, i: usize, j: usize) -> Self {
        let mut p = self.clone();
        for _ in 0..i {
            p = p.dx();
        }
        for _ in 0..j {
            p = p.dy();
        }
        p
    }

    /// Product with a plain polynomial; the result keeps `self`'s exponent.
    pub fn times_poly(&self, q: &[Vec<f64>]) -> Self {
        let n = self.size() + q.len();
        let mut c = vec![vec![0.0; n]; n];
        for (i, row) in self.c.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                for (k, qrow) in q.iter().enumerate() {
                    for (l, &w) in qrow.iter().enumerate() {
                        c[i + k][j + l] += v * w;
                    }
                }
            }
        }
        Self { c, a: self.a, b: self.b }
    }

    /// Order-3 jet at `(x, y)`.
    pub fn jet(&self, x: f64, y: f64) -> Jet<f64> {
        let mut jet = Jet::zero();
        for (k, &(i, j)) in EXPONENTS.iter().enumerate() {
            let fact = (1..=i).product::<usize>() * (1..=j).product::<usize>();
            jet.c[k] = self.d(i, j).eval(x, y) / fact as f64;
        }
        jet
    }
}

/// `(ℓ² − x²)(y + D)·p` for a polynomial or exp-polynomial `p`: vanishes on
/// the walls and the bottom of the flat box.
pub fn stream_function(ell: f64, depth: f64, p: ExpPoly) -> ExpPoly {
    p.times_poly(&[vec![ell * ell * depth, ell * ell], vec![0.0, 0.0], vec![-depth, -1.0]])
}

#[derive(Clone, Copy, Debug)]
pub enum Profile {
    /// `T = cos 2t`.
    Cos2,
    /// `T = 1 + t`.
    Linear,
}

impl Profile {
    /// `(T, T′, ∫₀ᵗ T)`.
    pub fn eval(self, t: f64) -> (f64, f64, f64) {
        match self {
            Profile::Cos2 => ((2.0 * t).cos(), -2.0 * (2.0 * t).sin(), 0.5 * (2.0 * t).sin()),
            Profile::Linear => (1.0 + t, 1.0, t + 0.5 * t * t),
        }
    }
}

/// Initial surface `A cos(π(x+ℓ)/ℓ)` with its first two derivatives.
pub fn theta0(amp: f64, ell: f64, x: f64) -> [f64; 3] {
    let k = std::f64::consts::PI / ell;
    let ph = k * (x + ell);
    [amp * ph.cos(), -amp * k * ph.sin(), -amp * k * k * ph.cos()]
}

/// Flat-box exact solution `v = T curl Ψ`, `q = T Q`, surface `θ₀ + (∫T) Θ`
/// with `Θ = −∂₁Ψ(·, H)` on the flat top `x₂ = H`.
pub struct Manufactured {
    pub params: PhysicalParams<f64>,
    pub top: f64,
    pub epsilon: f64,
    pub psi: ExpPoly,
    pub q: ExpPoly,
    pub profile: Profile,
    pub theta_amp: f64,
    d: Derivs,
}

struct Derivs {
    px: ExpPoly,
    py: ExpPoly,
    pxx: ExpPoly,
    pyy: ExpPoly,
    pxy: ExpPoly,
    pxxx: ExpPoly,
    pxxy: ExpPoly,
    pxyy: ExpPoly,
    pyyy: ExpPoly,
    qx: ExpPoly,
    qy: ExpPoly,
}

impl Manufactured {
    pub fn new(params: PhysicalParams<f64>, epsilon: f64, psi: ExpPoly, q: ExpPoly, profile: Profile, theta_amp: f64) -> Self {
        let d = Derivs {
            px: psi.d(1, 0),
            py: psi.d(0, 1),
            pxx: psi.d(2, 0),
            pyy: psi.d(0, 2),
            pxy: psi.d(1, 1),
            pxxx: psi.d(3, 0),
            pxxy: psi.d(2, 1),
            pxyy: psi.d(1, 2),
            pyyy: psi.d(0, 3),
            qx: q.d(1, 0),
            qy: q.d(0, 1),
        };
        let top = params.volume / (2.0 * params.ell);
        Self { params, top, epsilon, psi, q, profile, theta_amp, d }
    }

    pub fn velocity(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let tt = self.profile.eval(t).0;
        [tt * self.d.py.eval(x[0], x[1]), -tt * self.d.px.eval(x[0], x[1])]
    }

    pub fn pressure(&self, x: [f64; 2], t: f64) -> f64 {
        self.profile.eval(t).0 * self.q.eval(x[0], x[1])
    }

    /// `θ(x₁, t)`.
    pub fn surface(&self, x1: f64, t: f64) -> f64 {
        let i = self.profile.eval(t).2;
        theta0(self.theta_amp, self.params.ell, x1)[0] - i * self.d.px.eval(x1, self.top)
    }

    /// Velocity jets at every point set of the mesh, at `t`.
    pub fn velocity_field(&self, mesh: &Mesh, t: f64) -> PointField<f64> {
        let tt = self.profile.eval(t).0;
        let py = self.psi.d(0, 1);
        let mpx = self.psi.d(1, 0);
        let at = |pts: &Vec<[f64; 2]>| -> Vec<[Jet<f64>; 2]> { pts.iter().map(|x| [py.jet(x[0], x[1]).scale(tt), mpx.jet(x[0], x[1]).scale(-tt)]).collect() };
        let p = &mesh.points;
        PointField { bulk: at(&p.bulk), top: at(&p.top), left: at(&p.left), right: at(&p.right), bottom: at(&p.bottom) }
    }
}

impl Forcing<f64> for Manufactured {
    fn sample(&self, _step: usize, t: f64, mesh: &Mesh, _cache: &GeometryCache<f64>) -> ForcingSample<f64> {
        let p = &self.params;
        let d = &self.d;
        let (tt, tp, ti) = self.profile.eval(t);
        let mut f = ForcingSample::zeros(mesh);
        for (k, x) in mesh.points.bulk.iter().enumerate() {
            let (a, b) = (x[0], x[1]);
            let lap = [d.pxxy.eval(a, b) + d.pyyy.eval(a, b), -(d.pxxx.eval(a, b) + d.pxyy.eval(a, b))];
            let dtv = [tp * d.py.eval(a, b), -tp * d.px.eval(a, b)];
            let gq = [tt * d.qx.eval(a, b), tt * d.qy.eval(a, b)];
            for i in 0..2 {
                f.f1[k][i] = dtv[i] + gq[i] - p.mu * tt * lap[i];
            }
        }
        // Stress and slip: D = ∇v + ∇vᵀ with D₁₂ = T(Ψ_yy − Ψ_xx), D₂₂ = −2TΨ_xy.
        let d12 = |a: f64, b: f64| tt * (d.pyy.eval(a, b) - d.pxx.eval(a, b));
        let eps = self.epsilon;
        let th = |x1: f64| -> [f64; 3] {
            let base = theta0(self.theta_amp, p.ell, x1);
            let s = ti + eps * tt;
            [base[0] - s * d.px.eval(x1, self.top), base[1] - s * d.pxx.eval(x1, self.top), base[2] - s * d.pxxx.eval(x1, self.top)]
        };
        for (k, x) in mesh.points.top.iter().enumerate() {
            let x1 = x[0];
            let v = th(x1);
            let kop = p.g * v[0] - p.sigma * v[2];
            let d22 = -2.0 * tt * d.pxy.eval(x1, self.top);
            f.f4[k] = [-p.mu * d12(x1, self.top), tt * self.q.eval(x1, self.top) - p.mu * d22 - kop];
        }
        let mut k = 0;
        for x in &mesh.points.left {
            f.f5[k] = p.mu * d12(x[0], x[1]) + p.beta * tt * d.px.eval(x[0], x[1]);
            k += 1;
        }
        for x in &mesh.points.right {
            f.f5[k] = -p.mu * d12(x[0], x[1]) + p.beta * tt * d.px.eval(x[0], x[1]);
            k += 1;
        }
        for x in &mesh.points.bottom {
            f.f5[k] = p.mu * d12(x[0], x[1]) - p.beta * tt * d.py.eval(x[0], x[1]);
            k += 1;
        }
        let ell = p.ell;
        let rate = |x1: f64| -tt * d.px.eval(x1, self.top);
        let (l, r) = (th(-ell), th(ell));
        f.f7 = (p.sigma * l[1] - p.kappa * rate(-ell), -p.sigma * r[1] - p.kappa * rate(ell));
        f
    }
}

pub fn flat_params() -> PhysicalParams<f64> {
    PhysicalParams { mu: 0.7, sigma: 1.3, g: 0.9, beta: 0.6, kappa: 1.1, gamma_jump: 0.0, ell: 1.0, volume: 2.0, bottom_depth: 1.0 }
}

/// Errors of one manufactured run, maximised over the time levels.
#[derive(Clone, Copy, Debug, Default)]
pub struct MmsErrors {
    /// Strong residuals in the order of `StrongResiduals::NAMES`.
    pub residuals: [f64; 8],
    /// `L²(Ω)` pressure error.
    pub pressure: f64,
    /// `L²(Ω)` velocity error.
    pub velocity: f64,
    /// `L²(Σ)` surface error.
    pub surface: f64,
    pub q0_integral: f64,
    /// `max_k |identity defect_k| / Δt`.
    pub identity: f64,
    pub basis_size: usize,
}

pub struct MmsSetup {
    pub degree: usize,
    pub quad: usize,
    pub pressure_degree: usize,
    pub dt: f64,
    pub steps: usize,
}

pub fn run_mms(ex: &Manufactured, s: &MmsSetup) -> (MmsErrors, Trajectory<f64>) {
    let prm = &ex.params;
    let eq = solve_equilibrium(prm, 16, 1e-14).unwrap();
    assert!((eq.zeta0.value(0.0) - ex.top).abs() < 1e-13);
    let depth = prm.bottom_depth;
    let mesh = Mesh::new(&eq, depth, s.degree, s.quad);
    let cands = build_candidates(&mesh);
    let zero = SurfaceFunction::zero(prm.ell, 4);
    let cache = build_geometry(&eq, depth, &zero, &zero, &mesh.points, 8).unwrap();
    let basis = match build_initial_basis(&mesh, &cands, &cache, prm, ex.epsilon, cands.count()) {
        Ok(b) => b,
        Err(Error::SubspaceTooSmall { available, .. }) => build_initial_basis(&mesh, &cands, &cache, prm, ex.epsilon, available).unwrap(),
        Err(e) => panic!("basis: {e}"),
    };
    let pressure = PressureSpace::new(&mesh, s.pressure_degree);
    let w = push_forward(&basis, &cache);
    let u0 = ex.velocity_field(&mesh, 0.0);
    let (tt0, _, _) = ex.profile.eval(0.0);
    let rate0 = SurfaceFunction::from_fn(prm.ell, 30, |x| -tt0 * ex.psi.d(1, 0).eval(x, ex.top));
    let d0 = project_velocity(&basis, &w, &mesh, &cache, prm, &u0, &rate0);
    let xi0 = SurfaceFunction::from_fn(prm.ell, 30, |x| theta0(ex.theta_amp, prm.ell, x)[0]);
    let problem = LinearProblem {
        params: prm.clone(),
        epsilon: ex.epsilon,
        mesh: &mesh,
        basis: &basis,
        pressure: &pressure,
        frames: std::slice::from_ref(&cache),
        forcing: ex,
        d0,
        xi0,
        dt: s.dt,
        steps: s.steps,
    };
    let tr = mclsim::linear_solver::solve_linear(&problem).unwrap();

    let mut e = MmsErrors { basis_size: basis.m, ..Default::default() };
    let ids = mclsim::diagnostics::identity_residual(&mclsim::diagnostics::records(&tr));
    e.identity = ids.iter().fold(0.0_f64, |m, v| m.max(v.abs())) / s.dt;
    for st in &tr.states {
        let t = st.t();
        for (m, r) in e.residuals.iter_mut().zip(st.residuals.as_array()) {
            *m = m.max(r);
        }
        e.q0_integral = e.q0_integral.max(st.q0_integral.abs());
        let q = pressure.bulk_jets(&st.pressure);
        let (mut qe, mut ve) = (0.0, 0.0);
        for (k, x) in mesh.points.bulk.iter().enumerate() {
            let dq = q[k].value() - ex.pressure(*x, t);
            qe += mesh.w_bulk[k] * dq * dq;
            let v = ex.velocity(*x, t);
            let vh = &st.velocity.bulk[k];
            ve += mesh.w_bulk[k] * ((vh[0].value() - v[0]).powi(2) + (vh[1].value() - v[1]).powi(2));
        }
        let mut se = 0.0;
        for (k, x) in mesh.points.top.iter().enumerate() {
            se += mesh.w_top[k] * (st.xi.value(x[0]) - ex.surface(x[0], t)).powi(2);
        }
        e.pressure = e.pressure.max(qe.sqrt());
        e.velocity = e.velocity.max(ve.sqrt());
        e.surface = e.surface.max(se.sqrt());
    }
    (e, tr)
}
