//! Energy and dissipation ledgers, the discrete energy identity and
//! exponential decay fits.
//!
//! Two ledgers are reported side by side. The basic one is exact for the
//! Galerkin system. The full and ε ledgers use spectral surrogates for the
//! fractional surface norms and are informational only.

use crate::error::{Error, Result};
use crate::linear_solver::{SimState, Trajectory, CSV_COLUMNS};
use crate::scalar::{c, Real};

/// The scalars of one time level that the ledger is computed from.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepRecord<T> {
    pub step: usize,
    pub t: T,
    pub energy: T,
    pub dissipation: T,
    pub work: T,
    pub rate_energy: T,
    pub rate_dissipation: T,
    pub xi_h32: T,
    pub dxi_norm: T,
}

impl<T: Real> From<&SimState<T>> for StepRecord<T> {
    fn from(s: &SimState<T>) -> Self {
        Self {
            step: s.coeffs.step,
            t: s.t(),
            energy: s.energy,
            dissipation: s.dissipation,
            work: s.work,
            rate_energy: s.rate_energy,
            rate_dissipation: s.rate_dissipation,
            xi_h32: s.xi_h32,
            dxi_norm: s.dxi_norm,
        }
    }
}

pub fn records<T: Real>(tr: &Trajectory<T>) -> Vec<StepRecord<T>> {
    tr.states.iter().map(StepRecord::from).collect()
}

/// Read ε and the records back from [`Trajectory::to_csv`] output.
pub fn parse_trajectory_csv(text: &str) -> Result<(f64, Vec<StepRecord<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| Error::Config(format!("trajectory csv: {e}")))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| Error::Config(format!("trajectory csv: missing column {name}")));
    let idx: Vec<usize> = CSV_COLUMNS[..10].iter().map(|n| col(n)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    let mut epsilon = f64::NAN;
    for row in rdr.records() {
        let row = row.map_err(|e| Error::Config(format!("trajectory csv: {e}")))?;
        let num = |k: usize| -> Result<f64> {
            row.get(idx[k])
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::Config(format!("trajectory csv: bad {} in row {}", CSV_COLUMNS[k], out.len())))
        };
        let step = row.get(idx[0]).and_then(|s| s.trim().parse::<usize>().ok()).ok_or_else(|| Error::Config("trajectory csv: bad step".into()))?;
        epsilon = num(1)?;
        out.push(StepRecord {
            step,
            t: num(2)?,
            energy: num(3)?,
            dissipation: num(4)?,
            work: num(5)?,
            rate_energy: num(6)?,
            rate_dissipation: num(7)?,
            xi_h32: num(8)?,
            dxi_norm: num(9)?,
        });
    }
    Ok((epsilon, out))
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LedgerSample<T> {
    pub t: T,
    /// `½‖v‖²_{𝓗⁰} + ½‖ξ‖²_{1,Σ}`, exact.
    pub e_basic: T,
    /// `((v, v)) + ε‖∂_tξ‖²_{1,Σ} + [∂_tξ]²_ℓ`, exact.
    pub d_basic: T,
    /// Surrogate: adds `½‖∂_tv‖²_{𝓗⁰}`, `½‖ξ‖²_{H^{3/2}}` and `½‖∂_tξ‖²_{1,Σ}`.
    pub e_full: T,
    /// Surrogate: adds `((∂_tv, ∂_tv))` and `‖ξ‖²_{H^{3/2}}`.
    pub d_full: T,
    /// Surrogate: `E_basic + ε/2 ‖∂_tξ‖²_{1,Σ}`.
    pub e_eps: T,
    /// Surrogate: `D_basic + ε((∂_tv, ∂_tv))`.
    pub d_eps: T,
    /// Signed defect of the energy identity over the step ending here.
    pub identity_residual: T,
}

impl<T: Real> LedgerSample<T> {
    pub const HEADER: &'static str = "t,e_basic,d_basic,e_full,d_full,e_eps,d_eps,identity_residual";

    pub fn to_csv_row(&self) -> String {
        [self.t, self.e_basic, self.d_basic, self.e_full, self.d_full, self.e_eps, self.d_eps, self.identity_residual]
            .iter()
            .map(|v| format!("{:.17e}", v.to_f64_lossy()))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// `E_k − E_{k−1} + Δt/2 (D_{k−1} + D_k) − Δt/2 (W_{k−1} + W_k)`, with 0 at the
/// first record.
pub fn identity_residual<T: Real>(recs: &[StepRecord<T>]) -> Vec<T> {
    let half = c::<T>(0.5);
    let mut out = Vec::with_capacity(recs.len());
    if !recs.is_empty() {
        out.push(T::zero());
    }
    for w in recs.windows(2) {
        let dt = w[1].t - w[0].t;
        out.push(w[1].energy - w[0].energy + half * dt * (w[0].dissipation + w[1].dissipation) - half * dt * (w[0].work + w[1].work));
    }
    out
}

pub fn ledger<T: Real>(recs: &[StepRecord<T>], epsilon: T) -> Vec<LedgerSample<T>> {
    let half = c::<T>(0.5);
    recs.iter()
        .zip(identity_residual(recs))
        .map(|(r, id)| LedgerSample {
            t: r.t,
            e_basic: r.energy,
            d_basic: r.dissipation,
            e_full: r.energy + half * (r.rate_energy + r.xi_h32 + r.dxi_norm),
            d_full: r.dissipation + r.rate_dissipation + r.xi_h32,
            e_eps: r.energy + half * epsilon * r.dxi_norm,
            d_eps: r.dissipation + epsilon * r.rate_dissipation,
            identity_residual: id,
        })
        .collect()
}

pub fn ledger_csv<T: Real>(samples: &[LedgerSample<T>]) -> String {
    let mut out = String::from(LedgerSample::<T>::HEADER);
    out.push('\n');
    for s in samples {
        out.push_str(&s.to_csv_row());
        out.push('\n');
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit<T> {
    pub lambda: T,
    /// `sup_t e^{λ̂ (t − t₀)} E(t) / E(t₀)` over the window.
    pub c_hat: T,
}

/// Least-squares fit of `log E = a − λ t` on `window` (all samples if `None`).
pub fn fit_decay<T: Real>(t: &[T], e: &[T], window: Option<(usize, usize)>) -> Result<DecayFit<T>> {
    assert_eq!(t.len(), e.len());
    let (lo, hi) = window.unwrap_or((0, t.len()));
    let hi = hi.min(t.len());
    if hi < lo + 2 {
        return Err(Error::DegenerateSeries(format!("window [{lo}, {hi}) has fewer than two samples")));
    }
    let floor = T::min_positive_value().sqrt();
    if let Some(k) = (lo..hi).find(|&k| !e[k].is_finite() || e[k] <= floor) {
        return Err(Error::DegenerateSeries(format!("E({}) = {} is at the numerical floor", t[k], e[k])));
    }
    let n = T::from_usize_lossy(hi - lo);
    let (ts, es) = (&t[lo..hi], &e[lo..hi]);
    let tm = ts.iter().copied().sum::<T>() / n;
    let lm = es.iter().map(|v| v.ln()).sum::<T>() / n;
    let mut num = T::zero();
    let mut den = T::zero();
    for (&ti, &ei) in ts.iter().zip(es) {
        num += (ti - tm) * (ei.ln() - lm);
        den += (ti - tm) * (ti - tm);
    }
    if den <= T::zero() {
        return Err(Error::DegenerateSeries("all samples at the same time".into()));
    }
    let lambda = -num / den;
    let c_hat = ts.iter().zip(es).map(|(&ti, &ei)| (lambda * (ti - ts[0])).exp() * ei / es[0]).fold(T::zero(), T::max);
    Ok(DecayFit { lambda, c_hat })
}
