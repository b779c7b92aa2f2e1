//! Fixed-point iteration for the nonlinear problem and ε-continuation.
//!
//! Iterate `n` supplies the geometry (through `η^n` and `∂_tη^n`) and the
//! forcings `F¹ = ∂_tη̄ W K ∂₂u − u·∇_𝒜u`, `F³ = σℛ(∂₁ζ₀, ∂₁η)` and
//! `F⁷ = κ𝒲̂(∂_tη)`. The linear solver then produces iterate `n + 1`.

use rayon::prelude::*;

use crate::config::{ContactLaw, PhysicalParams};
use crate::discretization::{build_candidates, build_initial_basis, Basis, Candidates, Mesh};
use crate::equilibrium::{solve_equilibrium, EquilibriumSurface};
use crate::error::{Error, Result};
use crate::geometry::{build_geometry, corner_remainder, surface_remainder, GeometryCache};
use crate::jet::Jet;
use crate::linear_solver::{solve_linear, Forcing, ForcingSample, LinearProblem, PressureSpace, SimState, Trajectory};
use crate::scalar::{c, Real};
use crate::surface::{cosine_frequency, spectral_norm_sq, SurfaceFunction};

/// Everything that does not depend on ε or on the initial data.
pub struct Workspace<T: Real> {
    pub params: PhysicalParams<T>,
    pub law: ContactLaw,
    pub eq: EquilibriumSurface<T>,
    pub mesh: Mesh<T>,
    pub cands: Candidates<T>,
    pub pressure: PressureSpace<T>,
    /// Cosine modes of the Poisson lift.
    pub lift_modes: usize,
    pub basis_size: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct WorkspaceSizes {
    pub degree: usize,
    pub quadrature: usize,
    pub pressure_degree: usize,
    pub lift_modes: usize,
    pub equilibrium_nodes: usize,
    pub basis_size: usize,
}

impl<T: Real> Workspace<T> {
    pub fn new(params: PhysicalParams<T>, law: ContactLaw, sizes: WorkspaceSizes) -> Result<Self> {
        let eq = solve_equilibrium(&params, sizes.equilibrium_nodes, c(1e-13))?;
        let mesh = Mesh::new(&eq, params.bottom_depth, sizes.degree, sizes.quadrature);
        let cands = build_candidates(&mesh);
        let pressure = PressureSpace::new(&mesh, sizes.pressure_degree);
        Ok(Self { params, law, eq, mesh, cands, pressure, lift_modes: sizes.lift_modes, basis_size: sizes.basis_size })
    }

    pub fn geometry(&self, eta: &SurfaceFunction<T>, deta: &SurfaceFunction<T>) -> Result<GeometryCache<T>> {
        build_geometry(&self.eq, self.params.bottom_depth, eta, deta, &self.mesh.points, self.lift_modes)
    }

    /// The `𝒲(0)` eigenbasis for one ε.
    pub fn basis(&self, cache0: &GeometryCache<T>, epsilon: T) -> Result<Basis<T>> {
        build_initial_basis(&self.mesh, &self.cands, cache0, &self.params, epsilon, self.basis_size)
    }
}

/// `a cos(μ_k(x₁ + ℓ))`, which has zero mean for `k ≥ 1`.
pub fn cosine_perturbation<T: Real>(ell: T, degree: usize, amplitude: T, mode: usize) -> SurfaceFunction<T> {
    let mu = cosine_frequency(ell, mode);
    SurfaceFunction::from_fn(ell, degree, |x| amplitude * (mu * (x + ell)).cos())
}

/// Residuals of the compatibility conditions at `t = 0`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Compatibility<T> {
    pub divergence: T,
    pub impermeability: T,
    pub kinematic: T,
}

/// Initial data of the nonlinear problem.
#[derive(Clone, Debug)]
pub struct InitialData<T> {
    pub eta0: SurfaceFunction<T>,
    pub deta0: SurfaceFunction<T>,
    /// `u₀` in basis coefficients.
    pub d0: Vec<T>,
    /// `∂_tu(0)` in basis coefficients.
    pub ddot0: Vec<T>,
    pub qbar0: T,
    pub q0_coeffs: Vec<T>,
    pub compatibility: Compatibility<T>,
    pub smallness: T,
}

/// Build compatible initial data for `η₀`.
///
/// The velocity starts at rest, so `∂_tη(0) = u₀·𝒩 = 0`; `∂_tu(0)` and the
/// pressure come from the Galerkin system and the pressure recovery at
/// `t = 0` with the nonlinear forcings of `η₀`.
pub fn prepare_initial_data<T: Real>(ws: &Workspace<T>, eta0: &SurfaceFunction<T>, epsilon: T, delta: T) -> Result<InitialData<T>> {
    let scale = T::one() + eta0.inner(eta0, false).sqrt();
    if eta0.integral().abs() > c::<T>(1e-12) * scale {
        return Err(Error::CompatibilityFailure(format!("zero-average condition violated: mean of eta0 is {}", eta0.mean())));
    }
    let smallness = spectral_norm_sq(eta0, c(1.5), ws.lift_modes).sqrt();
    if smallness > delta {
        return Err(Error::SmallnessViolation { norm: smallness.to_f64_lossy(), delta: delta.to_f64_lossy() });
    }
    let deta0 = SurfaceFunction::zero(ws.mesh.ell, 2);
    let cache0 = ws.geometry(eta0, &deta0)?;
    let basis = ws.basis(&cache0, epsilon)?;
    let it = Iterate::frozen(eta0, 1, &ws.mesh, T::one());
    let forcing = IterateForcing { prev: &it, params: &ws.params, law: &ws.law, zeta0: &ws.eq.zeta0 };
    let problem = LinearProblem {
        params: ws.params.clone(),
        epsilon,
        mesh: &ws.mesh,
        basis: &basis,
        pressure: &ws.pressure,
        frames: std::slice::from_ref(&cache0),
        forcing: &forcing,
        d0: vec![T::zero(); basis.m],
        xi0: eta0.clone(),
        dt: T::one(),
        steps: 0,
    };
    let tr = solve_linear(&problem)?;
    let s = &tr.states[0];
    let compatibility = Compatibility { divergence: s.residuals.divergence, impermeability: s.residuals.impermeability, kinematic: s.residuals.kinematic };
    for (name, v) in [
        ("div_A u0 = 0", compatibility.divergence),
        ("u0.nu = 0 on the walls and bottom", compatibility.impermeability),
        ("u0.N = d_t eta(0) on the surface", compatibility.kinematic),
    ] {
        if !(v <= c(1e-8)) {
            return Err(Error::CompatibilityFailure(format!("{name}: residual {v}")));
        }
    }
    Ok(InitialData {
        eta0: eta0.clone(),
        deta0,
        d0: s.coeffs.d.clone(),
        ddot0: s.coeffs.ddot.clone(),
        qbar0: s.pressure.qbar,
        q0_coeffs: s.pressure.coeffs.clone(),
        compatibility,
        smallness,
    })
}

/// The fields of one iterate that the next iterate and the metric need.
#[derive(Clone, Debug)]
pub struct Iterate<T> {
    pub dt: T,
    pub t: Vec<T>,
    /// Velocity jets at the bulk points, per time level.
    pub velocity: Vec<Vec<[Jet<T>; 2]>>,
    /// Pressure jets at the bulk points, per time level.
    pub pressure: Vec<Vec<Jet<T>>>,
    pub eta: Vec<SurfaceFunction<T>>,
    pub deta: Vec<SurfaceFunction<T>>,
}

impl<T: Real> Iterate<T> {
    /// `η ≡ η₀`, `u ≡ 0`, `p ≡ 0` on `levels` time levels.
    pub fn frozen(eta0: &SurfaceFunction<T>, levels: usize, mesh: &Mesh<T>, dt: T) -> Self {
        let n = mesh.points.bulk.len();
        Self {
            dt,
            t: (0..levels).map(|k| dt * T::from_usize_lossy(k)).collect(),
            velocity: vec![vec![[Jet::zero(); 2]; n]; levels],
            pressure: vec![vec![Jet::zero(); n]; levels],
            eta: vec![eta0.clone(); levels],
            deta: vec![SurfaceFunction::zero(eta0.ell(), 2); levels],
        }
    }

    pub fn from_trajectory(tr: &Trajectory<T>, ps: &PressureSpace<T>) -> Self {
        let st = &tr.states;
        Self {
            dt: tr.dt,
            t: st.iter().map(SimState::t).collect(),
            velocity: st.iter().map(|s| s.velocity.bulk.clone()).collect(),
            pressure: st.par_iter().map(|s| ps.bulk_jets(&s.pressure)).collect(),
            eta: st.iter().map(|s| s.xi.clone()).collect(),
            deta: st.iter().map(|s| s.dxi.clone()).collect(),
        }
    }

    pub fn levels(&self) -> usize {
        self.t.len()
    }
}

/// Nonlinear forcings evaluated on a previous iterate.
pub struct IterateForcing<'a, T> {
    pub prev: &'a Iterate<T>,
    pub params: &'a PhysicalParams<T>,
    pub law: &'a ContactLaw,
    pub zeta0: &'a SurfaceFunction<T>,
}

impl<T: Real> Forcing<T> for IterateForcing<'_, T> {
    fn sample(&self, step: usize, _t: T, mesh: &Mesh<T>, cache: &GeometryCache<T>) -> ForcingSample<T> {
        let k = step.min(self.prev.levels() - 1);
        let u = &self.prev.velocity[k];
        let eta = &self.prev.eta[k];
        let deta = &self.prev.deta[k];
        let mut f = ForcingSample::zeros(mesh);
        f.f1 = cache
            .bulk
            .par_iter()
            .zip(u.par_iter())
            .map(|(g, v)| {
                let ga = g.grad_a(v);
                let dt_phi = g.w * g.lift_t * g.k.value();
                let val = [v[0].value(), v[1].value()];
                std::array::from_fn(|i| dt_phi * v[i].dy() - (val[0] * ga[i][0].value() + val[1] * ga[i][1].value()))
            })
            .collect();
        let sigma = self.params.sigma;
        for (p, x) in mesh.points.top.iter().enumerate() {
            let (v, dx) = surface_remainder(sigma, self.zeta0.derivs(x[0]), eta.derivs(x[0]));
            f.f3[p] = v;
            f.f3_dx[p] = dx;
        }
        let at = |x1: T| surface_remainder(sigma, self.zeta0.derivs(x1), eta.derivs(x1)).0;
        f.f3_corner = (at(-mesh.ell), at(mesh.ell));
        f.f7 = corner_remainder(self.law, (deta.value(-mesh.ell), deta.value(mesh.ell)));
        f
    }
}

/// Components of the discrete metric between two iterates.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MetricReport<T> {
    /// `sup_t ‖Δu‖_{H¹}`.
    pub velocity_sup_h1: T,
    /// `‖Δu‖_{L²_t H¹}`.
    pub velocity_l2_h1: T,
    /// `‖Δu‖_{L²_t H²}`, surrogate for the `W^{2,q⁺}` part.
    pub velocity_l2_h2: T,
    /// `‖Δq‖_{L²_t H¹}`, surrogate for the `W^{1,q⁺}` part.
    pub pressure_l2_h1: T,
    /// `sup_t ‖Δη‖_{H¹(Σ)}`.
    pub surface_sup_h1: T,
    /// `sup_t ‖Δη‖_{H^{3/2−α}(Σ)}` by the spectral norm.
    pub surface_sup_frac: T,
    /// `(ε ∫ ‖Δ∂_t²η‖²_{H¹(Σ)})^{1/2}`, second differences in time.
    pub surface_eps_dtt: T,
    /// `sup_t max_± |Δ∂_tη(±ℓ)|`.
    pub corner_sup: T,
}

impl<T: Real> MetricReport<T> {
    pub fn total(&self) -> T {
        self.components().into_iter().fold(T::zero(), |a, b| a + b)
    }

    pub fn components(&self) -> [T; 8] {
        [
            self.velocity_sup_h1,
            self.velocity_l2_h1,
            self.velocity_l2_h2,
            self.pressure_l2_h1,
            self.surface_sup_h1,
            self.surface_sup_frac,
            self.surface_eps_dtt,
            self.corner_sup,
        ]
    }
}

/// Trapezoidal weights in time.
fn time_weights<T: Real>(n: usize, dt: T) -> Vec<T> {
    (0..n).map(|k| if k == 0 || k + 1 == n { dt * c(0.5) } else { dt }).collect()
}

/// Discrete metric between two iterates on the same time grid.
pub fn metric<T: Real>(a: &Iterate<T>, b: &Iterate<T>, mesh: &Mesh<T>, epsilon: T, alpha: T, modes: usize) -> MetricReport<T> {
    assert_eq!(a.levels(), b.levels(), "iterates on different time grids");
    let n = a.levels();
    let tw = time_weights(n, a.dt);
    let per_level: Vec<(T, T, T, T, T)> = (0..n)
        .into_par_iter()
        .map(|k| {
            let (mut l2, mut h1, mut h2, mut q2) = (T::zero(), T::zero(), T::zero(), T::zero());
            for (p, &w) in mesh.w_bulk.iter().enumerate() {
                for i in 0..2 {
                    let mut d = a.velocity[k][p][i];
                    d.axpy(-T::one(), &b.velocity[k][p][i]);
                    l2 += w * d.value() * d.value();
                    h1 += w * (d.dx() * d.dx() + d.dy() * d.dy());
                    h2 += w * (d.dxx() * d.dxx() + c::<T>(2.0) * d.dxy() * d.dxy() + d.dyy() * d.dyy());
                }
                let mut dq = a.pressure[k][p];
                dq.axpy(-T::one(), &b.pressure[k][p]);
                q2 += w * (dq.value() * dq.value() + dq.dx() * dq.dx() + dq.dy() * dq.dy());
            }
            let de = a.eta[k].axpy(-T::one(), &b.eta[k]);
            let sh1 = de.inner(&de, true).sqrt();
            let sfr = spectral_norm_sq(&de, c::<T>(1.5) - alpha, modes).sqrt();
            (l2 + h1, l2 + h1 + h2, q2, sh1, sfr)
        })
        .collect();
    let mut r = MetricReport::<T>::default();
    let (mut l2h1, mut l2h2, mut pq) = (T::zero(), T::zero(), T::zero());
    for (k, &(h1, h2, q, sh1, sfr)) in per_level.iter().enumerate() {
        r.velocity_sup_h1 = r.velocity_sup_h1.max(h1.sqrt());
        l2h1 += tw[k] * h1;
        l2h2 += tw[k] * h2;
        pq += tw[k] * q;
        r.surface_sup_h1 = r.surface_sup_h1.max(sh1);
        r.surface_sup_frac = r.surface_sup_frac.max(sfr);
        let dl = (a.deta[k].value(-mesh.ell) - b.deta[k].value(-mesh.ell)).abs();
        let dr = (a.deta[k].value(mesh.ell) - b.deta[k].value(mesh.ell)).abs();
        r.corner_sup = r.corner_sup.max(dl.max(dr));
    }
    r.velocity_l2_h1 = l2h1.sqrt();
    r.velocity_l2_h2 = l2h2.sqrt();
    r.pressure_l2_h1 = pq.sqrt();
    if n >= 2 {
        // ∂_t²η by forward differences of ∂_tη.
        let mut acc = T::zero();
        let inv = T::one() / a.dt;
        for k in 0..n - 1 {
            let diff = |it: &Iterate<T>| it.deta[k + 1].axpy(-T::one(), &it.deta[k]);
            let d = diff(a).axpy(-T::one(), &diff(b)).scale(inv);
            acc += a.dt * d.inner(&d, true);
        }
        r.surface_eps_dtt = (epsilon * acc).sqrt();
    }
    r
}

#[derive(Clone, Copy, Debug)]
pub struct IterationConfig<T> {
    /// Smallness radius for the initial data.
    pub delta: T,
    pub horizon: T,
    pub steps: usize,
    pub tol: T,
    pub max_iter: usize,
    pub epsilon: T,
    /// Fractional index used by the surface part of the metric.
    pub alpha: T,
}

#[derive(Clone, Debug)]
pub struct FixedPointResult<T> {
    pub trajectory: Trajectory<T>,
    pub iterate: Iterate<T>,
    pub iterations: usize,
    /// `d(n+1, n)` for each iteration.
    pub distances: Vec<T>,
    /// `d(n+1, n)/d(n, n−1)`.
    pub ratios: Vec<T>,
    pub reports: Vec<MetricReport<T>>,
}

/// Progress of a fixed-point solve, for callers that log it.
pub trait Observer<T>: Sync {
    fn iteration(&self, _n: usize, _report: &MetricReport<T>) {}
}

impl<T> Observer<T> for () {}

pub fn fixed_point_solve<T: Real>(ws: &Workspace<T>, init: &InitialData<T>, cfg: &IterationConfig<T>) -> Result<FixedPointResult<T>> {
    fixed_point_solve_observed(ws, init, cfg, &())
}

pub fn fixed_point_solve_observed<T: Real>(
    ws: &Workspace<T>,
    init: &InitialData<T>,
    cfg: &IterationConfig<T>,
    obs: &dyn Observer<T>,
) -> Result<FixedPointResult<T>> {
    if !(cfg.tol > T::zero() && cfg.horizon > T::zero() && cfg.delta > T::zero()) || cfg.steps == 0 {
        return Err(Error::Config("tol, horizon and delta must be positive and steps nonzero".into()));
    }
    let dt = cfg.horizon / T::from_usize_lossy(cfg.steps);
    let cache0 = ws.geometry(&init.eta0, &init.deta0)?;
    let basis = ws.basis(&cache0, cfg.epsilon)?;
    let mut prev = Iterate::frozen(&init.eta0, cfg.steps + 1, &ws.mesh, dt);
    let mut distances: Vec<T> = Vec::new();
    let mut ratios: Vec<T> = Vec::new();
    let mut reports = Vec::new();
    for n in 0..cfg.max_iter {
        let frames: Vec<GeometryCache<T>> = (0..=cfg.steps).into_par_iter().map(|k| ws.geometry(&prev.eta[k], &prev.deta[k])).collect::<Result<_>>()?;
        let forcing = IterateForcing { prev: &prev, params: &ws.params, law: &ws.law, zeta0: &ws.eq.zeta0 };
        let problem = LinearProblem {
            params: ws.params.clone(),
            epsilon: cfg.epsilon,
            mesh: &ws.mesh,
            basis: &basis,
            pressure: &ws.pressure,
            frames: &frames,
            forcing: &forcing,
            d0: init.d0.clone(),
            xi0: init.eta0.clone(),
            dt,
            steps: cfg.steps,
        };
        let trajectory = solve_linear(&problem)?;
        let next = Iterate::from_trajectory(&trajectory, &ws.pressure);
        let report = metric(&next, &prev, &ws.mesh, cfg.epsilon, cfg.alpha, ws.lift_modes);
        obs.iteration(n + 1, &report);
        let dist = report.total();
        if let Some(&last) = distances.last() {
            ratios.push(if last > T::zero() { dist / last } else { T::zero() });
        }
        distances.push(dist);
        reports.push(report);
        if !dist.is_finite() || (ratios.len() >= 3 && ratios[ratios.len() - 3..].iter().all(|&r| r >= T::one())) {
            return Err(Error::NotContracting { ratios: ratios.iter().map(|r| r.to_f64_lossy()).collect() });
        }
        if dist < cfg.tol {
            return Ok(FixedPointResult { trajectory, iterate: next, iterations: n + 1, distances, ratios, reports });
        }
        prev = next;
    }
    Err(Error::MaxIterExceeded { iterations: cfg.max_iter, distance: distances.last().map_or(f64::NAN, |d| d.to_f64_lossy()) })
}

#[derive(Clone, Debug)]
pub struct ContinuationResult<T> {
    pub epsilons: Vec<T>,
    pub runs: Vec<FixedPointResult<T>>,
    /// `d(sol_{ε_i}, sol_{ε_{i+1}})`.
    pub distances: Vec<T>,
}

/// Solve for each ε on a shared horizon and time grid, in parallel.
pub fn epsilon_continuation<T: Real>(ws: &Workspace<T>, eta0: &SurfaceFunction<T>, cfg: &IterationConfig<T>, epsilons: &[T]) -> Result<ContinuationResult<T>> {
    if epsilons.is_empty() || epsilons.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Config("epsilon list must be nonempty and strictly decreasing".into()));
    }
    let runs: Vec<FixedPointResult<T>> = epsilons
        .par_iter()
        .map(|&eps| {
            let init = prepare_initial_data(ws, eta0, eps, cfg.delta)?;
            fixed_point_solve(ws, &init, &IterationConfig { epsilon: eps, ..*cfg })
        })
        .collect::<Result<_>>()?;
    let distances =
        runs.windows(2).zip(epsilons.windows(2)).map(|(r, e)| metric(&r[0].iterate, &r[1].iterate, &ws.mesh, e[1], cfg.alpha, ws.lift_modes).total()).collect();
    Ok(ContinuationResult { epsilons: epsilons.to_vec(), runs, distances })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn workspace() -> Workspace<f64> {
        let params = PhysicalParams { mu: 1.0, sigma: 1.0, g: 1.0, beta: 1.0, kappa: 1.0, gamma_jump: 0.3, ell: 1.0, volume: 2.0, bottom_depth: 1.0 };
        let sizes = WorkspaceSizes { degree: 6, quadrature: 10, pressure_degree: 4, lift_modes: 16, equilibrium_nodes: 32, basis_size: 16 };
        Workspace::new(params, ContactLaw::cubic(1.0, 0.5), sizes).unwrap()
    }

    fn cfg() -> IterationConfig<f64> {
        IterationConfig { delta: 1.0, horizon: 0.01, steps: 5, tol: 1e-8, max_iter: 8, epsilon: 0.1, alpha: 0.05 }
    }

    #[test]
    fn nonzero_mean_rejected() {
        let ws = workspace();
        let eta = SurfaceFunction::from_fn(1.0, 8, |_| 1e-3);
        let err = prepare_initial_data(&ws, &eta, 0.1, 1.0).unwrap_err();
        assert!(err.to_string().contains("zero-average"), "{err}");
    }

    #[test]
    fn large_data_violates_smallness() {
        let ws = workspace();
        let eta = cosine_perturbation(1.0, 16, 2.0, 1);
        assert!(matches!(prepare_initial_data(&ws, &eta, 0.1, 1.0), Err(Error::SmallnessViolation { .. })));
    }

    #[test]
    fn equilibrium_converges_in_one_iteration() {
        let ws = workspace();
        let eta = SurfaceFunction::zero(1.0, 8);
        let init = prepare_initial_data(&ws, &eta, 0.1, 1.0).unwrap();
        assert!(init.d0.iter().chain(&init.ddot0).all(|&v| v == 0.0));
        let res = fixed_point_solve(&ws, &init, &cfg()).unwrap();
        assert_eq!(res.iterations, 1);
        assert_eq!(res.distances, vec![0.0]);
    }

    #[test]
    fn small_data_contracts() {
        let ws = workspace();
        let eta = cosine_perturbation(1.0, 16, 1e-3, 1);
        let init = prepare_initial_data(&ws, &eta, 0.1, 1.0).unwrap();
        assert!(init.compatibility.divergence <= 1e-8 && init.compatibility.kinematic <= 1e-8);
        let res = fixed_point_solve(&ws, &init, &cfg()).unwrap();
        assert!(res.iterations <= 8);
        assert!(res.ratios.iter().all(|&r| r < 1.0), "{:?}", res.ratios);
        for s in &res.trajectory.states {
            assert!((s.xi.integral() - eta.integral()).abs() < 1e-10);
        }
    }

    #[test]
    fn metric_axioms_on_sampled_iterates() {
        let ws = workspace();
        let eta = cosine_perturbation(1.0, 16, 1e-3, 1);
        let init = prepare_initial_data(&ws, &eta, 0.1, 1.0).unwrap();
        let mut c = cfg();
        c.max_iter = 1;
        c.tol = 1e-300;
        let a = Iterate::frozen(&eta, c.steps + 1, &ws.mesh, c.horizon / c.steps as f64);
        let b = Iterate::frozen(&cosine_perturbation(1.0, 16, 2e-3, 2), c.steps + 1, &ws.mesh, c.horizon / c.steps as f64);
        let Err(Error::MaxIterExceeded { .. }) = fixed_point_solve(&ws, &init, &c) else { panic!("expected one iteration only") };
        let d = |x: &Iterate<f64>, y: &Iterate<f64>| metric(x, y, &ws.mesh, 0.1, 0.05, 16).total();
        let cc = Iterate::frozen(&SurfaceFunction::zero(1.0, 4), c.steps + 1, &ws.mesh, c.horizon / c.steps as f64);
        assert_eq!(d(&a, &a), 0.0);
        assert!((d(&a, &b) - d(&b, &a)).abs() < 1e-15);
        assert!(d(&a, &cc) <= d(&a, &b) + d(&b, &cc) + 1e-15);
    }
}
