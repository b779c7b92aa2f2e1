//! The ε-regularized linear problem in Galerkin coefficients.
//!
//! With `v = Σ d_j w^j` and `ξ = ξ₀ + Σ Q_j (w^j·𝒩)`, `Q̇ = d`, the weak form is
//! the Volterra system
//!
//! `Mass ḋ + (Rcoupᵀ + Stiff + ε Surf + Corner) d + Surf Q = F`,
//!
//! where `F` carries the projected forcings and `−(ξ₀, w^j·𝒩)_{1,Σ}`. Since the
//! normal traces of `w^j` do not depend on time, the memory kernel is the
//! constant matrix `Surf` and the history integral is the running sum `Q`.
//! It is advanced with the implicit trapezoidal rule.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::config::PhysicalParams;
use crate::discretization::{assemble, cross_forms, push_forward, Basis, FieldTable, FormMatrices, Mesh, PointField};
use crate::error::{Error, Result};
use crate::geometry::GeometryCache;
use crate::jet::{Jet, EXPONENTS};
use crate::linalg::{dot, least_squares, Lu, Mat};
use crate::poly::legendre_derivs;
use crate::scalar::{c, Real};
use crate::surface::{default_norm_modes, spectral_norm_sq, SurfaceFunction};

/// Forcing data sampled at the mesh points of one time level.
#[derive(Clone, Debug, PartialEq)]
pub struct ForcingSample<T> {
    /// `F¹` at the bulk points.
    pub f1: Vec<[T; 2]>,
    /// `F³` and `∂₁F³` at the top points.
    pub f3: Vec<T>,
    pub f3_dx: Vec<T>,
    /// `F³(∓ℓ)`.
    pub f3_corner: (T, T),
    /// `F⁴` at the top points.
    pub f4: Vec<[T; 2]>,
    /// `F⁵` at the left, right and bottom points, in that order.
    pub f5: Vec<T>,
    /// `F⁷(∓ℓ)`.
    pub f7: (T, T),
}

impl<T: Real> ForcingSample<T> {
    pub fn zeros(mesh: &Mesh<T>) -> Self {
        let p = &mesh.points;
        let z = T::zero();
        Self {
            f1: vec![[z; 2]; p.bulk.len()],
            f3: vec![z; p.top.len()],
            f3_dx: vec![z; p.top.len()],
            f3_corner: (z, z),
            f4: vec![[z; 2]; p.top.len()],
            f5: vec![z; p.left.len() + p.right.len() + p.bottom.len()],
            f7: (z, z),
        }
    }
}

pub trait Forcing<T: Real>: Sync {
    fn sample(&self, step: usize, t: T, mesh: &Mesh<T>, cache: &GeometryCache<T>) -> ForcingSample<T>;
}

/// The unforced problem.
pub struct NoForcing;

impl<T: Real> Forcing<T> for NoForcing {
    fn sample(&self, _: usize, _: T, mesh: &Mesh<T>, _: &GeometryCache<T>) -> ForcingSample<T> {
        ForcingSample::zeros(mesh)
    }
}

/// Normal traces of a field family at the top points plus corner values.
pub struct TraceData<'a, T> {
    pub top: &'a Mat<T>,
    pub slope: &'a Mat<T>,
    pub corner: &'a [(T, T)],
}

/// Right-hand side functional applied to every field of `table`:
/// `∫F¹·wJ − ∫F³∂₁(w·𝒩) − ∫F⁴·w − ∫_{Σ_s}F⁵(w·τ)J − Σ F⁷(±ℓ)(w·𝒩)(±ℓ)`.
pub fn project_forcing<T: Real>(table: &FieldTable<T>, traces: &TraceData<'_, T>, f: &ForcingSample<T>, mesh: &Mesh<T>, cache: &GeometryCache<T>) -> Vec<T> {
    let (nl, nr) = (mesh.points.left.len(), mesh.points.right.len());
    table
        .fields
        .par_iter()
        .enumerate()
        .map(|(i, w)| {
            let mut s = T::zero();
            for (p, (wv, g)) in w.bulk.iter().zip(&cache.bulk).enumerate() {
                s += mesh.w_bulk[p] * g.j.value() * (f.f1[p][0] * wv[0].value() + f.f1[p][1] * wv[1].value());
            }
            for (p, wv) in w.top.iter().enumerate() {
                s -= mesh.w_top[p] * (f.f3[p] * traces.slope[(i, p)] + f.f4[p][0] * wv[0].value() + f.f4[p][1] * wv[1].value());
            }
            for (p, (wv, g)) in w.left.iter().zip(&cache.left).enumerate() {
                s -= mesh.w_left[p] * g.j.value() * f.f5[p] * wv[1].value();
            }
            for (p, (wv, g)) in w.right.iter().zip(&cache.right).enumerate() {
                s -= mesh.w_right[p] * g.j.value() * f.f5[nl + p] * wv[1].value();
            }
            for (p, (wv, g)) in w.bottom.iter().zip(&cache.bottom).enumerate() {
                s -= mesh.w_bottom[p] * g.j.value() * f.f5[nl + nr + p] * wv[0].value();
            }
            let (cl, cr) = traces.corner[i];
            s - f.f7.0 * cl - f.f7.1 * cr
        })
        .collect()
}

fn curvature_weight<T: Real>(mesh: &Mesh<T>, x1: T) -> T {
    let z = mesh.zeta0.slope(x1);
    (T::one() + z * z).powf(c(1.5))
}

/// `(ξ, a_i)_{1,Σ}` for each row `a_i` of the traces.
pub fn surface_pairing<T: Real>(mesh: &Mesh<T>, params: &PhysicalParams<T>, xi: &SurfaceFunction<T>, tr: &TraceData<'_, T>) -> Vec<T> {
    let samples: Vec<[T; 4]> = mesh.points.top.iter().map(|x| xi.derivs(x[0])).collect();
    (0..tr.top.rows())
        .map(|i| {
            let mut s = T::zero();
            for (p, x) in mesh.points.top.iter().enumerate() {
                let cw = curvature_weight(mesh, x[0]);
                s += mesh.w_top[p] * (params.g * samples[p][0] * tr.top[(i, p)] + params.sigma * samples[p][1] * tr.slope[(i, p)] / cw);
            }
            s
        })
        .collect()
}

/// `‖ξ‖²_{1,Σ}` by the top quadrature.
pub fn surface_norm_sq<T: Real>(mesh: &Mesh<T>, params: &PhysicalParams<T>, xi: &SurfaceFunction<T>) -> T {
    let mut s = T::zero();
    for (p, x) in mesh.points.top.iter().enumerate() {
        let d = xi.derivs(x[0]);
        s += mesh.w_top[p] * (params.g * d[0] * d[0] + params.sigma * d[1] * d[1] / curvature_weight(mesh, x[0]));
    }
    s
}

/// Test fields and pressure modes for the least-squares pressure recovery.
///
/// Pressure is `q = q̄ + q⁰` with `q⁰ = Σ c_ab (P_a(s)P_b(r) − m_ab)`,
/// `(a, b) ≠ (0, 0)`, where `m_ab` is the quadrature mean over `Ω`. Test
/// fields are `Mϕ` with `ϕ = ((1−s²)P_aP_b, 0)` and `(0, (1+r)P_aP_b)`; both
/// are impermeable on `Σ_s`, and `∫ q div_𝒜(Mϕ) J = ∫ q div ϕ` does not
/// depend on time.
#[derive(Clone, Debug)]
pub struct PressureSpace<T> {
    pub degree: usize,
    pub modes: Vec<(usize, usize)>,
    pub means: Vec<T>,
    pub tests: FieldTable<T>,
    pub test_top: Mat<T>,
    pub test_slope: Mat<T>,
    pub test_corner: Vec<(T, T)>,
    /// Rows are tests; columns are `[q̄, modes…]`.
    pub matrix: Mat<T>,
    /// Mode jets at the bulk points (`modes × points`), mean not removed.
    bulk_modes: Vec<Vec<Jet<T>>>,
    top_modes: Vec<Vec<T>>,
}

fn taylor_coeffs<T: Real>(f: [T; 4], g: [T; 4]) -> [T; 10] {
    let fact = [T::one(), T::one(), c(0.5), c(1.0 / 6.0)];
    std::array::from_fn(|k| {
        let (i, j) = EXPONENTS[k];
        f[i] * fact[i] * g[j] * fact[j]
    })
}

/// Derivatives of `(1 − s²) P(s)`.
fn bubble_s<T: Real>(p: [T; 4], s: T) -> [T; 4] {
    let w = T::one() - s * s;
    let two = c::<T>(2.0);
    [w * p[0], -two * s * p[0] + w * p[1], -two * p[0] - c::<T>(4.0) * s * p[1] + w * p[2], -c::<T>(6.0) * p[1] - c::<T>(6.0) * s * p[2] + w * p[3]]
}

/// Derivatives of `(1 + r) P(r)`.
fn bubble_r<T: Real>(p: [T; 4], r: T) -> [T; 4] {
    let w = T::one() + r;
    [w * p[0], p[0] + w * p[1], c::<T>(2.0) * p[1] + w * p[2], c::<T>(3.0) * p[2] + w * p[3]]
}

impl<T: Real> PressureSpace<T> {
    pub fn new(mesh: &Mesh<T>, degree: usize) -> Self {
        let nt = degree + 1;
        let modes: Vec<(usize, usize)> = (0..=degree).flat_map(|a| (0..=degree).map(move |b| (a, b))).filter(|&m| m != (0, 0)).collect();

        let mode_jets = |x: [T; 2]| -> Vec<Jet<T>> {
            let ([s, r], pow) = mesh.ref_powers(x);
            let ls = legendre_derivs(degree, s);
            let lr = legendre_derivs(degree, r);
            modes.iter().map(|&(a, b)| Jet::from_powers(&taylor_coeffs(ls[a], lr[b]), &pow)).collect()
        };
        let bulk_by_point: Vec<Vec<Jet<T>>> = mesh.points.bulk.par_iter().map(|&x| mode_jets(x)).collect();
        let bulk_modes: Vec<Vec<Jet<T>>> = (0..modes.len()).map(|k| bulk_by_point.iter().map(|v| v[k]).collect()).collect();
        let top_modes: Vec<Vec<T>> = (0..modes.len())
            .map(|k| {
                // P_b(1) = 1 on the top edge.
                let (a, _) = modes[k];
                mesh.points.top.iter().map(|x| legendre_derivs(degree, x[0] / mesh.ell)[a][0]).collect()
            })
            .collect();
        let area = mesh.area();
        let means: Vec<T> = bulk_modes.iter().map(|v| v.iter().zip(&mesh.w_bulk).fold(T::zero(), |acc, (j, &w)| acc + w * j.value()) / area).collect();

        // Test fields: (type, a, b).
        let kinds: Vec<(usize, usize, usize)> = (0..2).flat_map(|t| (0..=nt).flat_map(move |a| (0..=nt).map(move |b| (t, a, b)))).collect();
        let test_at = |x: [T; 2]| -> Vec<[Jet<T>; 2]> {
            let ([s, r], pow) = mesh.ref_powers(x);
            let ls = legendre_derivs(nt, s);
            let lr = legendre_derivs(nt, r);
            kinds
                .iter()
                .map(|&(t, a, b)| {
                    if t == 0 {
                        [Jet::from_powers(&taylor_coeffs(bubble_s(ls[a], s), lr[b]), &pow), Jet::zero()]
                    } else {
                        [Jet::zero(), Jet::from_powers(&taylor_coeffs(ls[a], bubble_r(lr[b], r)), &pow)]
                    }
                })
                .collect()
        };
        let eval = |pts: &[[T; 2]]| -> Vec<Vec<[Jet<T>; 2]>> { pts.par_iter().map(|&x| test_at(x)).collect() };
        let (bulk, top, left, right, bottom) =
            (eval(&mesh.points.bulk), eval(&mesh.points.top), eval(&mesh.points.left), eval(&mesh.points.right), eval(&mesh.points.bottom));
        let col = |v: &Vec<Vec<[Jet<T>; 2]>>, k: usize| v.iter().map(|p| p[k]).collect();
        let tests = FieldTable {
            fields: (0..kinds.len())
                .map(|k| PointField { bulk: col(&bulk, k), top: col(&top, k), left: col(&left, k), right: col(&right, k), bottom: col(&bottom, k) })
                .collect(),
        };

        // Exact traces ϕ·𝒩₀ on r = 1.
        let trace = |k: usize, x1: T| -> (T, T) {
            let (t, a, b) = kinds[k];
            let s = x1 / mesh.ell;
            let ls = legendre_derivs(nt, s);
            let pb1 = legendre_derivs(nt, T::one())[b][0];
            let il = T::one() / mesh.ell;
            if t == 0 {
                let z = mesh.zeta0.derivs(x1);
                let u = bubble_s(ls[a], s);
                (-z[1] * u[0] * pb1, -(z[2] * u[0] + z[1] * u[1] * il) * pb1)
            } else {
                let two = c::<T>(2.0);
                (two * ls[a][0] * pb1, two * ls[a][1] * il * pb1)
            }
        };
        let nk = kinds.len();
        let ntop = mesh.points.top.len();
        let mut test_top = Mat::zeros(nk, ntop);
        let mut test_slope = Mat::zeros(nk, ntop);
        for k in 0..nk {
            for (p, x) in mesh.points.top.iter().enumerate() {
                let (v, d) = trace(k, x[0]);
                test_top[(k, p)] = v;
                test_slope[(k, p)] = d;
            }
        }
        let test_corner = (0..nk).map(|k| (trace(k, -mesh.ell).0, trace(k, mesh.ell).0)).collect();

        let mut matrix = Mat::zeros(nk, modes.len() + 1);
        for k in 0..nk {
            let div: Vec<T> = tests.fields[k].bulk.iter().map(|w| w[0].dx() + w[1].dy()).collect();
            matrix[(k, 0)] = div.iter().zip(&mesh.w_bulk).fold(T::zero(), |a, (&d, &w)| a + w * d);
            for (q, mv) in bulk_modes.iter().enumerate() {
                let mut s = T::zero();
                for p in 0..div.len() {
                    s += mesh.w_bulk[p] * (mv[p].value() - means[q]) * div[p];
                }
                matrix[(k, q + 1)] = s;
            }
        }
        Self { degree, modes, means, tests, test_top, test_slope, test_corner, matrix, bulk_modes, top_modes }
    }

    /// Jets of `q` at the bulk points.
    pub fn bulk_jets(&self, p: &Pressure<T>) -> Vec<Jet<T>> {
        let n = self.bulk_modes.first().map_or(0, Vec::len);
        (0..n)
            .map(|i| {
                let mut j = Jet::constant(p.qbar);
                for (k, &ck) in p.coeffs.iter().enumerate() {
                    j.axpy(ck, &self.bulk_modes[k][i]);
                    j.c[0] -= ck * self.means[k];
                }
                j
            })
            .collect()
    }

    /// Values of `q` at the top points.
    pub fn top_values(&self, p: &Pressure<T>) -> Vec<T> {
        let n = self.top_modes.first().map_or(0, Vec::len);
        (0..n).map(|i| p.coeffs.iter().enumerate().fold(p.qbar, |acc, (k, &ck)| acc + ck * (self.top_modes[k][i] - self.means[k]))).collect()
    }

    /// `∫_Ω q⁰` by quadrature.
    pub fn zero_mean_integral(&self, p: &Pressure<T>, mesh: &Mesh<T>) -> T {
        let mut s = T::zero();
        for (i, &w) in mesh.w_bulk.iter().enumerate() {
            let mut v = T::zero();
            for (k, &ck) in p.coeffs.iter().enumerate() {
                v += ck * (self.bulk_modes[k][i].value() - self.means[k]);
            }
            s += w * v;
        }
        s
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Pressure<T> {
    pub qbar: T,
    /// Coefficients of the zero-mean part `q⁰`.
    pub coeffs: Vec<T>,
    /// Least-squares residual of the pressure equations.
    pub residual: T,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StrongResiduals<T> {
    pub momentum: T,
    pub divergence: T,
    pub stress: T,
    pub slip: T,
    pub kinematic: T,
    pub contact_left: T,
    pub contact_right: T,
    pub impermeability: T,
}

impl<T: Real> StrongResiduals<T> {
    pub fn as_array(&self) -> [T; 8] {
        [self.momentum, self.divergence, self.stress, self.slip, self.kinematic, self.contact_left, self.contact_right, self.impermeability]
    }

    pub const NAMES: [&'static str; 8] = ["momentum", "divergence", "stress", "slip", "kinematic", "contact_left", "contact_right", "impermeability"];
}

/// Time-level data of the Volterra system.
#[derive(Clone, Debug)]
pub struct StepSystem<T> {
    pub t: T,
    pub mass: Mat<T>,
    /// `Rcoupᵀ + Stiff + ε Surf + Corner`.
    pub damping: Mat<T>,
    pub surf: Mat<T>,
    /// Projected forcings minus `(ξ₀, w^j·𝒩)_{1,Σ}`.
    pub rhs: Vec<T>,
}

impl<T: Real> StepSystem<T> {
    pub fn new(t: T, forms: &FormMatrices<T>, epsilon: T, rhs: Vec<T>) -> Self {
        let mut damping = forms.rcoup.transpose();
        damping.axpy(T::one(), &forms.stiff);
        damping.axpy(epsilon, &forms.surf);
        damping.axpy(T::one(), &forms.corner);
        Self { t, mass: forms.mass.clone(), damping, surf: forms.surf.clone(), rhs }
    }

    /// `ḋ = Mass⁻¹(F − B d − Surf Q)`.
    pub fn rate(&self, d: &[T], q: &[T]) -> Result<Vec<T>> {
        let lu = Lu::factor(&self.mass).ok_or(Error::SingularStepMatrix { pivot_ratio: 0.0 })?;
        let bd = self.damping.matvec(d);
        let sq = self.surf.matvec(q);
        let r: Vec<T> = (0..d.len()).map(|i| self.rhs[i] - bd[i] - sq[i]).collect();
        Ok(lu.solve(&r))
    }
}

/// Coefficient state after a step.
#[derive(Clone, Debug, PartialEq)]
pub struct CoeffState<T> {
    pub step: usize,
    pub t: T,
    pub d: Vec<T>,
    /// `Q(t) = ∫₀ᵗ d`.
    pub q_int: Vec<T>,
    pub ddot: Vec<T>,
}

/// One implicit trapezoidal step from `prev` (on `sys0`) to `sys1`.
pub fn step<T: Real>(prev: &CoeffState<T>, sys0: &StepSystem<T>, sys1: &StepSystem<T>, dt: T) -> Result<CoeffState<T>> {
    let tol = c::<T>(1e-9) * (T::one() + sys1.t.abs());
    if (prev.t - sys0.t).abs() > tol || (sys1.t - sys0.t - dt).abs() > tol {
        return Err(Error::HistoryGap(format!(
            "state at t = {}, systems at {} and {}, dt = {}",
            prev.t.to_f64_lossy(),
            sys0.t.to_f64_lossy(),
            sys1.t.to_f64_lossy(),
            dt.to_f64_lossy()
        )));
    }
    let n = prev.d.len();
    let h = dt * c(0.5);
    let mut a = sys1.mass.clone();
    a.axpy(h, &sys1.damping);
    a.axpy(h * h, &sys1.surf);
    let lu = Lu::factor(&a).ok_or(Error::SingularStepMatrix { pivot_ratio: 0.0 })?;
    if lu.pivot_ratio < c(1e-14) {
        return Err(Error::SingularStepMatrix { pivot_ratio: lu.pivot_ratio.to_f64_lossy() });
    }
    let pred: Vec<T> = (0..n).map(|i| prev.d[i] + h * prev.ddot[i]).collect();
    let mp = sys1.mass.matvec(&pred);
    let sq = sys1.surf.matvec(&prev.q_int);
    let sd = sys1.surf.matvec(&prev.d);
    let b: Vec<T> = (0..n).map(|i| mp[i] + h * (sys1.rhs[i] - sq[i] - h * sd[i])).collect();
    let d1 = lu.solve(&b);
    let q1: Vec<T> = (0..n).map(|i| prev.q_int[i] + h * (prev.d[i] + d1[i])).collect();
    let ddot = sys1.rate(&d1, &q1)?;
    Ok(CoeffState { step: prev.step + 1, t: sys1.t, d: d1, q_int: q1, ddot })
}

/// Everything needed to evaluate fields at one time level.
#[derive(Clone, Debug)]
pub struct Frame<T> {
    pub w: FieldTable<T>,
    pub forms: FormMatrices<T>,
    pub forcing: ForcingSample<T>,
    /// Projected forcings without the `ξ₀` datum.
    pub forcing_proj: Vec<T>,
}

pub struct LinearProblem<'a, T: Real> {
    pub params: PhysicalParams<T>,
    pub epsilon: T,
    pub mesh: &'a Mesh<T>,
    pub basis: &'a Basis<T>,
    pub pressure: &'a PressureSpace<T>,
    /// Geometry per time level; a single entry freezes the geometry.
    pub frames: &'a [GeometryCache<T>],
    pub forcing: &'a dyn Forcing<T>,
    pub d0: Vec<T>,
    pub xi0: SurfaceFunction<T>,
    pub dt: T,
    pub steps: usize,
}

impl<'a, T: Real> LinearProblem<'a, T> {
    pub fn cache(&self, k: usize) -> &GeometryCache<T> {
        &self.frames[k.min(self.frames.len() - 1)]
    }

    pub fn frame(&self, k: usize) -> Frame<T> {
        let cache = self.cache(k);
        let t = self.dt * T::from_usize_lossy(k);
        let w = push_forward(self.basis, cache);
        let forms = assemble(self.basis, &w, self.mesh, cache, &self.params);
        let forcing = self.forcing.sample(k, t, self.mesh, cache);
        let corner = self.basis.w_corner();
        let tr = TraceData { top: &self.basis.trace_top, slope: &self.basis.slope_top, corner: &corner };
        let forcing_proj = project_forcing(&w, &tr, &forcing, self.mesh, cache);
        Frame { w, forms, forcing, forcing_proj }
    }
}

/// Full state at one time level.
#[derive(Clone, Debug)]
pub struct SimState<T> {
    pub coeffs: CoeffState<T>,
    pub xi: SurfaceFunction<T>,
    pub dxi: SurfaceFunction<T>,
    pub pressure: Pressure<T>,
    /// `½dᵀMass d + ½‖ξ‖²_{1,Σ}`.
    pub energy: T,
    /// `((v, v)) + ε‖∂_tξ‖²_{1,Σ} + [∂_tξ]²_ℓ`.
    pub dissipation: T,
    /// Forcing work plus `½∫|v|²∂_tJ`.
    pub work: T,
    pub residuals: StrongResiduals<T>,
    pub velocity: PointField<T>,
    /// `∂_tξ(∓ℓ)`.
    pub corner_rate: (T, T),
    /// `∫_Ω q⁰`.
    pub q0_integral: T,
    /// `ḋᵀMass ḋ` and `ḋᵀStiff ḋ`.
    pub rate_energy: T,
    pub rate_dissipation: T,
    /// Spectral `‖ξ‖²_{H^{3/2}}` and `‖∂_tξ‖²_{1,Σ}`.
    pub xi_h32: T,
    pub dxi_norm: T,
}

impl<T: Real> SimState<T> {
    pub fn t(&self) -> T {
        self.coeffs.t
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory<T> {
    pub epsilon: T,
    pub dt: T,
    pub states: Vec<SimState<T>>,
}

impl<T: Real> Trajectory<T> {
    pub fn final_state(&self) -> &SimState<T> {
        self.states.last().expect("trajectory has at least the initial state")
    }

    /// Comma-separated time series with a header row. Floats use 17
    /// significant digits so that a replay reads back the same values.
    pub fn to_csv(&self) -> String {
        let mut out = CSV_COLUMNS.join(",");
        for n in StrongResiduals::<T>::NAMES {
            out.push_str(",res_");
            out.push_str(n);
        }
        out.push('\n');
        let f = |v: T| format!("{:.17e}", v.to_f64_lossy());
        for s in &self.states {
            let vals = [
                self.epsilon,
                s.t(),
                s.energy,
                s.dissipation,
                s.work,
                s.rate_energy,
                s.rate_dissipation,
                s.xi_h32,
                s.dxi_norm,
                s.corner_rate.0,
                s.corner_rate.1,
                s.pressure.qbar,
            ];
            let _ = write!(out, "{}", s.coeffs.step);
            for v in vals.into_iter().chain(s.residuals.as_array()) {
                out.push(',');
                out.push_str(&f(v));
            }
            out.push('\n');
        }
        out
    }
}

/// Leading columns of [`Trajectory::to_csv`]; residual columns follow.
pub const CSV_COLUMNS: [&str; 13] =
    ["step", "epsilon", "t", "energy", "dissipation", "work", "rate_energy", "rate_dissipation", "xi_h32", "dxi_norm", "dxi_left", "dxi_right", "qbar"];

/// Recover `(q̄, q⁰)` at one time level.
pub fn recover_pressure<T: Real>(
    problem: &LinearProblem<'_, T>,
    k: usize,
    frame: &Frame<T>,
    st: &CoeffState<T>,
    xi: &SurfaceFunction<T>,
    dxi: &SurfaceFunction<T>,
) -> Result<Pressure<T>> {
    let ps = problem.pressure;
    let cache = problem.cache(k);
    let ones = vec![T::one(); ps.tests.len()];
    let tests = ps.tests.push(cache, &ones);
    let cf = cross_forms(&frame.w, &tests, problem.mesh, cache, &problem.params);
    let tr = TraceData { top: &ps.test_top, slope: &ps.test_slope, corner: &ps.test_corner };
    let rhs = project_forcing(&tests, &tr, &frame.forcing, problem.mesh, cache);
    let theta = xi.axpy(problem.epsilon, dxi);
    let surf = surface_pairing(problem.mesh, &problem.params, &theta, &tr);
    let (dl, dr) = (dxi.value(-problem.mesh.ell), dxi.value(problem.mesh.ell));
    let kappa = problem.params.kappa;
    let lambda: Vec<T> = (0..ps.tests.len())
        .map(|r| {
            let mut s = surf[r] + kappa * (dl * ps.test_corner[r].0 + dr * ps.test_corner[r].1) - rhs[r];
            for i in 0..st.d.len() {
                s += st.ddot[i] * cf.mass[(i, r)] + st.d[i] * (cf.rcoup[(i, r)] + cf.stiff[(i, r)]);
            }
            s
        })
        .collect();
    let (x, residual) =
        least_squares(&ps.matrix, &lambda, c(1e-12)).ok_or_else(|| Error::SaddlePointSolveFailure("pressure least-squares matrix is rank deficient".into()))?;
    Ok(Pressure { qbar: x[0], coeffs: x[1..].to_vec(), residual })
}

/// Discrete `L²` norms of the residuals of the seven strong equations.
#[allow(clippy::too_many_arguments)]
pub fn strong_residuals<T: Real>(
    problem: &LinearProblem<'_, T>,
    k: usize,
    frame: &Frame<T>,
    st: &CoeffState<T>,
    v: &PointField<T>,
    xi: &SurfaceFunction<T>,
    dxi: &SurfaceFunction<T>,
    pressure: &Pressure<T>,
) -> StrongResiduals<T> {
    let mesh = problem.mesh;
    let cache = problem.cache(k);
    let prm = &problem.params;
    let f = &frame.forcing;
    let mu = prm.mu;
    let vdot = frame.w.linear_combination(&st.ddot);
    let q = problem.pressure.bulk_jets(pressure);
    let qtop = problem.pressure.top_values(pressure);
    let two = c::<T>(2.0);
    let sym = |ga: &[[Jet<T>; 2]; 2]| -> [[Jet<T>; 2]; 2] { [[ga[0][0] * two, ga[0][1] + ga[1][0]], [ga[1][0] + ga[0][1], ga[1][1] * two]] };

    let mut mom = T::zero();
    let mut div = T::zero();
    for (p, g) in cache.bulk.iter().enumerate() {
        let vv = &v.bulk[p];
        let r = g.r();
        let val = [vv[0].value(), vv[1].value()];
        let am = g.amat();
        let dd = sym(&g.grad_a(vv));
        let gq = [q[p].dx(), q[p].dy()];
        let mut res = [T::zero(); 2];
        for i in 0..2 {
            let dt_v = vdot.bulk[p][i].value() + r[i][0] * val[0] + r[i][1] * val[1];
            let grad_q = am[i][0].value() * gq[0] + am[i][1].value() * gq[1];
            let mut divd = T::zero();
            for j in 0..2 {
                let dij = [dd[i][j].dx(), dd[i][j].dy()];
                divd += am[j][0].value() * dij[0] + am[j][1].value() * dij[1];
            }
            res[i] = dt_v + grad_q - mu * divd - f.f1[p][i];
        }
        mom += mesh.w_bulk[p] * (res[0] * res[0] + res[1] * res[1]);
        let dv = g.div_a(vv).value();
        div += mesh.w_bulk[p] * dv * dv;
    }

    let theta = xi.axpy(problem.epsilon, dxi);
    let mut stress = T::zero();
    let mut kin = T::zero();
    for (p, g) in cache.top.iter().enumerate() {
        let x1 = mesh.points.top[p][0];
        let n = cache.normal[p];
        let vv = &v.top[p];
        let dd = sym(&g.grad_a(vv));
        let z = mesh.zeta0.derivs(x1);
        let th = theta.derivs(x1);
        let w2 = T::one() + z[1] * z[1];
        let curv = th[2] / w2.powf(c(1.5)) - th[1] * c::<T>(3.0) * z[1] * z[2] / w2.powf(c(2.5));
        let kop = prm.g * th[0] - prm.sigma * curv;
        let coef = kop - f.f3_dx[p];
        for i in 0..2 {
            let sn = qtop[p] * n[i] - mu * (dd[i][0].value() * n[0] + dd[i][1].value() * n[1]);
            let r = sn - coef * n[i] - f.f4[p][i];
            stress += mesh.w_top[p] * r * r;
        }
        let kr = dxi.value(x1) - (vv[0].value() * n[0] + vv[1].value() * n[1]);
        kin += mesh.w_top[p] * kr * kr;
    }

    let (nl, nr) = (mesh.points.left.len(), mesh.points.right.len());
    let mut slip = T::zero();
    let mut imp = T::zero();
    let sides = [(&v.left, &cache.left, &mesh.w_left, -T::one(), 0usize), (&v.right, &cache.right, &mesh.w_right, T::one(), nl)];
    for (vals, geo, wts, sign, off) in sides {
        for (p, (vv, g)) in vals.iter().zip(geo).enumerate() {
            let dd = sym(&g.grad_a(vv));
            let r = -sign * mu * dd[1][0].value() - prm.beta * vv[1].value() - f.f5[off + p];
            slip += wts[p] * r * r;
            let vn = sign * vv[0].value();
            imp += wts[p] * vn * vn;
        }
    }
    for (p, (vv, g)) in v.bottom.iter().zip(&cache.bottom).enumerate() {
        let dd = sym(&g.grad_a(vv));
        let r = mu * dd[0][1].value() - prm.beta * vv[0].value() - f.f5[nl + nr + p];
        slip += mesh.w_bottom[p] * r * r;
        imp += mesh.w_bottom[p] * vv[1].value() * vv[1].value();
    }

    let ell = mesh.ell;
    let contact = |x1: T, sgn: T, f3: T, f7: T| -> T {
        let th = theta.derivs(x1);
        let cw = curvature_weight(mesh, x1);
        (-sgn * prm.sigma * th[1] / cw - prm.kappa * dxi.value(x1) - sgn * f3 - f7).abs()
    };
    StrongResiduals {
        momentum: mom.sqrt(),
        divergence: div.sqrt(),
        stress: stress.sqrt(),
        slip: slip.sqrt(),
        kinematic: kin.sqrt(),
        contact_left: contact(-ell, -T::one(), f.f3_corner.0, f.f7.0),
        contact_right: contact(ell, T::one(), f.f3_corner.1, f.f7.1),
        impermeability: imp.sqrt(),
    }
}

/// Assemble the full state at level `k` from coefficients.
pub fn evaluate_state<T: Real>(problem: &LinearProblem<'_, T>, k: usize, frame: &Frame<T>, st: CoeffState<T>) -> Result<SimState<T>> {
    let ell = problem.mesh.ell;
    let xi = problem.xi0.axpy(T::one(), &problem.basis.trace_of(&st.q_int, ell));
    let dxi = problem.basis.trace_of(&st.d, ell);
    let pressure = recover_pressure(problem, k, frame, &st, &xi, &dxi)?;
    let velocity = frame.w.linear_combination(&st.d);
    let residuals = strong_residuals(problem, k, frame, &st, &velocity, &xi, &dxi, &pressure);
    let fm = &frame.forms;
    let energy = c::<T>(0.5) * (dot(&st.d, &fm.mass.matvec(&st.d)) + surface_norm_sq(problem.mesh, &problem.params, &xi));
    let dissipation = dot(&st.d, &fm.stiff.matvec(&st.d)) + problem.epsilon * dot(&st.d, &fm.surf.matvec(&st.d)) + dot(&st.d, &fm.corner.matvec(&st.d));
    let work = dot(&frame.forcing_proj, &st.d) + c::<T>(0.5) * dot(&st.d, &fm.jt_mass.matvec(&st.d));
    let corner_rate = (dxi.value(-ell), dxi.value(ell));
    let q0_integral = problem.pressure.zero_mean_integral(&pressure, problem.mesh);
    let rate_energy = dot(&st.ddot, &fm.mass.matvec(&st.ddot));
    let rate_dissipation = dot(&st.ddot, &fm.stiff.matvec(&st.ddot));
    let xi_h32 = spectral_norm_sq(&xi, c(1.5), default_norm_modes(xi.degree()));
    let dxi_norm = surface_norm_sq(problem.mesh, &problem.params, &dxi);
    Ok(SimState {
        coeffs: st,
        xi,
        dxi,
        pressure,
        energy,
        dissipation,
        work,
        residuals,
        velocity,
        corner_rate,
        q0_integral,
        rate_energy,
        rate_dissipation,
        xi_h32,
        dxi_norm,
    })
}

/// Integrate the problem over `steps` levels of size `dt`.
pub fn solve_linear<T: Real>(problem: &LinearProblem<'_, T>) -> Result<Trajectory<T>> {
    let basis = problem.basis;
    let corner = basis.w_corner();
    let tr = TraceData { top: &basis.trace_top, slope: &basis.slope_top, corner: &corner };
    let b0 = surface_pairing(problem.mesh, &problem.params, &problem.xi0, &tr);
    let system = |k: usize, frame: &Frame<T>| {
        let rhs: Vec<T> = frame.forcing_proj.iter().zip(&b0).map(|(&f, &b)| f - b).collect();
        StepSystem::new(problem.dt * T::from_usize_lossy(k), &frame.forms, problem.epsilon, rhs)
    };
    let frozen = problem.frames.len() == 1;
    let mut frame = problem.frame(0);
    let mut sys = system(0, &frame);
    let zeros = vec![T::zero(); basis.m];
    let ddot = sys.rate(&problem.d0, &zeros)?;
    let mut cs = CoeffState { step: 0, t: T::zero(), d: problem.d0.clone(), q_int: zeros, ddot };
    let mut states = vec![evaluate_state(problem, 0, &frame, cs.clone())?];
    for k in 1..=problem.steps {
        let next_frame = if frozen {
            let mut f = frame.clone();
            let t = problem.dt * T::from_usize_lossy(k);
            f.forcing = problem.forcing.sample(k, t, problem.mesh, problem.cache(k));
            f.forcing_proj = project_forcing(&f.w, &tr, &f.forcing, problem.mesh, problem.cache(k));
            f
        } else {
            problem.frame(k)
        };
        let next_sys = system(k, &next_frame);
        cs = step(&cs, &sys, &next_sys, problem.dt)?;
        states.push(evaluate_state(problem, k, &next_frame, cs.clone())?);
        frame = next_frame;
        sys = next_sys;
    }
    Ok(Trajectory { epsilon: problem.epsilon, dt: problem.dt, states })
}

/// `𝒲(0)`-projection of an initial velocity onto the basis:
/// `d_j = ((u, w^j)) + ε(u·𝒩, w^j·𝒩)_{H¹} + [u·𝒩, w^j·𝒩]_ℓ`.
pub fn project_velocity<T: Real>(
    basis: &Basis<T>,
    w: &FieldTable<T>,
    mesh: &Mesh<T>,
    cache: &GeometryCache<T>,
    params: &PhysicalParams<T>,
    u: &PointField<T>,
    trace: &SurfaceFunction<T>,
) -> Vec<T> {
    let single = FieldTable { fields: vec![u.clone()] };
    let cf = cross_forms(w, &single, mesh, cache, params);
    let corner = basis.w_corner();
    let (al, ar) = (trace.value(-mesh.ell), trace.value(mesh.ell));
    (0..basis.m)
        .map(|j| {
            let mut s = cf.stiff[(j, 0)];
            for (p, x) in mesh.points.top.iter().enumerate() {
                let d = trace.derivs(x[0]);
                s += basis.epsilon * mesh.w_top[p] * (d[0] * basis.trace_top[(j, p)] + d[1] * basis.slope_top[(j, p)]);
            }
            s + params.kappa * (al * corner[j].0 + ar * corner[j].1)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_system(t: f64, rhs: f64) -> StepSystem<f64> {
        let one = Mat::from_rows(vec![vec![1.0]]);
        StepSystem { t, mass: one.clone(), damping: one.clone(), surf: one, rhs: vec![rhs] }
    }

    fn scalar_error(n: usize) -> f64 {
        let t_end = 2.0;
        let dt = t_end / n as f64;
        let mut s = CoeffState { step: 0, t: 0.0, d: vec![1.0], q_int: vec![0.0], ddot: vec![-1.0] };
        for k in 0..n {
            s = step(&s, &scalar_system(k as f64 * dt, 0.0), &scalar_system((k + 1) as f64 * dt, 0.0), dt).unwrap();
        }
        let r3 = 3f64.sqrt();
        let exact = (-t_end / 2.0).exp() * ((r3 * t_end / 2.0).cos() - (r3 * t_end / 2.0).sin() / r3);
        (s.d[0] - exact).abs()
    }

    #[test]
    fn scalar_memory_equation_is_second_order() {
        let e1 = scalar_error(40);
        let e2 = scalar_error(80);
        let order = (e1 / e2).log2();
        assert!((order - 2.0).abs() < 0.1, "order {order}");
    }

    #[test]
    fn history_gap_detected() {
        let s = CoeffState { step: 0, t: 0.0, d: vec![1.0], q_int: vec![0.0], ddot: vec![-1.0] };
        let err = step(&s, &scalar_system(0.0, 0.0), &scalar_system(0.3, 0.0), 0.1).unwrap_err();
        assert!(matches!(err, Error::HistoryGap(_)));
    }

    #[test]
    fn zero_data_stays_zero() {
        let mut s = CoeffState { step: 0, t: 0.0, d: vec![0.0], q_int: vec![0.0], ddot: vec![0.0] };
        for k in 0..5 {
            s = step(&s, &scalar_system(k as f64 * 0.1, 0.0), &scalar_system((k + 1) as f64 * 0.1, 0.0), 0.1).unwrap();
        }
        assert_eq!(s.d, vec![0.0]);
        assert_eq!(s.q_int, vec![0.0]);
    }
}
