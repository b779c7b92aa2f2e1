//! Flattening-map coefficients `A, J, K, W`, the matrices `𝒜, M, R`, and the
//! nonlinear boundary remainders.
//!
//! The map is `Φ(x) = (x₁, x₂ + φ(x₂)/ζ₀(x₁) · η̄(x))`. Its second component is
//! built as an order-3 jet at every sample point, so `A = ∂₁Φ₂` and
//! `J = ∂₂Φ₂` come out as order-2 jets and all derived fields carry exact
//! first and second derivatives.

use rayon::prelude::*;

use crate::config::ContactLaw;
use crate::equilibrium::EquilibriumSurface;
use crate::error::{Error, Result};
use crate::jet::{taylor_from_derivs, Jet};
use crate::scalar::{c, Real};
use crate::surface::{PoissonLift, SurfaceFunction};

/// `φ(z) = z · S((z − a)/(b − a))` with the quintic smoothstep `S`,
/// `a = ¼ min ζ₀`, `b = ½ min ζ₀`. Returns `[φ, φ′, φ″, φ‴]`.
pub fn cutoff_derivs<T: Real>(z: T, min_zeta0: T) -> [T; 4] {
    let a = min_zeta0 * c(0.25);
    let b = min_zeta0 * c(0.5);
    if z <= a {
        return [T::zero(); 4];
    }
    if z >= b {
        return [z, T::one(), T::zero(), T::zero()];
    }
    let d = b - a;
    let t = (z - a) / d;
    let t2 = t * t;
    let s0 = t2 * t * (c::<T>(10.0) - c::<T>(15.0) * t + c::<T>(6.0) * t2);
    let s1 = c::<T>(30.0) * t2 * (T::one() - t) * (T::one() - t);
    let s2 = c::<T>(60.0) * t - c::<T>(180.0) * t2 + c::<T>(120.0) * t2 * t;
    let s3 = c::<T>(60.0) - c::<T>(360.0) * t + c::<T>(360.0) * t2;
    [z * s0, s0 + z * s1 / d, (s1 + s1) / d + z * s2 / (d * d), c::<T>(3.0) * s2 / (d * d) + z * s3 / (d * d * d)]
}

/// `(φ, φ′)` of the cutoff.
pub fn cutoff_phi<T: Real>(z: T, min_zeta0: T) -> (T, T) {
    let d = cutoff_derivs(z, min_zeta0);
    (d[0], d[1])
}

/// `ℛ(y, z) = (y+z)/√(1+(y+z)²) − y/√(1+y²) − z/(1+y²)^{3/2}`.
pub fn curvature_remainder<T: Real>(y: T, z: T) -> T {
    let f = |v: T| v / (T::one() + v * v).sqrt();
    let q = T::one() + y * y;
    // Direct subtraction cancels catastrophically for small z; switch to the
    // Taylor form there.
    if z.abs() < c(1e-4) {
        let f2 = -c::<T>(3.0) * y / (q * q * q.sqrt());
        let f3 = c::<T>(3.0) * (c::<T>(4.0) * y * y - T::one()) / (q * q * q * q.sqrt());
        let f4 = c::<T>(15.0) * y * (c::<T>(3.0) - c::<T>(4.0) * y * y) / (q * q * q * q * q.sqrt());
        return z * z * (f2 * c(0.5) + z * (f3 / c(6.0) + z * f4 / c(24.0)));
    }
    f(y + z) - f(y) - z / (q * q.sqrt())
}

/// `∂_z ℛ(y, z) = (1+(y+z)²)^{-3/2} − (1+y²)^{-3/2}`.
pub fn curvature_remainder_dz<T: Real>(y: T, z: T) -> T {
    let g = |v: T| T::one() / (T::one() + v * v).powf(c(1.5));
    g(y + z) - g(y)
}

/// `∂_y ℛ(y, z)`.
pub fn curvature_remainder_dy<T: Real>(y: T, z: T) -> T {
    let g = |v: T| T::one() / (T::one() + v * v).powf(c(1.5));
    let q = T::one() + y * y;
    g(y + z) - g(y) + c::<T>(3.0) * z * y / (q * q * q.sqrt())
}

/// `F³ = σℛ(ζ₀′, η′)` together with `∂₁F³`.
pub fn surface_remainder<T: Real>(sigma: T, zeta0: [T; 4], eta: [T; 4]) -> (T, T) {
    let (y, z) = (zeta0[1], eta[1]);
    let v = sigma * curvature_remainder(y, z);
    let dx = sigma * (curvature_remainder_dy(y, z) * zeta0[2] + curvature_remainder_dz(y, z) * eta[2]);
    (v, dx)
}

/// `F⁷ = κ𝒲̂(∂_tη)` at `(−ℓ, +ℓ)`.
pub fn corner_remainder<T: Real>(law: &ContactLaw, deta: (T, T)) -> (T, T) {
    let k = law.kappa();
    let f = |z: T| T::lit(k * law.hat_w(z.to_f64_lossy()));
    (f(deta.0), f(deta.1))
}

/// Coefficient fields at one point of `Ω`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointGeometry<T> {
    pub x: [T; 2],
    pub a: Jet<T>,
    pub j: Jet<T>,
    pub k: Jet<T>,
    /// `W = φ/ζ₀`.
    pub w: T,
    /// `∂_tη̄`.
    pub lift_t: T,
    pub a_t: T,
    pub j_t: T,
}

impl<T: Real> PointGeometry<T> {
    pub fn identity(x: [T; 2]) -> Self {
        Self { x, a: Jet::zero(), j: Jet::constant(T::one()), k: Jet::constant(T::one()), w: T::zero(), lift_t: T::zero(), a_t: T::zero(), j_t: T::zero() }
    }

    /// `M = K∇Φ = [[K, 0], [KA, 1]]`.
    pub fn m(&self) -> [[Jet<T>; 2]; 2] {
        [[self.k, Jet::zero()], [self.k * self.a, Jet::constant(T::one())]]
    }

    /// `𝒜 = (∇Φ)^{-T} = [[1, −AK], [0, K]]`.
    pub fn amat(&self) -> [[Jet<T>; 2]; 2] {
        [[Jet::constant(T::one()), -(self.a * self.k)], [Jet::zero(), self.k]]
    }

    /// `∇Φ = [[1, 0], [A, J]]` (values).
    pub fn grad_phi(&self) -> [[T; 2]; 2] {
        [[T::one(), T::zero()], [self.a.value(), self.j.value()]]
    }

    /// `R = ∂_tM M⁻¹ = [[−J_t/J, 0], [A_t − A J_t/J, 0]]`.
    pub fn r(&self) -> [[T; 2]; 2] {
        let jv = self.j.value();
        let av = self.a.value();
        [[-self.j_t / jv, T::zero()], [self.a_t - av * self.j_t / jv, T::zero()]]
    }

    /// `M v` for a vector of jets.
    pub fn apply_m(&self, v: &[Jet<T>; 2]) -> [Jet<T>; 2] {
        let ka = self.k * self.a;
        [self.k * v[0], ka * v[0] + v[1]]
    }

    /// `(∇_𝒜 f)_i = 𝒜_ij ∂_j f` for each component of `v`, as jets of order 1:
    /// `out[i][k] = 𝒜_kj ∂_j v_i`.
    pub fn grad_a(&self, v: &[Jet<T>; 2]) -> [[Jet<T>; 2]; 2] {
        let am = self.amat();
        let mut out = [[Jet::zero(); 2]; 2];
        for i in 0..2 {
            let d = [v[i].diff_x(), v[i].diff_y()];
            for k in 0..2 {
                out[i][k] = am[k][0] * d[0] + am[k][1] * d[1];
            }
        }
        out
    }

    /// `div_𝒜 v = 𝒜_ij ∂_j v_i`, as a jet valid to order 1.
    pub fn div_a(&self, v: &[Jet<T>; 2]) -> Jet<T> {
        let g = self.grad_a(v);
        g[0][0] + g[1][1]
    }
}

/// Evaluator of the flattening map for a given surface perturbation.
#[derive(Clone, Debug)]
pub struct Flattening<T> {
    pub zeta0: SurfaceFunction<T>,
    pub depth: T,
    pub min_zeta0: T,
    lift: PoissonLift<T>,
    lift_t: PoissonLift<T>,
    trivial: bool,
    trivial_t: bool,
}

impl<T: Real> Flattening<T> {
    pub fn new(eq: &EquilibriumSurface<T>, depth: T, eta: &SurfaceFunction<T>, deta: &SurfaceFunction<T>, modes: usize) -> Self {
        let is_zero = |f: &SurfaceFunction<T>| f.coeffs().iter().all(|&a| a == T::zero());
        Self {
            zeta0: eq.zeta0.clone(),
            depth,
            min_zeta0: eq.min_height,
            lift: PoissonLift::new(eta, modes),
            lift_t: PoissonLift::new(deta, modes),
            trivial: is_zero(eta),
            trivial_t: is_zero(deta),
        }
    }

    /// Jet of `Φ₂` at `x` (order 3) and of `∂_tΦ₂` (order 3).
    pub fn phi2(&self, x: [T; 2]) -> (Jet<T>, Jet<T>) {
        let [x1, x2] = x;
        let cut = cutoff_derivs(x2, self.min_zeta0);
        let y = Jet::var_y(x2);
        if cut == [T::zero(); 4] {
            return (y, Jet::zero());
        }
        let z0 = Jet::from_x_taylor(taylor_from_derivs(self.zeta0.derivs(x1)));
        let z = y - z0;
        let wj = Jet::from_y_taylor(taylor_from_derivs(cut)) * z0.recip();
        let bar = if self.trivial { Jet::zero() } else { self.lift.jet(x1, &z) };
        let bar_t = if self.trivial_t { Jet::zero() } else { self.lift_t.jet(x1, &z) };
        (y + wj * bar, wj * bar_t)
    }

    pub fn point(&self, x: [T; 2]) -> PointGeometry<T> {
        let [x1, x2] = x;
        let cut = cutoff_derivs(x2, self.min_zeta0);
        if cut == [T::zero(); 4] {
            return PointGeometry::identity(x);
        }
        let (p2, p2t) = self.phi2(x);
        let a = p2.diff_x();
        let j = p2.diff_y();
        let w = cut[0] / self.zeta0.value(x1);
        let lift_t = if w == T::zero() { T::zero() } else { p2t.value() / w };
        PointGeometry { x, a, j, k: j.recip(), w, lift_t, a_t: p2t.dx(), j_t: p2t.dy() }
    }
}

/// Point sets at which geometry is sampled.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointSets<T> {
    pub bulk: Vec<[T; 2]>,
    /// On `x₂ = ζ₀(x₁)`.
    pub top: Vec<[T; 2]>,
    pub left: Vec<[T; 2]>,
    pub right: Vec<[T; 2]>,
    pub bottom: Vec<[T; 2]>,
}

#[derive(Clone, Debug)]
pub struct GeometryCache<T> {
    pub bulk: Vec<PointGeometry<T>>,
    pub top: Vec<PointGeometry<T>>,
    pub left: Vec<PointGeometry<T>>,
    pub right: Vec<PointGeometry<T>>,
    pub bottom: Vec<PointGeometry<T>>,
    /// `𝒩 = (−∂₁(ζ₀+η), 1)` at the top points.
    pub normal: Vec<[T; 2]>,
    /// `𝒩₀ = (−∂₁ζ₀, 1)` at the top points.
    pub normal0: Vec<[T; 2]>,
    pub min_j: T,
    pub eta: SurfaceFunction<T>,
    pub deta: SurfaceFunction<T>,
}

impl<T: Real> GeometryCache<T> {
    /// All point geometries in the order bulk, top, left, right, bottom.
    pub fn all(&self) -> impl Iterator<Item = &PointGeometry<T>> {
        self.bulk.iter().chain(&self.top).chain(&self.left).chain(&self.right).chain(&self.bottom)
    }
}

/// Sample the flattening map for `η` (and `∂_tη`) at every point set.
pub fn build_geometry<T: Real>(
    eq: &EquilibriumSurface<T>,
    depth: T,
    eta: &SurfaceFunction<T>,
    deta: &SurfaceFunction<T>,
    points: &PointSets<T>,
    modes: usize,
) -> Result<GeometryCache<T>> {
    let fl = Flattening::new(eq, depth, eta, deta, modes);
    let eval = |pts: &[[T; 2]]| -> Vec<PointGeometry<T>> { pts.par_iter().map(|&x| fl.point(x)).collect() };
    let bulk = eval(&points.bulk);
    let top = eval(&points.top);
    let left = eval(&points.left);
    let right = eval(&points.right);
    let bottom = eval(&points.bottom);
    let normal0: Vec<[T; 2]> = points.top.iter().map(|x| [-eq.zeta0.slope(x[0]), T::one()]).collect();
    let normal: Vec<[T; 2]> = points.top.iter().map(|x| [-eq.zeta0.slope(x[0]) - eta.slope(x[0]), T::one()]).collect();
    let mut cache = GeometryCache { bulk, top, left, right, bottom, normal, normal0, min_j: T::infinity(), eta: eta.clone(), deta: deta.clone() };
    let min_j = cache.all().fold(T::infinity(), |m, p| m.min(p.j.value()));
    cache.min_j = min_j;
    if !(min_j > T::zero()) {
        return Err(Error::DegenerateMap { min_j: min_j.to_f64_lossy() });
    }
    Ok(cache)
}

/// `div_𝒜(M u)` at a point, for `u` given as jets.
pub fn pull_back_divergence<T: Real>(u: &[Jet<T>; 2], g: &PointGeometry<T>) -> T {
    g.div_a(&g.apply_m(u)).value()
}

/// Largest `|Mᵀ𝒩 − 𝒩₀|` over the top points.
pub fn trace_identity_defect<T: Real>(cache: &GeometryCache<T>) -> T {
    let mut worst = T::zero();
    for ((g, n), n0) in cache.top.iter().zip(&cache.normal).zip(&cache.normal0) {
        let k = g.k.value();
        let ka = k * g.a.value();
        // Mᵀ = [[K, KA], [0, 1]].
        let v = [k * n[0] + ka * n[1], n[1]];
        worst = worst.max((v[0] - n0[0]).abs()).max((v[1] - n0[1]).abs());
    }
    worst
}
