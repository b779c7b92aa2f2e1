//! Scalar fields on `(−ℓ, ℓ)`, their lift into the bulk, and fractional
//! Sobolev norm surrogates.
//!
//! A [`SurfaceFunction`] is a polynomial of degree `N_s` stored both as
//! Legendre coefficients in `x/ℓ` and as values on the Legendre–Gauss–Lobatto
//! nodes. Cosine-series coefficients of the even reflection are computed by
//! quadrature when a norm or the lift needs them; keeping the primary
//! representation polynomial lets `η′(±ℓ) ≠ 0` be represented exactly.

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::poly::{gauss_legendre, gauss_lobatto, legendre_derivs};
use crate::scalar::{c, Real};

#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceFunction<T> {
    ell: T,
    coeffs: Vec<T>,
    nodal: Vec<T>,
    nodes: Vec<T>,
}

impl<T: Real> SurfaceFunction<T> {
    pub fn zero(ell: T, degree: usize) -> Self {
        Self::from_coeffs(ell, vec![T::zero(); degree + 1])
    }

    /// Interpolate `f` at the LGL nodes of degree `degree`.
    pub fn from_fn(ell: T, degree: usize, f: impl Fn(T) -> T) -> Self {
        let nodes = lgl_nodes(ell, degree);
        let nodal: Vec<T> = nodes.iter().map(|&x| f(x)).collect();
        Self::from_nodal(ell, nodal)
    }

    /// Degree is `nodal.len() - 1`.
    pub fn from_nodal(ell: T, nodal: Vec<T>) -> Self {
        let n = nodal.len() - 1;
        let (xi, w) = gauss_lobatto::<T>(n);
        let mut coeffs = vec![T::zero(); n + 1];
        for (j, (&x, &wj)) in xi.iter().zip(&w).enumerate() {
            let p = legendre_derivs(n, x);
            for k in 0..=n {
                coeffs[k] += wj * nodal[j] * p[k][0];
            }
        }
        for (k, a) in coeffs.iter_mut().enumerate() {
            // Discrete norms of P_k under LGL quadrature; the top mode differs.
            let gamma = if k == n { c::<T>(2.0) / T::from_usize_lossy(n) } else { c::<T>(2.0) / T::from_usize_lossy(2 * k + 1) };
            *a /= gamma;
        }
        let nodes = xi.into_iter().map(|x| x * ell).collect();
        Self { ell, coeffs, nodal, nodes }
    }

    pub fn from_coeffs(ell: T, coeffs: Vec<T>) -> Self {
        let n = coeffs.len() - 1;
        let nodes = lgl_nodes(ell, n);
        let mut out = Self { ell, coeffs, nodal: vec![], nodes };
        out.nodal = out.nodes.iter().map(|&x| out.value(x)).collect();
        out
    }

    pub fn ell(&self) -> T {
        self.ell
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn nodal(&self) -> &[T] {
        &self.nodal
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    /// `∫f / (2ℓ)`.
    pub fn mean(&self) -> T {
        self.coeffs[0]
    }

    pub fn integral(&self) -> T {
        self.coeffs[0] * (self.ell + self.ell)
    }

    /// `[f, f′, f″, f‴]` at `x`.
    pub fn derivs(&self, x: T) -> [T; 4] {
        let n = self.degree();
        let p = legendre_derivs(n, x / self.ell);
        let mut out = [T::zero(); 4];
        for (k, &a) in self.coeffs.iter().enumerate() {
            for d in 0..4 {
                out[d] += a * p[k][d];
            }
        }
        let inv = T::one() / self.ell;
        let mut s = T::one();
        for v in out.iter_mut() {
            *v *= s;
            s *= inv;
        }
        out
    }

    pub fn value(&self, x: T) -> T {
        self.derivs(x)[0]
    }

    pub fn slope(&self, x: T) -> T {
        self.derivs(x)[1]
    }

    /// Same function re-expressed with a different degree (truncating or
    /// padding the Legendre series).
    pub fn with_degree(&self, degree: usize) -> Self {
        let mut c = self.coeffs.clone();
        c.resize(degree + 1, T::zero());
        Self::from_coeffs(self.ell, c)
    }

    /// Copy with Legendre coefficients below `rel · max|a_k|` set to zero.
    /// Removes transform roundoff that derivatives would otherwise amplify.
    pub fn chopped(&self, rel: T) -> Self {
        let m = self.coeffs.iter().fold(T::zero(), |m, &a| m.max(a.abs()));
        let c = self.coeffs.iter().map(|&a| if a.abs() <= rel * m { T::zero() } else { a }).collect();
        Self::from_coeffs(self.ell, c)
    }

    /// Copy with the mean removed.
    pub fn zero_mean(&self) -> Self {
        let mut c = self.coeffs.clone();
        c[0] = T::zero();
        Self::from_coeffs(self.ell, c)
    }

    pub fn scale(&self, s: T) -> Self {
        Self::from_coeffs(self.ell, self.coeffs.iter().map(|&a| a * s).collect())
    }

    /// `self + s * other`; the result has the larger of the two degrees.
    pub fn axpy(&self, s: T, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut c = vec![T::zero(); n];
        for (k, v) in c.iter_mut().enumerate() {
            let a = self.coeffs.get(k).copied().unwrap_or_else(T::zero);
            let b = other.coeffs.get(k).copied().unwrap_or_else(T::zero);
            *v = a + s * b;
        }
        Self::from_coeffs(self.ell, c)
    }

    /// Gauss rule on `(−ℓ, ℓ)` exact for polynomials of degree `2·degree + extra`.
    pub fn gauss_rule(&self, extra: usize) -> (Vec<T>, Vec<T>) {
        physical_gauss(self.ell, self.degree() + extra / 2 + 2)
    }

    /// `∫ f^{(d)} g^{(d)}` for `d ∈ {0, 1}` summed, i.e. the plain `H¹` inner
    /// product when `with_slope` is set and `L²` otherwise.
    pub fn inner(&self, other: &Self, with_slope: bool) -> T {
        let n = self.degree().max(other.degree());
        let (x, w) = physical_gauss(self.ell, n + 2);
        x.iter()
            .zip(&w)
            .map(|(&xi, &wi)| {
                let (a, b) = (self.derivs(xi), other.derivs(xi));
                let mut v = a[0] * b[0];
                if with_slope {
                    v += a[1] * b[1];
                }
                wi * v
            })
            .sum()
    }

    /// Cosine coefficients `â_k`, `k = 0..=kmax`, of
    /// `f(x) = Σ â_k cos(μ_k (x + ℓ))`, `μ_k = kπ/(2ℓ)`.
    pub fn cosine_coeffs(&self, kmax: usize) -> Vec<T> {
        let (x, w) = physical_gauss(self.ell, self.degree() / 2 + kmax + 24);
        let f: Vec<T> = x.iter().map(|&xi| self.value(xi)).collect();
        (0..=kmax)
            .map(|k| {
                let mu = cosine_frequency(self.ell, k);
                let s: T = x.iter().zip(&w).zip(&f).map(|((&xi, &wi), &fi)| wi * fi * (mu * (xi + self.ell)).cos()).sum();
                s / cosine_weight(self.ell, k)
            })
            .collect()
    }
}

fn lgl_nodes<T: Real>(ell: T, degree: usize) -> Vec<T> {
    gauss_lobatto::<T>(degree).0.into_iter().map(|x| x * ell).collect()
}

/// Gauss–Legendre rule with `n` points mapped to `(−ℓ, ℓ)`.
pub fn physical_gauss<T: Real>(ell: T, n: usize) -> (Vec<T>, Vec<T>) {
    let (x, w) = gauss_legendre::<T>(n);
    (x.into_iter().map(|v| v * ell).collect(), w.into_iter().map(|v| v * ell).collect())
}

/// `μ_k = kπ/(2ℓ)`.
pub fn cosine_frequency<T: Real>(ell: T, k: usize) -> T {
    T::from_usize_lossy(k) * T::PI() / (ell + ell)
}

/// `∫ cos²(μ_k (x + ℓ)) dx` over `(−ℓ, ℓ)`.
pub fn cosine_weight<T: Real>(ell: T, k: usize) -> T {
    if k == 0 {
        ell + ell
    } else {
        ell
    }
}

/// Number of cosine modes used by norms when none is specified.
pub fn default_norm_modes(degree: usize) -> usize {
    2 * degree + 16
}

/// `‖f‖_{W^{s,q}}`: the spectral `H^s` norm when `q = 2`, otherwise the
/// quadrature surrogate (integer derivatives plus a Gagliardo seminorm of the
/// fractional part).
pub fn fractional_norm<T: Real>(f: &SurfaceFunction<T>, s: T, q: T) -> Result<T> {
    fractional_norm_with(f, s, q, default_norm_modes(f.degree()))
}

pub fn fractional_norm_with<T: Real>(f: &SurfaceFunction<T>, s: T, q: T, kmax: usize) -> Result<T> {
    if !(s >= T::zero() && s <= c(3.0)) {
        return Err(Error::IndexOutOfRange(format!("s = {s} outside [0, 3]")));
    }
    if !(q > T::one() && q <= c(2.0)) {
        return Err(Error::IndexOutOfRange(format!("q = {q} outside (1, 2]")));
    }
    if q == c(2.0) {
        Ok(spectral_norm_sq(f, s, kmax).sqrt())
    } else {
        Ok(sobolev_slobodeckij(f, s, q))
    }
}

/// `Σ_{k ≤ K} w_k (1 + μ_k²)^s â_k² + tail`, where `w_k = ∫cos²` so that
/// `s = 0` is the `L²` norm and `s = 1` the `H¹` norm. The tail beyond `K` is
/// exact for `s ∈ {0, 1}`, geometrically interpolated between them, and
/// extrapolated with the first unresolved frequency above 1.
pub fn spectral_norm_sq<T: Real>(f: &SurfaceFunction<T>, s: T, kmax: usize) -> T {
    let a = f.cosine_coeffs(kmax);
    let ell = f.ell();
    let mut head = T::zero();
    let mut head0 = T::zero();
    let mut head1 = T::zero();
    for (k, &ak) in a.iter().enumerate() {
        let mu = cosine_frequency(ell, k);
        let w = cosine_weight(ell, k) * ak * ak;
        let m = T::one() + mu * mu;
        head += w * m.powf(s);
        head0 += w;
        head1 += w * m;
    }
    let l2 = f.inner(f, false);
    let h1 = f.inner(f, true);
    let tail0 = (l2 - head0).max(T::zero());
    let tail1 = (h1 - head1).max(tail0);
    let tail = if s <= T::one() {
        if tail0 > T::zero() {
            tail0 * (tail1 / tail0).powf(s)
        } else {
            T::zero()
        }
    } else {
        let mu = cosine_frequency(ell, kmax + 1);
        tail1 * (T::one() + mu * mu).powf(s - T::one())
    };
    head + tail
}

/// Quadrature surrogate for `‖f‖_{W^{s,q}}`.
fn sobolev_slobodeckij<T: Real>(f: &SurfaceFunction<T>, s: T, q: T) -> T {
    let m = s.floor().to_usize().unwrap_or(0).min(3);
    let theta = s - T::from_usize_lossy(m);
    let (x, w) = physical_gauss(f.ell(), f.degree() + 8);
    let d: Vec<[T; 4]> = x.iter().map(|&xi| f.derivs(xi)).collect();
    let mut total = T::zero();
    for j in 0..=m {
        total += x.iter().enumerate().map(|(i, _)| w[i] * d[i][j].abs().powf(q)).sum::<T>();
    }
    if theta > T::zero() && m < 3 {
        // Gagliardo seminorm of f^{(m)} on a coarse Gauss grid.
        let (xg, wg) = physical_gauss(f.ell(), 48);
        let g: Vec<T> = xg.iter().map(|&xi| f.derivs(xi)[m]).collect();
        let expo = T::one() + theta * q;
        let mut semi = T::zero();
        for i in 0..xg.len() {
            for j in 0..xg.len() {
                if i != j {
                    semi += wg[i] * wg[j] * (g[i] - g[j]).abs().powf(q) / (xg[i] - xg[j]).abs().powf(expo);
                }
            }
        }
        total += semi;
    }
    total.powf(T::one() / q)
}

/// Lower Poisson extension of a surface function, shifted to the
/// equilibrium surface:
/// `η̄(x₁, x₂) = Σ_{k≤K} â_k cos(μ_k(x₁+ℓ)) e^{μ_k z} + r(x₁) e^{μ_{K+1} z}`
/// with `z = x₂ − ζ₀(x₁) ≤ 0` and `r = η − Σ_{k≤K} â_k cos(μ_k(x₁+ℓ))`
/// evaluated pointwise. The remainder carries what the truncated cosine
/// series misses, so the trace at `z = 0` is `η` exactly.
#[derive(Clone, Debug)]
pub struct PoissonLift<T> {
    ell: T,
    modes: Vec<T>,
    eta: SurfaceFunction<T>,
}

impl<T: Real> PoissonLift<T> {
    pub fn new(eta: &SurfaceFunction<T>, kmax: usize) -> Self {
        Self { ell: eta.ell(), modes: eta.cosine_coeffs(kmax), eta: eta.clone() }
    }

    pub fn modes(&self) -> &[T] {
        &self.modes
    }

    /// Lift as a jet in `(x₁, x₂)` at the point, given `z` as a jet.
    pub fn jet(&self, x1: T, z: &Jet<T>) -> Jet<T> {
        let mut out = Jet::zero();
        let ell = self.ell;
        let mut r = crate::jet::taylor_from_derivs(self.eta.derivs(x1));
        for (k, &a) in self.modes.iter().enumerate() {
            if a == T::zero() {
                continue;
            }
            let mu = cosine_frequency(ell, k);
            let (s, cth) = (mu * (x1 + ell)).sin_cos();
            let t = [cth, -mu * s, -mu * mu * cth / c(2.0), mu * mu * mu * s / c(6.0)];
            for (ri, ti) in r.iter_mut().zip(t) {
                *ri -= a * ti;
            }
            let ez = if k == 0 { Jet::constant(T::one()) } else { (*z * mu).exp() };
            out += Jet::from_x_taylor(t) * ez * a;
        }
        let mu = cosine_frequency(ell, self.modes.len());
        out += Jet::from_x_taylor(r) * (*z * mu).exp();
        out
    }
}

/// Values and gradients of `η̄` at bulk points.
#[derive(Clone, Debug, PartialEq)]
pub struct BulkLift<T> {
    pub values: Vec<T>,
    pub gradients: Vec<[T; 2]>,
}

/// Evaluate the lift of `eta` at `points`, shifted by `zeta0`.
pub fn poisson_extend<T: Real>(eta: &SurfaceFunction<T>, zeta0: &SurfaceFunction<T>, points: &[[T; 2]], kmax: usize) -> BulkLift<T> {
    let lift = PoissonLift::new(eta, kmax);
    let mut values = Vec::with_capacity(points.len());
    let mut gradients = Vec::with_capacity(points.len());
    for &[x1, x2] in points {
        let z = Jet::var_y(x2) - Jet::from_x_taylor(crate::jet::taylor_from_derivs(zeta0.derivs(x1)));
        let j = lift.jet(x1, &z);
        values.push(j.value());
        gradients.push(j.grad());
    }
    BulkLift { values, gradients }
}
