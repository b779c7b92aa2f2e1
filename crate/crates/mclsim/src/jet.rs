//! Truncated bivariate Taylor polynomials ("jets") of total order three.
//!
//! A jet stores the Taylor coefficients of a smooth function of `(x₁, x₂)`
//! about a point. Arithmetic on jets propagates exact derivatives, which
//! keeps pointwise identities such as `MᵀN = N₀` and `J div_A(Mu) = div u`
//! at roundoff level.
//!
//! Coefficient layout: `[1, x, y, x², xy, y², x³, x²y, xy², y³]`.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet<T> {
    pub c: [T; 10],
}

/// Exponents `(i, j)` of each stored coefficient.
pub const EXPONENTS: [(usize, usize); 10] = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3)];

impl<T: Real> Default for Jet<T> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<T: Real> Jet<T> {
    pub fn zero() -> Self {
        Self { c: [T::zero(); 10] }
    }

    pub fn constant(v: T) -> Self {
        let mut j = Self::zero();
        j.c[0] = v;
        j
    }

    /// The coordinate function `x₁` about `x0`.
    pub fn var_x(x0: T) -> Self {
        let mut j = Self::constant(x0);
        j.c[1] = T::one();
        j
    }

    /// The coordinate function `x₂` about `y0`.
    pub fn var_y(y0: T) -> Self {
        let mut j = Self::constant(y0);
        j.c[2] = T::one();
        j
    }

    /// Jet of a function of `x₁` alone from its Taylor coefficients.
    pub fn from_x_taylor(t: [T; 4]) -> Self {
        let mut j = Self::zero();
        j.c[0] = t[0];
        j.c[1] = t[1];
        j.c[3] = t[2];
        j.c[6] = t[3];
        j
    }

    /// Jet of a function of `x₂` alone from its Taylor coefficients.
    pub fn from_y_taylor(t: [T; 4]) -> Self {
        let mut j = Self::zero();
        j.c[0] = t[0];
        j.c[2] = t[1];
        j.c[5] = t[2];
        j.c[9] = t[3];
        j
    }

    #[inline]
    pub fn value(&self) -> T {
        self.c[0]
    }
    #[inline]
    pub fn dx(&self) -> T {
        self.c[1]
    }
    #[inline]
    pub fn dy(&self) -> T {
        self.c[2]
    }
    #[inline]
    pub fn dxx(&self) -> T {
        self.c[3] + self.c[3]
    }
    #[inline]
    pub fn dxy(&self) -> T {
        self.c[4]
    }
    #[inline]
    pub fn dyy(&self) -> T {
        self.c[5] + self.c[5]
    }

    /// Gradient `(∂₁, ∂₂)` at the expansion point.
    #[inline]
    pub fn grad(&self) -> [T; 2] {
        [self.c[1], self.c[2]]
    }

    /// Hessian entries `(∂₁₁, ∂₁₂, ∂₂₂)` at the expansion point.
    #[inline]
    pub fn hessian(&self) -> [T; 3] {
        [self.dxx(), self.dxy(), self.dyy()]
    }

    /// Partial derivative in `x₁`; the result is exact through order two.
    pub fn diff_x(&self) -> Self {
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let c = &self.c;
        let mut d = Self::zero();
        d.c[0] = c[1];
        d.c[1] = two * c[3];
        d.c[2] = c[4];
        d.c[3] = three * c[6];
        d.c[4] = two * c[7];
        d.c[5] = c[8];
        d
    }

    /// Partial derivative in `x₂`; the result is exact through order two.
    pub fn diff_y(&self) -> Self {
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let c = &self.c;
        let mut d = Self::zero();
        d.c[0] = c[2];
        d.c[1] = c[4];
        d.c[2] = two * c[5];
        d.c[3] = c[7];
        d.c[4] = two * c[8];
        d.c[5] = three * c[9];
        d
    }

    pub fn scale(&self, s: T) -> Self {
        let mut out = *self;
        for v in &mut out.c {
            *v *= s;
        }
        out
    }

    /// `self += s * other`.
    #[inline]
    pub fn axpy(&mut self, s: T, other: &Self) {
        for (a, &b) in self.c.iter_mut().zip(&other.c) {
            *a += s * b;
        }
    }

    /// Compose a univariate function `g` with this jet, where `g_taylor`
    /// holds `g(a), g'(a), g''(a)/2, g'''(a)/6` at `a = self.value()`.
    pub fn compose(&self, g_taylor: [T; 4]) -> Self {
        let mut d = *self;
        d.c[0] = T::zero();
        let d2 = d * d;
        let d3 = d2 * d;
        let mut out = Self::constant(g_taylor[0]);
        out.axpy(g_taylor[1], &d);
        out.axpy(g_taylor[2], &d2);
        out.axpy(g_taylor[3], &d3);
        out
    }

    pub fn recip(&self) -> Self {
        let a = self.c[0];
        let r = T::one() / a;
        self.compose([r, -r * r, r * r * r, -r * r * r * r])
    }

    pub fn exp(&self) -> Self {
        let e = self.c[0].exp();
        let sixth = T::one() / T::lit(6.0);
        self.compose([e, e, e * T::lit(0.5), e * sixth])
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.c[0].sin_cos();
        let sixth = T::one() / T::lit(6.0);
        self.compose([c, -s, -c * T::lit(0.5), s * sixth])
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.c[0].sin_cos();
        let sixth = T::one() / T::lit(6.0);
        self.compose([s, c, -s * T::lit(0.5), -c * sixth])
    }

    pub fn sqrt(&self) -> Self {
        let a = self.c[0];
        let r = a.sqrt();
        // d^k/da^k sqrt(a) / k!
        let t1 = T::lit(0.5) / r;
        let t2 = -T::lit(0.125) / (r * a);
        let t3 = T::lit(1.0 / 16.0) / (r * a * a);
        self.compose([r, t1, t2, t3])
    }

    /// Evaluate a bivariate polynomial `Σ p_ij δ₁^i δ₂^j` given the ten
    /// precomputed power jets `pow[k] = δ₁^i δ₂^j` with `(i, j) = EXPONENTS[k]`.
    pub fn from_powers(p: &[T; 10], pow: &[Self; 10]) -> Self {
        let mut out = Self::zero();
        for (pk, jk) in p.iter().zip(pow) {
            if *pk != T::zero() {
                out.axpy(*pk, jk);
            }
        }
        out
    }

    /// The ten power jets `δ₁^i δ₂^j` for displacement jets with zero
    /// constant term.
    pub fn powers(d1: &Self, d2: &Self) -> [Self; 10] {
        let one = Self::constant(T::one());
        let d11 = *d1 * *d1;
        let d12 = *d1 * *d2;
        let d22 = *d2 * *d2;
        [one, *d1, *d2, d11, d12, d22, d11 * *d1, d11 * *d2, d12 * *d2, d22 * *d2]
    }
}

impl<T: Real> Add for Jet<T> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for (a, b) in self.c.iter_mut().zip(rhs.c) {
            *a += b;
        }
        self
    }
}

impl<T: Real> AddAssign for Jet<T> {
    fn add_assign(&mut self, rhs: Self) {
        for (a, b) in self.c.iter_mut().zip(rhs.c) {
            *a += b;
        }
    }
}

impl<T: Real> Sub for Jet<T> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        for (a, b) in self.c.iter_mut().zip(rhs.c) {
            *a -= b;
        }
        self
    }
}

impl<T: Real> Neg for Jet<T> {
    type Output = Self;
    fn neg(mut self) -> Self {
        for a in &mut self.c {
            *a = -*a;
        }
        self
    }
}

impl<T: Real> Add<T> for Jet<T> {
    type Output = Self;
    fn add(mut self, rhs: T) -> Self {
        self.c[0] += rhs;
        self
    }
}

impl<T: Real> Mul<T> for Jet<T> {
    type Output = Self;
    fn mul(self, rhs: T) -> Self {
        self.scale(rhs)
    }
}

impl<T: Real> Mul for Jet<T> {
    type Output = Self;
    #[inline]
    fn mul(self, b: Self) -> Self {
        let a = &self.c;
        let b = &b.c;
        Self {
            c: [
                a[0] * b[0],
                a[0] * b[1] + a[1] * b[0],
                a[0] * b[2] + a[2] * b[0],
                a[0] * b[3] + a[1] * b[1] + a[3] * b[0],
                a[0] * b[4] + a[1] * b[2] + a[2] * b[1] + a[4] * b[0],
                a[0] * b[5] + a[2] * b[2] + a[5] * b[0],
                a[0] * b[6] + a[1] * b[3] + a[3] * b[1] + a[6] * b[0],
                a[0] * b[7] + a[1] * b[4] + a[2] * b[3] + a[3] * b[2] + a[4] * b[1] + a[7] * b[0],
                a[0] * b[8] + a[1] * b[5] + a[2] * b[4] + a[4] * b[2] + a[5] * b[1] + a[8] * b[0],
                a[0] * b[9] + a[2] * b[5] + a[5] * b[2] + a[9] * b[0],
            ],
        }
    }
}

/// Taylor coefficients `[f, f', f''/2, f'''/6]` from derivative values.
pub fn taylor_from_derivs<T: Real>(d: [T; 4]) -> [T; 4] {
    [d[0], d[1], d[2] * T::lit(0.5), d[3] / T::lit(6.0)]
}
