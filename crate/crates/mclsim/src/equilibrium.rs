//! Static capillary meniscus: `gζ − σℋ(ζ) = P₀` on `(−ℓ, ℓ)` with the
//! Young contact condition at both walls and prescribed area.

use crate::config::PhysicalParams;
use crate::error::{Error, Result};
use crate::linalg::{Lu, Mat};
use crate::poly::{chebyshev_diff_matrix, chebyshev_lobatto, clenshaw_curtis};
use crate::scalar::{c, Real};
use crate::surface::{physical_gauss, SurfaceFunction};

#[derive(Clone, Debug)]
pub struct EquilibriumSurface<T> {
    pub zeta0: SurfaceFunction<T>,
    pub p0: T,
    pub omega_eq: T,
    pub min_height: T,
    /// Collocation degree used by the solve.
    pub nodes: usize,
    pub iterations: usize,
}

/// `ℋ(ζ) = ζ″/(1+ζ′²)^{3/2}`.
pub fn curvature<T: Real>(d1: T, d2: T) -> T {
    d2 / (T::one() + d1 * d1).powf(c(1.5))
}

/// Chebyshev collocation with Newton iteration, on `nodes + 1` points.
/// Large `|⟦γ⟧|/σ` is reached by continuation from the flat state.
pub fn solve_equilibrium<T: Real>(params: &PhysicalParams<T>, nodes: usize, tol: T) -> Result<EquilibriumSurface<T>> {
    let p = params;
    if p.gamma_jump.abs() >= p.sigma {
        return Err(Error::Config("Young relation |gamma_jump| < sigma violated".into()));
    }
    if !(p.volume > T::zero()) {
        return Err(Error::Config("volume must be positive".into()));
    }
    let n = nodes.max(4);
    let ell = p.ell;
    let d1 = scaled(&chebyshev_diff_matrix::<T>(n), T::one() / ell);
    let mut d2 = d1.matmul(&d1);
    // Rows of D² annihilate constants; restore that exactly.
    for i in 0..=n {
        let off: T = (0..=n).filter(|&j| j != i).map(|j| d2[(i, j)]).sum();
        d2[(i, i)] = -off;
    }
    let cc: Vec<T> = clenshaw_curtis::<T>(n).into_iter().map(|w| w * ell).collect();

    // Unknowns are the deviation from the flat state of the same area, so
    // the flat solution is represented exactly.
    let h = p.volume / (ell + ell);
    let mut u = vec![T::zero(); n + 2];
    u[n + 1] = p.g * h;
    let ratio = (p.gamma_jump / p.sigma).abs().to_f64_lossy();
    let stages = ((ratio / 0.15).ceil() as usize).max(1);
    let mut total_iter = 0;
    for stage in 1..=stages {
        let gamma = p.gamma_jump * T::from_usize_lossy(stage) / T::from_usize_lossy(stages);
        let (it, _) = newton(p, h, gamma, &d1, &d2, &cc, &mut u, tol, 60)?;
        total_iter += it;
    }

    // Re-express the degree-n interpolant in the Legendre representation.
    let values: Vec<T> = u[..=n].iter().map(|&v| h + v).collect();
    let cheb_nodes: Vec<T> = chebyshev_lobatto::<T>(n);
    let zeta0 = SurfaceFunction::from_fn(ell, n, |x| interp(&cheb_nodes, &values, x / ell)).chopped(T::epsilon() * c(256.0));
    let min_height = min_on_grid(&zeta0, 4 * n + 8);
    if min_height <= T::zero() {
        return Err(Error::PinchOff { min_height: min_height.to_f64_lossy() });
    }
    let omega_eq = contact_angle(&zeta0);
    Ok(EquilibriumSurface { zeta0, p0: u[n + 1], omega_eq, min_height, nodes: n, iterations: total_iter })
}

fn scaled<T: Real>(d: &[Vec<T>], s: T) -> Mat<T> {
    let n = d.len();
    Mat::from_fn(n, n, |i, j| d[i][j] * s)
}

/// Residual of the collocation system for unknowns `[v_0..v_n, P₀]` with
/// `ζ = h + v`.
fn residual<T: Real>(p: &PhysicalParams<T>, h: T, gamma: T, d1: &Mat<T>, d2: &Mat<T>, cc: &[T], u: &[T]) -> Vec<T> {
    let n = cc.len() - 1;
    let z = &u[..=n];
    let zp = d1.matvec(z);
    let zpp = d2.matvec(z);
    let p0 = u[n + 1];
    let mut r = vec![T::zero(); n + 2];
    for i in 1..n {
        r[i] = p.g * (h + z[i]) - p.sigma * curvature(zp[i], zpp[i]) - p0;
    }
    // Node 0 is x = +ℓ, node n is x = −ℓ.
    let young = |s: T| p.sigma * s / (T::one() + s * s).sqrt();
    r[0] = young(zp[0]) - gamma;
    r[n] = young(zp[n]) + gamma;
    r[n + 1] = z.iter().zip(cc).map(|(&a, &w)| a * w).sum::<T>();
    r
}

#[allow(clippy::too_many_arguments)]
fn newton<T: Real>(p: &PhysicalParams<T>, h: T, gamma: T, d1: &Mat<T>, d2: &Mat<T>, cc: &[T], u: &mut [T], tol: T, max_iter: usize) -> Result<(usize, T)> {
    let n = cc.len() - 1;
    let mut res = residual(p, h, gamma, d1, d2, cc, u);
    let mut rnorm = max_abs(&res);
    for it in 0..max_iter {
        if rnorm <= tol {
            return Ok((it, rnorm));
        }
        let z = &u[..=n];
        let zp = d1.matvec(z);
        let zpp = d2.matvec(z);
        let mut jac = Mat::zeros(n + 2, n + 2);
        for i in 1..n {
            let q = T::one() + zp[i] * zp[i];
            let q32 = q.powf(c(1.5));
            // ∂ℋ/∂ζ′ = −3ζ′ζ″/(1+ζ′²)^{5/2}, ∂ℋ/∂ζ″ = 1/(1+ζ′²)^{3/2}.
            let dh_dp = -c::<T>(3.0) * zp[i] * zpp[i] / (q32 * q);
            let dh_dpp = T::one() / q32;
            for j in 0..=n {
                jac[(i, j)] = -p.sigma * (dh_dp * d1[(i, j)] + dh_dpp * d2[(i, j)]);
            }
            jac[(i, i)] += p.g;
            jac[(i, n + 1)] = -T::one();
        }
        for &i in &[0, n] {
            let dy = p.sigma / (T::one() + zp[i] * zp[i]).powf(c(1.5));
            for j in 0..=n {
                jac[(i, j)] = dy * d1[(i, j)];
            }
        }
        for j in 0..=n {
            jac[(n + 1, j)] = cc[j];
        }
        let lu = Lu::factor(&jac).ok_or(Error::NoConvergence { iterations: it, residual: rnorm.to_f64_lossy() })?;
        let delta = lu.solve(&res);
        let scale = u.iter().fold(h.max(T::one()), |m, &v| m.max(v.abs()));
        if max_abs(&delta) <= tol * scale {
            for (a, d) in u.iter_mut().zip(&delta) {
                *a -= *d;
            }
            return Ok((it + 1, rnorm));
        }
        // Damped step: halve until the residual decreases.
        let mut step = T::one();
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<T> = u.iter().zip(&delta).map(|(&a, &d)| a - step * d).collect();
            let min_z = h + trial[..=n].iter().fold(T::infinity(), |m, &v| m.min(v));
            if min_z <= T::zero() {
                step *= c(0.5);
                if step < c(1e-6) {
                    return Err(Error::PinchOff { min_height: min_z.to_f64_lossy() });
                }
                continue;
            }
            let r_trial = residual(p, h, gamma, d1, d2, cc, &trial);
            let n_trial = max_abs(&r_trial);
            if n_trial.is_finite() && (n_trial < rnorm || n_trial <= tol) {
                u.copy_from_slice(&trial);
                res = r_trial;
                rnorm = n_trial;
                accepted = true;
                break;
            }
            step *= c(0.5);
        }
        if !accepted {
            return Err(Error::NoConvergence { iterations: it + 1, residual: rnorm.to_f64_lossy() });
        }
    }
    if rnorm <= tol {
        Ok((max_iter, rnorm))
    } else {
        Err(Error::NoConvergence { iterations: max_iter, residual: rnorm.to_f64_lossy() })
    }
}

fn max_abs<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

/// Barycentric interpolation on Chebyshev–Lobatto nodes (descending order).
fn interp<T: Real>(nodes: &[T], values: &[T], x: T) -> T {
    let n = nodes.len() - 1;
    let mut num = T::zero();
    let mut den = T::zero();
    for j in 0..=n {
        let dx = x - nodes[j];
        if dx == T::zero() {
            return values[j];
        }
        let mut w = if j % 2 == 0 { T::one() } else { -T::one() };
        if j == 0 || j == n {
            w *= c(0.5);
        }
        num += w * values[j] / dx;
        den += w / dx;
    }
    num / den
}

fn min_on_grid<T: Real>(f: &SurfaceFunction<T>, n: usize) -> T {
    let ell = f.ell();
    (0..=n).map(|i| f.value(-ell + (ell + ell) * T::from_usize_lossy(i) / T::from_usize_lossy(n))).fold(T::infinity(), |m, v| m.min(v))
}

/// `π/2 − atan(ζ₀′(ℓ))`: angle between the free surface and the right wall,
/// measured inside the fluid. The left wall mirrors it with `−ζ₀′(−ℓ)`.
pub fn contact_angle<T: Real>(zeta0: &SurfaceFunction<T>) -> T {
    T::FRAC_PI_2() - zeta0.slope(zeta0.ell()).atan()
}

pub fn contact_angle_left<T: Real>(zeta0: &SurfaceFunction<T>) -> T {
    T::FRAC_PI_2() + zeta0.slope(-zeta0.ell()).atan()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EquilibriumResidual<T> {
    pub ode_residual_max: T,
    /// At `(−ℓ, +ℓ)`.
    pub slope_residuals: (T, T),
    pub volume_error: T,
}

/// Residuals on a Gauss grid with twice as many points as the solve grid.
pub fn equilibrium_residual<T: Real>(surface: &EquilibriumSurface<T>, params: &PhysicalParams<T>) -> EquilibriumResidual<T> {
    residual_of(&surface.zeta0, surface.p0, params, 2 * (surface.nodes + 1))
}

/// Residuals of an arbitrary candidate `(ζ, P₀)` on an `npts`-point Gauss grid.
pub fn residual_of<T: Real>(zeta: &SurfaceFunction<T>, p0: T, params: &PhysicalParams<T>, npts: usize) -> EquilibriumResidual<T> {
    let p = params;
    let (x, w) = physical_gauss(p.ell, npts);
    let mut ode = T::zero();
    let mut vol = T::zero();
    for (&xi, &wi) in x.iter().zip(&w) {
        let d = zeta.derivs(xi);
        let r = p.g * d[0] - p.sigma * curvature(d[1], d[2]) - p0;
        ode = ode.max(r.abs());
        vol += wi * d[0];
    }
    let young = |s: T| p.sigma * s / (T::one() + s * s).sqrt();
    let left = young(zeta.slope(-p.ell)) + p.gamma_jump;
    let right = young(zeta.slope(p.ell)) - p.gamma_jump;
    EquilibriumResidual { ode_residual_max: ode, slope_residuals: (left, right), volume_error: vol - p.volume }
}

/// Two-column `x ζ₀(x)` table preceded by a header with `P₀` and `ω_eq`.
pub fn table<T: Real>(surface: &EquilibriumSurface<T>, samples: usize) -> String {
    let mut out = format!("# P0 = {:.17e} omega_eq = {:.17e}\n", surface.p0.to_f64_lossy(), surface.omega_eq.to_f64_lossy());
    let ell = surface.zeta0.ell();
    for i in 0..=samples {
        let x = -ell + (ell + ell) * T::from_usize_lossy(i) / T::from_usize_lossy(samples);
        out.push_str(&format!("{:.17e} {:.17e}\n", x.to_f64_lossy(), surface.zeta0.value(x).to_f64_lossy()));
    }
    out
}
