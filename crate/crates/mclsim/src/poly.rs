//! Orthogonal polynomials and quadrature rules on [-1, 1].

use crate::scalar::Real;

/// Legendre polynomials `P_0..=P_n` at `x` together with their first three
/// derivatives: `out[k] = [P_k, P_k', P_k'', P_k''']`.
pub fn legendre_derivs<T: Real>(n: usize, x: T) -> Vec<[T; 4]> {
    let mut out = vec![[T::zero(); 4]; n + 1];
    out[0][0] = T::one();
    if n == 0 {
        return out;
    }
    out[1] = [x, T::one(), T::zero(), T::zero()];
    for k in 2..=n {
        let kf = T::from_usize_lossy(k);
        let a = (kf + kf - T::one()) / kf;
        let b = (kf - T::one()) / kf;
        let (p1, p2) = (out[k - 1], out[k - 2]);
        let mut pk = [T::zero(); 4];
        pk[0] = a * x * p1[0] - b * p2[0];
        for d in 1..4 {
            let df = T::from_usize_lossy(d);
            pk[d] = a * (df * p1[d - 1] + x * p1[d]) - b * p2[d];
        }
        out[k] = pk;
    }
    out
}

/// Value and derivative of `P_n` at `x`.
fn legendre_pair<T: Real>(n: usize, x: T) -> (T, T) {
    let (mut p0, mut p1) = (T::one(), x);
    if n == 0 {
        return (T::one(), T::zero());
    }
    for k in 2..=n {
        let kf = T::from_usize_lossy(k);
        let p2 = ((kf + kf - T::one()) * x * p1 - (kf - T::one()) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = T::from_usize_lossy(n);
    let dp = if (T::one() - x * x).abs() > T::epsilon() {
        nf * (p0 - x * p1) / (T::one() - x * x)
    } else {
        let s = if x > T::zero() || n % 2 == 1 { T::one() } else { -T::one() };
        s * nf * (nf + T::one()) / T::lit(2.0)
    };
    (p1, dp)
}

/// Gauss–Legendre nodes (ascending) and weights with `n` points.
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    assert!(n >= 1);
    // Work in f64 for robustness, then convert.
    let mut x = vec![0.0f64; n];
    let mut w = vec![0.0f64; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_pair::<f64>(n, z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_pair::<f64>(n, z);
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x.into_iter().map(T::lit).collect(), w.into_iter().map(T::lit).collect())
}

/// Legendre–Gauss–Lobatto nodes (ascending, including ±1) and weights for
/// polynomial degree `n` (so `n + 1` points).
pub fn gauss_lobatto<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    assert!(n >= 1);
    let mut x = vec![0.0f64; n + 1];
    x[0] = -1.0;
    x[n] = 1.0;
    // Interior nodes are roots of P_n'; Newton on (1-x²)P_n' = n(P_{n-1} - x P_n).
    for i in 1..n {
        let mut z = -(std::f64::consts::PI * i as f64 / n as f64).cos();
        for _ in 0..100 {
            let d = legendre_derivs::<f64>(n, z);
            let (p1, p2) = (d[n][1], d[n][2]);
            let dz = p1 / p2;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
    }
    let nf = n as f64;
    let w: Vec<f64> = x
        .iter()
        .map(|&z| {
            let (p, _) = legendre_pair::<f64>(n, z);
            2.0 / (nf * (nf + 1.0) * p * p)
        })
        .collect();
    (x.into_iter().map(T::lit).collect(), w.into_iter().map(T::lit).collect())
}

/// Chebyshev polynomials `T_0..=T_n` at `x` with three derivatives.
pub fn chebyshev_derivs<T: Real>(n: usize, x: T) -> Vec<[T; 4]> {
    let mut out = vec![[T::zero(); 4]; n + 1];
    out[0][0] = T::one();
    if n == 0 {
        return out;
    }
    out[1] = [x, T::one(), T::zero(), T::zero()];
    let two = T::lit(2.0);
    for k in 2..=n {
        let (a, b) = (out[k - 1], out[k - 2]);
        let mut t = [T::zero(); 4];
        t[0] = two * x * a[0] - b[0];
        for d in 1..4 {
            let df = T::from_usize_lossy(d);
            t[d] = two * (df * a[d - 1] + x * a[d]) - b[d];
        }
        out[k] = t;
    }
    out
}

/// Chebyshev–Gauss–Lobatto points `cos(πj/n)`, j = 0..=n (descending).
pub fn chebyshev_lobatto<T: Real>(n: usize) -> Vec<T> {
    (0..=n).map(|j| if 2 * j == n { T::zero() } else { T::lit((std::f64::consts::PI * j as f64 / n as f64).cos()) }).collect()
}

/// Spectral differentiation matrix on the Chebyshev–Gauss–Lobatto points.
pub fn chebyshev_diff_matrix<T: Real>(n: usize) -> Vec<Vec<T>> {
    let x: Vec<f64> = chebyshev_lobatto::<f64>(n);
    let cc = |j: usize| if j == 0 || j == n { 2.0 } else { 1.0 };
    let mut d = vec![vec![0.0f64; n + 1]; n + 1];
    for i in 0..=n {
        for j in 0..=n {
            if i != j {
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                d[i][j] = cc(i) / cc(j) * sign / (x[i] - x[j]);
            }
        }
        // Negative-sum trick for the diagonal.
        d[i][i] = -d[i].iter().sum::<f64>();
    }
    d.into_iter().map(|r| r.into_iter().map(T::lit).collect()).collect()
}

/// Clenshaw–Curtis weights for the Chebyshev–Gauss–Lobatto points.
pub fn clenshaw_curtis<T: Real>(n: usize) -> Vec<T> {
    let mut w = vec![0.0f64; n + 1];
    let pi = std::f64::consts::PI;
    for (j, wj) in w.iter_mut().enumerate() {
        let theta = pi * j as f64 / n as f64;
        let mut s = 0.0;
        for k in 1..=n / 2 {
            let b = if 2 * k == n { 1.0 } else { 2.0 };
            s += b / (4.0 * (k * k) as f64 - 1.0) * (2.0 * k as f64 * theta).cos();
        }
        let c = if j == 0 || j == n { 1.0 } else { 2.0 };
        *wj = c / n as f64 * (1.0 - s);
    }
    w.into_iter().map(T::lit).collect()
}

/// Chebyshev coefficients of the interpolant through values at the
/// Chebyshev–Gauss–Lobatto points (ordering of [`chebyshev_lobatto`]).
pub fn chebyshev_coeffs<T: Real>(values: &[T]) -> Vec<T> {
    let n = values.len() - 1;
    let pi = std::f64::consts::PI;
    let mut a = vec![T::zero(); n + 1];
    for (k, ak) in a.iter_mut().enumerate() {
        let mut s = T::zero();
        for (j, &v) in values.iter().enumerate() {
            let c = if j == 0 || j == n { T::lit(0.5) } else { T::one() };
            s += c * v * T::lit((pi * (j * k) as f64 / n as f64).cos());
        }
        let ck = if k == 0 || k == n { T::one() } else { T::lit(2.0) };
        *ak = ck * s / T::from_usize_lossy(n);
    }
    a
}

/// Barycentric-free Lagrange interpolation matrix: row `i` holds the weights
/// that map nodal values at `nodes` to the interpolant at `targets[i]`.
pub fn lagrange_matrix<T: Real>(nodes: &[T], targets: &[T]) -> Vec<Vec<T>> {
    let n = nodes.len();
    let bw: Vec<T> = (0..n)
        .map(|j| {
            let mut p = T::one();
            for k in 0..n {
                if k != j {
                    p *= nodes[j] - nodes[k];
                }
            }
            T::one() / p
        })
        .collect();
    targets
        .iter()
        .map(|&x| {
            if let Some(j) = nodes.iter().position(|&xj| xj == x) {
                let mut row = vec![T::zero(); n];
                row[j] = T::one();
                return row;
            }
            let terms: Vec<T> = (0..n).map(|j| bw[j] / (x - nodes[j])).collect();
            let s: T = terms.iter().copied().sum();
            terms.into_iter().map(|t| t / s).collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in [1usize, 2, 5, 12, 31] {
            let (x, w) = gauss_legendre::<f64>(n);
            for deg in 0..2 * n {
                let q: f64 = x.iter().zip(&w).map(|(&xi, &wi)| wi * xi.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn lobatto_includes_endpoints_and_is_exact() {
        let n = 9;
        let (x, w) = gauss_lobatto::<f64>(n);
        assert_eq!(x[0], -1.0);
        assert_eq!(x[n], 1.0);
        for deg in 0..2 * n {
            let q: f64 = x.iter().zip(&w).map(|(&xi, &wi)| wi * xi.powi(deg as i32)).sum();
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((q - exact).abs() < 1e-13, "deg={deg}");
        }
    }

    #[test]
    fn legendre_derivatives_match_closed_forms() {
        let x = 0.37f64;
        let p = legendre_derivs(3, x);
        // P3 = (5x³ − 3x)/2
        assert!((p[3][0] - (5.0 * x.powi(3) - 3.0 * x) / 2.0).abs() < 1e-15);
        assert!((p[3][1] - (15.0 * x * x - 3.0) / 2.0).abs() < 1e-14);
        assert!((p[3][2] - 15.0 * x).abs() < 1e-14);
        assert!((p[3][3] - 15.0).abs() < 1e-13);
        assert!((p[2][2] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn chebyshev_differentiation_is_exact_on_polynomials() {
        let n = 10;
        let x = chebyshev_lobatto::<f64>(n);
        let d = chebyshev_diff_matrix::<f64>(n);
        let f: Vec<f64> = x.iter().map(|&t| t.powi(5) - 2.0 * t * t).collect();
        for i in 0..=n {
            let df: f64 = d[i].iter().zip(&f).map(|(a, b)| a * b).sum();
            let exact = 5.0 * x[i].powi(4) - 4.0 * x[i];
            assert!((df - exact).abs() < 1e-11);
        }
        let w = clenshaw_curtis::<f64>(n);
        let q: f64 = w.iter().zip(&f).map(|(a, b)| a * b).sum();
        assert!((q - (-4.0 / 3.0)).abs() < 1e-13);
    }

    #[test]
    fn chebyshev_coefficients_round_trip() {
        let n = 8;
        let x = chebyshev_lobatto::<f64>(n);
        let vals: Vec<f64> = x.iter().map(|&t| (1.3 * t).exp()).collect();
        let a = chebyshev_coeffs(&vals);
        for (i, &xi) in x.iter().enumerate() {
            let t = chebyshev_derivs(n, xi);
            let v: f64 = a.iter().zip(&t).map(|(ak, tk)| ak * tk[0]).sum();
            assert!((v - vals[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn lagrange_matrix_reproduces_polynomials() {
        let (x, _) = gauss_lobatto::<f64>(6);
        let tgt = [-0.9, 0.1, 0.77];
        let l = lagrange_matrix(&x, &tgt);
        for (row, &t) in l.iter().zip(&tgt) {
            let v: f64 = row.iter().zip(&x).map(|(w, &xi)| w * (xi.powi(6) - xi)).sum();
            assert!((v - (t.powi(6) - t)).abs() < 1e-12);
        }
    }
}
