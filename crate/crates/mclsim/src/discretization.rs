//! Mesh of the equilibrium domain, the divergence-free Galerkin basis, its
//! push-forward by `M(t)`, and the time-dependent bilinear forms.
//!
//! Velocity candidates are curls of stream functions `χ_mn = f_m(s) g_n(r)`
//! on the reference square `(s, r) ∈ [−1, 1]²`, mapped onto `Ω` by
//! `x₁ = ℓs`, `x₂ = −D + (1 + r)(ζ₀(x₁) + D)/2`. With `f_m = L_{m+2} − L_m`
//! and `g_n = L_n + L_{n+1}` every candidate vanishes on the walls and the
//! bottom, so its curl is exactly solenoidal, impermeable on `Σ_s`, and has a
//! zero-mean normal trace on `Σ`.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::config::PhysicalParams;
use crate::equilibrium::EquilibriumSurface;
use crate::error::{Error, Result};
use crate::geometry::{GeometryCache, PointGeometry, PointSets};
use crate::jet::{Jet, EXPONENTS};
use crate::linalg::{weighted_products, Cholesky, Mat, SymEigen};
use crate::poly::{gauss_legendre, gauss_lobatto, legendre_derivs};
use crate::scalar::{c, Real};
use crate::surface::SurfaceFunction;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Interior,
    Top,
    Wall,
    Bottom,
    Corner,
}

impl BoundaryTag {
    pub fn name(self) -> &'static str {
        match self {
            BoundaryTag::Interior => "interior",
            BoundaryTag::Top => "top",
            BoundaryTag::Wall => "wall",
            BoundaryTag::Bottom => "bottom",
            BoundaryTag::Corner => "corner",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Mesh<T> {
    pub ell: T,
    pub depth: T,
    pub zeta0: SurfaceFunction<T>,
    /// Candidate index range `m, n < degree` per direction.
    pub degree: usize,
    /// Gauss points per direction.
    pub quad: usize,
    pub points: PointSets<T>,
    /// `(s, r)` of each bulk point.
    pub bulk_ref: Vec<[T; 2]>,
    /// Quadrature weights in physical measure: `dx` in the bulk, `dx₁` on the
    /// top and bottom, `dx₂` on the walls.
    pub w_bulk: Vec<T>,
    pub w_top: Vec<T>,
    pub w_left: Vec<T>,
    pub w_right: Vec<T>,
    pub w_bottom: Vec<T>,
    /// Contact points `(∓ℓ, ζ₀(∓ℓ))`.
    pub corners: [[T; 2]; 2],
    /// Lobatto lattice used for export.
    pub nodes: Vec<[T; 2]>,
    pub cells: Vec<[usize; 4]>,
    pub tags: Vec<BoundaryTag>,
}

impl<T: Real> Mesh<T> {
    pub fn new(eq: &EquilibriumSurface<T>, depth: T, degree: usize, quad: usize) -> Self {
        let zeta0 = eq.zeta0.clone();
        let ell = zeta0.ell();
        let (gx, gw) = gauss_legendre::<T>(quad);
        let height = |x1: T| zeta0.value(x1) + depth;
        let half = c::<T>(0.5);
        let mut points = PointSets::default();
        let (mut bulk_ref, mut w_bulk, mut w_top, mut w_left, mut w_right, mut w_bottom) = (vec![], vec![], vec![], vec![], vec![], vec![]);
        for (&s, &ws) in gx.iter().zip(&gw) {
            let x1 = ell * s;
            let h = height(x1);
            for (&r, &wr) in gx.iter().zip(&gw) {
                points.bulk.push([x1, -depth + (T::one() + r) * h * half]);
                bulk_ref.push([s, r]);
                w_bulk.push(ell * h * half * ws * wr);
            }
            points.top.push([x1, zeta0.value(x1)]);
            w_top.push(ell * ws);
            points.bottom.push([x1, -depth]);
            w_bottom.push(ell * ws);
        }
        for (side, pts, wts) in [(-ell, &mut points.left, &mut w_left), (ell, &mut points.right, &mut w_right)] {
            let h = height(side);
            for (&r, &wr) in gx.iter().zip(&gw) {
                pts.push([side, -depth + (T::one() + r) * h * half]);
                wts.push(h * half * wr);
            }
        }
        let corners = [[-ell, zeta0.value(-ell)], [ell, zeta0.value(ell)]];

        let (lx, _) = gauss_lobatto::<T>(degree.max(1));
        let n = lx.len();
        let mut nodes = Vec::with_capacity(n * n);
        let mut tags = Vec::with_capacity(n * n);
        for (i, &s) in lx.iter().enumerate() {
            let x1 = ell * s;
            let h = height(x1);
            for (k, &r) in lx.iter().enumerate() {
                let x2 = if k == n - 1 { zeta0.value(x1) } else { -depth + (T::one() + r) * h * half };
                nodes.push([x1, x2]);
                let side = i == 0 || i == n - 1;
                tags.push(match (side, k) {
                    (true, k) if k == n - 1 => BoundaryTag::Corner,
                    (_, 0) => BoundaryTag::Bottom,
                    (true, _) => BoundaryTag::Wall,
                    (false, k) if k == n - 1 => BoundaryTag::Top,
                    _ => BoundaryTag::Interior,
                });
            }
        }
        let mut cells = Vec::with_capacity((n - 1) * (n - 1));
        for i in 0..n - 1 {
            for k in 0..n - 1 {
                let a = i * n + k;
                cells.push([a, a + n, a + n + 1, a + 1]);
            }
        }
        Self { ell, depth, zeta0, degree, quad, points, bulk_ref, w_bulk, w_top, w_left, w_right, w_bottom, corners, nodes, cells, tags }
    }

    pub fn area(&self) -> T {
        self.w_bulk.iter().fold(T::zero(), |a, &b| a + b)
    }

    pub fn map(&self, s: T, r: T) -> [T; 2] {
        let x1 = self.ell * s;
        let h = self.zeta0.value(x1) + self.depth;
        [x1, -self.depth + (T::one() + r) * h * c(0.5)]
    }

    /// `(s, r)` of a physical point.
    pub fn reference(&self, x: [T; 2]) -> [T; 2] {
        let h = self.zeta0.value(x[0]) + self.depth;
        [x[0] / self.ell, c::<T>(2.0) * (x[1] + self.depth) / h - T::one()]
    }

    /// Reference coordinates of `x` and the ten power jets `δs^i δr^j` of the
    /// reference displacement as functions of the physical displacement.
    pub fn ref_powers(&self, x: [T; 2]) -> ([T; 2], [Jet<T>; 10]) {
        let sr = self.reference(x);
        let mut ds = Jet::<T>::zero();
        ds.c[1] = T::one() / self.ell;
        let d = self.zeta0.derivs(x[0]);
        let h = Jet::from_x_taylor([d[0] + self.depth, d[1], d[2] * c(0.5), d[3] / c(6.0)]);
        let mut dr = (Jet::var_y(x[1]) + self.depth) * h.recip() * c::<T>(2.0);
        dr.c[0] = T::zero();
        (sr, Jet::powers(&ds, &dr))
    }

    /// Plain-text node/cell listing with boundary tags.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# nodes {}", self.nodes.len());
        for (x, t) in self.nodes.iter().zip(&self.tags) {
            let _ = writeln!(out, "{:.17e} {:.17e} {}", x[0].to_f64_lossy(), x[1].to_f64_lossy(), t.name());
        }
        let _ = writeln!(out, "# cells {}", self.cells.len());
        for cell in &self.cells {
            let _ = writeln!(out, "{} {} {} {}", cell[0], cell[1], cell[2], cell[3]);
        }
        out
    }
}

/// One vector field sampled as order-3 jets at every point set of a mesh.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointField<T> {
    pub bulk: Vec<[Jet<T>; 2]>,
    pub top: Vec<[Jet<T>; 2]>,
    pub left: Vec<[Jet<T>; 2]>,
    pub right: Vec<[Jet<T>; 2]>,
    pub bottom: Vec<[Jet<T>; 2]>,
}

impl<T: Real> PointField<T> {
    pub fn zeros_like(other: &Self) -> Self {
        let z = |v: &Vec<[Jet<T>; 2]>| vec![[Jet::zero(); 2]; v.len()];
        Self { bulk: z(&other.bulk), top: z(&other.top), left: z(&other.left), right: z(&other.right), bottom: z(&other.bottom) }
    }

    fn sets_mut(&mut self) -> [&mut Vec<[Jet<T>; 2]>; 5] {
        [&mut self.bulk, &mut self.top, &mut self.left, &mut self.right, &mut self.bottom]
    }

    fn sets(&self) -> [&Vec<[Jet<T>; 2]>; 5] {
        [&self.bulk, &self.top, &self.left, &self.right, &self.bottom]
    }

    /// `self += s · other`.
    pub fn axpy(&mut self, s: T, other: &Self) {
        for (dst, src) in self.sets_mut().into_iter().zip(other.sets()) {
            for (a, b) in dst.iter_mut().zip(src) {
                a[0].axpy(s, &b[0]);
                a[1].axpy(s, &b[1]);
            }
        }
    }

    /// Apply `M` pointwise and scale.
    pub fn push(&self, cache: &GeometryCache<T>, scale: T) -> Self {
        let map = |v: &Vec<[Jet<T>; 2]>, g: &Vec<PointGeometry<T>>| -> Vec<[Jet<T>; 2]> {
            v.iter()
                .zip(g)
                .map(|(f, p)| {
                    let w = p.apply_m(f);
                    [w[0] * scale, w[1] * scale]
                })
                .collect()
        };
        Self {
            bulk: map(&self.bulk, &cache.bulk),
            top: map(&self.top, &cache.top),
            left: map(&self.left, &cache.left),
            right: map(&self.right, &cache.right),
            bottom: map(&self.bottom, &cache.bottom),
        }
    }
}

/// A family of fields, e.g. all candidates or all basis vectors.
#[derive(Clone, Debug, Default)]
pub struct FieldTable<T> {
    pub fields: Vec<PointField<T>>,
}

impl<T: Real> FieldTable<T> {
    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    /// Field `j` of the result is `Σ_c coeffs[(c, j)] · fields[c]`.
    pub fn combine(&self, coeffs: &Mat<T>) -> Self {
        assert_eq!(coeffs.rows(), self.fields.len());
        let fields = (0..coeffs.cols()).into_par_iter().map(|j| self.linear_combination_with(|cidx| coeffs[(cidx, j)])).collect();
        Self { fields }
    }

    /// `Σ_j d_j · fields[j]`.
    pub fn linear_combination(&self, d: &[T]) -> PointField<T> {
        assert_eq!(d.len(), self.fields.len());
        self.linear_combination_with(|j| d[j])
    }

    fn linear_combination_with(&self, coef: impl Fn(usize) -> T) -> PointField<T> {
        let mut out = PointField::zeros_like(&self.fields[0]);
        for (k, f) in self.fields.iter().enumerate() {
            let a = coef(k);
            if a != T::zero() {
                out.axpy(a, f);
            }
        }
        out
    }

    pub fn push(&self, cache: &GeometryCache<T>, scales: &[T]) -> Self {
        let fields = self.fields.par_iter().zip(scales).map(|(f, &s)| f.push(cache, s)).collect();
        Self { fields }
    }
}

/// Stream-function candidates and their exact normal traces.
#[derive(Clone, Debug)]
pub struct Candidates<T> {
    pub degree: usize,
    pub fields: FieldTable<T>,
    /// `a_c = φ_c·𝒩₀` at the top quadrature points (`count × n_top`).
    pub trace_top: Mat<T>,
    /// `∂₁a_c` at the top quadrature points.
    pub slope_top: Mat<T>,
    /// `(a_c(−ℓ), a_c(ℓ))`.
    pub corner: Vec<(T, T)>,
}

impl<T: Real> Candidates<T> {
    pub fn count(&self) -> usize {
        self.fields.len()
    }

    /// `(m, n)` of candidate `c`.
    pub fn indices(&self, cidx: usize) -> (usize, usize) {
        (cidx / self.degree, cidx % self.degree)
    }

    /// Exact trace `a_c(x₁) = −(2/ℓ) f_m′(x₁/ℓ)` and its first derivative.
    pub fn trace(&self, cidx: usize, ell: T, x1: T) -> (T, T) {
        let (m, _) = self.indices(cidx);
        let l = legendre_derivs(m + 2, x1 / ell);
        let two = c::<T>(2.0);
        (-two / ell * (l[m + 2][1] - l[m][1]), -two / (ell * ell) * (l[m + 2][2] - l[m][2]))
    }
}

/// Candidate curls `curl χ_mn` at a point, all `N²` of them.
fn candidate_jets<T: Real>(mesh: &Mesh<T>, x: [T; 2]) -> Vec<[Jet<T>; 2]> {
    let n = mesh.degree;
    let ([s, r], pow) = mesh.ref_powers(x);
    let ls = legendre_derivs(n + 1, s);
    let lr = legendre_derivs(n, r);
    let fact = [T::one(), T::one(), c(0.5), c(1.0 / 6.0)];
    let mut out = Vec::with_capacity(n * n);
    for m in 0..n {
        let f: [T; 4] = std::array::from_fn(|k| (ls[m + 2][k] - ls[m][k]) * fact[k]);
        for q in 0..n {
            let g: [T; 4] = std::array::from_fn(|k| (lr[q][k] + lr[q + 1][k]) * fact[k]);
            let p: [T; 10] = std::array::from_fn(|k| {
                let (i, j) = EXPONENTS[k];
                f[i] * g[j]
            });
            let chi = Jet::from_powers(&p, &pow);
            out.push([chi.diff_y(), -chi.diff_x()]);
        }
    }
    out
}

pub fn build_candidates<T: Real>(mesh: &Mesh<T>) -> Candidates<T> {
    let n = mesh.degree;
    let count = n * n;
    let eval = |pts: &[[T; 2]]| -> Vec<Vec<[Jet<T>; 2]>> { pts.par_iter().map(|&x| candidate_jets(mesh, x)).collect() };
    let bulk = eval(&mesh.points.bulk);
    let top = eval(&mesh.points.top);
    let left = eval(&mesh.points.left);
    let right = eval(&mesh.points.right);
    let bottom = eval(&mesh.points.bottom);
    let column = |v: &Vec<Vec<[Jet<T>; 2]>>, cidx: usize| -> Vec<[Jet<T>; 2]> { v.iter().map(|p| p[cidx]).collect() };
    let fields = (0..count)
        .map(|cidx| PointField {
            bulk: column(&bulk, cidx),
            top: column(&top, cidx),
            left: column(&left, cidx),
            right: column(&right, cidx),
            bottom: column(&bottom, cidx),
        })
        .collect();
    let mut cands = Candidates {
        degree: n,
        fields: FieldTable { fields },
        trace_top: Mat::zeros(count, mesh.points.top.len()),
        slope_top: Mat::zeros(count, mesh.points.top.len()),
        corner: Vec::with_capacity(count),
    };
    for cidx in 0..count {
        for (p, x) in mesh.points.top.iter().enumerate() {
            let (a, da) = cands.trace(cidx, mesh.ell, x[0]);
            cands.trace_top[(cidx, p)] = a;
            cands.slope_top[(cidx, p)] = da;
        }
        let left = cands.trace(cidx, mesh.ell, -mesh.ell).0;
        let right = cands.trace(cidx, mesh.ell, mesh.ell).0;
        cands.corner.push((left, right));
    }
    cands
}

/// Feature matrices (rows = fields, columns = points) used by the quadrature
/// forms.
struct Features<T> {
    v: [Mat<T>; 2],
    /// `(𝔻₁₁, √2 𝔻₁₂, 𝔻₂₂)` of `𝔻_𝒜 w`.
    d: [Mat<T>; 3],
    rv: [Mat<T>; 2],
    /// `w₂` on the walls (left then right) and `w₁` on the bottom.
    wall: Mat<T>,
    bottom: Mat<T>,
}

fn features<T: Real>(table: &FieldTable<T>, cache: &GeometryCache<T>) -> Features<T> {
    let nf = table.len();
    let np = cache.bulk.len();
    let rows: Vec<[Vec<T>; 7]> = table
        .fields
        .par_iter()
        .map(|f| {
            let mut out: [Vec<T>; 7] = std::array::from_fn(|_| Vec::with_capacity(np));
            for (w, g) in f.bulk.iter().zip(&cache.bulk) {
                let v = [w[0].value(), w[1].value()];
                let ga = g.grad_a(w);
                let d11 = ga[0][0].value() * c(2.0);
                let d12 = ga[0][1].value() + ga[1][0].value();
                let d22 = ga[1][1].value() * c(2.0);
                let r = g.r();
                out[0].push(v[0]);
                out[1].push(v[1]);
                out[2].push(d11);
                out[3].push(d12 * c::<T>(2.0).sqrt());
                out[4].push(d22);
                out[5].push(r[0][0] * v[0] + r[0][1] * v[1]);
                out[6].push(r[1][0] * v[0] + r[1][1] * v[1]);
            }
            out
        })
        .collect();
    let pick = |k: usize| Mat::from_fn(nf, np, |i, p| rows[i][k][p]);
    let wall = Mat::from_fn(nf, cache.left.len() + cache.right.len(), |i, p| {
        let f = &table.fields[i];
        if p < f.left.len() {
            f.left[p][1].value()
        } else {
            f.right[p - f.left.len()][1].value()
        }
    });
    let bottom = Mat::from_fn(nf, cache.bottom.len(), |i, p| table.fields[i].bottom[p][0].value());
    Features { v: [pick(0), pick(1)], d: [pick(2), pick(3), pick(4)], rv: [pick(5), pick(6)], wall, bottom }
}

fn bulk_weights<T: Real>(mesh: &Mesh<T>, cache: &GeometryCache<T>, s: T) -> Vec<T> {
    mesh.w_bulk.iter().zip(&cache.bulk).map(|(&w, g)| s * w * g.j.value()).collect()
}

/// `(a, b)_{1,Σ}` Gram matrix of traces given at the top quadrature points.
fn surf_of<T: Real>(trace: &Mat<T>, slope: &Mat<T>, mesh: &Mesh<T>, params: &PhysicalParams<T>) -> Mat<T> {
    let wg: Vec<T> = mesh.w_top.iter().map(|&w| params.g * w).collect();
    let ws: Vec<T> = mesh
        .w_top
        .iter()
        .zip(&mesh.points.top)
        .map(|(&w, x)| {
            let z = mesh.zeta0.slope(x[0]);
            params.sigma * w / (T::one() + z * z).powf(c(1.5))
        })
        .collect();
    let mut s = weighted_products(&[(trace, trace)], &wg);
    s.axpy(T::one(), &weighted_products(&[(slope, slope)], &ws));
    s
}

/// Plain `H¹(−ℓ, ℓ)` Gram matrix of traces.
fn h1_trace_of<T: Real>(trace: &Mat<T>, slope: &Mat<T>, mesh: &Mesh<T>) -> Mat<T> {
    weighted_products(&[(trace, trace), (slope, slope)], &mesh.w_top)
}

fn corner_of<T: Real>(corner: &[(T, T)], kappa: T) -> Mat<T> {
    let n = corner.len();
    Mat::from_fn(n, n, |i, j| kappa * (corner[i].0 * corner[j].0 + corner[i].1 * corner[j].1))
}

#[derive(Clone, Debug)]
pub struct Basis<T> {
    pub m: usize,
    pub epsilon: T,
    pub lambda: Vec<T>,
    /// `φ^j = Σ_c coeffs[(c, j)] curl χ_c`; `ψ_j = M(0)φ^j`.
    pub coeffs: Mat<T>,
    /// Reference fields `φ^j`.
    pub phi: FieldTable<T>,
    /// `φ^j·𝒩₀` on `Σ`.
    pub traces: Vec<SurfaceFunction<T>>,
    /// `(φ^j·𝒩₀)(∓ℓ)`.
    pub corner: Vec<(T, T)>,
    /// Normal traces of `w^j = M φ^j / √λ_j` at the top quadrature points and
    /// their slopes (`m × n_top`).
    pub trace_top: Mat<T>,
    pub slope_top: Mat<T>,
    /// `(w^i·𝒩, w^j·𝒩)_{1,Σ}`; constant in time.
    pub surf: Mat<T>,
    /// `[w^i·𝒩, w^j·𝒩]_ℓ`; constant in time.
    pub corner_form: Mat<T>,
    /// Max defects of the `𝓗⁰(0)` and scaled `𝒲(0)` orthonormality.
    pub defects: (T, T),
}

impl<T: Real> Basis<T> {
    /// `1/√λ_j`.
    pub fn scales(&self) -> Vec<T> {
        self.lambda.iter().map(|&l| T::one() / l.sqrt()).collect()
    }

    /// Corner traces of `w^j` at `(−ℓ, ℓ)`.
    pub fn w_corner(&self) -> Vec<(T, T)> {
        self.corner.iter().zip(self.scales()).map(|(&(a, b), s)| (a * s, b * s)).collect()
    }

    /// Normal trace `Σ_j d_j w^j·𝒩` as a surface function.
    pub fn trace_of(&self, d: &[T], ell: T) -> SurfaceFunction<T> {
        let degree = self.traces.first().map_or(2, SurfaceFunction::degree);
        let mut coeffs = vec![T::zero(); degree + 1];
        for ((tr, &dj), s) in self.traces.iter().zip(d).zip(self.scales()) {
            for (a, &b) in coeffs.iter_mut().zip(tr.coeffs()) {
                *a += dj * s * b;
            }
        }
        SurfaceFunction::from_coeffs(ell, coeffs)
    }

    /// Assemble a basis from candidate coefficients.
    pub fn from_coeffs(mesh: &Mesh<T>, cands: &Candidates<T>, params: &PhysicalParams<T>, epsilon: T, lambda: Vec<T>, coeffs: Mat<T>) -> Self {
        let m = lambda.len();
        let phi = cands.fields.combine(&coeffs);
        let scales: Vec<T> = lambda.iter().map(|&l| T::one() / l.sqrt()).collect();
        let ct = coeffs.transpose();
        let mut trace_top = ct.matmul(&cands.trace_top);
        let mut slope_top = ct.matmul(&cands.slope_top);
        for j in 0..m {
            for p in 0..trace_top.cols() {
                trace_top[(j, p)] *= scales[j];
                slope_top[(j, p)] *= scales[j];
            }
        }
        let corner: Vec<(T, T)> = (0..m)
            .map(|j| {
                (0..cands.count()).fold((T::zero(), T::zero()), |(a, b), k| (a + coeffs[(k, j)] * cands.corner[k].0, b + coeffs[(k, j)] * cands.corner[k].1))
            })
            .collect();
        let traces = (0..m)
            .map(|j| {
                SurfaceFunction::from_fn(mesh.ell, mesh.degree + 2, |x| {
                    (0..cands.count()).fold(T::zero(), |acc, k| acc + coeffs[(k, j)] * cands.trace(k, mesh.ell, x).0)
                })
            })
            .collect();
        let surf = surf_of(&trace_top, &slope_top, mesh, params);
        let wc: Vec<(T, T)> = corner.iter().zip(&scales).map(|(&(a, b), &s)| (a * s, b * s)).collect();
        let corner_form = corner_of(&wc, params.kappa);
        Self { m, epsilon, lambda, coeffs, phi, traces, corner, trace_top, slope_top, surf, corner_form, defects: (T::zero(), T::zero()) }
    }

    /// Flat little-endian checkpoint: magic, version, sizes, `ε`, `λ`, coefficients.
    pub fn to_checkpoint(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        for n in [self.coeffs.rows() as u64, self.m as u64] {
            out.extend_from_slice(&n.to_le_bytes());
        }
        out.extend_from_slice(&self.epsilon.to_f64_lossy().to_le_bytes());
        for &l in &self.lambda {
            out.extend_from_slice(&l.to_f64_lossy().to_le_bytes());
        }
        for &v in self.coeffs.as_slice() {
            out.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
        }
        out
    }

    pub fn from_checkpoint(bytes: &[u8], mesh: &Mesh<T>, cands: &Candidates<T>, params: &PhysicalParams<T>) -> Result<Self> {
        let bad = |msg: &str| Error::Checkpoint(msg.to_string());
        let head = CHECKPOINT_MAGIC.len();
        if bytes.len() < head + 4 + 24 || &bytes[..head] != CHECKPOINT_MAGIC {
            return Err(bad("not a basis checkpoint"));
        }
        let version = u32::from_le_bytes(bytes[head..head + 4].try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let mut pos = head + 4;
        let mut next = || {
            let v = bytes.get(pos..pos + 8).map(|b| <[u8; 8]>::try_from(b).unwrap());
            pos += 8;
            v
        };
        let count = u64::from_le_bytes(next().ok_or_else(|| bad("truncated header"))?) as usize;
        let m = u64::from_le_bytes(next().ok_or_else(|| bad("truncated header"))?) as usize;
        if count != cands.count() {
            return Err(bad(&format!("checkpoint has {count} candidates, mesh has {}", cands.count())));
        }
        let mut float = || next().map(|b| T::lit(f64::from_le_bytes(b))).ok_or_else(|| bad("truncated body"));
        let epsilon = float()?;
        let lambda = (0..m).map(|_| float()).collect::<Result<Vec<T>>>()?;
        let data = (0..count * m).map(|_| float()).collect::<Result<Vec<T>>>()?;
        let coeffs = Mat::from_fn(count, m, |i, j| data[i * m + j]);
        Ok(Self::from_coeffs(mesh, cands, params, epsilon, lambda, coeffs))
    }
}

const CHECKPOINT_MAGIC: &[u8] = b"MCLBASIS";
const CHECKPOINT_VERSION: u32 = 1;

/// `𝓗⁰(0)` and `𝒲(0)` Gram matrices of the candidates pushed by `M(0)`.
pub fn candidate_grams<T: Real>(mesh: &Mesh<T>, cands: &Candidates<T>, cache0: &GeometryCache<T>, params: &PhysicalParams<T>, epsilon: T) -> (Mat<T>, Mat<T>) {
    let ones = vec![T::one(); cands.count()];
    let pushed = cands.fields.push(cache0, &ones);
    let CrossForms { mass: g, stiff: mut w, .. } = cross_forms(&pushed, &pushed, mesh, cache0, params);
    w.axpy(epsilon, &h1_trace_of(&cands.trace_top, &cands.slope_top, mesh));
    w.axpy(T::one(), &corner_of(&cands.corner, params.kappa));
    (g, w)
}

/// Solve `(ψ, v)_{𝒲(0)} = λ (ψ, v)_{𝓗⁰(0)}` on the candidate space and keep
/// the `m` lowest modes.
pub fn build_initial_basis<T: Real>(
    mesh: &Mesh<T>,
    cands: &Candidates<T>,
    cache0: &GeometryCache<T>,
    params: &PhysicalParams<T>,
    epsilon: T,
    m: usize,
) -> Result<Basis<T>> {
    let (mut g, mut w) = candidate_grams(mesh, cands, cache0, params, epsilon);
    g.symmetrize();
    w.symmetrize();
    let n = g.rows();
    let dscale: Vec<T> = (0..n).map(|i| T::one() / g[(i, i)].sqrt()).collect();
    let gs = Mat::from_fn(n, n, |i, j| g[(i, j)] * dscale[i] * dscale[j]);
    let eig = SymEigen::new(&gs).ok_or_else(|| Error::EigensolveFailure("Gram eigendecomposition".into()))?;
    let top = eig.values.last().copied().unwrap_or(T::zero());
    let keep: Vec<usize> = (0..n).filter(|&k| eig.values[k] > top * c(1e-13)).collect();
    if m > keep.len() {
        return Err(Error::SubspaceTooSmall { requested: m, available: keep.len() });
    }
    let t = Mat::from_fn(n, keep.len(), |i, k| dscale[i] * eig.vectors[(i, keep[k])] / eig.values[keep[k]].sqrt());
    let mut reduced = w.congruence(&t);
    reduced.symmetrize();
    let e2 = SymEigen::new(&reduced).ok_or_else(|| Error::EigensolveFailure("reduced eigenproblem".into()))?;
    let mut coeffs = t.matmul(&e2.vectors);

    // One refinement pass restores orthonormality lost to roundoff in the
    // two-stage reduction.
    let mut g2 = g.congruence(&coeffs);
    g2.symmetrize();
    let chol = Cholesky::factor(&g2).ok_or_else(|| Error::EigensolveFailure("refinement Cholesky".into()))?;
    coeffs = coeffs.matmul(&chol.inverse_lower_transpose());
    let mut w2 = w.congruence(&coeffs);
    w2.symmetrize();
    let e3 = SymEigen::new(&w2).ok_or_else(|| Error::EigensolveFailure("refinement eigenproblem".into()))?;
    coeffs = coeffs.matmul(&e3.vectors);

    let lambda: Vec<T> = e3.values[..m].to_vec();
    if let Some(bad) = lambda.iter().find(|l| !(**l > T::zero())) {
        return Err(Error::EigensolveFailure(format!("non-positive eigenvalue {}", bad.to_f64_lossy())));
    }
    let coeffs = Mat::from_fn(n, m, |i, j| coeffs[(i, j)]);
    let gram = g.congruence(&coeffs);
    let wram = w.congruence(&coeffs);
    let mut d0 = T::zero();
    let mut d1 = T::zero();
    for i in 0..m {
        for j in 0..m {
            let id = if i == j { T::one() } else { T::zero() };
            d0 = d0.max((gram[(i, j)] - id).abs());
            d1 = d1.max((wram[(i, j)] / (lambda[i] * lambda[j]).sqrt() - id).abs());
        }
    }
    let mut basis = Basis::from_coeffs(mesh, cands, params, epsilon, lambda, coeffs);
    basis.defects = (d0, d1);
    Ok(basis)
}

/// Basis fields `w^j(t) = M(t) φ^j / √λ_j` at every mesh point.
pub fn push_forward<T: Real>(basis: &Basis<T>, cache: &GeometryCache<T>) -> FieldTable<T> {
    basis.phi.push(cache, &basis.scales())
}

#[derive(Clone, Debug)]
pub struct FormMatrices<T> {
    pub mass: Mat<T>,
    pub stiff: Mat<T>,
    pub surf: Mat<T>,
    pub corner: Mat<T>,
    pub rcoup: Mat<T>,
    /// `∫ w^i·w^j ∂_tJ`, the correction in the energy identity.
    pub jt_mass: Mat<T>,
    /// Largest asymmetry removed from `mass` and `stiff`.
    pub asymmetry: T,
}

/// Bulk-and-wall forms between two field families `a` (rows) and `b`.
#[derive(Clone, Debug)]
pub struct CrossForms<T> {
    /// `(a_i, b_j)_{𝓗⁰}`.
    pub mass: Mat<T>,
    /// `((a_i, b_j))`.
    pub stiff: Mat<T>,
    /// `(R a_i, b_j)_{𝓗⁰}`.
    pub rcoup: Mat<T>,
    /// `∫ a_i·b_j ∂_tJ`.
    pub jt_mass: Mat<T>,
}

pub fn cross_forms<T: Real>(a: &FieldTable<T>, b: &FieldTable<T>, mesh: &Mesh<T>, cache: &GeometryCache<T>, params: &PhysicalParams<T>) -> CrossForms<T> {
    let fa = features(a, cache);
    let fb = features(b, cache);
    let wj = bulk_weights(mesh, cache, T::one());
    let wmu = bulk_weights(mesh, cache, params.mu * c(0.5));
    let mass = weighted_products(&[(&fa.v[0], &fb.v[0]), (&fa.v[1], &fb.v[1])], &wj);
    let mut stiff = weighted_products(&[(&fa.d[0], &fb.d[0]), (&fa.d[1], &fb.d[1]), (&fa.d[2], &fb.d[2])], &wmu);
    let ww: Vec<T> = mesh.w_left.iter().zip(&cache.left).chain(mesh.w_right.iter().zip(&cache.right)).map(|(&w, g)| params.beta * w * g.j.value()).collect();
    stiff.axpy(T::one(), &weighted_products(&[(&fa.wall, &fb.wall)], &ww));
    let wb: Vec<T> = mesh.w_bottom.iter().zip(&cache.bottom).map(|(&w, g)| params.beta * w * g.j.value()).collect();
    stiff.axpy(T::one(), &weighted_products(&[(&fa.bottom, &fb.bottom)], &wb));
    let rcoup = weighted_products(&[(&fa.rv[0], &fb.v[0]), (&fa.rv[1], &fb.v[1])], &wj);
    let wjt: Vec<T> = mesh.w_bulk.iter().zip(&cache.bulk).map(|(&w, g)| w * g.j_t).collect();
    let jt_mass = weighted_products(&[(&fa.v[0], &fb.v[0]), (&fa.v[1], &fb.v[1])], &wjt);
    CrossForms { mass, stiff, rcoup, jt_mass }
}

/// Assemble the five forms for pushed basis fields `w` on `cache`.
pub fn assemble<T: Real>(basis: &Basis<T>, w: &FieldTable<T>, mesh: &Mesh<T>, cache: &GeometryCache<T>, params: &PhysicalParams<T>) -> FormMatrices<T> {
    let CrossForms { mut mass, mut stiff, rcoup, mut jt_mass } = cross_forms(w, w, mesh, cache, params);
    let asymmetry = mass.symmetrize().max(stiff.symmetrize());
    jt_mass.symmetrize();
    FormMatrices { mass, stiff, surf: basis.surf.clone(), corner: basis.corner_form.clone(), rcoup, jt_mass, asymmetry }
}
