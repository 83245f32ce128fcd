//! Non-Hermitian eigendecomposition and spectral statistics.
//!
//! Left eigenvectors are read off the rows of U⁻¹ of the same factorization,
//! so left and right vectors are paired exactly, including inside clusters
//! of nearly degenerate eigenvalues. Exactly repeated eigenvalues get their
//! eigenspace from a null-space computation instead.

use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;
use num_complex::Complex;
use serde::Serialize;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};
use crate::models::{normal, rng};
use crate::scalar::Real;
use crate::stats;
use crate::superop::{SuperBasis, SuperOperator};

/// Eigenvalues closer than this (relative to ‖M‖_F) share one eigenspace
/// when their vectors need repair.
pub const CLUSTER_TOL: f64 = 1e-9;
/// Largest matrix handed to the dense eigensolver.
pub const MAX_DIM: usize = 8320;
/// Relative eigen-residual accepted by `decompose`.
pub const RESIDUAL_TOL: f64 = 1e-8;
/// Eigenvalues closer than this to 0 count as steady states.
pub const STEADY_TOL: f64 = 1e-8;
/// Relative imaginary part below which the real eigensolver is used.
pub const REAL_TOL: f64 = 1e-13;
const RESIDUAL_SAMPLES: usize = 24;

/// Eigenvalues with paired unit-norm right and left eigenvectors.
///
/// Ordered by decreasing real part, then increasing imaginary part.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<C64>,
    right: CMat,
    left: CMat,
    alpha: Vec<C64>,
    basis: Option<SuperBasis>,
    scale: f64,
}

impl SpectralDecomposition {
    pub fn from_parts(eigenvalues: Vec<C64>, right: CMat, left: CMat, alpha: Vec<C64>, basis: Option<SuperBasis>, scale: f64) -> Result<Self> {
        let d = eigenvalues.len();
        for (what, found) in [("right", right.ncols()), ("left", left.ncols()), ("alpha", alpha.len())] {
            if found != d {
                return Err(Error::Cache(format!("{what} has {found} entries, expected {d}")));
            }
        }
        Ok(Self { eigenvalues, right, left, alpha, basis, scale })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[C64] {
        &self.eigenvalues
    }

    pub fn right(&self) -> &CMat {
        &self.right
    }

    pub fn left(&self) -> &CMat {
        &self.left
    }

    pub fn right_vec(&self, k: usize) -> Vec<C64> {
        linalg::column(&self.right, k)
    }

    pub fn left_vec(&self, k: usize) -> Vec<C64> {
        linalg::column(&self.left, k)
    }

    /// α_k = 1/⟨l_k|r_k⟩ with both vectors unit-normalized.
    pub fn alpha(&self) -> &[C64] {
        &self.alpha
    }

    pub fn abs_alpha(&self) -> Vec<f64> {
        self.alpha.iter().map(|a| a.norm()).collect()
    }

    pub fn basis(&self) -> Option<&SuperBasis> {
        self.basis.as_ref()
    }

    /// Frobenius norm of the decomposed matrix.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn steady_indices(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&k| self.eigenvalues[k].norm() <= STEADY_TOL).collect()
    }

    /// Index of the unique steady state.
    pub fn steady_index(&self) -> Result<usize> {
        match self.steady_indices().as_slice() {
            [k] => Ok(*k),
            ks => Err(Error::DegenerateSteadyState(ks.len())),
        }
    }

    /// Mode with the smallest nonzero |Re λ| (ties by |Im λ|, then index).
    pub fn slowest_index(&self) -> Result<usize> {
        (0..self.dim())
            .filter(|&k| self.eigenvalues[k].norm() > STEADY_TOL)
            .min_by(|&a, &b| {
                let (x, y) = (self.eigenvalues[a], self.eigenvalues[b]);
                x.re.abs().total_cmp(&y.re.abs()).then(x.im.abs().total_cmp(&y.im.abs())).then(a.cmp(&b))
            })
            .ok_or_else(|| Error::InsufficientData("no non-steady eigenmode".into()))
    }

    /// Expansion coefficients c_k = α_k ⟨l_k|v⟩ so that v = Σ c_k r_k.
    pub fn coefficients(&self, v: &[C64]) -> Vec<C64> {
        let proj = linalg::vecmat(v, &self.left);
        proj.iter().zip(&self.alpha).map(|(p, a)| p.conj() * a).collect()
    }

    /// Σ_k c_k e^{λ_k t} r_k.
    pub fn propagate(&self, coeffs: &[C64], t: f64) -> Vec<C64> {
        let w: Vec<C64> = coeffs.iter().zip(&self.eigenvalues).map(|(c, l)| c * (l * t).exp()).collect();
        linalg::matvec(&self.right, &w)
    }

    /// Coefficients for the adjoint propagator, A = Σ c_k l_k.
    pub fn adjoint_coefficients(&self, a: &[C64]) -> Vec<C64> {
        let proj = linalg::vecmat(a, &self.right);
        proj.iter().zip(&self.alpha).map(|(p, al)| (p * al).conj()).collect()
    }

    /// Σ_k c_k e^{λ_k* t} l_k, i.e. e^{L† t} applied to the expanded operator.
    pub fn propagate_adjoint(&self, coeffs: &[C64], t: f64) -> Vec<C64> {
        let w: Vec<C64> = coeffs.iter().zip(&self.eigenvalues).map(|(c, l)| c * (l.conj() * t).exp()).collect();
        linalg::matvec(&self.left, &w)
    }

    /// Largest relative eigen-residual over all modes, both sides.
    pub fn full_residual(&self, l: &SuperOperator) -> f64 {
        let (r, lft) = residuals(l.matrix(), &self.eigenvalues, &self.right, &self.left, 0..self.dim());
        r.max(lft) / l.frobenius().max(f64::MIN_POSITIVE)
    }

    /// max_{j≠k} |⟨l_j|r_k⟩|.
    pub fn biorthogonality_residual(&self) -> f64 {
        let g = self.left.adjoint() * &self.right;
        let mut worst = 0.0f64;
        for k in 0..self.dim() {
            for j in 0..self.dim() {
                if j != k {
                    worst = worst.max(g[(j, k)].norm());
                }
            }
        }
        worst
    }

    /// max over random probes of ‖Σ α_j |r_j⟩⟨l_j|v⟩ − v‖/‖v‖.
    pub fn completeness_residual(&self, probes: usize, seed: u64) -> f64 {
        let mut g = rng(seed);
        (0..probes)
            .map(|_| {
                let v: Vec<C64> = (0..self.dim()).map(|_| C64::new(normal(&mut g), normal(&mut g))).collect();
                let back = linalg::matvec(&self.right, &self.coefficients(&v));
                linalg::diff_norm(&back, &v) / linalg::norm(&v)
            })
            .fold(0.0, f64::max)
    }

    /// Multiset distance between the spectrum and its complex conjugate.
    pub fn conjugation_residual(&self) -> f64 {
        let conj: Vec<C64> = self.eigenvalues.iter().map(|z| z.conj()).collect();
        multiset_distance(&self.eigenvalues, &conj)
    }
}

fn residuals(m: &CMat, eig: &[C64], right: &CMat, left: &CMat, cols: impl Iterator<Item = usize>) -> (f64, f64) {
    let mut rmax = 0.0f64;
    let mut lmax = 0.0f64;
    for k in cols {
        let r = linalg::column(right, k);
        let mr = linalg::matvec(m, &r);
        let dr: f64 = mr.iter().zip(&r).map(|(a, b)| (a - eig[k] * b).norm_sqr()).sum();
        // l† M = λ l†
        let l = linalg::column(left, k);
        let lm = linalg::vecmat(&l, m);
        let dl: f64 = lm.iter().zip(&l).map(|(a, b)| (a - eig[k] * b.conj()).norm_sqr()).sum();
        rmax = rmax.max(dr.sqrt());
        lmax = lmax.max(dl.sqrt());
    }
    (rmax, lmax)
}

/// Replaces eigenvectors that fail their residual by an orthonormal basis of
/// the null space of (M − λ̄) for their eigenvalue cluster. Back-substitution
/// in the Schur form breaks down when an eigenvalue repeats exactly.
fn repair_degenerate(m: &CMat, s: &[C64], mut u: CMat, scale: f64) -> Result<CMat> {
    let d = m.nrows();
    for k in 0..d {
        let nu = (0..d).map(|i| u[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        for i in 0..d {
            u[(i, k)] /= nu;
        }
    }
    let mu = m * &u;
    let bad: Vec<usize> = (0..d)
        .filter(|&k| {
            let r = (0..d).map(|i| (mu[(i, k)] - s[k] * u[(i, k)]).norm_sqr()).sum::<f64>().sqrt();
            !(r <= 1e-10 * scale)
        })
        .collect();
    if bad.is_empty() {
        return Ok(u);
    }
    let ctol = CLUSTER_TOL * scale;
    let mut done = vec![false; d];
    for &k in &bad {
        if done[k] {
            continue;
        }
        // transitive closure of eigenvalues within ctol of each other
        let mut cluster = vec![k];
        done[k] = true;
        let mut next = 0;
        while next < cluster.len() {
            let z = s[cluster[next]];
            for j in 0..d {
                if !done[j] && (s[j] - z).norm() <= ctol {
                    done[j] = true;
                    cluster.push(j);
                }
            }
            next += 1;
        }
        let size = cluster.len();
        let centre = cluster.iter().map(|&j| s[j]).sum::<C64>() / size as f64;
        let shifted = CMat::from_fn(d, d, |i, j| if i == j { m[(i, j)] - centre } else { m[(i, j)] });
        let svd = shifted.svd().map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
        let sv = svd.S().column_vector();
        let sigma = sv[d - size].re;
        if sigma > 1e-8 * scale {
            return Err(Error::Eigensolver(format!(
                "eigenvalue cluster of size {size} at {centre:.6} is defective (σ = {sigma:.3e})"
            )));
        }
        for (slot, &j) in cluster.iter().enumerate() {
            let col = d - size + slot;
            for i in 0..d {
                u[(i, j)] = svd.V()[(i, col)];
            }
        }
    }
    Ok(u)
}

/// Eigendecomposition of a dense matrix, taking the real path when possible.
pub fn decompose_matrix(m: &CMat, basis: Option<SuperBasis>) -> Result<SpectralDecomposition> {
    let d = m.nrows();
    if d > MAX_DIM {
        return Err(Error::ResourceGuard { what: "dense eigendecomposition (dimension)", n: d, max: MAX_DIM });
    }
    if d == 0 {
        return Err(Error::InsufficientData("empty matrix".into()));
    }
    let scale = linalg::frobenius(m);
    let max_im = (0..d).flat_map(|j| (0..d).map(move |i| (i, j))).fold(0.0f64, |a, (i, j)| a.max(m[(i, j)].im.abs()));
    let (u, s): (CMat, Vec<C64>) = if max_im <= REAL_TOL * linalg::max_abs(m) {
        let re = Mat::from_fn(d, d, |i, j| m[(i, j)].re);
        let e = re.eigen().map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
        (e.U().to_owned(), e.S().column_vector().iter().copied().collect())
    } else {
        let e = m.eigen().map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
        (e.U().to_owned(), e.S().column_vector().iter().copied().collect())
    };
    let u = repair_degenerate(m, &s, u, scale)?;
    let w = u.partial_piv_lu().inverse();

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| s[b].re.total_cmp(&s[a].re).then(s[a].im.total_cmp(&s[b].im)).then(a.cmp(&b)));

    let mut right = CMat::zeros(d, d);
    let mut left = CMat::zeros(d, d);
    let mut alpha = Vec::with_capacity(d);
    let mut eigenvalues = Vec::with_capacity(d);
    for (k, &src) in order.iter().enumerate() {
        let nu = (0..d).map(|i| u[(i, src)].norm_sqr()).sum::<f64>().sqrt();
        let nw = (0..d).map(|i| w[(src, i)].norm_sqr()).sum::<f64>().sqrt();
        if nu == 0.0 || nw == 0.0 || !(nu * nw).is_finite() {
            return Err(Error::Eigensolver(format!("degenerate eigenvector for mode {k}")));
        }
        for i in 0..d {
            right[(i, k)] = u[(i, src)] / nu;
            left[(i, k)] = w[(src, i)].conj() / nw;
        }
        // ⟨l|r⟩ = 1/(‖u‖‖w‖) exactly, since w·u = 1
        alpha.push(C64::new(nu * nw, 0.0));
        eigenvalues.push(s[src]);
    }

    let step = d.div_ceil(RESIDUAL_SAMPLES).max(1);
    let (rr, lr) = residuals(m, &eigenvalues, &right, &left, (0..d).step_by(step));
    let worst = rr.max(lr) / scale.max(f64::MIN_POSITIVE);
    if worst > RESIDUAL_TOL {
        return Err(Error::Eigensolver(format!("eigen-residual {worst:.3e} exceeds {RESIDUAL_TOL:e}")));
    }
    SpectralDecomposition::from_parts(eigenvalues, right, left, alpha, basis, scale)
}

/// Decomposes a Lindbladian in its own basis.
pub fn decompose(l: &SuperOperator) -> Result<SpectralDecomposition> {
    decompose_matrix(l.matrix(), Some(l.basis().clone()))
}

/// Greedy nearest-neighbour matching distance between two multisets
/// (largest matched separation; infinite for unequal sizes).
pub fn multiset_distance(a: &[C64], b: &[C64]) -> f64 {
    match match_multisets(a, b) {
        Some((_, worst)) => worst,
        None => f64::INFINITY,
    }
}

/// Greedy matching of `a` onto `b`: entry i of the result is the index in `b`
/// paired with `a[i]`, together with the largest matched separation.
pub fn match_multisets(a: &[C64], b: &[C64]) -> Option<(Vec<usize>, f64)> {
    if a.len() != b.len() {
        return None;
    }
    let mut assignment = Vec::with_capacity(a.len());
    let mut bs: Vec<(usize, C64)> = b.iter().copied().enumerate().collect();
    bs.sort_by(|x, y| x.1.re.total_cmp(&y.1.re));
    let mut used = vec![false; bs.len()];
    let mut worst = 0.0f64;
    for z in a {
        // search outward from the insertion point in sorted real part
        let pos = bs.partition_point(|p| p.1.re < z.re);
        let mut best: Option<(usize, f64)> = None;
        let (mut lo, mut hi) = (pos as isize - 1, pos);
        loop {
            let bound = best.map_or(f64::INFINITY, |b| b.1);
            let mut progressed = false;
            if hi < bs.len() && bs[hi].1.re - z.re <= bound {
                if !used[hi] {
                    let dist = (bs[hi].1 - z).norm();
                    if dist < best.map_or(f64::INFINITY, |b| b.1) {
                        best = Some((hi, dist));
                    }
                }
                hi += 1;
                progressed = true;
            }
            let bound = best.map_or(f64::INFINITY, |b| b.1);
            if lo >= 0 && z.re - bs[lo as usize].1.re <= bound {
                if !used[lo as usize] {
                    let dist = (bs[lo as usize].1 - z).norm();
                    if dist < best.map_or(f64::INFINITY, |b| b.1) {
                        best = Some((lo as usize, dist));
                    }
                }
                lo -= 1;
                progressed = true;
            }
            if !progressed {
                break;
            }
        }
        match best {
            Some((k, dist)) => {
                used[k] = true;
                assignment.push(bs[k].0);
                worst = worst.max(dist);
            }
            None => return None,
        }
    }
    Some((assignment, worst))
}

/// Summary of the eigenvalue cloud.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectralShape<T> {
    pub x_m: T,
    pub y_m: T,
    pub x_bar: T,
    pub sigma_x: T,
    pub sigma_y: T,
    pub skewness: T,
    pub n_real: usize,
}

impl<T: Real> SpectralShape<T> {
    /// |Re λ − X̄| ≤ 2σ_X.
    pub fn in_bulk(&self, z: Complex<T>) -> bool {
        (z.re - self.x_bar).abs() <= T::lit(2.0) * self.sigma_x
    }

    /// Freezing time 2/|X̄ + 2σ_X|.
    pub fn freezing_time(&self) -> T {
        T::lit(2.0) / (self.x_bar + T::lit(2.0) * self.sigma_x).abs()
    }
}

pub fn shape_stats<T: Real>(eigs: &[Complex<T>]) -> Result<SpectralShape<T>> {
    if eigs.is_empty() {
        return Err(Error::InsufficientData("empty spectrum".into()));
    }
    let re: Vec<T> = eigs.iter().map(|z| z.re).collect();
    let im: Vec<T> = eigs.iter().map(|z| z.im).collect();
    let x_bar = stats::mean(&re);
    let sigma_x = stats::std(&re);
    let sigma_y = (im.iter().map(|&y| y * y).sum::<T>() / T::from_usize_lossy(im.len())).sqrt();
    let thresh = T::lit(1e-9) * sigma_y;
    Ok(SpectralShape {
        x_m: re.iter().fold(T::zero(), |a, x| a.max(x.abs())),
        y_m: im.iter().fold(T::neg_infinity(), |a, &y| a.max(y)),
        x_bar,
        sigma_x,
        sigma_y,
        skewness: stats::skewness(&re),
        n_real: im.iter().filter(|y| y.abs() <= thresh).count(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axis {
    Real,
    Imag,
}

/// Normalized histogram of Re λ or Im λ over the sample range
/// (symmetric about 0 for the imaginary axis).
pub fn marginal_density<T: Real>(eigs: &[Complex<T>], axis: Axis, bins: usize) -> Result<(Vec<T>, Vec<T>)> {
    let xs: Vec<T> = eigs.iter().map(|z| if axis == Axis::Real { z.re } else { z.im }).collect();
    let (mut lo, mut hi) = stats::min_max(&xs);
    if axis == Axis::Imag {
        let m = lo.abs().max(hi.abs());
        (lo, hi) = (-m, m);
    }
    if !(hi > lo) {
        let pad = T::lit(0.5) * lo.abs().max(T::one());
        (lo, hi) = (lo - pad, hi + pad);
    }
    stats::density_histogram(&xs, lo, hi, bins)
}

/// Region of the complex plane whose points report a spacing ratio.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Window {
    All,
    /// |Re λ − X̄| ≤ 2σ_X and σ_Y/4 ≤ Im λ ≤ 3σ_Y/2.
    Bulk,
    Disk { re: f64, im: f64, radius: f64 },
    Rect { re_min: f64, re_max: f64, im_min: f64, im_max: f64 },
    /// |Re λ − X̄| ≤ width·σ_X and |Im λ| ≤ height·σ_Y.
    Strip { width: f64, height: f64 },
}

impl Window {
    pub fn contains<T: Real>(&self, z: Complex<T>, shape: &SpectralShape<T>) -> bool {
        let (x, y) = (z.re.as_f64(), z.im.as_f64());
        let (xb, sx, sy) = (shape.x_bar.as_f64(), shape.sigma_x.as_f64(), shape.sigma_y.as_f64());
        match *self {
            Window::All => true,
            Window::Bulk => (x - xb).abs() <= 2.0 * sx && y >= sy / 4.0 && y <= 1.5 * sy,
            Window::Disk { re, im, radius } => (x - re).hypot(y - im) < radius,
            Window::Rect { re_min, re_max, im_min, im_max } => x >= re_min && x <= re_max && y >= im_min && y <= im_max,
            Window::Strip { width, height } => (x - xb).abs() <= width * sx && y.abs() <= height * sy,
        }
    }

    pub fn describe(&self) -> String {
        serde_json::to_string(self).unwrap_or_default()
    }
}

/// Spacing ratios of the points inside a window.
#[derive(Clone, Debug, Serialize)]
pub struct CsrSample<T> {
    pub z: Vec<Complex<T>>,
    /// Spectrum index of each reported ratio.
    pub indices: Vec<usize>,
    /// Points whose nearest neighbour sits within the duplicate tolerance.
    pub duplicates: usize,
    pub source_window: String,
}

// Uniform bucket grid for nearest-neighbour queries in the plane.
struct Grid<T> {
    lo: (T, T),
    cell: T,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl<T: Real> Grid<T> {
    fn new(pts: &[Complex<T>]) -> Self {
        let (xl, xh) = stats::min_max(&pts.iter().map(|z| z.re).collect::<Vec<_>>());
        let (yl, yh) = stats::min_max(&pts.iter().map(|z| z.im).collect::<Vec<_>>());
        let span = (xh - xl).max(yh - yl).max(T::lit(1e-300));
        let area = ((xh - xl).max(span * T::lit(1e-6))) * ((yh - yl).max(span * T::lit(1e-6)));
        // about two points per cell
        let cell = (T::lit(2.0) * area / T::from_usize_lossy(pts.len())).sqrt().max(span * T::lit(1e-9));
        let nx = ((xh - xl) / cell).to_usize().unwrap_or(0) + 1;
        let ny = ((yh - yl) / cell).to_usize().unwrap_or(0) + 1;
        let mut g = Self { lo: (xl, yl), cell, nx, ny, buckets: vec![Vec::new(); nx * ny] };
        for (k, z) in pts.iter().enumerate() {
            let (i, j) = g.cell_of(*z);
            g.buckets[j * nx + i].push(k);
        }
        g
    }

    fn cell_of(&self, z: Complex<T>) -> (usize, usize) {
        let i = ((z.re - self.lo.0) / self.cell).to_usize().unwrap_or(0).min(self.nx - 1);
        let j = ((z.im - self.lo.1) / self.cell).to_usize().unwrap_or(0).min(self.ny - 1);
        (i, j)
    }

    /// Two nearest other points (by index-stable distance ordering).
    fn two_nearest(&self, pts: &[Complex<T>], k: usize) -> Option<[(usize, T); 2]> {
        let z = pts[k];
        let (ci, cj) = self.cell_of(z);
        let mut best: [(usize, T); 2] = [(usize::MAX, T::infinity()); 2];
        let better = |a: (usize, T), b: (usize, T)| a.1 < b.1 || (a.1 == b.1 && a.0 < b.0);
        let max_ring = self.nx.max(self.ny);
        for ring in 0..=max_ring {
            // points outside ring r are at least r·cell away
            if best[1].0 != usize::MAX && T::from_usize_lossy(ring.saturating_sub(1)) * self.cell > best[1].1 {
                break;
            }
            let (i0, i1) = (ci as isize - ring as isize, ci as isize + ring as isize);
            let (j0, j1) = (cj as isize - ring as isize, cj as isize + ring as isize);
            for j in j0..=j1 {
                if j < 0 || j >= self.ny as isize {
                    continue;
                }
                for i in i0..=i1 {
                    if i < 0 || i >= self.nx as isize {
                        continue;
                    }
                    if i != i0 && i != i1 && j != j0 && j != j1 {
                        continue;
                    }
                    for &m in &self.buckets[j as usize * self.nx + i as usize] {
                        if m == k {
                            continue;
                        }
                        let cand = (m, (pts[m] - z).norm());
                        if better(cand, best[0]) {
                            best[1] = best[0];
                            best[0] = cand;
                        } else if better(cand, best[1]) {
                            best[1] = cand;
                        }
                    }
                }
            }
        }
        (best[1].0 != usize::MAX).then_some(best)
    }
}

/// z_j = (λ^NN − λ_j)/(λ^NNN − λ_j) for window members; neighbours come
/// from the whole spectrum.
pub fn csr<T: Real>(eigs: &[Complex<T>], window: Window) -> Result<CsrSample<T>> {
    if eigs.len() < 3 {
        return Err(Error::InsufficientData(format!("spacing ratios need 3 eigenvalues, got {}", eigs.len())));
    }
    let shape = shape_stats(eigs)?;
    let members: Vec<usize> = (0..eigs.len()).filter(|&k| window.contains(eigs[k], &shape)).collect();
    if members.len() < 3 {
        return Err(Error::InsufficientData(format!("window holds {} eigenvalues, need 3", members.len())));
    }
    let scale = eigs.iter().fold(T::one(), |a, z| a.max(z.norm()));
    let dup_tol = T::lit(1e-12) * scale;
    let grid = Grid::new(eigs);
    let mut out = CsrSample { z: Vec::new(), indices: Vec::new(), duplicates: 0, source_window: window.describe() };
    for &k in &members {
        let Some([nn, nnn]) = grid.two_nearest(eigs, k) else { continue };
        if nn.1 <= dup_tol {
            out.duplicates += 1;
        }
        if nnn.1 == T::zero() {
            continue;
        }
        out.z.push((eigs[nn.0] - eigs[k]) / (eigs[nnn.0] - eigs[k]));
        out.indices.push(k);
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct CsrStats<T> {
    pub count: usize,
    pub mean_abs: T,
    pub mean_cos_theta: T,
    /// (bin centre, density) of |z| on [0, 1].
    pub radial_hist: (Vec<T>, Vec<T>),
    /// (bin centre, density) of arg z on [−π, π].
    pub angular_hist: (Vec<T>, Vec<T>),
}

pub fn csr_stats<T: Real>(sample: &CsrSample<T>, bins: usize) -> Result<CsrStats<T>> {
    if sample.z.is_empty() {
        return Err(Error::InsufficientData("empty spacing-ratio sample".into()));
    }
    let r: Vec<T> = sample.z.iter().map(|z| z.norm()).collect();
    let th: Vec<T> = sample.z.iter().map(|z| z.arg()).collect();
    Ok(CsrStats {
        count: r.len(),
        mean_abs: stats::mean(&r),
        mean_cos_theta: stats::mean(&th.iter().map(|t| t.cos()).collect::<Vec<_>>()),
        radial_hist: stats::density_histogram(&r, T::zero(), T::one(), bins)?,
        angular_hist: stats::density_histogram(&th, -T::PI(), T::PI(), bins)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GinibreKind {
    Complex,
    Real,
}

/// Largest reference-ensemble matrix.
pub const GINIBRE_MAX: usize = 4000;

/// n×n matrix of i.i.d. standard normals (complex entries have E|z|² = 1).
pub fn ginibre_matrix(n: usize, kind: GinibreKind, seed: u64) -> Result<CMat> {
    if n == 0 || n > GINIBRE_MAX {
        return Err(Error::ResourceGuard { what: "Ginibre sample size", n, max: GINIBRE_MAX });
    }
    let mut g = rng(seed);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    // column-major fill keeps the draw order independent of faer internals
    let mut m = CMat::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            m[(i, j)] = match kind {
                GinibreKind::Complex => C64::new(normal(&mut g) * s, normal(&mut g) * s),
                GinibreKind::Real => C64::new(normal(&mut g), 0.0),
            };
        }
    }
    Ok(m)
}

pub fn sample_ginibre(n: usize, kind: GinibreKind, seed: u64) -> Result<Vec<C64>> {
    let m = ginibre_matrix(n, kind, seed)?;
    let ev = match kind {
        GinibreKind::Complex => m.eigenvalues(),
        GinibreKind::Real => Mat::from_fn(n, n, |i, j| m[(i, j)].re).eigenvalues(),
    };
    ev.map_err(|e| Error::Eigensolver(format!("{e:?}")))
}

/// Uncorrelated points drawn uniformly from the unit disk (rejection sampling).
pub fn sample_poisson_disk(n: usize, seed: u64) -> Vec<C64> {
    let mut g = rng(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let (x, y): (f64, f64) = (g.random_range(-1.0..1.0), g.random_range(-1.0..1.0));
        if x * x + y * y < 1.0 {
            out.push(C64::new(x, y));
        }
    }
    out
}

/// Eigenvalues and |α| of a complex Ginibre matrix.
pub fn ginibre_alpha(n: usize, seed: u64) -> Result<(Vec<C64>, Vec<f64>)> {
    let dec = decompose_matrix(&ginibre_matrix(n, GinibreKind::Complex, seed)?, None)?;
    Ok((dec.eigenvalues().to_vec(), dec.abs_alpha()))
}

/// ρ_G(x) = 32/(π² x⁵) exp(−4/(π x²)).
pub fn rho_g<T: Real>(x: T) -> T {
    if x <= T::zero() {
        return T::zero();
    }
    let pi = T::PI();
    T::lit(32.0) / (pi * pi * x.powi(5)) * (-T::lit(4.0) / (pi * x * x)).exp()
}

/// ∫₀ˣ ρ_G = (1 + u) e^{−u}, u = 4/(π x²).
pub fn rho_g_cdf<T: Real>(x: T) -> T {
    if x <= T::zero() {
        return T::zero();
    }
    let u = T::lit(4.0) / (T::PI() * x * x);
    (T::one() + u) * (-u).exp()
}

#[derive(Clone, Debug, Serialize)]
pub struct AlphaStats {
    pub values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub centres: Vec<f64>,
    pub hist: Vec<f64>,
    /// ρ_G at the bin centres.
    pub reference: Vec<f64>,
    pub ks_distance: f64,
}

/// |α| of the modes in `window`, rescaled by their mean and compared to ρ_G.
pub fn alpha_stats(eigs: &[C64], abs_alpha: &[f64], window: Window, bins: usize) -> Result<AlphaStats> {
    let shape = shape_stats(eigs)?;
    let values: Vec<f64> = (0..eigs.len()).filter(|&k| window.contains(eigs[k], &shape)).map(|k| abs_alpha[k]).collect();
    alpha_stats_of(values, bins)
}

/// GinUE |α| with the radial profile removed, pooled over samples: the mean of |α|² grows as
/// n(1 − |z|²/n), so each value is divided by √(1 − |z|²/n) and only |z| < `radius_fraction`·√n
/// is kept. Each sample is an (eigenvalues, |α|) pair from one matrix.
pub fn ginibre_alpha_stats(samples: &[(Vec<C64>, Vec<f64>)], radius_fraction: f64, bins: usize) -> Result<AlphaStats> {
    let mut values = Vec::new();
    for (eigs, abs_alpha) in samples {
        let n = eigs.len() as f64;
        values.extend(
            eigs.iter()
                .zip(abs_alpha)
                .filter(|(z, _)| z.norm() < radius_fraction * n.sqrt())
                .map(|(z, a)| a / (1.0 - z.norm_sqr() / n).sqrt()),
        );
    }
    alpha_stats_of(values, bins)
}

fn alpha_stats_of(values: Vec<f64>, bins: usize) -> Result<AlphaStats> {
    if values.is_empty() {
        return Err(Error::InsufficientData("no eigenvalues inside the alpha window".into()));
    }
    let mean = stats::mean(&values);
    let x: Vec<f64> = values.iter().map(|v| v / mean).collect();
    let hi = x.iter().copied().fold(3.0, f64::max).min(6.0);
    let (centres, hist) = stats::density_histogram(&x, 0.0, hi, bins)?;
    let reference = centres.iter().map(|&c| rho_g(c)).collect();
    Ok(AlphaStats { std: stats::std(&values), ks_distance: stats::ks_distance(&x, rho_g_cdf), values, mean, centres, hist, reference })
}
