//! Locality of eigenoperators: size distributions, coarse-grained profiles,
//! sector IPR, superoperator matrix elements and the slow-mode diagnostic.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};
use crate::pauli::{size_distribution, PauliBasis};
use crate::scalar::Real;
use crate::spectral::{shape_stats, SpectralDecomposition, STEADY_TOL};
use crate::stats;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Left,
    Right,
}

/// p_s(r_j) and p_s(l_j) for every eigenmode.
#[derive(Clone, Debug, Serialize)]
pub struct SizeProfile {
    pub n: usize,
    pub eigenvalues: Vec<C64>,
    pub right: Vec<Vec<f64>>,
    pub left: Vec<Vec<f64>>,
}

impl SizeProfile {
    pub fn side(&self, side: Side) -> &[Vec<f64>] {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }
}

pub fn pauli_basis_of(dec: &SpectralDecomposition) -> Result<Arc<PauliBasis>> {
    dec.basis()
        .and_then(|b| b.pauli().cloned())
        .ok_or_else(|| Error::Precondition("eigenoperator analysis needs a Pauli-basis decomposition".into()))
}

fn column(m: &CMat, k: usize) -> Vec<C64> {
    (0..m.nrows()).map(|i| m[(i, k)]).collect()
}

pub fn eigen_size_profile(dec: &SpectralDecomposition) -> Result<SizeProfile> {
    let basis = pauli_basis_of(dec)?;
    let table = |m: &CMat| -> Result<Vec<Vec<f64>>> { (0..dec.dim()).map(|k| size_distribution(&basis, &column(m, k))).collect() };
    Ok(SizeProfile { n: basis.n(), eigenvalues: dec.eigenvalues().to_vec(), right: table(dec.right())?, left: table(dec.left())? })
}

/// Σ_s s·p_s.
pub fn mean_size<T: Real>(p: &[T]) -> T {
    p.iter().enumerate().map(|(s, &w)| T::from_usize_lossy(s) * w).sum()
}

/// One coarse-graining window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CoarseWindow<T> {
    pub x0: T,
    pub count: usize,
    /// None marks an empty window.
    pub mean: Option<T>,
    pub std: T,
    pub min: T,
    pub max: T,
    /// min(max, σ) above the mean.
    pub err_top: T,
    /// min(min, σ) below the mean.
    pub err_bottom: T,
}

/// Window centres lo + Δ/2 + kΔ covering [lo, hi].
pub fn tiling_grid<T: Real>(lo: T, hi: T, delta: T) -> Result<Vec<T>> {
    if !(delta > T::zero()) {
        return Err(Error::Precondition("coarse-graining width must be positive".into()));
    }
    let n = ((hi - lo) / delta).floor().to_usize().unwrap_or(0) + 1;
    Ok((0..n).map(|k| lo + delta * (T::from_usize_lossy(k) + T::lit(0.5))).collect())
}

/// Averages `values` over windows of width Δ centred on `grid`.
///
/// With `tile` set the grid must be evenly spaced by Δ; each point then lands
/// in exactly one window.
/// Otherwise windows are closed on both sides.
pub fn coarse_grain_values<T: Real>(xs: &[T], values: &[Option<T>], delta: T, grid: &[T], tile: bool) -> Result<Vec<CoarseWindow<T>>> {
    if !(delta > T::zero()) {
        return Err(Error::Precondition("coarse-graining width must be positive".into()));
    }
    if xs.len() != values.len() {
        return Err(Error::DimensionMismatch { expected: xs.len(), found: values.len() });
    }
    let half = delta * T::lit(0.5);
    let edge = grid.first().map_or(T::zero(), |&g| g - half);
    let slack = T::lit(1e-9);
    // tile index of x, tolerant to rounding at the outer edges
    let tile_of = |x: T| -> Option<usize> {
        let kf = (x - edge) / delta;
        if kf < -slack || kf > T::from_usize_lossy(grid.len()) + slack {
            return None;
        }
        Some(kf.floor().max(T::zero()).to_usize().unwrap_or(0).min(grid.len() - 1))
    };
    Ok(grid
        .iter()
        .enumerate()
        .map(|(g, &x0)| {
            let picked: Vec<T> = xs
                .iter()
                .zip(values)
                .filter(|(&x, _)| if tile { tile_of(x) == Some(g) } else { (x - x0).abs() <= half })
                .filter_map(|(_, v)| *v)
                .collect();
            if picked.is_empty() {
                let nan = T::nan();
                return CoarseWindow { x0, count: 0, mean: None, std: nan, min: nan, max: nan, err_top: nan, err_bottom: nan };
            }
            let sd = stats::std(&picked);
            let (lo, hi) = stats::min_max(&picked);
            CoarseWindow {
                x0,
                count: picked.len(),
                mean: Some(stats::mean(&picked)),
                std: sd,
                min: lo,
                max: hi,
                err_top: hi.min(sd),
                err_bottom: lo.min(sd),
            }
        })
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct CoarseProfile {
    pub delta: f64,
    pub side: Side,
    pub s: usize,
    pub windows: Vec<CoarseWindow<f64>>,
}

impl CoarseProfile {
    /// Window whose centre is closest to x.
    pub fn nearest(&self, x: f64) -> Option<&CoarseWindow<f64>> {
        self.windows.iter().min_by(|a, b| (a.x0 - x).abs().total_cmp(&(b.x0 - x).abs()))
    }

    /// Non-empty window with the largest centre.
    pub fn rightmost(&self) -> Option<&CoarseWindow<f64>> {
        self.windows.iter().rev().find(|w| w.count > 0)
    }
}

/// p̃_s over a tiling of the real axis of the spectrum.
pub fn coarse_grain(profile: &SizeProfile, delta: f64, side: Side, s: usize) -> Result<CoarseProfile> {
    if s > profile.n {
        return Err(Error::Precondition(format!("size {s} exceeds N = {}", profile.n)));
    }
    let xs: Vec<f64> = profile.eigenvalues.iter().map(|z| z.re).collect();
    let (lo, hi) = stats::min_max(&xs);
    let grid = tiling_grid(lo, hi, delta)?;
    let vals: Vec<Option<f64>> = profile.side(side).iter().map(|p| Some(p[s])).collect();
    Ok(CoarseProfile { delta, side, s, windows: coarse_grain_values(&xs, &vals, delta, &grid, true)? })
}

/// (Σ_{sector}|c|²)² / Σ_{sector}|c|⁴.
pub fn sector_ipr(basis: &PauliBasis, coeffs: &[C64], s: usize) -> Result<f64> {
    let (mut w2, mut w4) = (0.0, 0.0);
    for (e, c) in basis.elements().iter().zip(coeffs) {
        if e.size() == s {
            let a = c.norm_sqr();
            w2 += a;
            w4 += a * a;
        }
    }
    if w4 == 0.0 {
        return Err(Error::Precondition(format!("operator has no weight in size sector {s}")));
    }
    Ok(w2 * w2 / w4)
}

/// IPR of every mode in sector s (None when the sector weight is zero).
pub fn mode_iprs(dec: &SpectralDecomposition, side: Side, s: usize) -> Result<Vec<Option<f64>>> {
    let basis = pauli_basis_of(dec)?;
    let m = match side {
        Side::Left => dec.left(),
        Side::Right => dec.right(),
    };
    Ok((0..dec.dim()).map(|k| sector_ipr(&basis, &column(m, k), s).ok()).collect())
}

/// Abscissa used for coarse-graining.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Abscissa {
    /// Re λ.
    Raw,
    /// (Re λ − X̄)/σ_X.
    Standardized,
}

/// Window-averaged sector IPR; divided by b_N(s) when `rescale` is set.
///
/// Without a grid the real axis is tiled from its minimum; with one, closed
/// windows are centred on the given points (so curves of different N share
/// abscissae).
pub fn coarse_ipr(
    dec: &SpectralDecomposition,
    delta: f64,
    side: Side,
    s: usize,
    abscissa: Abscissa,
    rescale: bool,
    grid: Option<&[f64]>,
) -> Result<CoarseProfile> {
    let basis = pauli_basis_of(dec)?;
    let b = basis.sector_count(s) as f64;
    if b == 0.0 {
        return Err(Error::EmptySector(s));
    }
    let shape = shape_stats(dec.eigenvalues())?;
    let xs: Vec<f64> = dec
        .eigenvalues()
        .iter()
        .map(|z| match abscissa {
            Abscissa::Raw => z.re,
            Abscissa::Standardized => (z.re - shape.x_bar) / shape.sigma_x,
        })
        .collect();
    let vals: Vec<Option<f64>> = mode_iprs(dec, side, s)?.into_iter().map(|v| v.map(|x| if rescale { x / b } else { x })).collect();
    let windows = match grid {
        Some(g) => coarse_grain_values(&xs, &vals, delta, g, false)?,
        None => {
            let (lo, hi) = stats::min_max(&xs);
            coarse_grain_values(&xs, &vals, delta, &tiling_grid(lo, hi, delta)?, true)?
        }
    };
    let windows = windows.into_iter().filter(|w| w.count > 0).collect();
    Ok(CoarseProfile { delta, side, s, windows })
}

/// Result of comparing rescaled IPR curves of several chain lengths.
#[derive(Clone, Debug, Serialize)]
pub struct CollapseReport {
    /// (abscissa, max |difference|, allowed band) per compared point.
    pub points: Vec<(f64, f64, f64)>,
    pub within_bands: bool,
}

/// Pairwise agreement of coarse curves at matched window centres, the
/// allowed deviation being the sum of the two std values.
pub fn collapse_check(curves: &[CoarseProfile], range: (f64, f64)) -> CollapseReport {
    let mut points = Vec::new();
    let mut ok = true;
    if let Some(first) = curves.first() {
        for w in first.windows.iter().filter(|w| w.x0 >= range.0 && w.x0 <= range.1) {
            let matched: Vec<&CoarseWindow<f64>> = curves
                .iter()
                .filter_map(|c| c.windows.iter().find(|v| (v.x0 - w.x0).abs() < 1e-9 && v.mean.is_some()))
                .collect();
            if matched.len() != curves.len() || w.mean.is_none() {
                continue;
            }
            // keep the pair that comes closest to (or furthest past) its band
            let (mut worst, mut band) = (0.0f64, f64::INFINITY);
            for (i, a) in matched.iter().enumerate() {
                for b in &matched[i + 1..] {
                    let d = (a.mean.unwrap_or(0.0) - b.mean.unwrap_or(0.0)).abs();
                    let allowed = a.std + b.std;
                    if d - allowed > worst - band {
                        (worst, band) = (d, allowed);
                    }
                }
            }
            ok &= worst <= band;
            points.push((w.x0, worst, band));
        }
    }
    CollapseReport { within_bands: ok && !points.is_empty(), points }
}

/// Constraints on the eigenvalue pairs entering |O^A(ω)|².
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapConstraints {
    /// |Re(λ_j + λ_k)/2 − X̄| ≤ re_frac·σ_X.
    pub re_frac: f64,
    /// |Im(λ_j + λ_k)/2| ≤ im_frac·σ_Y.
    pub im_frac: f64,
}

impl Default for OverlapConstraints {
    fn default() -> Self {
        Self { re_frac: 1.0 / 3.0, im_frac: 1.0 / 3.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OverlapPoint {
    pub omega: f64,
    pub pairs: usize,
    /// d_L·|O^A(ω)|², None when no pair qualifies.
    pub value: Option<f64>,
}

/// d_L/ñ_ω Σ''_{j≠k} |⟨r_j|A|r_k⟩|², with A the identity when `a` is None.
pub fn superop_overlap_profile(
    dec: &SpectralDecomposition,
    a: Option<&CMat>,
    omegas: &[f64],
    delta_omega: f64,
    constraints: OverlapConstraints,
) -> Result<Vec<OverlapPoint>> {
    if !(delta_omega > 0.0) {
        return Err(Error::Precondition("δω must be positive".into()));
    }
    if omegas.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Precondition("ω grid must be sorted".into()));
    }
    let d = dec.dim();
    let r = dec.right();
    let gram: CMat = match a {
        Some(a) => {
            if a.nrows() != d {
                return Err(Error::DimensionMismatch { expected: d, found: a.nrows() });
            }
            r.adjoint() * (a * r)
        }
        None => r.adjoint() * r,
    };
    let shape = shape_stats(dec.eigenvalues())?;
    let eig = dec.eigenvalues();
    let mut sums = vec![0.0; omegas.len()];
    let mut counts = vec![0usize; omegas.len()];
    let half = delta_omega / 2.0;
    for j in 0..d {
        for k in 0..d {
            if j == k {
                continue;
            }
            let mid = (eig[j] + eig[k]) * 0.5;
            if (mid.re - shape.x_bar).abs() > constraints.re_frac * shape.sigma_x || mid.im.abs() > constraints.im_frac * shape.sigma_y {
                continue;
            }
            let w = (eig[j] - eig[k]).norm();
            let v = gram[(j, k)].norm_sqr();
            let start = omegas.partition_point(|&o| o < w - half);
            for (g, &o) in omegas.iter().enumerate().skip(start) {
                if o > w + half {
                    break;
                }
                sums[g] += v;
                counts[g] += 1;
            }
        }
    }
    Ok(omegas
        .iter()
        .zip(sums.iter().zip(&counts))
        .map(|(&omega, (&s, &c))| OverlapPoint { omega, pairs: c, value: (c > 0).then(|| d as f64 * s / c as f64) })
        .collect())
}

/// Sizes of the slowest decaying eigenmode.
#[derive(Clone, Debug, Serialize)]
pub struct SlowMode {
    pub index: usize,
    pub lambda: C64,
    /// Σ s·p_s of l̂₁ and r̂₁.
    pub size_left: f64,
    pub size_right: f64,
    /// Sector carrying the most weight.
    pub dominant_left: usize,
    pub dominant_right: usize,
    pub p_left: Vec<f64>,
    pub p_right: Vec<f64>,
}

pub fn slow_mode_size(dec: &SpectralDecomposition) -> Result<SlowMode> {
    if dec.dim() < 2 {
        return Err(Error::InsufficientData("need at least two eigenvalues".into()));
    }
    let basis = pauli_basis_of(dec)?;
    let k = dec.slowest_index()?;
    let p_left = size_distribution(&basis, &dec.left_vec(k))?;
    let p_right = size_distribution(&basis, &dec.right_vec(k))?;
    let argmax = |p: &[f64]| (0..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b]).then(b.cmp(&a))).unwrap_or(0);
    Ok(SlowMode {
        index: k,
        lambda: dec.eigenvalues()[k],
        size_left: mean_size(&p_left),
        size_right: mean_size(&p_right),
        dominant_left: argmax(&p_left),
        dominant_right: argmax(&p_right),
        p_left,
        p_right,
    })
}

/// Largest p₀(r_j) over modes with |λ_j| > the steady-state tolerance.
pub fn max_trace_weight(profile: &SizeProfile) -> f64 {
    profile
        .eigenvalues
        .iter()
        .zip(&profile.right)
        .filter(|(z, _)| z.norm() > STEADY_TOL)
        .map(|(_, p)| p[0])
        .fold(0.0, f64::max)
}
