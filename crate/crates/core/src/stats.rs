//! Descriptive statistics and least-squares fits, generic over the float type.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

pub fn mean<T: Real>(xs: &[T]) -> T {
    if xs.is_empty() {
        return T::nan();
    }
    xs.iter().copied().sum::<T>() / T::from_usize_lossy(xs.len())
}

/// Population standard deviation (divides by n).
pub fn std<T: Real>(xs: &[T]) -> T {
    let m = mean(xs);
    let v = xs.iter().map(|&x| (x - m) * (x - m)).sum::<T>() / T::from_usize_lossy(xs.len());
    v.sqrt()
}

/// Population skewness E[(x − x̄)³]/σ³; zero for a constant sample.
pub fn skewness<T: Real>(xs: &[T]) -> T {
    let m = mean(xs);
    let s = std(xs);
    if s == T::zero() {
        return T::zero();
    }
    mean(&xs.iter().map(|&x| ((x - m) / s).powi(3)).collect::<Vec<_>>())
}

pub fn min_max<T: Real>(xs: &[T]) -> (T, T) {
    xs.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Ordinary least-squares line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit<T> {
    pub slope: T,
    pub intercept: T,
    pub r2: T,
    pub slope_stderr: T,
    pub intercept_stderr: T,
}

pub fn linear_fit<T: Real>(x: &[T], y: &[T]) -> Result<LinearFit<T>> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), found: y.len() });
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("line fit needs 2 points, got {n}")));
    }
    let (mx, my) = (mean(x), mean(y));
    let sxx = x.iter().map(|&a| (a - mx) * (a - mx)).sum::<T>();
    if sxx == T::zero() {
        return Err(Error::InsufficientData("all abscissae coincide".into()));
    }
    let sxy = x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)).sum::<T>();
    let syy = y.iter().map(|&b| (b - my) * (b - my)).sum::<T>();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse = x.iter().zip(y).map(|(&a, &b)| (b - intercept - slope * a).powi(2)).sum::<T>();
    let r2 = if syy == T::zero() { T::one() } else { T::one() - sse / syy };
    let (slope_stderr, intercept_stderr) = if n > 2 {
        let s2 = sse / T::from_usize_lossy(n - 2);
        let sumx2 = x.iter().map(|&a| a * a).sum::<T>();
        ((s2 / sxx).sqrt(), (s2 * sumx2 / (T::from_usize_lossy(n) * sxx)).sqrt())
    } else {
        (T::zero(), T::zero())
    };
    Ok(LinearFit { slope, intercept, r2, slope_stderr, intercept_stderr })
}

/// Fits |y| = c·x^b on log-log axes; `slope` is the exponent b.
pub fn power_law_fit<T: Real>(x: &[T], y: &[T]) -> Result<LinearFit<T>> {
    if x.iter().chain(y).any(|v| *v == T::zero() || !v.is_finite()) {
        return Err(Error::InsufficientData("power-law fit needs finite nonzero data".into()));
    }
    let lx: Vec<T> = x.iter().map(|v| v.abs().ln()).collect();
    let ly: Vec<T> = y.iter().map(|v| v.abs().ln()).collect();
    linear_fit(&lx, &ly)
}

/// Histogram normalized to unit integral over `[lo, hi]`; returns bin centres and densities.
pub fn density_histogram<T: Real>(xs: &[T], lo: T, hi: T, bins: usize) -> Result<(Vec<T>, Vec<T>)> {
    if bins < 2 {
        return Err(Error::Precondition(format!("need at least 2 bins, got {bins}")));
    }
    if !(hi > lo) {
        return Err(Error::Precondition("histogram range is empty".into()));
    }
    let width = (hi - lo) / T::from_usize_lossy(bins);
    let mut counts = vec![0usize; bins];
    let mut inside = 0usize;
    for &x in xs {
        if x < lo || x > hi || !x.is_finite() {
            continue;
        }
        let k = ((x - lo) / width).to_usize().unwrap_or(0).min(bins - 1);
        counts[k] += 1;
        inside += 1;
    }
    let centres = (0..bins).map(|k| lo + width * (T::from_usize_lossy(k) + T::lit(0.5))).collect();
    let norm = if inside == 0 { T::zero() } else { T::one() / (T::from_usize_lossy(inside) * width) };
    let dens = counts.iter().map(|&c| T::from_usize_lossy(c) * norm).collect();
    Ok((centres, dens))
}

/// Kolmogorov-Smirnov distance between a sample and a reference CDF.
pub fn ks_distance<T: Real>(sample: &[T], cdf: impl Fn(T) -> T) -> T {
    let mut xs: Vec<T> = sample.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = T::from_usize_lossy(xs.len());
    xs.iter().enumerate().fold(T::zero(), |d, (i, &x)| {
        let f = cdf(x);
        let lo = T::from_usize_lossy(i) / n;
        let hi = T::from_usize_lossy(i + 1) / n;
        d.max((f - lo).abs()).max((hi - f).abs())
    })
}

/// Mean of complex values.
pub fn complex_mean<T: Real>(zs: &[Complex<T>]) -> Complex<T> {
    let n = T::from_usize_lossy(zs.len());
    let s = zs.iter().fold(Complex::new(T::zero(), T::zero()), |a, &b| a + b);
    Complex::new(s.re / n, s.im / n)
}
