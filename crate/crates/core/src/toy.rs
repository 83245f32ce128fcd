//! Non-interacting chain: closed-form eigenoperator size distributions, the
//! composed many-body spectrum, and the numeric harnesses that test both.
//!
//! A single site carries four modes. Mode 0 is the steady state
//! r⁰ = (φI + β·S)/√2 with left partner I/√2; modes 1..3 have traceless right
//! operators η·S/√2 and left operators (f I + g·S)/√2.

use serde::Serialize;

use crate::eigenops::{eigen_size_profile, Side};
use crate::error::{Error, Result};
use crate::fixtures::RandomRealization;
use crate::linalg::{C64, ZERO};
use crate::models::build_random_local_general;
use crate::pauli::{PauliBasis, PauliString};
use crate::scalar::Real;
use crate::spectral::{decompose, match_multisets, SpectralDecomposition, STEADY_TOL};
use crate::stats;
use crate::superop::{assemble_default, assemble_in_basis, SuperOperator};

/// Largest chain for which the 4^N composed spectrum is built.
pub const COMPOSE_MAX_SITES: usize = 6;

/// Eigen-data of a one-site Lindbladian in the normalized Pauli basis {I, X, Y, Z}/√2.
#[derive(Clone, Debug, Serialize)]
pub struct SingleSiteSolution {
    /// λ⁰ = 0 followed by the three decaying modes.
    pub lambdas: [C64; 4],
    pub p_ss: f64,
    /// Identity coefficient of r⁰, made real and positive.
    pub phi: f64,
    pub beta: [f64; 3],
    pub eta: [[C64; 3]; 3],
    pub f: [C64; 3],
    pub g: [[C64; 3]; 3],
    /// β̂·g/|g| per decaying mode (0 when β = 0).
    pub mu: [C64; 3],
}

impl SingleSiteSolution {
    pub fn beta_norm(&self) -> f64 {
        self.beta.iter().map(|b| b * b).sum::<f64>().sqrt()
    }

    /// |f_k|² predicted from μ_k and p_ss.
    pub fn f_sq_from_mu(&self, k: usize) -> f64 {
        f_sq(self.mu[k].norm(), self.p_ss)
    }

    /// Identity weight of a left eigenoperator as extracted from the numerics.
    pub fn f_sq(&self, k: usize) -> f64 {
        self.f[k].norm_sqr()
    }
}

/// |f|² = |μ|²(2p−1)/(1 + |μ|²(2p−1)).
pub fn f_sq<T: Real>(mu_abs: T, p_ss: T) -> T {
    let x = mu_abs * mu_abs * (T::lit(2.0) * p_ss - T::one());
    x / (T::one() + x)
}

fn single_site_coords(basis: &PauliBasis, v: &[C64]) -> [C64; 4] {
    let mut out = [ZERO; 4];
    for (op, slot) in out.iter_mut().enumerate() {
        let (idx, w) = basis.locate(PauliString::single(1, 0, op as u8)).expect("one-site basis holds every string");
        // coordinate of the normalized string P/√2
        *slot = v[idx] * (w * std::f64::consts::SQRT_2);
    }
    out
}

/// Rotates `v` so that its largest entry is real and positive, then normalizes.
fn fix_phase(v: &mut [C64]) {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let pivot = v.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap_or(ZERO);
    if norm == 0.0 || pivot == ZERO {
        return;
    }
    let rot = pivot.conj() / (pivot.norm() * norm);
    v.iter_mut().for_each(|z| *z *= rot);
}

/// Extracts the single-site parameters from a one-site Lindbladian in a Pauli basis.
pub fn solve_single_site(l: &SuperOperator) -> Result<SingleSiteSolution> {
    let basis = l
        .basis()
        .pauli()
        .filter(|b| b.n() == 1 && b.dim() == 4)
        .cloned()
        .ok_or_else(|| Error::Precondition("single-site solution needs a one-site Pauli-basis Lindbladian".into()))?;
    let dec = decompose(l)?;
    let k0 = dec.steady_index()?;
    let mut r0 = single_site_coords(&basis, &dec.right_vec(k0));
    let norm = r0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if r0[0].norm() <= 1e-12 * norm {
        return Err(Error::Precondition("steady state is traceless".into()));
    }
    let rot = r0[0].conj() / (r0[0].norm() * norm);
    r0.iter_mut().for_each(|z| *z *= rot);
    let phi = r0[0].re;
    let beta = [r0[1].re, r0[2].re, r0[3].re];
    let beta_norm = beta.iter().map(|b| b * b).sum::<f64>().sqrt();

    let others: Vec<usize> = (0..4).filter(|&k| k != k0).collect();
    let mut lambdas = [ZERO; 4];
    lambdas[0] = dec.eigenvalues()[k0];
    let (mut eta, mut f, mut g, mut mu) = ([[ZERO; 3]; 3], [ZERO; 3], [[ZERO; 3]; 3], [ZERO; 3]);
    for (slot, &k) in others.iter().enumerate() {
        lambdas[slot + 1] = dec.eigenvalues()[k];
        let mut r = single_site_coords(&basis, &dec.right_vec(k));
        fix_phase(&mut r);
        eta[slot] = [r[1], r[2], r[3]];
        let mut lv = single_site_coords(&basis, &dec.left_vec(k));
        fix_phase(&mut lv);
        f[slot] = lv[0];
        g[slot] = [lv[1], lv[2], lv[3]];
        let g_norm = g[slot].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if beta_norm > 1e-12 && g_norm > 0.0 {
            mu[slot] = (0..3).map(|a| g[slot][a] * beta[a]).sum::<C64>() / (beta_norm * g_norm);
        }
    }
    Ok(SingleSiteSolution { lambdas, p_ss: 1.0 / (2.0 * phi * phi), phi, beta, eta, f, g, mu })
}

fn binomial<T: Real>(n: usize, k: usize) -> T {
    if k > n {
        return T::zero();
    }
    (0..k).fold(T::one(), |acc, i| acc * T::from_usize_lossy(n - i) / T::from_usize_lossy(i + 1))
}

/// Size-s weight of a right eigenoperator with M excitations on N sites.
pub fn ni_right_ps<T: Real>(n: usize, m: usize, s: usize, p_ss: T) -> T {
    if s < m || s > n || m > n {
        return T::zero();
    }
    let two_p = T::lit(2.0) * p_ss;
    binomial::<T>(n - m, s - m) * (two_p - T::one()).powi((s - m) as i32) / two_p.powi((n - m) as i32)
}

/// Size-s weight of a left eigenoperator with M excitations sharing one μ.
pub fn ni_left_ps<T: Real>(m: usize, s: usize, p_ss: T, mu: T) -> T {
    if s > m {
        return T::zero();
    }
    let x = mu * mu * (T::lit(2.0) * p_ss - T::one());
    binomial::<T>(m, s) * x.powi((m - s) as i32) / (T::one() + x).powi(m as i32)
}

/// Left size distribution over s = 0..=M when each excited site has its own μ_k:
/// site k stays identity with probability |f_k|².
pub fn ni_left_ps_modes<T: Real>(mus: &[T], p_ss: T) -> Vec<T> {
    let mut dist = vec![T::zero(); mus.len() + 1];
    dist[0] = T::one();
    for (done, &mu) in mus.iter().enumerate() {
        let stay = f_sq(mu, p_ss);
        for s in (0..=done + 1).rev() {
            let grow = if s > 0 { dist[s - 1] * (T::one() - stay) } else { T::zero() };
            dist[s] = dist[s] * stay + grow;
        }
    }
    dist
}

/// Number of many-body modes with M excitations when all local rates coincide.
pub fn idealized_multiplicity(n: usize, m: usize) -> usize {
    if m > n {
        return 0;
    }
    3usize.pow(m as u32) * binomial::<f64>(n, m).round() as usize
}

/// One product eigenmode: site i sits in local mode `config[i]`.
#[derive(Clone, Debug, Serialize)]
pub struct ComposedMode {
    pub lambda: C64,
    pub config: Vec<u8>,
    pub excitations: usize,
}

/// All 4^N sums Σ_i λ^{(k_i)} for identical sites.
pub fn compose_ni_spectrum(single: &SingleSiteSolution, n: usize) -> Result<Vec<ComposedMode>> {
    compose_weighted(single, &vec![1.0; n])
}

/// As [`compose_ni_spectrum`] with site i's Lindbladian scaled by `weights[i]`.
pub fn compose_weighted(single: &SingleSiteSolution, weights: &[f64]) -> Result<Vec<ComposedMode>> {
    let n = weights.len();
    if n == 0 || n > COMPOSE_MAX_SITES {
        return Err(Error::ResourceGuard { what: "composed spectrum", n, max: COMPOSE_MAX_SITES });
    }
    Ok((0..1usize << (2 * n))
        .map(|code| {
            let config: Vec<u8> = (0..n).map(|i| ((code >> (2 * (n - 1 - i))) & 3) as u8).collect();
            let lambda = config.iter().zip(weights).map(|(&k, &w)| single.lambdas[k as usize] * w).sum();
            let excitations = config.iter().filter(|&&k| k != 0).count();
            ComposedMode { lambda, config, excitations }
        })
        .collect())
}

/// Pairs every numeric eigenvalue with a composed mode; fails when the
/// matched separation exceeds `tol`.
pub fn label_modes(numeric: &[C64], composed: &[ComposedMode], tol: f64) -> Result<(Vec<usize>, f64)> {
    let predicted: Vec<C64> = composed.iter().map(|c| c.lambda).collect();
    let (labels, worst) = match_multisets(numeric, &predicted)
        .ok_or(Error::DimensionMismatch { expected: predicted.len(), found: numeric.len() })?;
    if worst > tol {
        return Err(Error::Precondition(format!("numeric spectrum differs from the composition by {worst:.3e}")));
    }
    Ok((labels, worst))
}

/// Default site weights: distinct and non-palindromic, so that every product
/// mode is non-degenerate.
pub fn default_site_weights(n: usize) -> Vec<f64> {
    (0..n).map(|k| 1.0 + 0.237 * k as f64 + 0.041 * (k * k) as f64).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct ToyRow {
    pub mode: usize,
    pub lambda: C64,
    pub excitations: usize,
    pub side: Side,
    pub s: usize,
    pub numeric: f64,
    /// Closed form with the per-mode μ_k.
    pub analytic: f64,
    /// Closed form with every μ set to 1.
    pub mu_one: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ToyComparison {
    pub n: usize,
    pub weights: Vec<f64>,
    pub single: SingleSiteSolution,
    pub spectrum_distance: f64,
    pub max_right_deviation: f64,
    pub max_left_deviation: f64,
    pub rows: Vec<ToyRow>,
}

/// Builds the decoupled chain with site-weighted local terms, diagonalizes it
/// and compares every eigenoperator's size profile with the closed forms.
pub fn toy_profile_check(r: &RandomRealization, j: f64, gamma1: f64, weights: &[f64]) -> Result<ToyComparison> {
    let n = weights.len();
    let one = build_random_local_general(1, j, 0.0, gamma1, 0.0, r, None)?;
    let single = solve_single_site(&assemble_in_basis(&one, PauliBasis::full(1)?)?)?;
    let chain = build_random_local_general(n, j, 0.0, gamma1, 0.0, r, Some(weights))?;
    let dec = decompose(&assemble_default(&chain)?)?;
    compare_with_numerics(&single, weights, &dec, gamma1)
}

/// Compares a decomposition of the decoupled chain with the closed forms.
pub fn compare_with_numerics(
    single: &SingleSiteSolution,
    weights: &[f64],
    dec: &SpectralDecomposition,
    gamma1: f64,
) -> Result<ToyComparison> {
    let n = weights.len();
    let composed = compose_weighted(single, weights)?;
    let (labels, spectrum_distance) = label_modes(dec.eigenvalues(), &composed, 1e-6 * gamma1.max(STEADY_TOL))?;
    let profile = eigen_size_profile(dec)?;
    let mu_abs: Vec<f64> = single.mu.iter().map(|m| m.norm()).collect();
    let mut rows = Vec::new();
    let (mut max_right, mut max_left) = (0.0f64, 0.0f64);
    for (mode, &label) in labels.iter().enumerate() {
        let c = &composed[label];
        let m = c.excitations;
        let mus: Vec<f64> = c.config.iter().filter(|&&k| k != 0).map(|&k| mu_abs[k as usize - 1]).collect();
        let left = ni_left_ps_modes(&mus, single.p_ss);
        for s in 0..=n {
            let right = ni_right_ps(n, m, s, single.p_ss);
            let numeric_r = profile.right[mode][s];
            max_right = max_right.max((numeric_r - right).abs());
            rows.push(ToyRow {
                mode,
                lambda: dec.eigenvalues()[mode],
                excitations: m,
                side: Side::Right,
                s,
                numeric: numeric_r,
                analytic: right,
                mu_one: right,
            });
            let analytic_l = left.get(s).copied().unwrap_or(0.0);
            let numeric_l = profile.left[mode][s];
            max_left = max_left.max((numeric_l - analytic_l).abs());
            rows.push(ToyRow {
                mode,
                lambda: dec.eigenvalues()[mode],
                excitations: m,
                side: Side::Left,
                s,
                numeric: numeric_l,
                analytic: analytic_l,
                mu_one: ni_left_ps(m, s, single.p_ss, 1.0),
            });
        }
    }
    Ok(ToyComparison {
        n,
        weights: weights.to_vec(),
        single: single.clone(),
        spectrum_distance,
        max_right_deviation: max_right,
        max_left_deviation: max_left,
        rows,
    })
}

/// Binned p̃^R_{s=1} against |λ|/γ₁ and the fitted exponential slope for one γ₂.
#[derive(Clone, Debug, Serialize)]
pub struct SuppressionFit {
    pub gamma2: f64,
    /// (bin centre in |λ|/γ₁, mean p_{s=1}, modes in bin).
    pub bins: Vec<(f64, f64, usize)>,
    pub slope: f64,
    pub slope_stderr: f64,
    pub intercept: f64,
    /// −ln(γ₁/γ₂).
    pub expected_slope: f64,
    /// |slope − expected| ≤ ½|expected|.
    pub within_half: bool,
}

/// Unit-width bins of |λ|/γ₁ starting at 1 with the mean right-side p_{s=1};
/// empty and zero-weight bins are dropped.
pub fn single_site_weight_bins(dec: &SpectralDecomposition, gamma1: f64) -> Result<Vec<(f64, f64, usize)>> {
    let profile = eigen_size_profile(dec)?;
    let mut acc: Vec<(f64, usize)> = Vec::new();
    for (l, p) in profile.eigenvalues.iter().zip(&profile.right) {
        let x = l.norm() / gamma1;
        if x < 0.5 {
            continue;
        }
        let k = (x - 0.5).floor() as usize;
        if acc.len() <= k {
            acc.resize(k + 1, (0.0, 0));
        }
        acc[k].0 += p[1];
        acc[k].1 += 1;
    }
    Ok(acc
        .into_iter()
        .enumerate()
        .filter(|(_, (sum, count))| *count > 0 && *sum > 0.0)
        .map(|(k, (sum, count))| ((k + 1) as f64, sum / count as f64, count))
        .collect())
}

/// Sweeps γ₂ for the chain with J₂ = 0 and fits ln p̃^R_{s=1} against |λ|/γ₁
/// over bins from `x_min` up.
pub fn perturbative_suppression_check(
    r: &RandomRealization,
    j: f64,
    gamma1: f64,
    gamma2s: &[f64],
    n: usize,
    x_min: f64,
) -> Result<Vec<SuppressionFit>> {
    gamma2s
        .iter()
        .map(|&gamma2| {
            if !(gamma2 > 0.0 && gamma2 / gamma1 <= 0.3) {
                return Err(Error::Precondition(format!("γ₂/γ₁ = {:.3} is outside (0, 0.3]", gamma2 / gamma1)));
            }
            let model = build_random_local_general(n, j, 0.0, gamma1, gamma2, r, None)?;
            let dec = decompose(&assemble_default(&model)?)?;
            let bins = single_site_weight_bins(&dec, gamma1)?;
            let used: Vec<&(f64, f64, usize)> = bins.iter().filter(|b| b.0 >= x_min).collect();
            if used.len() < 3 {
                return Err(Error::InsufficientData(format!("{} bulk bins with nonzero weight", used.len())));
            }
            let x: Vec<f64> = used.iter().map(|b| b.0).collect();
            let y: Vec<f64> = used.iter().map(|b| b.1.ln()).collect();
            let fit = stats::linear_fit(&x, &y)?;
            let expected_slope = -(gamma1 / gamma2).ln();
            Ok(SuppressionFit {
                gamma2,
                bins,
                slope: fit.slope,
                slope_stderr: fit.slope_stderr,
                intercept: fit.intercept,
                expected_slope,
                within_half: (fit.slope - expected_slope).abs() <= 0.5 * expected_slope.abs(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::RealizationTable;
    use crate::models::{Channel, ModelInstance};
    use crate::pauli::PauliSum;
    use proptest::prelude::*;

    fn one_site(h: Vec<(u8, f64)>, jumps: Vec<Vec<(u8, C64)>>) -> SuperOperator {
        let s = |op: u8| PauliString::single(1, 0, op);
        let ham = PauliSum { terms: h.into_iter().map(|(op, v)| (s(op), C64::new(v, 0.0))).collect() };
        let jumps = jumps
            .into_iter()
            .enumerate()
            .map(|(a, t)| (format!("j{a}"), Channel::SingleSite, PauliSum { terms: t.into_iter().map(|(op, v)| (s(op), v)).collect() }))
            .collect();
        let m = ModelInstance::from_terms(1, ham, jumps).unwrap();
        assemble_in_basis(&m, PauliBasis::full(1).unwrap()).unwrap()
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn damping_has_pure_steady_state() {
        let g = 0.7f64.sqrt() / 2.0;
        let sol = solve_single_site(&one_site(vec![], vec![vec![(1, c(g, 0.0)), (2, c(0.0, g))]])).unwrap();
        assert!((sol.p_ss - 1.0).abs() < 1e-10);
        assert!((sol.phi.powi(2) + sol.beta_norm().powi(2) - 1.0).abs() < 1e-12);
        for k in 0..3 {
            let eta: f64 = sol.eta[k].iter().map(|z| z.norm_sqr()).sum();
            let fg: f64 = sol.f[k].norm_sqr() + sol.g[k].iter().map(|z| z.norm_sqr()).sum::<f64>();
            assert!((eta - 1.0).abs() < 1e-10 && (fg - 1.0).abs() < 1e-10);
            assert!((sol.f_sq(k) - sol.f_sq_from_mu(k)).abs() < 1e-10);
        }
    }

    #[test]
    fn dephasing_only_is_degenerate() {
        let s = one_site(vec![], vec![vec![(3, c(0.5, 0.0))]]);
        assert!(matches!(solve_single_site(&s), Err(Error::DegenerateSteadyState(2))));
    }

    #[test]
    fn hermitian_jumps_give_maximally_mixed_state() {
        let s = one_site(vec![(1, 0.4), (3, -0.9)], vec![vec![(1, c(0.3, 0.0)), (3, c(0.2, 0.0))], vec![(2, c(0.5, 0.0))]]);
        let sol = solve_single_site(&s).unwrap();
        assert!((sol.p_ss - 0.5).abs() < 1e-10);
        assert!(sol.mu.iter().all(|m| *m == ZERO));
        assert!(sol.f.iter().all(|f| f.norm() < 1e-10));
    }

    #[test]
    fn random_site_satisfies_biorthogonality_relation() {
        let table = RealizationTable::builtin();
        for seed in [1, 2, 3, 4] {
            let r = table.get(seed).unwrap();
            let one = build_random_local_general(1, 1.0, 0.0, 0.25, 0.0, r, None).unwrap();
            let sol = solve_single_site(&assemble_in_basis(&one, PauliBasis::full(1).unwrap()).unwrap()).unwrap();
            assert!(sol.p_ss >= 0.5 - 1e-12 && sol.p_ss <= 1.0 + 1e-12);
            for k in 0..3 {
                assert!(sol.mu[k].norm() <= 1.0 + 1e-12);
                assert!((sol.f_sq(k) - sol.f_sq_from_mu(k)).abs() < 1e-9, "seed {seed} mode {k}");
                assert!(sol.f_sq(k) <= 1.0 - 1.0 / (2.0 * sol.p_ss) + 1e-9);
            }
        }
    }

    #[test]
    fn closed_forms_at_half_purity_are_deltas() {
        for n in 1..6 {
            for m in 0..=n {
                for s in 0..=n {
                    let d = if s == m { 1.0 } else { 0.0 };
                    assert_eq!(ni_right_ps(n, m, s, 0.5), d);
                    assert_eq!(ni_left_ps(m, s, 0.5f64, 0.7), d);
                }
            }
        }
    }

    #[test]
    fn pure_steady_state_spreads_binomially() {
        for s in 0..=4 {
            assert!((ni_right_ps(4, 0, s, 1.0) - binomial::<f64>(4, s) / 16.0).abs() < 1e-15);
        }
        // μ = 0 puts all left weight on s = M
        assert_eq!(ni_left_ps(3, 3, 0.9, 0.0), 1.0);
        assert_eq!(ni_left_ps(3, 2, 0.9, 0.0), 0.0);
    }

    #[test]
    fn idealized_counts() {
        assert_eq!(idealized_multiplicity(4, 0), 1);
        assert_eq!(idealized_multiplicity(4, 2), 54);
        assert_eq!((0..=5).map(|m| idealized_multiplicity(5, m)).sum::<usize>(), 1024);
    }

    #[test]
    fn composition_has_single_zero() {
        let g = 0.5f64.sqrt() / 2.0;
        let sol = solve_single_site(&one_site(vec![(3, 0.3)], vec![vec![(1, c(g, 0.0)), (2, c(0.0, g))]])).unwrap();
        let modes = compose_ni_spectrum(&sol, 3).unwrap();
        assert_eq!(modes.len(), 64);
        assert_eq!(modes.iter().filter(|m| m.lambda.norm() < 1e-12).count(), 1);
        assert!(compose_ni_spectrum(&sol, 7).is_err());
    }

    #[test]
    fn damping_chain_matches_composition() {
        let g = 0.5f64.sqrt() / 2.0;
        let n = 3;
        let jumps = (0..n)
            .map(|k| {
                let t = PauliSum {
                    terms: vec![(PauliString::single(n, k, 1), c(g, 0.0)), (PauliString::single(n, k, 2), c(0.0, g))],
                };
                (format!("d{k}"), Channel::SingleSite, t)
            })
            .collect();
        let chain = ModelInstance::from_terms(n, PauliSum::default(), jumps).unwrap();
        let sol = solve_single_site(&one_site(vec![], vec![vec![(1, c(g, 0.0)), (2, c(0.0, g))]])).unwrap();
        let composed: Vec<C64> = compose_ni_spectrum(&sol, n).unwrap().iter().map(|m| m.lambda).collect();
        let full = decompose(&assemble_in_basis(&chain, PauliBasis::full(n).unwrap()).unwrap()).unwrap();
        assert!(crate::spectral::multiset_distance(full.eigenvalues(), &composed) < 1e-8);
    }

    #[test]
    fn weighted_chain_profiles_match_closed_forms() {
        let table = RealizationTable::builtin();
        let r = table.get(1).unwrap();
        let cmp = toy_profile_check(r, 1.0, 0.25, &default_site_weights(3)).unwrap();
        assert!(cmp.spectrum_distance < 1e-8, "{}", cmp.spectrum_distance);
        assert!(cmp.max_right_deviation < 1e-8, "{}", cmp.max_right_deviation);
        assert!(cmp.max_left_deviation < 1e-8, "{}", cmp.max_left_deviation);
    }

    #[test]
    fn hermitian_chain_profiles_are_deltas() {
        let mut r = RealizationTable::builtin().get(2).unwrap().clone();
        r.k = [c(0.8, 0.0), c(-0.3, 0.0), c(1.1, 0.0)];
        let cmp = toy_profile_check(&r, 1.0, 0.25, &default_site_weights(3)).unwrap();
        assert!((cmp.single.p_ss - 0.5).abs() < 1e-10);
        for row in &cmp.rows {
            let d = if row.s == row.excitations { 1.0 } else { 0.0 };
            assert_eq!(row.analytic, d);
            assert!((row.numeric - d).abs() < 1e-8);
        }
    }

    #[test]
    fn no_coupling_leaves_bulk_without_single_site_weight() {
        let r = RealizationTable::builtin().get(1).unwrap().clone();
        let model = build_random_local_general(4, 1.0, 0.0, 0.25, 0.0, &r, None).unwrap();
        let dec = decompose(&assemble_default(&model).unwrap()).unwrap();
        let sol = solve_single_site(&assemble_in_basis(&build_random_local_general(1, 1.0, 0.0, 0.25, 0.0, &r, None).unwrap(), PauliBasis::full(1).unwrap()).unwrap()).unwrap();
        // modes with two or more excitations carry no size-1 weight
        let slowest_two = 2.0 * sol.lambdas[1..].iter().map(|l| l.re.abs()).fold(f64::INFINITY, f64::min);
        let profile = eigen_size_profile(&dec).unwrap();
        let fastest_one = sol.lambdas[1..].iter().map(|l| l.re.abs()).fold(0.0, f64::max);
        for (l, p) in profile.eigenvalues.iter().zip(&profile.right) {
            if l.re.abs() > fastest_one.max(slowest_two) + 1e-9 {
                assert!(p[1] < 1e-12);
            }
        }
    }

    #[test]
    fn suppression_slope_is_negative_and_steepens() {
        let r = RealizationTable::builtin().get(1).unwrap().clone();
        let fits = perturbative_suppression_check(&r, 1.0, 1.0, &[0.3, 0.15, 0.075], 5, 1.0).unwrap();
        assert!(fits.iter().all(|f| f.slope < 0.0));
        assert!(fits.windows(2).all(|w| w[1].slope < w[0].slope));
        assert!(fits[0].within_half);
        assert!(perturbative_suppression_check(&r, 1.0, 1.0, &[0.5], 3, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn right_closed_form_is_a_distribution(n in 1usize..9, m_frac in 0.0f64..1.0, p in 0.5f64..=1.0) {
            let m = (m_frac * n as f64) as usize;
            let ps: Vec<f64> = (0..=n).map(|s| ni_right_ps(n, m, s, p)).collect();
            prop_assert!(ps.iter().all(|&x| x >= 0.0));
            prop_assert!((ps.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn left_closed_form_is_a_distribution(m in 0usize..9, p in 0.5f64..=1.0, mu in 0.0f64..=1.0) {
            let ps: Vec<f64> = (0..=m + 2).map(|s| ni_left_ps(m, s, p, mu)).collect();
            prop_assert!(ps.iter().all(|&x| x >= 0.0));
            prop_assert!((ps.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn per_mode_form_reduces_to_shared_mu(m in 0usize..7, p in 0.5f64..=1.0, mu in 0.0f64..=1.0) {
            let modes = ni_left_ps_modes(&vec![mu; m], p);
            for s in 0..=m {
                prop_assert!((modes[s] - ni_left_ps(m, s, p, mu)).abs() < 1e-12);
            }
        }

        #[test]
        fn closed_forms_work_in_single_precision(n in 1usize..7, p in 0.5f32..=1.0) {
            let total: f32 = (0..=n).map(|s| ni_right_ps(n, 1.min(n), s, p)).sum();
            prop_assert!((total - 1.0).abs() < 1e-5);
        }
    }
}
