//! Hamiltonians and jump operators of the spin-chain families.
//!
//! Sites are 0-based from the left. σ⁺ = (σx + iσy)/2 raises in the σz
//! basis, |↑⟩ (σz = +1) being computational state 0.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixtures::{RandomRealization, RealizationTable};
use crate::linalg::{self, CMat, C64, ZERO};
use crate::pauli::{dense_guard, PauliString, PauliSum};

/// Name of the generator used for every sampled quantity.
pub const PRNG_NAME: &str = "ChaCha8 (rand_chacha 0.9, seed_from_u64)";
/// Largest chain for the non-local model (its 4^N-term Pauli form is dense).
pub const NON_LOCAL_MAX_SITES: usize = 6;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn complex_normal(rng: &mut ChaCha8Rng) -> C64 {
    let re = normal(rng);
    C64::new(re, normal(rng))
}

impl RandomRealization {
    /// Draws Q, R (row-major), K, D (row-major) in that order.
    pub fn sample(seed: u64) -> Self {
        let mut g = rng(seed);
        let q = [normal(&mut g), normal(&mut g), normal(&mut g)];
        let mut r = [[0.0; 3]; 3];
        r.iter_mut().flatten().for_each(|x| *x = normal(&mut g));
        let k = [complex_normal(&mut g), complex_normal(&mut g), complex_normal(&mut g)];
        let mut d = [[ZERO; 3]; 3];
        d.iter_mut().flatten().for_each(|x| *x = complex_normal(&mut g));
        Self { q, r, k, d }
    }
}

/// Where the random-model coefficients come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "source", content = "value")]
pub enum RealizationSource {
    /// Tabulated entry (seeds 1, 2, 3, 4, 17, 20 ship built in).
    Fixture(u64),
    /// Drawn from the artifact PRNG.
    Sampled(u64),
    Explicit(RandomRealization),
}

impl RealizationSource {
    pub fn resolve(&self, table: &RealizationTable) -> Result<RandomRealization> {
        match self {
            RealizationSource::Fixture(seed) => table.get(*seed).cloned(),
            RealizationSource::Sampled(seed) => Ok(RandomRealization::sample(*seed)),
            RealizationSource::Explicit(r) => Ok(r.clone()),
        }
    }
}

/// Serializable description of a model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    DissipativeIsing { n: usize, j: f64, hx: f64, hz: f64, gamma: f64 },
    /// `j2` overrides the coupling strength of the two-site Hamiltonian (defaults to `j`).
    RandomLocal {
        n: usize,
        j: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        j2: Option<f64>,
        gamma1: f64,
        gamma2: f64,
        realization: RealizationSource,
    },
    NonInteracting { n: usize, j: f64, gamma1: f64, realization: RealizationSource },
    TwoSiteOnly { n: usize, gamma2: f64, realization: RealizationSource },
    NonLocalRandom { n: usize, seed: u64 },
}

impl ModelSpec {
    pub fn ising(n: usize, gamma: f64) -> Self {
        ModelSpec::DissipativeIsing { n, j: 1.0, hx: 1.3, hz: 1.2, gamma }
    }

    pub fn n(&self) -> usize {
        match self {
            ModelSpec::DissipativeIsing { n, .. }
            | ModelSpec::RandomLocal { n, .. }
            | ModelSpec::NonInteracting { n, .. }
            | ModelSpec::TwoSiteOnly { n, .. }
            | ModelSpec::NonLocalRandom { n, .. } => *n,
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            ModelSpec::DissipativeIsing { .. } => "dissipative-ising",
            ModelSpec::RandomLocal { .. } => "random-local",
            ModelSpec::NonInteracting { .. } => "non-interacting",
            ModelSpec::TwoSiteOnly { .. } => "two-site-only",
            ModelSpec::NonLocalRandom { .. } => "non-local-random",
        }
    }

    /// Whether the model commutes with the midpoint reflection.
    pub fn reflection_symmetric(&self) -> bool {
        !matches!(self, ModelSpec::NonLocalRandom { .. })
    }

    pub fn with_n(&self, new_n: usize) -> Self {
        let mut s = self.clone();
        match &mut s {
            ModelSpec::DissipativeIsing { n, .. }
            | ModelSpec::RandomLocal { n, .. }
            | ModelSpec::NonInteracting { n, .. }
            | ModelSpec::TwoSiteOnly { n, .. }
            | ModelSpec::NonLocalRandom { n, .. } => *n = new_n,
        }
        s
    }

    /// Parameter checks that do not need fixtures.
    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        let nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidModel(format!("{name} must be finite and non-negative, got {v}")))
            }
        };
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidModel(format!("{name} must be finite, got {v}")))
            }
        };
        if n == 0 {
            return Err(Error::InvalidModel("N must be at least 1".into()));
        }
        match self {
            ModelSpec::DissipativeIsing { j, hx, hz, gamma, .. } => {
                if n < 2 {
                    return Err(Error::InvalidModel("the Ising chain needs N >= 2".into()));
                }
                finite("J", *j)?;
                finite("h_x", *hx)?;
                finite("h_z", *hz)?;
                nonneg("gamma", *gamma)
            }
            ModelSpec::RandomLocal { j, j2, gamma1, gamma2, .. } => {
                finite("J", *j)?;
                finite("J2", j2.unwrap_or(*j))?;
                nonneg("gamma1", *gamma1)?;
                nonneg("gamma2", *gamma2)
            }
            ModelSpec::NonInteracting { j, gamma1, .. } => {
                finite("J", *j)?;
                nonneg("gamma1", *gamma1)
            }
            ModelSpec::TwoSiteOnly { gamma2, .. } => nonneg("gamma2", *gamma2),
            ModelSpec::NonLocalRandom { .. } => {
                if n > NON_LOCAL_MAX_SITES {
                    return Err(Error::ResourceGuard { what: "non-local model", n, max: NON_LOCAL_MAX_SITES });
                }
                Ok(())
            }
        }
    }

    pub fn build(&self, table: &RealizationTable) -> Result<ModelInstance> {
        self.validate()?;
        let mut m = match self {
            ModelSpec::DissipativeIsing { n, j, hx, hz, gamma } => build_ising(*n, *j, *hx, *hz, *gamma),
            ModelSpec::RandomLocal { n, j, j2, gamma1, gamma2, realization } => {
                let r = realization.resolve(table)?;
                build_random_local_general(*n, *j, j2.unwrap_or(*j), *gamma1, *gamma2, &r, None)
            }
            ModelSpec::NonInteracting { n, j, gamma1, realization } => {
                build_non_interacting(*n, *j, *gamma1, &realization.resolve(table)?)
            }
            ModelSpec::TwoSiteOnly { n, gamma2, realization } => {
                build_random_local_general(*n, 0.0, 0.0, 0.0, *gamma2, &realization.resolve(table)?, None)
            }
            ModelSpec::NonLocalRandom { n, seed } => build_non_local(*n, *seed),
        }?;
        m.spec = Some(self.clone());
        Ok(m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Channel {
    SingleSite,
    TwoSite,
    NonLocal,
}

#[derive(Clone, Debug)]
pub struct Jump {
    pub label: String,
    pub channel: Channel,
    pub matrix: CMat,
    /// Pauli expansion when the operator is local.
    pub terms: Option<PauliSum>,
}

/// Dense Hamiltonian and jump operators of an N-site chain.
#[derive(Clone, Debug)]
pub struct ModelInstance {
    pub n: usize,
    pub hamiltonian: CMat,
    pub hamiltonian_terms: Option<PauliSum>,
    pub jumps: Vec<Jump>,
    pub spec: Option<ModelSpec>,
}

impl ModelInstance {
    /// Builds a model from Pauli expansions.
    pub fn from_terms(n: usize, hamiltonian: PauliSum, jumps: Vec<(String, Channel, PauliSum)>) -> Result<Self> {
        dense_guard(n)?;
        let h = hamiltonian.to_dense(n)?;
        let jumps = jumps
            .into_iter()
            .map(|(label, channel, terms)| {
                Ok(Jump { label, channel, matrix: terms.to_dense(n)?, terms: Some(terms) })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n, hamiltonian: h, hamiltonian_terms: Some(hamiltonian), jumps, spec: None })
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    /// Keeps only the jumps for which `keep` holds.
    pub fn filter_jumps(&self, keep: impl Fn(&Jump) -> bool) -> Self {
        let mut m = self.clone();
        m.jumps.retain(keep);
        m
    }

    pub fn without_hamiltonian(&self) -> Self {
        let mut m = self.clone();
        m.hamiltonian = CMat::zeros(self.dim(), self.dim());
        m.hamiltonian_terms = Some(PauliSum::default());
        m
    }

    /// Pauli expansion of H, computing it from the dense form if needed.
    pub fn hamiltonian_pauli(&self) -> Result<PauliSum> {
        match &self.hamiltonian_terms {
            Some(t) => Ok(t.clone()),
            None => PauliSum::from_dense(&self.hamiltonian, self.n, 1e-15),
        }
    }

    pub fn jump_pauli(&self, a: usize) -> Result<PauliSum> {
        match &self.jumps[a].terms {
            Some(t) => Ok(t.clone()),
            None => PauliSum::from_dense(&self.jumps[a].matrix, self.n, 1e-15),
        }
    }

    pub fn hermiticity_residual(&self) -> f64 {
        linalg::hermiticity_residual(&self.hamiltonian)
    }

    /// Largest deviation of H and of the jump multiset from their reflected images.
    pub fn reflection_residual(&self) -> f64 {
        let r = reflection_matrix(self.n);
        let conj = |m: &CMat| &(&r * m) * &r;
        let mut worst = linalg::max_abs_diff(&conj(&self.hamiltonian), &self.hamiltonian);
        let mut used = vec![false; self.jumps.len()];
        for jump in &self.jumps {
            let image = conj(&jump.matrix);
            let best = self
                .jumps
                .iter()
                .enumerate()
                .filter(|(k, _)| !used[*k])
                .map(|(k, other)| (k, linalg::max_abs_diff(&image, &other.matrix)))
                .min_by(|a, b| a.1.total_cmp(&b.1));
            match best {
                Some((k, d)) => {
                    used[k] = true;
                    worst = worst.max(d);
                }
                None => return f64::INFINITY,
            }
        }
        worst
    }
}

/// Permutation matrix reversing the site order of computational states.
pub fn reflection_matrix(n: usize) -> CMat {
    let d = 1usize << n;
    let rev = |b: usize| (0..n).fold(0usize, |acc, k| acc | (((b >> k) & 1) << (n - 1 - k)));
    CMat::from_fn(d, d, |i, j| if i == rev(j) { linalg::ONE } else { ZERO })
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn single(n: usize, site: usize, op: u8) -> PauliString {
    PauliString::single(n, site, op)
}

fn pair(n: usize, a: usize, op_a: u8, b: usize, op_b: u8) -> PauliString {
    let mut codes = vec![0u8; n];
    codes[a] = op_a;
    codes[b] = op_b;
    PauliString::from_codes(&codes)
}

fn sum(terms: Vec<(PauliString, C64)>) -> PauliSum {
    let mut acc: std::collections::BTreeMap<PauliString, C64> = Default::default();
    for (s, v) in terms {
        *acc.entry(s).or_insert(ZERO) += v;
    }
    PauliSum { terms: acc.into_iter().filter(|(_, v)| *v != ZERO).collect() }
}

/// Dissipative Ising chain with damping, dephasing and two kinds of pair jumps.
pub fn build_ising(n: usize, j: f64, hx: f64, hz: f64, gamma: f64) -> Result<ModelInstance> {
    ModelSpec::DissipativeIsing { n, j, hx, hz, gamma }.validate()?;
    let mut h = Vec::new();
    for k in 0..n {
        h.push((single(n, k, 1), c(-hx)));
        h.push((single(n, k, 3), c(-hz)));
    }
    for k in 0..n - 1 {
        h.push((pair(n, k, 3, k + 1, 3), c(-j)));
    }
    let g = gamma.sqrt();
    let mut jumps = Vec::new();
    for k in 0..n {
        jumps.push((
            format!("damping[{k}]"),
            Channel::SingleSite,
            sum(vec![(single(n, k, 1), c(g / 2.0)), (single(n, k, 2), C64::new(0.0, g / 2.0))]),
        ));
    }
    for k in 0..n {
        jumps.push((format!("dephasing[{k}]"), Channel::SingleSite, sum(vec![(single(n, k, 3), c(g / 2.0))])));
    }
    let x_pair = |a: usize, b: usize| {
        sum(vec![
            (PauliString::identity(n), c(g / 4.0)),
            (single(n, a, 1), c(g / 4.0)),
            (single(n, b, 1), c(g / 4.0)),
            (pair(n, a, 1, b, 1), c(g / 4.0)),
        ])
    };
    for k in 0..n.saturating_sub(1) {
        jumps.push((format!("nn[{k}]"), Channel::TwoSite, x_pair(k, k + 1)));
    }
    for k in 0..n.saturating_sub(2) {
        jumps.push((format!("nnn[{k}]"), Channel::TwoSite, x_pair(k, k + 2)));
    }
    ModelInstance::from_terms(n, sum(h), jumps)
}

/// Random local model: uniform field Q, couplings R+Rᵀ, single-site jumps K
/// and two-site jumps D+Dᵀ repeated along the chain.
pub fn build_random_local(n: usize, j: f64, gamma1: f64, gamma2: f64, r: &RandomRealization) -> Result<ModelInstance> {
    build_random_local_general(n, j, j, gamma1, gamma2, r, None)
}

/// As [`build_random_local`] with separate field (`j1`) and coupling (`j2`)
/// strengths; `site_weights` rescales every single-site term on site k.
pub fn build_random_local_general(
    n: usize,
    j1: f64,
    j2: f64,
    gamma1: f64,
    gamma2: f64,
    r: &RandomRealization,
    site_weights: Option<&[f64]>,
) -> Result<ModelInstance> {
    ModelSpec::RandomLocal { n, j: j1, j2: Some(j2), gamma1, gamma2, realization: RealizationSource::Explicit(r.clone()) }
        .validate()?;
    if let Some(w) = site_weights {
        if w.len() != n || w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidModel("site weights must be N non-negative numbers".into()));
        }
    }
    let weight = |k: usize| site_weights.map_or(1.0, |w| w[k]);
    let mut h = Vec::new();
    for k in 0..n {
        for a in 0..3 {
            h.push((single(n, k, a as u8 + 1), c(weight(k) * j1 / 3.0 * r.q[a])));
        }
    }
    for k in 0..n.saturating_sub(1) {
        for a in 0..3 {
            for b in 0..3 {
                let v = j2 / 9.0 * (r.r[a][b] + r.r[b][a]);
                h.push((pair(n, k, a as u8 + 1, k + 1, b as u8 + 1), c(v)));
            }
        }
    }
    let mut jumps = Vec::new();
    if gamma1 > 0.0 {
        for k in 0..n {
            let s = (weight(k) * gamma1 / 3.0).sqrt();
            let t = (0..3).map(|a| (single(n, k, a as u8 + 1), r.k[a] * s)).collect();
            jumps.push((format!("single[{k}]"), Channel::SingleSite, sum(t)));
        }
    }
    if gamma2 > 0.0 {
        let s = 0.5 * (gamma2 / 9.0).sqrt();
        for k in 0..n.saturating_sub(1) {
            let mut t = Vec::new();
            for a in 0..3 {
                for b in 0..3 {
                    t.push((pair(n, k, a as u8 + 1, k + 1, b as u8 + 1), (r.d[a][b] + r.d[b][a]) * s));
                }
            }
            jumps.push((format!("two-site[{k}]"), Channel::TwoSite, sum(t)));
        }
    }
    ModelInstance::from_terms(n, sum(h), jumps)
}

/// Decoupled sites: field and single-site jumps only.
pub fn build_non_interacting(n: usize, j: f64, gamma1: f64, r: &RandomRealization) -> Result<ModelInstance> {
    build_random_local_general(n, j, 0.0, gamma1, 0.0, r, None)
}

/// Two-site jumps only (no Hamiltonian, no single-site dissipation).
pub fn build_two_site_only(n: usize, gamma2: f64, r: &RandomRealization) -> Result<ModelInstance> {
    build_random_local_general(n, 0.0, 0.0, 0.0, gamma2, r, None)
}

/// All-to-all random model: H = N/(4·2^{N/2})(A + A†), N copies of B/√(2·2^N).
pub fn build_non_local(n: usize, seed: u64) -> Result<ModelInstance> {
    ModelSpec::NonLocalRandom { n, seed }.validate()?;
    let d = 1usize << n;
    let mut g = rng(seed);
    let a = CMat::from_fn(d, d, |_, _| complex_normal(&mut g));
    let b = CMat::from_fn(d, d, |_, _| complex_normal(&mut g));
    let hs = n as f64 / (4.0 * (d as f64).sqrt());
    let h = CMat::from_fn(d, d, |i, k| (a[(i, k)] + a[(k, i)].conj()) * hs);
    let bs = (2.0 * d as f64).sqrt().recip();
    let jump = linalg::scale(&b, c(bs));
    let jumps = (0..n)
        .map(|k| Jump { label: format!("nonlocal[{k}]"), channel: Channel::NonLocal, matrix: jump.clone(), terms: None })
        .collect();
    Ok(ModelInstance { n, hamiltonian: h, hamiltonian_terms: None, jumps, spec: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, kron, max_abs_diff};
    use faer::Mat;

    // Independent construction through explicit Kronecker products.
    fn sx() -> CMat {
        Mat::from_fn(2, 2, |i, j| if i != j { c(1.0) } else { ZERO })
    }
    fn sy() -> CMat {
        let mut m = CMat::zeros(2, 2);
        m[(0, 1)] = C64::new(0.0, -1.0);
        m[(1, 0)] = C64::new(0.0, 1.0);
        m
    }
    fn sz() -> CMat {
        let mut m = CMat::zeros(2, 2);
        m[(0, 0)] = c(1.0);
        m[(1, 1)] = c(-1.0);
        m
    }
    fn embed(n: usize, ops: &[(usize, CMat)]) -> CMat {
        let mut out = identity(1);
        for k in 0..n {
            let f = ops.iter().find(|(s, _)| *s == k).map_or_else(|| identity(2), |(_, m)| m.clone());
            out = kron(&out, &f);
        }
        out
    }

    #[test]
    fn ising_matches_kronecker_oracle() {
        let (n, j, hx, hz, gamma) = (4, 1.0, 1.3, 1.2, 0.8);
        let m = build_ising(n, j, hx, hz, gamma).unwrap();
        let mut h = CMat::zeros(16, 16);
        for k in 0..n {
            h = linalg::sub(&h, &linalg::scale(&embed(n, &[(k, sx())]), c(hx)));
            h = linalg::sub(&h, &linalg::scale(&embed(n, &[(k, sz())]), c(hz)));
        }
        for k in 0..n - 1 {
            h = linalg::sub(&h, &linalg::scale(&embed(n, &[(k, sz()), (k + 1, sz())]), c(j)));
        }
        assert!(max_abs_diff(&h, &m.hamiltonian) < 1e-14);
        assert_eq!(m.jumps.len(), 13);
        let mut sp = CMat::zeros(2, 2);
        sp[(0, 1)] = c(1.0);
        let damp = linalg::scale(&embed(n, &[(2, sp)]), c(gamma.sqrt()));
        assert!(max_abs_diff(&damp, &m.jumps[2].matrix) < 1e-14);
        let ipx = linalg::add(&identity(2), &sx());
        let nnn = linalg::scale(&embed(n, &[(1, ipx.clone()), (3, ipx)]), c(gamma.sqrt() / 4.0));
        let idx = m.jumps.iter().position(|j| j.label == "nnn[1]").unwrap();
        assert!(max_abs_diff(&nnn, &m.jumps[idx].matrix) < 1e-14);
    }

    #[test]
    fn ising_diagonal_element() {
        let m = build_ising(2, 1.0, 1.3, 1.2, 0.0).unwrap();
        assert!((m.hamiltonian[(0, 0)] - c(-3.4)).norm() < 1e-14);
        assert!(m.jumps.iter().all(|j| linalg::max_abs(&j.matrix) == 0.0));
        assert!(build_ising(1, 1.0, 1.3, 1.2, 0.1).is_err());
        assert!(build_ising(3, 1.0, 1.3, 1.2, -0.1).is_err());
    }

    #[test]
    fn random_local_matches_kronecker_oracle() {
        let t = RealizationTable::builtin();
        let r = t.get(4).unwrap();
        let (n, j, g1, g2) = (3, 1.0, 0.3, 0.7);
        let m = build_random_local(n, j, g1, g2, r).unwrap();
        let paulis = [sx(), sy(), sz()];
        let mut h = CMat::zeros(8, 8);
        for k in 0..n {
            for a in 0..3 {
                h = linalg::add(&h, &linalg::scale(&embed(n, &[(k, paulis[a].clone())]), c(j / 3.0 * r.q[a])));
            }
        }
        for k in 0..n - 1 {
            for a in 0..3 {
                for b in 0..3 {
                    let v = j / 9.0 * (r.r[a][b] + r.r[b][a]);
                    let t = embed(n, &[(k, paulis[a].clone()), (k + 1, paulis[b].clone())]);
                    h = linalg::add(&h, &linalg::scale(&t, c(v)));
                }
            }
        }
        assert!(max_abs_diff(&h, &m.hamiltonian) < 1e-13);
        assert!(m.hermiticity_residual() < 1e-12);
        let mut l2 = CMat::zeros(8, 8);
        for a in 0..3 {
            for b in 0..3 {
                let t = embed(n, &[(1, paulis[a].clone()), (2, paulis[b].clone())]);
                l2 = linalg::add(&l2, &linalg::scale(&t, (r.d[a][b] + r.d[b][a]) * (0.5 * (g2 / 9.0f64).sqrt())));
            }
        }
        let idx = m.jumps.iter().position(|j| j.label == "two-site[1]").unwrap();
        assert!(max_abs_diff(&l2, &m.jumps[idx].matrix) < 1e-13);
        assert_eq!(m.jumps.len(), 3 + 2);
    }

    #[test]
    fn random_local_without_dissipation_has_no_jumps() {
        let r = RandomRealization::sample(3);
        let m = build_random_local(3, 1.0, 0.0, 0.0, &r).unwrap();
        assert!(m.jumps.is_empty());
        assert!(m.hermiticity_residual() < 1e-12);
    }

    #[test]
    fn bulk_translation_invariance() {
        let r = RealizationTable::builtin().get(1).unwrap().clone();
        let m = build_random_local(4, 1.0, 0.5, 0.5, &r).unwrap();
        let t0 = m.jumps.iter().find(|j| j.label == "two-site[0]").unwrap().terms.clone().unwrap();
        let t1 = m.jumps.iter().find(|j| j.label == "two-site[1]").unwrap().terms.clone().unwrap();
        // shift every string one site to the right
        let shifted: Vec<(u64, C64)> = t0.terms.iter().map(|(s, v)| (s.code() >> 2, *v)).collect();
        let target: Vec<(u64, C64)> = t1.terms.iter().map(|(s, v)| (s.code(), *v)).collect();
        let mut a = shifted.clone();
        let mut b = target.clone();
        a.sort_by_key(|x| x.0);
        b.sort_by_key(|x| x.0);
        assert_eq!(a, b);
    }

    #[test]
    fn weak_reflection_symmetry() {
        let t = RealizationTable::builtin();
        assert!(build_ising(5, 1.0, 1.3, 1.2, 0.8).unwrap().reflection_residual() < 1e-14);
        for seed in t.seeds() {
            let m = build_random_local(4, 1.0, 0.4, 0.9, t.get(seed).unwrap()).unwrap();
            assert!(m.reflection_residual() < 1e-13, "seed {seed}");
        }
        // a field on one end breaks it
        let lopsided = ModelInstance::from_terms(3, sum(vec![(single(3, 0, 1), c(1.0))]), vec![]).unwrap();
        assert!(lopsided.reflection_residual() > 0.5);
    }

    #[test]
    fn sampling_is_deterministic() {
        assert_eq!(RandomRealization::sample(42), RandomRealization::sample(42));
        assert_ne!(RandomRealization::sample(42), RandomRealization::sample(43));
    }

    #[test]
    fn non_local_structure() {
        let m = build_non_local(3, 7).unwrap();
        assert!(m.hermiticity_residual() < 1e-12);
        assert_eq!(m.jumps.len(), 3);
        assert!(m.jumps.iter().all(|j| max_abs_diff(&j.matrix, &m.jumps[0].matrix) == 0.0));
        assert!(matches!(build_non_local(7, 1), Err(Error::ResourceGuard { .. })));
    }

    // E‖A+A†‖²_F = 4·4^N for unit-variance complex entries, so
    // ‖H‖_HS/2^{N/2} concentrates at N/2.
    #[test]
    fn non_local_hamiltonian_scale() {
        for n in [3usize, 4] {
            let mean: f64 = (0..20u64)
                .map(|seed| {
                    let m = build_non_local(n, seed).unwrap();
                    linalg::frobenius(&m.hamiltonian) / 2f64.powf(n as f64 / 2.0)
                })
                .sum::<f64>()
                / 20.0;
            let expect = n as f64 / 2.0;
            assert!((mean / expect - 1.0).abs() < 0.2, "N={n}: {mean} vs {expect}");
        }
    }

    #[test]
    fn spec_round_trip_and_build() {
        let spec = ModelSpec::RandomLocal {
            n: 3,
            j: 1.0,
            j2: None,
            gamma1: 0.25,
            gamma2: 0.25,
            realization: RealizationSource::Fixture(4),
        };
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<ModelSpec>(&json).unwrap(), spec);
        let t = RealizationTable::builtin();
        assert!(spec.build(&t).is_ok());
        let missing = ModelSpec::TwoSiteOnly { n: 3, gamma2: 1.0, realization: RealizationSource::Fixture(99) };
        assert!(matches!(missing.build(&t), Err(Error::MissingSeed(99))));
    }
}
