//! Time evolution of states and operators, and the observables derived from it.
//!
//! States and operators live as coordinate vectors in an orthonormal Pauli basis, so
//! ⟨⟨X|Y⟩⟩ is the plain complex dot product and the Heisenberg generator is the matrix
//! adjoint of the Schrödinger one. Propagation uses the spectral decomposition when its
//! completeness residual is small and a fixed-step RK4 integrator otherwise.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64, ONE, ZERO};
use crate::models::{complex_normal, normal, rng, Channel, ModelInstance};
use crate::pauli::{size_distribution, OperatorVector, PauliBasis, PauliString, PauliSum};
use crate::scalar::Real;
use crate::spectral::{SpectralDecomposition, SpectralShape};
use crate::stats;
use crate::superop::SuperOperator;

/// Completeness residual above which the eigenbasis is not trusted for propagation.
pub const COMPLETENESS_TOL: f64 = 1e-6;
/// RK4 step as a fraction of 1/‖L‖∞.
pub const RK4_COURANT: f64 = 0.02;
/// Largest number of RK4 steps allowed for one trajectory.
pub const RK4_MAX_STEPS: usize = 50_000_000;
/// Tolerance on Aρ₀A† = ρ₀ for the Rényi-2 protocol.
pub const PROJECTION_TOL: f64 = 1e-8;
/// Largest N for the dense OTOC evaluation of the operator size.
pub const OTOC_MAX_SITES: usize = 7;

/// Coefficients of the reference single-site operator along X, Y, Z.
pub const FIGS_INIT_COEFFS: [f64; 3] = [0.459, 0.681, 0.571];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Ensemble {
    /// ρ ∝ Σ_k |ψ_k⟩⟨ψ_k| with χ Gaussian vectors in the reflection-even Hilbert subspace.
    RankChi { chi: usize },
    /// The same Haar-random qubit on every site.
    HaarProduct,
    /// A fixed pure state given by its amplitudes (re, im) in the computational basis.
    Explicit { amplitudes: Vec<[f64; 2]> },
}

/// ρ ↦ PρP/Tr(PρP) with P = (1 + σ)/2 for a single-site Pauli σ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Projection {
    pub site: usize,
    /// 1 = X, 2 = Y, 3 = Z.
    pub pauli: u8,
}

impl Projection {
    pub fn central(n: usize, pauli: u8) -> Self {
        Self { site: (n - 1) / 2, pauli }
    }

    pub fn operator(&self, n: usize) -> PauliSum {
        PauliSum { terms: vec![(PauliString::single(n, self.site, self.pauli), ONE)] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialStateSpec {
    pub ensemble: Ensemble,
    #[serde(default)]
    pub projector: Option<Projection>,
    pub seed: u64,
}

fn reverse_bits(b: usize, n: usize) -> usize {
    (0..n).fold(0, |acc, j| acc | (((b >> j) & 1) << (n - 1 - j)))
}

/// Orthonormal basis of the reflection-even Hilbert subspace, as (index, amplitude) lists.
pub fn even_hilbert_basis(n: usize) -> Vec<Vec<(usize, f64)>> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    (0..1usize << n)
        .filter_map(|b| {
            let r = reverse_bits(b, n);
            match b.cmp(&r) {
                std::cmp::Ordering::Less => Some(vec![(b, h), (r, h)]),
                std::cmp::Ordering::Equal => Some(vec![(b, 1.0)]),
                std::cmp::Ordering::Greater => None,
            }
        })
        .collect()
}

fn haar_qubit(g: &mut rand_chacha::ChaCha8Rng) -> [C64; 2] {
    let (a, b) = (complex_normal(g), complex_normal(g));
    let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
    [a / n, b / n]
}

/// Dense density matrix drawn from `spec`, projected when asked.
pub fn sample_density(spec: &InitialStateSpec, n: usize) -> Result<CMat> {
    crate::pauli::dense_guard(n)?;
    let d = 1usize << n;
    let mut g = rng(spec.seed);
    let pure = |psi: &[C64]| {
        let mut m = CMat::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] = psi[i] * psi[j].conj();
            }
        }
        m
    };
    let mut rho = match &spec.ensemble {
        Ensemble::RankChi { chi } => {
            if *chi == 0 {
                return Err(Error::Precondition("rank χ must be at least 1".into()));
            }
            let basis = even_hilbert_basis(n);
            let mut m = CMat::zeros(d, d);
            for _ in 0..*chi {
                let mut psi = vec![ZERO; d];
                for e in &basis {
                    let a = complex_normal(&mut g);
                    for &(b, w) in e {
                        psi[b] += a * w;
                    }
                }
                m += pure(&psi);
            }
            m
        }
        Ensemble::HaarProduct => {
            let q = haar_qubit(&mut g);
            let psi: Vec<C64> =
                (0..d).map(|b| (0..n).map(|j| q[(b >> j) & 1]).product()).collect();
            pure(&psi)
        }
        Ensemble::Explicit { amplitudes } => {
            if amplitudes.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: amplitudes.len() });
            }
            let psi: Vec<C64> = amplitudes.iter().map(|&[re, im]| C64::new(re, im)).collect();
            if linalg::norm(&psi) == 0.0 {
                return Err(Error::ZeroNorm);
            }
            pure(&psi)
        }
    };
    if let Some(p) = spec.projector {
        if p.site >= n || !(1..=3).contains(&p.pauli) {
            return Err(Error::Precondition(format!("bad projector {p:?} for N={n}")));
        }
        let s = PauliString::single(n, p.site, p.pauli).dense()?;
        let proj = linalg::scale(&linalg::add(&linalg::identity(d), &s), C64::new(0.5, 0.0));
        rho = &proj * &rho * &proj;
    }
    let tr = linalg::trace(&rho);
    if tr.norm() < 1e-300 {
        return Err(Error::ZeroNorm);
    }
    Ok(linalg::scale(&rho, tr.inv()))
}

/// Density matrix from `spec` written in `basis`; fails if ρ has weight outside the basis span.
pub fn sample_state(spec: &InitialStateSpec, basis: Arc<PauliBasis>) -> Result<OperatorVector> {
    let rho = sample_density(spec, basis.n())?;
    density_to_vector(&rho, basis)
}

pub fn density_to_vector(rho: &CMat, basis: Arc<PauliBasis>) -> Result<OperatorVector> {
    let v = OperatorVector::vectorize(basis, rho)?;
    let full = linalg::hs_inner(rho, rho).re;
    let leak = (full - v.norm_sqr()).abs();
    if leak > 1e-10 * full.max(1.0) {
        return Err(Error::SymmetryViolation { leakage: leak, tol: 1e-10 });
    }
    Ok(v)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Picture {
    Schrodinger,
    Heisenberg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Spectral,
    Integrator,
}

/// Sampled vectors along a time grid.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub vectors: Vec<Vec<C64>>,
    pub basis: Arc<PauliBasis>,
    pub picture: Picture,
    pub method: Method,
    /// Completeness residual of the eigenbasis, when one was offered.
    pub completeness: Option<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn operator(&self, i: usize) -> Result<OperatorVector> {
        OperatorVector::new(self.basis.clone(), self.vectors[i].clone())
    }

    /// ⟨⟨X(t)|X(t)⟩⟩, the purity for states and the norm for operators.
    pub fn norm_sqr(&self) -> Vec<f64> {
        self.vectors.iter().map(|v| v.iter().map(|c| c.norm_sqr()).sum()).collect()
    }

    pub fn traces(&self) -> Vec<C64> {
        let (idx, w) = (self.basis.identity_index(), 2f64.powi(self.basis.n() as i32).sqrt());
        self.vectors.iter().map(|v| idx.map_or(ZERO, |i| v[i] * w)).collect()
    }
}

fn pauli_basis(l: &SuperOperator) -> Result<Arc<PauliBasis>> {
    l.basis()
        .pauli()
        .cloned()
        .ok_or_else(|| Error::Precondition("dynamics needs a superoperator in a Pauli basis".into()))
}

fn check_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InsufficientData("empty time grid".into()));
    }
    if times[0] < 0.0 || times.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::Precondition("time grid must be nonnegative and nondecreasing".into()));
    }
    Ok(())
}

fn inf_norm(m: &CMat) -> f64 {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Fixed-step classical RK4 for dv/dt = M v sampled on `times`.
///
/// The step is h = RK4_COURANT/‖M‖∞, shortened so that every grid interval holds a whole
/// number of equal steps.
pub fn rk4(m: &CMat, v0: &[C64], times: &[f64]) -> Result<Vec<Vec<C64>>> {
    check_grid(times)?;
    if v0.len() != m.ncols() {
        return Err(Error::DimensionMismatch { expected: m.ncols(), found: v0.len() });
    }
    let norm = inf_norm(m);
    let h_max = if norm > 0.0 { RK4_COURANT / norm } else { f64::INFINITY };
    let span = times[times.len() - 1];
    if span / h_max > RK4_MAX_STEPS as f64 {
        return Err(Error::StepUnderflow(h_max));
    }
    let axpy = |v: &[C64], k: &[C64], a: f64| -> Vec<C64> { v.iter().zip(k).map(|(x, y)| x + y * a).collect() };
    let mut out = Vec::with_capacity(times.len());
    let mut v = v0.to_vec();
    let mut t = 0.0;
    for &target in times {
        let dt = target - t;
        if dt > 0.0 {
            let steps = (dt / h_max).ceil().max(1.0) as usize;
            let h = dt / steps as f64;
            for _ in 0..steps {
                let k1 = linalg::matvec(m, &v);
                let k2 = linalg::matvec(m, &axpy(&v, &k1, h / 2.0));
                let k3 = linalg::matvec(m, &axpy(&v, &k2, h / 2.0));
                let k4 = linalg::matvec(m, &axpy(&v, &k3, h));
                for i in 0..v.len() {
                    v[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
                }
            }
            t = target;
        }
        out.push(v.clone());
    }
    Ok(out)
}

fn evolve(
    l: &SuperOperator,
    dec: Option<&SpectralDecomposition>,
    v0: &OperatorVector,
    times: &[f64],
    picture: Picture,
) -> Result<Trajectory> {
    check_grid(times)?;
    let basis = pauli_basis(l)?;
    if v0.basis().kind() != basis.kind() || v0.basis().n() != basis.n() {
        return Err(Error::Precondition("initial vector and superoperator use different bases".into()));
    }
    let completeness = dec.map(|d| d.completeness_residual(4, 0x5eed));
    let trusted = dec.filter(|d| d.dim() == l.dim() && completeness.is_some_and(|c| c <= COMPLETENESS_TOL));
    let (vectors, method) = match trusted {
        Some(d) => {
            let vs = match picture {
                Picture::Schrodinger => {
                    let c = d.coefficients(v0.coeffs());
                    times.iter().map(|&t| d.propagate(&c, t)).collect()
                }
                Picture::Heisenberg => {
                    let c = d.adjoint_coefficients(v0.coeffs());
                    times.iter().map(|&t| d.propagate_adjoint(&c, t)).collect()
                }
            };
            (vs, Method::Spectral)
        }
        None => {
            let vs = match picture {
                Picture::Schrodinger => rk4(l.matrix(), v0.coeffs(), times)?,
                Picture::Heisenberg => rk4(l.adjoint().matrix(), v0.coeffs(), times)?,
            };
            (vs, Method::Integrator)
        }
    };
    Ok(Trajectory { times: times.to_vec(), vectors, basis, picture, method, completeness })
}

/// ρ(t) = e^{Lt}ρ₀, spectrally when `dec` is given and well conditioned.
pub fn evolve_state(
    l: &SuperOperator,
    dec: Option<&SpectralDecomposition>,
    rho0: &OperatorVector,
    times: &[f64],
) -> Result<Trajectory> {
    evolve(l, dec, rho0, times, Picture::Schrodinger)
}

/// Schrödinger-picture RK4 reference.
pub fn evolve_state_integrator(l: &SuperOperator, rho0: &OperatorVector, times: &[f64]) -> Result<Trajectory> {
    evolve(l, None, rho0, times, Picture::Schrodinger)
}

/// A(t) = e^{L†t}A₀.
pub fn evolve_operator(
    l: &SuperOperator,
    dec: Option<&SpectralDecomposition>,
    a0: &OperatorVector,
    times: &[f64],
) -> Result<Trajectory> {
    evolve(l, dec, a0, times, Picture::Heisenberg)
}

pub fn evolve_operator_integrator(l: &SuperOperator, a0: &OperatorVector, times: &[f64]) -> Result<Trajectory> {
    evolve(l, None, a0, times, Picture::Heisenberg)
}

/// 0 followed by `count` log-spaced points on [t_min, t_max].
pub fn geometric_grid(t_min: f64, t_max: f64, count: usize) -> Result<Vec<f64>> {
    if !(t_min > 0.0 && t_max > t_min) || count < 2 {
        return Err(Error::Precondition(format!("bad geometric grid [{t_min}, {t_max}] x {count}")));
    }
    let r = (t_max / t_min).ln() / (count - 1) as f64;
    Ok(std::iter::once(0.0).chain((0..count).map(|k| t_min * (r * k as f64).exp())).collect())
}

/// `count` + 1 equally spaced points on [0, t_max].
pub fn linear_grid(t_max: f64, count: usize) -> Vec<f64> {
    (0..=count).map(|k| t_max * k as f64 / count.max(1) as f64).collect()
}

fn dot(u: &[C64], v: &[C64]) -> C64 {
    linalg::dot(u, v)
}

/// D from the jump operators: (4/P₀) Σ_a [Tr(ρ²L†L) − Tr(ρL†ρL)], evaluated as
/// (4/P₀) Σ_a Re⟨Lρ, Lρ − ρL⟩ so that it vanishes exactly when ρ commutes with every L.
pub fn decoherence_rate(rho0: &CMat, model: &ModelInstance) -> f64 {
    let p0 = linalg::hs_inner(rho0, rho0).re;
    let total: f64 = model
        .jumps
        .iter()
        .map(|j| {
            let lr = &j.matrix * rho0;
            let rl = rho0 * &j.matrix;
            linalg::hs_inner(&lr, &(&lr - &rl)).re
        })
        .sum();
    4.0 * total / p0
}

/// The same rate from the superoperator: −2 Re⟨⟨ρ|L|ρ⟩⟩/P₀.
pub fn decoherence_rate_superop(l: &SuperOperator, rho0: &[C64]) -> f64 {
    -2.0 * dot(rho0, &l.apply(rho0)).re / dot(rho0, rho0).re
}

/// Early-time exponential fit P(t)/P₀ ≈ e^{−bt}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit<T> {
    pub b: T,
    /// Last time included; the window runs from t = 0 until dP/dt first reaches 0.
    pub window_end: T,
    pub points: usize,
    pub rms: T,
}

/// Least-squares fit of e^{−bt} to `ratio` in linear space over the early window.
pub fn fit_early_exponent<T: Real>(times: &[T], purity: &[T]) -> Result<ExponentFit<T>> {
    if times.len() != purity.len() {
        return Err(Error::DimensionMismatch { expected: times.len(), found: purity.len() });
    }
    let end = (0..purity.len().saturating_sub(1)).find(|&i| purity[i + 1] >= purity[i]).unwrap_or(purity.len() - 1);
    if end < 2 {
        return Err(Error::InsufficientData(format!("purity window holds {} points", end + 1)));
    }
    let (t, p) = (&times[..=end], &purity[..=end]);
    let p0 = p[0];
    let sse = |b: T| t.iter().zip(p).map(|(&t, &y)| (y / p0 - (-b * t).exp()).powi(2)).sum::<T>();
    // initial slope guess, then golden section on ln b over six decades either side
    let guess = ((p0 / p[1]).ln() / (t[1] - t[0])).max(T::lit(1e-12));
    let (mut lo, mut hi) = (guess.ln() - T::lit(14.0), guess.ln() + T::lit(14.0));
    let phi = T::lit(0.618_033_988_749_894_8);
    let (mut x1, mut x2) = (hi - phi * (hi - lo), lo + phi * (hi - lo));
    let (mut f1, mut f2) = (sse(x1.exp()), sse(x2.exp()));
    for _ in 0..200 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = sse(x1.exp());
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = sse(x2.exp());
        }
    }
    let b = ((lo + hi) / T::lit(2.0)).exp();
    let rms = (sse(b) / T::from_usize_lossy(t.len())).sqrt();
    Ok(ExponentFit { b, window_end: t[end], points: end + 1, rms })
}

/// Second-order deviation of the purity from P₀e^{−Dt}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PurityDeviation {
    pub p0: f64,
    pub d: f64,
    /// P(t) − P₀e^{−Dt} = σ²t² + O(t³).
    pub sigma2: f64,
    /// |σ²|/D², the leading estimate of δ(1/D).
    pub delta_at_inv_d: f64,
}

pub fn purity_deviation(l: &SuperOperator, rho0: &[C64]) -> Result<PurityDeviation> {
    let p0 = dot(rho0, rho0).re;
    let lr = l.apply(rho0);
    let llr = l.apply(&lr);
    let first = dot(rho0, &lr).re;
    let d = -2.0 * first / p0;
    if !(d > 1e-12 * l.frobenius().max(1.0)) {
        return Err(Error::Precondition(format!("decoherence rate D = {d:.3e} is not positive")));
    }
    let sigma2 = dot(&lr, &lr).re + dot(rho0, &llr).re - 2.0 * first * first / p0;
    Ok(PurityDeviation { p0, d, sigma2, delta_at_inv_d: sigma2.abs() / (d * d) })
}

/// δ(t) = |P(t) − P₀e^{−Dt}| along a trajectory.
pub fn deviation_series(times: &[f64], purity: &[f64], d: f64) -> Vec<f64> {
    let p0 = purity.first().copied().unwrap_or(0.0);
    times.iter().zip(purity).map(|(&t, &p)| (p - p0 * (-d * t).exp()).abs()).collect()
}

/// Superoperator X ↦ AXA† for a single-site Pauli A.
pub fn renyi_superop(n: usize, site: usize, pauli: u8, basis: Arc<PauliBasis>) -> Result<SuperOperator> {
    let a = PauliSum { terms: vec![(PauliString::single(n, site, pauli), ONE)] };
    crate::superop::conjugation_superop(&a, basis)
}

fn check_projection(asup: &SuperOperator, rho0: &[C64]) -> Result<()> {
    let ar = asup.apply(rho0);
    let dev = linalg::diff_norm(&ar, rho0) / linalg::norm(rho0).max(f64::MIN_POSITIVE);
    if dev > PROJECTION_TOL {
        return Err(Error::Precondition(format!("ρ₀ is not invariant under A (deviation {dev:.3e})")));
    }
    Ok(())
}

/// R_A(t) = ⟨⟨ρ|A⊗A*|ρ⟩⟩/⟨⟨ρ|ρ⟩⟩.
pub fn renyi2(traj: &Trajectory, asup: &SuperOperator) -> Result<Vec<f64>> {
    let first = traj.vectors.first().ok_or_else(|| Error::InsufficientData("empty trajectory".into()))?;
    check_projection(asup, first)?;
    Ok(traj.vectors.iter().map(|v| dot(v, &asup.apply(v)).re / dot(v, v).re).collect())
}

/// Σ = −⟨⟨ρ₀|L†AL − L†L|ρ₀⟩⟩, so that R_A ≈ 1 − (Σ/P₀)t².
pub fn renyi2_sigma(l: &SuperOperator, asup: &SuperOperator, rho0: &[C64]) -> Result<f64> {
    check_projection(asup, rho0)?;
    let lr = l.apply(rho0);
    Ok(-(dot(&lr, &asup.apply(&lr)).re - dot(&lr, &lr).re))
}

/// dR_A/dt at t = 0, evaluated exactly from the generator.
pub fn renyi2_linear_coefficient(l: &SuperOperator, asup: &SuperOperator, rho0: &[C64]) -> Result<f64> {
    check_projection(asup, rho0)?;
    let lr = l.apply(rho0);
    let p0 = dot(rho0, rho0).re;
    let num0 = dot(rho0, &asup.apply(rho0)).re;
    let dnum = 2.0 * dot(rho0, &asup.apply(&lr)).re;
    let dp = 2.0 * dot(rho0, &lr).re;
    Ok((dnum - num0 / p0 * dp) / p0)
}

/// dN/dt = 4 Σ_a Tr(A[L_a†, A]L_a) for Hermitian A.
pub fn operator_norm_rate(a: &CMat, model: &ModelInstance) -> f64 {
    model
        .jumps
        .iter()
        .map(|j| {
            let ld = linalg::dagger(&j.matrix);
            let comm = linalg::sub(&(&ld * a), &(a * &ld));
            4.0 * linalg::trace_prod(&(a * &comm), &j.matrix).re
        })
        .sum()
}

/// Decay rate −dN/dt of every normalized Pauli string, indexed by string code.
///
/// With L_a = Σ c_Q Q, the rate of a string P is 8 Σ_a Σ_{Q anticommuting with P} |c_Q|².
pub fn pauli_string_rates(model: &ModelInstance) -> Result<Vec<f64>> {
    let n = model.n;
    crate::pauli::dense_guard(n)?;
    let jumps: Vec<PauliSum> = (0..model.jumps.len()).map(|a| model.jump_pauli(a)).collect::<Result<_>>()?;
    let terms: Vec<(PauliString, f64)> =
        jumps.iter().flat_map(|s| s.terms.iter().map(|&(q, c)| (q, c.norm_sqr()))).collect();
    Ok((0..1u64 << (2 * n))
        .map(|code| {
            let p = PauliString::new(n, code);
            8.0 * terms.iter().filter(|(q, _)| !p.commutes(q)).map(|(_, w)| w).sum::<f64>()
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub s: usize,
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

/// Per-string decay rates grouped by size; `channel` keeps only the jumps of that kind.
pub fn per_basis_rate_table(model: &ModelInstance, channel: Option<Channel>) -> Result<Vec<RateRow>> {
    let m = match channel {
        Some(c) => model.filter_jumps(|j| j.channel == c),
        None => model.clone(),
    };
    let rates = pauli_string_rates(&m)?;
    let mut by_size = vec![Vec::new(); m.n + 1];
    for (code, r) in rates.into_iter().enumerate() {
        by_size[PauliString::new(m.n, code as u64).size()].push(r);
    }
    Ok(by_size
        .into_iter()
        .enumerate()
        .map(|(s, xs)| {
            let (min, max) = stats::min_max(&xs);
            RateRow { s, count: xs.len(), mean: stats::mean(&xs), std: stats::std(&xs), min, max }
        })
        .collect())
}

/// Line through the mean rates of sizes s ≥ 1.
pub fn rate_size_fit(rows: &[RateRow]) -> Result<stats::LinearFit<f64>> {
    let (x, y): (Vec<f64>, Vec<f64>) = rows.iter().filter(|r| r.s >= 1).map(|r| (r.s as f64, r.mean)).unzip();
    stats::linear_fit(&x, &y)
}

/// Observables along an operator trajectory.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OperatorSeries {
    pub times: Vec<f64>,
    pub norm: Vec<f64>,
    pub trace: Vec<C64>,
    /// p_s(t), one row per time.
    pub p_s: Vec<Vec<f64>>,
    /// Σ_s s·p_s.
    pub size: Vec<f64>,
    /// ¼ Σ_i Σ_α [1 − Tr(A†σAσ)/Tr(A†A)], for N ≤ OTOC_MAX_SITES.
    pub size_otoc: Option<Vec<f64>>,
    /// (Σ_m w_m)²/Σ_m w_m² over normalized Pauli strings, w_m = |⟨⟨S_m|A⟩⟩|².
    pub ipr: Vec<f64>,
}

/// Operator size from the single-site out-of-time-order correlators.
pub fn otoc_size(a: &CMat, n: usize) -> Result<f64> {
    let norm = linalg::hs_inner(a, a).re;
    if norm == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let mut s = 0.0;
    for site in 0..n {
        for op in 1..=3u8 {
            let sigma = PauliString::single(n, site, op).dense()?;
            let conj = &sigma * a * &sigma;
            s += 1.0 - linalg::hs_inner(a, &conj).re / norm;
        }
    }
    Ok(s / 4.0)
}

/// IPR of the coordinates spread over individual normalized Pauli strings.
pub fn full_space_ipr(basis: &PauliBasis, coeffs: &[C64]) -> Result<f64> {
    let scale = 2f64.powi(basis.n() as i32);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for (e, c) in basis.elements().iter().zip(coeffs) {
        let (terms, k) = e.terms();
        for &(_, w) in &terms[..k] {
            let p = c.norm_sqr() * w * w * scale;
            sum += p;
            sum_sq += p * p;
        }
    }
    if sum_sq == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(sum * sum / sum_sq)
}

pub fn operator_series(traj: &Trajectory) -> Result<OperatorSeries> {
    let n = traj.basis.n();
    let mut p_s = Vec::with_capacity(traj.len());
    let mut size = Vec::with_capacity(traj.len());
    let mut ipr = Vec::with_capacity(traj.len());
    for v in &traj.vectors {
        let p = size_distribution(&traj.basis, v)?;
        size.push(p.iter().enumerate().map(|(s, x)| s as f64 * x).sum());
        p_s.push(p);
        ipr.push(full_space_ipr(&traj.basis, v)?);
    }
    let size_otoc = if n <= OTOC_MAX_SITES {
        Some(
            (0..traj.len())
                .map(|i| otoc_size(&traj.operator(i)?.to_dense()?, n))
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };
    Ok(OperatorSeries { times: traj.times.clone(), norm: traj.norm_sqr(), trace: traj.traces(), p_s, size, size_otoc, ipr })
}

/// First time `values` crosses `level`, interpolated linearly between samples.
pub fn first_crossing<T: Real>(times: &[T], values: &[T], level: T, rising: bool) -> Option<T> {
    let past = |v: T| if rising { v >= level } else { v < level };
    let i = values.iter().position(|&v| past(v))?;
    if i == 0 {
        return Some(times[0]);
    }
    let (v0, v1) = (values[i - 1], values[i]);
    let f = if v1 == v0 { T::one() } else { (level - v0) / (v1 - v0) };
    Some(times[i - 1] + f * (times[i] - times[i - 1]))
}

/// Characteristic times of an operator trajectory, plus the state rates when known.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimescaleReport {
    pub tau_f: f64,
    pub tau_n: Option<f64>,
    pub tau_i: Option<f64>,
    pub d: Option<f64>,
    pub sigma: Option<f64>,
    pub sigma2: Option<f64>,
}

/// τ_F from the spectrum, τ_N from the relative norm deviation, τ_I from p₀ reaching 1/2.
pub fn timescales(series: &OperatorSeries, shape: &SpectralShape<f64>, n_inf: f64) -> TimescaleReport {
    let n0 = series.norm.first().copied().unwrap_or(0.0);
    let tau_n = if (n0 - n_inf).abs() > 1e-14 {
        let rel: Vec<f64> = series.norm.iter().map(|&x| (x - n_inf) / (n0 - n_inf)).collect();
        first_crossing(&series.times, &rel, 0.5, false)
    } else {
        None
    };
    let p0: Vec<f64> = series.p_s.iter().map(|p| p[0]).collect();
    TimescaleReport {
        tau_f: shape.freezing_time(),
        tau_n,
        tau_i: first_crossing(&series.times, &p0, 0.5, true),
        ..Default::default()
    }
}

fn central_operator(n: usize, r: [f64; 3]) -> PauliSum {
    let sites: Vec<usize> = if n % 2 == 1 { vec![(n - 1) / 2] } else { vec![n / 2 - 1, n / 2] };
    let terms = sites
        .iter()
        .flat_map(|&j| (0..3).map(move |a| (PauliString::single(n, j, a as u8 + 1), C64::new(r[a], 0.0))))
        .collect();
    PauliSum { terms }
}

/// Unit-norm operator with the reference X, Y, Z coefficients at the chain centre.
pub fn figs_init_op(basis: Arc<PauliBasis>) -> Result<OperatorVector> {
    let sum = central_operator(basis.n(), FIGS_INIT_COEFFS);
    OperatorVector::from_strings(basis, &sum.terms)?.normalized()
}

/// Unit-norm central operator with standard-normal X, Y, Z coefficients.
pub fn rand_init_op(basis: Arc<PauliBasis>, seed: u64) -> Result<OperatorVector> {
    let mut g = rng(seed);
    let r = [normal(&mut g), normal(&mut g), normal(&mut g)];
    let sum = central_operator(basis.n(), r);
    OperatorVector::from_strings(basis, &sum.terms)?.normalized()
}

/// Trace-one steady state from the decomposition.
pub fn steady_state(dec: &SpectralDecomposition) -> Result<OperatorVector> {
    let basis = dec
        .basis()
        .and_then(|b| b.pauli().cloned())
        .ok_or_else(|| Error::Precondition("decomposition carries no Pauli basis".into()))?;
    let v = OperatorVector::new(basis, dec.right_vec(dec.steady_index()?))?;
    let tr = v.trace();
    if tr.norm() < 1e-12 {
        return Err(Error::InvalidModel("steady eigenvector is traceless".into()));
    }
    let coeffs = v.coeffs().iter().map(|c| c / tr).collect();
    OperatorVector::new(v.basis().clone(), coeffs)
}

/// Tr(Aρ) for Hermitian A, as ⟨⟨A|ρ⟩⟩.
pub fn expectation(a: &OperatorVector, rho: &OperatorVector) -> C64 {
    a.inner(rho)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnomalousReport {
    /// Tr(Aρ_ss) removed from the initial operator.
    pub subtracted: C64,
    /// Tr(Ãρ_ss) after the subtraction.
    pub residual: f64,
    pub late_size: f64,
    pub late_p_n: f64,
    pub n: usize,
}

/// Evolves Ã = A − Tr(Aρ_ss)·I and reports the late-time size.
pub fn anomalous_protocol(
    l: &SuperOperator,
    dec: &SpectralDecomposition,
    a: &OperatorVector,
    times: &[f64],
) -> Result<(Trajectory, OperatorSeries, AnomalousReport)> {
    let rho = steady_state(dec)?;
    let shift = expectation(a, &rho);
    let id = l.basis().identity_vector();
    let coeffs: Vec<C64> = a.coeffs().iter().zip(&id).map(|(c, i)| c - shift * i).collect();
    let at = OperatorVector::new(a.basis().clone(), coeffs)?;
    let residual = expectation(&at, &rho).norm();
    let traj = evolve_operator(l, Some(dec), &at, times)?;
    let series = operator_series(&traj)?;
    let n = a.basis().n();
    let last = series.p_s.last().ok_or_else(|| Error::InsufficientData("empty time grid".into()))?;
    let report = AnomalousReport {
        subtracted: shift,
        residual,
        late_size: *series.size.last().unwrap_or(&0.0),
        late_p_n: last[n],
        n,
    };
    Ok((traj, series, report))
}
