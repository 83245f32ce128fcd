//! Lindbladian superoperators: assembly, adjoint, basis projection and checks.
//!
//! Vectorization is row-major, |A⟩⟩[i·D + j] = A[i, j], which makes
//! O₁ A O₂ ↦ (O₁ ⊗ O₂ᵀ)|A⟩⟩ and
//! L = −i(H⊗I − I⊗Hᵀ) + Σ_a [2 L_a⊗L_a* − L_a†L_a⊗I − I⊗(L_a†L_a)ᵀ].

use std::sync::Arc;

use faer::Mat;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, i_pow, CMat, C64, ONE, ZERO};
use crate::models::{rng, normal, ModelInstance, ModelSpec};
use crate::pauli::{BasisKind, PauliBasis, PauliString, PauliSum};

/// Largest N for the 4^N × 4^N ket-bra representation.
pub const FULL_MAX_SITES: usize = 6;
/// Largest N for the brute-force column-by-column oracle.
pub const ACTION_MAX_SITES: usize = 4;
/// Largest N for any dense superoperator (d_L = 8320 at N = 7).
pub const PAULI_MAX_SITES: usize = 7;
/// Relative block leakage tolerated by the reflection projection.
pub const LEAKAGE_TOL: f64 = 1e-10;

/// Representation space of a superoperator.
#[derive(Clone, Debug)]
pub enum SuperBasis {
    /// Row-major vectorized 2^N × 2^N matrices.
    Vectorized { n: usize },
    Pauli(Arc<PauliBasis>),
}

impl SuperBasis {
    pub fn n(&self) -> usize {
        match self {
            SuperBasis::Vectorized { n } => *n,
            SuperBasis::Pauli(b) => b.n(),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            SuperBasis::Vectorized { .. } => "full-row-vectorized",
            SuperBasis::Pauli(b) => match b.kind() {
                BasisKind::SymmetricEven => "symmetric-even-pauli",
                BasisKind::SymmetricOdd => "symmetric-odd-pauli",
                BasisKind::Full => "full-pauli",
            },
        }
    }

    pub fn pauli(&self) -> Option<&Arc<PauliBasis>> {
        match self {
            SuperBasis::Pauli(b) => Some(b),
            SuperBasis::Vectorized { .. } => None,
        }
    }

    /// Coordinates of the identity operator.
    pub fn identity_vector(&self) -> Vec<C64> {
        match self {
            SuperBasis::Vectorized { n } => {
                let d = 1usize << n;
                let mut v = vec![ZERO; d * d];
                (0..d).for_each(|i| v[i * d + i] = ONE);
                v
            }
            SuperBasis::Pauli(b) => {
                let mut v = vec![ZERO; b.dim()];
                if let Some(i) = b.identity_index() {
                    v[i] = C64::new(2f64.powi(b.n() as i32).sqrt(), 0.0);
                }
                v
            }
        }
    }
}

/// Dense superoperator matrix together with its basis.
#[derive(Clone, Debug)]
pub struct SuperOperator {
    matrix: CMat,
    basis: SuperBasis,
    spec: Option<ModelSpec>,
}

impl SuperOperator {
    pub fn new(matrix: CMat, basis: SuperBasis, spec: Option<ModelSpec>) -> Result<Self> {
        let d = match &basis {
            SuperBasis::Vectorized { n } => 1usize << (2 * n),
            SuperBasis::Pauli(b) => b.dim(),
        };
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: matrix.nrows() });
        }
        Ok(Self { matrix, basis, spec })
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn basis(&self) -> &SuperBasis {
        &self.basis
    }

    pub fn spec(&self) -> Option<&ModelSpec> {
        self.spec.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        linalg::matvec(&self.matrix, v)
    }

    pub fn frobenius(&self) -> f64 {
        linalg::frobenius(&self.matrix)
    }

    /// Conjugate transpose (the Heisenberg-picture generator).
    pub fn adjoint(&self) -> Self {
        Self { matrix: linalg::dagger(&self.matrix), basis: self.basis.clone(), spec: self.spec.clone() }
    }

    /// ‖⟨⟨I|L‖ / ‖L‖.
    pub fn trace_residual(&self) -> f64 {
        let row = linalg::vecmat(&self.basis.identity_vector(), &self.matrix);
        linalg::norm(&row) / self.frobenius().max(f64::MIN_POSITIVE)
    }

    /// Largest |Im L_ij| relative to max |L_ij|; zero for Hermiticity-preserving
    /// maps written in a Hermitian basis.
    pub fn imaginary_fraction(&self) -> f64 {
        let mut im = 0.0f64;
        for j in 0..self.dim() {
            for i in 0..self.dim() {
                im = im.max(self.matrix[(i, j)].im.abs());
            }
        }
        im / linalg::max_abs(&self.matrix).max(f64::MIN_POSITIVE)
    }

    pub fn real_part(&self) -> Mat<f64> {
        Mat::from_fn(self.dim(), self.dim(), |i, j| self.matrix[(i, j)].re)
    }
}

fn check_sites(n: usize, max: usize, what: &'static str) -> Result<()> {
    if n > max {
        return Err(Error::ResourceGuard { what, n, max });
    }
    Ok(())
}

fn nonzeros(a: &CMat) -> Vec<(usize, usize, C64)> {
    let mut out = Vec::new();
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let v = a[(i, j)];
            if v != ZERO {
                out.push((i, j, v));
            }
        }
    }
    out
}

// out += coef · (A ⊗ B), skipping zeros of both factors
fn kron_acc(out: &mut CMat, coef: C64, a: &[(usize, usize, C64)], b: &[(usize, usize, C64)], db: usize) {
    for &(ia, ja, va) in a {
        let s = coef * va;
        for &(ib, jb, vb) in b {
            out[(ia * db + ib, ja * db + jb)] += s * vb;
        }
    }
}

fn identity_nz(d: usize) -> Vec<(usize, usize, C64)> {
    (0..d).map(|i| (i, i, ONE)).collect()
}

/// Kronecker-product assembly in the 4^N-dimensional vectorized space.
pub fn assemble(model: &ModelInstance) -> Result<SuperOperator> {
    check_sites(model.n, FULL_MAX_SITES, "vectorized superoperator")?;
    let d = model.dim();
    let mut l = CMat::zeros(d * d, d * d);
    let id = identity_nz(d);
    let h = nonzeros(&model.hamiltonian);
    let ht = nonzeros(&linalg::transpose(&model.hamiltonian));
    kron_acc(&mut l, C64::new(0.0, -1.0), &h, &id, d);
    kron_acc(&mut l, C64::new(0.0, 1.0), &id, &ht, d);
    for jump in &model.jumps {
        let a = nonzeros(&jump.matrix);
        if a.is_empty() {
            continue;
        }
        let a_conj: Vec<_> = a.iter().map(|&(i, j, v)| (i, j, v.conj())).collect();
        let k = &linalg::dagger(&jump.matrix) * &jump.matrix;
        kron_acc(&mut l, C64::new(2.0, 0.0), &a, &a_conj, d);
        kron_acc(&mut l, -ONE, &nonzeros(&k), &id, d);
        kron_acc(&mut l, -ONE, &id, &nonzeros(&linalg::transpose(&k)), d);
    }
    SuperOperator::new(l, SuperBasis::Vectorized { n: model.n }, model.spec.clone())
}

/// L[X] by direct matrix products.
pub fn apply_lindblad_dense(model: &ModelInstance, x: &CMat) -> CMat {
    let h = &model.hamiltonian;
    let comm = linalg::sub(&(h * x), &(x * h));
    let mut out = linalg::scale(&comm, C64::new(0.0, -1.0));
    for jump in &model.jumps {
        let a = &jump.matrix;
        let ad = linalg::dagger(a);
        let k = &ad * a;
        let sandwich = &(a * x) * &ad;
        out = linalg::add(&out, &linalg::scale(&sandwich, C64::new(2.0, 0.0)));
        out = linalg::sub(&out, &linalg::add(&(&k * x), &(x * &k)));
    }
    out
}

/// L†[X] by direct matrix products.
pub fn apply_adjoint_dense(model: &ModelInstance, x: &CMat) -> CMat {
    let h = &model.hamiltonian;
    let comm = linalg::sub(&(h * x), &(x * h));
    let mut out = linalg::scale(&comm, C64::new(0.0, 1.0));
    for jump in &model.jumps {
        let a = &jump.matrix;
        let ad = linalg::dagger(a);
        let k = &ad * a;
        let sandwich = &(&ad * x) * a;
        out = linalg::add(&out, &linalg::scale(&sandwich, C64::new(2.0, 0.0)));
        out = linalg::sub(&out, &linalg::add(&(&k * x), &(x * &k)));
    }
    out
}

pub fn vectorize_row_major(x: &CMat) -> Vec<C64> {
    let d = x.nrows();
    (0..d * d).map(|k| x[(k / d, k % d)]).collect()
}

pub fn unvectorize_row_major(v: &[C64]) -> CMat {
    let d = (v.len() as f64).sqrt().round() as usize;
    Mat::from_fn(d, d, |i, j| v[i * d + j])
}

/// Column-by-column oracle: applies the master equation to every |k⟩⟨l|.
pub fn assemble_by_action(model: &ModelInstance) -> Result<SuperOperator> {
    check_sites(model.n, ACTION_MAX_SITES, "action-built superoperator")?;
    let d = model.dim();
    let mut l = CMat::zeros(d * d, d * d);
    for k in 0..d {
        for m in 0..d {
            let mut e = CMat::zeros(d, d);
            e[(k, m)] = ONE;
            let col = vectorize_row_major(&apply_lindblad_dense(model, &e));
            for (i, v) in col.into_iter().enumerate() {
                l[(i, k * d + m)] = v;
            }
        }
    }
    SuperOperator::new(l, SuperBasis::Vectorized { n: model.n }, model.spec.clone())
}

// Row-major vectorization of a basis element as sparse (index, value) pairs.
fn element_sparse(basis: &PauliBasis, idx: usize) -> Vec<(usize, C64)> {
    let n = basis.n();
    let d = 1usize << n;
    let (terms, k) = basis.element(idx).terms();
    let mut m = CMat::zeros(d, d);
    for &(s, w) in &terms[..k] {
        s.add_to_dense(&mut m, C64::new(w, 0.0));
    }
    nonzeros(&m).into_iter().map(|(i, j, v)| (i * d + j, v)).collect()
}

/// Block of a vectorized superoperator in a Pauli basis, plus the relative
/// norm of the part of L·B that leaves span(B).
pub fn project_to_basis(l: &SuperOperator, basis: Arc<PauliBasis>) -> Result<(SuperOperator, f64)> {
    let SuperBasis::Vectorized { n } = *l.basis() else {
        return Err(Error::InvalidModel("projection expects a vectorized superoperator".into()));
    };
    if basis.n() != n {
        return Err(Error::DimensionMismatch { expected: n, found: basis.n() });
    }
    let dl = basis.dim();
    let cols: Vec<Vec<(usize, C64)>> = (0..dl).map(|i| element_sparse(&basis, i)).collect();
    let full = l.dim();
    let mut block = CMat::zeros(dl, dl);
    let mut leak2 = 0.0;
    let mut lb = vec![ZERO; full];
    for m in 0..dl {
        lb.iter_mut().for_each(|x| *x = ZERO);
        for &(idx, v) in &cols[m] {
            let col = l.matrix().col(idx);
            for (i, o) in lb.iter_mut().enumerate() {
                *o += col[i] * v;
            }
        }
        for (row, c) in cols.iter().enumerate() {
            block[(row, m)] = c.iter().map(|&(idx, v)| v.conj() * lb[idx]).sum();
        }
        let mut resid = lb.clone();
        for (row, c) in cols.iter().enumerate() {
            let b = block[(row, m)];
            if b != ZERO {
                for &(idx, v) in c {
                    resid[idx] -= b * v;
                }
            }
        }
        leak2 += resid.iter().map(|x| x.norm_sqr()).sum::<f64>();
    }
    let rel = leak2.sqrt() / l.frobenius().max(f64::MIN_POSITIVE);
    Ok((SuperOperator::new(block, SuperBasis::Pauli(basis), l.spec.clone())?, rel))
}

/// Reflection-even block of a vectorized superoperator.
pub fn project_symmetric(l: &SuperOperator) -> Result<SuperOperator> {
    let basis = PauliBasis::symmetric(l.basis().n())?;
    let (block, leak) = project_to_basis(l, basis)?;
    if leak > LEAKAGE_TOL {
        return Err(Error::SymmetryViolation { leakage: leak, tol: LEAKAGE_TOL });
    }
    Ok(block)
}

// Scratch accumulator of raw Pauli-string coefficients.
struct StringAcc {
    values: Vec<C64>,
    seen: Vec<bool>,
    touched: Vec<u64>,
}

impl StringAcc {
    fn new(n: usize) -> Self {
        Self { values: vec![ZERO; 1 << (2 * n)], seen: vec![false; 1 << (2 * n)], touched: Vec::new() }
    }

    #[inline]
    fn add(&mut self, s: PauliString, v: C64) {
        let c = s.code() as usize;
        if !self.seen[c] {
            self.seen[c] = true;
            self.touched.push(s.code());
        }
        self.values[c] += v;
    }

    fn clear(&mut self) {
        for &c in &self.touched {
            self.values[c as usize] = ZERO;
            self.seen[c as usize] = false;
        }
        self.touched.clear();
    }
}

/// Matrix of the linear map `f` (acting on raw strings) in `basis`, with the
/// relative norm of the image components that fall outside the basis span.
fn map_matrix(basis: &PauliBasis, f: impl Fn(PauliString, C64, &mut StringAcc)) -> (CMat, f64) {
    let n = basis.n();
    let dl = basis.dim();
    let scale = (1u64 << n) as f64;
    let mut out = CMat::zeros(dl, dl);
    let mut acc = StringAcc::new(n);
    let mut leak2 = 0.0;
    let mut total2 = 0.0;
    for j in 0..dl {
        let (terms, k) = basis.element(j).terms();
        for &(s, w) in &terms[..k] {
            f(s, C64::new(w, 0.0), &mut acc);
        }
        for &code in &acc.touched {
            let s = PauliString::new(n, code);
            let v = acc.values[code as usize];
            if v == ZERO {
                continue;
            }
            total2 += v.norm_sqr() * scale;
            if let Some((i, c)) = basis.locate(s) {
                out[(i, j)] += v * c * scale;
            }
            // component orthogonal to the span, counted once per reflection pair
            let r = s.reflect();
            let vr = acc.values[r.code() as usize];
            if r.code() < s.code() && vr != ZERO {
                continue;
            }
            leak2 += match basis.kind() {
                BasisKind::Full => 0.0,
                BasisKind::SymmetricEven if r == s => 0.0,
                BasisKind::SymmetricEven => 0.5 * (v - vr).norm_sqr() * scale,
                BasisKind::SymmetricOdd if r == s => v.norm_sqr() * scale,
                BasisKind::SymmetricOdd => 0.5 * (v + vr).norm_sqr() * scale,
            };
        }
        acc.clear();
    }
    (out, leak2.sqrt() / total2.sqrt().max(f64::MIN_POSITIVE))
}

struct JumpKernel {
    pairs: Vec<(PauliString, PauliString, C64)>,
    k: PauliSum,
}

/// Lindbladian assembled directly in a Pauli basis from the Pauli expansions
/// of H and the jumps.
pub fn assemble_pauli(model: &ModelInstance, basis: Arc<PauliBasis>) -> Result<(SuperOperator, f64)> {
    check_sites(model.n, PAULI_MAX_SITES, "Pauli-basis superoperator")?;
    if basis.n() != model.n {
        return Err(Error::DimensionMismatch { expected: model.n, found: basis.n() });
    }
    let h = model.hamiltonian_pauli()?;
    let kernels: Vec<JumpKernel> = (0..model.jumps.len())
        .map(|a| {
            let t = model.jump_pauli(a)?;
            let pairs = t
                .terms
                .iter()
                .flat_map(|&(p, cp)| t.terms.iter().map(move |&(q, cq)| (p, q, cp * cq.conj() * 2.0)))
                .collect();
            Ok(JumpKernel { pairs, k: t.adjoint().mul(&t) })
        })
        .collect::<Result<_>>()?;
    let (matrix, leak) = map_matrix(&basis, |s, w, acc| {
        for &(p, hp) in &h.terms {
            if !p.commutes(&s) {
                // −i h [P, S] = −2i h P·S when they anticommute
                let (t, k) = p.mul(&s);
                acc.add(t, C64::new(0.0, -2.0) * hp * i_pow(k) * w);
            }
        }
        for kern in &kernels {
            for &(p, q, c) in &kern.pairs {
                let (t1, k1) = p.mul(&s);
                let (t2, k2) = t1.mul(&q);
                acc.add(t2, c * i_pow(k1 + k2) * w);
            }
            for &(p, kp) in &kern.k.terms {
                if p.commutes(&s) {
                    let (t, k) = p.mul(&s);
                    acc.add(t, -2.0 * kp * i_pow(k) * w);
                }
            }
        }
    });
    Ok((SuperOperator::new(matrix, SuperBasis::Pauli(basis), model.spec.clone())?, leak))
}

/// Picks the cheaper correct route: Pauli algebra for local models, ket-bra
/// assembly followed by projection for dense (non-local) ones.
pub fn assemble_in_basis(model: &ModelInstance, basis: Arc<PauliBasis>) -> Result<SuperOperator> {
    let local = model.hamiltonian_terms.is_some() && model.jumps.iter().all(|j| j.terms.is_some());
    let (l, leak) = if local {
        assemble_pauli(model, basis)?
    } else {
        project_to_basis(&assemble(model)?, basis)?
    };
    if leak > LEAKAGE_TOL {
        return Err(Error::SymmetryViolation { leakage: leak, tol: LEAKAGE_TOL });
    }
    Ok(l)
}

/// Default production route: reflection-even sector when the model has the
/// weak symmetry, the full Pauli basis otherwise. Models without a spec are
/// checked directly.
pub fn assemble_default(model: &ModelInstance) -> Result<SuperOperator> {
    let symmetric = match &model.spec {
        Some(spec) => spec.reflection_symmetric(),
        None => model.reflection_residual() < 1e-12,
    };
    let basis = if symmetric { PauliBasis::symmetric(model.n)? } else { PauliBasis::full(model.n)? };
    assemble_in_basis(model, basis)
}

/// X ↦ A X A† written in `basis`.
pub fn conjugation_superop(a: &PauliSum, basis: Arc<PauliBasis>) -> Result<SuperOperator> {
    let pairs: Vec<(PauliString, PauliString, C64)> = a
        .terms
        .iter()
        .flat_map(|&(p, cp)| a.terms.iter().map(move |&(q, cq)| (p, q, cp * cq.conj())))
        .collect();
    let (m, _) = map_matrix(&basis, |s, w, acc| {
        for &(p, q, c) in &pairs {
            let (t1, k1) = p.mul(&s);
            let (t2, k2) = t1.mul(&q);
            acc.add(t2, c * i_pow(k1 + k2) * w);
        }
    });
    SuperOperator::new(m, SuperBasis::Pauli(basis), None)
}

#[derive(Clone, Debug, Serialize)]
pub struct HermiticityReport {
    pub samples: usize,
    /// max ‖L(O)† − L(O)‖ / (‖L‖·‖O‖) over Hermitian test operators O.
    pub max_residual: f64,
}

/// Checks L(O)† = L(O†) on random Hermitian operators.
pub fn hermiticity_check(l: &SuperOperator, samples: usize, seed: u64) -> Result<HermiticityReport> {
    let mut g = rng(seed);
    let mut worst = 0.0f64;
    let lnorm = l.frobenius().max(f64::MIN_POSITIVE);
    for _ in 0..samples {
        let resid = match l.basis() {
            SuperBasis::Vectorized { n } => {
                let d = 1usize << n;
                let a = Mat::from_fn(d, d, |_, _| C64::new(normal(&mut g), normal(&mut g)));
                let o = Mat::from_fn(d, d, |i, j| a[(i, j)] + a[(j, i)].conj());
                let y = unvectorize_row_major(&l.apply(&vectorize_row_major(&o)));
                linalg::max_abs_diff(&y, &linalg::dagger(&y)) / linalg::frobenius(&o)
            }
            SuperBasis::Pauli(b) => {
                // Hermitian operators have real coordinates in a Hermitian basis
                let v: Vec<C64> = (0..b.dim()).map(|_| C64::new(normal(&mut g), 0.0)).collect();
                let y = l.apply(&v);
                y.iter().map(|c| c.im.abs()).fold(0.0, f64::max) / linalg::norm(&v)
            }
        };
        worst = worst.max(resid / lnorm);
    }
    Ok(HermiticityReport { samples, max_residual: worst })
}
