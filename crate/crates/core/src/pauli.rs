//! Pauli strings, the reflection-symmetrized operator basis and operator vectors.
//!
//! A string on N sites is packed two bits per site (I=0, X=1, Y=2, Z=3) with
//! site 0 in the most significant position, so numeric order of codes is
//! lexicographic order of the symbol strings.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{i_pow, CMat, C64, ZERO};

/// Largest chain length that fits the packed code.
pub const MAX_SITES: usize = 31;
/// Largest chain length for which dense 2^N × 2^N matrices are built.
pub const DENSE_MAX_SITES: usize = 12;
/// Largest chain length for which a basis table (4^N lookup) is built.
pub const BASIS_MAX_SITES: usize = 10;

const LOW: u64 = 0x5555_5555_5555_5555;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct PauliString {
    code: u64,
    n: u8,
}

impl PauliString {
    pub fn new(n: usize, code: u64) -> Self {
        assert!((1..=MAX_SITES).contains(&n), "site count {n} out of range");
        assert!(code < 1u64 << (2 * n), "code {code} too large for {n} sites");
        Self { code, n: n as u8 }
    }

    pub fn identity(n: usize) -> Self {
        Self::new(n, 0)
    }

    pub fn from_codes(codes: &[u8]) -> Self {
        let code = codes.iter().fold(0u64, |acc, &c| {
            assert!(c < 4, "invalid Pauli code {c}");
            (acc << 2) | c as u64
        });
        Self::new(codes.len(), code)
    }

    /// Single Pauli `op` (1..=3) on `site` (0-based from the left).
    pub fn single(n: usize, site: usize, op: u8) -> Self {
        let mut codes = vec![0u8; n];
        codes[site] = op;
        Self::from_codes(&codes)
    }

    pub fn n(&self) -> usize {
        self.n as usize
    }

    pub fn code(&self) -> u64 {
        self.code
    }

    pub fn site(&self, j: usize) -> u8 {
        ((self.code >> (2 * (self.n() - 1 - j))) & 3) as u8
    }

    pub fn codes(&self) -> Vec<u8> {
        (0..self.n()).map(|j| self.site(j)).collect()
    }

    fn mask(&self) -> u64 {
        LOW & ((1u64 << (2 * self.n())) - 1)
    }

    /// Number of non-identity factors.
    pub fn size(&self) -> usize {
        let l = self.code & LOW;
        let h = (self.code >> 1) & LOW;
        (l | h).count_ones() as usize
    }

    /// Image under the midpoint reflection of the chain.
    pub fn reflect(&self) -> Self {
        let n = self.n();
        let mut out = 0u64;
        for j in 0..n {
            out |= (self.site(j) as u64) << (2 * j);
        }
        Self { code: out, n: self.n }
    }

    pub fn is_palindrome(&self) -> bool {
        self.reflect() == *self
    }

    // Symplectic bits on even bit positions: x marks X/Y, z marks Y/Z.
    fn xz(&self) -> (u64, u64) {
        let l = self.code & LOW;
        let h = (self.code >> 1) & LOW;
        (l ^ h, h)
    }

    /// `self · other = i^phase · product`.
    pub fn mul(&self, other: &Self) -> (Self, u8) {
        debug_assert_eq!(self.n, other.n);
        let (xa, za) = self.xz();
        let (xb, zb) = other.xz();
        let (x, z) = (xa ^ xb, za ^ zb);
        let code = ((x ^ z) & self.mask()) | (z << 1);
        let k = (xa & za).count_ones() as i64 + (xb & zb).count_ones() as i64
            + 2 * (za & xb).count_ones() as i64
            - (x & z).count_ones() as i64;
        (Self { code, n: self.n }, k.rem_euclid(4) as u8)
    }

    pub fn commutes(&self, other: &Self) -> bool {
        let (xa, za) = self.xz();
        let (xb, zb) = other.xz();
        ((xa & zb).count_ones() + (za & xb).count_ones()) % 2 == 0
    }

    /// Flip and phase masks on computational-basis indices (site 0 is the
    /// most significant qubit): S|b⟩ = i^{|x∧z|}(−1)^{|z∧b|}|b⊕x⟩.
    fn state_masks(&self) -> (usize, usize, u8) {
        let n = self.n();
        let (mut x, mut z) = (0usize, 0usize);
        for j in 0..n {
            let bit = 1usize << (n - 1 - j);
            match self.site(j) {
                1 => x |= bit,
                2 => {
                    x |= bit;
                    z |= bit;
                }
                3 => z |= bit,
                _ => {}
            }
        }
        (x, z, ((x & z).count_ones() & 3) as u8)
    }

    /// Adds `coef · S` into the dense matrix `m`.
    pub fn add_to_dense(&self, m: &mut CMat, coef: C64) {
        let (x, z, y) = self.state_masks();
        let c = coef * i_pow(y);
        for b in 0..(1usize << self.n()) {
            let v = if (z & b).count_ones() % 2 == 0 { c } else { -c };
            m[(b ^ x, b)] += v;
        }
    }

    pub fn dense(&self) -> Result<CMat> {
        dense_guard(self.n())?;
        let d = 1usize << self.n();
        let mut m = Mat::zeros(d, d);
        self.add_to_dense(&mut m, C64::new(1.0, 0.0));
        Ok(m)
    }

    /// Tr(S·M) in O(2^N).
    pub fn trace_with(&self, m: &CMat) -> C64 {
        let (x, z, y) = self.state_masks();
        let mut acc = ZERO;
        for c in 0..(1usize << self.n()) {
            let v = m[(c, c ^ x)];
            if (z & c).count_ones() % 2 == 0 {
                acc += v;
            } else {
                acc -= v;
            }
        }
        acc * i_pow(y)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in self.codes() {
            f.write_str(["I", "X", "Y", "Z"][c as usize])?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let codes = s
            .chars()
            .map(|c| match c {
                'I' => Ok(0),
                'X' => Ok(1),
                'Y' => Ok(2),
                'Z' => Ok(3),
                other => Err(Error::Parse { line: 0, msg: format!("invalid Pauli symbol {other:?}") }),
            })
            .collect::<Result<Vec<u8>>>()?;
        if codes.is_empty() || codes.len() > MAX_SITES {
            return Err(Error::Parse { line: 0, msg: format!("string length {} out of range", codes.len()) });
        }
        Ok(Self::from_codes(&codes))
    }
}

pub(crate) fn dense_guard(n: usize) -> Result<()> {
    if n > DENSE_MAX_SITES {
        return Err(Error::ResourceGuard { what: "dense operator", n, max: DENSE_MAX_SITES });
    }
    Ok(())
}

/// Dimension of the reflection-even operator space, (4^N/2)(1 + 4^{⌈N/2⌉−N}).
pub fn symmetric_dimension(n: usize) -> usize {
    let full = 1usize << (2 * n);
    let palindromes = 1usize << (2 * n.div_ceil(2));
    (full + palindromes) / 2
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisKind {
    /// Reflection-even combinations (S + RSR)/norm.
    SymmetricEven,
    /// Reflection-odd combinations (S − RSR)/norm; constructible for checks.
    SymmetricOdd,
    /// Every Pauli string, normalized.
    Full,
}

impl BasisKind {
    pub fn tag(&self) -> &'static str {
        match self {
            BasisKind::SymmetricEven => "symmetric-even",
            BasisKind::SymmetricOdd => "symmetric-odd",
            BasisKind::Full => "full",
        }
    }
}

/// Number of size-`s` basis operators, 3^s·C(N,s) in the full space.
pub fn sector_size_count(n: usize, s: usize, kind: BasisKind) -> usize {
    match kind {
        BasisKind::Full => 3usize.pow(s as u32) * binomial(n, s),
        _ => PauliBasis::new(n, kind)
            .map(|b| b.sector_count(s))
            .unwrap_or(0),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BasisElement {
    pub representative: PauliString,
    pub partner: PauliString,
    pub paired: bool,
    pub normalization: f64,
    /// Relative sign of the partner (+1 even, −1 odd sector).
    pub sign: f64,
}

impl BasisElement {
    pub fn size(&self) -> usize {
        self.representative.size()
    }

    /// The (string, coefficient) pairs making up this element.
    pub fn terms(&self) -> ([(PauliString, f64); 2], usize) {
        let w = self.normalization;
        (
            [(self.representative, w), (self.partner, self.sign * w)],
            if self.paired { 2 } else { 1 },
        )
    }
}

/// Orthonormal operator basis built from Pauli strings.
#[derive(Debug)]
pub struct PauliBasis {
    n: usize,
    kind: BasisKind,
    elements: Vec<BasisElement>,
    // code -> element index, u32::MAX when the string is not a representative or partner
    lookup: Vec<u32>,
}

impl PauliBasis {
    pub fn new(n: usize, kind: BasisKind) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidModel("chain needs at least one site".into()));
        }
        if n > BASIS_MAX_SITES {
            return Err(Error::ResourceGuard { what: "Pauli basis table", n, max: BASIS_MAX_SITES });
        }
        let total = 1u64 << (2 * n);
        let mut elements = Vec::new();
        let mut lookup = vec![u32::MAX; total as usize];
        let half = 2f64.powi(n as i32).sqrt().recip();
        for code in 0..total {
            let s = PauliString::new(n, code);
            let element = match kind {
                BasisKind::Full => Some(BasisElement {
                    representative: s,
                    partner: s,
                    paired: false,
                    normalization: half,
                    sign: 1.0,
                }),
                BasisKind::SymmetricEven | BasisKind::SymmetricOdd => {
                    let r = s.reflect();
                    if r.code < code {
                        None
                    } else if r.code == code {
                        (kind == BasisKind::SymmetricEven).then_some(BasisElement {
                            representative: s,
                            partner: s,
                            paired: false,
                            normalization: half,
                            sign: 1.0,
                        })
                    } else {
                        Some(BasisElement {
                            representative: s,
                            partner: r,
                            paired: true,
                            normalization: half * std::f64::consts::FRAC_1_SQRT_2,
                            sign: if kind == BasisKind::SymmetricEven { 1.0 } else { -1.0 },
                        })
                    }
                }
            };
            if let Some(e) = element {
                let idx = elements.len() as u32;
                lookup[e.representative.code as usize] = idx;
                lookup[e.partner.code as usize] = idx;
                elements.push(e);
            }
        }
        Ok(Self { n, kind, elements, lookup })
    }

    pub fn symmetric(n: usize) -> Result<Arc<Self>> {
        Self::new(n, BasisKind::SymmetricEven).map(Arc::new)
    }

    pub fn full(n: usize) -> Result<Arc<Self>> {
        Self::new(n, BasisKind::Full).map(Arc::new)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[BasisElement] {
        &self.elements
    }

    pub fn element(&self, i: usize) -> &BasisElement {
        &self.elements[i]
    }

    /// Element index containing `s` and the coefficient of `s` inside it.
    pub fn locate(&self, s: PauliString) -> Option<(usize, f64)> {
        let idx = *self.lookup.get(s.code as usize)?;
        if idx == u32::MAX {
            return None;
        }
        let e = &self.elements[idx as usize];
        let c = if s == e.representative { e.normalization } else { e.sign * e.normalization };
        Some((idx as usize, c))
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.elements.iter().map(BasisElement::size).collect()
    }

    pub fn sector_count(&self, s: usize) -> usize {
        self.elements.iter().filter(|e| e.size() == s).count()
    }

    /// Index of the normalized identity, absent in the odd sector.
    pub fn identity_index(&self) -> Option<usize> {
        self.locate(PauliString::identity(self.n)).map(|(i, _)| i)
    }

    /// Text table: index, code string, size, normalization.
    pub fn manifest_table(&self) -> String {
        let mut out = format!("# basis {} N={} dim={}\nindex\tcode\tsize\tnormalization\n", self.kind.tag(), self.n, self.dim());
        for (i, e) in self.elements.iter().enumerate() {
            out.push_str(&format!("{i}\t{}\t{}\t{:.17e}\n", e.representative, e.size(), e.normalization));
        }
        out
    }

    pub fn element_dense(&self, i: usize) -> Result<CMat> {
        dense_guard(self.n)?;
        let d = 1usize << self.n;
        let mut m = Mat::zeros(d, d);
        let (terms, k) = self.elements[i].terms();
        for &(s, w) in &terms[..k] {
            s.add_to_dense(&mut m, C64::new(w, 0.0));
        }
        Ok(m)
    }
}

/// Coefficients of an operator (state or observable) over a Pauli basis.
#[derive(Clone, Debug)]
pub struct OperatorVector {
    basis: Arc<PauliBasis>,
    coeffs: Vec<C64>,
}

impl OperatorVector {
    pub fn new(basis: Arc<PauliBasis>, coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.len() != basis.dim() {
            return Err(Error::DimensionMismatch { expected: basis.dim(), found: coeffs.len() });
        }
        Ok(Self { basis, coeffs })
    }

    pub fn zeros(basis: Arc<PauliBasis>) -> Self {
        let d = basis.dim();
        Self { basis, coeffs: vec![ZERO; d] }
    }

    /// Σ c·S over raw strings, projected onto the basis.
    pub fn from_strings(basis: Arc<PauliBasis>, terms: &[(PauliString, C64)]) -> Result<Self> {
        let mut v = Self::zeros(basis);
        for &(s, c) in terms {
            if s.n() != v.basis.n() {
                return Err(Error::DimensionMismatch { expected: v.basis.n(), found: s.n() });
            }
            // ⟨F|S⟩ = w·2^N for each string inside F
            if let Some((idx, w)) = v.basis.locate(s) {
                v.coeffs[idx] += c * w * (1u64 << v.basis.n()) as f64;
            }
        }
        Ok(v)
    }

    pub fn basis(&self) -> &Arc<PauliBasis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<C64> {
        self.coeffs
    }

    pub fn inner(&self, other: &Self) -> C64 {
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr().sqrt();
        if n == 0.0 {
            return Err(Error::ZeroNorm);
        }
        Ok(Self { basis: self.basis.clone(), coeffs: self.coeffs.iter().map(|c| c / n).collect() })
    }

    /// Tr of the represented operator.
    pub fn trace(&self) -> C64 {
        match self.basis.identity_index() {
            Some(i) => self.coeffs[i] * 2f64.powi(self.basis.n() as i32).sqrt(),
            None => ZERO,
        }
    }

    /// p_s for s = 0..=N.
    pub fn size_distribution(&self) -> Result<Vec<f64>> {
        size_distribution(&self.basis, &self.coeffs)
    }

    pub fn to_dense(&self) -> Result<CMat> {
        dense_guard(self.basis.n())?;
        let d = 1usize << self.basis.n();
        let mut m = Mat::zeros(d, d);
        for (e, &c) in self.basis.elements().iter().zip(&self.coeffs) {
            if c == ZERO {
                continue;
            }
            let (terms, k) = e.terms();
            for &(s, w) in &terms[..k] {
                s.add_to_dense(&mut m, c * w);
            }
        }
        Ok(m)
    }

    /// Projects a dense 2^N × 2^N matrix onto the basis (exact inside the span).
    pub fn vectorize(basis: Arc<PauliBasis>, m: &CMat) -> Result<Self> {
        let d = 1usize << basis.n();
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: m.nrows() });
        }
        dense_guard(basis.n())?;
        let coeffs = basis
            .elements()
            .iter()
            .map(|e| {
                let (terms, k) = e.terms();
                terms[..k].iter().map(|&(s, w)| s.trace_with(m) * w).sum()
            })
            .collect();
        Ok(Self { basis, coeffs })
    }
}

/// p_s of a coefficient vector over `basis`.
pub fn size_distribution(basis: &PauliBasis, coeffs: &[C64]) -> Result<Vec<f64>> {
    let mut p = vec![0.0; basis.n() + 1];
    for (e, c) in basis.elements().iter().zip(coeffs) {
        p[e.size()] += c.norm_sqr();
    }
    let total: f64 = p.iter().sum();
    if total == 0.0 {
        return Err(Error::ZeroNorm);
    }
    p.iter_mut().for_each(|x| *x /= total);
    Ok(p)
}

/// Operator written as a sum of raw Pauli strings.
#[derive(Clone, Debug, Default)]
pub struct PauliSum {
    pub terms: Vec<(PauliString, C64)>,
}

impl PauliSum {
    /// Expands a dense 2^N × 2^N matrix; coefficients below `tol·max|c|` are dropped.
    pub fn from_dense(m: &CMat, n: usize, tol: f64) -> Result<Self> {
        dense_guard(n)?;
        let d = 1usize << n;
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: m.nrows() });
        }
        let scale = 1.0 / d as f64;
        let all: Vec<(PauliString, C64)> = (0..1u64 << (2 * n))
            .map(|code| {
                let s = PauliString::new(n, code);
                (s, s.trace_with(m) * scale)
            })
            .collect();
        let cut = tol * all.iter().map(|(_, c)| c.norm()).fold(0.0, f64::max);
        Ok(Self { terms: all.into_iter().filter(|(_, c)| c.norm() > cut).collect() })
    }

    pub fn to_dense(&self, n: usize) -> Result<CMat> {
        dense_guard(n)?;
        let d = 1usize << n;
        let mut m = Mat::zeros(d, d);
        for &(s, c) in &self.terms {
            s.add_to_dense(&mut m, c);
        }
        Ok(m)
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Product as a new sum with merged terms.
    pub fn mul(&self, other: &Self) -> Self {
        let mut acc: std::collections::BTreeMap<PauliString, C64> = Default::default();
        for &(a, ca) in &self.terms {
            for &(b, cb) in &other.terms {
                let (p, k) = a.mul(&b);
                *acc.entry(p).or_insert(ZERO) += ca * cb * i_pow(k);
            }
        }
        Self { terms: acc.into_iter().filter(|(_, c)| *c != ZERO).collect() }
    }

    pub fn adjoint(&self) -> Self {
        Self { terms: self.terms.iter().map(|&(s, c)| (s, c.conj())).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hs_inner, max_abs_diff};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_matrix(d: usize, seed: u64, hermitian: bool) -> CMat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = || -> f64 { StandardNormal.sample(&mut rng) };
        let a = Mat::from_fn(d, d, |_, _| C64::new(g(), g()));
        if hermitian {
            Mat::from_fn(d, d, |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5)
        } else {
            a
        }
    }

    #[test]
    fn sizes_of_examples() {
        assert_eq!("IXZI".parse::<PauliString>().unwrap().size(), 2);
        assert_eq!("IIII".parse::<PauliString>().unwrap().size(), 0);
        assert_eq!("XYZX".parse::<PauliString>().unwrap().size(), 4);
    }

    #[test]
    fn display_round_trips() {
        let s: PauliString = "XIYZ".parse().unwrap();
        assert_eq!(s.to_string(), "XIYZ");
        assert_eq!(s.reflect().to_string(), "ZYIX");
        assert!("Q".parse::<PauliString>().is_err());
    }

    // brute force: a string is a representative iff it is <= its reflection
    fn brute_even_count(n: usize) -> usize {
        (0..1u64 << (2 * n))
            .filter(|&c| {
                let s = PauliString::new(n, c);
                s.reflect().code() >= c
            })
            .count()
    }

    #[test]
    fn symmetric_dimension_matches_enumeration() {
        for n in 1..=6 {
            let b = PauliBasis::new(n, BasisKind::SymmetricEven).unwrap();
            assert_eq!(b.dim(), symmetric_dimension(n));
            assert_eq!(b.dim(), brute_even_count(n));
        }
        assert_eq!(symmetric_dimension(1), 4);
        assert_eq!(symmetric_dimension(2), 10);
        assert_eq!(symmetric_dimension(3), 40);
        assert_eq!(symmetric_dimension(7), 8320);
    }

    #[test]
    fn even_and_odd_sectors_split_full_space() {
        for n in 1..=5 {
            let e = PauliBasis::new(n, BasisKind::SymmetricEven).unwrap();
            let o = PauliBasis::new(n, BasisKind::SymmetricOdd).unwrap();
            assert_eq!(e.dim() + o.dim(), 1 << (2 * n));
        }
    }

    #[test]
    fn sector_counts() {
        assert_eq!(sector_size_count(3, 2, BasisKind::Full), 27);
        for n in 1..=5 {
            assert_eq!(sector_size_count(n, 0, BasisKind::Full), 1);
            assert_eq!(sector_size_count(n, 0, BasisKind::SymmetricEven), 1);
            let b = PauliBasis::new(n, BasisKind::Full).unwrap();
            for s in 0..=n {
                assert_eq!(b.sector_count(s), sector_size_count(n, s, BasisKind::Full));
            }
        }
        assert_eq!(sector_size_count(2, 1, BasisKind::SymmetricEven), 3);
    }

    #[test]
    fn basis_is_orthonormal_and_reflection_even() {
        for n in 1..=3 {
            let b = PauliBasis::new(n, BasisKind::SymmetricEven).unwrap();
            let dense: Vec<CMat> = (0..b.dim()).map(|i| b.element_dense(i).unwrap()).collect();
            let d = 1usize << n;
            let r = Mat::from_fn(d, d, |i, j| {
                let rev = (0..n).fold(0usize, |acc, k| acc | (((j >> k) & 1) << (n - 1 - k)));
                if i == rev { C64::new(1.0, 0.0) } else { ZERO }
            });
            for (i, fi) in dense.iter().enumerate() {
                for (j, fj) in dense.iter().enumerate() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((hs_inner(fi, fj) - want).norm() < 1e-12);
                }
                let conj = &(&r * fi) * &r;
                assert!(max_abs_diff(&conj, fi) < 1e-14);
            }
        }
    }

    #[test]
    fn lexicographic_order_identity_first() {
        let b = PauliBasis::new(3, BasisKind::SymmetricEven).unwrap();
        assert_eq!(b.element(0).representative.to_string(), "III");
        let codes: Vec<u64> = b.elements().iter().map(|e| e.representative.code()).collect();
        assert!(codes.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn vectorize_identity_single_site() {
        let b = PauliBasis::full(1).unwrap();
        let v = OperatorVector::vectorize(b, &crate::linalg::identity(2)).unwrap();
        assert!((v.coeffs()[0] - C64::new(2f64.sqrt(), 0.0)).norm() < 1e-15);
        assert!(v.coeffs()[1..].iter().all(|c| c.norm() < 1e-15));
        // ⟨I|σx⟩ = 0
        let x = PauliString::single(1, 0, 1).dense().unwrap();
        assert_eq!(hs_inner(&crate::linalg::identity(2), &x), ZERO);
    }

    #[test]
    fn dense_round_trip_full_and_symmetric() {
        let n = 3;
        let m = random_matrix(8, 3, true);
        let full = PauliBasis::full(n).unwrap();
        let v = OperatorVector::vectorize(full, &m).unwrap();
        assert!(max_abs_diff(&v.to_dense().unwrap(), &m) < 1e-12);
        assert!((v.norm_sqr() - hs_inner(&m, &m).re).abs() < 1e-10);

        // symmetrize with the reflection, then the symmetric basis is exact
        let sym = PauliBasis::symmetric(n).unwrap();
        let mv = OperatorVector::vectorize(sym.clone(), &m).unwrap();
        let ms = mv.to_dense().unwrap();
        let back = OperatorVector::vectorize(sym, &ms).unwrap();
        for (a, b) in back.coeffs().iter().zip(mv.coeffs()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn size_distribution_examples() {
        let b = PauliBasis::full(3).unwrap();
        let x1 = OperatorVector::from_strings(b.clone(), &[(PauliString::single(3, 0, 1), C64::new(1.0, 0.0))]).unwrap();
        assert_eq!(x1.size_distribution().unwrap(), vec![0.0, 1.0, 0.0, 0.0]);
        let id = OperatorVector::from_strings(b.clone(), &[(PauliString::identity(3), C64::new(1.0, 0.0))]).unwrap();
        assert_eq!(id.size_distribution().unwrap()[0], 1.0);
        assert!(matches!(OperatorVector::zeros(b).size_distribution(), Err(Error::ZeroNorm)));
    }

    #[test]
    fn random_coefficients_follow_sector_counts() {
        let n = 3;
        let b = PauliBasis::full(n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut mean = vec![0.0; n + 1];
        let draws = 100;
        for _ in 0..draws {
            let c: Vec<C64> = (0..b.dim())
                .map(|_| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
                .collect();
            let p = size_distribution(&b, &c).unwrap();
            mean.iter_mut().zip(p).for_each(|(m, x)| *m += x / draws as f64);
        }
        for s in 0..=n {
            let expect = sector_size_count(n, s, BasisKind::Full) as f64 / 64.0;
            assert!((mean[s] - expect).abs() < 0.02, "s={s}: {} vs {expect}", mean[s]);
        }
    }

    #[test]
    fn pauli_sum_round_trip() {
        let m = random_matrix(8, 5, false);
        let s = PauliSum::from_dense(&m, 3, 0.0).unwrap();
        assert!(max_abs_diff(&s.to_dense(3).unwrap(), &m) < 1e-12);
    }

    #[test]
    fn dense_guard_trips() {
        assert!(matches!(PauliString::identity(13).dense(), Err(Error::ResourceGuard { .. })));
    }

    fn pauli_strategy(n: usize) -> impl Strategy<Value = PauliString> {
        (0..1u64 << (2 * n)).prop_map(move |c| PauliString::new(n, c))
    }

    proptest! {
        #[test]
        fn product_matches_dense(a in pauli_strategy(3), b in pauli_strategy(3)) {
            let (p, k) = a.mul(&b);
            let lhs = &a.dense().unwrap() * &b.dense().unwrap();
            let rhs = crate::linalg::scale(&p.dense().unwrap(), i_pow(k));
            prop_assert!(max_abs_diff(&lhs, &rhs) < 1e-14);
            let ab = &a.dense().unwrap() * &b.dense().unwrap();
            let ba = &b.dense().unwrap() * &a.dense().unwrap();
            prop_assert_eq!(a.commutes(&b), max_abs_diff(&ab, &ba) < 1e-12);
        }

        #[test]
        fn reflection_is_involution(a in pauli_strategy(5)) {
            prop_assert_eq!(a.reflect().reflect(), a);
            prop_assert_eq!(a.reflect().size(), a.size());
        }

        #[test]
        fn completeness_on_symmetric_space(seed in 0u64..1000) {
            let n = 3;
            let b = PauliBasis::symmetric(n).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c: Vec<C64> = (0..b.dim())
                .map(|_| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
                .collect();
            let v = OperatorVector::new(b.clone(), c).unwrap();
            let m = v.to_dense().unwrap();
            prop_assert!((hs_inner(&m, &m).re - v.norm_sqr()).abs() < 1e-10 * v.norm_sqr());
            let p = v.size_distribution().unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
