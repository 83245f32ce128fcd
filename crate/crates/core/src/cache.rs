//! On-disk cache of superoperators and decompositions.
//!
//! One directory per model hash holding `manifest.json` plus binary arrays.
//! Array layout (little endian):
//!
//! ```text
//! magic  b"LLAB"
//! u32    format version (1)
//! u32    dtype tag (1 = complex128 as (re, im) f64 pairs)
//! u32    ndim
//! u64    dims[ndim]
//! body   row-major elements
//! ```

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};
use crate::models::ModelSpec;
use crate::pauli::{BasisKind, PauliBasis};
use crate::spectral::{SpectralDecomposition, RESIDUAL_TOL, STEADY_TOL};
use crate::superop::{SuperBasis, SuperOperator, LEAKAGE_TOL};

pub const MAGIC: &[u8; 4] = b"LLAB";
pub const FORMAT_VERSION: u32 = 1;
pub const DTYPE_COMPLEX128: u32 = 1;

/// Convention tags folded into every model hash.
pub const CONVENTIONS: &[(&str, &str)] = &[
    ("vectorization", "row-major vec[i*D+j] = A[i,j]"),
    ("pauli-order", "I,X,Y,Z = 0..3, site 0 most significant"),
    ("basis-normalization", "Tr(F_m^dagger F_n) = delta_mn"),
    ("eigen-order", "Re descending, then Im ascending"),
];

pub fn write_array(path: &Path, dims: &[u64], data: &[C64]) -> Result<()> {
    let expected: u64 = dims.iter().product();
    if expected != data.len() as u64 {
        return Err(Error::DimensionMismatch { expected: expected as usize, found: data.len() });
    }
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&DTYPE_COMPLEX128.to_le_bytes())?;
    w.write_all(&(dims.len() as u32).to_le_bytes())?;
    for d in dims {
        w.write_all(&d.to_le_bytes())?;
    }
    for z in data {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_array(path: &Path) -> Result<(Vec<u64>, Vec<C64>)> {
    let mut r = BufReader::new(fs::File::open(path)?);
    let bad = |m: &str| Error::Cache(format!("{}: {m}", path.display()));
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("bad magic"));
    }
    let mut u32buf = [0u8; 4];
    let mut read_u32 = |r: &mut BufReader<fs::File>| -> Result<u32> {
        r.read_exact(&mut u32buf)?;
        Ok(u32::from_le_bytes(u32buf))
    };
    if read_u32(&mut r)? != FORMAT_VERSION {
        return Err(bad("unsupported format version"));
    }
    if read_u32(&mut r)? != DTYPE_COMPLEX128 {
        return Err(bad("unsupported dtype"));
    }
    let ndim = read_u32(&mut r)? as usize;
    let mut dims = Vec::with_capacity(ndim);
    let mut u64buf = [0u8; 8];
    for _ in 0..ndim {
        r.read_exact(&mut u64buf)?;
        dims.push(u64::from_le_bytes(u64buf));
    }
    let len = dims.iter().product::<u64>() as usize;
    let mut raw = Vec::with_capacity(len * 16);
    r.read_to_end(&mut raw)?;
    if raw.len() != len * 16 {
        return Err(bad("truncated body"));
    }
    let data = raw
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            C64::new(re, im)
        })
        .collect();
    Ok((dims, data))
}

pub fn write_matrix(path: &Path, m: &CMat) -> Result<()> {
    let data: Vec<C64> = (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)])).collect();
    write_array(path, &[m.nrows() as u64, m.ncols() as u64], &data)
}

pub fn read_matrix(path: &Path) -> Result<CMat> {
    let (dims, data) = read_array(path)?;
    let [r, c] = dims[..] else {
        return Err(Error::Cache(format!("{}: expected a 2-d array", path.display())));
    };
    let (r, c) = (r as usize, c as usize);
    Ok(CMat::from_fn(r, c, |i, j| data[i * c + j]))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

/// Stable hash of a model, its basis and the storage conventions.
pub fn model_hash(spec: &ModelSpec, basis_tag: &str) -> String {
    let body = serde_json::json!({
        "spec": spec,
        "basis": basis_tag,
        "conventions": CONVENTIONS,
        "format": FORMAT_VERSION,
    });
    sha256_hex(body.to_string().as_bytes())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CacheManifest {
    pub model_hash: String,
    pub spec: ModelSpec,
    pub basis: String,
    pub dim: usize,
    pub conventions: Vec<(String, String)>,
    pub tolerances: Vec<(String, f64)>,
    /// File name and sha256 of every array.
    pub files: Vec<(String, String)>,
    pub scale: Option<f64>,
}

pub fn basis_from_tag(tag: &str, n: usize) -> Result<SuperBasis> {
    Ok(match tag {
        "full-row-vectorized" => SuperBasis::Vectorized { n },
        "symmetric-even-pauli" => SuperBasis::Pauli(PauliBasis::new(n, BasisKind::SymmetricEven)?.into()),
        "symmetric-odd-pauli" => SuperBasis::Pauli(PauliBasis::new(n, BasisKind::SymmetricOdd)?.into()),
        "full-pauli" => SuperBasis::Pauli(PauliBasis::full(n)?),
        other => return Err(Error::Cache(format!("unknown basis tag {other:?}"))),
    })
}

/// Cache rooted at a directory; entries are keyed by model hash.
#[derive(Clone, Debug)]
pub struct Cache {
    root: PathBuf,
}

impl Cache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn entry_dir(&self, hash: &str) -> PathBuf {
        self.root.join(hash)
    }

    fn read_manifest(&self, hash: &str) -> Option<CacheManifest> {
        let text = fs::read_to_string(self.entry_dir(hash).join("manifest.json")).ok()?;
        serde_json::from_str(&text).ok()
    }

    fn write_entry(&self, spec: &ModelSpec, basis: &SuperBasis, dim: usize, scale: Option<f64>, arrays: &[(&str, &dyn Fn(&Path) -> Result<()>)]) -> Result<()> {
        let hash = model_hash(spec, basis.tag());
        let dir = self.entry_dir(&hash);
        fs::create_dir_all(&dir)?;
        let mut manifest = self.read_manifest(&hash).unwrap_or(CacheManifest {
            model_hash: hash.clone(),
            spec: spec.clone(),
            basis: basis.tag().into(),
            dim,
            conventions: CONVENTIONS.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
            tolerances: vec![
                ("symmetry-leakage".into(), LEAKAGE_TOL),
                ("eigen-residual".into(), RESIDUAL_TOL),
                ("steady-state".into(), STEADY_TOL),
            ],
            files: Vec::new(),
            scale: None,
        });
        for (name, write) in arrays {
            let path = dir.join(name);
            write(&path)?;
            let h = sha256_file(&path)?;
            manifest.files.retain(|(f, _)| f != name);
            manifest.files.push((name.to_string(), h));
        }
        if scale.is_some() {
            manifest.scale = scale;
        }
        let tmp = dir.join("manifest.json.tmp");
        fs::write(&tmp, serde_json::to_string_pretty(&manifest)?)?;
        fs::rename(tmp, dir.join("manifest.json"))?;
        Ok(())
    }

    fn verified(&self, hash: &str, names: &[&str]) -> Option<CacheManifest> {
        let manifest = self.read_manifest(hash)?;
        let dir = self.entry_dir(hash);
        for name in names {
            let (_, want) = manifest.files.iter().find(|(f, _)| f == name)?;
            if sha256_file(&dir.join(name)).ok()? != *want {
                return None;
            }
        }
        Some(manifest)
    }

    pub fn store_superop(&self, l: &SuperOperator) -> Result<()> {
        let spec = l.spec().ok_or_else(|| Error::Cache("superoperator without a model spec".into()))?;
        let write = |p: &Path| write_matrix(p, l.matrix());
        self.write_entry(spec, l.basis(), l.dim(), None, &[("superop.bin", &write)])
    }

    pub fn load_superop(&self, spec: &ModelSpec, basis_tag: &str) -> Result<Option<SuperOperator>> {
        let hash = model_hash(spec, basis_tag);
        let Some(m) = self.verified(&hash, &["superop.bin"]) else { return Ok(None) };
        let matrix = read_matrix(&self.entry_dir(&hash).join("superop.bin"))?;
        let basis = basis_from_tag(&m.basis, spec.n())?;
        Ok(Some(SuperOperator::new(matrix, basis, Some(spec.clone()))?))
    }

    pub fn store_decomposition(&self, spec: &ModelSpec, dec: &SpectralDecomposition) -> Result<()> {
        let basis = dec.basis().ok_or_else(|| Error::Cache("decomposition without a basis".into()))?;
        let d = dec.dim() as u64;
        let eig = |p: &Path| write_array(p, &[d], dec.eigenvalues());
        let alpha = |p: &Path| write_array(p, &[d], dec.alpha());
        let right = |p: &Path| write_matrix(p, dec.right());
        let left = |p: &Path| write_matrix(p, dec.left());
        self.write_entry(
            spec,
            basis,
            dec.dim(),
            Some(dec.scale()),
            &[("eigenvalues.bin", &eig), ("alpha.bin", &alpha), ("right.bin", &right), ("left.bin", &left)],
        )
    }

    pub fn load_decomposition(&self, spec: &ModelSpec, basis_tag: &str) -> Result<Option<SpectralDecomposition>> {
        let hash = model_hash(spec, basis_tag);
        let names = ["eigenvalues.bin", "alpha.bin", "right.bin", "left.bin"];
        let Some(m) = self.verified(&hash, &names) else { return Ok(None) };
        let dir = self.entry_dir(&hash);
        let (_, eig) = read_array(&dir.join(names[0]))?;
        let (_, alpha) = read_array(&dir.join(names[1]))?;
        let right = read_matrix(&dir.join(names[2]))?;
        let left = read_matrix(&dir.join(names[3]))?;
        let basis = basis_from_tag(&m.basis, spec.n())?;
        Ok(Some(SpectralDecomposition::from_parts(eig, right, left, alpha, Some(basis), m.scale.unwrap_or(f64::NAN))?))
    }
}
