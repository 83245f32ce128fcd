//! Tabulated random-model realizations and named initial operators.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;

/// Built-in copy of `fixtures/realizations.txt`.
pub const BUILTIN_REALIZATIONS: &str = include_str!("../fixtures/realizations.txt");

/// Named initial operators understood by the dynamics layer.
pub const NAMED_OPERATORS: &[(&str, &str)] = &[
    (
        "figs-init-op",
        "centre-site operator 0.459 X + 0.681 Y + 0.571 Z, split over the two middle sites for even N, unit norm",
    ),
    ("rand-init-op", "centre-site operator with standard-normal X, Y, Z coefficients drawn from the operator seed, unit norm"),
];

/// Coefficients of one random local model draw.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomRealization {
    pub q: [f64; 3],
    pub r: [[f64; 3]; 3],
    pub k: [C64; 3],
    pub d: [[C64; 3]; 3],
}

/// Realizations keyed by seed.
#[derive(Clone, Debug, Default)]
pub struct RealizationTable {
    entries: BTreeMap<u64, RandomRealization>,
}

impl RealizationTable {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_REALIZATIONS).expect("built-in fixture table is well formed")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Built-ins plus every `*.txt` file found in `dir` (later files win).
    pub fn with_custom_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let mut table = Self::builtin();
        let dir = dir.as_ref();
        if dir.is_dir() {
            let mut files: Vec<_> = std::fs::read_dir(dir)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "txt"))
                .collect();
            files.sort();
            for f in files {
                table.entries.extend(Self::load(f)?.entries);
            }
        }
        Ok(table)
    }

    pub fn get(&self, seed: u64) -> Result<&RandomRealization> {
        self.entries.get(&seed).ok_or(Error::MissingSeed(seed))
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.entries.keys().copied().collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut current: Option<(u64, usize, Partial)> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse { line: line_no, msg };
            if let Some(rest) = line.strip_prefix('[') {
                if let Some((seed, start, p)) = current.take() {
                    entries.insert(seed, p.finish(seed, start)?);
                }
                let body = rest.strip_suffix(']').ok_or_else(|| err("unterminated header".into()))?;
                let seed = body
                    .strip_prefix("seed")
                    .map(str::trim)
                    .and_then(|s| s.parse::<u64>().ok())
                    .ok_or_else(|| err(format!("bad header {line:?}")))?;
                current = Some((seed, line_no, Partial::default()));
                continue;
            }
            let (_, _, partial) = current.as_mut().ok_or_else(|| err("record outside a [seed N] block".into()))?;
            let (key, value) = line.split_once('=').ok_or_else(|| err("expected key = value".into()))?;
            match key.trim() {
                "Q" => partial.q = Some(parse_reals::<3>(value).map_err(err)?),
                "R" => partial.r = Some(parse_rows(value, parse_reals::<3>).map_err(err)?),
                "K" => partial.k = Some(parse_complexes::<3>(value).map_err(err)?),
                "D" => partial.d = Some(parse_rows(value, parse_complexes::<3>).map_err(err)?),
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }
        if let Some((seed, start, p)) = current {
            entries.insert(seed, p.finish(seed, start)?);
        }
        Ok(Self { entries })
    }
}

#[derive(Default)]
struct Partial {
    q: Option<[f64; 3]>,
    r: Option<[[f64; 3]; 3]>,
    k: Option<[C64; 3]>,
    d: Option<[[C64; 3]; 3]>,
}

impl Partial {
    fn finish(self, seed: u64, line: usize) -> Result<RandomRealization> {
        let missing = |name: &str| Error::Parse { line, msg: format!("seed {seed}: missing {name}") };
        Ok(RandomRealization {
            q: self.q.ok_or_else(|| missing("Q"))?,
            r: self.r.ok_or_else(|| missing("R"))?,
            k: self.k.ok_or_else(|| missing("K"))?,
            d: self.d.ok_or_else(|| missing("D"))?,
        })
    }
}

fn parse_rows<T>(value: &str, row: impl Fn(&str) -> Result<[T; 3], String>) -> Result<[[T; 3]; 3], String> {
    let rows: Vec<[T; 3]> = value.split('|').map(row).collect::<Result<_, _>>()?;
    rows.try_into().map_err(|v: Vec<_>| format!("expected 3 rows, found {}", v.len()))
}

fn parse_reals<const K: usize>(value: &str) -> Result<[f64; K], String> {
    let v: Vec<f64> = value
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<Result<_, _>>()?;
    v.try_into().map_err(|v: Vec<_>| format!("expected {K} numbers, found {}", v.len()))
}

fn parse_complexes<const K: usize>(value: &str) -> Result<[C64; K], String> {
    let v: Vec<C64> = value.split_whitespace().map(parse_complex).collect::<Result<_, _>>()?;
    v.try_into().map_err(|v: Vec<_>| format!("expected {K} numbers, found {}", v.len()))
}

/// Parses `a+bi`, `a-bi`, `a` or `bi`.
pub fn parse_complex(token: &str) -> Result<C64, String> {
    let bad = || format!("malformed complex number {token:?}");
    let t = token.trim();
    let Some(body) = t.strip_suffix('i') else {
        return t.parse::<f64>().map(|re| C64::new(re, 0.0)).map_err(|_| bad());
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    match split {
        Some(i) => {
            let re = body[..i].parse::<f64>().map_err(|_| bad())?;
            let im = body[i..].parse::<f64>().map_err(|_| bad())?;
            Ok(C64::new(re, im))
        }
        None => body.parse::<f64>().map(|im| C64::new(0.0, im)).map_err(|_| bad()),
    }
}

/// Formats a complex number as `a+bi`.
pub fn format_complex(c: C64) -> String {
    if c.im.is_sign_negative() {
        format!("{}-{}i", c.re, -c.im)
    } else {
        format!("{}+{}i", c.re, c.im)
    }
}
