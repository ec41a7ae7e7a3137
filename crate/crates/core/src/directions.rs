//! Trait direction sets and their on-disk formats.
//!
//! Two formats are supported:
//!
//! - **json**: `{ "dim": D, "traits": [{ "name": .., "vector": [..] }], "meta": {..} }`
//! - **raw**: a 16-byte header (`"TGV1"`, `C: u32le`, `D: u32le`, 4 zero bytes)
//!   followed by `C·D` little-endian `f32` values in row-major order. Trait
//!   names live in a sidecar `{path}.names.json` holding an ordered string list.
//!
//! Values are always held as `f64` in memory; the raw format promotes on load.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::fsutil::write_atomic;
use crate::rng::stream;
use crate::{Error, Result};

/// Canonical trait order used by every matrix and report.
pub const OCEAN: [&str; 5] = [
    "Openness",
    "Conscientiousness",
    "Extraversion",
    "Agreeableness",
    "Neuroticism",
];

const RAW_MAGIC: &[u8; 4] = b"TGV1";
const RAW_HEADER_LEN: usize = 16;
const NORM_TOLERANCE: f64 = 1e-9;
const ZERO_NORM: f64 = 1e-12;

/// Resolves a trait label to its canonical OCEAN index. Accepts full names,
/// three-letter abbreviations (case-insensitive) and bare indices.
pub fn trait_index(label: &str) -> Option<usize> {
    let label = label.trim();
    if let Ok(i) = label.parse::<usize>() {
        return Some(i);
    }
    let lower = label.to_ascii_lowercase();
    OCEAN.iter().position(|name| {
        name.to_ascii_lowercase() == lower || trait_abbrev(name).to_ascii_lowercase() == lower
    })
}

/// Short label used in summaries, e.g. `Neu`.
pub fn trait_abbrev(name: &str) -> String {
    match name {
        "Openness" => "Opn".into(),
        "Conscientiousness" => "Con".into(),
        "Extraversion" => "Ext".into(),
        "Agreeableness" => "Agr".into(),
        "Neuroticism" => "Neu".into(),
        other => other.chars().take(3).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    Json,
    Raw,
}

impl FileFormat {
    /// `.json` is JSON; everything else is treated as raw.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => FileFormat::Json,
            _ => FileFormat::Raw,
        }
    }
}

impl std::str::FromStr for FileFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(FileFormat::Json),
            "raw" => Ok(FileFormat::Raw),
            other => Err(Error::InvalidParameter(format!("unknown format `{other}`"))),
        }
    }
}

/// A labelled stack of per-trait steering directions, one row per trait.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionSet {
    trait_names: Vec<String>,
    vectors: DMatrix<f64>,
    source_meta: Value,
    normalized: bool,
}

impl DirectionSet {
    /// Validates shape and finiteness. The `normalized` flag is set when every
    /// row norm is within 1e-9 of one.
    pub fn new(trait_names: Vec<String>, vectors: DMatrix<f64>, source_meta: Value) -> Result<Self> {
        let (c, d) = vectors.shape();
        if c == 0 || d == 0 {
            return Err(Error::DimensionMismatch(format!("empty direction set ({c}x{d})")));
        }
        if c > d {
            return Err(Error::DimensionMismatch(format!(
                "{c} traits exceed dimension {d}"
            )));
        }
        if trait_names.len() != c {
            return Err(Error::DimensionMismatch(format!(
                "{} trait names for {c} rows",
                trait_names.len()
            )));
        }
        for i in 0..c {
            for j in 0..d {
                if !vectors[(i, j)].is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        let normalized = vectors
            .row_iter()
            .all(|r| (r.norm() - 1.0).abs() <= NORM_TOLERANCE);
        Ok(Self {
            trait_names,
            vectors,
            source_meta,
            normalized,
        })
    }

    /// Builds a set from row slices, naming traits in OCEAN order when
    /// `c ≤ 5` and `T{i}` otherwise.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let c = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::DimensionMismatch(format!(
                "row {bad} has length {}, expected {d}",
                rows[bad].len()
            )));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(default_names(c), DMatrix::from_row_slice(c, d, &flat), Value::Null)
    }

    pub fn trait_names(&self) -> &[String] {
        &self.trait_names
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn source_meta(&self) -> &Value {
        &self.source_meta
    }

    pub fn trait_count(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.vectors.row(i).iter().copied().collect()
    }

    pub fn with_meta(mut self, meta: Value) -> Self {
        self.source_meta = meta;
        self
    }

    /// Same labels and metadata, new vectors (re-validated).
    pub fn with_vectors(&self, vectors: DMatrix<f64>) -> Result<Self> {
        Self::new(self.trait_names.clone(), vectors, self.source_meta.clone())
    }

    /// Rows reordered so that output row `k` is input row `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        crate::conditioning::check_permutation(perm, self.trait_count())?;
        let rows: Vec<_> = perm.iter().map(|&i| self.vectors.row(i)).collect();
        let names = perm.iter().map(|&i| self.trait_names[i].clone()).collect();
        Self::new(names, DMatrix::from_rows(&rows), self.source_meta.clone())
    }
}

pub(crate) fn default_names(c: usize) -> Vec<String> {
    if c <= OCEAN.len() {
        OCEAN[..c].iter().map(|s| s.to_string()).collect()
    } else {
        (0..c).map(|i| format!("T{i}")).collect()
    }
}

/// `c` Gaussian rows in `d` dimensions, unit-normalized. Deterministic in
/// `seed`.
pub fn random_direction_set(c: usize, d: usize, seed: u64) -> Result<DirectionSet> {
    let mut rng = stream(seed, "random-set", &[c as u64, d as u64]);
    let flat: Vec<f64> = (0..c * d).map(|_| rng.sample(StandardNormal)).collect();
    let set = DirectionSet::new(default_names(c), DMatrix::from_row_slice(c, d, &flat), Value::Null)?;
    normalize_rows(&set)
}

/// Scales each row to unit Euclidean norm.
pub fn normalize_rows(set: &DirectionSet) -> Result<DirectionSet> {
    let mut v = set.vectors.clone();
    for (i, mut row) in v.row_iter_mut().enumerate() {
        let n = row.norm();
        if n < ZERO_NORM {
            return Err(Error::ZeroVector(format!(
                "row {i} ({}) has norm {n:e}",
                set.trait_names[i]
            )));
        }
        row /= n;
    }
    let mut out = set.with_vectors(v)?;
    out.normalized = true;
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct JsonTrait {
    name: String,
    vector: Vec<Value>,
}

#[derive(Serialize, Deserialize)]
struct JsonSet {
    dim: usize,
    traits: Vec<JsonTrait>,
    #[serde(default)]
    meta: Value,
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".names.json");
    PathBuf::from(s)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn load_direction_set(path: &Path, format: FileFormat) -> Result<DirectionSet> {
    let bytes = read(path)?;
    match format {
        FileFormat::Json => parse_json(&bytes),
        FileFormat::Raw => {
            let names_path = sidecar_path(path);
            let names: Vec<String> = serde_json::from_slice(&read(&names_path)?)
                .map_err(|e| Error::Parse(format!("{}: {e}", names_path.display())))?;
            parse_raw(&bytes, names)
        }
    }
}

fn json_number(v: &Value, row: usize, col: usize) -> Result<f64> {
    match v {
        Value::Number(n) => n
            .as_f64()
            .ok_or_else(|| Error::Parse(format!("trait {row}: bad number at {col}"))),
        Value::String(s) => match s.trim().parse::<f64>() {
            Ok(x) if !x.is_finite() => Err(Error::NonFinite { row, col }),
            _ => Err(Error::Parse(format!("trait {row}: string entry {s:?} at {col}"))),
        },
        other => Err(Error::Parse(format!("trait {row}: unexpected {other} at {col}"))),
    }
}

pub fn parse_json(bytes: &[u8]) -> Result<DirectionSet> {
    let parsed: JsonSet = match serde_json::from_slice(bytes) {
        Ok(p) => p,
        Err(e) => {
            // Bare NaN / Infinity tokens are not JSON, but they mean a
            // non-finite vector rather than a garbled file.
            let text = String::from_utf8_lossy(bytes);
            let re = regex::Regex::new(r"[\[,:]\s*-?(NaN|Infinity|inf)\s*[,\]}]").unwrap();
            if re.is_match(&text) {
                return Err(Error::NonFinite { row: 0, col: 0 });
            }
            return Err(Error::Parse(e.to_string()));
        }
    };
    if parsed.traits.is_empty() {
        return Err(Error::Parse("no traits".into()));
    }
    let d = parsed.dim;
    let c = parsed.traits.len();
    let mut flat = Vec::with_capacity(c * d);
    let mut names = Vec::with_capacity(c);
    for (i, t) in parsed.traits.iter().enumerate() {
        if t.vector.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "trait {} has {} entries, dim is {d}",
                t.name,
                t.vector.len()
            )));
        }
        for (j, v) in t.vector.iter().enumerate() {
            flat.push(json_number(v, i, j)?);
        }
        names.push(t.name.clone());
    }
    DirectionSet::new(names, DMatrix::from_row_slice(c, d, &flat), parsed.meta)
}

pub fn parse_raw(bytes: &[u8], names: Vec<String>) -> Result<DirectionSet> {
    if bytes.len() < RAW_HEADER_LEN || &bytes[..4] != RAW_MAGIC {
        return Err(Error::Parse("missing TGV1 header".into()));
    }
    let c = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = &bytes[RAW_HEADER_LEN..];
    if body.len() != c * d * 4 {
        return Err(Error::Parse(format!(
            "payload is {} bytes, header declares {c}x{d} f32",
            body.len()
        )));
    }
    if names.len() != c {
        return Err(Error::DimensionMismatch(format!(
            "{} names in sidecar for {c} rows",
            names.len()
        )));
    }
    let flat: Vec<f64> = body
        .chunks_exact(4)
        .map(|b| f64::from(f32::from_le_bytes(b.try_into().unwrap())))
        .collect();
    DirectionSet::new(names, DMatrix::from_row_slice(c, d, &flat), Value::Null)
}

pub fn to_json(set: &DirectionSet) -> Result<Vec<u8>> {
    let traits = set
        .trait_names
        .iter()
        .enumerate()
        .map(|(i, name)| JsonTrait {
            name: name.clone(),
            vector: set
                .vectors
                .row(i)
                .iter()
                .map(|&x| Value::from(x))
                .collect(),
        })
        .collect();
    let doc = JsonSet {
        dim: set.dim(),
        traits,
        meta: match &set.source_meta {
            Value::Null => Value::Object(Default::default()),
            m => m.clone(),
        },
    };
    let mut out = serde_json::to_vec_pretty(&doc).map_err(|e| Error::Parse(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

pub fn to_raw(set: &DirectionSet) -> Vec<u8> {
    let (c, d) = set.vectors.shape();
    let mut out = Vec::with_capacity(RAW_HEADER_LEN + c * d * 4);
    out.extend_from_slice(RAW_MAGIC);
    out.extend_from_slice(&(c as u32).to_le_bytes());
    out.extend_from_slice(&(d as u32).to_le_bytes());
    out.extend_from_slice(&[0u8; 4]);
    for i in 0..c {
        for j in 0..d {
            out.extend_from_slice(&(set.vectors[(i, j)] as f32).to_le_bytes());
        }
    }
    out
}

/// Writes `set` to `path`. Raw files also get their `.names.json` sidecar.
pub fn save_direction_set(set: &DirectionSet, path: &Path, format: FileFormat) -> Result<()> {
    match format {
        FileFormat::Json => write_atomic(path, &to_json(set)?),
        FileFormat::Raw => {
            write_atomic(path, &to_raw(set))?;
            let names = serde_json::to_vec(&set.trait_names).map_err(|e| Error::Parse(e.to_string()))?;
            write_atomic(&sidecar_path(path), &names)
        }
    }
}
