//! High−Low contrast matrices over judge scores.
//!
//! Rows index the steered (targeted) trait, columns the measured trait; each
//! entry is `mean(positive) − mean(negative)` on the 1–5 judge scale. The
//! diagonal is the target contrast `T`, and the largest-magnitude
//! off-diagonal entry of a row is that trait's bleed `B_max`.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::diagnostics::sig6;
use crate::directions::{trait_index, OCEAN};
use crate::{Error, Result};

pub const RECORDS_HEADER: [&str; 8] = [
    "condition",
    "model_tag",
    "target_trait",
    "polarity",
    "measured_trait",
    "score",
    "fluency",
    "generation_id",
];

const SCORE_MIN: f64 = 1.0;
const SCORE_MAX: f64 = 5.0;
const CONTRAST_BOUND: f64 = SCORE_MAX - SCORE_MIN;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Base,
    Positive,
    Negative,
}

impl Polarity {
    pub fn flipped(self) -> Self {
        match self {
            Polarity::Base => Polarity::Base,
            Polarity::Positive => Polarity::Negative,
            Polarity::Negative => Polarity::Positive,
        }
    }

    /// Injection sign: `+1`, `−1`, or `0` for base.
    pub fn sign(self) -> f64 {
        match self {
            Polarity::Base => 0.0,
            Polarity::Positive => 1.0,
            Polarity::Negative => -1.0,
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarity::Base => "base",
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
        })
    }
}

impl FromStr for Polarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "base" => Ok(Polarity::Base),
            "positive" | "pos" | "high" => Ok(Polarity::Positive),
            "negative" | "neg" | "low" => Ok(Polarity::Negative),
            other => Err(Error::Parse(format!("unknown polarity `{other}`"))),
        }
    }
}

/// One judge verdict: the score of `measured_trait` in a generation steered
/// towards `target_trait` with the given polarity.
#[derive(Debug, Clone, PartialEq)]
pub struct JudgeScoreRecord {
    pub condition: String,
    pub model_tag: String,
    pub target_trait: usize,
    pub polarity: Polarity,
    pub measured_trait: usize,
    pub score: f64,
    pub fluency: Option<f64>,
    pub generation_id: String,
}

fn check_scale(x: f64) -> Result<f64> {
    if (SCORE_MIN..=SCORE_MAX).contains(&x) {
        Ok(x)
    } else {
        Err(Error::ScaleViolation(x))
    }
}

fn parse_trait(label: &str) -> Result<usize> {
    trait_index(label).ok_or_else(|| Error::Parse(format!("unknown trait `{label}`")))
}

fn trait_label(i: usize) -> String {
    OCEAN.get(i).map_or_else(|| i.to_string(), |s| s.to_string())
}

pub fn read_records_csv<R: Read>(input: R) -> Result<Vec<JudgeScoreRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("records CSV lacks column `{name}`")))
    };
    let idx: Vec<usize> = RECORDS_HEADER.iter().map(|h| col(h)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (line, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| Error::Parse(e.to_string()))?;
        let field = |k: usize| row.get(idx[k]).unwrap_or("");
        let number = |k: usize| {
            field(k).parse::<f64>().map_err(|_| {
                Error::Parse(format!("row {}: bad {} `{}`", line + 1, RECORDS_HEADER[k], field(k)))
            })
        };
        let fluency = if field(6).is_empty() {
            None
        } else {
            Some(check_scale(number(6)?)?)
        };
        out.push(JudgeScoreRecord {
            condition: field(0).to_string(),
            model_tag: field(1).to_string(),
            target_trait: parse_trait(field(2))?,
            polarity: field(3).parse()?,
            measured_trait: parse_trait(field(4))?,
            score: check_scale(number(5)?)?,
            fluency,
            generation_id: field(7).to_string(),
        });
    }
    Ok(out)
}

pub fn write_records_csv<W: Write>(records: &[JudgeScoreRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(RECORDS_HEADER).map_err(err)?;
    for r in records {
        w.write_record([
            r.condition.clone(),
            r.model_tag.clone(),
            trait_label(r.target_trait),
            r.polarity.to_string(),
            trait_label(r.measured_trait),
            r.score.to_string(),
            r.fluency.map(|f| f.to_string()).unwrap_or_default(),
            r.generation_id.clone(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(())
}

/// Streaming mean/variance accumulator that merges by count weight, so
/// partitioned reductions agree with a single pass.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CellStats {
    pub n: usize,
    pub mean: f64,
    m2: f64,
}

impl CellStats {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&self, other: &CellStats) -> CellStats {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.n as f64 / n as f64;
        let m2 = self.m2 + other.m2 + delta * delta * (self.n * other.n) as f64 / n as f64;
        CellStats { n, mean, m2 }
    }

    /// Unbiased sample variance; zero for a single observation.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastMatrix {
    /// `values[(target, measured)] = mean(positive) − mean(negative)`.
    pub values: DMatrix<f64>,
    /// Positive plus negative sample count per cell.
    pub counts: DMatrix<usize>,
    /// Sampling variance of each contrast, `s²₊/n₊ + s²₋/n₋`.
    pub variance: DMatrix<f64>,
}

impl ContrastMatrix {
    /// Wraps a precomputed square matrix (e.g. a fixture), one
    /// sample per cell.
    pub fn from_values(values: DMatrix<f64>) -> Result<Self> {
        if !values.is_square() {
            return Err(Error::ShapeMismatch(format!(
                "contrast matrix must be square, got {:?}",
                values.shape()
            )));
        }
        if let Some(bad) = values
            .iter()
            .find(|v| !v.is_finite() || v.abs() > CONTRAST_BOUND)
        {
            return Err(Error::ScaleViolation(*bad));
        }
        let c = values.nrows();
        Ok(Self {
            values,
            counts: DMatrix::from_element(c, c, 1),
            variance: DMatrix::zeros(c, c),
        })
    }

    pub fn from_rows(rows: &[[f64; 5]]) -> Result<Self> {
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_values(DMatrix::from_row_slice(rows.len(), 5, &flat))
    }

    pub fn trait_count(&self) -> usize {
        self.values.nrows()
    }

    pub fn negated(&self) -> Self {
        Self {
            values: -self.values.clone(),
            ..self.clone()
        }
    }
}

/// Builds the High−Low matrix for one `(condition, model_tag)` pair. Base
/// records are ignored.
pub fn contrast_matrix(
    records: &[JudgeScoreRecord],
    condition: &str,
    model_tag: &str,
    trait_count: usize,
) -> Result<ContrastMatrix> {
    let c = trait_count;
    let mut pos = vec![CellStats::default(); c * c];
    let mut neg = vec![CellStats::default(); c * c];
    for r in records
        .iter()
        .filter(|r| r.condition == condition && r.model_tag == model_tag)
    {
        check_scale(r.score)?;
        if r.target_trait >= c || r.measured_trait >= c {
            return Err(Error::ShapeMismatch(format!(
                "record {} references trait index >= {c}",
                r.generation_id
            )));
        }
        let cell = r.target_trait * c + r.measured_trait;
        match r.polarity {
            Polarity::Positive => pos[cell].push(r.score),
            Polarity::Negative => neg[cell].push(r.score),
            Polarity::Base => {}
        }
    }
    let mut values = DMatrix::zeros(c, c);
    let mut counts = DMatrix::zeros(c, c);
    let mut variance = DMatrix::zeros(c, c);
    for t in 0..c {
        for m in 0..c {
            let (p, n) = (pos[t * c + m], neg[t * c + m]);
            let missing = match (p.n, n.n) {
                (0, 0) => Some("positive and negative"),
                (0, _) => Some("positive"),
                (_, 0) => Some("negative"),
                _ => None,
            };
            if let Some(what) = missing {
                return Err(Error::MissingCell(format!(
                    "{condition}/{model_tag}: target {}, measured {} has no {what} records",
                    trait_label(t),
                    trait_label(m)
                )));
            }
            values[(t, m)] = p.mean - n.mean;
            counts[(t, m)] = p.n + n.n;
            variance[(t, m)] = p.variance() / p.n as f64 + n.variance() / n.n as f64;
        }
    }
    Ok(ContrastMatrix {
        values,
        counts,
        variance,
    })
}

/// Distinct `(condition, model_tag)` pairs in first-seen order.
pub fn groups(records: &[JudgeScoreRecord]) -> Vec<(String, String)> {
    let mut seen = HashSet::new();
    records
        .iter()
        .filter_map(|r| {
            let key = (r.condition.clone(), r.model_tag.clone());
            seen.insert(key.clone()).then_some(key)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraitSummaryRow {
    pub target: usize,
    pub t: f64,
    pub b_max: f64,
    pub blame: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraitContrastSummary {
    pub rows: Vec<TraitSummaryRow>,
}

/// Per row: `T` is the diagonal; `B_max` is the signed off-diagonal entry of
/// largest magnitude, ties going to the later trait in canonical order.
pub fn extract_t_bmax(matrix: &ContrastMatrix) -> Result<TraitContrastSummary> {
    let c = matrix.trait_count();
    if c < 2 {
        return Err(Error::TooFewTraits(c));
    }
    let v = &matrix.values;
    let rows = (0..c)
        .map(|t| {
            let mut blame = usize::MAX;
            for m in (0..c).filter(|&m| m != t) {
                if blame == usize::MAX || v[(t, m)].abs() >= v[(t, blame)].abs() {
                    blame = m;
                }
            }
            TraitSummaryRow {
                target: t,
                t: v[(t, t)],
                b_max: v[(t, blame)],
                blame,
            }
        })
        .collect();
    Ok(TraitContrastSummary { rows })
}

/// Rounds half away from zero to one decimal.
pub fn round_for_report(x: f64) -> f64 {
    // Snap away binary noise so that e.g. 2.75 lands exactly on the half.
    let scaled = ((x * 10.0) * 1e9).round() / 1e9;
    scaled.round() / 10.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluencyRow {
    pub condition: String,
    pub target: usize,
    pub polarity: Polarity,
    pub mean: f64,
    pub n: usize,
}

/// Mean fluency per targeted trait and polarity for one condition. A
/// generation scored on several traits is counted once.
pub fn fluency_profile(records: &[JudgeScoreRecord], condition: &str) -> Result<Vec<FluencyRow>> {
    let mut cells: BTreeMap<(usize, Polarity), CellStats> = BTreeMap::new();
    let mut seen: HashSet<(usize, Polarity, &str)> = HashSet::new();
    for r in records.iter().filter(|r| r.condition == condition) {
        let Some(f) = r.fluency else { continue };
        if !r.generation_id.is_empty() && !seen.insert((r.target_trait, r.polarity, &r.generation_id)) {
            continue;
        }
        cells.entry((r.target_trait, r.polarity)).or_default().push(f);
    }
    if cells.is_empty() {
        return Err(Error::NoFluencyData);
    }
    Ok(cells
        .into_iter()
        .map(|((target, polarity), s)| FluencyRow {
            condition: condition.to_string(),
            target,
            polarity,
            mean: s.mean,
            n: s.n,
        })
        .collect())
}

fn fmt2(x: f64) -> String {
    let s = format!("{x:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

/// `target,<trait names...>` header then one row per targeted trait.
pub fn write_matrix_csv<W: Write>(matrix: &ContrastMatrix, names: &[String], mut out: W) -> std::io::Result<()> {
    writeln!(out, "target,{}", names.join(","))?;
    for (t, name) in names.iter().enumerate() {
        let cells: Vec<String> = (0..names.len()).map(|m| fmt2(matrix.values[(t, m)])).collect();
        writeln!(out, "{name},{}", cells.join(","))?;
    }
    Ok(())
}

pub fn read_matrix_csv<R: Read>(input: R) -> Result<(Vec<String>, ContrastMatrix)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    let names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let c = names.len();
    let mut flat = Vec::with_capacity(c * c);
    let mut rows = 0;
    for row in rdr.records() {
        let row = row.map_err(|e| Error::Parse(e.to_string()))?;
        if row.len() != c + 1 {
            return Err(Error::ShapeMismatch(format!("matrix row has {} cells", row.len() - 1)));
        }
        for cell in row.iter().skip(1) {
            flat.push(cell.parse::<f64>().map_err(|_| Error::Parse(format!("bad cell `{cell}`")))?);
        }
        rows += 1;
    }
    if rows != c {
        return Err(Error::ShapeMismatch(format!("{rows} rows for {c} columns")));
    }
    Ok((names, ContrastMatrix::from_values(DMatrix::from_row_slice(c, c, &flat))?))
}

pub fn write_summary_csv<W: Write>(
    summary: &TraitContrastSummary,
    names: &[String],
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "target,T,B_max,blame")?;
    for r in &summary.rows {
        writeln!(out, "{},{},{},{}", names[r.target], sig6(r.t), sig6(r.b_max), names[r.blame])?;
    }
    Ok(())
}

pub fn write_fluency_csv<W: Write>(rows: &[FluencyRow], names: &[String], mut out: W) -> std::io::Result<()> {
    writeln!(out, "condition,target,polarity,mean_fluency,n")?;
    for r in rows {
        let name = names.get(r.target).cloned().unwrap_or_else(|| r.target.to_string());
        writeln!(out, "{},{},{},{},{}", r.condition, name, r.polarity, sig6(r.mean), r.n)?;
    }
    Ok(())
}
