//! Overlap and retention diagnostics for conditioned direction sets.

use std::io::Write;

use crate::conditioning::{ConditionedSet, ConditioningSpec};
use crate::directions::DirectionSet;
use crate::linalg::{dot, norm};
use crate::{Error, Result};

pub const CSV_HEADER: &str = "scheme,params,max_offdiag_abs_cos,retention_min,retention_max";

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryDiagnostics {
    pub scheme: ConditioningSpec,
    pub max_offdiag_abs_cos: f64,
    /// Signed cosine between each original row and its conditioned row.
    pub retention: Vec<f64>,
    pub retention_min: f64,
    pub retention_max: f64,
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    (dot(a, b) / (norm(a) * norm(b))).clamp(-1.0, 1.0)
}

/// Largest `|cos|` between distinct rows. Rows are normalized on the fly.
pub fn max_offdiag_abs_cos(set: &DirectionSet) -> Result<f64> {
    let c = set.trait_count();
    if c < 2 {
        return Err(Error::TooFewTraits(c));
    }
    let rows: Vec<Vec<f64>> = (0..c).map(|i| set.row(i)).collect();
    let mut worst = 0.0_f64;
    for i in 0..c {
        for j in (i + 1)..c {
            worst = worst.max(cosine(&rows[i], &rows[j]).abs());
        }
    }
    Ok(worst)
}

pub fn signal_retention(original: &DirectionSet, conditioned: &ConditionedSet) -> Result<Vec<f64>> {
    let after = &conditioned.directions;
    if original.trait_count() != after.trait_count() || original.dim() != after.dim() {
        return Err(Error::ShapeMismatch(format!(
            "original is {}x{}, conditioned is {}x{}",
            original.trait_count(),
            original.dim(),
            after.trait_count(),
            after.dim()
        )));
    }
    if original.trait_names() != after.trait_names() {
        return Err(Error::ShapeMismatch("trait order differs".into()));
    }
    Ok((0..original.trait_count())
        .map(|i| cosine(&original.row(i), &after.row(i)))
        .collect())
}

pub fn diagnose(original: &DirectionSet, conditioned: &ConditionedSet) -> Result<GeometryDiagnostics> {
    let retention = signal_retention(original, conditioned)?;
    let retention_min = retention.iter().copied().fold(f64::INFINITY, f64::min);
    let retention_max = retention.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(GeometryDiagnostics {
        scheme: conditioned.spec.clone(),
        max_offdiag_abs_cos: max_offdiag_abs_cos(&conditioned.directions)?,
        retention,
        retention_min,
        retention_max,
    })
}

/// One diagnostics row per conditioned set, in the order given.
pub fn diagnostics_report(
    original: &DirectionSet,
    conditioned: &[ConditionedSet],
) -> Result<Vec<GeometryDiagnostics>> {
    conditioned.iter().map(|c| diagnose(original, c)).collect()
}

/// Formats `x` with six significant digits, dropping trailing zeros.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{}", if x == 0.0 { 0.0 } else { x });
    }
    let rounded: f64 = format!("{x:.5e}").parse().expect("formatted float");
    format!("{rounded}")
}

pub fn write_csv<W: Write>(rows: &[GeometryDiagnostics], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.scheme.scheme,
            r.scheme.params_label(),
            sig6(r.max_offdiag_abs_cos),
            sig6(r.retention_min),
            sig6(r.retention_max)
        )?;
    }
    Ok(())
}

pub fn to_csv_string(rows: &[GeometryDiagnostics]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("ascii output")
}
