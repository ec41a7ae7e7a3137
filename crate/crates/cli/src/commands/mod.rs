use std::path::Path;

use traitgeo::conditioning::{Scheme, DEFAULT_BETA, DEFAULT_TAU};
use traitgeo::directions::{load_direction_set, normalize_rows, trait_index};
use traitgeo::fsutil::write_atomic;
use traitgeo::{ConditioningSpec, DirectionSet, FileFormat};

use crate::args::SchemeParams;
use crate::{usage, CliResult};

pub mod condition;
pub mod contrast;
pub mod diagnose;
pub mod judge;
pub mod simulate;

pub(crate) fn parse_order(raw: &str, trait_count: usize) -> CliResult<Vec<usize>> {
    raw.split(',')
        .map(|label| {
            trait_index(label)
                .filter(|&i| i < trait_count)
                .ok_or_else(|| usage(format!("--order: unknown trait `{}`", label.trim())))
        })
        .collect()
}

/// Builds the spec for `scheme`, rejecting flags the scheme does not use.
pub(crate) fn build_spec(scheme: Scheme, p: &SchemeParams, trait_count: usize) -> CliResult<ConditioningSpec> {
    let uses_tau = matches!(scheme, Scheme::C3 | Scheme::C4);
    let uses_order = matches!(scheme, Scheme::C2 | Scheme::C3 | Scheme::C4);
    if p.gamma.is_some() && scheme != Scheme::C1 {
        return Err(usage(format!("--gamma does not apply to {scheme}")));
    }
    if p.tau.is_some() && !uses_tau {
        return Err(usage(format!("--tau does not apply to {scheme}")));
    }
    if p.beta.is_some() && scheme != Scheme::C4 {
        return Err(usage(format!("--beta does not apply to {scheme}")));
    }
    if p.order.is_some() && !uses_order {
        return Err(usage(format!("--order does not apply to {scheme}")));
    }
    let order = p.order.as_deref().map(|o| parse_order(o, trait_count)).transpose()?;
    let tau = p.tau.unwrap_or(DEFAULT_TAU);
    let spec = match scheme {
        Scheme::C0 => ConditioningSpec::c0(),
        Scheme::C1 => ConditioningSpec::c1(p.gamma.ok_or_else(|| usage("scheme C1 requires --gamma"))?),
        Scheme::C2 => ConditioningSpec::c2(order),
        Scheme::C3 => ConditioningSpec::c3(tau, order),
        Scheme::C4 => ConditioningSpec::c4(p.beta.unwrap_or(DEFAULT_BETA), tau, order),
        Scheme::C5 => ConditioningSpec::c5(),
    };
    spec.validate(Some(trait_count))?;
    Ok(spec)
}

/// Loads a direction set and unit-normalizes its rows.
pub(crate) fn load_normalized(path: &Path, format: Option<FileFormat>) -> CliResult<DirectionSet> {
    let format = format.unwrap_or_else(|| FileFormat::from_path(path));
    Ok(normalize_rows(&load_direction_set(path, format)?)?)
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    Ok(write_atomic(path, bytes)?)
}

pub(crate) fn names(trait_count: usize) -> Vec<String> {
    if trait_count <= traitgeo::OCEAN.len() {
        traitgeo::OCEAN[..trait_count].iter().map(|s| s.to_string()).collect()
    } else {
        (0..trait_count).map(|i| format!("T{i}")).collect()
    }
}

/// Renders into a byte buffer with one of the core CSV writers.
pub(crate) fn render(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to a Vec cannot fail");
    buf
}

/// Square matrix CSV with six significant digits per cell.
pub(crate) fn matrix_csv_sig6(names: &[String], cell: impl Fn(usize, usize) -> f64) -> Vec<u8> {
    use std::io::Write;
    render(|b| {
        writeln!(b, "target,{}", names.join(","))?;
        for (t, name) in names.iter().enumerate() {
            let cells: Vec<String> = (0..names.len()).map(|m| traitgeo::diagnostics::sig6(cell(t, m))).collect();
            writeln!(b, "{name},{}", cells.join(","))?;
        }
        Ok(())
    })
}
