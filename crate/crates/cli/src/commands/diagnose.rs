use traitgeo::conditioning::Scheme;
use traitgeo::diagnostics::{diagnostics_report, to_csv_string};
use traitgeo::apply_condition;

use super::{build_spec, load_normalized, write_file};
use crate::args::{DiagnoseArgs, SchemeParams};
use crate::{usage, CliResult};

/// Each scheme only receives the parameters it uses.
fn params_for(scheme: Scheme, p: &SchemeParams) -> SchemeParams {
    SchemeParams {
        gamma: p.gamma.filter(|_| scheme == Scheme::C1),
        tau: p.tau.filter(|_| matches!(scheme, Scheme::C3 | Scheme::C4)),
        beta: p.beta.filter(|_| scheme == Scheme::C4),
        order: p
            .order
            .clone()
            .filter(|_| matches!(scheme, Scheme::C2 | Scheme::C3 | Scheme::C4)),
    }
}

pub fn run(a: &DiagnoseArgs) -> CliResult<()> {
    let schemes = a
        .schemes
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<Scheme>().map_err(|e| usage(e.to_string())))
        .collect::<CliResult<Vec<_>>>()?;
    if schemes.is_empty() {
        return Err(usage("--schemes is empty"));
    }
    let original = load_normalized(&a.input, a.format)?;
    let c = original.trait_count();
    let conditioned = schemes
        .iter()
        .map(|&s| {
            let spec = build_spec(s, &params_for(s, &a.params), c)?;
            Ok(apply_condition(&original, &spec)?)
        })
        .collect::<CliResult<Vec<_>>>()?;
    let csv = to_csv_string(&diagnostics_report(&original, &conditioned)?);
    match &a.out {
        Some(path) => write_file(path, csv.as_bytes()),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}
