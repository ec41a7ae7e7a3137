use traitgeo::diagnostics::{diagnose, to_csv_string};
use traitgeo::directions::save_direction_set;
use traitgeo::{apply_condition, FileFormat};

use super::{build_spec, load_normalized, write_file};
use crate::args::ConditionArgs;
use crate::CliResult;

pub fn run(a: &ConditionArgs) -> CliResult<()> {
    let original = load_normalized(&a.input, a.format)?;
    let spec = build_spec(a.scheme, &a.params, original.trait_count())?;
    let conditioned = apply_condition(&original, &spec)?;
    let out_format = a.format.unwrap_or_else(|| FileFormat::from_path(&a.out));
    save_direction_set(&conditioned.directions, &a.out, out_format)?;
    let csv = to_csv_string(&[diagnose(&original, &conditioned)?]);
    if let Some(path) = &a.diag {
        write_file(path, csv.as_bytes())?;
    }
    print!("{csv}");
    Ok(())
}
