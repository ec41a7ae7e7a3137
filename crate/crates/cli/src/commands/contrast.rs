use std::fs::File;
use std::io::Write;

use traitgeo::contrast::{
    contrast_matrix, extract_t_bmax, fluency_profile, groups, read_records_csv, write_fluency_csv,
    write_matrix_csv, write_summary_csv,
};

use super::{matrix_csv_sig6, names, render, write_file};
use crate::args::ContrastArgs;
use crate::{usage, CliResult};

fn pick(
    flag: &str,
    given: &Option<String>,
    available: impl Iterator<Item = String>,
) -> CliResult<String> {
    if let Some(v) = given {
        return Ok(v.clone());
    }
    let mut seen: Vec<String> = Vec::new();
    for v in available {
        if !seen.contains(&v) {
            seen.push(v);
        }
    }
    match seen.as_slice() {
        [one] => Ok(one.clone()),
        [] => Err(usage("records file holds no records")),
        many => Err(usage(format!("--{flag} is required; file holds {}", many.join(", ")))),
    }
}

pub fn run(a: &ContrastArgs) -> CliResult<()> {
    let file = File::open(&a.records)
        .map_err(|e| traitgeo::Error::Io { path: a.records.clone(), source: e })?;
    let records = read_records_csv(file)?;
    let pairs = groups(&records);
    let condition = pick("condition", &a.condition, pairs.iter().map(|(c, _)| c.clone()))?;
    let model = pick(
        "model",
        &a.model,
        pairs.iter().filter(|(c, _)| *c == condition).map(|(_, m)| m.clone()),
    )?;
    let names = names(a.traits);
    let matrix = contrast_matrix(&records, &condition, &model, a.traits)?;
    let summary = extract_t_bmax(&matrix)?;

    // Fluency is validated before anything is written.
    let fluency = match &a.fluency {
        Some(_) => Some(fluency_profile(&records, &condition)?),
        None => None,
    };
    if let Some(path) = &a.out {
        write_file(path, &render(|b| write_matrix_csv(&matrix, &names, b)))?;
    }
    if let (Some(path), Some(rows)) = (&a.fluency, &fluency) {
        write_file(path, &render(|b| write_fluency_csv(rows, &names, b)))?;
    }
    if let Some(path) = &a.variance_out {
        let bytes = matrix_csv_sig6(&names, |t, m| matrix.variance[(t, m)]);
        write_file(path, &bytes)?;
    }
    let summary_csv = render(|b| write_summary_csv(&summary, &names, b));
    match &a.summary {
        Some(path) => write_file(path, &summary_csv)?,
        None => std::io::stdout()
            .write_all(&summary_csv)
            .map_err(|e| usage(format!("stdout: {e}")))?,
    }
    Ok(())
}
