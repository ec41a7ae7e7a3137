use traitgeo::contrast::{extract_t_bmax, write_summary_csv};
use traitgeo::diagnostics::{diagnose, to_csv_string};
use traitgeo::directions::to_json;
use traitgeo::steersim::{estimate_directions_diff_means, make_world, simulate_bleed};
use traitgeo::{apply_condition, WorldConfig};

use super::{build_spec, matrix_csv_sig6, render, write_file};
use crate::args::SimulateArgs;
use crate::{usage, CliResult};

fn parse_layers(raw: &Option<String>, layer_count: usize) -> CliResult<Vec<usize>> {
    match raw {
        None => Ok((0..layer_count).collect()),
        Some(s) => s
            .split(',')
            .map(|l| {
                l.trim()
                    .parse::<usize>()
                    .map_err(|_| usage(format!("--layers: bad layer `{}`", l.trim())))
            })
            .collect(),
    }
}

pub fn run(a: &SimulateArgs) -> CliResult<()> {
    let bytes = std::fs::read(&a.world).map_err(|e| traitgeo::Error::Io { path: a.world.clone(), source: e })?;
    let mut config = WorldConfig::from_json(&bytes)?;
    config.seed = a.seed;
    if !(a.intensity.is_finite() && a.intensity >= 0.0) {
        return Err(usage(format!("--intensity {} must be finite and non-negative", a.intensity)));
    }
    let layers = parse_layers(&a.layers, config.layer_count)?;
    let world = make_world(config)?;
    let c = world.config.trait_count;
    let spec = build_spec(a.scheme, &a.params, c)?;

    let estimate = estimate_directions_diff_means(&world, a.n_per_level, &layers)?;
    let conditioned = apply_condition(&estimate.directions, &spec)?;
    let contrast = simulate_bleed(&world, &conditioned, a.intensity)?;
    let summary = extract_t_bmax(&contrast)?;
    let names = estimate.directions.trait_names().to_vec();

    std::fs::create_dir_all(&a.out_dir)
        .map_err(|e| traitgeo::Error::Io { path: a.out_dir.clone(), source: e })?;
    let out = |name: &str| a.out_dir.join(name);
    write_file(&out("estimated.json"), &to_json(&estimate.directions)?)?;
    write_file(&out("directions.json"), &to_json(&conditioned.directions)?)?;
    write_file(&out("contrast.csv"), &matrix_csv_sig6(&names, |t, m| contrast.values[(t, m)]))?;
    let summary_csv = render(|b| write_summary_csv(&summary, &names, b));
    write_file(&out("summary.csv"), &summary_csv)?;
    let diagnostics = to_csv_string(&[diagnose(&estimate.directions, &conditioned)?]);
    write_file(&out("diagnostics.csv"), diagnostics.as_bytes())?;
    print!("{}", String::from_utf8_lossy(&summary_csv));
    Ok(())
}
