//! `sweep`: terminal error for every method x sampler x NFE.

use std::path::Path;

use itokit::process::ProcessSpec;
use itokit::sampler::{default_t_max, run_reverse, ReverseConfig};
use serde::Serialize;

use crate::config::Resolved;
use crate::error::{CliError, CliResult};
use crate::metrics::{average, terminal_metrics};
use crate::output::{opt_float, write_csv, write_json};

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub nfe: usize,
    pub sampler: String,
    pub method: String,
    pub steps: usize,
    pub w1: Option<f64>,
    pub mean_error: Option<f64>,
    pub var_ratio: Option<f64>,
    /// Why the run produced no samples.
    pub error: Option<String>,
}

/// Steps a sampler takes for a budget of `nfe` score evaluations.
pub fn steps_for(nfe: usize, evals_per_step: usize) -> usize {
    nfe.div_ceil(evals_per_step).max(1)
}

pub fn sweep(r: &Resolved) -> CliResult<Vec<SweepRow>> {
    let grid_cfg = r.config.grid.clone().unwrap_or_default();
    let mut rows = Vec::new();
    for &nfe in &r.sweep_nfes {
        for &kind in &r.sweep_samplers {
            for &method in &r.sweep_methods {
                let spec = ProcessSpec::original(method);
                let steps = steps_for(nfe, kind.evals_per_step());
                let grid = grid_cfg.build(steps + 1, default_t_max(&spec))?;
                let cfg = ReverseConfig { grid, kind, lambda: r.reverse.lambda };
                let field = super::score_field(r, spec)?;
                let mut row = SweepRow {
                    nfe,
                    sampler: kind.name().to_string(),
                    method: method.to_string(),
                    steps,
                    w1: None,
                    mean_error: None,
                    var_ratio: None,
                    error: None,
                };
                let outcome = run_reverse(&spec, field.as_ref(), &cfg, &r.y, r.n_paths, r.seed)
                    .map_err(CliError::from)
                    .and_then(|b| terminal_metrics(&r.world, &r.y, &b, r.seed));
                match outcome {
                    Ok(m) => {
                        row.w1 = average(&m, |c| Some(c.w1));
                        row.mean_error = average(&m, |c| Some(c.mean_error));
                        row.var_ratio = average(&m, |c| c.var_ratio);
                    }
                    Err(CliError::Numerical(e)) => row.error = Some(e),
                    Err(other) => return Err(other),
                }
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

pub fn run(r: &Resolved, out: &Path) -> CliResult<()> {
    let rows = sweep(r)?;
    let long: Vec<Vec<String>> = rows
        .iter()
        .map(|row| {
            vec![
                row.nfe.to_string(),
                row.sampler.clone(),
                row.method.clone(),
                row.steps.to_string(),
                opt_float(row.w1),
                opt_float(row.mean_error),
                opt_float(row.var_ratio),
                row.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    write_csv(
        &out.join("sweep.csv"),
        &["nfe", "sampler", "method", "steps", "w1", "mean_error", "var_ratio", "error"],
        &long,
    )?;

    // one row per (nfe, sampler), one W1 column per method
    let methods: Vec<String> = r.sweep_methods.iter().map(|m| m.to_string()).collect();
    let mut header = vec!["nfe".to_string(), "sampler".to_string()];
    header.extend(methods.iter().cloned());
    let table: Vec<Vec<String>> = rows
        .chunks(methods.len())
        .map(|chunk| {
            let mut line = vec![chunk[0].nfe.to_string(), chunk[0].sampler.clone()];
            line.extend(chunk.iter().map(|row| opt_float(row.w1)));
            line
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&out.join("sweep_table.csv"), &header, &table)?;
    #[derive(Serialize)]
    struct Payload<'a> {
        rows: &'a [SweepRow],
    }
    write_json(&out.join("sweep.json"), "sweep", r, Payload { rows: &rows })
}
