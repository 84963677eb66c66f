//! `temperature-study`: collinearity and terminal error across temperatures.

use std::path::Path;

use itokit::process::ProcessSpec;
use itokit::sampler::{collinearity_diag, run_reverse, ReverseConfig};
use serde::Serialize;

use crate::config::Resolved;
use crate::error::{CliError, CliResult};
use crate::metrics::{average, terminal_metrics};
use crate::output::{float, opt_float, write_csv, write_json};

#[derive(Debug, Clone, Serialize)]
pub struct TemperatureRow {
    pub method: String,
    pub tau: f64,
    pub w1: f64,
    pub mean_error: f64,
    pub terminal_var: Option<f64>,
    pub var_ratio: Option<f64>,
    /// Mean |cosine| over the last third of the grid.
    pub tail_abs_cos: Option<f64>,
    pub excluded: usize,
    pub mean_cos: Vec<Option<f64>>,
}

pub fn study(r: &Resolved) -> CliResult<Vec<TemperatureRow>> {
    let cfg = ReverseConfig { grid: r.temperature_grid.clone(), ..r.reverse.clone() };
    let mut rows = Vec::new();
    for &method in &r.temperature_methods {
        for &tau in &r.temperature_taus {
            let spec = ProcessSpec { tau, ..ProcessSpec::original(method) };
            spec.validate().map_err(|e| CliError::at("temperature", e))?;
            let field = super::score_field(r, spec)?;
            let batch = run_reverse(&spec, field.as_ref(), &cfg, &r.y, r.n_paths, r.seed)?;
            let metrics = terminal_metrics(&r.world, &r.y, &batch, r.seed)?;
            let col = collinearity_diag(&batch, field.as_ref(), &spec, &r.y)?;
            rows.push(TemperatureRow {
                method: method.to_string(),
                tau,
                w1: average(&metrics, |m| Some(m.w1)).unwrap(),
                mean_error: average(&metrics, |m| Some(m.mean_error)).unwrap(),
                terminal_var: average(&metrics, |m| m.var),
                var_ratio: average(&metrics, |m| m.var_ratio),
                tail_abs_cos: col.tail_abs_mean(),
                excluded: col.excluded,
                mean_cos: col.mean_cos,
            });
        }
    }
    Ok(rows)
}

pub fn run(r: &Resolved, out: &Path) -> CliResult<()> {
    let rows = study(r)?;
    let sampler = r.reverse.kind.name();
    let summary: Vec<Vec<String>> = rows
        .iter()
        .map(|row| {
            vec![
                row.method.clone(),
                float(row.tau),
                sampler.to_string(),
                float(row.w1),
                float(row.mean_error),
                opt_float(row.terminal_var),
                opt_float(row.var_ratio),
                opt_float(row.tail_abs_cos),
                row.excluded.to_string(),
            ]
        })
        .collect();
    write_csv(
        &out.join("temperature.csv"),
        &["method", "tau", "sampler", "w1", "mean_error", "terminal_var", "var_ratio", "tail_abs_cos", "excluded"],
        &summary,
    )?;
    let times = r.temperature_grid.times();
    let mut series = Vec::new();
    for row in &rows {
        for (k, (t, c)) in times.iter().zip(&row.mean_cos).enumerate() {
            series.push(vec![row.method.clone(), float(row.tau), k.to_string(), float(*t), opt_float(*c)]);
        }
    }
    write_csv(&out.join("temperature_series.csv"), &["method", "tau", "step", "t", "mean_cos"], &series)?;
    #[derive(Serialize)]
    struct Payload<'a> {
        sampler: &'a str,
        times: &'a [f64],
        rows: &'a [TemperatureRow],
    }
    write_json(&out.join("temperature.json"), "temperature-study", r, Payload { sampler, times, rows: &rows })
}
