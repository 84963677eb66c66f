//! `validate-kernels`: closed-form kernels against forward simulation.

use std::path::Path;

use itokit::oracle::{simulate_forward_at, MomentReport, BRIDGE_SIM_T_MAX};
use itokit::rng::derive_seed;
use itokit::sched::Scheduler;
use serde::Serialize;

use crate::config::{Cell, Resolved};
use crate::error::{CliError, CliResult};
use crate::output::{float, write_csv, write_json};

/// Agreement threshold in standard errors.
pub const Z_LIMIT: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, Serialize)]
pub struct CellReport {
    pub method: String,
    pub scheduler: Scheduler,
    pub tau: f64,
    pub gamma: f64,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub reports: Vec<MomentReport>,
}

impl CellReport {
    pub fn label(&self) -> String {
        format!("{}/{}", self.method, self.scheduler.name())
    }

    /// Checkpoints where mean or variance is off by more than the limit.
    pub fn failures(&self) -> Vec<&MomentReport> {
        self.reports.iter().filter(|r| !r.passes(Z_LIMIT)).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidateOutcome {
    pub passed: bool,
    pub cells: Vec<CellReport>,
}

/// Runs every cell. Never fails on a mismatch; see [`ValidateOutcome::passed`].
pub fn run_cells(r: &Resolved) -> CliResult<ValidateOutcome> {
    let v = &r.validate;
    let mut cells = Vec::with_capacity(v.cells.len());
    for (i, cell) in v.cells.iter().enumerate() {
        let report = match cell {
            Cell::Skip { method, sched, reason } => CellReport {
                method: method.to_string(),
                scheduler: *sched,
                tau: method.original_tau(),
                gamma: itokit::process::DEFAULT_GAMMA,
                status: Status::Skipped,
                reason: Some(reason.clone()),
                reports: Vec::new(),
            },
            Cell::Run(spec) => {
                let times: Vec<f64> = if spec.method.is_bridge() {
                    v.times.iter().copied().filter(|&t| t <= BRIDGE_SIM_T_MAX).collect()
                } else {
                    v.times.clone()
                };
                let base = CellReport {
                    method: spec.method.to_string(),
                    scheduler: spec.sched,
                    tau: spec.tau,
                    gamma: spec.gamma,
                    status: Status::Skipped,
                    reason: None,
                    reports: Vec::new(),
                };
                if times.is_empty() {
                    CellReport { reason: Some("no checkpoint inside the bridge range".into()), ..base }
                } else {
                    tracing::info!(cell = %base.label(), "simulating");
                    let seed = derive_seed(r.seed, i as u64);
                    let mut reports = simulate_forward_at(spec, v.x0, v.y, &times, v.n_steps, v.n_paths, seed)?;
                    for rep in reports.iter_mut() {
                        rep.pred_var *= v.variance_scale;
                    }
                    let status = if reports.iter().all(|rep| rep.passes(Z_LIMIT)) { Status::Pass } else { Status::Fail };
                    CellReport { status, reports, ..base }
                }
            }
        };
        cells.push(report);
    }
    let passed = cells.iter().all(|c| c.status != Status::Fail);
    Ok(ValidateOutcome { passed, cells })
}

fn z(gap: f64, se: f64) -> f64 {
    if se > 0.0 {
        gap.abs() / se
    } else if gap == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

pub fn run(r: &Resolved, out: &Path) -> CliResult<()> {
    let outcome = run_cells(r)?;
    let mut rows = Vec::new();
    for c in &outcome.cells {
        if c.reports.is_empty() {
            rows.push(vec![
                c.method.clone(),
                c.scheduler.name().to_string(),
                float(c.tau),
                float(c.gamma),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                "skipped".into(),
            ]);
        }
        for rep in &c.reports {
            rows.push(vec![
                c.method.clone(),
                c.scheduler.name().to_string(),
                float(c.tau),
                float(c.gamma),
                float(rep.t),
                rep.n_paths.to_string(),
                float(rep.emp_mean),
                float(rep.pred_mean),
                float(rep.stderr_mean),
                float(z(rep.emp_mean - rep.pred_mean, rep.stderr_mean)),
                float(rep.emp_var),
                float(rep.pred_var),
                float(rep.stderr_var),
                float(z(rep.emp_var - rep.pred_var, rep.stderr_var)),
                if rep.passes(Z_LIMIT) { "pass" } else { "fail" }.into(),
            ]);
        }
    }
    write_csv(
        &out.join("validate.csv"),
        &[
            "method", "scheduler", "tau", "gamma", "t", "n_paths", "emp_mean", "pred_mean", "stderr_mean",
            "z_mean", "emp_var", "pred_var", "stderr_var", "z_var", "status",
        ],
        &rows,
    )?;
    write_json(&out.join("validate.json"), "validate-kernels", r, &outcome)?;
    if outcome.passed {
        return Ok(());
    }
    let failing: Vec<String> = outcome
        .cells
        .iter()
        .filter(|c| c.status == Status::Fail)
        .map(|c| {
            let times: Vec<String> = c.failures().iter().map(|rep| format!("t={}", rep.t)).collect();
            format!("{} ({})", c.label(), times.join(", "))
        })
        .collect();
    Err(CliError::Numerical(format!("kernel mismatch beyond {Z_LIMIT} standard errors in {}", failing.join("; "))))
}
