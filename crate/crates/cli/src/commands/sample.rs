//! `sample`: reverse trajectories plus terminal metrics.

use std::path::Path;

use itokit::sampler::{collinearity_diag, run_reverse, CollinearityReport, TrajectoryMeta};
use serde::Serialize;

use crate::config::Resolved;
use crate::error::CliResult;
use crate::metrics::{terminal_metrics, CoordinateMetrics};
use crate::output::{write_json, write_with};

#[derive(Debug, Clone, Serialize)]
pub struct SampleMetrics {
    pub provenance: &'static str,
    pub coordinates: Vec<CoordinateMetrics>,
    pub collinearity: CollinearityReport,
}

pub fn run(r: &Resolved, out: &Path) -> CliResult<()> {
    let field = super::score_field(r, r.spec)?;
    let batch = run_reverse(&r.spec, field.as_ref(), &r.reverse, &r.y, r.n_paths, r.seed)?;
    write_with(&out.join("trajectories.csv"), |w| batch.write_csv(w, Some(r.save_paths)))?;
    #[derive(Serialize)]
    struct Sidecar {
        trajectories: TrajectoryMeta,
        saved_paths: usize,
    }
    write_json(
        &out.join("trajectories.json"),
        "sample",
        r,
        Sidecar { trajectories: batch.meta(), saved_paths: r.save_paths.min(batch.n_paths) },
    )?;
    if batch.is_empty() {
        return Ok(());
    }
    let metrics = SampleMetrics {
        provenance: if r.weights.is_some() { "learned" } else { "analytic" },
        coordinates: terminal_metrics(&r.world, &r.y, &batch, r.seed)?,
        collinearity: collinearity_diag(&batch, field.as_ref(), &r.spec, &r.y)?,
    };
    write_json(&out.join("metrics.json"), "sample", r, metrics)
}
