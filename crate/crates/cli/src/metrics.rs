//! Terminal-distribution metrics against the exact posterior.

use itokit::oracle::{sample_moments, wasserstein1};
use itokit::rng::{derive_seed, path_stream};
use itokit::sampler::TrajectoryBatch;
use itokit::toyworld::ToyWorld;
use serde::Serialize;

use crate::error::CliResult;

/// Size of the exact-posterior sample W1 is measured against.
pub const REFERENCE_SAMPLES: usize = 1_000_000;

/// Stream id reserved for reference draws.
const REFERENCE_STREAM: u64 = u64::MAX - 2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoordinateMetrics {
    pub y: f64,
    pub w1: f64,
    pub mean: f64,
    /// Absent with fewer than two paths.
    pub var: Option<f64>,
    pub posterior_mean: f64,
    pub posterior_var: f64,
    pub mean_error: f64,
    pub var_ratio: Option<f64>,
}

/// Sample of the exact posterior `p(x0 | y)`.
pub fn posterior_reference(world: &ToyWorld, y: f64, seed: u64) -> Vec<f64> {
    let post = world.posterior(y);
    let mut rng = path_stream(derive_seed(seed, REFERENCE_STREAM), 0);
    (0..REFERENCE_SAMPLES).map(|_| post.sample(&mut rng)).collect()
}

/// Per-coordinate comparison of the terminal states with the posterior.
pub fn terminal_metrics(world: &ToyWorld, y: &[f64], batch: &TrajectoryBatch, seed: u64) -> CliResult<Vec<CoordinateMetrics>> {
    y.iter()
        .enumerate()
        .map(|(c, &yc)| {
            let xs = batch.terminal_coordinate(c);
            let post = world.posterior(yc);
            let w1 = wasserstein1(&xs, &posterior_reference(world, yc, seed))?;
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            let var = if xs.len() > 1 { Some(sample_moments(&xs)?.var) } else { None };
            Ok(CoordinateMetrics {
                y: yc,
                w1,
                mean,
                var,
                posterior_mean: post.mean(),
                posterior_var: post.variance(),
                mean_error: mean - post.mean(),
                var_ratio: var.map(|v| v / post.variance()),
            })
        })
        .collect()
}

/// Coordinate average of one metric, absent if any coordinate lacks it.
pub fn average(metrics: &[CoordinateMetrics], pick: impl Fn(&CoordinateMetrics) -> Option<f64>) -> Option<f64> {
    let sum = metrics.iter().map(pick).sum::<Option<f64>>()?;
    Some(sum / metrics.len() as f64)
}
