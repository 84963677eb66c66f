//! `train`: fits the x0 network and writes weights, checkpoint and loss curve.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::time::Instant;

use itokit::nnscore::{TrainCheckpoint, Trainer};
use itokit::score::Parameterization;
use serde::Serialize;

use crate::config::Resolved;
use crate::error::{CliError, CliResult};
use crate::output::{float, write_csv, write_json, write_with};

#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary {
    pub start_step: usize,
    pub end_step: usize,
    pub final_loss: Option<f64>,
    pub parameters: usize,
    pub diverged: bool,
}

fn load_checkpoint(path: &Path) -> CliResult<TrainCheckpoint> {
    let f = File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    TrainCheckpoint::read_from(BufReader::new(f)).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn run(r: &Resolved, out: &Path) -> CliResult<()> {
    if r.parameterization != Parameterization::X0Pred {
        return Err(CliError::at("parameterization", "training regresses x0; use X0Pred"));
    }
    let mut trainer = match &r.resume {
        None => Trainer::new(r.train.clone())?,
        Some(resume) => {
            let net = super::load_weights(&resume.weights)?;
            let ck = load_checkpoint(&resume.checkpoint)?;
            Trainer::resume(r.train.clone(), net, ck.step, ck.state).map_err(|e| CliError::at("train.resume", e))?
        }
    };
    let start_step = trainer.step_index();
    let started = Instant::now();
    let mut curve: Vec<(usize, f64)> = Vec::new();
    let log_every = (r.train.steps / 20).max(1);
    let result = trainer.run(|k, loss| {
        curve.push((k, loss));
        if (k + 1) % log_every == 0 {
            tracing::info!(step = k + 1, loss, "training");
        }
    });
    tracing::info!(seconds = started.elapsed().as_secs_f64(), steps = curve.len(), "training finished");

    // whatever happened, keep the last good snapshot
    write_with(&out.join("weights.bin"), |w| trainer.net().write_to(w))?;
    write_with(&out.join("checkpoint.bin"), |w| trainer.checkpoint().write_to(w))?;
    let rows: Vec<Vec<String>> = curve.iter().map(|&(k, l)| vec![k.to_string(), float(l)]).collect();
    write_csv(&out.join("curve.csv"), &["step", "loss"], &rows)?;
    let summary = TrainSummary {
        start_step,
        end_step: trainer.step_index(),
        final_loss: curve.last().map(|c| c.1),
        parameters: trainer.net().params().len(),
        diverged: result.is_err(),
    };
    write_json(&out.join("train.json"), "train", r, summary)?;
    result.map_err(CliError::from)
}
