//! One module per CLI verb. Each `run` writes its files into `out`.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use itokit::nnscore::Mlp;
use itokit::process::ProcessSpec;
use itokit::score::ScoreField;
use itokit::toyworld::MarginalScoreField;

use crate::config::Resolved;
use crate::error::{CliError, CliResult};

pub mod sample;
pub mod sweep;
pub mod temperature;
pub mod train;
pub mod validate;

pub fn load_weights(path: &Path) -> CliResult<Mlp> {
    let f = File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Mlp::read_from(BufReader::new(f)).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Score used for sampling `spec`: the trained network when the config
/// names weights, the world's analytic marginal score otherwise.
pub fn score_field(r: &Resolved, spec: ProcessSpec) -> CliResult<Box<dyn ScoreField>> {
    match &r.weights {
        None => Ok(Box::new(MarginalScoreField { world: r.world.clone(), spec })),
        Some(path) => {
            let net = load_weights(path)?;
            if net.dim() != r.y.len() {
                return Err(CliError::at(
                    "weights",
                    format!("network has dimension {}, y has {}", net.dim(), r.y.len()),
                ));
            }
            let mut train = r.train.clone();
            train.spec = spec;
            Ok(Box::new(train.field(net)))
        }
    }
}
