//! File writers shared by the commands.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::config::{Resolved, ARTIFACT_VERSION};
use crate::error::{CliError, CliResult};

/// Float with 17 significant digits, enough to round-trip exactly.
pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn opt_float(v: Option<f64>) -> String {
    v.map(float).unwrap_or_default()
}

fn io_at(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

pub fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(io_at(path))
}

/// Writes through `body` into `path`, flushing at the end.
pub fn write_with(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> CliResult<()> {
    let mut w = create(path)?;
    body(&mut w).and_then(|_| w.flush()).map_err(io_at(path))
}

/// CSV table with a header row; fields are written as given.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(create(path)?);
    let err = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(row).map_err(err)?;
    }
    w.flush().map_err(io_at(path))
}

/// JSON document carrying the config echo next to the command's payload.
#[derive(Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub config: &'a crate::config::ExperimentConfig,
    #[serde(flatten)]
    pub payload: T,
}

pub fn write_json<T: Serialize>(path: &Path, command: &'static str, resolved: &Resolved, payload: T) -> CliResult<()> {
    let doc = Envelope {
        version: ARTIFACT_VERSION,
        command,
        seed: resolved.seed,
        config: &resolved.config,
        payload,
    };
    write_with(path, |w| {
        serde_json::to_writer_pretty(&mut *w, &doc).map_err(std::io::Error::other)?;
        writeln!(w)
    })
}
