//! Unified forward/reverse SDE toolkit for diffusion models and diffusion
//! bridges: schedulers, method definitions, score parameterisations,
//! samplers, an analytic toy world, brute-force oracles and a small learned
//! score model.

pub mod error;
pub mod nnscore;
pub mod oracle;
pub mod process;
pub mod rng;
pub mod sampler;
pub mod sched;
pub mod score;
pub mod toyworld;

pub use error::{Error, Result};
pub use process::{BaseDist, Family, KernelCoeffs, MethodKind, ProcessSpec};
pub use sampler::{GridKind, GridSpec, ReverseConfig, SamplerKind, TimeGrid, TrajectoryBatch};
pub use sched::Scheduler;
pub use score::{Parameterization, ScoreField};
pub use toyworld::ToyWorld;
