//! JSON experiment configuration.
//!
//! Every field is optional. [`ExperimentConfig::resolve`] fills in defaults and
//! checks the result; the filled-in config is what outputs echo, and feeding
//! that echo back in reproduces the run.

use std::path::{Path, PathBuf};

use itokit::nnscore::{
    LossWeight, LrSchedule, Optimizer, TrainConfig, DEFAULT_BATCH, DEFAULT_EMBED_WIDTH, DEFAULT_HIDDEN, DEFAULT_LR,
    DEFAULT_LR_FLOOR, DEFAULT_STEPS,
};
use itokit::process::{MethodKind, ProcessSpec, DEFAULT_GAMMA};
use itokit::sampler::{
    default_t_max, make_grid, GridKind, GridSpec, ReverseConfig, SamplerKind, TimeGrid,
    DEFAULT_RHO, DEFAULT_T_MIN,
};
use itokit::sched::Scheduler;
use itokit::score::Parameterization;
use itokit::toyworld::{Degradation, MixtureModel, ToyWorld};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const ARTIFACT_VERSION: &str = concat!("itokit-cli ", env!("CARGO_PKG_VERSION"));

pub const DEFAULT_METHOD: MethodKind = MethodKind::DmVp;
pub const DEFAULT_SAMPLER: SamplerKind = SamplerKind::Ancestral;
pub const DEFAULT_GRID_N: usize = 101;
pub const DEFAULT_N_PATHS: usize = 10_000;
pub const DEFAULT_Y: f64 = 0.5;

pub const VALIDATE_TIMES: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];
pub const VALIDATE_N_STEPS: usize = 10_000;
pub const VALIDATE_N_PATHS: usize = 100_000;
pub const VALIDATE_X0: f64 = 1.0;
pub const VALIDATE_Y: f64 = -0.5;

pub const TEMPERATURE_TAUS: [f64; 3] = [0.06, 0.34, 2.0];
pub const SWEEP_NFES: [usize; 3] = [5, 35, 100];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<MethodKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheduler: Option<Scheduler>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub world: Option<WorldConfig>,
    /// Observation; its length sets the dimension.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_paths: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parameterization: Option<Parameterization>,
    /// Trained network to sample with; the analytic score when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<PathBuf>,
    /// Paths written to the trajectory CSV.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub save_paths: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validate: Option<ValidateSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<TemperatureSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GridName {
    Linear,
    Karras,
    #[serde(rename = "DDBM")]
    Ddbm,
}

/// `t_max` left out means the per-method default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<GridName>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub scale: f64,
    pub noise_std: f64,
}

impl From<&ToyWorld> for WorldConfig {
    fn from(w: &ToyWorld) -> Self {
        WorldConfig {
            weights: w.prior.weights.clone(),
            means: w.prior.means.clone(),
            stds: w.prior.stds.clone(),
            scale: w.degradation.scale,
            noise_std: w.degradation.noise_std,
        }
    }
}

impl WorldConfig {
    fn build(&self) -> CliResult<ToyWorld> {
        let prior = MixtureModel::new(self.weights.clone(), self.means.clone(), self.stds.clone())
            .map_err(|e| CliError::at("world", e))?;
        let degradation = Degradation {
            scale: self.scale,
            noise_std: self.noise_std,
        };
        ToyWorld::new(prior, degradation).map_err(|e| CliError::at("world", e))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embed_width: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precondition: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<Optimizer>,
    /// Cosine decay over `steps` when left out.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr_schedule: Option<LrSchedule>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss_weight: Option<LossWeight>,
    /// Continue an earlier run from its weights and checkpoint files.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resume: Option<ResumeConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResumeConfig {
    pub weights: PathBuf,
    pub checkpoint: PathBuf,
}

/// Which cells `validate-kernels` runs when no explicit list is given.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matrix {
    /// Every method with its original scheduler and temperature.
    Original,
    /// Every method with every default scheduler; invalid pairs are skipped.
    Full,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CellConfig {
    pub method: Option<MethodKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheduler: Option<Scheduler>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Matrix>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cells: Option<Vec<CellConfig>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_paths: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    /// Multiplies every predicted variance. Anything but 1 corrupts the
    /// closed form on purpose, as a negative control for the oracle.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixture_variance_scale: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemperatureSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub methods: Option<Vec<MethodKind>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub taus: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub methods: Option<Vec<MethodKind>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samplers: Option<Vec<SamplerKind>>,
    /// Score evaluations per path; two-stage samplers get half as many steps.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nfes: Option<Vec<usize>>,
}

/// One `validate-kernels` cell, or the reason it cannot run.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Run(ProcessSpec),
    Skip { method: MethodKind, sched: Scheduler, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidateSettings {
    pub cells: Vec<Cell>,
    pub times: Vec<f64>,
    pub n_steps: usize,
    pub n_paths: usize,
    pub x0: f64,
    pub y: f64,
    pub variance_scale: f64,
}

/// A config with defaults applied and every part checked.
#[derive(Debug, Clone)]
pub struct Resolved {
    /// Filled-in config, as echoed into outputs.
    pub config: ExperimentConfig,
    pub spec: ProcessSpec,
    pub reverse: ReverseConfig,
    pub world: ToyWorld,
    pub y: Vec<f64>,
    pub n_paths: usize,
    pub seed: u64,
    pub weights: Option<PathBuf>,
    pub parameterization: Parameterization,
    pub save_paths: usize,
    pub train: TrainConfig,
    pub resume: Option<ResumeConfig>,
    pub validate: ValidateSettings,
    pub temperature_methods: Vec<MethodKind>,
    pub temperature_taus: Vec<f64>,
    pub temperature_grid: TimeGrid,
    pub sweep_methods: Vec<MethodKind>,
    pub sweep_samplers: Vec<SamplerKind>,
    pub sweep_nfes: Vec<usize>,
}

/// Reads a config file, reporting parse errors with their key path.
pub fn load(path: &Path) -> CliResult<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut cfg = parse(&text)?;
    // relative file references are taken from the config's directory
    let base = path.parent().unwrap_or(Path::new(""));
    let anchor = |p: &mut PathBuf| {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    };
    if let Some(w) = cfg.weights.as_mut() {
        anchor(w);
    }
    if let Some(r) = cfg.train.as_mut().and_then(|t| t.resume.as_mut()) {
        anchor(&mut r.weights);
        anchor(&mut r.checkpoint);
    }
    Ok(cfg)
}

pub fn parse(text: &str) -> CliResult<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::at(&path, e.into_inner())
    })
}

fn positive(path: &str, v: f64) -> CliResult<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::at(path, format!("must be positive and finite, got {v}")))
    }
}

fn build_spec(
    path: &str,
    method: MethodKind,
    sched: Option<Scheduler>,
    tau: Option<f64>,
    gamma: Option<f64>,
) -> CliResult<ProcessSpec> {
    let spec = ProcessSpec {
        method,
        sched: sched.unwrap_or(method.original_scheduler()),
        tau: tau.unwrap_or(method.original_tau()),
        gamma: gamma.unwrap_or(DEFAULT_GAMMA),
    };
    spec.validate().map_err(|e| CliError::at(path, e))?;
    Ok(spec)
}

impl GridConfig {
    fn filled(&self) -> CliResult<GridConfig> {
        let kind = self.kind.unwrap_or(GridName::Karras);
        let rho = match (kind, self.rho) {
            (GridName::Linear, Some(_)) => {
                return Err(CliError::at("grid.rho", "only Karras and DDBM grids take rho"))
            }
            (GridName::Linear, None) => None,
            (_, r) => Some(positive("grid.rho", r.unwrap_or(DEFAULT_RHO))?),
        };
        Ok(GridConfig {
            kind: Some(kind),
            n: Some(self.n.unwrap_or(DEFAULT_GRID_N)),
            t_min: Some(self.t_min.unwrap_or(DEFAULT_T_MIN)),
            t_max: self.t_max,
            rho,
        })
    }

    /// Grid with `n` points, `t_max` falling back to `fallback_t_max`.
    /// Expects a filled config.
    pub fn build(&self, n: usize, fallback_t_max: f64) -> CliResult<TimeGrid> {
        let kind = match self.kind.unwrap_or(GridName::Karras) {
            GridName::Linear => GridKind::Linear,
            GridName::Karras => GridKind::Karras { rho: self.rho.unwrap_or(DEFAULT_RHO) },
            GridName::Ddbm => GridKind::Ddbm { rho: self.rho.unwrap_or(DEFAULT_RHO) },
        };
        make_grid(GridSpec {
            kind,
            n,
            t_min: self.t_min.unwrap_or(DEFAULT_T_MIN),
            t_max: self.t_max.unwrap_or(fallback_t_max),
        })
        .map_err(|e| CliError::at("grid", e))
    }
}

impl ExperimentConfig {
    pub fn resolve(&self) -> CliResult<Resolved> {
        let method = self.method.unwrap_or(DEFAULT_METHOD);
        let spec = build_spec("method", method, self.scheduler, self.tau, self.gamma)?;
        let lambda = self.lambda.unwrap_or(1.0);
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(CliError::at("lambda", format!("must be nonnegative, got {lambda}")));
        }
        let sampler = self.sampler.unwrap_or(DEFAULT_SAMPLER);
        let grid_cfg = self.grid.clone().unwrap_or_default().filled()?;
        let grid = grid_cfg.build(grid_cfg.n.unwrap(), default_t_max(&spec))?;
        let world_cfg = self.world.clone().unwrap_or_else(|| WorldConfig::from(&ToyWorld::default()));
        let world = world_cfg.build()?;
        let y = self.y.clone().unwrap_or_else(|| vec![DEFAULT_Y]);
        if y.is_empty() || y.iter().any(|v| !v.is_finite()) {
            return Err(CliError::at("y", "needs at least one finite value"));
        }
        let n_paths = self.n_paths.unwrap_or(DEFAULT_N_PATHS);
        let seed = self.seed.unwrap_or(0);
        let parameterization = self.parameterization.unwrap_or(Parameterization::X0Pred);
        if parameterization != Parameterization::X0Pred && self.weights.is_some() {
            return Err(CliError::at("parameterization", "trained networks predict x0; use X0Pred"));
        }
        let save_paths = self.save_paths.unwrap_or(n_paths);

        let (train_section, train, resume) = self.resolve_train(spec, &world, y.len(), seed)?;
        let (validate_section, validate) = self.resolve_validate()?;

        let t = self.temperature.clone().unwrap_or_default();
        let temperature_methods = t.methods.unwrap_or_else(|| vec![MethodKind::InDI, MethodKind::ResShift]);
        let temperature_taus = t.taus.unwrap_or_else(|| TEMPERATURE_TAUS.to_vec());
        for (i, &tau) in temperature_taus.iter().enumerate() {
            positive(&format!("temperature.taus[{i}]"), tau)?;
        }
        // one grid shared by every method of the study
        let mut shared_t_max = 1.0f64;
        for (i, &m) in temperature_methods.iter().enumerate() {
            let s = build_spec(&format!("temperature.methods[{i}]"), m, None, None, None)?;
            shared_t_max = shared_t_max.min(default_t_max(&s));
        }
        let temperature_grid = grid_cfg.build(grid_cfg.n.unwrap(), shared_t_max)?;

        let s = self.sweep.clone().unwrap_or_default();
        let sweep_methods = s.methods.unwrap_or_else(|| {
            vec![MethodKind::DmVp, MethodKind::Fm, MethodKind::IrSde, MethodKind::ResShift, MethodKind::InDI]
        });
        for (i, &m) in sweep_methods.iter().enumerate() {
            build_spec(&format!("sweep.methods[{i}]"), m, None, None, None)?;
        }
        let sweep_samplers = s.samplers.unwrap_or_else(|| SamplerKind::ALL.to_vec());
        let sweep_nfes = s.nfes.unwrap_or_else(|| SWEEP_NFES.to_vec());
        if let Some(i) = sweep_nfes.iter().position(|&n| n == 0) {
            return Err(CliError::at(&format!("sweep.nfes[{i}]"), "must be at least 1"));
        }

        let config = ExperimentConfig {
            method: Some(method),
            scheduler: Some(spec.sched),
            tau: Some(spec.tau),
            gamma: Some(spec.gamma),
            lambda: Some(lambda),
            sampler: Some(sampler),
            grid: Some(grid_cfg),
            world: Some(world_cfg),
            y: Some(y.clone()),
            n_paths: Some(n_paths),
            seed: Some(seed),
            parameterization: Some(parameterization),
            weights: self.weights.clone(),
            save_paths: Some(save_paths),
            train: Some(train_section),
            validate: Some(validate_section),
            temperature: Some(TemperatureSection {
                methods: Some(temperature_methods.clone()),
                taus: Some(temperature_taus.clone()),
            }),
            sweep: Some(SweepSection {
                methods: Some(sweep_methods.clone()),
                samplers: Some(sweep_samplers.clone()),
                nfes: Some(sweep_nfes.clone()),
            }),
        };
        Ok(Resolved {
            config,
            spec,
            reverse: ReverseConfig { lambda, grid, kind: sampler },
            world,
            y,
            n_paths,
            seed,
            weights: self.weights.clone(),
            parameterization,
            save_paths,
            train,
            resume,
            validate,
            temperature_methods,
            temperature_taus,
            temperature_grid,
            sweep_methods,
            sweep_samplers,
            sweep_nfes,
        })
    }

    fn resolve_train(
        &self,
        spec: ProcessSpec,
        world: &ToyWorld,
        dim: usize,
        seed: u64,
    ) -> CliResult<(TrainSection, TrainConfig, Option<ResumeConfig>)> {
        let t = self.train.clone().unwrap_or_default();
        let cfg = TrainConfig {
            spec,
            world: world.clone(),
            dim,
            steps: t.steps.unwrap_or(DEFAULT_STEPS),
            batch: t.batch.unwrap_or(DEFAULT_BATCH),
            lr: t.lr.unwrap_or(DEFAULT_LR),
            seed,
            hidden: t.hidden.clone().unwrap_or_else(|| DEFAULT_HIDDEN.to_vec()),
            embed_width: t.embed_width.unwrap_or(DEFAULT_EMBED_WIDTH),
            precondition: t.precondition.unwrap_or(true),
            optimizer: t.optimizer.unwrap_or_default(),
            lr_schedule: t.lr_schedule.unwrap_or(LrSchedule::Cosine {
                horizon: t.steps.unwrap_or(DEFAULT_STEPS),
                floor: DEFAULT_LR_FLOOR,
            }),
            loss_weight: t.loss_weight.unwrap_or(LossWeight::Normalized),
        };
        if cfg.batch == 0 {
            return Err(CliError::at("train.batch", "must be at least 1"));
        }
        positive("train.lr", cfg.lr)?;
        if cfg.hidden.is_empty() || cfg.hidden.contains(&0) || cfg.embed_width == 0 {
            return Err(CliError::at("train.hidden", "layer and embedding widths must be at least 1"));
        }
        cfg.validate().map_err(|e| CliError::at("train", e))?;
        cfg.init_net().map_err(|e| CliError::at("train", e))?;
        let section = TrainSection {
            steps: Some(cfg.steps),
            batch: Some(cfg.batch),
            lr: Some(cfg.lr),
            hidden: Some(cfg.hidden.clone()),
            embed_width: Some(cfg.embed_width),
            precondition: Some(cfg.precondition),
            optimizer: Some(cfg.optimizer),
            lr_schedule: Some(cfg.lr_schedule),
            loss_weight: Some(cfg.loss_weight),
            resume: t.resume.clone(),
        };
        Ok((section, cfg, t.resume))
    }

    fn resolve_validate(&self) -> CliResult<(ValidateSection, ValidateSettings)> {
        let v = self.validate.clone().unwrap_or_default();
        if v.matrix.is_some() && v.cells.is_some() {
            return Err(CliError::at("validate", "give either matrix or cells, not both"));
        }
        let cells = match &v.cells {
            Some(list) => list
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let path = format!("validate.cells[{i}]");
                    let method = c.method.ok_or_else(|| CliError::at(&path, "missing method"))?;
                    build_spec(&path, method, c.scheduler, c.tau, c.gamma).map(Cell::Run)
                })
                .collect::<CliResult<Vec<_>>>()?,
            None => match v.matrix.unwrap_or(Matrix::Original) {
                Matrix::Original => MethodKind::ALL.iter().map(|&m| Cell::Run(ProcessSpec::original(m))).collect(),
                Matrix::Full => MethodKind::ALL
                    .iter()
                    .flat_map(|&m| Scheduler::defaults().into_iter().map(move |s| (m, s)))
                    .map(|(m, s)| {
                        let spec = ProcessSpec { sched: s, ..ProcessSpec::original(m) };
                        match spec.validate() {
                            Ok(()) => Cell::Run(spec),
                            Err(e) => Cell::Skip { method: m, sched: s, reason: e.to_string() },
                        }
                    })
                    .collect(),
            },
        };
        let times = v.times.clone().unwrap_or_else(|| VALIDATE_TIMES.to_vec());
        if times.is_empty() || times.windows(2).any(|w| w[1] <= w[0]) || times[0] <= 0.0 {
            return Err(CliError::at("validate.times", "need positive, strictly increasing times"));
        }
        let n_steps = v.n_steps.unwrap_or(VALIDATE_N_STEPS);
        let n_paths = v.n_paths.unwrap_or(VALIDATE_N_PATHS);
        if n_steps == 0 || n_paths < 2 {
            return Err(CliError::at("validate", "needs n_steps >= 1 and n_paths >= 2"));
        }
        let x0 = v.x0.unwrap_or(VALIDATE_X0);
        let y = v.y.unwrap_or(VALIDATE_Y);
        let variance_scale = positive("validate.fixture_variance_scale", v.fixture_variance_scale.unwrap_or(1.0))?;
        let section = ValidateSection {
            matrix: if v.cells.is_some() { None } else { Some(v.matrix.unwrap_or(Matrix::Original)) },
            cells: v.cells.clone(),
            times: Some(times.clone()),
            n_steps: Some(n_steps),
            n_paths: Some(n_paths),
            x0: Some(x0),
            y: Some(y),
            fixture_variance_scale: Some(variance_scale),
        };
        Ok((section, ValidateSettings { cells, times, n_steps, n_paths, x0, y, variance_scale }))
    }
}
