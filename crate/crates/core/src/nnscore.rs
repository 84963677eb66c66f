//! A small fully connected x0-predictor with hand-written backpropagation.
//!
//! The network maps `[x, y, emb(t)]` to an estimate of `x0`. Hidden layers
//! use `tanh`; the output layer is linear. The time embedding is
//! `sin(ω_k t), cos(ω_k t)` with `ω_k` spaced geometrically on `[1, 100]`.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::process::ProcessSpec;
use crate::rng::keyed_stream;
use crate::score::{score_from_x0, Provenance, ScoreField};
use crate::toyworld::ToyWorld;

pub const DEFAULT_HIDDEN: [usize; 3] = [64, 64, 64];
pub const DEFAULT_EMBED_WIDTH: usize = 16;
pub const DEFAULT_STEPS: usize = 20_000;
pub const DEFAULT_BATCH: usize = 128;
pub const DEFAULT_LR: f64 = 3e-3;
/// Final learning rate as a fraction of `lr` under the cosine schedule.
pub const DEFAULT_LR_FLOOR: f64 = 0.0;
pub const DIVERGENCE_LOSS: f64 = 1e6;

const EMBED_FREQ_MIN: f64 = 1.0;
const EMBED_FREQ_MAX: f64 = 100.0;

/// Training times for bridges stay this far from both ends.
pub const BRIDGE_TRAIN_MARGIN: f64 = 1e-3;
/// Upper training time for schedulers that exclude `t = 1`.
pub const OPEN_DOMAIN_TRAIN_MAX: f64 = 1.0 - 1e-4;

// stream ids, kept away from the path ids used by samplers
const INIT_STREAM: u64 = u64::MAX;
const TRAIN_STREAM: u64 = u64::MAX - 1;

const MAGIC: &[u8; 4] = b"ITKW";
const FORMAT_VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Tanh,
}

impl Activation {
    fn id(self) -> u8 {
        match self {
            Activation::Tanh => 1,
        }
    }

    fn from_id(id: u8) -> Result<Self> {
        match id {
            1 => Ok(Activation::Tanh),
            other => Err(Error::Format(format!("unknown activation id {other}"))),
        }
    }
}

/// Sinusoidal embedding of `t`; `width` must be even.
pub fn time_embedding(t: f64, width: usize) -> Vec<f64> {
    let k = width / 2;
    let mut out = Vec::with_capacity(width);
    for i in 0..k {
        let frac = if k > 1 { i as f64 / (k - 1) as f64 } else { 0.0 };
        let w = EMBED_FREQ_MIN * (EMBED_FREQ_MAX / EMBED_FREQ_MIN).powf(frac);
        out.push((w * t).sin());
        out.push((w * t).cos());
    }
    out
}

/// Multilayer perceptron with all parameters in one flat vector. Layer `l`
/// stores its `out × in` weights row-major, followed by its `out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    embed_width: usize,
    activation: Activation,
    params: Vec<f64>,
}

impl Mlp {
    /// All-zero network for state dimension `dim` (condition has the same
    /// dimension).
    pub fn zeros(dim: usize, hidden: &[usize], embed_width: usize) -> Result<Self> {
        if dim == 0 || hidden.is_empty() || hidden.contains(&0) {
            return Err(Error::Argument("network needs dim >= 1 and nonempty hidden layers".into()));
        }
        if embed_width % 2 != 0 {
            return Err(Error::Argument(format!("embedding width must be even, got {embed_width}")));
        }
        let mut sizes = vec![2 * dim + embed_width];
        sizes.extend_from_slice(hidden);
        sizes.push(dim);
        let n = param_count(&sizes);
        Ok(Mlp {
            sizes,
            embed_width,
            activation: Activation::Tanh,
            params: vec![0.0; n],
        })
    }

    /// Glorot-normal weights and zero biases.
    pub fn init(dim: usize, hidden: &[usize], embed_width: usize, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(dim, hidden, embed_width)?;
        let mut rng = keyed_stream(seed, INIT_STREAM, 0);
        for l in 0..net.n_layers() {
            let (fan_in, fan_out) = (net.sizes[l], net.sizes[l + 1]);
            let sd = (2.0 / (fan_in + fan_out) as f64).sqrt();
            let (w, _) = net.layer_range(l);
            for p in &mut net.params[w] {
                *p = sd * rng.sample::<f64, _>(StandardNormal);
            }
        }
        Ok(net)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn embed_width(&self) -> usize {
        self.embed_width
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    fn layer_range(&self, l: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let start = param_count(&self.sizes[..=l]);
        let (i, o) = (self.sizes[l], self.sizes[l + 1]);
        (start..start + i * o, start + i * o..start + i * o + o)
    }

    fn input(&self, x: &[f64], t: f64, y: &[f64]) -> Result<Vec<f64>> {
        check_dims(self.dim(), x.len())?;
        check_dims(self.dim(), y.len())?;
        let mut input = Vec::with_capacity(self.sizes[0]);
        input.extend_from_slice(x);
        input.extend_from_slice(y);
        input.extend(time_embedding(t, self.embed_width));
        Ok(input)
    }

    /// Layer activations, input first, network output last.
    fn activations(&self, input: Vec<f64>) -> Vec<Vec<f64>> {
        let mut acts = vec![input];
        for l in 0..self.n_layers() {
            let (wr, br) = self.layer_range(l);
            let (w, b) = (&self.params[wr], &self.params[br]);
            let prev = acts.last().unwrap();
            let n_in = prev.len();
            let last = l + 1 == self.n_layers();
            let next: Vec<f64> = b
                .iter()
                .enumerate()
                .map(|(o, &bo)| {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    let z = bo + row.iter().zip(prev).map(|(a, b)| a * b).sum::<f64>();
                    if last {
                        z
                    } else {
                        z.tanh()
                    }
                })
                .collect();
            acts.push(next);
        }
        acts
    }

    /// Raw network output at `(x, t, y)`.
    pub fn forward(&self, x: &[f64], t: f64, y: &[f64]) -> Result<Vec<f64>> {
        let input = self.input(x, t, y)?;
        Ok(self.activations(input).pop().unwrap())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&[FORMAT_VERSION, self.activation.id()])?;
        w.write_all(&(self.embed_width as u32).to_le_bytes())?;
        w.write_all(&(self.sizes.len() as u32).to_le_bytes())?;
        for &s in &self.sizes {
            w.write_all(&(s as u32).to_le_bytes())?;
        }
        for p in &self.params {
            w.write_all(&p.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let io = |e: std::io::Error| Error::Format(e.to_string());
        let mut head = [0u8; 6];
        r.read_exact(&mut head).map_err(io)?;
        if &head[..4] != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        if head[4] != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {}", head[4])));
        }
        let activation = Activation::from_id(head[5])?;
        let mut word = [0u8; 4];
        let mut read_u32 = |r: &mut R| -> Result<usize> {
            r.read_exact(&mut word).map_err(io)?;
            Ok(u32::from_le_bytes(word) as usize)
        };
        let embed_width = read_u32(&mut r)?;
        let n_sizes = read_u32(&mut r)?;
        if n_sizes < 3 {
            return Err(Error::Format(format!("need at least 3 layer sizes, got {n_sizes}")));
        }
        let sizes = (0..n_sizes).map(|_| read_u32(&mut r)).collect::<Result<Vec<_>>>()?;
        let dim = *sizes.last().unwrap();
        if sizes[0] != 2 * dim + embed_width {
            return Err(Error::Format(format!(
                "input width {} does not match 2 * {dim} + {embed_width}",
                sizes[0]
            )));
        }
        let mut net = Mlp::zeros(dim, &sizes[1..n_sizes - 1], embed_width).map_err(|e| Error::Format(e.to_string()))?;
        net.activation = activation;
        let mut buf = [0u8; 8];
        for p in net.params.iter_mut() {
            r.read_exact(&mut buf).map_err(io)?;
            *p = f64::from_le_bytes(buf);
        }
        if r.read(&mut buf).map_err(io)? != 0 {
            return Err(Error::Format("trailing bytes".into()));
        }
        Ok(net)
    }
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

/// One regression example: the net sees `(xt, t, y)` and should output `x0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x0: Vec<f64>,
    pub y: Vec<f64>,
    pub t: f64,
    pub xt: Vec<f64>,
}

/// How the network output becomes an x0 estimate.
///
/// `Gaussian` rescales input and output with the coefficients of the
/// Bayes-optimal predictor for a Gaussian prior of matching mean and
/// variance: with `r = x - a m - b y` and `v_r = a² v + σ²`,
///
/// ```text
/// x̂0 = m + (a v / v_r) r + sqrt(v σ² / v_r) · net(r / sqrt(v_r), y, t)
/// ```
///
/// so the network only fits the non-Gaussian residual, and `x̂0 → x` as
/// `σ² → 0` whatever the weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum Precond {
    /// `x̂0 = net(x, y, t)`.
    Identity,
    Gaussian {
        spec: ProcessSpec,
        data_mean: f64,
        data_var: f64,
    },
}

/// Per-sample affine frame: network sees `input`, `x̂0 = base + out · net`.
struct Frame {
    input: Vec<f64>,
    base: Vec<f64>,
    out: f64,
}

impl Precond {
    /// Gaussian preconditioning matched to a toy world's prior moments.
    pub fn for_world(spec: ProcessSpec, world: &ToyWorld) -> Self {
        Precond::Gaussian {
            spec,
            data_mean: world.prior.mean(),
            data_var: world.prior.variance(),
        }
    }

    fn frame(&self, x: &[f64], t: f64, y: &[f64]) -> Result<Frame> {
        check_dims(x.len(), y.len())?;
        match *self {
            Precond::Identity => Ok(Frame {
                input: x.to_vec(),
                base: vec![0.0; x.len()],
                out: 1.0,
            }),
            Precond::Gaussian { spec, data_mean: m, data_var: v } => {
                let k = spec.kernel(t)?;
                let v_r = k.a * k.a * v + k.var;
                if !(v_r > 0.0) {
                    return Err(Error::Degenerate { t, what: "preconditioner variance is zero" });
                }
                let r: Vec<f64> = x.iter().zip(y).map(|(&xi, &yi)| xi - k.a * m - k.b * yi).collect();
                let (c_in, skip) = (1.0 / v_r.sqrt(), k.a * v / v_r);
                Ok(Frame {
                    input: r.iter().map(|ri| c_in * ri).collect(),
                    base: r.iter().map(|ri| m + skip * ri).collect(),
                    out: (v * k.var / v_r).sqrt(),
                })
            }
        }
    }

    /// x0 estimate of `net` at `(x, t, y)`.
    pub fn predict(&self, net: &Mlp, x: &[f64], t: f64, y: &[f64]) -> Result<Vec<f64>> {
        check_dims(net.dim(), x.len())?;
        let f = self.frame(x, t, y)?;
        let raw = net.forward(&f.input, t, y)?;
        Ok(f.base.iter().zip(&raw).map(|(b, n)| b + f.out * n).collect())
    }
}

/// Mean over the batch of `‖forward(xt, t, y) - x0‖²` and its gradient with
/// respect to the flat parameter vector.
pub fn loss_and_grad(net: &Mlp, batch: &[Sample]) -> Result<(f64, Vec<f64>)> {
    precond_loss_and_grad(net, &Precond::Identity, batch)
}

/// As [`loss_and_grad`] for the preconditioned estimate `precond.predict`.
pub fn precond_loss_and_grad(net: &Mlp, precond: &Precond, batch: &[Sample]) -> Result<(f64, Vec<f64>)> {
    weighted_loss_and_grad(net, precond, LossWeight::Uniform, batch)
}

/// Keeps the normalized weight finite where the output scale vanishes.
const WEIGHT_FLOOR: f64 = 1e-6;

/// As [`precond_loss_and_grad`] with each sample's squared error weighted per `weight`.
pub fn weighted_loss_and_grad(
    net: &Mlp,
    precond: &Precond,
    weight: LossWeight,
    batch: &[Sample],
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::Empty);
    }
    let mut grad = vec![0.0; net.params.len()];
    let mut total = 0.0;
    let scale = 1.0 / batch.len() as f64;
    for (index, s) in batch.iter().enumerate() {
        check_dims(net.dim(), s.x0.len())?;
        check_dims(net.dim(), s.xt.len())?;
        let frame = precond.frame(&s.xt, s.t, &s.y)?;
        let acts = net.activations(net.input(&frame.input, s.t, &s.y)?);
        let out = acts.last().unwrap();
        let mut delta: Vec<f64> = out
            .iter()
            .zip(&frame.base)
            .zip(&s.x0)
            .map(|((o, b), x)| b + frame.out * o - x)
            .collect();
        let w = match weight {
            LossWeight::Uniform => 1.0,
            LossWeight::Normalized => 1.0 / (frame.out * frame.out + WEIGHT_FLOOR),
        };
        let loss: f64 = w * delta.iter().map(|d| d * d).sum::<f64>();
        if !loss.is_finite() {
            return Err(Error::NonFinite { index });
        }
        total += loss;
        for d in delta.iter_mut() {
            *d *= 2.0 * scale * w * frame.out;
        }
        for l in (0..net.n_layers()).rev() {
            let (wr, br) = net.layer_range(l);
            let prev = &acts[l];
            let n_in = prev.len();
            for (o, &d) in delta.iter().enumerate() {
                grad[br.start + o] += d;
                let row = &mut grad[wr.start + o * n_in..wr.start + (o + 1) * n_in];
                for (g, &a) in row.iter_mut().zip(prev) {
                    *g += d * a;
                }
            }
            if l > 0 {
                let w = &net.params[wr];
                delta = (0..n_in)
                    .map(|i| {
                        let back: f64 = delta.iter().enumerate().map(|(o, &d)| d * w[o * n_in + i]).sum();
                        back * (1.0 - prev[i] * prev[i])
                    })
                    .collect();
            }
        }
    }
    Ok((total * scale, grad))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub spec: ProcessSpec,
    pub world: ToyWorld,
    pub dim: usize,
    pub steps: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
    pub hidden: Vec<usize>,
    pub embed_width: usize,
    /// Gaussian preconditioning from the world's prior moments when set.
    pub precondition: bool,
    pub optimizer: Optimizer,
    pub lr_schedule: LrSchedule,
    pub loss_weight: LossWeight,
}

/// Per-sample weight on the squared x0 error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossWeight {
    /// Plain x0 MSE.
    Uniform,
    /// Divides by the preconditioner's output scale squared, so every `t`
    /// contributes on the scale of the network's own output.
    Normalized,
}

/// Multiplier on `lr` as a function of the step index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum LrSchedule {
    Constant,
    /// Half cosine from 1 down to `floor` over `horizon` steps, flat afterwards.
    Cosine { horizon: usize, floor: f64 },
}

impl LrSchedule {
    pub fn factor(&self, step: usize) -> f64 {
        match *self {
            LrSchedule::Constant => 1.0,
            LrSchedule::Cosine { horizon, floor } => {
                if horizon == 0 {
                    return floor;
                }
                let u = step.min(horizon) as f64 / horizon as f64;
                floor + (1.0 - floor) * 0.5 * (1.0 + (std::f64::consts::PI * u).cos())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moment estimates carried between Adam steps.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OptimizerState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

const STATE_MAGIC: &[u8; 4] = b"ITKO";

/// Step counter and optimizer moments, enough to resume next to a weights file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainCheckpoint {
    pub step: usize,
    pub state: OptimizerState,
}

impl TrainCheckpoint {
    /// Layout: magic, version byte, step u64, moment count u64, then `m` and
    /// `v` as little-endian f64.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(STATE_MAGIC)?;
        w.write_all(&[FORMAT_VERSION])?;
        w.write_all(&(self.step as u64).to_le_bytes())?;
        w.write_all(&(self.state.m.len() as u64).to_le_bytes())?;
        for x in self.state.m.iter().chain(&self.state.v) {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let io = |e: std::io::Error| Error::Format(e.to_string());
        let mut head = [0u8; 5];
        r.read_exact(&mut head).map_err(io)?;
        if &head[..4] != STATE_MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        if head[4] != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {}", head[4])));
        }
        let mut word = [0u8; 8];
        r.read_exact(&mut word).map_err(io)?;
        let step = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word).map_err(io)?;
        let n = u64::from_le_bytes(word) as usize;
        let mut read_vec = |r: &mut R| -> Result<Vec<f64>> {
            (0..n)
                .map(|_| {
                    r.read_exact(&mut word).map_err(io)?;
                    Ok(f64::from_le_bytes(word))
                })
                .collect()
        };
        let m = read_vec(&mut r)?;
        let v = read_vec(&mut r)?;
        if r.read(&mut word).map_err(io)? != 0 {
            return Err(Error::Format("trailing bytes".into()));
        }
        Ok(TrainCheckpoint { step, state: OptimizerState { m, v } })
    }
}

impl TrainConfig {
    pub fn new(spec: ProcessSpec, world: ToyWorld, seed: u64) -> Self {
        TrainConfig {
            spec,
            world,
            dim: 1,
            steps: DEFAULT_STEPS,
            batch: DEFAULT_BATCH,
            lr: DEFAULT_LR,
            seed,
            hidden: DEFAULT_HIDDEN.to_vec(),
            embed_width: DEFAULT_EMBED_WIDTH,
            precondition: true,
            optimizer: Optimizer::default(),
            lr_schedule: LrSchedule::Cosine { horizon: DEFAULT_STEPS, floor: DEFAULT_LR_FLOOR },
            loss_weight: LossWeight::Normalized,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.world.validate()?;
        if self.batch == 0 || self.dim == 0 {
            return Err(Error::Argument("batch and dim must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Argument(format!("lr must be positive, got {}", self.lr)));
        }
        if let LrSchedule::Cosine { floor, .. } = self.lr_schedule {
            if !(0.0..=1.0).contains(&floor) {
                return Err(Error::Argument(format!("lr floor must lie in [0, 1], got {floor}")));
            }
        }
        if let Optimizer::Adam { beta1, beta2, eps } = self.optimizer {
            let unit = |b: f64| (0.0..1.0).contains(&b);
            if !(unit(beta1) && unit(beta2) && eps > 0.0) {
                return Err(Error::Argument(format!("bad Adam parameters {beta1}, {beta2}, {eps}")));
            }
        }
        Ok(())
    }

    /// Interval training times are drawn from uniformly.
    pub fn time_range(&self) -> (f64, f64) {
        if self.spec.method.is_bridge() {
            (BRIDGE_TRAIN_MARGIN, 1.0 - BRIDGE_TRAIN_MARGIN)
        } else if self.spec.sched.includes_one() {
            (0.0, 1.0)
        } else {
            (0.0, OPEN_DOMAIN_TRAIN_MAX)
        }
    }

    pub fn init_net(&self) -> Result<Mlp> {
        Mlp::init(self.dim, &self.hidden, self.embed_width, self.seed)
    }

    pub fn precond(&self) -> Precond {
        if self.precondition {
            Precond::for_world(self.spec, &self.world)
        } else {
            Precond::Identity
        }
    }

    /// Score field of a network trained under this config.
    pub fn field(&self, net: Mlp) -> LearnedField {
        LearnedField {
            net,
            precond: self.precond(),
            spec: self.spec,
        }
    }
}

/// Gradient descent over freshly drawn batches. Step `k` draws its batch
/// from the keyed stream `(seed, ·, k)`, so a run resumed at step `k` with
/// its optimizer state continues exactly as the uninterrupted run would.
#[derive(Debug, Clone)]
pub struct Trainer {
    cfg: TrainConfig,
    net: Mlp,
    step: usize,
    state: OptimizerState,
}

impl Trainer {
    pub fn new(cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let net = cfg.init_net()?;
        Ok(Trainer { cfg, net, step: 0, state: OptimizerState::default() })
    }

    /// Continues from `net` after `step` steps. An empty `state` restarts
    /// the Adam moments from zero.
    pub fn resume(cfg: TrainConfig, net: Mlp, step: usize, state: OptimizerState) -> Result<Self> {
        cfg.validate()?;
        check_dims(cfg.dim, net.dim())?;
        let n = net.params.len();
        if !(state.m.is_empty() && state.v.is_empty()) {
            check_dims(n, state.m.len())?;
            check_dims(n, state.v.len())?;
        }
        Ok(Trainer { cfg, net, step, state })
    }

    pub fn optimizer_state(&self) -> &OptimizerState {
        &self.state
    }

    pub fn checkpoint(&self) -> TrainCheckpoint {
        TrainCheckpoint { step: self.step, state: self.state.clone() }
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn into_net(self) -> Mlp {
        self.net
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn draw_batch(&self, step: usize) -> Result<Vec<Sample>> {
        let mut rng = keyed_stream(self.cfg.seed, TRAIN_STREAM, step as u64);
        let (t_lo, t_hi) = self.cfg.time_range();
        (0..self.cfg.batch)
            .map(|_| {
                let (x0, y) = self.cfg.world.sample_pair_vec(self.cfg.dim, &mut rng);
                let t = rng.random_range(t_lo..t_hi);
                let xt = self.cfg.spec.sample_kernel(&x0, &y, t, &mut rng)?;
                Ok(Sample { x0, y, t, xt })
            })
            .collect()
    }

    /// Runs one optimizer step and returns its batch loss.
    pub fn step(&mut self) -> Result<f64> {
        let batch = self.draw_batch(self.step)?;
        let (loss, grad) = weighted_loss_and_grad(&self.net, &self.cfg.precond(), self.cfg.loss_weight, &batch)?;
        if loss > DIVERGENCE_LOSS {
            return Err(Error::Divergence { step: self.step, loss });
        }
        let lr = self.cfg.lr * self.cfg.lr_schedule.factor(self.step);
        match self.cfg.optimizer {
            Optimizer::Sgd => {
                for (p, g) in self.net.params.iter_mut().zip(&grad) {
                    *p -= lr * g;
                }
            }
            Optimizer::Adam { beta1, beta2, eps } => {
                let n = grad.len();
                if self.state.m.is_empty() {
                    self.state = OptimizerState { m: vec![0.0; n], v: vec![0.0; n] };
                }
                let k = (self.step + 1) as i32;
                let (c1, c2) = (1.0 - beta1.powi(k), 1.0 - beta2.powi(k));
                for (i, &g) in grad.iter().enumerate() {
                    let m = &mut self.state.m[i];
                    let v = &mut self.state.v[i];
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    self.net.params[i] -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                }
            }
        }
        self.step += 1;
        Ok(loss)
    }

    /// Steps until `cfg.steps` have been taken in total, calling `on_step`
    /// with `(step, loss)` after each one.
    pub fn run(&mut self, mut on_step: impl FnMut(usize, f64)) -> Result<()> {
        while self.step < self.cfg.steps {
            let k = self.step;
            let loss = self.step()?;
            on_step(k, loss);
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: Mlp,
    /// Batch loss per step.
    pub curve: Vec<f64>,
}

pub fn train(cfg: &TrainConfig) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(cfg.clone())?;
    let mut curve = Vec::with_capacity(cfg.steps);
    trainer.run(|_, loss| curve.push(loss))?;
    Ok(TrainOutcome {
        net: trainer.into_net(),
        curve,
    })
}

/// Score field built from a network's x0 prediction.
#[derive(Debug, Clone)]
pub struct LearnedField {
    pub net: Mlp,
    pub precond: Precond,
    pub spec: ProcessSpec,
}

impl ScoreField for LearnedField {
    fn score(&self, x: &[f64], t: f64, y: &[f64]) -> Result<Vec<f64>> {
        let x0_hat = self.precond.predict(&self.net, x, t, y)?;
        score_from_x0(&self.spec, x, &x0_hat, y, t)
    }

    fn provenance(&self) -> Provenance {
        Provenance::Learned
    }
}
