//! Time grids and reverse-time integrators.
//!
//! All samplers integrate the reverse SDE
//!
//! ```text
//! dx = [f(x, t, y) - (λ² + 1)/2 · g²(t) · s(x, t, y)] dt + λ g(t) dw̄
//! ```
//!
//! backwards from `t_max` to `t_min`, and work with any [`MethodKind`]
//! through the [`ProcessSpec`] interface only.
//!
//! [`MethodKind`]: crate::process::MethodKind

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::process::ProcessSpec;
use crate::rng::keyed_stream;
use crate::score::{x0_from_score, ScoreField};

/// Latest time any sampler evaluates a bridge at.
pub const BRIDGE_T_CLAMP: f64 = 1.0 - 1e-5;

/// Default starting time for bridges.
pub const BRIDGE_T_MAX: f64 = 1.0 - 1e-3;

/// Default starting time for processes whose scheduler excludes `t = 1`.
pub const OPEN_DOMAIN_T_MAX: f64 = 1.0 - 1e-4;

pub const DEFAULT_T_MIN: f64 = 1e-3;

pub const DEFAULT_RHO: f64 = 7.0;

/// Fraction of a LangevinHeun interval covered by the stochastic sub-step.
pub const LANGEVIN_SPLIT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum GridKind {
    Linear,
    Karras { rho: f64 },
    #[serde(rename = "DDBM")]
    Ddbm { rho: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub kind: GridKind,
    pub n: usize,
    pub t_min: f64,
    pub t_max: f64,
}

/// Strictly decreasing times `t_max = t_0 > ... > t_{n-1} = t_min`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeGrid {
    pub spec: GridSpec,
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Default first grid time for a process.
pub fn default_t_max(spec: &ProcessSpec) -> f64 {
    if spec.method.is_bridge() {
        BRIDGE_T_MAX
    } else if spec.sched.includes_one() {
        1.0
    } else {
        OPEN_DOMAIN_T_MAX
    }
}

pub fn make_grid(spec: GridSpec) -> Result<TimeGrid> {
    let GridSpec { kind, n, t_min, t_max } = spec;
    if n < 2 {
        return Err(Error::Argument(format!("grid needs n >= 2, got {n}")));
    }
    if !(t_min > 0.0 && t_min < t_max && t_max <= 1.0) {
        return Err(Error::Argument(format!(
            "grid needs 0 < t_min < t_max <= 1, got [{t_min}, {t_max}]"
        )));
    }
    let last = (n - 1) as f64;
    let mut times: Vec<f64> = match kind {
        GridKind::Linear => (0..n)
            .map(|i| t_max + (i as f64 / last) * (t_min - t_max))
            .collect(),
        GridKind::Karras { rho } => {
            check_rho(rho)?;
            let (hi, lo) = (t_max.powf(1.0 / rho), t_min.powf(1.0 / rho));
            (0..n)
                .map(|i| (hi + (i as f64 / last) * (lo - hi)).powf(rho))
                .collect()
        }
        GridKind::Ddbm { rho } => {
            check_rho(rho)?;
            // two-sided power profile: dense near both ends of [t_min, t_max]
            (0..n)
                .map(|i| {
                    let u = i as f64 / last;
                    let s = if u <= 0.5 {
                        0.5 * (2.0 * u).powf(rho)
                    } else {
                        1.0 - 0.5 * (2.0 * (1.0 - u)).powf(rho)
                    };
                    t_max - s * (t_max - t_min)
                })
                .collect()
        }
    };
    times[0] = t_max;
    times[n - 1] = t_min;
    if times.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Argument(format!(
            "grid {kind:?} with n = {n} on [{t_min}, {t_max}] is not strictly decreasing"
        )));
    }
    Ok(TimeGrid { spec, times })
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(Error::Argument(format!("rho must be positive, got {rho}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SamplerKind {
    EulerODE,
    EulerSDE,
    Ancestral,
    ExpIntODE,
    MeanODE,
    LangevinHeun,
    Heun2,
    Midpoint2,
    Ralston2,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 9] = [
        SamplerKind::EulerODE,
        SamplerKind::EulerSDE,
        SamplerKind::Ancestral,
        SamplerKind::ExpIntODE,
        SamplerKind::MeanODE,
        SamplerKind::LangevinHeun,
        SamplerKind::Heun2,
        SamplerKind::Midpoint2,
        SamplerKind::Ralston2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::EulerODE => "EulerODE",
            SamplerKind::EulerSDE => "EulerSDE",
            SamplerKind::Ancestral => "Ancestral",
            SamplerKind::ExpIntODE => "ExpIntODE",
            SamplerKind::MeanODE => "MeanODE",
            SamplerKind::LangevinHeun => "LangevinHeun",
            SamplerKind::Heun2 => "Heun2",
            SamplerKind::Midpoint2 => "Midpoint2",
            SamplerKind::Ralston2 => "Ralston2",
        }
    }

    /// Whether the step injects fresh noise.
    pub fn is_stochastic(self, lambda: f64) -> bool {
        match self {
            SamplerKind::EulerSDE => lambda > 0.0,
            SamplerKind::Ancestral | SamplerKind::LangevinHeun => true,
            _ => false,
        }
    }

    /// Score evaluations per grid interval.
    pub fn evals_per_step(self) -> usize {
        match self {
            SamplerKind::Heun2 | SamplerKind::Midpoint2 | SamplerKind::Ralston2 => 2,
            SamplerKind::LangevinHeun => 3,
            _ => 1,
        }
    }

    fn rk2_stage(self) -> Option<f64> {
        match self {
            SamplerKind::Heun2 => Some(1.0),
            SamplerKind::Midpoint2 => Some(0.5),
            SamplerKind::Ralston2 => Some(2.0 / 3.0),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReverseConfig {
    /// Stochasticity of the reverse SDE; only `EulerSDE` reads it.
    pub lambda: f64,
    pub grid: TimeGrid,
    pub kind: SamplerKind,
}

/// Reverse-SDE drift `f - (λ²+1)/2 g² s` at `(x, t)`.
fn reverse_drift(
    spec: &ProcessSpec,
    field: &dyn ScoreField,
    x: &[f64],
    t: f64,
    y: &[f64],
    lambda: f64,
    score_weight: Option<f64>,
) -> Result<Vec<f64>> {
    let c = spec.drift_coeffs(t)?;
    let g2 = spec.diffusion_sq(t)?;
    let s = field.score(x, t, y)?;
    check_dims(x.len(), s.len())?;
    let w = score_weight.unwrap_or(0.5 * (lambda * lambda + 1.0)) * g2;
    Ok(x.iter()
        .zip(y)
        .zip(&s)
        .map(|((&xi, &yi), &si)| c.on_x * xi + c.on_y * yi - w * si)
        .collect())
}

fn euler(x: &[f64], v: &[f64], h: f64) -> Vec<f64> {
    x.iter().zip(v).map(|(xi, vi)| xi - h * vi).collect()
}

fn add_noise<R: Rng + ?Sized>(x: &mut [f64], scale: f64, rng: &mut R) {
    if scale > 0.0 {
        for xi in x.iter_mut() {
            *xi += scale * rng.sample::<f64, _>(StandardNormal);
        }
    }
}

/// Backward Euler–Maruyama step of the reverse SDE with stochasticity `lambda`.
fn euler_maruyama<R: Rng + ?Sized>(
    spec: &ProcessSpec,
    field: &dyn ScoreField,
    x: &[f64],
    t_hi: f64,
    t_lo: f64,
    y: &[f64],
    lambda: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let h = t_hi - t_lo;
    let v = reverse_drift(spec, field, x, t_hi, y, lambda, None)?;
    let mut out = euler(x, &v, h);
    if lambda > 0.0 {
        let g = spec.diffusion_sq(t_hi)?.sqrt();
        add_noise(&mut out, lambda * g * h.sqrt(), rng);
    }
    Ok(out)
}

/// Explicit two-stage Runge–Kutta on the probability-flow ODE with stage
/// parameter `stage` (1 Heun, 1/2 midpoint, 2/3 Ralston).
fn rk2(
    spec: &ProcessSpec,
    field: &dyn ScoreField,
    x: &[f64],
    t_hi: f64,
    t_lo: f64,
    y: &[f64],
    stage: f64,
) -> Result<Vec<f64>> {
    let h = t_hi - t_lo;
    let k1 = reverse_drift(spec, field, x, t_hi, y, 0.0, None)?;
    let probe = euler(x, &k1, stage * h);
    let k2 = reverse_drift(spec, field, &probe, t_hi - stage * h, y, 0.0, None)?;
    let w2 = 1.0 / (2.0 * stage);
    Ok(x.iter()
        .zip(k1.iter().zip(&k2))
        .map(|(xi, (a, b))| xi - h * ((1.0 - w2) * a + w2 * b))
        .collect())
}

// 8-point Gauss–Legendre on [-1, 1]
const GL_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Exponential-integrator step: the affine part of the drift is propagated
/// exactly through the kernel coefficients, the score is frozen at `t_hi`.
fn exponential_integrator(
    spec: &ProcessSpec,
    field: &dyn ScoreField,
    x: &[f64],
    t_hi: f64,
    t_lo: f64,
    y: &[f64],
) -> Result<Vec<f64>> {
    let s = field.score(x, t_hi, y)?;
    check_dims(x.len(), s.len())?;
    let k_hi = spec.kernel(t_hi)?;
    let k_lo = spec.kernel(t_lo)?;
    if k_hi.a == 0.0 {
        return Err(Error::Degenerate {
            t: t_hi,
            what: "propagator undefined where the kernel forgets x0",
        });
    }
    let prop = k_lo.a / k_hi.a;
    let shift = k_lo.b - prop * k_hi.b;
    // ∫_{t_lo}^{t_hi} g²(u) / a(u) du
    let mid = 0.5 * (t_hi + t_lo);
    let half = 0.5 * (t_hi - t_lo);
    let mut weight = 0.0;
    for (node, w) in GL_NODES.iter().zip(&GL_WEIGHTS) {
        for u in [mid - half * node, mid + half * node] {
            weight += w * spec.diffusion_sq(u)? / spec.kernel(u)?.a;
        }
    }
    let score_gain = 0.5 * k_lo.a * weight * half;
    Ok(x.iter()
        .zip(y)
        .zip(&s)
        .map(|((&xi, &yi), &si)| prop * xi + shift * yi + score_gain * si)
        .collect())
}

fn check_bridge_clamp(spec: &ProcessSpec, t_hi: f64) -> Result<()> {
    if spec.method.is_bridge() && t_hi > BRIDGE_T_CLAMP {
        Err(Error::Singularity { method: spec.method, t: t_hi })
    } else {
        Ok(())
    }
}

/// One reverse step from `t_hi` down to `t_lo`.
pub fn reverse_step<R: Rng + ?Sized>(
    spec: &ProcessSpec,
    field: &dyn ScoreField,
    cfg: &ReverseConfig,
    x: &[f64],
    t_hi: f64,
    t_lo: f64,
    y: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(t_hi > t_lo) {
        return Err(Error::Argument(format!("reverse step needs t_hi > t_lo, got {t_hi} -> {t_lo}")));
    }
    check_dims(x.len(), y.len())?;
    check_bridge_clamp(spec, t_hi)?;
    match cfg.kind {
        SamplerKind::EulerODE => euler_maruyama(spec, field, x, t_hi, t_lo, y, 0.0, rng),
        SamplerKind::EulerSDE => euler_maruyama(spec, field, x, t_hi, t_lo, y, cfg.lambda, rng),
        SamplerKind::MeanODE => {
            let v = reverse_drift(spec, field, x, t_hi, y, 1.0, None)?;
            Ok(euler(x, &v, t_hi - t_lo))
        }
        SamplerKind::Heun2 | SamplerKind::Midpoint2 | SamplerKind::Ralston2 => {
            rk2(spec, field, x, t_hi, t_lo, y, cfg.kind.rk2_stage().unwrap())
        }
        SamplerKind::ExpIntODE => exponential_integrator(spec, field, x, t_hi, t_lo, y),
        SamplerKind::LangevinHeun => {
            let t_mid = t_hi - LANGEVIN_SPLIT * (t_hi - t_lo);
            let noisy = euler_maruyama(spec, field, x, t_hi, t_mid, y, 1.0, rng)?;
            rk2(spec, field, &noisy, t_mid, t_lo, y, 1.0)
        }
        SamplerKind::Ancestral => ancestral_step(spec, field, x, t_hi, t_lo, y, rng),
    }
}

/// Samples `q(x_lo | x_hi, x̂0, y)`, the Gaussian posterior of the forward
/// chain given the field's x0 estimate at `t_hi`.
pub fn ancestral_step<R: Rng + ?Sized>(
    spec: &ProcessSpec,
    field: &dyn ScoreField,
    x: &[f64],
    t_hi: f64,
    t_lo: f64,
    y: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_dims(x.len(), y.len())?;
    let s = field.score(x, t_hi, y)?;
    let x0_hat = x0_from_score(spec, x, &s, y, t_hi)?;
    let prior = spec.kernel(t_lo)?;
    let prior_mean: Vec<f64> = x0_hat
        .iter()
        .zip(y)
        .map(|(&x0i, &yi)| prior.mean(x0i, yi))
        .collect();
    if prior.var == 0.0 {
        return Ok(prior_mean);
    }
    let tr = spec.transition_between(t_lo, t_hi)?;
    if tr.resid_var == 0.0 {
        return Ok(x.iter().zip(y).map(|(xi, yi)| (xi - tr.c * yi) / tr.phi).collect());
    }
    let hi_var = tr.phi * tr.phi * prior.var + tr.resid_var;
    let post_var = prior.var * tr.resid_var / hi_var;
    let sd = post_var.sqrt();
    Ok(prior_mean
        .iter()
        .zip(x.iter().zip(y))
        .map(|(&m, (&xi, &yi))| {
            let mean = post_var * (m / prior.var + tr.phi * (xi - tr.c * yi) / tr.resid_var);
            mean + sd * rng.sample::<f64, _>(StandardNormal)
        })
        .collect())
}

/// Every state of every reverse path, laid out `[path][time][dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryBatch {
    pub times: Vec<f64>,
    pub n_paths: usize,
    pub dim: usize,
    pub seed: u64,
    states: Vec<f64>,
}

impl TrajectoryBatch {
    pub fn from_states(times: Vec<f64>, n_paths: usize, dim: usize, seed: u64, states: Vec<f64>) -> Result<Self> {
        check_dims(n_paths * times.len() * dim, states.len())?;
        Ok(TrajectoryBatch { times, n_paths, dim, seed, states })
    }

    pub fn state(&self, path: usize, step: usize) -> &[f64] {
        let start = (path * self.times.len() + step) * self.dim;
        &self.states[start..start + self.dim]
    }

    pub fn terminal(&self, path: usize) -> &[f64] {
        self.state(path, self.times.len() - 1)
    }

    /// Terminal values of one coordinate across paths.
    pub fn terminal_coordinate(&self, coord: usize) -> Vec<f64> {
        (0..self.n_paths).map(|p| self.terminal(p)[coord]).collect()
    }

    /// Values of one coordinate across paths at a grid index.
    pub fn coordinate_at(&self, step: usize, coord: usize) -> Vec<f64> {
        (0..self.n_paths).map(|p| self.state(p, step)[coord]).collect()
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn is_empty(&self) -> bool {
        self.n_paths == 0
    }

    /// Writes the first `max_paths` paths (all when `None`) as CSV with
    /// columns `path,step,t,x_0..x_{d-1}`. Floats carry 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W, max_paths: Option<usize>) -> std::io::Result<()> {
        write!(w, "path,step,t")?;
        for c in 0..self.dim {
            write!(w, ",x_{c}")?;
        }
        writeln!(w)?;
        let n = max_paths.map_or(self.n_paths, |m| m.min(self.n_paths));
        for p in 0..n {
            for (k, t) in self.times.iter().enumerate() {
                write!(w, "{p},{k},{t:.16e}")?;
                for v in self.state(p, k) {
                    write!(w, ",{v:.16e}")?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }

    /// Everything but the states, for a JSON sidecar.
    pub fn meta(&self) -> TrajectoryMeta {
        TrajectoryMeta {
            seed: self.seed,
            n_paths: self.n_paths,
            dim: self.dim,
            times: self.times.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub seed: u64,
    pub n_paths: usize,
    pub dim: usize,
    pub times: Vec<f64>,
}

/// Runs `n_paths` reverse trajectories from the base distribution. Noise
/// for `(path, step)` comes from its own keyed stream (step 0 draws the
/// initial state), so output is independent of thread count.
pub fn run_reverse(
    spec: &ProcessSpec,
    field: &dyn ScoreField,
    cfg: &ReverseConfig,
    y: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<TrajectoryBatch> {
    spec.validate()?;
    let base = spec.base_dist()?;
    run_reverse_from(spec, field, cfg, y, n_paths, seed, &|rng| Ok(base.sample(y, rng)))
}

/// [`run_reverse`] with a caller-supplied initial law, drawn from the
/// step-0 stream of each path.
pub fn run_reverse_from(
    spec: &ProcessSpec,
    field: &dyn ScoreField,
    cfg: &ReverseConfig,
    y: &[f64],
    n_paths: usize,
    seed: u64,
    init: &(dyn Fn(&mut ChaCha8Rng) -> Result<Vec<f64>> + Sync),
) -> Result<TrajectoryBatch> {
    spec.validate()?;
    let times = cfg.grid.times().to_vec();
    let dim = y.len();
    let paths: Vec<Result<Vec<f64>>> = (0..n_paths)
        .into_par_iter()
        .map(|path| {
            let mut states = Vec::with_capacity(times.len() * dim);
            let mut x = init(&mut keyed_stream(seed, path as u64, 0))?;
            check_dims(dim, x.len())?;
            states.extend_from_slice(&x);
            for (step, w) in times.windows(2).enumerate() {
                let mut rng = keyed_stream(seed, path as u64, step as u64 + 1);
                x = reverse_step(spec, field, cfg, &x, w[0], w[1], y, &mut rng).map_err(|e| Error::Step {
                    path,
                    step,
                    source: Box::new(e),
                })?;
                states.extend_from_slice(&x);
            }
            Ok(states)
        })
        .collect();
    let mut states = Vec::with_capacity(n_paths * times.len() * dim);
    for p in paths {
        states.extend(p?);
    }
    TrajectoryBatch::from_states(times, n_paths, dim, seed, states)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollinearityReport {
    pub times: Vec<f64>,
    /// Mean cosine per grid time; `None` where every path was excluded.
    pub mean_cos: Vec<Option<f64>>,
    /// Path-times dropped because one of the vectors had zero norm.
    pub excluded: usize,
}

impl CollinearityReport {
    /// Mean |cosine| over the last third of the grid (the low-t end).
    pub fn tail_abs_mean(&self) -> Option<f64> {
        let n = self.mean_cos.len();
        let start = n - n / 3;
        let vals: Vec<f64> = self.mean_cos[start..].iter().flatten().map(|c| c.abs()).collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    }
}

/// Cosine similarity between `x_t - y` and `x̂0|t - x_t` along each path,
/// averaged over paths per grid time.
pub fn collinearity_diag(
    batch: &TrajectoryBatch,
    field: &dyn ScoreField,
    spec: &ProcessSpec,
    y: &[f64],
) -> Result<CollinearityReport> {
    if batch.is_empty() {
        return Err(Error::Empty);
    }
    check_dims(batch.dim, y.len())?;
    let mut mean_cos = Vec::with_capacity(batch.times.len());
    let mut excluded = 0;
    for (step, &t) in batch.times.iter().enumerate() {
        let mut total = 0.0;
        let mut count = 0usize;
        for path in 0..batch.n_paths {
            let x = batch.state(path, step);
            let s = field.score(x, t, y)?;
            let x0_hat = x0_from_score(spec, x, &s, y, t)?;
            let (mut dot, mut n1, mut n2) = (0.0, 0.0, 0.0);
            for i in 0..x.len() {
                let u = x[i] - y[i];
                let v = x0_hat[i] - x[i];
                dot += u * v;
                n1 += u * u;
                n2 += v * v;
            }
            if n1 == 0.0 || n2 == 0.0 {
                excluded += 1;
                continue;
            }
            total += (dot / (n1.sqrt() * n2.sqrt())).clamp(-1.0, 1.0);
            count += 1;
        }
        mean_cos.push((count > 0).then(|| total / count as f64));
    }
    Ok(CollinearityReport {
        times: batch.times.clone(),
        mean_cos,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::MethodKind;
    use crate::score::{FnField, KernelConditionalField, Provenance};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid(kind: GridKind, n: usize, t_min: f64, t_max: f64) -> TimeGrid {
        make_grid(GridSpec { kind, n, t_min, t_max }).unwrap()
    }

    #[test]
    fn linear_grid_midpoint() {
        let g = grid(GridKind::Linear, 3, 0.001, 1.0);
        assert_eq!(g.times(), &[1.0, 0.5005, 0.001]);
    }

    #[test]
    fn karras_rho_one_is_linear() {
        for n in [2, 5, 17, 100] {
            let a = grid(GridKind::Linear, n, 0.01, 0.97);
            let b = grid(GridKind::Karras { rho: 1.0 }, n, 0.01, 0.97);
            for (x, y) in a.times().iter().zip(b.times()) {
                assert!((x - y).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn karras_concentrates_low() {
        let below = |g: &TimeGrid| g.times().iter().filter(|&&t| t < 0.3).count();
        let lin = grid(GridKind::Linear, 10, 1e-3, 1.0);
        let kar = grid(GridKind::Karras { rho: 7.0 }, 10, 1e-3, 1.0);
        assert!(below(&kar) > below(&lin));
    }

    #[test]
    fn ddbm_grid_dense_at_both_ends() {
        let g = grid(GridKind::Ddbm { rho: 3.0 }, 21, 1e-3, 0.999);
        let t = g.times();
        let first = t[0] - t[1];
        let middle = t[10] - t[11];
        let last = t[19] - t[20];
        assert!(first < middle && last < middle);
    }

    #[test]
    fn grid_errors() {
        let bad = |n, lo, hi| make_grid(GridSpec { kind: GridKind::Linear, n, t_min: lo, t_max: hi }).is_err();
        assert!(bad(1, 0.1, 1.0));
        assert!(bad(5, 0.5, 0.4));
        assert!(bad(5, 0.0, 1.0));
        assert!(bad(5, 0.1, 1.1));
        assert!(make_grid(GridSpec { kind: GridKind::Karras { rho: 0.0 }, n: 5, t_min: 0.1, t_max: 1.0 }).is_err());
    }

    fn cfg(kind: SamplerKind, lambda: f64) -> ReverseConfig {
        ReverseConfig { lambda, grid: grid(GridKind::Linear, 5, 0.01, 0.9), kind }
    }

    #[test]
    fn ve_with_zero_score_stays_put() {
        let spec = ProcessSpec::original(MethodKind::DmVe);
        let zero = FnField::new(Provenance::Analytic, |x: &[f64], _, _: &[f64]| Ok(vec![0.0; x.len()]));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = reverse_step(&spec, &zero, &cfg(SamplerKind::EulerODE, 0.0), &[0.4], 0.8, 0.6, &[0.0], &mut rng).unwrap();
        assert_eq!(out, vec![0.4]);
    }

    #[test]
    fn noiseless_sde_equals_ode() {
        let spec = ProcessSpec::original(MethodKind::IrSde);
        let field = KernelConditionalField { spec, x0: vec![0.2] };
        let a = reverse_step(&spec, &field, &cfg(SamplerKind::EulerSDE, 0.0), &[0.5], 0.7, 0.6, &[1.0], &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = reverse_step(&spec, &field, &cfg(SamplerKind::EulerODE, 0.0), &[0.5], 0.7, 0.6, &[1.0], &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ancestral_to_zero_returns_x0_estimate() {
        let spec = ProcessSpec::original(MethodKind::DmVp);
        let field = KernelConditionalField { spec, x0: vec![0.25, -0.5] };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let out = ancestral_step(&spec, &field, &[0.1, 0.3], 0.4, 0.0, &[0.0, 0.0], &mut rng).unwrap();
        assert!((out[0] - 0.25).abs() < 1e-12 && (out[1] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn bridge_clamp_enforced() {
        let spec = ProcessSpec::original(MethodKind::Bbdm);
        let field = KernelConditionalField { spec, x0: vec![0.0] };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = reverse_step(&spec, &field, &cfg(SamplerKind::EulerODE, 0.0), &[1.0], 1.0 - 1e-6, 0.9, &[1.0], &mut rng);
        assert!(matches!(err, Err(Error::Singularity { .. })));
    }

    #[test]
    fn empty_batch() {
        let spec = ProcessSpec::original(MethodKind::DmVp);
        let field = KernelConditionalField { spec, x0: vec![0.0] };
        let b = run_reverse(&spec, &field, &cfg(SamplerKind::Ancestral, 1.0), &[0.0], 0, 1).unwrap();
        assert!(b.is_empty() && b.states().is_empty());
    }

    #[test]
    fn csv_layout_and_exact_floats() {
        let b = TrajectoryBatch::from_states(vec![0.9, 0.1], 2, 2, 7, vec![0.1, 0.2, 0.3, 1.0 / 3.0, 5.0, 6.0, 7.0, -8.0]).unwrap();
        let mut out = Vec::new();
        b.write_csv(&mut out, None).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "path,step,t,x_0,x_1");
        assert_eq!(lines.len(), 5);
        let row: Vec<&str> = lines[2].split(',').collect();
        assert_eq!(&row[..2], &["0", "1"]);
        assert_eq!(row[4].parse::<f64>().unwrap(), 1.0 / 3.0);
        let mut first = Vec::new();
        b.write_csv(&mut first, Some(1)).unwrap();
        assert_eq!(String::from_utf8(first).unwrap().lines().count(), 3);
    }

    #[test]
    fn step_errors_carry_location() {
        let spec = ProcessSpec::original(MethodKind::DmVp);
        let failing = FnField::new(Provenance::Learned, |_: &[f64], t, _: &[f64]| {
            if t < 0.5 {
                Err(Error::Argument("boom".into()))
            } else {
                Ok(vec![0.0])
            }
        });
        let err = run_reverse(&spec, &failing, &cfg(SamplerKind::EulerODE, 0.0), &[0.0], 3, 1).unwrap_err();
        match err {
            Error::Step { path, step, .. } => assert_eq!((path, step), (0, 2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn collinearity_antiparallel_and_orthogonal() {
        let spec = ProcessSpec::original(MethodKind::IrSde);
        let y = vec![0.5, -0.5];
        let states = vec![1.0, 1.0, 2.0, 0.0];
        let batch = TrajectoryBatch::from_states(vec![0.6, 0.3], 1, 2, 0, states).unwrap();
        // field whose x0 estimate is y itself
        let to_y = KernelConditionalField { spec, x0: y.clone() };
        let r = collinearity_diag(&batch, &to_y, &spec, &y).unwrap();
        for c in &r.mean_cos {
            assert!((c.unwrap() + 1.0).abs() < 1e-9);
        }
        // x0 estimate = x + rotation of (x - y) by 90 degrees
        let k = spec.kernel(0.6).unwrap();
        let x = [1.0, 1.0];
        let d = [x[0] - y[0], x[1] - y[1]];
        let target = [x[0] - d[1], x[1] + d[0]];
        let field = FnField::new(Provenance::Analytic, move |x: &[f64], t, y: &[f64]| {
            let k2 = spec.kernel(t).unwrap();
            assert_eq!(k2, k);
            Ok((0..2).map(|i| (k.a * target[i] + k.b * y[i] - x[i]) / k.var).collect())
        });
        let single = TrajectoryBatch::from_states(vec![0.6], 1, 2, 0, x.to_vec()).unwrap();
        let r = collinearity_diag(&single, &field, &spec, &y).unwrap();
        assert!(r.mean_cos[0].unwrap().abs() < 1e-9);
    }
}
