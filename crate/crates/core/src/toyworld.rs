//! Analytic toy world: a 1-D Gaussian-mixture prior observed through a
//! linear-Gaussian degradation `y = c x0 + s_y ζ`.
//!
//! Because every kernel is affine-Gaussian, `p_t(x_t | y)` is again a finite
//! Gaussian mixture and its score is available in closed form. Vector
//! states are treated as independent copies of the scalar world.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::process::{KernelCoeffs, ProcessSpec};
use crate::score::{Provenance, ScoreField};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureModel {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl MixtureModel {
    pub fn new(weights: Vec<f64>, means: Vec<f64>, stds: Vec<f64>) -> Result<Self> {
        let m = MixtureModel { weights, means, stds };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.weights.len();
        if k == 0 || self.means.len() != k || self.stds.len() != k {
            return Err(Error::Argument("mixture needs K >= 1 matching weights/means/stds".into()));
        }
        if self.weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::Argument("mixture weights must be non-negative".into()));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Argument(format!("mixture weights sum to {total}, not 1")));
        }
        if self.stds.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::Argument("mixture stds must be positive".into()));
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        self.weights.iter().zip(&self.means).map(|(w, m)| w * m).sum()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.stds)
            .map(|((w, m), s)| w * (s * s + (m - mean).powi(2)))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Degradation {
    pub scale: f64,
    pub noise_std: f64,
}

impl Degradation {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_std >= 0.0) || !self.scale.is_finite() {
            return Err(Error::Argument("degradation needs finite scale and noise_std >= 0".into()));
        }
        if self.noise_std == 0.0 && self.scale == 0.0 {
            return Err(Error::Argument("noiseless degradation with zero scale carries no signal".into()));
        }
        Ok(())
    }
}

/// Exact `p(x0 | y)`, itself a Gaussian mixture. A variance of 0 marks a
/// point mass.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorMixture {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub vars: Vec<f64>,
}

impl PosteriorMixture {
    pub fn mean(&self) -> f64 {
        self.weights.iter().zip(&self.means).map(|(w, m)| w * m).sum()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.vars)
            .map(|((w, m), v)| w * (v + (m - mean).powi(2)))
            .sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let k = pick(&self.weights, rng.random());
        self.means[k] + self.vars[k].sqrt() * rng.sample::<f64, _>(StandardNormal)
    }
}

fn pick(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (k, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return k;
        }
    }
    weights.len() - 1
}

fn log_normal(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((2.0 * PI * var).ln() + (x - mean).powi(2) / var)
}

/// Normalises log-weights in place and returns the log normaliser.
fn softmax_in_place(logits: &mut [f64]) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = logits.iter().map(|l| (l - max).exp()).sum();
    let log_z = max + total.ln();
    for l in logits.iter_mut() {
        *l = (*l - log_z).exp();
    }
    log_z
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyWorld {
    pub prior: MixtureModel,
    pub degradation: Degradation,
}

impl Default for ToyWorld {
    /// Bimodal prior at ±1 (std 0.2) seen through `y = x0 + 0.8 ζ`.
    fn default() -> Self {
        ToyWorld {
            prior: MixtureModel {
                weights: vec![0.5, 0.5],
                means: vec![-1.0, 1.0],
                stds: vec![0.2, 0.2],
            },
            degradation: Degradation {
                scale: 1.0,
                noise_std: 0.8,
            },
        }
    }
}

/// Components of `p_t(x_t | y)`.
struct MarginalComponents {
    weights: Vec<f64>,
    means: Vec<f64>,
    vars: Vec<f64>,
}

impl ToyWorld {
    pub fn new(prior: MixtureModel, degradation: Degradation) -> Result<Self> {
        let w = ToyWorld { prior, degradation };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        self.prior.validate()?;
        self.degradation.validate()
    }

    pub fn posterior(&self, y: f64) -> PosteriorMixture {
        let Degradation { scale: c, noise_std: sy } = self.degradation;
        if sy == 0.0 {
            return PosteriorMixture {
                weights: vec![1.0],
                means: vec![y / c],
                vars: vec![0.0],
            };
        }
        let sy2 = sy * sy;
        let p = &self.prior;
        let mut weights: Vec<f64> = p
            .weights
            .iter()
            .zip(&p.means)
            .zip(&p.stds)
            .map(|((w, m), s)| w.ln() + log_normal(y, c * m, c * c * s * s + sy2))
            .collect();
        softmax_in_place(&mut weights);
        let (means, vars) = p
            .means
            .iter()
            .zip(&p.stds)
            .map(|(m, s)| {
                let prec = 1.0 / (s * s) + c * c / sy2;
                ((m / (s * s) + c * y / sy2) / prec, 1.0 / prec)
            })
            .unzip();
        PosteriorMixture { weights, means, vars }
    }

    fn marginal_components(&self, k: &KernelCoeffs, y: f64) -> MarginalComponents {
        let post = self.posterior(y);
        MarginalComponents {
            means: post.means.iter().map(|m| k.a * m + k.b * y).collect(),
            vars: post.vars.iter().map(|v| k.a * k.a * v + k.var).collect(),
            weights: post.weights,
        }
    }

    fn responsibilities(comps: &MarginalComponents, x: f64) -> Vec<f64> {
        let mut r: Vec<f64> = comps
            .weights
            .iter()
            .zip(&comps.means)
            .zip(&comps.vars)
            .map(|((w, m), v)| w.ln() + log_normal(x, *m, *v))
            .collect();
        softmax_in_place(&mut r);
        r
    }

    /// `log p_t(x | y)`.
    pub fn marginal_log_density(&self, spec: &ProcessSpec, x: f64, t: f64, y: f64) -> Result<f64> {
        let comps = self.marginal_components(&spec.kernel(t)?, y);
        if comps.vars.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Degenerate { t, what: "marginal mixture has a zero-variance component" });
        }
        let mut logits: Vec<f64> = comps
            .weights
            .iter()
            .zip(&comps.means)
            .zip(&comps.vars)
            .map(|((w, m), v)| w.ln() + log_normal(x, *m, *v))
            .collect();
        Ok(softmax_in_place(&mut logits))
    }

    /// Exact `∇_x log p_t(x | y)`.
    pub fn marginal_score(&self, spec: &ProcessSpec, x: f64, t: f64, y: f64) -> Result<f64> {
        let comps = self.marginal_components(&spec.kernel(t)?, y);
        if comps.vars.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Degenerate { t, what: "marginal mixture has a zero-variance component" });
        }
        let r = Self::responsibilities(&comps, x);
        Ok(r.iter()
            .zip(&comps.means)
            .zip(&comps.vars)
            .map(|((r, m), v)| r * (m - x) / v)
            .sum())
    }

    /// `E[x0 | x_t = x, y]` by Bayes over components (gain form).
    pub fn posterior_mean_given_xt(&self, spec: &ProcessSpec, x: f64, t: f64, y: f64) -> Result<f64> {
        let k = spec.kernel(t)?;
        let post = self.posterior(y);
        let comps = self.marginal_components(&k, y);
        if comps.vars.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Degenerate { t, what: "x_t carries no density" });
        }
        let r = Self::responsibilities(&comps, x);
        Ok(r.iter()
            .zip(post.means.iter().zip(&post.vars))
            .zip(&comps.vars)
            .map(|((r, (m, v)), total)| {
                let innovation = x - k.a * m - k.b * y;
                r * (m + v * k.a * innovation / total)
            })
            .sum())
    }

    /// Mean and variance of `p_t(x | y)`.
    pub fn marginal_moments(&self, spec: &ProcessSpec, t: f64, y: f64) -> Result<(f64, f64)> {
        let comps = self.marginal_components(&spec.kernel(t)?, y);
        let mean: f64 = comps.weights.iter().zip(&comps.means).map(|(w, m)| w * m).sum();
        let var = comps
            .weights
            .iter()
            .zip(&comps.means)
            .zip(&comps.vars)
            .map(|((w, m), v)| w * (v + (m - mean).powi(2)))
            .sum();
        Ok((mean, var))
    }

    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let p = &self.prior;
        let k = pick(&p.weights, rng.random());
        let x0 = p.means[k] + p.stds[k] * rng.sample::<f64, _>(StandardNormal);
        let Degradation { scale, noise_std } = self.degradation;
        let y = scale * x0 + noise_std * rng.sample::<f64, _>(StandardNormal);
        (x0, y)
    }

    /// Independent coordinates, each drawn from the scalar world.
    pub fn sample_pair_vec<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        (0..dim).map(|_| self.sample_pair(rng)).unzip()
    }
}

/// The exact marginal score of a toy world under a given process.
#[derive(Debug, Clone)]
pub struct MarginalScoreField {
    pub world: ToyWorld,
    pub spec: ProcessSpec,
}

impl ScoreField for MarginalScoreField {
    fn score(&self, x: &[f64], t: f64, y: &[f64]) -> Result<Vec<f64>> {
        check_dims(x.len(), y.len())?;
        x.iter()
            .zip(y)
            .map(|(&xi, &yi)| self.world.marginal_score(&self.spec, xi, t, yi))
            .collect()
    }

    fn provenance(&self) -> Provenance {
        Provenance::Analytic
    }
}
