//! Score fields and the affine conversions between score, x0- and
//! eps-parameterisations.
//!
//! With `x_t ~ N(a x0 + b y, var)` the three network outputs are related by
//!
//! ```text
//! score = (a x0 + b y - x) / var
//! eps   = -sqrt(var) * score
//! x0    = (x + var * score - b y) / a
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::process::ProcessSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parameterization {
    Score,
    X0Pred,
    EpsPred,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Analytic,
    Learned,
    KernelConditional,
}

/// An estimate of `∇_x log p_t(x | y)`.
pub trait ScoreField: Sync {
    fn score(&self, x: &[f64], t: f64, y: &[f64]) -> Result<Vec<f64>>;

    fn provenance(&self) -> Provenance;
}

impl<F: ScoreField + ?Sized> ScoreField for &F {
    fn score(&self, x: &[f64], t: f64, y: &[f64]) -> Result<Vec<f64>> {
        (**self).score(x, t, y)
    }

    fn provenance(&self) -> Provenance {
        (**self).provenance()
    }
}

/// Score of the transition kernel from a known `x0`; the "perfect
/// denoiser" field.
#[derive(Debug, Clone)]
pub struct KernelConditionalField {
    pub spec: ProcessSpec,
    pub x0: Vec<f64>,
}

impl ScoreField for KernelConditionalField {
    fn score(&self, x: &[f64], t: f64, y: &[f64]) -> Result<Vec<f64>> {
        kernel_score(&self.spec, x, &self.x0, y, t)
    }

    fn provenance(&self) -> Provenance {
        Provenance::KernelConditional
    }
}

/// Wraps a closure as a score field.
pub struct FnField<F> {
    f: F,
    provenance: Provenance,
}

impl<F> FnField<F>
where
    F: Fn(&[f64], f64, &[f64]) -> Result<Vec<f64>> + Sync,
{
    pub fn new(provenance: Provenance, f: F) -> Self {
        FnField { f, provenance }
    }
}

impl<F> ScoreField for FnField<F>
where
    F: Fn(&[f64], f64, &[f64]) -> Result<Vec<f64>> + Sync,
{
    fn score(&self, x: &[f64], t: f64, y: &[f64]) -> Result<Vec<f64>> {
        (self.f)(x, t, y)
    }

    fn provenance(&self) -> Provenance {
        self.provenance
    }
}

fn positive_var(spec: &ProcessSpec, t: f64) -> Result<crate::process::KernelCoeffs> {
    let k = spec.kernel(t)?;
    if k.var > 0.0 {
        Ok(k)
    } else {
        Err(Error::Degenerate {
            t,
            what: "kernel variance is zero",
        })
    }
}

/// `∇_x log N(x; a x0 + b y, var I)`.
pub fn kernel_score(spec: &ProcessSpec, x: &[f64], x0: &[f64], y: &[f64], t: f64) -> Result<Vec<f64>> {
    check_dims(x.len(), x0.len())?;
    check_dims(x.len(), y.len())?;
    let k = positive_var(spec, t)?;
    Ok(x.iter()
        .zip(x0)
        .zip(y)
        .map(|((&xi, &x0i), &yi)| (k.a * x0i + k.b * yi - xi) / k.var)
        .collect())
}

/// Score implied by an x0 prediction. Same algebra as [`kernel_score`].
pub fn score_from_x0(spec: &ProcessSpec, x: &[f64], x0_hat: &[f64], y: &[f64], t: f64) -> Result<Vec<f64>> {
    kernel_score(spec, x, x0_hat, y, t)
}

/// Inverts the kernel score: the x0 for which `s` is the kernel score at `x`.
pub fn x0_from_score(spec: &ProcessSpec, x: &[f64], s: &[f64], y: &[f64], t: f64) -> Result<Vec<f64>> {
    check_dims(x.len(), s.len())?;
    check_dims(x.len(), y.len())?;
    let k = spec.kernel(t)?;
    if k.a == 0.0 {
        return Err(Error::Degenerate {
            t,
            what: "kernel mean does not depend on x0",
        });
    }
    Ok(x.iter()
        .zip(s)
        .zip(y)
        .map(|((&xi, &si), &yi)| (xi + k.var * si - k.b * yi) / k.a)
        .collect())
}

pub fn eps_from_score(spec: &ProcessSpec, s: &[f64], t: f64) -> Result<Vec<f64>> {
    let sd = positive_var(spec, t)?.var.sqrt();
    Ok(s.iter().map(|&si| -sd * si).collect())
}

pub fn score_from_eps(spec: &ProcessSpec, e: &[f64], t: f64) -> Result<Vec<f64>> {
    let sd = positive_var(spec, t)?.var.sqrt();
    Ok(e.iter().map(|&ei| -ei / sd).collect())
}

/// Regression target for a kernel sample `xt` drawn from `(x0, y, t)`.
pub fn training_target(
    spec: &ProcessSpec,
    x0: &[f64],
    y: &[f64],
    t: f64,
    param: Parameterization,
    xt: &[f64],
) -> Result<Vec<f64>> {
    match param {
        Parameterization::Score => kernel_score(spec, xt, x0, y, t),
        Parameterization::X0Pred => {
            check_dims(x0.len(), xt.len())?;
            Ok(x0.to_vec())
        }
        Parameterization::EpsPred => {
            check_dims(x0.len(), xt.len())?;
            check_dims(y.len(), xt.len())?;
            let k = positive_var(spec, t)?;
            let sd = k.var.sqrt();
            Ok(xt
                .iter()
                .zip(x0)
                .zip(y)
                .map(|((&xi, &x0i), &yi)| (xi - k.a * x0i - k.b * yi) / sd)
                .collect())
        }
    }
}
