//! Closed-form noise schedulers.
//!
//! Every scheduler supplies the rate `beta(t)`, its integral
//! `alpha(s, t) = ∫_s^t beta(z) dz` and the decay `phi(s, t) = exp(-alpha(s, t))`,
//! all evaluated analytically so any time grid can be used without
//! re-tabulating.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A noise scheduler `beta_t > 0` on `[0, 1]` (`[0, 1)` for [`Scheduler::Inversed`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum Scheduler {
    Linear { beta_min: f64, beta_max: f64 },
    Cosine { eps: f64, delta: f64 },
    Exponential { eta_min: f64, eta_max: f64, p: f64 },
    Inversed,
    QuadraticSymmetric { beta_min: f64, beta_max: f64 },
    Constant { beta: f64 },
}

/// Intermediate cosine-scheduler functions, exposed for diagnostics only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosineParts {
    pub g: f64,
    pub h: f64,
    pub f: f64,
}

impl Scheduler {
    pub const DEFAULT_LINEAR: Scheduler = Scheduler::Linear {
        beta_min: 0.1,
        beta_max: 20.0,
    };
    pub const DEFAULT_COSINE: Scheduler = Scheduler::Cosine {
        eps: 0.008,
        delta: 0.005,
    };
    pub const DEFAULT_EXPONENTIAL: Scheduler = Scheduler::Exponential {
        eta_min: 0.1,
        eta_max: 0.9,
        p: 1.0,
    };
    pub const DEFAULT_QUADRATIC_SYMMETRIC: Scheduler = Scheduler::QuadraticSymmetric {
        beta_min: 0.1,
        beta_max: 20.0,
    };
    pub const DEFAULT_CONSTANT: Scheduler = Scheduler::Constant { beta: 1.0 };

    /// The six scheduler kinds with their default parameters.
    pub fn defaults() -> [Scheduler; 6] {
        [
            Self::DEFAULT_LINEAR,
            Self::DEFAULT_COSINE,
            Self::DEFAULT_EXPONENTIAL,
            Scheduler::Inversed,
            Self::DEFAULT_QUADRATIC_SYMMETRIC,
            Self::DEFAULT_CONSTANT,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scheduler::Linear { .. } => "Linear",
            Scheduler::Cosine { .. } => "Cosine",
            Scheduler::Exponential { .. } => "Exponential",
            Scheduler::Inversed => "Inversed",
            Scheduler::QuadraticSymmetric { .. } => "QuadraticSymmetric",
            Scheduler::Constant { .. } => "Constant",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Scheduler::Linear { beta_min, beta_max }
            | Scheduler::QuadraticSymmetric { beta_min, beta_max } => {
                beta_min > 0.0 && beta_max >= beta_min && beta_max.is_finite()
            }
            Scheduler::Cosine { eps, delta } => eps > 0.0 && delta > 0.0 && delta < 1.0,
            Scheduler::Exponential { eta_min, eta_max, p } => {
                eta_min > 0.0 && eta_max > eta_min && eta_max < 1.0 && p > 0.0 && p.is_finite()
            }
            Scheduler::Inversed => true,
            Scheduler::Constant { beta } => beta > 0.0 && beta.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Argument(format!("invalid scheduler parameters {self:?}")))
        }
    }

    /// Whether `t = 1` lies in the domain (false only for `Inversed`).
    pub fn includes_one(&self) -> bool {
        !matches!(self, Scheduler::Inversed)
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        let ok = if self.includes_one() {
            (0.0..=1.0).contains(&t)
        } else {
            (0.0..1.0).contains(&t)
        };
        if ok {
            Ok(())
        } else {
            let domain = if self.includes_one() { "[0, 1]" } else { "[0, 1)" };
            Err(Error::Domain { t, domain })
        }
    }

    pub fn beta(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        let b = match *self {
            Scheduler::Linear { beta_min, beta_max } => (beta_max - beta_min) * t + beta_min,
            Scheduler::Cosine { eps, delta } => {
                -delta.ln() * cosine_parts(eps, t).f / cosine_integral(eps, 0.0, 1.0)
            }
            Scheduler::Exponential { eta_min, eta_max, p } => {
                // d/dt of log((1 - u(0)) / (1 - u(t))) with u(t) = eta_min^2 (eta_max/eta_min)^(2 t^p)
                let log_ratio = (eta_max / eta_min).ln();
                let u = exponential_u(eta_min, eta_max, p, t);
                let du = u * 2.0 * log_ratio * p * t.powf(p - 1.0);
                du / (1.0 - u)
            }
            Scheduler::Inversed => 1.0 / (1.0 - t),
            Scheduler::QuadraticSymmetric { beta_min, beta_max } => {
                let lo = beta_min.sqrt();
                let root = (beta_max.sqrt() - lo) * (0.5 - (0.5 - t).abs()) + lo;
                root * root
            }
            Scheduler::Constant { beta } => beta,
        };
        if b.is_finite() {
            Ok(b)
        } else {
            Err(Error::Domain {
                t,
                domain: "(0, 1] (beta diverges at 0 for p < 1)",
            })
        }
    }

    /// `alpha(s, t) = ∫_s^t beta(z) dz` for `s <= t`.
    pub fn alpha(&self, s: f64, t: f64) -> Result<f64> {
        self.check_domain(s)?;
        self.check_domain(t)?;
        if s > t {
            return Err(Error::Argument(format!("alpha requires s <= t, got s={s}, t={t}")));
        }
        let a = match *self {
            Scheduler::Linear { beta_min, beta_max } => {
                0.5 * (beta_max - beta_min) * (t - s) * (t + s) + beta_min * (t - s)
            }
            Scheduler::Cosine { eps, delta } => {
                -delta.ln() * cosine_integral(eps, s, t) / cosine_integral(eps, 0.0, 1.0)
            }
            Scheduler::Exponential { eta_min, eta_max, p } => {
                let us = exponential_u(eta_min, eta_max, p, s);
                let ut = exponential_u(eta_min, eta_max, p, t);
                ((1.0 - us) / (1.0 - ut)).ln()
            }
            Scheduler::Inversed => ((1.0 - s) / (1.0 - t)).ln(),
            Scheduler::QuadraticSymmetric { beta_min, beta_max } => {
                quadratic_symmetric_alpha(beta_min, beta_max, t)
                    - quadratic_symmetric_alpha(beta_min, beta_max, s)
            }
            Scheduler::Constant { beta } => beta * (t - s),
        };
        // closed forms built from differences can round a hair below zero
        Ok(a.max(0.0))
    }

    pub fn phi(&self, s: f64, t: f64) -> Result<f64> {
        Ok((-self.alpha(s, t)?).exp())
    }

    /// Cosine intermediates `g`, `h`, `f` at `t`; `None` for other kinds.
    pub fn cosine_diagnostics(&self, t: f64) -> Option<CosineParts> {
        match *self {
            Scheduler::Cosine { eps, .. } => Some(cosine_parts(eps, t)),
            _ => None,
        }
    }

    /// Closed-form `F(s, t) = ∫_s^t f(z) dz` of the cosine scheduler.
    pub fn cosine_f_integral(&self, s: f64, t: f64) -> Option<f64> {
        match *self {
            Scheduler::Cosine { eps, .. } => Some(cosine_integral(eps, s, t)),
            _ => None,
        }
    }
}

fn cosine_g(eps: f64, t: f64) -> f64 {
    ((t + eps) / (1.0 + eps) * PI / 2.0).cos().powi(2)
}

fn cosine_h(eps: f64, t: f64) -> f64 {
    ((t + eps) / (1.0 + eps) * PI).sin()
}

fn cosine_parts(eps: f64, t: f64) -> CosineParts {
    let g = cosine_g(eps, t);
    CosineParts {
        g,
        h: cosine_h(eps, t),
        f: 1.0 - g / cosine_g(eps, 0.0),
    }
}

fn cosine_integral(eps: f64, s: f64, t: f64) -> f64 {
    let g0 = cosine_g(eps, 0.0);
    t - s + ((s - t) * PI + (1.0 + eps) * (cosine_h(eps, s) - cosine_h(eps, t))) / (2.0 * PI * g0)
}

fn exponential_u(eta_min: f64, eta_max: f64, p: f64, t: f64) -> f64 {
    eta_min * eta_min * (eta_max / eta_min).powf(2.0 * t.powf(p))
}

fn quadratic_symmetric_alpha(beta_min: f64, beta_max: f64, t: f64) -> f64 {
    let lo = beta_min.sqrt();
    let d = beta_max.sqrt() - lo;
    let rising = |t: f64| d * d * t.powi(3) / 3.0 + d * lo * t * t + beta_min * t;
    let falling =
        |t: f64| d * d * (t - t * t + t.powi(3) / 3.0) + d * lo * (2.0 * t - t * t) + beta_min * t;
    if t <= 0.5 {
        rising(t)
    } else {
        falling(t) - falling(0.5) + rising(0.5)
    }
}
