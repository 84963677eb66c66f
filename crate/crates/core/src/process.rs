//! The unified process family.
//!
//! Each [`MethodKind`] is a linear SDE `dx = f(x, t, y) dt + g(t) dw` whose
//! drift is affine in `(x, y)`. The transition law from `x0` is Gaussian,
//! `N(a_t x0 + b_t y, var_t I)`, so everything downstream works with three
//! scalars per time.

use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::sched::Scheduler;

/// Closest a bridge drift may be evaluated to `t = 1`.
pub const BRIDGE_SINGULARITY_EPS: f64 = 1e-12;

/// Residual variances above `-RESID_VAR_CLAMP` are rounding noise and clamp to 0.
pub const RESID_VAR_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MethodKind {
    #[serde(rename = "DM_VE")]
    DmVe,
    #[serde(rename = "DM_VP")]
    DmVp,
    #[serde(rename = "FM")]
    Fm,
    #[serde(rename = "IR_SDE")]
    IrSde,
    ResShift,
    InDI,
    #[serde(rename = "BBDM")]
    Bbdm,
    #[serde(rename = "DDBM_VE")]
    DdbmVe,
    #[serde(rename = "DDBM_VP")]
    DdbmVp,
    I2SB,
    #[serde(rename = "GOUB")]
    Goub,
    UniDB,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Unconditional,
    OrnsteinUhlenbeck,
    Bridge,
}

impl MethodKind {
    pub const ALL: [MethodKind; 12] = [
        MethodKind::DmVe,
        MethodKind::DmVp,
        MethodKind::Fm,
        MethodKind::IrSde,
        MethodKind::ResShift,
        MethodKind::InDI,
        MethodKind::Bbdm,
        MethodKind::DdbmVe,
        MethodKind::DdbmVp,
        MethodKind::I2SB,
        MethodKind::Goub,
        MethodKind::UniDB,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MethodKind::DmVe => "DM_VE",
            MethodKind::DmVp => "DM_VP",
            MethodKind::Fm => "FM",
            MethodKind::IrSde => "IR_SDE",
            MethodKind::ResShift => "ResShift",
            MethodKind::InDI => "InDI",
            MethodKind::Bbdm => "BBDM",
            MethodKind::DdbmVe => "DDBM_VE",
            MethodKind::DdbmVp => "DDBM_VP",
            MethodKind::I2SB => "I2SB",
            MethodKind::Goub => "GOUB",
            MethodKind::UniDB => "UniDB",
        }
    }

    pub fn family(self) -> Family {
        use MethodKind::*;
        match self {
            DmVe | DmVp | Fm => Family::Unconditional,
            IrSde | ResShift | InDI => Family::OrnsteinUhlenbeck,
            Bbdm | DdbmVe | DdbmVp | I2SB | Goub | UniDB => Family::Bridge,
        }
    }

    pub fn is_bridge(self) -> bool {
        self.family() == Family::Bridge
    }

    /// Whether the temperature enters the definition.
    pub fn uses_tau(self) -> bool {
        use MethodKind::*;
        matches!(self, IrSde | ResShift | InDI | Goub | UniDB)
    }

    /// Scheduler the method originally shipped with. `DM_VE` has no original
    /// entry and borrows the linear default.
    pub fn original_scheduler(self) -> Scheduler {
        use MethodKind::*;
        match self {
            DmVe | DmVp | DdbmVe | DdbmVp => Scheduler::DEFAULT_LINEAR,
            Fm | InDI => Scheduler::Inversed,
            IrSde | Goub | UniDB => Scheduler::DEFAULT_COSINE,
            ResShift => Scheduler::DEFAULT_EXPONENTIAL,
            Bbdm => Scheduler::DEFAULT_CONSTANT,
            I2SB => Scheduler::DEFAULT_QUADRATIC_SYMMETRIC,
        }
    }

    /// Original temperature, 1 where the method has none.
    pub fn original_tau(self) -> f64 {
        use MethodKind::*;
        match self {
            IrSde => 0.20,
            ResShift => 2.00,
            InDI => 0.06,
            Goub | UniDB => 0.34,
            _ => 1.0,
        }
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MethodKind::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Argument(format!("unknown method {s:?}")))
    }
}

/// Drift `f(x, t, y) = on_x * x + on_y * y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftCoeffs {
    pub on_x: f64,
    pub on_y: f64,
}

/// Gaussian transition law `N(a x0 + b y, var I)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelCoeffs {
    pub a: f64,
    pub b: f64,
    pub var: f64,
}

impl KernelCoeffs {
    pub fn mean(&self, x0: f64, y: f64) -> f64 {
        self.a * x0 + self.b * y
    }
}

/// `p(x_t | x_s, y) = N(phi * x_s + c * y, resid_var I)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub phi: f64,
    pub c: f64,
    pub resid_var: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Center {
    Zero,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BaseDist {
    Gaussian { center: Center, var: f64 },
    DiracAtY,
}

impl BaseDist {
    pub fn sample<R: Rng + ?Sized>(&self, y: &[f64], rng: &mut R) -> Vec<f64> {
        match *self {
            BaseDist::DiracAtY => y.to_vec(),
            BaseDist::Gaussian { center, var } => {
                let sd = var.sqrt();
                y.iter()
                    .map(|&yi| {
                        let c = match center {
                            Center::Zero => 0.0,
                            Center::Y => yi,
                        };
                        c + sd * rng.sample::<f64, _>(StandardNormal)
                    })
                    .collect()
            }
        }
    }
}

/// A fully parameterised forward process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessSpec {
    pub method: MethodKind,
    pub sched: Scheduler,
    /// Temperature; ignored by methods without one.
    pub tau: f64,
    /// Terminal-cost weight, UniDB only.
    pub gamma: f64,
}

pub const DEFAULT_GAMMA: f64 = 1e4;

impl ProcessSpec {
    pub fn new(method: MethodKind, sched: Scheduler) -> Result<Self> {
        let spec = ProcessSpec {
            method,
            sched,
            tau: 1.0,
            gamma: DEFAULT_GAMMA,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The method with its original scheduler and temperature.
    pub fn original(method: MethodKind) -> Self {
        ProcessSpec {
            method,
            sched: method.original_scheduler(),
            tau: method.original_tau(),
            gamma: DEFAULT_GAMMA,
        }
    }

    pub fn with_tau(mut self, tau: f64) -> Result<Self> {
        self.tau = tau;
        self.validate()?;
        Ok(self)
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        self.gamma = gamma;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.sched.validate()?;
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Argument(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::Argument(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.method.is_bridge() && !self.sched.includes_one() {
            return Err(Error::Argument(format!(
                "{} needs a scheduler defined at t = 1, {} is not",
                self.method,
                self.sched.name()
            )));
        }
        Ok(())
    }

    fn tau_sq(&self) -> f64 {
        self.tau * self.tau
    }

    /// `1 + 1/(gamma tau^2)`, the UniDB analogue of GOUB's 1.
    fn unidb_level(&self) -> f64 {
        1.0 + 1.0 / (self.gamma * self.tau_sq())
    }

    pub fn drift_coeffs(&self, t: f64) -> Result<DriftCoeffs> {
        use MethodKind::*;
        if self.method.is_bridge() && t >= 1.0 - BRIDGE_SINGULARITY_EPS {
            return Err(Error::Singularity { method: self.method, t });
        }
        let beta = self.sched.beta(t)?;
        let coeffs = match self.method {
            DmVe => DriftCoeffs { on_x: 0.0, on_y: 0.0 },
            DmVp | Fm => DriftCoeffs { on_x: -beta, on_y: 0.0 },
            IrSde | ResShift | InDI => DriftCoeffs { on_x: -beta, on_y: beta },
            Bbdm | DdbmVe | I2SB => {
                let k = beta / self.sched.alpha(t, 1.0)?;
                DriftCoeffs { on_x: -k, on_y: k }
            }
            DdbmVp => {
                let to_end = self.sched.alpha(t, 1.0)?;
                let q = (-2.0 * to_end).exp();
                let one_minus_q = -(-2.0 * to_end).exp_m1();
                DriftCoeffs {
                    on_x: -beta * (1.0 + q) / one_minus_q,
                    on_y: beta * 2.0 * (-to_end).exp() / one_minus_q,
                }
            }
            Goub => {
                let to_end = self.sched.alpha(t, 1.0)?;
                let q = (-2.0 * to_end).exp();
                let k = beta * (1.0 + q) / -(-2.0 * to_end).exp_m1();
                DriftCoeffs { on_x: -k, on_y: k }
            }
            UniDB => {
                let q = self.sched.phi(t, 1.0)?.powi(2);
                let level = self.unidb_level();
                let k = beta * (level + q) / (level - q);
                DriftCoeffs { on_x: -k, on_y: k }
            }
        };
        Ok(coeffs)
    }

    pub fn drift(&self, x: &[f64], t: f64, y: &[f64]) -> Result<Vec<f64>> {
        check_dims(x.len(), y.len())?;
        let c = self.drift_coeffs(t)?;
        Ok(x.iter().zip(y).map(|(&xi, &yi)| c.on_x * xi + c.on_y * yi).collect())
    }

    /// Squared diffusion coefficient `g(t)^2`.
    pub fn diffusion_sq(&self, t: f64) -> Result<f64> {
        use MethodKind::*;
        let beta = self.sched.beta(t)?;
        let tau_sq = self.tau_sq();
        let g2 = match self.method {
            DmVe | Bbdm | DdbmVe | I2SB => beta,
            DmVp | DdbmVp => 2.0 * beta,
            Fm => 2.0 * (1.0 - self.sched.phi(0.0, t)?) * beta,
            IrSde | Goub | UniDB => 2.0 * tau_sq * beta,
            ResShift => tau_sq * (2.0 - self.sched.phi(0.0, t)?) * beta,
            InDI => 2.0 * tau_sq * (1.0 - self.sched.phi(0.0, t)?) * beta,
        };
        Ok(g2)
    }

    pub fn kernel(&self, t: f64) -> Result<KernelCoeffs> {
        use MethodKind::*;
        let alpha_t = self.sched.alpha(0.0, t)?;
        let phi_t = (-alpha_t).exp();
        let one_minus_phi = -(-alpha_t).exp_m1();
        let one_minus_phi_sq = -(-2.0 * alpha_t).exp_m1();
        let tau_sq = self.tau_sq();
        let k = match self.method {
            DmVe => KernelCoeffs { a: 1.0, b: 0.0, var: alpha_t },
            DmVp => KernelCoeffs { a: phi_t, b: 0.0, var: one_minus_phi_sq },
            Fm => KernelCoeffs { a: phi_t, b: 0.0, var: one_minus_phi * one_minus_phi },
            IrSde | ResShift | InDI => {
                let var = match self.method {
                    IrSde => tau_sq * one_minus_phi_sq,
                    ResShift => tau_sq * one_minus_phi,
                    _ => tau_sq * one_minus_phi * one_minus_phi,
                };
                KernelCoeffs { a: phi_t, b: one_minus_phi, var }
            }
            Bbdm | DdbmVe | I2SB => {
                let total = self.sched.alpha(0.0, 1.0)?;
                let to_end = self.sched.alpha(t, 1.0)?;
                KernelCoeffs {
                    a: to_end / total,
                    b: alpha_t / total,
                    var: alpha_t * to_end / total,
                }
            }
            DdbmVp | Goub | UniDB => {
                let total = self.sched.alpha(0.0, 1.0)?;
                let to_end = self.sched.alpha(t, 1.0)?;
                // zero slack recovers the h-transform bridges
                let slack = if self.method == UniDB {
                    1.0 / (self.gamma * tau_sq)
                } else {
                    0.0
                };
                let head = slack - (-2.0 * to_end).exp_m1();
                let denom = slack - (-2.0 * total).exp_m1();
                let a = phi_t * head / denom;
                if self.method == DdbmVp {
                    KernelCoeffs {
                        a,
                        b: (-to_end).exp() * one_minus_phi_sq / denom,
                        var: head * one_minus_phi_sq / denom,
                    }
                } else {
                    KernelCoeffs {
                        a,
                        b: 1.0 - a,
                        var: tau_sq * head * one_minus_phi_sq / denom,
                    }
                }
            }
        };
        Ok(k)
    }

    pub fn base_dist(&self) -> Result<BaseDist> {
        use MethodKind::*;
        let base = match self.method {
            // the nominal N(x0, alpha_1) is centred on the unknown x0; y stands in
            DmVe => BaseDist::Gaussian {
                center: Center::Y,
                var: self.sched.alpha(0.0, 1.0)?,
            },
            DmVp | Fm => BaseDist::Gaussian { center: Center::Zero, var: 1.0 },
            IrSde | ResShift | InDI => BaseDist::Gaussian {
                center: Center::Y,
                var: self.tau_sq(),
            },
            Bbdm | DdbmVe | DdbmVp | I2SB | Goub | UniDB => BaseDist::DiracAtY,
        };
        Ok(base)
    }

    pub fn sample_kernel<R: Rng + ?Sized>(
        &self,
        x0: &[f64],
        y: &[f64],
        t: f64,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        Ok(self.sample_kernel_with_noise(x0, y, t, rng)?.0)
    }

    /// Kernel draw together with the standard-normal noise that produced it.
    pub fn sample_kernel_with_noise<R: Rng + ?Sized>(
        &self,
        x0: &[f64],
        y: &[f64],
        t: f64,
        rng: &mut R,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        check_dims(x0.len(), y.len())?;
        let k = self.kernel(t)?;
        let sd = k.var.sqrt();
        let noise: Vec<f64> = (0..x0.len()).map(|_| rng.sample(StandardNormal)).collect();
        let xt = x0
            .iter()
            .zip(y)
            .zip(&noise)
            .map(|((&a0, &yi), &xi)| k.a * a0 + k.b * yi + sd * xi)
            .collect();
        Ok((xt, noise))
    }

    /// Law of `x_t` given `x_s` (and `y`), by composing the two kernels.
    pub fn transition_between(&self, s: f64, t: f64) -> Result<Transition> {
        if s > t {
            return Err(Error::Argument(format!("transition needs s <= t, got s={s}, t={t}")));
        }
        let ks = self.kernel(s)?;
        let kt = self.kernel(t)?;
        if ks.a == 0.0 {
            return Err(Error::Argument(format!(
                "{} kernel has no x0 dependence at s = {s}",
                self.method
            )));
        }
        let phi = kt.a / ks.a;
        let c = kt.b - phi * ks.b;
        let resid = kt.var - phi * phi * ks.var;
        if resid < -RESID_VAR_CLAMP * (1.0 + kt.var) {
            return Err(Error::Degenerate {
                t,
                what: "negative residual variance between kernel times",
            });
        }
        Ok(Transition {
            phi,
            c,
            resid_var: resid.max(0.0),
        })
    }
}

/// UniDB kernel exactly as tabulated: `gamma^-1 + 1 + phi_1^2` in the mean
/// denominator and the GOUB variance. It does not match the UniDB drift (it
/// fails `a_0 = 1` and the forward moment check), so [`ProcessSpec::kernel`]
/// uses the drift-consistent form instead. Kept for the comparison tests.
pub fn unidb_tabulated_kernel(spec: &ProcessSpec, t: f64) -> Result<KernelCoeffs> {
    let total = spec.sched.alpha(0.0, 1.0)?;
    let to_end = spec.sched.alpha(t, 1.0)?;
    let phi_t = spec.sched.phi(0.0, t)?;
    let inv_gamma = 1.0 / spec.gamma;
    let a = phi_t * (inv_gamma + 1.0 - (-2.0 * to_end).exp())
        / (inv_gamma + 1.0 + (-2.0 * total).exp());
    let one_minus_phi_sq = -(-2.0 * spec.sched.alpha(0.0, t)?).exp_m1();
    let var = spec.tau * spec.tau * -(-2.0 * to_end).exp_m1() * one_minus_phi_sq
        / -(-2.0 * total).exp_m1();
    Ok(KernelCoeffs { a, b: 1.0 - a, var })
}
