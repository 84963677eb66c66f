//! Brute-force verifiers: Euler–Maruyama forward simulation, adaptive
//! quadrature and the 1-D Wasserstein distance.
//!
//! Nothing in here is used by the samplers. The forward simulator only
//! touches `drift_coeffs` and `diffusion_sq`; kernel coefficients are
//! evaluated after the path loop, purely to fill in the prediction columns.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process::ProcessSpec;
use crate::rng::path_stream;

/// Latest time a bridge is simulated to.
pub const BRIDGE_SIM_T_MAX: f64 = 1.0 - 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub t: f64,
    pub emp_mean: f64,
    pub emp_var: f64,
    pub pred_mean: f64,
    pub pred_var: f64,
    pub stderr_mean: f64,
    pub stderr_var: f64,
    pub n_paths: usize,
}

impl MomentReport {
    pub fn mean_gap(&self) -> f64 {
        (self.emp_mean - self.pred_mean).abs()
    }

    pub fn var_gap(&self) -> f64 {
        (self.emp_var - self.pred_var).abs()
    }

    /// Both moments within `k` standard errors. A floor of `1e-12` relative
    /// covers noiseless processes whose standard errors are exactly zero.
    pub fn passes(&self, k: f64) -> bool {
        let floor = |p: f64| 1e-12 * (1.0 + p.abs());
        self.mean_gap() <= k * self.stderr_mean + floor(self.pred_mean)
            && self.var_gap() <= k * self.stderr_var + floor(self.pred_var)
    }
}

/// Sample moments with their standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleMoments {
    pub mean: f64,
    pub var: f64,
    pub stderr_mean: f64,
    pub stderr_var: f64,
}

pub fn sample_moments(xs: &[f64]) -> Result<SampleMoments> {
    if xs.is_empty() {
        return Err(Error::Empty);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let (m2, m4) = xs.iter().fold((0.0, 0.0), |(m2, m4), &x| {
        let d = x - mean;
        let d2 = d * d;
        (m2 + d2, m4 + d2 * d2)
    });
    let m2 = m2 / n;
    let m4 = m4 / n;
    let var = if xs.len() > 1 { m2 * n / (n - 1.0) } else { 0.0 };
    Ok(SampleMoments {
        mean,
        var,
        stderr_mean: (var / n).sqrt(),
        stderr_var: ((m4 - m2 * m2).max(0.0) / n).sqrt(),
    })
}

/// Euler–Maruyama paths of the forward SDE from a fixed `(x0, y)`, recorded
/// at each of `times` (ascending, positive). At least `n_steps` uniform-ish
/// steps are spread over `[0, max(times)]` so that every checkpoint lands on
/// a step boundary. Returns `samples[checkpoint][path]`.
pub fn simulate_forward_samples(
    spec: &ProcessSpec,
    x0: f64,
    y: f64,
    times: &[f64],
    n_steps: usize,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    if times.is_empty() || n_steps == 0 {
        return Err(Error::Argument("need at least one checkpoint and one step".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) || times[0] <= 0.0 {
        return Err(Error::Argument("checkpoints must be positive and strictly increasing".into()));
    }
    let t_end = *times.last().unwrap();
    if spec.method.is_bridge() && t_end > BRIDGE_SIM_T_MAX {
        return Err(Error::Argument(format!(
            "bridges are simulated up to t = {BRIDGE_SIM_T_MAX}, asked for {t_end}"
        )));
    }

    // step plan: (drift on x, drift on y, g * sqrt(dt), dt), with checkpoint markers
    let mut plan: Vec<(f64, f64, f64, f64)> = Vec::with_capacity(n_steps + times.len());
    let mut marks = Vec::with_capacity(times.len());
    let mut start = 0.0;
    for &stop in times {
        let span = stop - start;
        let count = ((n_steps as f64) * span / t_end).ceil().max(1.0) as usize;
        let dt = span / count as f64;
        for i in 0..count {
            let t = start + dt * i as f64;
            let c = spec.drift_coeffs(t)?;
            let g2 = spec.diffusion_sq(t)?;
            plan.push((c.on_x, c.on_y, (g2 * dt).sqrt(), dt));
        }
        marks.push(plan.len());
        start = stop;
    }

    let per_path: Vec<Vec<f64>> = (0..n_paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = path_stream(seed, path as u64);
            let mut x = x0;
            let mut out = Vec::with_capacity(marks.len());
            let mut next = 0;
            for (i, &(ax, ay, noise, dt)) in plan.iter().enumerate() {
                let xi: f64 = StandardNormal.sample(&mut rng);
                x += (ax * x + ay * y) * dt + noise * xi;
                if i + 1 == marks[next] {
                    out.push(x);
                    next += 1;
                }
            }
            out
        })
        .collect();

    Ok((0..times.len())
        .map(|k| per_path.iter().map(|p| p[k]).collect())
        .collect())
}

/// Forward simulation compared against the closed-form kernel at each checkpoint.
pub fn simulate_forward_at(
    spec: &ProcessSpec,
    x0: f64,
    y: f64,
    times: &[f64],
    n_steps: usize,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<MomentReport>> {
    let samples = simulate_forward_samples(spec, x0, y, times, n_steps, n_paths, seed)?;
    times
        .iter()
        .zip(&samples)
        .map(|(&t, xs)| {
            let m = sample_moments(xs)?;
            let k = spec.kernel(t)?;
            Ok(MomentReport {
                t,
                emp_mean: m.mean,
                emp_var: m.var,
                pred_mean: k.mean(x0, y),
                pred_var: k.var,
                stderr_mean: m.stderr_mean,
                stderr_var: m.stderr_var,
                n_paths,
            })
        })
        .collect()
}

pub fn simulate_forward(
    spec: &ProcessSpec,
    x0: f64,
    y: f64,
    t_end: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
) -> Result<MomentReport> {
    Ok(simulate_forward_at(spec, x0, y, &[t_end], n_steps, n_paths, seed)?[0])
}

/// Exact 1-D Wasserstein-1 distance between two empirical measures.
///
/// Equal sizes use the sorted-sample mean absolute difference; unequal sizes
/// integrate `|F_a - F_b|` exactly over the merged support.
pub fn wasserstein1(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty);
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Argument("samples must be finite".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    if a.len() == b.len() {
        let total: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
        return Ok(total / a.len() as f64);
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut prev = a[0].min(b[0]);
    let mut total = 0.0;
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        total += (i as f64 / na - j as f64 / nb).abs() * (next - prev);
        while i < a.len() && a[i] == next {
            i += 1;
        }
        while j < b.len() && b[j] == next {
            j += 1;
        }
        prev = next;
    }
    Ok(total)
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const KRONROD_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights on the odd Kronrod nodes (1, 3, 5, 7)
const GAUSS_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const QUADRATURE_BUDGET: usize = 10_000;

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> (f64, f64) {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let centre = f(mid);
    let mut kronrod = KRONROD_WEIGHTS[7] * centre;
    let mut gauss = GAUSS_WEIGHTS[3] * centre;
    for i in 0..7 {
        let dx = half * GK_NODES[i];
        let pair = f(mid - dx) + f(mid + dx);
        kronrod += KRONROD_WEIGHTS[i] * pair;
        if i % 2 == 1 {
            gauss += GAUSS_WEIGHTS[i / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Globally adaptive Gauss–Kronrod (7/15) integration of `f` over `[s, t]`
/// to absolute tolerance `tol`.
pub fn quadrature<F: Fn(f64) -> f64>(f: F, s: f64, t: f64, tol: f64) -> Result<f64> {
    if s == t {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if s < t { (s, t, 1.0) } else { (t, s, -1.0) };
    let mut pieces = vec![{
        let (v, e) = gauss_kronrod(&f, lo, hi);
        (lo, hi, v, e)
    }];
    loop {
        let value: f64 = pieces.iter().map(|p| p.2).sum();
        let error: f64 = pieces.iter().map(|p| p.3).sum();
        if !value.is_finite() || !error.is_finite() {
            return Err(Error::Quadrature { s, t, budget: QUADRATURE_BUDGET });
        }
        if error <= tol {
            return Ok(sign * value);
        }
        if pieces.len() >= QUADRATURE_BUDGET {
            return Err(Error::Quadrature { s, t, budget: QUADRATURE_BUDGET });
        }
        let worst = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .unwrap();
        let (a, b, _, _) = pieces.swap_remove(worst);
        let m = 0.5 * (a + b);
        for (l, r) in [(a, m), (m, b)] {
            let (v, e) = gauss_kronrod(&f, l, r);
            pieces.push((l, r, v, e));
        }
    }
}
