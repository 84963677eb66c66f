//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use itokit::nnscore::{weighted_loss_and_grad, LossWeight, Mlp, Precond, Sample, Trainer};
use itokit::oracle::{quadrature, sample_moments, wasserstein1};
use itokit::process::{BaseDist, MethodKind, ProcessSpec};
use itokit::rng::path_stream;
use itokit::sampler::{
    collinearity_diag, default_t_max, make_grid, run_reverse, run_reverse_from, GridKind, GridSpec, ReverseConfig,
    SamplerKind, TimeGrid, DEFAULT_RHO, DEFAULT_T_MIN,
};
use itokit::sched::Scheduler;
use itokit::score::ScoreField;
use itokit::toyworld::{MarginalScoreField, ToyWorld};
use itokit_cli::commands::validate::{run_cells, CellReport, Status, ValidateOutcome};
use itokit_cli::config::parse;
use itokit_cli::metrics::posterior_reference;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const Y: f64 = 0.5;
const CHECKPOINTS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn rng(seed: u64) -> ChaCha8Rng {
    path_stream(seed, 0)
}

fn karras(n: usize, spec: &ProcessSpec) -> TimeGrid {
    make_grid(GridSpec { kind: GridKind::Karras { rho: DEFAULT_RHO }, n, t_min: DEFAULT_T_MIN, t_max: default_t_max(spec) })
        .unwrap()
}

fn linear(n: usize, spec: &ProcessSpec) -> TimeGrid {
    make_grid(GridSpec { kind: GridKind::Linear, n, t_min: DEFAULT_T_MIN, t_max: default_t_max(spec) }).unwrap()
}

fn terminal_w1(field: &dyn ScoreField, spec: &ProcessSpec, cfg: &ReverseConfig, n_paths: usize, seed: u64) -> (f64, Vec<f64>) {
    let world = ToyWorld::default();
    let batch = run_reverse(spec, field, cfg, &[Y], n_paths, seed).unwrap();
    let xs = batch.terminal_coordinate(0);
    (wasserstein1(&xs, &posterior_reference(&world, Y, seed)).unwrap(), xs)
}

fn cell_summary(c: &CellReport) -> String {
    let worst = c
        .reports
        .iter()
        .map(|r| (r.mean_gap().abs() / r.stderr_mean).max(r.var_gap().abs() / r.stderr_var))
        .fold(0.0f64, f64::max);
    format!("{} {:?} max z {worst:.2}", c.label(), c.status)
}

fn find_cell<'a>(outcome: &'a ValidateOutcome, method: &str) -> &'a CellReport {
    outcome.cells.iter().find(|c| c.method == method).unwrap()
}

fn kernel_consistency() -> (Verdict, ValidateOutcome) {
    let r = parse(r#"{"seed": 2024, "validate": {"matrix": "original"}}"#).unwrap().resolve().unwrap();
    assert_eq!(r.validate.n_paths, 100_000);
    assert_eq!(r.validate.n_steps, 10_000);
    assert_eq!(r.validate.times, CHECKPOINTS);
    let start = Instant::now();
    let outcome = run_cells(&r).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let ran = outcome.cells.iter().filter(|c| c.status != Status::Skipped).count();
    let failing: Vec<String> = outcome.cells.iter().filter(|c| c.status != Status::Pass).map(cell_summary).collect();
    let pass = outcome.passed && failing.is_empty() && ran == MethodKind::ALL.len() && secs <= 1800.0;
    let detail = if failing.is_empty() {
        format!("{ran} cells within 3 stderr at 1e5 paths x 1e4 steps, {secs:.0} s")
    } else {
        format!("failing: {} ({secs:.0} s)", failing.join("; "))
    };
    (verdict(pass, detail), outcome)
}

fn flow_matching_exact(outcome: &ValidateOutcome) -> Verdict {
    let spec = ProcessSpec::new(MethodKind::Fm, Scheduler::Inversed).unwrap();
    let mut worst = 0.0f64;
    for i in 0..=1000 {
        let t = i as f64 / 1000.0 * 0.999;
        let k = spec.kernel(t).unwrap();
        worst = worst.max((k.a - (1.0 - t)).abs()).max(k.b.abs()).max((k.var - t * t).abs());
    }
    let cell = find_cell(outcome, "FM");
    let sim = cell.status == Status::Pass && cell.scheduler == Scheduler::Inversed;
    verdict(worst < 1e-12 && sim, format!("max |closed - (1-t, 0, t^2)| = {worst:.1e}; simulation: {}", cell_summary(cell)))
}

/// Bridge quantities written three ways, one per method's own parameterization.
fn bridge_by_method(m: MethodKind, sched: &Scheduler, x: f64, t: f64, y: f64) -> [f64; 5] {
    let beta = sched.beta(t).unwrap();
    match m {
        // Brownian-bridge form: noise accumulated so far and still to come
        MethodKind::Bbdm => {
            let (done, left) = (sched.alpha(0.0, t).unwrap(), sched.alpha(t, 1.0).unwrap());
            let total = done + left;
            [beta * (y - x) / left, beta, left / total, done / total, done * left / total]
        }
        // variance-exploding h-transform: sigma_t^2 = alpha_{0,t}, score of the terminal Gaussian
        MethodKind::DdbmVe => {
            let s_t = sched.alpha(0.0, t).unwrap();
            let s_1 = sched.alpha(0.0, 1.0).unwrap();
            let h_score = (y - x) / (s_1 - s_t);
            let snr = s_t / s_1;
            [beta * h_score, beta, 1.0 - snr, snr, s_t * (1.0 - snr)]
        }
        // product of two Gaussians with variances sigma^2 and sigma_bar^2
        MethodKind::I2SB => {
            let (sig, bar) = (sched.alpha(0.0, t).unwrap(), sched.alpha(t, 1.0).unwrap());
            [beta / bar * (y - x), beta, bar / (sig + bar), sig / (sig + bar), 1.0 / (1.0 / sig + 1.0 / bar)]
        }
        _ => unreachable!(),
    }
}

fn library_bridge(spec: &ProcessSpec, x: f64, t: f64, y: f64) -> [f64; 5] {
    let k = spec.kernel(t).unwrap();
    [spec.drift(&[x], t, &[y]).unwrap()[0], spec.diffusion_sq(t).unwrap(), k.a, k.b, k.var]
}

fn bridge_equivalence() -> Verdict {
    let methods = [MethodKind::Bbdm, MethodKind::DdbmVe, MethodKind::I2SB];
    let mut rng = rng(3);
    let (mut shared, mut independent) = (0.0f64, 0.0f64);
    for sched in [Scheduler::DEFAULT_LINEAR, Scheduler::DEFAULT_CONSTANT, Scheduler::DEFAULT_QUADRATIC_SYMMETRIC, Scheduler::DEFAULT_COSINE] {
        let specs: Vec<ProcessSpec> = methods.iter().map(|&m| ProcessSpec::new(m, sched).unwrap()).collect();
        for s in &specs {
            assert_eq!(s.base_dist().unwrap(), BaseDist::DiracAtY);
        }
        for _ in 0..1000 {
            let (x, t, y) = (rng.random_range(-3.0..3.0), rng.random_range(0.0..0.999), rng.random_range(-3.0..3.0));
            let lib: Vec<[f64; 5]> = specs.iter().map(|s| library_bridge(s, x, t, y)).collect();
            for (i, &m) in methods.iter().enumerate() {
                for j in 0..5 {
                    shared = shared.max((lib[i][j] - lib[0][j]).abs());
                }
                let own = bridge_by_method(m, &sched, x, t, y);
                for j in 0..5 {
                    let scale = 1.0f64.max(own[j].abs());
                    independent = independent.max((lib[i][j] - own[j]).abs() / scale);
                }
            }
        }
    }
    verdict(
        shared == 0.0 && independent < 1e-12,
        format!("shared path max diff {shared:e}; per-method formulas max diff {independent:.1e} over 4x1000 points"),
    )
}

fn random_scheduler(rng: &mut ChaCha8Rng) -> Scheduler {
    match rng.random_range(0..6) {
        0 => {
            let beta_min = rng.random_range(0.01..1.0);
            Scheduler::Linear { beta_min, beta_max: beta_min + rng.random_range(0.0..30.0) }
        }
        1 => Scheduler::Cosine { eps: rng.random_range(1e-4..0.1), delta: rng.random_range(1e-4..0.5) },
        2 => {
            let eta_min = rng.random_range(0.01..0.5);
            Scheduler::Exponential { eta_min, eta_max: rng.random_range(eta_min + 0.01..0.99), p: rng.random_range(1.0..3.0) }
        }
        3 => Scheduler::Inversed,
        4 => {
            let beta_min = rng.random_range(0.01..1.0);
            Scheduler::QuadraticSymmetric { beta_min, beta_max: beta_min + rng.random_range(0.0..30.0) }
        }
        _ => Scheduler::Constant { beta: rng.random_range(0.01..5.0) },
    }
}

fn scheduler_closed_forms() -> Verdict {
    let mut rng = rng(4);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let sched = random_scheduler(&mut rng);
        let top: f64 = if sched.includes_one() { 1.0 } else { 0.999 };
        let (a, b) = (rng.random_range(0.0..top), rng.random_range(0.0..top));
        let (s, t) = (a.min(b), a.max(b));
        let numeric = quadrature(|z| sched.beta(z).unwrap(), s, t, 1e-11).unwrap();
        worst = worst.max((sched.alpha(s, t).unwrap() - numeric).abs());
    }
    let mut cosine = 0.0f64;
    for delta in [1e-4, 0.005, 0.1, 0.5] {
        let sched = Scheduler::Cosine { eps: 0.008, delta };
        cosine = cosine.max((sched.alpha(0.0, 1.0).unwrap() + delta.ln()).abs());
    }
    verdict(worst < 1e-8 && cosine < 1e-12, format!("alpha vs quadrature {worst:.1e}; cosine total decay vs -ln delta {cosine:.1e}"))
}

fn unidb_limit(outcome: &ValidateOutcome) -> Verdict {
    let mut rng = rng(5);
    let goub = ProcessSpec::original(MethodKind::Goub);
    let unidb = ProcessSpec::original(MethodKind::UniDB).with_gamma(1e12).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (x, t, y) = (rng.random_range(-3.0..3.0), rng.random_range(0.0..0.99), rng.random_range(-3.0..3.0));
        let a = unidb.drift(&[x], t, &[y]).unwrap()[0];
        let b = goub.drift(&[x], t, &[y]).unwrap()[0];
        worst = worst.max((a - b).abs() / b.abs().max(1e-12));
    }
    let cell = find_cell(outcome, "UniDB");
    verdict(
        worst < 1e-6 && cell.status == Status::Pass,
        format!("max relative drift gap {worst:.1e}; kernel simulation: {}", cell_summary(cell)),
    )
}

fn reverse_recovery() -> Verdict {
    let world = ToyWorld::default();
    let mut lines = Vec::new();
    let mut pass = true;
    for m in [MethodKind::DmVp, MethodKind::ResShift, MethodKind::Bbdm] {
        let spec = ProcessSpec::original(m);
        let field = MarginalScoreField { world: world.clone(), spec };
        let cfg = ReverseConfig { grid: karras(101, &spec), kind: SamplerKind::Ancestral, lambda: 1.0 };
        let (w1, _) = terminal_w1(&field, &spec, &cfg, 10_000, 6);
        pass &= w1 < 0.05;
        lines.push(format!("{m} W1 {w1:.4}"));
    }
    // intermediate marginals, started from the exact marginal at the top of the grid
    for m in [MethodKind::DmVp, MethodKind::ResShift, MethodKind::IrSde, MethodKind::Bbdm] {
        let spec = ProcessSpec::original(m);
        let field = MarginalScoreField { world: world.clone(), spec };
        let cfg = ReverseConfig { grid: linear(501, &spec), kind: SamplerKind::EulerSDE, lambda: 1.0 };
        let times = cfg.grid.times().to_vec();
        let post = world.posterior(Y);
        let start = |r: &mut ChaCha8Rng| {
            let x0 = post.sample(r);
            spec.sample_kernel(&[x0], &[Y], times[0], r)
        };
        let batch = run_reverse_from(&spec, &field, &cfg, &[Y], 10_000, 7, &start).unwrap();
        let mut worst = 0.0f64;
        for c in CHECKPOINTS {
            let i = (0..times.len()).min_by(|&a, &b| (times[a] - c).abs().total_cmp(&(times[b] - c).abs())).unwrap();
            let s = sample_moments(&batch.coordinate_at(i, 0)).unwrap();
            let (mean, var) = world.marginal_moments(&spec, times[i], Y).unwrap();
            worst = worst.max((s.mean - mean).abs() / s.stderr_mean).max((s.var - var).abs() / s.stderr_var);
        }
        pass &= worst < 3.0;
        lines.push(format!("{m} EulerSDE max z {worst:.2}"));
    }
    verdict(pass, lines.join(", "))
}

fn oversmoothing() -> Verdict {
    let world = ToyWorld::default();
    let post_var = world.posterior(Y).variance();
    let spec = ProcessSpec::original(MethodKind::Bbdm);
    let field = MarginalScoreField { world, spec };
    let ratio = |kind| {
        let cfg = ReverseConfig { grid: karras(101, &spec), kind, lambda: 1.0 };
        let (_, xs) = terminal_w1(&field, &spec, &cfg, 10_000, 8);
        sample_moments(&xs).unwrap().var / post_var
    };
    let (mean_ode, ancestral) = (ratio(SamplerKind::MeanODE), ratio(SamplerKind::Ancestral));
    verdict(
        mean_ode < 0.5 && (ancestral - 1.0).abs() < 0.1,
        format!("BBDM variance / posterior variance: MeanODE {mean_ode:.3}, Ancestral {ancestral:.3}"),
    )
}

fn collinearity() -> Verdict {
    let world = ToyWorld::default();
    let (_, y) = world.sample_pair_vec(8, &mut path_stream(3, 0));
    let grid = make_grid(GridSpec { kind: GridKind::Linear, n: 101, t_min: DEFAULT_T_MIN, t_max: 1.0 - 1e-3 }).unwrap();
    let tail = |m: MethodKind, tau: f64| {
        let spec = ProcessSpec::original(m).with_tau(tau).unwrap();
        let field = MarginalScoreField { world: world.clone(), spec };
        let cfg = ReverseConfig { grid: grid.clone(), kind: SamplerKind::Ancestral, lambda: 1.0 };
        let b = run_reverse(&spec, &field, &cfg, &y, 1000, 9).unwrap();
        collinearity_diag(&b, &field, &spec, &y).unwrap().tail_abs_mean().unwrap()
    };
    let (indi, resshift) = (tail(MethodKind::InDI, 0.06), tail(MethodKind::ResShift, 2.0));
    verdict(indi > resshift, format!("tail mean |cos|: InDI(0.06) {indi:.4}, ResShift(2.0) {resshift:.4}"))
}

fn max_gradient_error(net: &Mlp, precond: &Precond, weight: LossWeight, batch: &[Sample]) -> f64 {
    let h = 1e-5;
    let (_, grad) = weighted_loss_and_grad(net, precond, weight, batch).unwrap();
    let mut probe = net.clone();
    let mut worst = 0.0f64;
    for i in 0..grad.len() {
        let p = probe.params()[i];
        probe.params_mut()[i] = p + h;
        let up = weighted_loss_and_grad(&probe, precond, weight, batch).unwrap().0;
        probe.params_mut()[i] = p - h;
        let down = weighted_loss_and_grad(&probe, precond, weight, batch).unwrap().0;
        probe.params_mut()[i] = p;
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(1e-6));
    }
    worst
}

fn gradient_check() -> Verdict {
    let r = parse(r#"{"method": "ResShift", "seed": 10, "train": {"steps": 2000}}"#).unwrap().resolve().unwrap();
    let mut trainer = Trainer::new(r.train.clone()).unwrap();
    let batch = trainer.draw_batch(usize::MAX / 2).unwrap()[..16].to_vec();
    let mut parts = Vec::new();
    let mut worst = 0.0f64;
    for until in [0, 200, 2000] {
        while trainer.step_index() < until {
            trainer.step().unwrap();
        }
        let err = [
            (Precond::Identity, LossWeight::Uniform),
            (r.train.precond(), LossWeight::Uniform),
            (r.train.precond(), LossWeight::Normalized),
        ]
        .iter()
        .map(|(p, w)| max_gradient_error(trainer.net(), p, *w, &batch))
        .fold(0.0, f64::max);
        worst = worst.max(err);
        parts.push(format!("step {until}: {err:.1e}"));
    }
    verdict(worst < 1e-4, format!("{} params, max relative error {}", trainer.net().params().len(), parts.join(", ")))
}

fn learned_score() -> Verdict {
    let mut parts = Vec::new();
    let mut pass = true;
    for method in ["DM_VP", "ResShift", "BBDM"] {
        let r = parse(&format!(r#"{{"method": "{method}", "seed": 11}}"#)).unwrap().resolve().unwrap();
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let start = Instant::now();
        let net = single.install(|| {
            let mut trainer = Trainer::new(r.train.clone()).unwrap();
            trainer.run(|_, _| {}).unwrap();
            trainer.into_net()
        });
        let secs = start.elapsed().as_secs_f64();
        let spec = r.spec;
        let cfg = ReverseConfig { grid: karras(101, &spec), kind: SamplerKind::Ancestral, lambda: 1.0 };
        let analytic = MarginalScoreField { world: r.world.clone(), spec };
        let learned = r.train.field(net);
        let (w_a, _) = terminal_w1(&analytic, &spec, &cfg, 10_000, 12);
        let (w_l, _) = terminal_w1(&learned, &spec, &cfg, 10_000, 12);
        pass &= w_l <= 2.0 * w_a && secs <= 300.0;
        parts.push(format!("{method}: learned W1 {w_l:.4} vs analytic {w_a:.4}, {} steps in {secs:.0} s", r.train.steps));
    }
    verdict(pass, parts.join("; "))
}

/// Exit code of one CLI run; outputs are written even on a numerical failure.
fn run_cli(verb: &str, config: &Path, out: &Path, threads: usize) -> i32 {
    let status = Command::new(env!("CARGO_BIN_EXE_itokit"))
        .args([verb, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .args(["--threads", &threads.to_string()])
        .stderr(std::process::Stdio::null())
        .status()
        .unwrap();
    let code = status.code().unwrap();
    assert!(code == 0 || code == 3, "{verb} with {threads} threads exited with {code}");
    code
}

fn folder_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Verdict {
    let dir = tempfile::TempDir::new().unwrap();
    let root = dir.path();
    let net_cfg = r#"{"method": "BBDM", "seed": 5, "train": {"steps": 60, "batch": 32, "hidden": [16]}}"#;
    std::fs::write(root.join("train.json"), net_cfg).unwrap();
    assert_eq!(run_cli("train", &root.join("train.json"), &root.join("net"), 1), 0);
    let runs = [
        ("validate-kernels", r#"{"seed": 1, "validate": {"cells": [{"method": "DM_VP"}, {"method": "GOUB"}], "n_steps": 200, "n_paths": 3000}}"#),
        ("sample", r#"{"method": "IR_SDE", "sampler": "EulerSDE", "n_paths": 500, "y": [0.5, -1.0], "save_paths": 20, "seed": 2}"#),
        ("sample", r#"{"method": "BBDM", "weights": "net/weights.bin", "n_paths": 300, "seed": 3, "train": {"hidden": [16]}}"#),
        ("train", net_cfg),
        ("temperature-study", r#"{"n_paths": 300, "grid": {"n": 31}, "temperature": {"methods": ["InDI", "ResShift"]}, "seed": 4}"#),
        ("sweep", r#"{"n_paths": 300, "sweep": {"methods": ["DM_VP", "BBDM"], "samplers": ["EulerSDE", "Heun2"], "nfes": [5, 20]}, "seed": 6}"#),
    ];
    let mut checked = 0;
    for (i, (verb, cfg)) in runs.iter().enumerate() {
        let path = root.join(format!("c{i}.json"));
        std::fs::write(&path, cfg).unwrap();
        let outs: Vec<_> = [(1, "a"), (4, "b"), (1, "c")]
            .iter()
            .map(|&(threads, tag)| {
                let out = root.join(format!("o{i}{tag}"));
                let code = run_cli(verb, &path, &out, threads);
                (code, folder_bytes(&out))
            })
            .collect();
        if outs[0] != outs[1] || outs[0] != outs[2] {
            return verdict(false, format!("{verb} output differs between runs"));
        }
        checked += outs[0].1.len();
    }
    verdict(true, format!("{} commands, {checked} files byte-identical at --threads 1, 4, 1", runs.len()))
}

fn guarded(f: impl FnOnce() -> Verdict) -> Verdict {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(v) => v,
        Err(e) => {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            verdict(false, format!("panicked: {}", msg.unwrap_or_default()))
        }
    }
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let mut results: Vec<(&str, Verdict)> = Vec::new();
    let mut report = |name: &'static str, v: Verdict| {
        println!("[{}] {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        results.push((name, v));
    };
    let (v, outcome) = match catch_unwind(kernel_consistency) {
        Ok(pair) => (pair.0, Some(pair.1)),
        Err(_) => (verdict(false, "panicked"), None),
    };
    report("1 kernel vs forward simulation", v);
    let missing = || verdict(false, "no simulation outcome");
    report("2 flow matching inversed kernel", outcome.as_ref().map_or_else(missing, |o| guarded(|| flow_matching_exact(o))));
    report("3 bridge equivalence", guarded(bridge_equivalence));
    report("4 scheduler closed forms", guarded(scheduler_closed_forms));
    report("5 UniDB large-gamma limit", outcome.as_ref().map_or_else(missing, |o| guarded(|| unidb_limit(o))));
    report("6 reverse recovery", guarded(reverse_recovery));
    report("7 oversmoothing", guarded(oversmoothing));
    report("8 collinearity ordering", guarded(collinearity));
    report("9 gradient check", guarded(gradient_check));
    report("10 learned score", guarded(learned_score));
    report("11 determinism", guarded(determinism));
    let failed = results.iter().filter(|(_, v)| !v.pass).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
