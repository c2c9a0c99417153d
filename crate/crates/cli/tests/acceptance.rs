//! Acceptance suite. Runs every criterion in sequence, prints one PASS/FAIL
//! line per criterion and exits non-zero if any fails.

use std::alloc::{GlobalAlloc, Layout, System};
use std::path::Path;
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use plmcl::harness::train::train_with_observer;
use plmcl::labels::{mask_ffl, mask_fpl, mask_fspl, mask_sspl};
use plmcl::losses::{
    loss_an, loss_an_grad, loss_an_ls, loss_an_ls_grad, loss_wan, loss_wan_grad, scheduler_xi,
};
use plmcl::metrics::average_precision;
use plmcl::ndcore::bce_grad_q;
use plmcl::pseudo::{confidence, epoch_update, grad_lcs, psi};
use plmcl::{
    bce, generate, mean_average_precision, sigmoid, sweep, EvalBatch, GroundTruthMatrix,
    LabelSetting, LossKind, MlpParams, Observation, PseudoHyper, PseudoState, SeededRng,
    SettingKind, SweepConfig, SyntheticSpec, TrainConfig,
};
use rand::Rng;

struct Counting;

static LIVE: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);

fn note_alloc(size: usize) {
    let now = LIVE.fetch_add(size, Ordering::Relaxed) + size;
    PEAK.fetch_max(now, Ordering::Relaxed);
}

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = unsafe { System.alloc(layout) };
        if !p.is_null() {
            note_alloc(layout.size());
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        unsafe { System.dealloc(ptr, layout) };
        LIVE.fetch_sub(layout.size(), Ordering::Relaxed);
    }

    unsafe fn alloc_zeroed(&self, layout: Layout) -> *mut u8 {
        let p = unsafe { System.alloc_zeroed(layout) };
        if !p.is_null() {
            note_alloc(layout.size());
        }
        p
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        let p = unsafe { System.realloc(ptr, layout, new_size) };
        if !p.is_null() {
            LIVE.fetch_sub(layout.size(), Ordering::Relaxed);
            note_alloc(new_size);
        }
        p
    }
}

#[global_allocator]
static GLOBAL: Counting = Counting;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: impl Into<String>) -> Outcome {
    if ok {
        Ok(detail.into())
    } else {
        Err(detail.into())
    }
}

fn fd_close(analytic: f64, numeric: f64) -> bool {
    (analytic - numeric).abs() <= 1e-4 * analytic.abs().max(numeric.abs()).max(1e-6)
}

fn gradient_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = SeededRng::new(1);
    let h = 1e-5;
    let (mut cases, mut entries, mut worst) = (0usize, 0usize, 0.0f64);

    for _ in 0..120 {
        let d = rng.random_range(1..6);
        let hidden = rng.random_range(0..5);
        let l = rng.random_range(1..5);
        let params = MlpParams::random(d, hidden, l, &mut rng);
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let t: Vec<f64> = (0..l).map(|_| rng.random_range(0.0..1.0)).collect();
        let objective = |p: &MlpParams| -> f64 {
            p.predict(&x)
                .unwrap()
                .iter()
                .zip(&t)
                .map(|(&q, &tj)| bce(tj, q))
                .sum()
        };
        let (probs, cache) = params.forward(&x).unwrap();
        let d_probs: Vec<f64> = probs
            .iter()
            .zip(&t)
            .map(|(&q, &tj)| bce_grad_q(tj, q))
            .collect();
        let grads = params.backward(&cache, &d_probs).unwrap();
        for (k, g) in grads.tensors().iter().enumerate() {
            for e in 0..g.len() {
                let mut plus = params.clone();
                plus.tensors_mut()[k][e] += h;
                let mut minus = params.clone();
                minus.tensors_mut()[k][e] -= h;
                let numeric = (objective(&plus) - objective(&minus)) / (2.0 * h);
                if !fd_close(g[e], numeric) {
                    return Err(format!("classifier tensor {k}[{e}]: {} vs {numeric}", g[e]));
                }
                worst = worst.max((g[e] - numeric).abs());
                entries += 1;
            }
        }
        cases += 1;
    }

    for _ in 0..120 {
        let l = rng.random_range(1..8);
        let obs: Vec<Observation> = (0..l)
            .map(|_| match rng.random_range(0..3) {
                0 => Observation::Positive,
                1 => Observation::Negative,
                _ => Observation::Unobserved,
            })
            .collect();
        let mut state = PseudoState::init(&obs);
        for j in state.unobserved().collect::<Vec<_>>() {
            state.latent[j] = rng.random_range(-4.0..4.0);
            state.soft[j] = sigmoid(state.latent[j]);
        }
        let pred: Vec<f64> = (0..l).map(|_| rng.random_range(0.01..0.99)).collect();
        let lcs = |latent: &[f64]| -> f64 {
            state
                .unobserved()
                .map(|j| bce(pred[j], sigmoid(latent[j])))
                .sum::<f64>()
                / l as f64
        };
        let g = grad_lcs(&pred, &state).unwrap();
        for j in 0..l {
            let mut plus = state.latent.clone();
            plus[j] += h;
            let mut minus = state.latent.clone();
            minus[j] -= h;
            let numeric = (lcs(&plus) - lcs(&minus)) / (2.0 * h);
            if !fd_close(g[j], numeric) {
                return Err(format!("grad_lcs[{j}]: {} vs {numeric}", g[j]));
            }
            worst = worst.max((g[j] - numeric).abs());
            entries += 1;
        }
        cases += 1;
    }
    let elapsed = start.elapsed();
    check(
        elapsed < Duration::from_secs(10),
        format!("{cases} cases, {entries} entries, max abs diff {worst:.1e}, {elapsed:.2?}"),
    )
}

fn anchors() -> Outcome {
    for &(alpha, lambda) in &[(1.0, 4.0), (0.3, 2.5), (5.0, 0.5)] {
        let h = PseudoHyper {
            alpha,
            lambda,
            ..PseudoHyper::default()
        };
        if psi(0.5, &h) != alpha {
            return Err(format!("psi(0.5) = {} for alpha {alpha}", psi(0.5, &h)));
        }
        let edge = alpha * (-lambda).exp();
        if psi(0.0, &h) != edge || psi(1.0, &h) != edge {
            return Err(format!(
                "psi edges {} {} vs {edge}",
                psi(0.0, &h),
                psi(1.0, &h)
            ));
        }
    }
    for &beta2 in &[0.6, 0.2, 1.0] {
        if scheduler_xi(0.5, 0.0, beta2).abs() > 1e-12 {
            return Err(format!("xi(0.5, 0) = {}", scheduler_xi(0.5, 0.0, beta2)));
        }
        for k in 0..=100 {
            let s = k as f64 / 100.0;
            if (scheduler_xi(s, 1.0, beta2) - beta2).abs() > 1e-12 {
                return Err(format!("xi({s}, 1) = {}", scheduler_xi(s, 1.0, beta2)));
            }
        }
    }
    Ok("psi extremes exact, xi anchors within 1e-12".into())
}

fn monotonicity() -> Outcome {
    let tol = 1e-15;
    let beta2 = 0.6;
    let h = PseudoHyper::default();
    let grid: Vec<f64> = (0..=100).map(|k| k as f64 / 100.0).collect();
    let mut violations = Vec::new();
    for &s in &grid {
        for w in grid.windows(2) {
            if scheduler_xi(s, w[1], beta2) < scheduler_xi(s, w[0], beta2) - tol {
                violations.push(format!("xi phi at s={s} phi={}", w[1]));
            }
        }
    }
    // Confidence grid, reached from both sides of 0.5.
    for &phi in &grid {
        for w in grid.windows(2) {
            for side in [1.0, -1.0] {
                let (s0, s1) = (0.5 + side * w[0] / 2.0, 0.5 + side * w[1] / 2.0);
                if scheduler_xi(s1, phi, beta2) < scheduler_xi(s0, phi, beta2) - tol {
                    violations.push(format!("xi confidence at phi={phi} c={}", w[1]));
                }
                if psi(s1, &h) > psi(s0, &h) + tol {
                    violations.push(format!("psi confidence at c={}", w[1]));
                }
            }
        }
    }
    for &s in &grid {
        let (a, b) = (psi(s, &h), psi(1.0 - s, &h));
        if (a - b).abs() > tol * a.max(1.0) {
            violations.push(format!("psi symmetry at s={s}: {a} vs {b}"));
        }
        if (confidence(s) - confidence(1.0 - s)).abs() > tol {
            violations.push(format!("confidence symmetry at s={s}"));
        }
    }
    check(
        violations.is_empty(),
        format!(
            "101x101 grid, {} violations {:?}",
            violations.len(),
            violations.first()
        ),
    )
}

fn fixed_points() -> Outcome {
    let h = PseudoHyper::default();
    let mut rng = SeededRng::new(4);
    for _ in 0..100 {
        let l = rng.random_range(1..6);
        let mut state = PseudoState::init(&vec![Observation::Unobserved; l]);
        for j in 0..l {
            state.latent[j] = rng.random_range(-3.0..3.0);
            state.soft[j] = sigmoid(state.latent[j]);
        }
        let before = state.clone();
        let pred = state.soft.clone();
        epoch_update(&mut state, &pred, &h).map_err(|e| e.to_string())?;
        if state != before {
            return Err("pred = soft with m = 0 moved the state".into());
        }
    }

    let mut half = PseudoState::init(&[Observation::Unobserved]);
    for _ in 0..1000 {
        epoch_update(&mut half, &[0.5], &h).map_err(|e| e.to_string())?;
        if half.soft[0] != 0.5 {
            return Err(format!("pred 0.5 drifted to {}", half.soft[0]));
        }
    }

    let mut s = PseudoState::init(&[Observation::Unobserved]);
    let mut crossed = None;
    let mut prev = s.soft[0];
    for epoch in 1..=50 {
        epoch_update(&mut s, &[0.9], &h).map_err(|e| e.to_string())?;
        if s.soft[0] <= prev {
            return Err(format!(
                "pred 0.9 not monotone at epoch {epoch}: {} after {prev}",
                s.soft[0]
            ));
        }
        prev = s.soft[0];
        if crossed.is_none() && s.soft[0] > 0.7 {
            crossed = Some(epoch);
        }
    }
    match crossed {
        Some(e) => Ok(format!(
            "fixed points hold; pred 0.9 passes 0.7 at epoch {e}, soft {prev:.4} at 50"
        )),
        None => Err(format!("pred 0.9 reached only {prev}")),
    }
}

/// AP from pairwise comparisons: item i precedes k iff its score is higher,
/// or equal with a smaller index. Precisions are summed in rank order.
fn brute_force_ap(scores: &[f64], truth: &[bool]) -> Option<f64> {
    let n = scores.len();
    let ahead = |i: usize, k: usize| scores[i] > scores[k] || (scores[i] == scores[k] && i < k);
    let mut at_positive: Vec<(usize, f64)> = (0..n)
        .filter(|&k| truth[k])
        .map(|k| {
            let rank = 1 + (0..n).filter(|&i| ahead(i, k)).count();
            let hits = 1 + (0..n).filter(|&i| truth[i] && ahead(i, k)).count();
            (rank, hits as f64 / rank as f64)
        })
        .collect();
    if at_positive.is_empty() {
        return None;
    }
    at_positive.sort_by_key(|&(rank, _)| rank);
    let sum = at_positive.iter().fold(0.0, |acc, &(_, p)| acc + p);
    Some(sum / at_positive.len() as f64)
}

fn map_oracle() -> Outcome {
    let mut rng = SeededRng::new(5);
    let mut compared = 0;
    for trial in 0..1000 {
        let n = rng.random_range(1..=8);
        let l = rng.random_range(1..=3);
        let scores: Vec<f64> = (0..n * l)
            .map(|_| rng.random_range(0..5) as f64 / 4.0)
            .collect();
        let truth: Vec<bool> = (0..n * l).map(|_| rng.random_bool(0.4)).collect();
        let per_class: Vec<Option<f64>> = (0..l)
            .map(|j| {
                let s: Vec<f64> = (0..n).map(|i| scores[i * l + j]).collect();
                let t: Vec<bool> = (0..n).map(|i| truth[i * l + j]).collect();
                brute_force_ap(&s, &t)
            })
            .collect();
        let valid: Vec<f64> = per_class.iter().flatten().copied().collect();
        let batch =
            EvalBatch::new(n, l, scores.clone(), truth.clone()).map_err(|e| e.to_string())?;
        match mean_average_precision(&batch) {
            Ok(report) => {
                let oracle_map = valid.iter().sum::<f64>() / valid.len() as f64;
                if valid.is_empty() || report.per_class != per_class || report.map != oracle_map {
                    return Err(format!("trial {trial}: {report:?} vs {per_class:?}"));
                }
                compared += 1;
            }
            Err(_) if valid.is_empty() => {}
            Err(e) => return Err(format!("trial {trial}: {e}")),
        }
        for j in 0..l {
            let s: Vec<f64> = (0..n).map(|i| scores[i * l + j]).collect();
            let t: Vec<bool> = (0..n).map(|i| truth[i * l + j]).collect();
            if average_precision(&s, &t).ok() != per_class[j] {
                return Err(format!("trial {trial} class {j}"));
            }
        }
    }
    Ok(format!(
        "1000 instances ({compared} with a positive class), exact match"
    ))
}

fn reductions() -> Outcome {
    let mut rng = SeededRng::new(6);
    for trial in 0..300 {
        let n = rng.random_range(1..30);
        let l = rng.random_range(1..8);
        let rows: Vec<Vec<bool>> = (0..n)
            .map(|_| {
                let mut r: Vec<bool> = (0..l).map(|_| rng.random_bool(0.3)).collect();
                r[rng.random_range(0..l)] = true;
                r
            })
            .collect();
        let gt = GroundTruthMatrix::from_rows(&rows).map_err(|e| e.to_string())?;
        let seed: u64 = rng.random();
        let sspl = mask_sspl(&gt, 1.0, &mut SeededRng::new(seed)).map_err(|e| e.to_string())?;
        let fspl = mask_fspl(&gt, &mut SeededRng::new(seed)).map_err(|e| e.to_string())?;
        if sspl != fspl {
            return Err(format!("trial {trial}: sspl(1.0) != fspl"));
        }
        if mask_fpl(&gt, 1.0, &mut SeededRng::new(seed)).map_err(|e| e.to_string())?
            != mask_ffl(&gt)
        {
            return Err(format!("trial {trial}: fpl(1.0) != ffl"));
        }

        let pred: Vec<f64> = (0..l).map(|_| rng.random_range(0.0..1.0)).collect();
        for i in 0..n {
            let o = sspl.row(i);
            let mixed: Vec<Observation> = o
                .iter()
                .map(|&v| {
                    if rng.random_bool(0.5) {
                        Observation::Unobserved
                    } else {
                        v
                    }
                })
                .collect();
            for row in [o, &mixed[..]] {
                let an = (
                    loss_an(&pred, row).unwrap(),
                    loss_an_grad(&pred, row).unwrap(),
                );
                let ls = (
                    loss_an_ls(&pred, row, 0.0).unwrap(),
                    loss_an_ls_grad(&pred, row, 0.0).unwrap(),
                );
                let wan = (
                    loss_wan(&pred, row, 1.0).unwrap(),
                    loss_wan_grad(&pred, row, 1.0).unwrap(),
                );
                if an != ls || an != wan {
                    return Err(format!("trial {trial} row {i}: {an:?} {ls:?} {wan:?}"));
                }
            }
        }
    }
    Ok("300 instances: sspl(1)=fspl, fpl(1)=ffl, an_ls(0)=an, wan(1)=an, bit-exact".into())
}

fn trend() -> Outcome {
    let start = Instant::now();
    let cfg = SweepConfig::from_kv_text(
        "settings = sspl:0.2, sspl:0.4, sspl:0.6, sspl:0.8, fspl\nlosses = plmcl, an, an_ls, wan\nseeds = 0, 1, 2, 3, 4\n",
    )
    .map_err(|e| e.to_string())?;
    let result = sweep(&cfg).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let failed = result.rows.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        return Err(format!("{failed} runs failed"));
    }
    let mut problems = Vec::new();
    let mut table = Vec::new();
    for loss in LossKind::ALL {
        let medians: Vec<f64> = cfg
            .settings
            .iter()
            .map(|&s| result.median(s, loss).unwrap())
            .collect();
        let drops: Vec<f64> = medians
            .windows(2)
            .map(|w| w[0] - w[1])
            .filter(|&d| d > 0.0)
            .collect();
        if drops.len() > 1 || drops.iter().any(|&d| d > 0.01) {
            problems.push(format!("{loss} not monotone: {medians:.4?}"));
        }
        table.push(format!(
            "{loss} [{}]",
            medians
                .iter()
                .map(|m| format!("{m:.3}"))
                .collect::<Vec<_>>()
                .join(" ")
        ));
    }
    for &f in &[0.2, 0.4] {
        let s = LabelSetting::new(SettingKind::Sspl, f);
        let (p, a) = (
            result.median(s, LossKind::Plmcl).unwrap(),
            result.median(s, LossKind::An).unwrap(),
        );
        if p <= a {
            problems.push(format!("plmcl {p:.4} <= an {a:.4} at sspl {f}"));
        }
    }
    if elapsed > Duration::from_secs(15 * 60) {
        problems.push(format!("sweep took {elapsed:.0?}"));
    }
    let detail = format!(
        "{} runs in {elapsed:.1?}; medians 20/40/60/80/100%: {}",
        result.rows.len(),
        table.join(", ")
    );
    if problems.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{}; {detail}", problems.join("; ")))
    }
}

fn run_cli(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_plmcl"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(out.stdout)
}

fn cli_pass(root: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let p = |name: &str| root.join(name).to_string_lossy().into_owned();
    std::fs::create_dir_all(root).map_err(|e| e.to_string())?;
    std::fs::write(
        root.join("spec.txt"),
        "n_images = 600\nn_test = 300\nseed = 3\n",
    )
    .map_err(|e| e.to_string())?;
    std::fs::write(
        root.join("train.txt"),
        "epochs = 4\nhidden_width = 8\nseed = 3\n",
    )
    .map_err(|e| e.to_string())?;
    std::fs::write(
        root.join("sweep.txt"),
        "settings = sspl:0.4, fspl\nlosses = plmcl, an\nseeds = 1, 2\nepochs = 2\nn_images = 300\nn_test = 150\n",
    )
    .map_err(|e| e.to_string())?;

    run_cli(&["gen-data", "--spec", &p("spec.txt"), "--out", &p("data")])?;
    run_cli(&[
        "mask",
        "--setting",
        "sspl",
        "--fraction",
        "0.3",
        "--seed",
        "3",
        "--in",
        &p("data/train.csv"),
        "--out",
        &p("obs.csv"),
    ])?;
    let train_stdout = run_cli(&[
        "train",
        "--config",
        &p("train.txt"),
        "--data",
        &p("data"),
        "--obs",
        &p("obs.csv"),
        "--out",
        &p("run"),
        "--pseudo-trace",
    ])?;
    let eval_stdout = run_cli(&[
        "eval",
        "--model",
        &p("run/model_best.json"),
        "--data",
        &p("data"),
    ])?;
    run_cli(&["sweep", "--config", &p("sweep.txt"), "--out", &p("sweep")])?;

    let mut artefacts = vec![
        ("train stdout".to_string(), train_stdout),
        ("eval stdout".to_string(), eval_stdout),
    ];
    for f in [
        "data/train.csv",
        "data/test.csv",
        "data/teacher.json",
        "obs.csv",
        "run/metrics.csv",
        "run/summary.json",
        "run/model_best.json",
        "run/model_final.json",
        "run/pseudo_trace.jsonl",
        "sweep/runs.csv",
        "sweep/summary.csv",
    ] {
        artefacts.push((
            f.to_string(),
            std::fs::read(root.join(f)).map_err(|e| format!("{f}: {e}"))?,
        ));
    }
    Ok(artefacts)
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let a = cli_pass(&tmp.path().join("a"))?;
    let b = cli_pass(&tmp.path().join("b"))?;
    let differing: Vec<&str> = a
        .iter()
        .zip(&b)
        .filter(|(x, y)| x.1 != y.1)
        .map(|(x, _)| x.0.as_str())
        .collect();
    check(
        differing.is_empty() && a.len() == b.len(),
        format!(
            "{} artefacts of gen-data/mask/train/eval/sweep compared; differing: {differing:?}",
            a.len()
        ),
    )
}

fn state_bytes(n: usize, l: usize) -> usize {
    // Vec headers, latent/soft/momentum as f64, observed mask and values as bool.
    n * (size_of::<PseudoState>() + 3 * l * size_of::<f64>() + 2 * l * size_of::<bool>())
}

/// Heap held while training runs: at every epoch end and at the peak.
fn profile_training(n: usize, epochs: usize) -> Result<(usize, Vec<usize>, usize), String> {
    let data = generate(&SyntheticSpec {
        n_images: n,
        n_test: 500,
        seed: 9,
        ..SyntheticSpec::default()
    })
    .map_err(|e| e.to_string())?;
    let obs = mask_sspl(&data.train.gt, 0.2, &mut SeededRng::new(9)).map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        epochs,
        ..TrainConfig::default()
    };
    let base = LIVE.load(Ordering::SeqCst);
    PEAK.store(base, Ordering::SeqCst);
    let mut live = Vec::new();
    let mut scalars = 0;
    train_with_observer(&cfg, &data.train, &data.test, &obs, &mut |_, states| {
        live.push(LIVE.load(Ordering::SeqCst) - base);
        scalars = states.iter().map(PseudoState::scalar_count).sum();
        Ok(())
    })
    .map_err(|e| e.to_string())?;
    Ok((PEAK.load(Ordering::SeqCst) - base, live, scalars))
}

fn memory_contract() -> Outcome {
    let l = SyntheticSpec::default().n_classes;
    let (peak_short, live_short, scalars) = profile_training(2000, 3)?;
    let (peak_long, live_long, _) = profile_training(2000, 12)?;
    let (peak_double, live_double, scalars_double) = profile_training(4000, 3)?;

    let mut problems = Vec::new();
    if scalars != 5 * 2000 * l || scalars_double != 5 * 4000 * l {
        problems.push(format!("pseudo scalars {scalars}, {scalars_double}"));
    }
    let state = state_bytes(2000, l);
    // Per-epoch growth must stay far below one N x L label matrix.
    let growth = live_long
        .windows(2)
        .map(|w| w[1] as i64 - w[0] as i64)
        .max()
        .unwrap_or(0);
    let matrix = (2000 * l * size_of::<f64>()) as i64;
    if growth * 20 > matrix {
        problems.push(format!("live heap grows {growth} B per epoch"));
    }
    if live_short[0] < state || live_short[0] > state + state / 10 {
        problems.push(format!(
            "live heap {} B vs pseudo state {state} B",
            live_short[0]
        ));
    }
    if (peak_long as i64 - peak_short as i64) * 20 > matrix {
        problems.push(format!(
            "peak grows with epochs: {peak_short} -> {peak_long}"
        ));
    }
    let ratio = (live_double[0] as f64) / (live_short[0] as f64);
    if !(1.8..=2.2).contains(&ratio) {
        problems.push(format!("doubling N scales live heap by {ratio:.2}"));
    }
    let detail = format!(
        "N=2000 L={l}: pseudo state {state} B, live {} B, max epoch growth {growth} B, peak {peak_short} B (3 ep) / {peak_long} B (12 ep); N=4000 live x{ratio:.2}, peak {peak_double} B",
        live_short[0]
    );
    if problems.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{}; {detail}", problems.join("; ")))
    }
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("gradient oracle", gradient_oracle),
        ("psi/xi anchors", anchors),
        ("monotonicity suite", monotonicity),
        ("pseudo-label fixed points", fixed_points),
        ("mAP oracle", map_oracle),
        ("setting and loss reductions", reductions),
        ("trend reproduction", trend),
        ("CLI determinism", determinism),
        ("memory contract", memory_contract),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
