//! End-to-end acceptance suite. Runs every criterion sequentially (so the
//! runtime limits measure one criterion at a time), prints one
//! `ACCEPTANCE <n> <name>: PASS|FAIL` line each, then asserts that all passed.
//!
//! Set `DCRBM_ACCEPTANCE_ONLY=7,8` to run a subset while iterating.

mod common;

use std::path::Path;
use std::time::{Duration, Instant};

use common::{all_patterns, random_params};
use dcrbm::data::{
    binarize_statistical, gen_bars_stripes, gen_shifting_bar, load_binary_matrix, minibatches,
    FileFormat, LoadedMatrix,
};
use dcrbm::evaluator::{ais_log_partition, atll_estimated};
use dcrbm::oracle::{apply_kernel, gibbs_kernel, log_likelihood_joint, visible_distribution};
use dcrbm::sampler::{estimate_grad_f, run_chain};
use dcrbm::trainers::{
    cd_update, sdcp_update_minibatch, train, ChainStreams, Trainer, TrainingRun,
};
use dcrbm::{
    AisConfig, Algorithm, BinaryDataset, BinaryPattern, CenteringState, EvalSettings, GradientRecord,
    RbmParams, RngStream, TrainConfig,
};
use ndarray::Array1;
use rayon::prelude::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Fails the outcome if it took longer than `limit`.
fn within(limit: Option<Duration>, elapsed: Duration, o: Outcome) -> Outcome {
    match limit {
        Some(l) if elapsed > l => outcome(
            false,
            format!("{} [over time limit: {:.1}s > {:.0}s]", o.detail, elapsed.as_secs_f64(), l.as_secs_f64()),
        ),
        _ => o,
    }
}

fn mnist_subset() -> BinaryDataset {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/mnist-1k-images-idx3-ubyte");
    match load_binary_matrix(path, FileFormat::Idx, Some(784)).unwrap() {
        LoadedMatrix::Grayscale(g) => binarize_statistical(&g, "mnist-1k", 2024),
        LoadedMatrix::Binary(d) => d,
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

// 1 -----------------------------------------------------------------------

fn exact_oracle() -> Outcome {
    let mut worst_ll = 0.0f64;
    let mut worst_norm = 0.0f64;
    let patterns = all_patterns(6);
    for seed in 0..50 {
        let p = random_params(6, 4, 1.0, 1000 + seed);
        let mut total = 0.0;
        for v in &patterns {
            let ll = p.exact_log_likelihood(v).unwrap();
            worst_ll = worst_ll.max((ll - log_likelihood_joint(&p, v)).abs());
            total += ll.exp();
        }
        worst_norm = worst_norm.max((total - 1.0).abs());
    }
    outcome(
        worst_ll < 1e-10 && worst_norm < 1e-9,
        format!("max |ll - oracle| = {worst_ll:.2e}, max |Σp - 1| = {worst_norm:.2e}"),
    )
}

// 2 -----------------------------------------------------------------------

fn gradient_checks() -> Outcome {
    use dcrbm::oracle::{finite_difference, max_relative_error};
    let mut worst_g = 0.0f64;
    let mut worst_f = 0.0f64;
    let mut rng = RngStream::new(2, 0);
    for seed in 0..20 {
        let (m, n) = (3 + seed as usize % 3, 2 + seed as usize % 4);
        let p = random_params(m, n, 1.0, 2000 + seed);
        let v = BinaryPattern::new((0..m).map(|_| rng.bernoulli(0.5)).collect()).unwrap();
        let fd_g = finite_difference(&p, 1e-5, |q| q.g_value(&v).unwrap());
        let fd_f = finite_difference(&p, 1e-5, |q| q.exact_log_partition().unwrap());
        worst_g = worst_g.max(max_relative_error(&p.grad_g(&v).unwrap(), &fd_g, 1e-3));
        worst_f = worst_f.max(max_relative_error(&p.exact_grad_f().unwrap(), &fd_f, 1e-3));
    }
    outcome(
        worst_g < 1e-4 && worst_f < 1e-4,
        format!("max rel err grad_g = {worst_g:.2e}, exact_grad_f = {worst_f:.2e}"),
    )
}

// 3 -----------------------------------------------------------------------

fn sampler_correctness() -> Outcome {
    let p = random_params(3, 2, 1.0, 3000);
    let pi = visible_distribution(&p);
    let pushed = apply_kernel(&pi, &gibbs_kernel(&p));
    let invariance = pi.iter().zip(&pushed).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let chains = 100_000u64;
    let counts = (0..chains)
        .into_par_iter()
        .fold(
            || vec![0usize; 8],
            |mut acc, c| {
                let mut rng = RngStream::new(33, c);
                let v = run_chain(&p, &BinaryPattern::zeros(3), 500, None, &mut rng).unwrap();
                acc[v.to_index() as usize] += 1;
                acc
            },
        )
        .reduce(|| vec![0usize; 8], |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect());
    let mut worst_z = 0.0f64;
    for (&c, &q) in counts.iter().zip(&pi) {
        let sd = (chains as f64 * q * (1.0 - q)).sqrt();
        worst_z = worst_z.max((c as f64 - chains as f64 * q).abs() / sd);
    }
    outcome(
        invariance < 1e-10 && worst_z <= 3.0,
        format!("kernel invariance err = {invariance:.2e}, worst |z| over 8 states = {worst_z:.2}"),
    )
}

// 4 -----------------------------------------------------------------------

fn trajectories_match(start: &RbmParams, data: &BinaryDataset, batch: usize, k: usize, seed: u64) -> bool {
    let mut cd_cfg = TrainConfig::new(Algorithm::Cd, 0.05);
    cd_cfg.k = k;
    let mut sd_cfg = TrainConfig::new(Algorithm::Sdcp, 0.05);
    sd_cfg.d = 1;
    sd_cfg.k_prime = k;
    let mut a = start.clone();
    let mut b = start.clone();
    let mut sa = ChainStreams::new(seed);
    let mut sb = ChainStreams::new(seed);
    let mut updates = 0;
    let mut epoch = 0;
    while updates < 100 {
        for mb in minibatches(data, batch, seed, epoch).unwrap() {
            if updates == 100 {
                break;
            }
            a = cd_update(&a, &mb, &cd_cfg, &mut sa).unwrap();
            b = sdcp_update_minibatch(&b, &mb, &sd_cfg, &mut sb).unwrap();
            if a != b {
                return false;
            }
            updates += 1;
        }
        epoch += 1;
    }
    sa.total_draws() == sb.total_draws()
}

fn cd_special_case() -> Outcome {
    let tiny_data = gen_shifting_bar(6, 2).unwrap();
    let tiny = random_params(6, 4, 0.5, 4000);
    let tiny_ok = trajectories_match(&tiny, &tiny_data, 3, 3, 4);

    let mnist = mnist_subset().head(400);
    let big = random_params(784, 16, 0.01, 4001);
    let big_ok = trajectories_match(&big, &mnist, 20, 2, 5);
    outcome(
        tiny_ok && big_ok,
        format!("bit-identical over 100 updates: 6x4 = {tiny_ok}, 784x16 = {big_ok}"),
    )
}

// 5 -----------------------------------------------------------------------

fn budget_parity() -> Outcome {
    let data = mnist_subset().head(400);
    let mut per_arm = Vec::new();
    for (alg, k, d, kp) in [
        (Algorithm::Cd, 24, 6, 4),
        (Algorithm::Sdcp, 24, 6, 4),
        (Algorithm::Csdcp, 24, 6, 4),
        (Algorithm::Pcd, 24, 6, 4),
    ] {
        let mut cfg = TrainConfig::new(alg, 0.01);
        cfg.k = k;
        cfg.d = d;
        cfg.k_prime = kp;
        cfg.batch_size = 200;
        let mut t = Trainer::new(&data, 16, &cfg).unwrap();
        let counts: Vec<u64> = (0..2).map(|_| t.run_epoch(&data).unwrap()).collect();
        per_arm.push((alg, counts));
    }
    let reference = &per_arm[0].1;
    let pass = per_arm.iter().all(|(_, c)| c == reference) && reference[0] == 400 * 24;
    let detail = per_arm
        .iter()
        .map(|(a, c)| format!("{a} {c:?}"))
        .collect::<Vec<_>>()
        .join(", ");
    outcome(pass, format!("transitions per epoch: {detail}"))
}

// 6 -----------------------------------------------------------------------

fn cardinalities() -> Outcome {
    let bs = gen_bars_stripes(3).unwrap().len();
    let sb = gen_shifting_bar(9, 1).unwrap().len();
    outcome(bs == 14 && sb == 9, format!("bars-stripes(3) = {bs}, shifting-bar(9,1) = {sb}"))
}

// 7, 8 --------------------------------------------------------------------

const TRIALS: u64 = 25;
const SMALL_EPOCHS: usize = 50_000;

fn small_arm(data: &BinaryDataset, alg: Algorithm, eta: f64) -> Vec<f64> {
    (0..TRIALS)
        .into_par_iter()
        .map(|trial| {
            let mut cfg = TrainConfig::new(alg, eta);
            cfg.k = 12;
            cfg.d = 3;
            cfg.k_prime = 4;
            cfg.batch_size = data.len();
            cfg.epochs = SMALL_EPOCHS;
            cfg.eval_interval = 5_000;
            cfg.seed = 7_000 + trial;
            let run: TrainingRun = train(data, data, 4, &cfg, &EvalSettings::default()).unwrap();
            run.final_atll()
        })
        .collect()
}

fn frac_above(xs: &[f64], t: f64) -> f64 {
    xs.iter().filter(|&&x| x > t).count() as f64 / xs.len() as f64
}

fn shifting_bar() -> Outcome {
    let data = gen_shifting_bar(9, 1).unwrap();
    let ceiling = -(data.len() as f64).ln();
    let cd = small_arm(&data, Algorithm::Cd, 0.3);
    let sdcp = small_arm(&data, Algorithm::Sdcp, 0.3);
    let csdcp = small_arm(&data, Algorithm::Csdcp, 0.3);
    let cg = small_arm(&data, Algorithm::Cg, 0.5);
    let (m_cd, m_sd, m_cs, m_cg) = (mean(&cd), mean(&sdcp), mean(&csdcp), mean(&cg));
    let a = (-3.5..=-2.9).contains(&m_cd);
    let b = m_sd > m_cd
        && m_cs > m_cd
        && frac_above(&sdcp, -3.0) >= 0.6
        && frac_above(&csdcp, -3.0) >= 0.6;
    let c = m_cg > -3.0;
    let all = [&cd, &sdcp, &csdcp, &cg];
    let best = all.iter().flat_map(|v| v.iter()).cloned().fold(f64::NEG_INFINITY, f64::max);
    let ceiling_ok = best <= ceiling + 1e-9;
    outcome(
        a && b && c && ceiling_ok,
        format!(
            "mean final ATLL: CD-12 {m_cd:.3} (a:{a}), S-DCP {m_sd:.3} [{:.0}% > -3], CS-DCP {m_cs:.3} [{:.0}% > -3] (b:{b}), \
             CG@0.5 {m_cg:.3} (c:{c}); best {best:.4} vs ceiling {ceiling:.4}",
            100.0 * frac_above(&sdcp, -3.0),
            100.0 * frac_above(&csdcp, -3.0),
        ),
    )
}

fn bars_stripes() -> Outcome {
    let data = gen_bars_stripes(3).unwrap();
    let ceiling = -(data.len() as f64).ln();
    let cd = small_arm(&data, Algorithm::Cd, 0.3);
    let sdcp = small_arm(&data, Algorithm::Sdcp, 0.3);
    let csdcp = small_arm(&data, Algorithm::Csdcp, 0.3);
    let wins = |xs: &[f64]| xs.iter().zip(&cd).filter(|(x, c)| x >= c).count();
    let (w_sd, w_cs) = (wins(&sdcp), wins(&csdcp));
    let best = [&cd, &sdcp, &csdcp].iter().flat_map(|v| v.iter()).cloned().fold(f64::NEG_INFINITY, f64::max);
    let pass = w_sd >= 20 && w_cs >= 20 && best <= ceiling + 1e-9;
    outcome(
        pass,
        format!(
            "mean final ATLL: CD-12 {:.3}, S-DCP {:.3}, CS-DCP {:.3}; trials with ATLL >= CD: S-DCP {w_sd}/25, \
             CS-DCP {w_cs}/25; best {best:.4} vs ceiling {ceiling:.4}",
            mean(&cd),
            mean(&sdcp),
            mean(&csdcp)
        ),
    )
}

// 9 -----------------------------------------------------------------------

fn ais_accuracy() -> Outcome {
    let cfg = AisConfig {
        num_particles: 100,
        num_temps: 10_000,
        ..AisConfig::default()
    };
    let mut per_model = Vec::new();
    for model in 0..5u64 {
        let p = random_params(9, 10, 1.0, 9000 + model);
        let exact = p.exact_log_partition().unwrap();
        let errs: Vec<f64> = (0..5u64)
            .map(|rep| (ais_log_partition(&p, &cfg, 90 + rep).unwrap().log_z - exact).abs())
            .collect();
        per_model.push(errs);
    }
    let good: Vec<usize> = per_model.iter().map(|e| e.iter().filter(|&&x| x < 0.1).count()).collect();
    let worst = per_model.iter().flatten().cloned().fold(0.0, f64::max);
    outcome(
        good.iter().all(|&g| g >= 4),
        format!("repeats within 0.1 per model: {good:?}; worst |error| = {worst:.4}"),
    )
}

// 10 ----------------------------------------------------------------------

fn large_model_smoke() -> Outcome {
    let data = mnist_subset();
    let ais = AisConfig {
        num_particles: 100,
        num_temps: 10_000,
        ..AisConfig::default()
    };
    let mut lines = Vec::new();
    let mut pass = true;
    let mut initial_atll = None;
    for alg in [Algorithm::Cd, Algorithm::Sdcp, Algorithm::Csdcp] {
        let mut cfg = TrainConfig::new(alg, 0.01);
        cfg.k = 24;
        cfg.d = 6;
        cfg.k_prime = 4;
        cfg.batch_size = 200;
        cfg.seed = 10;
        let mut t = Trainer::new(&data, 16, &cfg).unwrap();
        let init = t.initial_model().clone();
        // the initialization is shared by all arms, so it is evaluated once
        let before = *initial_atll
            .get_or_insert_with(|| atll_estimated(&init, data.patterns(), &ais, 1).unwrap());
        let mut finite = true;
        for _ in 0..5 {
            finite &= t.run_epoch(&data).is_ok() && t.model().is_finite();
        }
        let after = atll_estimated(&t.model(), data.patterns(), &ais, 1).unwrap();
        let exact = t.model().atll_exact(data.patterns()).unwrap();
        let ok = finite && before.is_finite() && after.is_finite() && after > before;
        pass &= ok;
        lines.push(format!("{alg} {before:.3} -> {after:.3} (exact {exact:.3})"));
    }
    outcome(pass, format!("AIS ATLL init -> 5 epochs: {}", lines.join(", ")))
}

// 11 ----------------------------------------------------------------------

fn reparameterization_invariance() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..50u64 {
        let (m, n) = (4 + seed as usize % 3, 2 + seed as usize % 3);
        let mut rng = RngStream::new(seed, 11);
        let mut unit = |len: usize| Array1::from_iter((0..len).map(|_| rng.uniform()));
        let (mu, lambda, mu_b, lambda_b) = (unit(m), unit(n), unit(m), unit(n));
        let mut state = CenteringState::new(mu, lambda, 0.3, 0.7).unwrap();
        let mut centered = random_params(m, n, 1.5, 11_000 + seed);
        let before = state.uncentered(&centered);
        state.reparameterize(&mut centered, &mu_b, &lambda_b);
        let after = state.uncentered(&centered);
        for v in all_patterns(m) {
            let pa = before.exact_log_likelihood(&v).unwrap().exp();
            let pb = after.exact_log_likelihood(&v).unwrap().exp();
            worst = worst.max((pa - pb).abs());
        }
    }
    outcome(worst < 1e-9, format!("max |Δp(v)| = {worst:.2e}"))
}

// 12 ----------------------------------------------------------------------

fn gradient_bound() -> Outcome {
    let mut rng = RngStream::new(12, 0);
    let mut violations = 0usize;
    let check = |g: &GradientRecord| {
        let d = g.dims();
        g.iter().all(|x| (0.0..=1.0).contains(&x)) && g.norm() <= ((d.m * d.n + d.m + d.n) as f64).sqrt()
    };
    for trial in 0..10_000u64 {
        let m = 1 + rng.index(12);
        let n = 1 + rng.index(12);
        let sigma = 10f64.powf(4.0 * rng.uniform() - 2.0);
        let p = random_params(m, n, sigma, 12_000 + trial);
        let v = BinaryPattern::new((0..m).map(|_| rng.bernoulli(0.5)).collect()).unwrap();
        let mut ok = check(&p.grad_g(&v).unwrap()) && check(&estimate_grad_f(&p, &v, None).unwrap());
        if trial % 10 == 0 {
            ok &= check(&p.exact_grad_f().unwrap());
        }
        violations += usize::from(!ok);
    }
    outcome(violations == 0, format!("{violations} violations in 10^4 fuzzed (params, v)"))
}

// -------------------------------------------------------------------------

type Criterion = (u32, &'static str, Option<u64>, fn() -> Outcome);

#[test]
fn acceptance() {
    let criteria: [Criterion; 12] = [
        (1, "exact-oracle equivalence", Some(10), exact_oracle),
        (2, "gradient checks", Some(30), gradient_checks),
        (3, "sampler correctness", Some(120), sampler_correctness),
        (4, "CD as special case of S-DCP", None, cd_special_case),
        (5, "budget parity", None, budget_parity),
        (6, "dataset cardinalities", None, cardinalities),
        (7, "shifting bar reproduction", None, shifting_bar),
        (8, "bars & stripes reproduction", None, bars_stripes),
        (9, "AIS accuracy", Some(300), ais_accuracy),
        (10, "large-model smoke test", Some(600), large_model_smoke),
        (11, "centering re-parameterization invariance", None, reparameterization_invariance),
        (12, "gradient bound", None, gradient_bound),
    ];
    let only: Option<Vec<u32>> = std::env::var("DCRBM_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failed = Vec::new();
    for (id, name, limit, run) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let elapsed = start.elapsed();
        let o = within(limit.map(Duration::from_secs), elapsed, o);
        println!(
            "ACCEPTANCE {id:>2} {name}: {} ({:.1}s) {}",
            if o.pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            o.detail
        );
        if !o.pass {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed acceptance criteria: {failed:?}");
}
