mod common;

use common::{all_patterns, random_params};
use dcrbm::data::{gen_bars_stripes, gen_shifting_bar};
use dcrbm::trainers::{dcp_inner_loop, positive_phase, train, Trainer};
use dcrbm::{Algorithm, CenteringState, EvalSettings, RbmParams, RngStream, TrainConfig};
use ndarray::Array1;
use proptest::prelude::*;

fn surrogate(theta: &RbmParams, pos: &dcrbm::GradientRecord) -> f64 {
    let dot: f64 = theta
        .weights()
        .iter()
        .chain(theta.visible_bias().iter())
        .chain(theta.hidden_bias().iter())
        .zip(pos.iter())
        .map(|(a, b)| a * b)
        .sum();
    theta.exact_log_partition().unwrap() - dot
}

#[test]
fn exact_inner_loop_descends_the_convex_surrogate() {
    let data = gen_shifting_bar(6, 2).unwrap();
    for seed in 0..5 {
        let start = random_params(6, 3, 0.5, seed);
        let pos = positive_phase(&start, data.patterns()).unwrap();
        let mut values = vec![surrogate(&start, &pos)];
        dcp_inner_loop(&start, &pos, 10, 0.01, |theta, _| {
            values.push(surrogate(theta, &pos));
            theta.exact_grad_f()
        })
        .unwrap();
        // values[l] is the surrogate at the start of inner step l
        for w in values[1..].windows(2) {
            assert!(w[1] < w[0], "surrogate rose: {w:?}");
        }
    }
}

#[test]
fn exact_dcp_increases_the_likelihood() {
    // small steps on the surrogate with exact ∇f ascend the true objective
    let data = gen_bars_stripes(2).unwrap();
    let mut theta = random_params(4, 3, 0.1, 3);
    let mut last = theta.atll_exact(data.patterns()).unwrap();
    for _ in 0..20 {
        let pos = positive_phase(&theta, data.patterns()).unwrap();
        theta = dcp_inner_loop(&theta, &pos, 3, 0.05, |t, _| t.exact_grad_f()).unwrap();
        let now = theta.atll_exact(data.patterns()).unwrap();
        assert!(now > last);
        last = now;
    }
}

fn small(alg: Algorithm, seed: u64) -> TrainConfig {
    let mut cfg = TrainConfig::new(alg, 0.2);
    cfg.k = 6;
    cfg.d = 2;
    cfg.k_prime = 3;
    cfg.batch_size = 5;
    cfg.epochs = 25;
    cfg.eval_interval = 5;
    cfg.seed = seed;
    cfg
}

#[test]
fn identical_seed_and_config_give_identical_runs() {
    let data = gen_bars_stripes(2).unwrap();
    for alg in [Algorithm::Cd, Algorithm::Pcd, Algorithm::Sdcp, Algorithm::Csdcp, Algorithm::Cg] {
        let cfg = small(alg, 42);
        let a = train(&data, &data, 3, &cfg, &EvalSettings::default()).unwrap();
        let b = train(&data, &data, 3, &cfg, &EvalSettings::default()).unwrap();
        assert!(a.same_result(&b));
        let c = train(&data, &data, 3, &small(alg, 43), &EvalSettings::default()).unwrap();
        assert_ne!(a.final_params, c.final_params);
    }
}

#[test]
fn sdcp_epoch_transitions_are_d_kprime_per_sample() {
    let data = gen_shifting_bar(9, 1).unwrap();
    for (d, kp) in [(1, 12), (3, 4), (6, 2)] {
        for alg in [Algorithm::Sdcp, Algorithm::Csdcp] {
            let mut cfg = small(alg, 1);
            cfg.d = d;
            cfg.k_prime = kp;
            cfg.batch_size = 4;
            let mut t = Trainer::new(&data, 4, &cfg).unwrap();
            assert_eq!(t.run_epoch(&data).unwrap(), (d * kp * 9) as u64);
        }
    }
}

#[test]
fn training_improves_bars_and_stripes() {
    let data = gen_bars_stripes(3).unwrap();
    for alg in [Algorithm::Cd, Algorithm::Sdcp, Algorithm::Csdcp] {
        let mut cfg = small(alg, 7);
        cfg.batch_size = 14;
        cfg.epochs = 3000;
        cfg.eval_interval = 3000;
        cfg.eta = 0.3;
        let run = train(&data, &data, 4, &cfg, &EvalSettings::default()).unwrap();
        assert!(run.final_atll() > run.curve[0].atll + 0.5, "{alg}: {:?}", run.curve);
        assert!(run.final_atll() <= -(14f64).ln() + 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn reparameterization_preserves_the_distribution(
        seed in any::<u64>(),
        nu_mu in 0.0f64..=1.0,
        nu_lambda in 0.0f64..=1.0,
    ) {
        let (m, n) = (5, 3);
        let mut rng = RngStream::new(seed, 9);
        let mut unit = |len: usize| Array1::from_iter((0..len).map(|_| rng.uniform()));
        let (mu, lambda, mu_b, lambda_b) = (unit(m), unit(n), unit(m), unit(n));
        let mut state = CenteringState::new(mu, lambda, nu_mu, nu_lambda).unwrap();
        let mut centered = random_params(m, n, 2.0, seed);
        let before = state.uncentered(&centered);
        state.reparameterize(&mut centered, &mu_b, &lambda_b);
        let after = state.uncentered(&centered);
        for v in all_patterns(m) {
            let a = before.exact_log_likelihood(&v).unwrap();
            let b = after.exact_log_likelihood(&v).unwrap();
            prop_assert!((a.exp() - b.exp()).abs() < 1e-9);
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
