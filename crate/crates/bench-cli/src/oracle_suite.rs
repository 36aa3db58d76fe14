//! `oracle`: self-checks of the library against brute-force references.

use clap::ValueEnum;
use dcrbm::data::{gen_bars_stripes, gen_shifting_bar, minibatches};
use dcrbm::evaluator::ais_log_partition;
use dcrbm::oracle::{
    apply_kernel, chi_square, chi_square_critical, finite_difference, gibbs_kernel,
    log_likelihood_joint, log_partition_joint, max_relative_error, visible_distribution,
};
use dcrbm::sampler::{run_chain, ChainState};
use dcrbm::trainers::{cd_update, sdcp_update_minibatch, ChainStreams, Trainer};
use dcrbm::{AisConfig, Algorithm, BinaryPattern, RbmParams, RngStream, TrainConfig};
use ndarray::{Array1, Array2};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Gradients,
    Enumeration,
    Sampler,
    CdEquivalence,
    Ais,
    Budget,
    All,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub measured: f64,
    /// Pass when `measured <= tolerance`.
    pub tolerance: f64,
    pub pass: bool,
}

fn check(suite: &'static str, name: impl Into<String>, measured: f64, tolerance: f64) -> Check {
    Check {
        suite,
        name: name.into(),
        measured,
        tolerance,
        pass: measured <= tolerance,
    }
}

fn random_params(m: usize, n: usize, sigma: f64, seed: u64, id: u64) -> RbmParams {
    let mut rng = RngStream::new(seed, id);
    let mut gauss = |len: usize| (0..len).map(|_| sigma * rng.standard_normal()).collect::<Vec<_>>();
    RbmParams::from_parts(
        Array2::from_shape_vec((n, m), gauss(n * m)).expect("shape"),
        Array1::from(gauss(m)),
        Array1::from(gauss(n)),
    )
    .expect("finite parameters")
}

fn random_pattern(len: usize, rng: &mut RngStream) -> BinaryPattern {
    BinaryPattern::new((0..len).map(|_| rng.bernoulli(0.5)).collect()).expect("binary")
}

fn gradients(seed: u64) -> Vec<Check> {
    let mut rng = RngStream::new(seed, 1);
    let (mut worst_g, mut worst_f, mut worst_bound) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..20u64 {
        let (m, n) = (3 + i as usize % 3, 2 + i as usize % 4);
        let p = random_params(m, n, 1.0, seed, 100 + i);
        let v = random_pattern(m, &mut rng);
        let gg = p.grad_g(&v).expect("dims");
        let gf = p.exact_grad_f().expect("tiny");
        let fd_g = finite_difference(&p, 1e-5, |q| q.g_value(&v).expect("dims"));
        let fd_f = finite_difference(&p, 1e-5, |q| q.exact_log_partition().expect("tiny"));
        worst_g = worst_g.max(max_relative_error(&gg, &fd_g, 1e-3));
        worst_f = worst_f.max(max_relative_error(&gf, &fd_f, 1e-3));
        let limit = ((m * n + m + n) as f64).sqrt();
        for g in [&gg, &gf] {
            let outside = g.iter().map(|x| (-x).max(x - 1.0).max(0.0)).fold(0.0, f64::max);
            worst_bound = worst_bound.max(outside).max(g.norm() - limit);
        }
    }
    vec![
        check("gradients", "grad_g vs central differences (max rel err)", worst_g, 1e-4),
        check("gradients", "exact_grad_f vs central differences (max rel err)", worst_f, 1e-4),
        check("gradients", "entries in [0,1], norm <= sqrt(mn+m+n) (max excess)", worst_bound.max(0.0), 0.0),
    ]
}

fn enumeration(seed: u64) -> Vec<Check> {
    let (mut worst_ll, mut worst_z, mut worst_norm) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..20u64 {
        let (m, n) = if i % 2 == 0 { (6, 4) } else { (4, 6) };
        let p = random_params(m, n, 1.0, seed, 200 + i);
        worst_z = worst_z.max((p.exact_log_partition().expect("tiny") - log_partition_joint(&p)).abs());
        let mut total = 0.0;
        for idx in 0..1u64 << m {
            let v = BinaryPattern::from_index(idx, m);
            let ll = p.exact_log_likelihood(&v).expect("tiny");
            worst_ll = worst_ll.max((ll - log_likelihood_joint(&p, &v)).abs());
            total += ll.exp();
        }
        worst_norm = worst_norm.max((total - 1.0).abs());
    }
    vec![
        check("enumeration", "log Z vs joint (v,h) enumeration", worst_z, 1e-10),
        check("enumeration", "log p(v) vs joint enumeration", worst_ll, 1e-10),
        check("enumeration", "|sum_v p(v) - 1|", worst_norm, 1e-9),
    ]
}

fn sampler(seed: u64) -> Vec<Check> {
    let p = random_params(3, 2, 1.0, seed, 300);
    let pi = visible_distribution(&p);
    let pushed = apply_kernel(&pi, &gibbs_kernel(&p));
    let invariance = pi.iter().zip(&pushed).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let mut counts = vec![0usize; pi.len()];
    let chains = 20_000u64;
    let mut draws_ok = true;
    for c in 0..chains {
        let mut chain = ChainState::new(BinaryPattern::zeros(3), RngStream::new(seed, c));
        chain.v = run_chain(&p, &chain.v, 100, None, &mut chain.rng).expect("dims");
        draws_ok &= chain.rng.draws() == 100 * 5;
        counts[chain.v.to_index() as usize] += 1;
    }
    let (stat, dof) = chi_square(&counts, &pi, 5.0);
    vec![
        check("sampler", "exact marginal invariant under Gibbs kernel", invariance, 1e-10),
        check(
            "sampler",
            format!("chi-square of {chains} chain endpoints ({dof} dof, 0.999 critical value)"),
            stat,
            chi_square_critical(dof, 3.09),
        ),
        check("sampler", "draws per transition == m+n (mismatches)", f64::from(u8::from(!draws_ok)), 0.0),
    ]
}

fn trajectory_mismatch(start: &RbmParams, data: &dcrbm::BinaryDataset, k: usize, seed: u64) -> f64 {
    let mut cd = TrainConfig::new(Algorithm::Cd, 0.1);
    cd.k = k;
    let mut sd = TrainConfig::new(Algorithm::Sdcp, 0.1);
    sd.d = 1;
    sd.k_prime = k;
    let (mut a, mut b) = (start.clone(), start.clone());
    let (mut sa, mut sb) = (ChainStreams::new(seed), ChainStreams::new(seed));
    let mut updates = 0;
    for epoch in 0.. {
        for batch in minibatches(data, 4, seed, epoch).expect("batch size") {
            a = cd_update(&a, &batch, &cd, &mut sa).expect("dims");
            b = sdcp_update_minibatch(&b, &batch, &sd, &mut sb).expect("dims");
            if a != b {
                return 1.0;
            }
            updates += 1;
            if updates == 100 {
                return 0.0;
            }
        }
    }
    unreachable!()
}

fn cd_equivalence(seed: u64) -> Vec<Check> {
    let bar = gen_shifting_bar(9, 1).expect("valid");
    let bs = gen_bars_stripes(4).expect("valid");
    vec![
        check(
            "cd-equivalence",
            "S-DCP(d=1, K'=3) == CD-3 bit-for-bit over 100 updates, 9x4 (mismatches)",
            trajectory_mismatch(&random_params(9, 4, 0.5, seed, 400), &bar, 3, seed),
            0.0,
        ),
        check(
            "cd-equivalence",
            "S-DCP(d=1, K'=5) == CD-5 bit-for-bit over 100 updates, 16x8 (mismatches)",
            trajectory_mismatch(&random_params(16, 8, 0.5, seed, 401), &bs, 5, seed),
            0.0,
        ),
    ]
}

fn ais(seed: u64) -> Vec<Check> {
    let p = random_params(9, 10, 1.0, seed, 500);
    let exact = p.exact_log_partition().expect("tiny");
    let cfg = AisConfig::default();
    let errors: Vec<f64> = (0..5)
        .map(|r| (ais_log_partition(&p, &cfg, seed + r).expect("valid").log_z - exact).abs())
        .collect();
    let outside = errors.iter().filter(|&&e| e >= 0.1).count();
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    vec![
        check("ais", "repeats with |log Z_ais - log Z| >= 0.1 (of 5)", outside as f64, 1.0),
        check("ais", "mean |log Z_ais - log Z| over 5 repeats", mean, 0.1),
    ]
}

fn budget(seed: u64) -> Vec<Check> {
    let data = gen_bars_stripes(3).expect("valid");
    let arms = [
        (Algorithm::Cd, 12, 1, 1),
        (Algorithm::Pcd, 12, 1, 1),
        (Algorithm::Cg, 12, 1, 1),
        (Algorithm::Sdcp, 1, 3, 4),
        (Algorithm::Csdcp, 1, 3, 4),
        (Algorithm::Sdcp, 1, 6, 2),
    ];
    let counts: Vec<Vec<u64>> = arms
        .iter()
        .map(|&(alg, k, d, kp)| {
            let mut cfg = TrainConfig::new(alg, 0.1);
            cfg.k = k;
            cfg.d = d;
            cfg.k_prime = kp;
            cfg.batch_size = 5;
            cfg.seed = seed;
            let mut t = Trainer::new(&data, 4, &cfg).expect("valid");
            (0..3).map(|_| t.run_epoch(&data).expect("finite")).collect()
        })
        .collect();
    let expected = (data.len() * 12) as u64;
    let mismatches = counts.iter().flatten().filter(|&&c| c != expected).count();
    vec![check(
        "budget",
        format!("measured transitions per epoch != N*K = {expected} (mismatching epochs)"),
        mismatches as f64,
        0.0,
    )]
}

pub fn run(suite: Suite, seed: u64) -> Vec<Check> {
    match suite {
        Suite::Gradients => gradients(seed),
        Suite::Enumeration => enumeration(seed),
        Suite::Sampler => sampler(seed),
        Suite::CdEquivalence => cd_equivalence(seed),
        Suite::Ais => ais(seed),
        Suite::Budget => budget(seed),
        Suite::All => [
            Suite::Gradients,
            Suite::Enumeration,
            Suite::Sampler,
            Suite::CdEquivalence,
            Suite::Ais,
            Suite::Budget,
        ]
        .into_iter()
        .flat_map(|s| run(s, seed))
        .collect(),
    }
}
