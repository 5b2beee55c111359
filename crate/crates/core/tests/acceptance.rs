//! Acceptance gate. Each criterion is one test that writes a single
//! `criterion N: PASS|FAIL` line to stderr (bypassing output capture) and
//! then asserts.

mod common;

use std::io::Write;
use std::sync::OnceLock;

use hopbound::bench::{
    derive_seed, envelope_check, exec_sim, histogram, is_unimodal, reference_graph_spec,
    sample_metadata, sample_stats, scaling, streams, EnvelopeParams, ExecRow, ExperimentConfig,
    ScalingRow,
};
use hopbound::envelope::{
    compute_envelope, maxsg_vertex_caps, normal_quantile, overflows, pb_exact_distribution,
    pb_moments, pmf_quantile,
};
use hopbound::exec::{
    build_pipeline, capture_replay, early_exit_overhead, grid_size, replay_epoch, simulate_epoch,
    CostModel, Strategy,
};
use hopbound::graph::{generate, CsrGraph, GraphGenSpec};
use hopbound::provision::{
    envelope_plan, exact_plan, maxsg_plan, metadata_keys, BufferArena, FallbackRunner,
};
use hopbound::sampler::SampleConfig;
use hopbound::Error;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(n: u32, pass: bool, detail: String) {
    let line = format!(
        "criterion {n}: {} ({detail})\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {n} failed: {detail}");
}

fn exp() -> ExperimentConfig {
    ExperimentConfig::default()
}

fn reference_graph() -> &'static CsrGraph {
    static G: OnceLock<CsrGraph> = OnceLock::new();
    G.get_or_init(|| {
        let seed = derive_seed(exp().master_seed, streams::GRAPH);
        generate(&reference_graph_spec(), seed).unwrap()
    })
}

fn exec_rows() -> &'static [ExecRow] {
    static R: OnceLock<Vec<ExecRow>> = OnceLock::new();
    R.get_or_init(|| {
        let e = exp();
        let seed = derive_seed(e.master_seed, streams::EXEC_SIM);
        exec_sim(
            reference_graph(),
            &e,
            &CostModel::default_calibration(),
            seed,
        )
        .unwrap()
    })
}

fn scaling_rows() -> &'static [ScalingRow] {
    static R: OnceLock<Vec<ScalingRow>> = OnceLock::new();
    R.get_or_init(|| {
        let e = exp();
        let seed = derive_seed(e.master_seed, streams::SCALING);
        scaling(
            reference_graph(),
            &e,
            &CostModel::default_calibration(),
            seed,
        )
        .unwrap()
    })
}

#[test]
fn criterion_01_poisson_binomial_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_moment, mut worst_q, mut checked_q) = (0.0f64, 0.0f64, 0);
    for _ in 0..200 {
        let len = rng.gen_range(1..=20);
        let p: Vec<f64> = (0..len).map(|_| rng.gen::<f64>()).collect();
        let pmf = pb_exact_distribution(&p).unwrap();
        let mean: f64 = pmf.iter().enumerate().map(|(k, w)| k as f64 * w).sum();
        let var: f64 = pmf
            .iter()
            .enumerate()
            .map(|(k, w)| (k as f64 - mean).powi(2) * w)
            .sum();
        let m = pb_moments(&p).unwrap();
        worst_moment = worst_moment
            .max((mean - m.mu).abs())
            .max((var - m.sigma2).abs());
        if m.mu >= 5.0 {
            for q in [0.9, 0.99] {
                let approx = (m.mu + normal_quantile(q).unwrap() * m.sigma()).round();
                worst_q = worst_q.max((pmf_quantile(&pmf, q) as f64 - approx).abs());
                checked_q += 1;
            }
        }
    }
    let pass = worst_moment <= 1e-9 && worst_q <= 2.0 && checked_q > 0;
    report(
        1,
        pass,
        format!("max moment error {worst_moment:.2e}, max quantile gap {worst_q} over {checked_q} checks"),
    );
}

/// Inverse normal CDF evaluated with 40-digit arithmetic.
#[allow(clippy::excessive_precision)]
const QUANTILE_REFERENCE: [(f64, f64); 50] = [
    (1e-12, -7.0344838253011319),
    (1e-10, -6.3613409024040562),
    (1e-08, -5.6120012441747887),
    (1e-06, -4.753424308822899),
    (1e-05, -4.2648907939228246),
    (0.0001, -3.7190164854556806),
    (0.0005, -3.2905267314918948),
    (0.001, -3.0902323061678135),
    (0.0025, -2.8070337683438041),
    (0.005, -2.5758293035489008),
    (0.01, -2.3263478740408411),
    (0.02, -2.053748910631823),
    (0.025, -1.9599639845400542),
    (0.05, -1.6448536269514727),
    (0.075, -1.4395314709384559),
    (0.1, -1.2815515655446004),
    (0.15, -1.0364333894937896),
    (0.2, -0.84162123357291417),
    (0.25, -0.67448975019608174),
    (0.3, -0.52440051270804082),
    (0.35, -0.38532046640756768),
    (0.4, -0.25334710313579974),
    (0.45, -0.12566134685507401),
    (0.49, -0.025068908258711058),
    (0.5, 0.0),
    (0.51, 0.025068908258711058),
    (0.55, 0.12566134685507415),
    (0.6, 0.25334710313579974),
    (0.65, 0.38532046640756768),
    (0.7, 0.52440051270804066),
    (0.75, 0.67448975019608174),
    (0.8, 0.84162123357291436),
    (0.85, 1.0364333894937895),
    (0.9, 1.2815515655446006),
    (0.925, 1.4395314709384562),
    (0.95, 1.6448536269514723),
    (0.975, 1.9599639845400539),
    (0.98, 2.0537489106318227),
    (0.99, 2.3263478740408408),
    (0.995, 2.5758293035489005),
    (0.9975, 2.807033768343811),
    (0.999, 3.0902323061678133),
    (0.9995, 3.2905267314919258),
    (0.9999, 3.7190164854557084),
    (0.99999, 4.2648907939238408),
    (0.999999, 4.7534243088170878),
    (0.99999999, 5.612001243305505),
    (0.9999999999, 6.3613408896974219),
    (0.3333333333, -0.43072729938713344),
    (0.6666666667, 0.43072729938713329),
];

#[test]
fn criterion_02_quantile_accuracy() {
    let mut worst = 0.0f64;
    for (q, z) in QUANTILE_REFERENCE {
        worst = worst.max((normal_quantile(q).unwrap() - z).abs());
    }
    let mut worst_sym = 0.0f64;
    for i in 1..1000 {
        let q = i as f64 / 2000.0;
        worst_sym =
            worst_sym.max((normal_quantile(q).unwrap() + normal_quantile(1.0 - q).unwrap()).abs());
    }
    let z975 = normal_quantile(0.975).unwrap();
    let pass = worst <= 1e-6 && worst_sym <= 1e-12 && (z975 - 1.9599640).abs() <= 1e-6;
    report(
        2,
        pass,
        format!("max error {worst:.2e} at 50 points, max asymmetry {worst_sym:.2e}, z(0.975) = {z975:.7}"),
    );
}

#[test]
fn criterion_03_envelope_coverage() {
    let params = EnvelopeParams {
        confidence: 0.99,
        repetitions: Some(2000),
        safety_factor: 1.0,
    };
    let seed = derive_seed(exp().master_seed, streams::ENVELOPE_CHECK);
    let cfg = SampleConfig::new(256, vec![10, 10], seed);
    let uniform = generate(
        &GraphGenSpec::uniform(100_000, 40_000_000),
        derive_seed(exp().master_seed, streams::GRAPH),
    )
    .unwrap();
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, g) in [("power-law", reference_graph()), ("uniform", &uniform)] {
        let r = envelope_check(g, &cfg, &params, 2000, 2000).unwrap();
        pass &= r.coverage >= 0.97 && r.spread_ratio <= 1.5;
        detail.push(format!(
            "{name}: coverage {:.4}, spread {:.4} vs bound {:.4} (ratio {:.2})",
            r.coverage, r.observed_spread, r.range_bound, r.spread_ratio
        ));
    }
    report(3, pass, detail.join("; "));
}

#[test]
fn criterion_04_sampled_size_shape() {
    let e = exp();
    let seed = derive_seed(e.master_seed, streams::SAMPLE_STATS);
    let stats = sample_stats(reference_graph(), &e.sample_config(seed), e.iterations).unwrap();
    let sizes: Vec<usize> = stats
        .metadata
        .iter()
        .map(|m| m.total_unique_vertices)
        .collect();
    let counts: Vec<u64> = histogram(&sizes, 10).iter().map(|b| b.count).collect();
    let unimodal = is_unimodal(&counts);
    let spread = stats.summary.spread_pct;
    report(
        4,
        unimodal && spread < 20.0,
        format!("10-bin counts {counts:?}, spread {spread:.2}%"),
    );
}

#[test]
fn criterion_05_maxsg_blow_up() {
    // Exact cap without the vertex-count clamp.
    let mut exact = true;
    for (b, f) in [
        (1024usize, vec![10usize, 10]),
        (64, vec![10, 10, 10, 10]),
        (7, vec![3, 5, 2]),
    ] {
        let cfg = SampleConfig::new(b, f.clone(), 0);
        let want = b * f.iter().product::<usize>() + b;
        exact &= *maxsg_vertex_caps(&cfg, usize::MAX).last().unwrap() == want;
    }

    let g = reference_graph();
    let e = exp();
    let fd = e.feature_dim;
    let mut satisfied = Vec::new();
    let mut detail = Vec::new();
    for b in [8usize, 64, 256, e.sample.batch_size] {
        let mut ratios = Vec::new();
        for depth in [2usize, 3, 4] {
            let cfg = SampleConfig::new(b, vec![10; depth], 0);
            let env =
                compute_envelope(g, &cfg, e.envelope.confidence, e.repetitions(), 1.0).unwrap();
            let maxsg = maxsg_plan(&cfg, fd, g.num_vertices()).unwrap();
            ratios.push(maxsg.total_bytes as f64 / envelope_plan(&env, fd).total_bytes as f64);
        }
        let increasing = ratios.windows(2).all(|w| w[1] > w[0]);
        if increasing && ratios[1] >= 2.0 {
            satisfied.push(b);
        }
        detail.push(format!(
            "B={b}: {:.2}/{:.2}/{:.2}",
            ratios[0], ratios[1], ratios[2]
        ));
    }
    report(
        5,
        exact && !satisfied.is_empty(),
        format!(
            "unclamped cap exact: {exact}; MaxSG/Envelope bytes at N=2/3/4, F=10: {}",
            detail.join(", ")
        ),
    );
}

#[test]
fn criterion_06_dominance_chain() {
    let g = reference_graph();
    let e = exp();
    let fd = e.feature_dim;
    let configs = [
        (64usize, vec![10usize, 10]),
        (256, vec![10, 10]),
        (1024, vec![10, 10]),
        (256, vec![5, 5, 5]),
        (32, vec![10, 10, 10]),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(e.master_seed, streams::MEMORY_COMPARE));
    let (mut checked, mut violations, mut cap_violations) = (0, 0, 0);
    for (b, f) in configs {
        let cfg = SampleConfig::new(b, f, rng.gen());
        let env = compute_envelope(g, &cfg, e.envelope.confidence, 500, 1.0).unwrap();
        let envp = envelope_plan(&env, fd);
        let maxsg = maxsg_plan(&cfg, fd, g.num_vertices()).unwrap();
        if env.v_max_total > *maxsg_vertex_caps(&cfg, g.num_vertices()).last().unwrap() {
            cap_violations += 1;
        }
        for m in sample_metadata(g, &cfg, 100).unwrap() {
            let exact = exact_plan(&m, &cfg.fanouts, fd).unwrap();
            if !(exact.total_bytes <= envp.total_bytes && envp.total_bytes <= maxsg.total_bytes) {
                violations += 1;
            }
            checked += 1;
        }
    }
    report(
        6,
        checked == 500 && violations == 0 && cap_violations == 0,
        format!(
            "{checked} iterations, {violations} chain violations, {cap_violations} cap violations"
        ),
    );
}

#[test]
fn criterion_07_execution_fraction_anchor() {
    let mut e = exp();
    e.sweep.batch_sizes = vec![128];
    let seed = derive_seed(e.master_seed, streams::EXEC_SIM);
    let rows = exec_sim(
        reference_graph(),
        &e,
        &CostModel::default_calibration(),
        seed,
    )
    .unwrap();
    let fraction = |s: Strategy| {
        rows.iter()
            .find(|r| r.strategy == s)
            .unwrap()
            .metrics
            .reported_fraction()
            .unwrap()
    };
    let hm = fraction(Strategy::HostMediated);
    let rp = fraction(Strategy::Replay);
    report(
        7,
        (hm - 0.45).abs() <= 0.05 && rp >= 0.99,
        format!("B=128 host-mediated {hm:.4}, replay {rp:.4}"),
    );
}

#[test]
fn criterion_08_speedup_trend() {
    let speedups: Vec<(usize, f64)> = exec_rows()
        .iter()
        .filter(|r| r.strategy == Strategy::Replay)
        .map(|r| (r.batch, r.speedup))
        .collect();
    let batches: Vec<usize> = speedups.iter().map(|s| s.0).collect();
    let decreasing = speedups.windows(2).all(|w| w[1].1 < w[0].1);
    let last = speedups.last().unwrap().1;
    report(
        8,
        batches == [64, 256, 1024, 4096] && decreasing && last > 1.0,
        format!(
            "replay speedups {}",
            speedups
                .iter()
                .map(|(b, s)| format!("B={b}: {s:.3}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    );
}

#[test]
fn criterion_09_replay_contract() {
    let g = reference_graph();
    let e = exp();
    let p = e.envelope.confidence;
    let iterations = 2000u64;
    let cost = CostModel::default_calibration();
    let cfg = e.sample_config(derive_seed(e.master_seed, streams::EXEC_SIM));
    let env = compute_envelope(g, &cfg, p, iterations, 1.0).unwrap();
    let pipeline = build_pipeline(&cfg, e.layers, e.feature_dim, &cost).unwrap();
    let metas = sample_metadata(g, &cfg, iterations).unwrap();
    let safe = metas[0].clone();
    let arena = BufferArena::new(
        &envelope_plan(&env, e.feature_dim),
        &metadata_keys(cfg.hops()),
    )
    .unwrap();
    let ids = arena.buffer_ids();
    let graph = capture_replay(&pipeline, &env, &arena, &safe).unwrap();

    let mut moved = arena.clone();
    let cap = moved.handle("features").unwrap().capacity;
    moved.reallocate("features", cap).unwrap();
    let refused = matches!(
        graph.replay(&moved, &env, &safe, &cost),
        Err(Error::ReplayInvalidated(_))
    );

    let mut runner = FallbackRunner::new(arena, env.clone(), e.feature_dim, safe.clone()).unwrap();
    let epoch = replay_epoch(&graph, &mut runner, &metas, &cost).unwrap();
    let stable = runner.arena().buffer_ids() == ids && runner.arena().allocation_epoch() == 0;
    let expected = (1.0 - p) * iterations as f64;
    let over = metas.iter().filter(|m| overflows(m, &env).unwrap()).count() as u64;
    let reference = simulate_epoch(
        &pipeline,
        Strategy::Replay,
        &metas,
        Some(&env),
        Some(&safe),
        &cost,
    )
    .unwrap();
    let accounted = epoch.overflows == over
        && runner.fallbacks() == over
        && (epoch.total.end_to_end - reference.total.end_to_end).abs()
            < 1e-6 * reference.total.end_to_end;
    report(
        9,
        refused && stable && accounted && epoch.overflows as f64 <= 3.0 * expected,
        format!(
            "refused after reallocation: {refused}; ids stable: {stable}; {} overflows over {iterations} \
             iterations (limit {:.1}); fallbacks charged as safe replays: {accounted}",
            epoch.overflows,
            3.0 * expected
        ),
    );
}

#[test]
fn criterion_10_sampler_invariants() {
    let mut runner = TestRunner::new(Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    });
    let cases = std::sync::atomic::AtomicU32::new(0);
    let result = runner.run(&common::sampler_case(), |(g, cfg, it)| {
        cases.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        common::check_sampler(&g, &cfg, it)
    });
    let cases = cases.into_inner();
    let detail = match &result {
        Ok(()) => format!("{cases} cases"),
        Err(e) => format!("{e}"),
    };
    report(10, result.is_ok() && cases >= 1000, detail);
}

#[test]
fn criterion_11_early_exit_near_constant() {
    let g = reference_graph();
    let e = exp();
    let cost = CostModel::default_calibration();
    let t = cost.block_quota;
    let mut worst = 0.0f64;
    for (i, &b) in e.sweep.batch_sizes.iter().enumerate() {
        let cfg = SampleConfig::new(b, e.sample.fanouts.clone(), i as u64);
        let pipeline = build_pipeline(&cfg, e.layers, e.feature_dim, &cost).unwrap();
        for meta in sample_metadata(g, &cfg, 5).unwrap() {
            for k in &pipeline.kernels {
                let actual = grid_size(k.work_items(&meta, t), t).unwrap();
                let over = (actual as f64 * 2.8).ceil() as usize;
                let base = k.device_time(&meta, e.feature_dim, &cost);
                let extra = early_exit_overhead(over, actual, &cost).unwrap();
                worst = worst.max(extra / base);
            }
        }
    }
    report(
        11,
        worst <= 0.02,
        format!(
            "worst per-kernel slowdown at +180% grid {:.3}%",
            100.0 * worst
        ),
    );
}

#[test]
fn criterion_12_data_parallel_trend() {
    let rows = scaling_rows();
    let at = |s: Strategy| -> Vec<(usize, f64)> {
        rows.iter()
            .filter(|r| r.strategy == s && r.workers == 2)
            .map(|r| (r.batch, r.speedup))
            .collect()
    };
    let replay = at(Strategy::Replay);
    let hm = at(Strategy::HostMediated);
    let replay_ok = replay.len() == 4 && replay.iter().all(|&(_, s)| (1.6..=2.0).contains(&s));

    // Host dominates when host-mediated host time is at least twice its GPU time.
    let dominated: Vec<usize> = exec_rows()
        .iter()
        .filter(|r| {
            r.strategy == Strategy::HostMediated && r.metrics.host_time >= 2.0 * r.metrics.gpu_time
        })
        .map(|r| r.batch)
        .collect();
    let hm_ok = !dominated.is_empty()
        && hm
            .iter()
            .filter(|(b, _)| dominated.contains(b))
            .all(|&(_, s)| s <= 1.2);
    let fmt = |v: &[(usize, f64)]| {
        v.iter()
            .map(|(b, s)| format!("B={b}: {s:.3}"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    report(
        12,
        replay_ok && hm_ok,
        format!(
            "g=2 replay {}; host-mediated {}; host-dominated batches {dominated:?}",
            fmt(&replay),
            fmt(&hm)
        ),
    );
}
