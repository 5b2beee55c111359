use std::sync::OnceLock;

use hopbound::envelope::{
    check_overflow, compute_envelope, maxsg_vertex_caps, normal_quantile, overflows,
    pb_exact_distribution, pb_moments, pmf_quantile, EnvelopeSpec,
};
use hopbound::exec::{
    build_pipeline, simulate_epoch, simulate_iteration, CostModel, Strategy as Orchestration,
};
use hopbound::graph::{
    generate, load_edge_list, read_binary, write_binary, write_edge_list, CsrGraph,
    EdgeListOptions, GraphGenSpec, VertexId,
};
use hopbound::provision::{
    envelope_plan, exact_plan, maxsg_plan, metadata_keys, BufferArena, FallbackRunner,
    IterationOutcome,
};
use hopbound::sampler::{iteration_metadata, IterationMetadata, SampleConfig};
use proptest::prelude::*;

fn base_graph() -> &'static CsrGraph {
    static G: OnceLock<CsrGraph> = OnceLock::new();
    G.get_or_init(|| generate(&GraphGenSpec::power_law(4000, 120_000, 2.1), 17).unwrap())
}

fn small_graph() -> impl Strategy<Value = CsrGraph> {
    (1usize..40).prop_flat_map(|n| {
        prop::collection::vec((0..n as VertexId, 0..n as VertexId), 0..150)
            .prop_map(move |e| CsrGraph::from_edges(n, &e).unwrap())
    })
}

fn sample_case() -> impl Strategy<Value = SampleConfig> {
    (
        1usize..64,
        prop::collection::vec(1usize..8, 1..4),
        any::<u64>(),
    )
        .prop_map(|(b, f, s)| SampleConfig::new(b, f, s))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn binary_and_edge_list_round_trip(g in small_graph()) {
        let mut buf = Vec::new();
        write_binary(&g, &mut buf).unwrap();
        let back = read_binary(buf.as_slice()).unwrap();
        prop_assert_eq!(back.offsets(), g.offsets());
        prop_assert_eq!(back.targets(), g.targets());

        let mut text = Vec::new();
        write_edge_list(&g, &mut text).unwrap();
        let opts = EdgeListOptions { num_vertices: Some(g.num_vertices()), ..Default::default() };
        let back = load_edge_list(text.as_slice(), &opts).unwrap();
        prop_assert_eq!(back.num_vertices(), g.num_vertices());
        for v in 0..g.num_vertices() as VertexId {
            let mut a = back.neighbors(v).to_vec();
            let mut b = g.neighbors(v).to_vec();
            a.sort_unstable();
            b.sort_unstable();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn offsets_are_degree_prefix_sums(g in small_graph()) {
        let mut acc = 0;
        for v in 0..g.num_vertices() {
            prop_assert_eq!(g.offsets()[v], acc);
            acc += g.degree(v as VertexId);
        }
        prop_assert_eq!(g.offsets()[g.num_vertices()], acc);
        prop_assert_eq!(acc, g.num_edges());
    }

    #[test]
    fn generate_is_pure(n in 2usize..300, m in 1u64..3000, seed in any::<u64>(), pl in any::<bool>()) {
        let m = 2 * (m % (n * n / 2) as u64).max(1);
        let spec = if pl { GraphGenSpec::power_law(n, m, 2.1) } else { GraphGenSpec::uniform(n, m) };
        let a = generate(&spec, seed).unwrap();
        let b = generate(&spec, seed).unwrap();
        prop_assert_eq!(a.offsets(), b.offsets());
        prop_assert_eq!(a.targets(), b.targets());
        prop_assert_eq!(a.num_edges() as u64, m);
    }

    #[test]
    fn pb_oracle(p in prop::collection::vec(0.0f64..=1.0, 1..=20), q in prop::sample::select(vec![0.9, 0.99])) {
        let pmf = pb_exact_distribution(&p).unwrap();
        let mean: f64 = pmf.iter().enumerate().map(|(k, w)| k as f64 * w).sum();
        let var: f64 = pmf.iter().enumerate().map(|(k, w)| (k as f64 - mean).powi(2) * w).sum();
        let m = pb_moments(&p).unwrap();
        prop_assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!((mean - m.mu).abs() < 1e-9);
        prop_assert!((var - m.sigma2).abs() < 1e-9);
        prop_assert!(m.sigma2 >= 0.0 && m.sigma2 <= m.mu + 1e-12);
        if m.mu >= 5.0 {
            let approx = (m.mu + normal_quantile(q).unwrap() * m.sigma()).round();
            prop_assert!((pmf_quantile(&pmf, q) as f64 - approx).abs() <= 2.0);
        }
    }

    #[test]
    fn quantile_monotone_and_odd(a in 1e-9f64..0.5, b in 1e-9f64..0.5) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        if lo < hi {
            prop_assert!(normal_quantile(lo).unwrap() < normal_quantile(hi).unwrap());
            prop_assert!(normal_quantile(1.0 - hi).unwrap() < normal_quantile(1.0 - lo).unwrap());
        }
        prop_assert!((normal_quantile(a).unwrap() + normal_quantile(1.0 - a).unwrap()).abs() < 1e-9);
        prop_assert!(normal_quantile(a).unwrap() < normal_quantile(0.5).unwrap() + 1e-15);
    }

    #[test]
    fn envelope_monotone_and_dominated(cfg in sample_case(), p in 0.5f64..0.999, m in 1u64..5000, s in 1.0f64..2.0, bump in 0usize..3) {
        let g = base_graph();
        let env = |c: &SampleConfig, p, m, s| compute_envelope(g, c, p, m, s).unwrap();
        let base = env(&cfg, p, m, s);
        prop_assert!(env(&cfg, p + (0.9999 - p) / 2.0, m, s).v_max_total >= base.v_max_total);
        prop_assert!(env(&cfg, p, m * 2, s).v_max_total >= base.v_max_total);
        prop_assert!(env(&cfg, p, m, s + 0.5).v_max_total >= base.v_max_total);
        let mut wider = cfg.clone();
        let h = bump % cfg.hops();
        wider.fanouts[h] += 1 + bump;
        prop_assert!(env(&wider, p, m, s).v_max_total >= base.v_max_total);

        let caps = maxsg_vertex_caps(&cfg, g.num_vertices());
        prop_assert!(base.v_max_total <= *caps.last().unwrap());
        let unclamped: usize = cfg.batch_size * cfg.fanouts.iter().product::<usize>() + cfg.batch_size;
        prop_assert!(base.v_max_total <= unclamped);
        prop_assert!(base.v_max_total <= g.num_vertices());
        prop_assert!(base.v_max_per_hop.windows(2).all(|w| w[0] <= w[1]));
        for h in 0..cfg.hops() {
            prop_assert_eq!(base.e_max_per_hop[h], base.frontier_max_per_hop[h] * cfg.fanouts[h]);
        }
        prop_assert!((base.range_bound - 2.0 * base.z * base.cv.unwrap_or(0.0)).abs() < 1e-9);
    }

    #[test]
    fn plan_dominance_chain(cfg in sample_case(), it in 0u64..10_000, fd in 0usize..256) {
        let g = base_graph();
        let env = compute_envelope(g, &cfg, 0.999, 1000, 1.0).unwrap();
        let meta = iteration_metadata(g, &cfg, it).unwrap();
        let maxsg = maxsg_plan(&cfg, fd, g.num_vertices()).unwrap();
        let envp = envelope_plan(&env, fd);
        prop_assert!(envp.total_bytes <= maxsg.total_bytes);
        if !overflows(&meta, &env).unwrap() {
            let exact = exact_plan(&meta, &cfg.fanouts, fd).unwrap();
            prop_assert!(exact.total_bytes <= envp.total_bytes);
        }
    }

    #[test]
    fn strategy_dominance(
        cfg in sample_case(),
        it in 0u64..1000,
        launch in 0.0f64..20.0,
        logic in 0.0f64..5.0,
        sync in 0.0f64..200.0,
        child_frac in 0.0f64..=1.0,
        replay_frac in 0.0f64..=1.0,
        layers in 1usize..4,
        fd in 0usize..256,
    ) {
        let g = base_graph();
        let env = compute_envelope(g, &cfg, 0.999, 1000, 1.0).unwrap();
        let meta = iteration_metadata(g, &cfg, it).unwrap();
        prop_assume!(!overflows(&meta, &env).unwrap());
        let mut cost = CostModel::default_calibration();
        cost.host_launch_latency = launch;
        cost.host_logic_latency = logic;
        cost.sync_export_latency = sync;
        cost.pilot_child_launch_latency = child_frac * (launch + logic);
        let pipeline = build_pipeline(&cfg, layers, fd, &cost).unwrap();
        // Replay's own fixed cost must stay below one host launch plus the
        // pilot's child launches for the chain to hold.
        let k = pipeline.kernel_count() as f64;
        let ee_budget: f64 = pipeline
            .kernels
            .iter()
            .map(|kernel| {
                let t = cost.block_quota;
                let max = hopbound::exec::grid_size(kernel.work_items(&env, t), t).unwrap();
                (max as f64) * cost.early_exit_block_cost
            })
            .sum();
        cost.graph_replay_latency = replay_frac * (launch + k * cost.pilot_child_launch_latency);
        prop_assume!(ee_budget <= launch + k * cost.pilot_child_launch_latency - cost.graph_replay_latency);

        let hm = simulate_iteration(&pipeline, Orchestration::HostMediated, &meta, None, &cost).unwrap();
        let dp = simulate_iteration(&pipeline, Orchestration::DevicePilot, &meta, None, &cost).unwrap();
        let rp = simulate_iteration(&pipeline, Orchestration::Replay, &meta, Some(&env), &cost).unwrap();
        prop_assert!(rp.end_to_end <= dp.end_to_end + 1e-9);
        prop_assert!(dp.end_to_end <= hm.end_to_end + 1e-9);
        for m in [&hm, &dp, &rp] {
            prop_assert!((m.end_to_end - m.gpu_time - m.host_time).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(&m.gpu_execution_fraction));
            prop_assert_eq!(m.hdoo, m.host_time);
        }
    }

    #[test]
    fn replay_fraction_closed_form(cfg in sample_case(), it in 0u64..1000, fd in 0usize..256) {
        let g = base_graph();
        let env = compute_envelope(g, &cfg, 0.999, 1000, 1.0).unwrap();
        let meta = iteration_metadata(g, &cfg, it).unwrap();
        prop_assume!(!overflows(&meta, &env).unwrap());
        let mut cost = CostModel::default_calibration();
        cost.early_exit_block_cost = 0.0;
        let pipeline = build_pipeline(&cfg, 2, fd, &cost).unwrap();
        let m = simulate_iteration(&pipeline, Orchestration::Replay, &meta, Some(&env), &cost).unwrap();
        let want = m.gpu_time / (m.gpu_time + cost.graph_replay_latency + cost.host_logic_latency);
        prop_assert!((m.gpu_execution_fraction - want).abs() < 1e-12);
    }

    #[test]
    fn hdoo_constant_across_iterations(cfg in sample_case(), a in 0u64..1000, b in 0u64..1000) {
        let g = base_graph();
        let cost = CostModel::default_calibration();
        let pipeline = build_pipeline(&cfg, 2, 64, &cost).unwrap();
        let ma = iteration_metadata(g, &cfg, a).unwrap();
        let mb = iteration_metadata(g, &cfg, b).unwrap();
        let x = simulate_iteration(&pipeline, Orchestration::HostMediated, &ma, None, &cost).unwrap();
        let y = simulate_iteration(&pipeline, Orchestration::HostMediated, &mb, None, &cost).unwrap();
        prop_assert_eq!(x.host_time, y.host_time);
        prop_assert_eq!(x, simulate_iteration(&pipeline, Orchestration::HostMediated, &ma, None, &cost).unwrap());
    }

    #[test]
    fn arena_identity_is_stable(cfg in sample_case(), start in 0u64..1000, grow in prop::collection::vec(0usize..3, 1..40)) {
        let g = base_graph();
        let env = compute_envelope(g, &cfg, 0.99, 100, 1.0).unwrap();
        let safe = iteration_metadata(g, &cfg, start).unwrap();
        prop_assume!(!overflows(&safe, &env).unwrap());
        let arena = BufferArena::new(&envelope_plan(&env, 16), &metadata_keys(cfg.hops())).unwrap();
        let ids = arena.buffer_ids();
        let mut runner = FallbackRunner::new(arena, env.clone(), 16, safe).unwrap();
        for (i, &g_) in grow.iter().enumerate() {
            let mut meta = iteration_metadata(g, &cfg, start + 1 + i as u64).unwrap();
            // Push some iterations past the envelope.
            if g_ == 2 {
                meta.per_hop_edge_counts[0] = env.e_max_per_hop[0] + 1;
            }
            let over = check_overflow(&meta, &env).unwrap().into_iter().any(|f| f);
            let outcome = runner.run(&meta).unwrap();
            prop_assert_eq!(outcome == IterationOutcome::Fallback, over);
            prop_assert_eq!(runner.arena().buffer_ids(), ids.clone());
            prop_assert_eq!(runner.arena().allocation_epoch(), 0);
        }
    }
}

#[test]
fn replay_epoch_counts_overflows_as_safe_replays() {
    let g = base_graph();
    let cfg = SampleConfig::new(16, vec![4, 4], 3);
    let env = compute_envelope(g, &cfg, 0.9, 10, 1.0).unwrap();
    let cost = CostModel::default_calibration();
    let pipeline = build_pipeline(&cfg, 2, 32, &cost).unwrap();
    let metas: Vec<IterationMetadata> = (0..300)
        .map(|i| iteration_metadata(g, &cfg, i).unwrap())
        .collect();
    let safe = metas
        .iter()
        .find(|m| !overflows(m, &env).unwrap())
        .unwrap()
        .clone();
    let epoch = simulate_epoch(
        &pipeline,
        Orchestration::Replay,
        &metas,
        Some(&env),
        Some(&safe),
        &cost,
    )
    .unwrap();
    let over = metas.iter().filter(|m| overflows(m, &env).unwrap()).count() as u64;
    assert_eq!(epoch.overflows, over);
    let safe_cost =
        simulate_iteration(&pipeline, Orchestration::Replay, &safe, Some(&env), &cost).unwrap();
    let fit_cost: f64 = metas
        .iter()
        .filter(|m| !overflows(m, &env).unwrap())
        .map(|m| {
            simulate_iteration(&pipeline, Orchestration::Replay, m, Some(&env), &cost)
                .unwrap()
                .end_to_end
        })
        .sum();
    assert!((epoch.total.end_to_end - fit_cost - over as f64 * safe_cost.end_to_end).abs() < 1e-6);
}

#[test]
fn envelope_json_round_trips() {
    let env = compute_envelope(
        base_graph(),
        &SampleConfig::new(8, vec![3, 3], 0),
        0.99,
        50,
        1.2,
    )
    .unwrap();
    let back: EnvelopeSpec = serde_json::from_str(&env.to_json().unwrap()).unwrap();
    assert_eq!(back, env);
}
