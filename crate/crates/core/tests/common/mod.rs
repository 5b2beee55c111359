use std::collections::BTreeSet;

use hopbound::graph::{CsrGraph, VertexId};
use hopbound::sampler::{
    gather_indices, sample_minibatch, sample_minibatch_logged, select_seeds, SampleConfig,
};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub fn graph_strategy() -> impl Strategy<Value = CsrGraph> {
    (1usize..50).prop_flat_map(|n| {
        prop::collection::vec((0..n as VertexId, 0..n as VertexId), 0..200)
            .prop_map(move |edges| CsrGraph::from_edges(n, &edges).unwrap())
    })
}

pub fn sampler_case() -> impl Strategy<Value = (CsrGraph, SampleConfig, u64)> {
    graph_strategy().prop_flat_map(|g| {
        let n = g.num_vertices();
        (
            Just(g),
            1..=n,
            prop::collection::vec(0usize..5, 1..4),
            any::<u64>(),
            0u64..1000,
        )
            .prop_map(|(g, b, f, seed, it)| (g, SampleConfig::new(b, f, seed), it))
    })
}

/// Dedup oracle, edge accounting, local-id density, per-hop CSR prefix sums
/// and determinism for one sampled iteration.
pub fn check_sampler(g: &CsrGraph, cfg: &SampleConfig, it: u64) -> Result<(), TestCaseError> {
    let seeds = select_seeds(g, cfg, it).unwrap();
    let (sub, meta, log) = sample_minibatch_logged(g, cfg, &seeds, it).unwrap();

    // Dedup oracle: brute-force set union over the raw draw log.
    let mut union: BTreeSet<VertexId> = seeds.iter().copied().collect();
    for hop in &log {
        union.extend(hop.iter().map(|&(_, d)| d));
    }
    prop_assert_eq!(meta.total_unique_vertices, union.len());
    let mapped: BTreeSet<VertexId> = sub.local_to_global.iter().copied().collect();
    prop_assert_eq!(&mapped, &union);

    // Edge accounting against the frontier and base-graph degrees.
    let mut total = 0;
    for (h, block) in sub.hops.iter().enumerate() {
        let expected: usize = block
            .src_local
            .iter()
            .filter(|&&l| g.degree(sub.local_to_global[l as usize]) > 0)
            .count()
            * cfg.fanouts[h];
        prop_assert_eq!(block.raw_draw_count, expected);
        prop_assert_eq!(block.edges.len(), expected);
        prop_assert_eq!(log[h].len(), expected);
        total += expected;
    }
    prop_assert_eq!(meta.total_edges, total);

    // Every local edge maps back to its logged global draw.
    for (h, block) in sub.hops.iter().enumerate() {
        for (&(s, d), &(gs, gd)) in block.edges.iter().zip(&log[h]) {
            prop_assert_eq!(sub.local_to_global[s as usize], gs);
            prop_assert_eq!(sub.local_to_global[d as usize], gd);
            prop_assert!(g.neighbors(gs).contains(&gd));
        }
    }

    // Local-id density.
    let mut ids: BTreeSet<VertexId> = (0..cfg.batch_size as VertexId).collect();
    for block in &sub.hops {
        ids.extend(block.dst_unique_local.iter().copied());
        for &(s, d) in &block.edges {
            ids.insert(s);
            ids.insert(d);
        }
    }
    let dense: BTreeSet<VertexId> = (0..meta.total_unique_vertices as VertexId).collect();
    prop_assert_eq!(ids, dense);

    // Frontier chaining and monotone cumulative counts.
    prop_assert_eq!(
        &sub.hops[0].src_local,
        &(0..cfg.batch_size as VertexId).collect::<Vec<_>>()
    );
    for h in 1..sub.hops.len() {
        prop_assert_eq!(&sub.hops[h].src_local, &sub.hops[h - 1].dst_unique_local);
    }
    prop_assert!(meta.per_hop_vertex_counts.windows(2).all(|w| w[0] <= w[1]));
    prop_assert!(meta.total_unique_vertices <= g.num_vertices());
    prop_assert!(meta.total_unique_vertices <= meta.total_edges + cfg.batch_size);

    // Per-hop CSR: offsets are the prefix sum of per-source counts.
    for h in 0..sub.hops.len() {
        let (offsets, targets) = sub.hop_csr(h).unwrap();
        prop_assert_eq!(offsets.len(), sub.num_local() + 1);
        let mut counts = vec![0usize; sub.num_local()];
        for &(s, _) in &sub.hops[h].edges {
            counts[s as usize] += 1;
        }
        let mut acc = 0;
        for (v, c) in counts.iter().enumerate() {
            prop_assert_eq!(offsets[v], acc);
            let mut want: Vec<_> = sub.hops[h]
                .edges
                .iter()
                .filter(|e| e.0 as usize == v)
                .map(|e| e.1)
                .collect();
            let mut got = targets[acc..acc + c].to_vec();
            want.sort_unstable();
            got.sort_unstable();
            prop_assert_eq!(got, want);
            acc += c;
        }
        prop_assert_eq!(offsets[sub.num_local()], targets.len());
    }

    let gi = gather_indices(&sub);
    prop_assert_eq!(gi.feature_rows.len(), meta.total_unique_vertices);
    prop_assert_eq!(gi.label_rows, seeds.clone());

    // Determinism.
    let (again, meta2) = sample_minibatch(g, cfg, &seeds, it).unwrap();
    prop_assert_eq!(&again, &sub);
    prop_assert_eq!(meta2, meta);
    Ok(())
}
