//! Experiment harness: seeding, Monte-Carlo runs, sweeps and report rows.
//!
//! Seeds: every command draws from `derive_seed(master_seed, stream)` with a
//! fixed stream number per command (see [`streams`]); sweep point `i` of a
//! command uses `derive_seed(command_seed, i)`, and worker `w` of a
//! data-parallel point uses `derive_seed(point_seed, w)`. Within a sampler
//! seed, iteration `i` and hop `h` use their own RNG stream.

mod config;
mod output;

pub use config::{
    reference_graph_spec, EnvelopeParams, ExperimentConfig, GraphFormat, GraphSource, SampleParams,
    SweepAxes,
};
pub use output::{run_command, Command, ManifestEntry, OutputFile};

use rayon::prelude::*;
use serde::Serialize;

use crate::envelope::{check_overflow, compute_envelope, EnvelopeSpec};
use crate::exec::{
    build_pipeline, calibrate_device_scale, simulate_data_parallel, simulate_epoch, CostModel,
    ExecMetrics, Strategy,
};
use crate::graph::CsrGraph;
use crate::provision::{compare_plans, envelope_plan, exact_plan, maxsg_plan, PlanComparison};
use crate::sampler::{iteration_metadata, IterationMetadata, SampleConfig};
use crate::{Error, Result};

pub mod streams {
    pub const GRAPH: u64 = 0;
    pub const SAMPLE_STATS: u64 = 1;
    pub const ENVELOPE_CHECK: u64 = 2;
    pub const EXEC_SIM: u64 = 3;
    pub const MEMORY_COMPARE: u64 = 4;
    pub const SCALING: u64 = 5;
    pub const CALIBRATE: u64 = 6;
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `splitmix64(parent ^ splitmix64(stream))`.
pub fn derive_seed(parent: u64, stream: u64) -> u64 {
    splitmix64(parent ^ splitmix64(stream))
}

/// Metadata of iterations `0..iterations`, computed in parallel, in order.
pub fn sample_metadata(
    graph: &CsrGraph,
    config: &SampleConfig,
    iterations: u64,
) -> Result<Vec<IterationMetadata>> {
    (0..iterations)
        .into_par_iter()
        .map(|i| iteration_metadata(graph, config, i))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SizeSummary {
    pub iterations: usize,
    pub mean: f64,
    pub std: f64,
    pub min: usize,
    pub max: usize,
    /// `100 * (max - min) / mean`.
    pub spread_pct: f64,
}

pub fn summarize(values: &[usize]) -> Result<SizeSummary> {
    if values.is_empty() {
        return Err(Error::Config("no values to summarize".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = values
        .iter()
        .map(|&v| (v as f64 - mean).powi(2))
        .sum::<f64>()
        / n;
    let min = *values.iter().min().unwrap();
    let max = *values.iter().max().unwrap();
    let spread_pct = if mean > 0.0 {
        100.0 * (max - min) as f64 / mean
    } else {
        0.0
    };
    Ok(SizeSummary {
        iterations: values.len(),
        mean,
        std: var.sqrt(),
        min,
        max,
        spread_pct,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
}

/// Equal-width bins over `[min, max]`; the last bin is closed.
pub fn histogram(values: &[usize], bins: usize) -> Vec<HistogramBin> {
    let (Some(&min), Some(&max)) = (values.iter().min(), values.iter().max()) else {
        return Vec::new();
    };
    if min == max || bins <= 1 {
        return vec![HistogramBin {
            lo: min as f64,
            hi: max as f64,
            count: values.len() as u64,
        }];
    }
    let width = (max - min) as f64 / bins as f64;
    let mut counts = vec![0u64; bins];
    for &v in values {
        let b = (((v - min) as f64 / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            lo: min as f64 + i as f64 * width,
            hi: min as f64 + (i + 1) as f64 * width,
            count,
        })
        .collect()
}

/// Counts rise (weakly) to one peak and then fall (weakly).
pub fn is_unimodal(counts: &[u64]) -> bool {
    let mut i = 1;
    while i < counts.len() && counts[i] >= counts[i - 1] {
        i += 1;
    }
    while i < counts.len() && counts[i] <= counts[i - 1] {
        i += 1;
    }
    i >= counts.len()
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleStats {
    pub metadata: Vec<IterationMetadata>,
    pub summary: SizeSummary,
    pub histogram: Vec<HistogramBin>,
}

pub const HISTOGRAM_BINS: usize = 20;

pub fn sample_stats(
    graph: &CsrGraph,
    config: &SampleConfig,
    iterations: u64,
) -> Result<SampleStats> {
    let metadata = sample_metadata(graph, config, iterations)?;
    let sizes: Vec<usize> = metadata.iter().map(|m| m.total_unique_vertices).collect();
    Ok(SampleStats {
        summary: summarize(&sizes)?,
        histogram: histogram(&sizes, HISTOGRAM_BINS),
        metadata,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeReport {
    pub envelope: EnvelopeSpec,
    pub iterations: u64,
    /// Share of iterations with `|V_d| <= v_max_total`.
    pub coverage: f64,
    /// `p - 3 sqrt(p (1 - p) / iterations)`.
    pub coverage_target: f64,
    pub coverage_pass: bool,
    pub sizes: SizeSummary,
    pub observed_spread: f64,
    pub range_bound: f64,
    /// `observed_spread / range_bound`; infinite when the bound is zero and
    /// the sizes vary.
    pub spread_ratio: f64,
    /// Iterations exceeding any per-hop vertex or edge bound.
    pub overflow_count: u64,
}

pub fn envelope_check(
    graph: &CsrGraph,
    config: &SampleConfig,
    params: &EnvelopeParams,
    repetitions: u64,
    iterations: u64,
) -> Result<EnvelopeReport> {
    let envelope = compute_envelope(
        graph,
        config,
        params.confidence,
        repetitions,
        params.safety_factor,
    )?;
    let metadata = sample_metadata(graph, config, iterations)?;
    envelope_report(envelope, &metadata)
}

pub fn envelope_report(
    envelope: EnvelopeSpec,
    metadata: &[IterationMetadata],
) -> Result<EnvelopeReport> {
    let sizes: Vec<usize> = metadata.iter().map(|m| m.total_unique_vertices).collect();
    let summary = summarize(&sizes)?;
    let covered = sizes.iter().filter(|&&v| v <= envelope.v_max_total).count();
    let mut overflow_count = 0;
    for m in metadata {
        if check_overflow(m, &envelope)?.into_iter().any(|f| f) {
            overflow_count += 1;
        }
    }
    let n = metadata.len() as f64;
    let p = envelope.confidence;
    let coverage = covered as f64 / n;
    let coverage_target = p - 3.0 * (p * (1.0 - p) / n).sqrt();
    let observed_spread = summary.spread_pct / 100.0;
    let spread_ratio = if envelope.range_bound > 0.0 {
        observed_spread / envelope.range_bound
    } else if observed_spread == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(EnvelopeReport {
        range_bound: envelope.range_bound,
        envelope,
        iterations: metadata.len() as u64,
        coverage,
        coverage_target,
        coverage_pass: coverage >= coverage_target,
        sizes: summary,
        observed_spread,
        spread_ratio,
        overflow_count,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ExecRow {
    pub strategy: Strategy,
    pub batch: usize,
    pub hops: usize,
    /// Per-iteration means.
    pub metrics: ExecMetrics,
    pub overflows: u64,
    /// HostMediated end-to-end over this row's end-to-end.
    pub speedup: f64,
}

/// Everything needed to simulate one batch size.
struct BatchPoint {
    pipeline: crate::exec::PipelineGraph,
    envelope: EnvelopeSpec,
    metadata: Vec<IterationMetadata>,
}

fn batch_point(
    graph: &CsrGraph,
    exp: &ExperimentConfig,
    cost: &CostModel,
    batch: usize,
    seed: u64,
) -> Result<BatchPoint> {
    let config = SampleConfig::new(batch, exp.sample.fanouts.clone(), seed);
    let pipeline = build_pipeline(&config, exp.layers, exp.feature_dim, cost)?;
    let envelope = compute_envelope(
        graph,
        &config,
        exp.envelope.confidence,
        exp.repetitions(),
        exp.envelope.safety_factor,
    )?;
    let metadata = sample_metadata(graph, &config, exp.iterations)?;
    Ok(BatchPoint {
        pipeline,
        envelope,
        metadata,
    })
}

/// Strategy by batch grid over `exp.sweep`. The warm-up (first) iteration is
/// the cached safe iteration for replay.
pub fn exec_sim(
    graph: &CsrGraph,
    exp: &ExperimentConfig,
    cost: &CostModel,
    seed: u64,
) -> Result<Vec<ExecRow>> {
    let mut rows = Vec::new();
    for (i, &batch) in exp.sweep.batch_sizes.iter().enumerate() {
        let point = batch_point(graph, exp, cost, batch, derive_seed(seed, i as u64))?;
        let run = |s: Strategy| {
            simulate_epoch(
                &point.pipeline,
                s,
                &point.metadata,
                Some(&point.envelope),
                point.metadata.first(),
                cost,
            )
        };
        let base = run(Strategy::HostMediated)?.mean().end_to_end;
        for &s in &exp.sweep.strategies {
            let epoch = run(s)?;
            let metrics = epoch.mean();
            rows.push(ExecRow {
                strategy: s,
                batch,
                hops: point.pipeline.hops(),
                metrics,
                overflows: epoch.overflows,
                speedup: base / metrics.end_to_end,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingRow {
    pub strategy: Strategy,
    pub batch: usize,
    pub workers: usize,
    /// Mean step time.
    pub end_to_end: f64,
    pub single_end_to_end: f64,
    pub speedup: f64,
}

/// Strong scaling: the global batch `B` is split over `g` workers that each
/// sample their own `B / g` seeds.
pub fn scaling(
    graph: &CsrGraph,
    exp: &ExperimentConfig,
    cost: &CostModel,
    seed: u64,
) -> Result<Vec<ScalingRow>> {
    let mut rows = Vec::new();
    for (i, &batch) in exp.sweep.batch_sizes.iter().enumerate() {
        let point_seed = derive_seed(seed, i as u64);
        let mut workers: Vec<usize> = exp.sweep.workers.clone();
        if !workers.contains(&1) {
            workers.insert(0, 1);
        }
        let mut step_times: Vec<(usize, Vec<(Strategy, f64)>)> = Vec::new();
        for &g in &workers {
            if batch % g != 0 {
                return Err(Error::Config(format!(
                    "batch {batch} is not divisible by {g} workers"
                )));
            }
            let config = SampleConfig::new(batch / g, exp.sample.fanouts.clone(), 0);
            let pipeline = build_pipeline(&config, exp.layers, exp.feature_dim, cost)?;
            let envelope = compute_envelope(
                graph,
                &config,
                exp.envelope.confidence,
                exp.repetitions(),
                exp.envelope.safety_factor,
            )?;
            let per_worker: Vec<Vec<IterationMetadata>> = (0..g)
                .map(|w| {
                    let mut c = config.clone();
                    c.seed = derive_seed(point_seed, w as u64);
                    sample_metadata(graph, &c, exp.iterations)
                })
                .collect::<Result<_>>()?;
            let allreduce = if g > 1 { exp.allreduce_cost } else { 0.0 };
            let mut times = Vec::new();
            for &s in &exp.sweep.strategies {
                let mut total = 0.0;
                for step in 0..exp.iterations as usize {
                    let metas: Vec<IterationMetadata> = per_worker
                        .iter()
                        .map(|w| {
                            let m = &w[step];
                            let over = s == Strategy::Replay
                                && check_overflow(m, &envelope)?.into_iter().any(|f| f);
                            Ok(if over { w[0].clone() } else { m.clone() })
                        })
                        .collect::<Result<_>>()?;
                    let env = (s == Strategy::Replay).then_some(&envelope);
                    total += simulate_data_parallel(&pipeline, s, &metas, env, allreduce, cost)?
                        .end_to_end;
                }
                times.push((s, total / exp.iterations as f64));
            }
            step_times.push((g, times));
        }
        let single = step_times[0].1.clone();
        for (g, times) in &step_times {
            if !exp.sweep.workers.contains(g) {
                continue;
            }
            for (j, &(s, t)) in times.iter().enumerate() {
                rows.push(ScalingRow {
                    strategy: s,
                    batch,
                    workers: *g,
                    end_to_end: t,
                    single_end_to_end: single[j].1,
                    speedup: single[j].1 / t,
                });
            }
        }
    }
    Ok(rows)
}

/// MaxSG, exact and envelope plans per depth. The exact plan is the largest
/// over the sampled iterations.
pub fn memory_compare(
    graph: &CsrGraph,
    exp: &ExperimentConfig,
    seed: u64,
) -> Result<Vec<PlanComparison>> {
    let mut rows = Vec::new();
    for (i, &depth) in exp.sweep.depths.iter().enumerate() {
        let fanouts = vec![exp.sweep.depth_fanout; depth];
        let config = SampleConfig::new(
            exp.sample.batch_size,
            fanouts.clone(),
            derive_seed(seed, i as u64),
        );
        let n = graph.num_vertices();
        let maxsg = maxsg_plan(&config, exp.feature_dim, n)?;
        let envelope = compute_envelope(
            graph,
            &config,
            exp.envelope.confidence,
            exp.repetitions(),
            exp.envelope.safety_factor,
        )?;
        let env_plan = envelope_plan(&envelope, exp.feature_dim);
        let metadata = sample_metadata(graph, &config, exp.iterations)?;
        let mut peak = None;
        for m in &metadata {
            let plan = exact_plan(m, &fanouts, exp.feature_dim)?;
            if peak
                .as_ref()
                .is_none_or(|p: &crate::provision::MemoryPlan| plan.total_bytes > p.total_bytes)
            {
                peak = Some(plan);
            }
        }
        rows.extend(compare_plans(&[maxsg, peak.unwrap(), env_plan])?);
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct Calibration {
    pub cost_model: CostModel,
    pub scale: f64,
    pub batch: usize,
    pub target_fraction: f64,
    pub achieved_fraction: f64,
}

/// Fits the device scale so `HostMediated` at `batch` reaches `target`.
pub fn calibrate(
    graph: &CsrGraph,
    exp: &ExperimentConfig,
    base: &CostModel,
    batch: usize,
    target: f64,
    seed: u64,
) -> Result<Calibration> {
    let config = SampleConfig::new(batch, exp.sample.fanouts.clone(), seed);
    let pipeline = build_pipeline(&config, exp.layers, exp.feature_dim, base)?;
    let metadata = sample_metadata(graph, &config, exp.iterations)?;
    let (mut cost_model, scale) = calibrate_device_scale(&pipeline, &metadata, base, target)?;
    let epoch = simulate_epoch(
        &pipeline,
        Strategy::HostMediated,
        &metadata,
        None,
        None,
        &cost_model,
    )?;
    cost_model.provenance = Some(format!(
        "device coefficients scaled by {scale:.6} so that host-mediated execution at batch {batch}, \
         fanouts {:?}, {} layers, feature_dim {} on the reference power-law graph spends a fraction \
         {target} of end-to-end time on the GPU ({} iterations); host latencies are hand-set ratios",
        exp.sample.fanouts, exp.layers, exp.feature_dim, exp.iterations
    ));
    Ok(Calibration {
        cost_model,
        scale,
        batch,
        target_fraction: target,
        achieved_fraction: epoch.total.gpu_execution_fraction,
    })
}
