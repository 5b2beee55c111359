use std::collections::BTreeMap;

use serde::Serialize;

use super::{grid_size, simulate_iteration, CostModel, ExecMetrics, PipelineGraph, Strategy};
use crate::envelope::{overflows, EnvelopeSpec};
use crate::provision::{required_elements, BufferArena, FallbackRunner, IterationOutcome};
use crate::sampler::IterationMetadata;
use crate::{Error, Result};

/// A captured launch skeleton: every kernel at its envelope grid, bound to the
/// arena's buffer ids.
#[derive(Debug, Clone, Serialize)]
pub struct ReplayGraph {
    pub launches: Vec<(String, usize)>,
    pub buffer_ids: BTreeMap<String, u32>,
    pub envelope: EnvelopeSpec,
    #[serde(skip)]
    pipeline: PipelineGraph,
}

fn envelope_sizes(env: &EnvelopeSpec) -> IterationMetadata {
    IterationMetadata {
        batch_size: env.batch_size,
        per_hop_vertex_counts: env.v_max_per_hop.clone(),
        per_hop_edge_counts: env.e_max_per_hop.clone(),
        total_unique_vertices: env.v_max_total,
        total_edges: env.e_max_total(),
    }
}

/// Records the skeleton after a warm-up iteration. The arena must hold the
/// envelope's sizes and the warm-up must fit the envelope.
pub fn capture_replay(
    pipeline: &PipelineGraph,
    envelope: &EnvelopeSpec,
    arena: &BufferArena,
    warmup: &IterationMetadata,
) -> Result<ReplayGraph> {
    if overflows(warmup, envelope)? {
        return Err(Error::Config(
            "warm-up iteration exceeds the envelope; raise the safety factor".into(),
        ));
    }
    for (name, elements) in required_elements(&envelope_sizes(envelope), pipeline.feature_dim) {
        arena.request(&name, elements)?;
    }
    let t = pipeline.block_quota;
    let mut launches = Vec::with_capacity(pipeline.kernel_count());
    for k in &pipeline.kernels {
        launches.push((k.id.clone(), grid_size(k.work_items(envelope, t), t)?));
    }
    Ok(ReplayGraph {
        launches,
        buffer_ids: arena.buffer_ids(),
        envelope: envelope.clone(),
        pipeline: pipeline.clone(),
    })
}

impl ReplayGraph {
    pub fn validate(&self, arena: &BufferArena, envelope: &EnvelopeSpec) -> Result<()> {
        let ids = arena.buffer_ids();
        if ids != self.buffer_ids {
            let changed = self
                .buffer_ids
                .iter()
                .find(|(k, v)| ids.get(*k) != Some(v))
                .map(|(k, _)| k.as_str())
                .unwrap_or("<set>");
            return Err(Error::ReplayInvalidated(format!(
                "buffer `{changed}` changed identity"
            )));
        }
        if envelope != &self.envelope {
            return Err(Error::ReplayInvalidated(
                "envelope changed since capture".into(),
            ));
        }
        Ok(())
    }

    /// Replays the skeleton for one iteration's metadata.
    pub fn replay(
        &self,
        arena: &BufferArena,
        envelope: &EnvelopeSpec,
        metadata: &IterationMetadata,
        cost: &CostModel,
    ) -> Result<ExecMetrics> {
        self.validate(arena, envelope)?;
        simulate_iteration(
            &self.pipeline,
            Strategy::Replay,
            metadata,
            Some(&self.envelope),
            cost,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct EpochMetrics {
    pub total: ExecMetrics,
    pub iterations: u64,
    pub overflows: u64,
}

impl EpochMetrics {
    pub fn mean(&self) -> ExecMetrics {
        let n = self.iterations.max(1) as f64;
        let t = &self.total;
        let mut m = ExecMetrics::new(
            t.gpu_time / n,
            t.host_time / n,
            t.launches / self.iterations.max(1),
            t.syncs / self.iterations.max(1),
            t.profile_opaque,
        );
        m.gpu_execution_fraction = t.gpu_execution_fraction;
        m
    }
}

/// Simulates every iteration. Under `Replay`, iterations outside the
/// envelope run the cached safe iteration instead and are counted as
/// overflows; other strategies ignore the envelope.
pub fn simulate_epoch(
    pipeline: &PipelineGraph,
    strategy: Strategy,
    iterations: &[IterationMetadata],
    envelope: Option<&EnvelopeSpec>,
    safe: Option<&IterationMetadata>,
    cost: &CostModel,
) -> Result<EpochMetrics> {
    let mut out = EpochMetrics::default();
    if strategy != Strategy::Replay {
        for meta in iterations {
            out.total
                .accumulate(&simulate_iteration(pipeline, strategy, meta, None, cost)?);
            out.iterations += 1;
        }
        return Ok(out);
    }
    let env = envelope.ok_or_else(|| Error::Config("replay needs an execution envelope".into()))?;
    let safe = safe.ok_or_else(|| Error::Config("replay needs a cached safe iteration".into()))?;
    if overflows(safe, env)? {
        return Err(Error::Config(
            "warm-up iteration exceeds the envelope; raise the safety factor".into(),
        ));
    }
    let safe_metrics = simulate_iteration(pipeline, strategy, safe, Some(env), cost)?;
    for meta in iterations {
        if overflows(meta, env)? {
            out.overflows += 1;
            out.total.accumulate(&safe_metrics);
        } else {
            out.total.accumulate(&simulate_iteration(
                pipeline,
                strategy,
                meta,
                Some(env),
                cost,
            )?);
        }
        out.iterations += 1;
    }
    Ok(out)
}

/// Replay epoch through a captured skeleton and a fallback runner; the arena
/// is checked against the capture on every iteration.
pub fn replay_epoch(
    graph: &ReplayGraph,
    runner: &mut FallbackRunner,
    iterations: &[IterationMetadata],
    cost: &CostModel,
) -> Result<EpochMetrics> {
    let mut out = EpochMetrics::default();
    for meta in iterations {
        let executed = match runner.run(meta)? {
            IterationOutcome::Normal => meta,
            IterationOutcome::Fallback => {
                out.overflows += 1;
                runner.safe()
            }
        };
        let m = graph.replay(runner.arena(), &graph.envelope, executed, cost)?;
        out.total.accumulate(&m);
        out.iterations += 1;
    }
    Ok(out)
}
