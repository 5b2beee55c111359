//! Subgraph buffer provisioning: worst-case, exact and envelope plans, plus a
//! fixed-identity buffer arena with an overflow fallback path.

mod arena;

pub use arena::{
    draws_key, metadata_keys, run_iteration_with_fallback, unique_key, BufferArena, BufferHandle,
    FallbackRunner, IterationOutcome,
};

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::envelope::{maxsg_frontier_caps, maxsg_vertex_caps, EnvelopeSpec};
use crate::sampler::{IterationMetadata, SampleConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanStrategy {
    MaxSg,
    Exact,
    Envelope,
}

impl PlanStrategy {
    pub fn name(self) -> &'static str {
        match self {
            PlanStrategy::MaxSg => "maxsg",
            PlanStrategy::Exact => "exact",
            PlanStrategy::Envelope => "envelope",
        }
    }
}

/// Element widths in bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementBytes {
    pub vertex_id: usize,
    /// One stored edge is a `(src, dst)` pair of ids.
    pub edge: usize,
    pub feature: usize,
    pub label: usize,
}

impl Default for ElementBytes {
    fn default() -> Self {
        Self {
            vertex_id: 4,
            edge: 8,
            feature: 4,
            label: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BufferSpec {
    pub name: String,
    pub elements: usize,
    pub bytes_per_element: usize,
}

impl BufferSpec {
    pub fn bytes(&self) -> u64 {
        self.elements as u64 * self.bytes_per_element as u64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryPlan {
    pub strategy: PlanStrategy,
    pub batch_size: usize,
    pub fanouts: Vec<usize>,
    pub feature_dim: usize,
    /// Cumulative unique vertices (seeds included) per hop.
    pub vertex_caps: Vec<usize>,
    pub edge_caps: Vec<usize>,
    pub buffers: Vec<BufferSpec>,
    pub total_bytes: u64,
}

impl MemoryPlan {
    fn assemble(
        strategy: PlanStrategy,
        batch_size: usize,
        fanouts: &[usize],
        feature_dim: usize,
        vertex_caps: Vec<usize>,
        edge_caps: Vec<usize>,
        widths: ElementBytes,
    ) -> Self {
        let final_cap = vertex_caps.last().copied().unwrap_or(batch_size);
        let mut buffers = Vec::with_capacity(2 * vertex_caps.len() + 3);
        for (h, (&v, &e)) in vertex_caps.iter().zip(&edge_caps).enumerate() {
            buffers.push(BufferSpec {
                name: vertex_buffer(h + 1),
                elements: v,
                bytes_per_element: widths.vertex_id,
            });
            buffers.push(BufferSpec {
                name: edge_buffer(h + 1),
                elements: e,
                bytes_per_element: widths.edge,
            });
        }
        buffers.push(BufferSpec {
            name: MAPPING.into(),
            elements: final_cap,
            bytes_per_element: widths.vertex_id,
        });
        buffers.push(BufferSpec {
            name: FEATURES.into(),
            elements: final_cap.saturating_mul(feature_dim),
            bytes_per_element: widths.feature,
        });
        buffers.push(BufferSpec {
            name: LABELS.into(),
            elements: batch_size,
            bytes_per_element: widths.label,
        });
        let total_bytes = buffers.iter().map(BufferSpec::bytes).sum();
        Self {
            strategy,
            batch_size,
            fanouts: fanouts.to_vec(),
            feature_dim,
            vertex_caps,
            edge_caps,
            buffers,
            total_bytes,
        }
    }

    pub fn hops(&self) -> usize {
        self.vertex_caps.len()
    }

    pub fn buffer(&self, name: &str) -> Option<&BufferSpec> {
        self.buffers.iter().find(|b| b.name == name)
    }
}

pub const MAPPING: &str = "mapping";
pub const FEATURES: &str = "features";
pub const LABELS: &str = "labels";

pub fn vertex_buffer(hop: usize) -> String {
    format!("hop{hop}_vertex_ids")
}

pub fn edge_buffer(hop: usize) -> String {
    format!("hop{hop}_edges")
}

/// Element counts an iteration actually touches, keyed like plan buffers.
pub fn required_elements(metadata: &IterationMetadata, feature_dim: usize) -> Vec<(String, usize)> {
    let mut out = Vec::with_capacity(2 * metadata.hops() + 3);
    for h in 1..=metadata.hops() {
        out.push((vertex_buffer(h), metadata.per_hop_vertex_counts[h - 1]));
        out.push((edge_buffer(h), metadata.per_hop_edge_counts[h - 1]));
    }
    out.push((MAPPING.into(), metadata.total_unique_vertices));
    out.push((
        FEATURES.into(),
        metadata.total_unique_vertices.saturating_mul(feature_dim),
    ));
    out.push((LABELS.into(), metadata.batch_size));
    out
}

/// Worst-case plan: vertex caps `min(B * prod_{i<=h} F_i + B, n)` and edge caps
/// `min(B * prod_{i<h} F_i, n) * F_h`.
pub fn maxsg_plan(
    config: &SampleConfig,
    feature_dim: usize,
    num_vertices: usize,
) -> Result<MemoryPlan> {
    maxsg_plan_with(config, feature_dim, num_vertices, ElementBytes::default())
}

pub fn maxsg_plan_with(
    config: &SampleConfig,
    feature_dim: usize,
    num_vertices: usize,
    widths: ElementBytes,
) -> Result<MemoryPlan> {
    config.validate()?;
    let vertex_caps = maxsg_vertex_caps(config, num_vertices);
    let edge_caps = maxsg_frontier_caps(config, num_vertices)
        .iter()
        .zip(&config.fanouts)
        .map(|(&f, &k)| f.saturating_mul(k))
        .collect();
    Ok(MemoryPlan::assemble(
        PlanStrategy::MaxSg,
        config.batch_size,
        &config.fanouts,
        feature_dim,
        vertex_caps,
        edge_caps,
        widths,
    ))
}

/// Plan sized to one iteration's realized counts.
pub fn exact_plan(
    metadata: &IterationMetadata,
    fanouts: &[usize],
    feature_dim: usize,
) -> Result<MemoryPlan> {
    exact_plan_with(metadata, fanouts, feature_dim, ElementBytes::default())
}

pub fn exact_plan_with(
    metadata: &IterationMetadata,
    fanouts: &[usize],
    feature_dim: usize,
    widths: ElementBytes,
) -> Result<MemoryPlan> {
    if fanouts.len() != metadata.hops() {
        return Err(Error::Config(format!(
            "metadata has {} hops but {} fanouts were given",
            metadata.hops(),
            fanouts.len()
        )));
    }
    Ok(MemoryPlan::assemble(
        PlanStrategy::Exact,
        metadata.batch_size,
        fanouts,
        feature_dim,
        metadata.per_hop_vertex_counts.clone(),
        metadata.per_hop_edge_counts.clone(),
        widths,
    ))
}

/// Plan sized from the envelope alone.
pub fn envelope_plan(envelope: &EnvelopeSpec, feature_dim: usize) -> MemoryPlan {
    envelope_plan_with(envelope, feature_dim, ElementBytes::default())
}

pub fn envelope_plan_with(
    envelope: &EnvelopeSpec,
    feature_dim: usize,
    widths: ElementBytes,
) -> MemoryPlan {
    MemoryPlan::assemble(
        PlanStrategy::Envelope,
        envelope.batch_size,
        &envelope.fanouts,
        feature_dim,
        envelope.v_max_per_hop.clone(),
        envelope.e_max_per_hop.clone(),
        widths,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanComparison {
    pub strategy: PlanStrategy,
    pub hops: usize,
    pub fanouts: Vec<usize>,
    pub vertex_caps: Vec<usize>,
    pub edge_caps: Vec<usize>,
    pub total_bytes: u64,
    /// `maxsg_bytes / total_bytes`.
    pub ratio_vs_maxsg: f64,
    pub log2_vs_maxsg: f64,
}

/// `numerator / denominator` for every ordered pair of plans.
pub fn pairwise_ratios(plans: &[MemoryPlan]) -> Vec<Vec<f64>> {
    plans
        .iter()
        .map(|a| {
            plans
                .iter()
                .map(|b| byte_ratio(a.total_bytes, b.total_bytes))
                .collect()
        })
        .collect()
}

fn byte_ratio(num: u64, den: u64) -> f64 {
    match (num, den) {
        (0, 0) => 1.0,
        (_, 0) => f64::INFINITY,
        _ => num as f64 / den as f64,
    }
}

/// Rows normalized to the MaxSG plan among `plans`, which must share a depth.
pub fn compare_plans(plans: &[MemoryPlan]) -> Result<Vec<PlanComparison>> {
    if plans.len() < 2 {
        return Err(Error::Config("comparison needs at least two plans".into()));
    }
    let baseline = plans
        .iter()
        .find(|p| p.strategy == PlanStrategy::MaxSg)
        .ok_or_else(|| Error::Config("comparison needs a maxsg plan".into()))?;
    if let Some(p) = plans.iter().find(|p| p.hops() != baseline.hops()) {
        return Err(Error::Config(format!(
            "plans have {} and {} hops",
            baseline.hops(),
            p.hops()
        )));
    }
    Ok(plans
        .iter()
        .map(|p| {
            let ratio = byte_ratio(baseline.total_bytes, p.total_bytes);
            PlanComparison {
                strategy: p.strategy,
                hops: p.hops(),
                fanouts: p.fanouts.clone(),
                vertex_caps: p.vertex_caps.clone(),
                edge_caps: p.edge_caps.clone(),
                total_bytes: p.total_bytes,
                ratio_vs_maxsg: ratio,
                log2_vs_maxsg: ratio.log2(),
            }
        })
        .collect())
}

pub const COMPARISON_HEADER: &str =
    "strategy,hops,fanouts,vertex_caps,edge_caps,total_bytes,log2_vs_maxsg";

fn join(values: &[usize]) -> String {
    let mut s = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(';');
        }
        let _ = write!(s, "{v}");
    }
    s
}

pub fn write_comparison_csv<W: Write>(rows: &[PlanComparison], mut out: W) -> Result<()> {
    writeln!(out, "{COMPARISON_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{:.6}",
            r.strategy.name(),
            r.hops,
            join(&r.fanouts),
            join(&r.vertex_caps),
            join(&r.edge_caps),
            r.total_bytes,
            r.log2_vs_maxsg
        )?;
    }
    Ok(())
}
