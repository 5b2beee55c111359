//! Cost-model simulation of one iteration's kernel pipeline under three
//! orchestration strategies.
//!
//! Host and device work are fully serialized: `end_to_end = gpu + host`.

mod cost;
mod pipeline;
mod replay;

pub use cost::{CostModel, KernelCoefficients, KernelCosts, KernelKind, DEFAULT_CALIBRATION};
pub use pipeline::{build_pipeline, KernelSpec, PipelineGraph, SizeRef, Sizes};
pub use replay::{capture_replay, replay_epoch, simulate_epoch, EpochMetrics, ReplayGraph};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::envelope::{overflows, EnvelopeSpec};
use crate::sampler::IterationMetadata;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Every size-dependent step round-trips through the host.
    HostMediated,
    /// One host launch of a pilot kernel that launches workers on the device.
    DevicePilot,
    /// A captured fixed skeleton sized by the envelope, replayed once per
    /// iteration.
    Replay,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [
        Strategy::HostMediated,
        Strategy::DevicePilot,
        Strategy::Replay,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::HostMediated => "host-mediated",
            Strategy::DevicePilot => "device-pilot",
            Strategy::Replay => "replay",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown strategy `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ExecMetrics {
    pub end_to_end: f64,
    pub gpu_time: f64,
    pub host_time: f64,
    pub launches: u64,
    pub syncs: u64,
    pub gpu_execution_fraction: f64,
    pub hdoo: f64,
    /// Device-side launches hide GPU time from profilers; the fraction is
    /// not reported for such runs.
    pub profile_opaque: bool,
}

impl ExecMetrics {
    pub fn new(
        gpu_time: f64,
        host_time: f64,
        launches: u64,
        syncs: u64,
        profile_opaque: bool,
    ) -> Self {
        let end_to_end = gpu_time + host_time;
        Self {
            end_to_end,
            gpu_time,
            host_time,
            launches,
            syncs,
            gpu_execution_fraction: fraction(gpu_time, end_to_end),
            hdoo: host_time,
            profile_opaque,
        }
    }

    /// Sums `other` into `self`.
    pub fn accumulate(&mut self, other: &ExecMetrics) {
        *self = ExecMetrics::new(
            self.gpu_time + other.gpu_time,
            self.host_time + other.host_time,
            self.launches + other.launches,
            self.syncs + other.syncs,
            self.profile_opaque || other.profile_opaque,
        );
    }

    /// Fraction as published: `None` for profile-opaque runs.
    pub fn reported_fraction(&self) -> Option<f64> {
        (!self.profile_opaque).then_some(self.gpu_execution_fraction)
    }
}

fn fraction(gpu: f64, total: f64) -> f64 {
    if total > 0.0 {
        gpu / total
    } else {
        0.0
    }
}

/// `ceil(n / T)`, at least one block.
pub fn grid_size(n: usize, block_quota: usize) -> Result<usize> {
    if block_quota == 0 {
        return Err(Error::Config("block quota must be positive".into()));
    }
    Ok(n.div_ceil(block_quota).max(1))
}

/// Cost of the surplus blocks of an over-provisioned launch.
pub fn early_exit_overhead(grid_max: usize, grid_actual: usize, cost: &CostModel) -> Result<f64> {
    if grid_max < grid_actual {
        return Err(Error::Logic(format!(
            "launch of {grid_max} blocks cannot cover {grid_actual}"
        )));
    }
    Ok((grid_max - grid_actual) as f64 * cost.early_exit_block_cost)
}

/// Simulates one iteration. `Replay` requires an envelope that covers the
/// metadata.
pub fn simulate_iteration(
    pipeline: &PipelineGraph,
    strategy: Strategy,
    metadata: &IterationMetadata,
    envelope: Option<&EnvelopeSpec>,
    cost: &CostModel,
) -> Result<ExecMetrics> {
    if metadata.hops() != pipeline.hops() || metadata.batch_size != pipeline.batch_size {
        return Err(Error::Config(format!(
            "metadata shape ({} hops, batch {}) does not match the pipeline ({} hops, batch {})",
            metadata.hops(),
            metadata.batch_size,
            pipeline.hops(),
            pipeline.batch_size
        )));
    }
    let k = pipeline.kernel_count() as u64;
    let device = pipeline.device_time(metadata, cost);
    Ok(match strategy {
        Strategy::HostMediated => {
            let syncs = pipeline.metadata_edges().len() as u64;
            let host = k as f64 * (cost.host_launch_latency + cost.host_logic_latency)
                + syncs as f64 * cost.sync_export_latency;
            ExecMetrics::new(device, host, k, syncs, false)
        }
        Strategy::DevicePilot => {
            let host = cost.host_launch_latency
                + cost.host_logic_latency
                + k as f64 * cost.pilot_child_launch_latency;
            ExecMetrics::new(device, host, 1, 0, true)
        }
        Strategy::Replay => {
            let env = envelope
                .ok_or_else(|| Error::Config("replay needs an execution envelope".into()))?;
            if env.batch_size != pipeline.batch_size || env.fanouts != pipeline.fanouts {
                return Err(Error::Config("envelope does not match the pipeline".into()));
            }
            if overflows(metadata, env)? {
                return Err(Error::Logic(
                    "iteration exceeds the captured envelope; it must take the fallback path"
                        .into(),
                ));
            }
            let t = cost.block_quota;
            let mut surplus = 0.0;
            for kernel in &pipeline.kernels {
                let max = grid_size(kernel.work_items(env, t), t)?;
                let actual = grid_size(kernel.work_items(metadata, t), t)?;
                surplus += early_exit_overhead(max, actual, cost)?;
            }
            let host = cost.graph_replay_latency + cost.host_logic_latency;
            ExecMetrics::new(device + surplus, host, 1, 0, false)
        }
    })
}

/// One data-parallel step: each worker runs `pipeline` (already sized for
/// its share of the batch) on its own metadata, then all wait for the
/// slowest and an all-reduce, which is charged to GPU time.
pub fn simulate_data_parallel(
    pipeline: &PipelineGraph,
    strategy: Strategy,
    worker_metadata: &[IterationMetadata],
    envelope: Option<&EnvelopeSpec>,
    allreduce_cost: f64,
    cost: &CostModel,
) -> Result<ExecMetrics> {
    if worker_metadata.is_empty() {
        return Err(Error::Config("at least one worker is required".into()));
    }
    let mut slowest: Option<ExecMetrics> = None;
    for meta in worker_metadata {
        let m = simulate_iteration(pipeline, strategy, meta, envelope, cost)?;
        if slowest.is_none_or(|s| m.end_to_end > s.end_to_end) {
            slowest = Some(m);
        }
    }
    let s = slowest.unwrap();
    Ok(ExecMetrics::new(
        s.gpu_time + allreduce_cost,
        s.host_time,
        s.launches,
        s.syncs,
        s.profile_opaque,
    ))
}

/// Scales every device coefficient so that `HostMediated` over `metadata`
/// reaches GPU execution fraction `target`. The fraction is linear-fractional
/// in the scale, so the fit is closed form.
pub fn calibrate_device_scale(
    pipeline: &PipelineGraph,
    metadata: &[IterationMetadata],
    cost: &CostModel,
    target: f64,
) -> Result<(CostModel, f64)> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Config(format!(
            "target fraction {target} outside (0, 1)"
        )));
    }
    let mut total = ExecMetrics::default();
    for meta in metadata {
        total.accumulate(&simulate_iteration(
            pipeline,
            Strategy::HostMediated,
            meta,
            None,
            cost,
        )?);
    }
    if total.gpu_time <= 0.0 {
        return Err(Error::Model("device time is zero; nothing to scale".into()));
    }
    let k = target * total.host_time / ((1.0 - target) * total.gpu_time);
    Ok((cost.scale_device(k), k))
}
