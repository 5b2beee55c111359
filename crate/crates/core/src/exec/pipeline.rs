use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::cost::{CostModel, KernelKind};
use crate::envelope::EnvelopeSpec;
use crate::provision::{draws_key, unique_key};
use crate::sampler::{scan_levels, IterationMetadata, SampleConfig};
use crate::{Error, Result};

/// A kernel dimension resolved from iteration metadata or envelope bounds.
/// Hops are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeRef {
    Zero,
    Batch,
    /// Vertices entering hop `h`.
    Frontier(usize),
    /// Draws (edges) of hop `h`.
    Draws(usize),
    /// Cumulative unique vertices after hop `h`.
    Cumulative(usize),
    /// Level `l` of the scan over hop `h`'s frontier: `ceil(frontier / T^l)`.
    ScanLevel(usize, usize),
    TotalVertices,
    TotalEdges,
}

/// Anything that can answer size queries.
pub trait Sizes {
    fn batch(&self) -> usize;
    fn frontier(&self, h: usize) -> usize;
    fn draws(&self, h: usize) -> usize;
    fn cumulative(&self, h: usize) -> usize;
    fn total_vertices(&self) -> usize;
    fn total_edges(&self) -> usize;
}

impl Sizes for IterationMetadata {
    fn batch(&self) -> usize {
        self.batch_size
    }
    fn frontier(&self, h: usize) -> usize {
        IterationMetadata::frontier(self, h)
    }
    fn draws(&self, h: usize) -> usize {
        self.per_hop_edge_counts[h - 1]
    }
    fn cumulative(&self, h: usize) -> usize {
        self.per_hop_vertex_counts[h - 1]
    }
    fn total_vertices(&self) -> usize {
        self.total_unique_vertices
    }
    fn total_edges(&self) -> usize {
        self.total_edges
    }
}

impl Sizes for EnvelopeSpec {
    fn batch(&self) -> usize {
        self.batch_size
    }
    fn frontier(&self, h: usize) -> usize {
        self.frontier_max_per_hop[h - 1]
    }
    fn draws(&self, h: usize) -> usize {
        self.e_max_per_hop[h - 1]
    }
    fn cumulative(&self, h: usize) -> usize {
        self.v_max_per_hop[h - 1]
    }
    fn total_vertices(&self) -> usize {
        self.v_max_total
    }
    fn total_edges(&self) -> usize {
        self.e_max_total()
    }
}

impl SizeRef {
    pub fn resolve(&self, sizes: &impl Sizes, block_quota: usize) -> usize {
        match *self {
            SizeRef::Zero => 0,
            SizeRef::Batch => sizes.batch(),
            SizeRef::Frontier(h) => sizes.frontier(h),
            SizeRef::Draws(h) => sizes.draws(h),
            SizeRef::Cumulative(h) => sizes.cumulative(h),
            SizeRef::ScanLevel(h, l) => {
                let mut n = sizes.frontier(h);
                for _ in 0..l {
                    n = n.div_ceil(block_quota);
                }
                n
            }
            SizeRef::TotalVertices => sizes.total_vertices(),
            SizeRef::TotalEdges => sizes.total_edges(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelSpec {
    pub id: String,
    pub kind: KernelKind,
    /// 0 for kernels after sampling.
    pub hop: usize,
    pub vertices: SizeRef,
    pub edges: SizeRef,
    /// Whether the feature term applies.
    pub uses_features: bool,
    /// Work items that set the grid.
    pub grid: SizeRef,
    pub consumes_metadata: Vec<String>,
    pub produces_metadata: Vec<String>,
}

impl KernelSpec {
    pub fn device_time(&self, sizes: &impl Sizes, feature_dim: usize, cost: &CostModel) -> f64 {
        let t = cost.block_quota;
        let v = self.vertices.resolve(sizes, t);
        let e = self.edges.resolve(sizes, t);
        let f = if self.uses_features { feature_dim } else { 0 };
        cost.kernels.get(self.kind).time(v, e, f)
    }

    pub fn work_items(&self, sizes: &impl Sizes, block_quota: usize) -> usize {
        self.grid.resolve(sizes, block_quota)
    }
}

/// Kernel sequence of one training iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineGraph {
    pub batch_size: usize,
    pub fanouts: Vec<usize>,
    pub layers: usize,
    pub feature_dim: usize,
    pub block_quota: usize,
    pub kernels: Vec<KernelSpec>,
    /// Kernel indices per hop (1-based key).
    pub hop_structure: BTreeMap<usize, Vec<usize>>,
}

impl PipelineGraph {
    pub fn hops(&self) -> usize {
        self.fanouts.len()
    }

    pub fn kernel_count(&self) -> usize {
        self.kernels.len()
    }

    /// Metadata edges `(producer index, consumer index, key)`.
    pub fn metadata_edges(&self) -> Vec<(usize, usize, String)> {
        let mut producer = BTreeMap::new();
        let mut edges = Vec::new();
        for (i, k) in self.kernels.iter().enumerate() {
            for key in &k.consumes_metadata {
                if let Some(&p) = producer.get(key) {
                    edges.push((p, i, key.clone()));
                }
            }
            for key in &k.produces_metadata {
                producer.insert(key.clone(), i);
            }
        }
        edges
    }

    /// Keys produced at one hop and consumed by the next stage.
    pub fn hop_boundaries(&self) -> Vec<String> {
        self.metadata_edges()
            .into_iter()
            .filter(|&(p, c, _)| {
                let ph = self.kernels[p].hop;
                let ch = self.kernels[c].hop;
                ph > 0 && (ch == 0 || ch > ph)
            })
            .map(|(_, _, k)| k)
            .collect()
    }

    /// Every consumed key has an earlier producer.
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for k in &self.kernels {
            for key in &k.consumes_metadata {
                if !seen.contains(key) {
                    return Err(Error::Logic(format!(
                        "kernel `{}` consumes `{key}` before it is produced",
                        k.id
                    )));
                }
            }
            seen.extend(k.produces_metadata.iter().cloned());
        }
        Ok(())
    }

    pub fn device_time(&self, sizes: &impl Sizes, cost: &CostModel) -> f64 {
        self.kernels
            .iter()
            .map(|k| k.device_time(sizes, self.feature_dim, cost))
            .sum()
    }
}

/// Builds the iteration pipeline. Per hop: pre-sampling, the scan and
/// add-offset passes over the worst-case frontier `B * prod_{i<h} F_i`,
/// sampling, relabeling and block construction. Then one gather and a forward
/// and backward kernel per layer.
///
/// Two metadata values cross the host boundary per hop: the draw total feeds
/// the sampling allocation, and the count of new vertices sizes the next hop
/// (or the gather after the last hop).
pub fn build_pipeline(
    config: &SampleConfig,
    layers: usize,
    feature_dim: usize,
    cost: &CostModel,
) -> Result<PipelineGraph> {
    config.validate()?;
    let t = cost.block_quota;
    let mut kernels = Vec::new();
    let mut hop_structure = BTreeMap::new();
    let mut worst_frontier = config.batch_size;
    let hops = config.hops();

    let kernel = |id: String, kind, hop, vertices, edges, grid| KernelSpec {
        id,
        kind,
        hop,
        vertices,
        edges,
        uses_features: false,
        grid,
        consumes_metadata: Vec::new(),
        produces_metadata: Vec::new(),
    };

    for h in 1..=hops {
        let start = kernels.len();
        let mut pre = kernel(
            format!("hop{h}_presample"),
            KernelKind::Presample,
            h,
            SizeRef::Frontier(h),
            SizeRef::Zero,
            SizeRef::Frontier(h),
        );
        if h > 1 {
            pre.consumes_metadata.push(unique_key(h - 1));
        }
        kernels.push(pre);

        let levels = scan_levels(worst_frontier, t)?.len();
        for l in 0..levels {
            kernels.push(kernel(
                format!("hop{h}_scan_l{l}"),
                KernelKind::Scan,
                h,
                SizeRef::ScanLevel(h, l),
                SizeRef::Zero,
                SizeRef::ScanLevel(h, l),
            ));
        }
        for l in (0..levels - 1).rev() {
            kernels.push(kernel(
                format!("hop{h}_add_offset_l{l}"),
                KernelKind::Scan,
                h,
                SizeRef::ScanLevel(h, l),
                SizeRef::Zero,
                SizeRef::ScanLevel(h, l),
            ));
        }
        kernels
            .last_mut()
            .unwrap()
            .produces_metadata
            .push(draws_key(h));

        let mut sample = kernel(
            format!("hop{h}_sample"),
            KernelKind::Sample,
            h,
            SizeRef::Frontier(h),
            SizeRef::Draws(h),
            SizeRef::Draws(h),
        );
        sample.consumes_metadata.push(draws_key(h));
        kernels.push(sample);

        let mut relabel = kernel(
            format!("hop{h}_relabel"),
            KernelKind::Relabel,
            h,
            SizeRef::Cumulative(h),
            SizeRef::Draws(h),
            SizeRef::Draws(h),
        );
        relabel.produces_metadata.push(unique_key(h));
        kernels.push(relabel);

        kernels.push(kernel(
            format!("hop{h}_build"),
            KernelKind::Build,
            h,
            SizeRef::Cumulative(h),
            SizeRef::Draws(h),
            SizeRef::Draws(h),
        ));

        hop_structure.insert(h, (start..kernels.len()).collect());
        worst_frontier = worst_frontier.saturating_mul(config.fanouts[h - 1]);
    }

    let mut gather = kernel(
        "gather".into(),
        KernelKind::Gather,
        0,
        SizeRef::TotalVertices,
        SizeRef::Zero,
        SizeRef::TotalVertices,
    );
    gather.uses_features = true;
    gather.consumes_metadata.push(unique_key(hops));
    kernels.push(gather);

    for pass in ["forward", "backward"] {
        let order: Vec<usize> = if pass == "forward" {
            (1..=layers).collect()
        } else {
            (1..=layers).rev().collect()
        };
        for l in order {
            let mut k = kernel(
                format!("layer{l}_{pass}"),
                KernelKind::Train,
                0,
                SizeRef::TotalVertices,
                SizeRef::TotalEdges,
                SizeRef::TotalEdges,
            );
            k.uses_features = true;
            kernels.push(k);
        }
    }

    let pipeline = PipelineGraph {
        batch_size: config.batch_size,
        fanouts: config.fanouts.clone(),
        layers,
        feature_dim,
        block_quota: t,
        kernels,
        hop_structure,
    };
    pipeline.validate()?;
    Ok(pipeline)
}
