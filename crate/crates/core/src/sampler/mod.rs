//! Per-iteration sampling pipeline: multi-hop with-replacement neighbor
//! sampling, deduplication into a dense local id space, per-hop CSR
//! construction and gather-index generation.
//!
//! # Random streams
//!
//! Every iteration owns independent ChaCha8 streams derived from the master
//! seed: the generator is seeded with `seed_from_u64(master_seed)` and the
//! stream id is `(iteration << 8) | hop`. Stream `hop = 0` draws the seed
//! batch, streams `1..=N` drive the hops. Iterations are therefore
//! reproducible in isolation and may run in any order or in parallel.
//! Iteration indices must stay below `2^56` and hop counts below 256.

mod scan;

use std::collections::HashMap;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use scan::{build_subgraph_csr, prefix_sum_rounds, scan_levels};

use crate::graph::{CsrGraph, VertexId};
use crate::{Error, Result};

pub const MAX_HOPS: usize = 255;

/// Generator for one `(iteration, hop)` substream.
pub fn stream_rng(master_seed: u64, iteration: u64, hop: usize) -> ChaCha8Rng {
    debug_assert!(iteration < (1 << 56) && hop <= MAX_HOPS);
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream((iteration << 8) | hop as u64);
    rng
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    pub batch_size: usize,
    pub fanouts: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
}

impl SampleConfig {
    pub fn new(batch_size: usize, fanouts: Vec<usize>, seed: u64) -> Self {
        Self {
            batch_size,
            fanouts,
            seed,
        }
    }

    pub fn hops(&self) -> usize {
        self.fanouts.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.fanouts.is_empty() {
            return Err(Error::Config("at least one hop is required".into()));
        }
        if self.fanouts.len() > MAX_HOPS {
            return Err(Error::Config(format!(
                "at most {MAX_HOPS} hops are supported"
            )));
        }
        Ok(())
    }
}

/// One hop of a sampled subgraph, in local ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HopBlock {
    pub hop_index: usize,
    /// Frontier of this hop.
    pub src_local: Vec<VertexId>,
    /// Destinations first seen at this hop, in first-occurrence order.
    pub dst_unique_local: Vec<VertexId>,
    /// One `(src, dst)` pair per draw.
    pub edges: Vec<(VertexId, VertexId)>,
    pub raw_draw_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampledSubgraph {
    pub batch_size: usize,
    pub hops: Vec<HopBlock>,
    pub local_to_global: Vec<VertexId>,
    pub global_to_local: HashMap<VertexId, VertexId>,
}

impl SampledSubgraph {
    /// Starts a subgraph from the seed batch; seeds take local ids `0..B`.
    pub fn from_seeds(seeds: &[VertexId]) -> Result<Self> {
        let mut sub = Self {
            batch_size: seeds.len(),
            hops: Vec::new(),
            local_to_global: Vec::with_capacity(seeds.len()),
            global_to_local: HashMap::with_capacity(seeds.len()),
        };
        for &s in seeds {
            if sub.intern(s).1 {
                continue;
            }
            return Err(Error::Config(format!("seed vertex {s} listed twice")));
        }
        Ok(sub)
    }

    pub fn num_local(&self) -> usize {
        self.local_to_global.len()
    }

    /// Returns the local id of `global` and whether it was newly assigned.
    fn intern(&mut self, global: VertexId) -> (VertexId, bool) {
        let next = self.local_to_global.len() as VertexId;
        match self.global_to_local.entry(global) {
            std::collections::hash_map::Entry::Occupied(e) => (*e.get(), false),
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(next);
                self.local_to_global.push(global);
                (next, true)
            }
        }
    }

    pub fn local_of(&self, global: VertexId) -> Option<VertexId> {
        self.global_to_local.get(&global).copied()
    }

    /// Relabels one hop's global draws and appends the resulting block.
    ///
    /// Destinations seen before (seeds or earlier hops) reuse their local id;
    /// first-seen destinations get fresh ids in first-occurrence order.
    pub fn dedup_relabel(
        &mut self,
        frontier: &[VertexId],
        pairs: &[(VertexId, VertexId)],
    ) -> Result<&HopBlock> {
        let src_local = frontier
            .iter()
            .map(|&g| {
                self.local_of(g)
                    .ok_or_else(|| Error::Logic(format!("frontier vertex {g} was never sampled")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut edges = Vec::with_capacity(pairs.len());
        let mut fresh = Vec::new();
        for &(s, d) in pairs {
            let sl = self
                .local_of(s)
                .ok_or_else(|| Error::Logic(format!("draw source {s} was never sampled")))?;
            let (dl, is_new) = self.intern(d);
            if is_new {
                fresh.push(dl);
            }
            edges.push((sl, dl));
        }
        self.hops.push(HopBlock {
            hop_index: self.hops.len() + 1,
            src_local,
            dst_unique_local: fresh,
            raw_draw_count: edges.len(),
            edges,
        });
        Ok(self.hops.last().unwrap())
    }

    /// CSR of one hop's edges over the whole local id space.
    pub fn hop_csr(&self, hop: usize) -> Result<(Vec<usize>, Vec<VertexId>)> {
        let block = self.hops.get(hop).ok_or(Error::Index {
            index: hop,
            limit: self.hops.len(),
        })?;
        build_subgraph_csr(&block.edges, self.num_local())
    }

    pub fn seeds(&self) -> &[VertexId] {
        &self.local_to_global[..self.batch_size]
    }

    pub fn metadata(&self) -> IterationMetadata {
        let mut per_hop_vertex_counts = Vec::with_capacity(self.hops.len());
        let mut per_hop_edge_counts = Vec::with_capacity(self.hops.len());
        let mut cumulative = self.batch_size;
        for h in &self.hops {
            cumulative += h.dst_unique_local.len();
            per_hop_vertex_counts.push(cumulative);
            per_hop_edge_counts.push(h.raw_draw_count);
        }
        IterationMetadata {
            batch_size: self.batch_size,
            total_unique_vertices: self.num_local(),
            total_edges: per_hop_edge_counts.iter().sum(),
            per_hop_vertex_counts,
            per_hop_edge_counts,
        }
    }

    pub fn dump(&self) -> SubgraphDump {
        let meta = self.metadata();
        SubgraphDump {
            batch_size: self.batch_size,
            hops: self
                .hops
                .iter()
                .enumerate()
                .map(|(i, h)| HopDump {
                    hop: h.hop_index,
                    frontier: h.src_local.len(),
                    new_vertices: h.dst_unique_local.len(),
                    cumulative_vertices: meta.per_hop_vertex_counts[i],
                    edge_count: h.raw_draw_count,
                    edges: h.edges.clone(),
                })
                .collect(),
            local_to_global: self.local_to_global.clone(),
        }
    }
}

/// Runtime counts of one sampled iteration.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IterationMetadata {
    pub batch_size: usize,
    /// Cumulative unique vertices (seeds included) after each hop.
    pub per_hop_vertex_counts: Vec<usize>,
    /// Draws, hence edges, at each hop.
    pub per_hop_edge_counts: Vec<usize>,
    pub total_unique_vertices: usize,
    pub total_edges: usize,
}

impl IterationMetadata {
    pub fn hops(&self) -> usize {
        self.per_hop_vertex_counts.len()
    }

    /// Cumulative unique count before hop `h` (1-based); `B` before hop 1.
    pub fn vertices_before(&self, h: usize) -> usize {
        if h <= 1 {
            self.batch_size
        } else {
            self.per_hop_vertex_counts[h - 2]
        }
    }

    /// Frontier size of hop `h` (1-based): the seeds for hop 1, otherwise the
    /// vertices first seen at hop `h - 1`.
    pub fn frontier(&self, h: usize) -> usize {
        if h <= 1 {
            self.batch_size
        } else {
            self.per_hop_vertex_counts[h - 2] - self.vertices_before(h - 1)
        }
    }

    /// Vertices first seen at hop `h` (1-based).
    pub fn new_vertices(&self, h: usize) -> usize {
        self.per_hop_vertex_counts[h - 1] - self.vertices_before(h)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HopDump {
    pub hop: usize,
    pub frontier: usize,
    pub new_vertices: usize,
    pub cumulative_vertices: usize,
    pub edge_count: usize,
    pub edges: Vec<(VertexId, VertexId)>,
}

/// Debug dump of a sampled subgraph.
#[derive(Debug, Clone, Serialize)]
pub struct SubgraphDump {
    pub batch_size: usize,
    pub hops: Vec<HopDump>,
    pub local_to_global: Vec<VertexId>,
}

/// Draws `fanout` neighbors uniformly with replacement for every frontier
/// vertex. Degree-0 vertices contribute nothing.
pub fn sample_hop<R: Rng>(
    graph: &CsrGraph,
    frontier: &[VertexId],
    fanout: usize,
    rng: &mut R,
) -> Vec<(VertexId, VertexId)> {
    let mut pairs = Vec::with_capacity(frontier.len() * fanout);
    if fanout == 0 {
        return pairs;
    }
    for &u in frontier {
        let nbrs = graph.neighbors(u);
        if nbrs.is_empty() {
            continue;
        }
        for _ in 0..fanout {
            pairs.push((u, nbrs[rng.gen_range(0..nbrs.len())]));
        }
    }
    pairs
}

/// Uniform seed batch without replacement, drawn from stream `hop = 0`.
pub fn select_seeds(
    graph: &CsrGraph,
    config: &SampleConfig,
    iteration: u64,
) -> Result<Vec<VertexId>> {
    let n = graph.num_vertices();
    if config.batch_size > n {
        return Err(Error::Config(format!(
            "batch size {} exceeds {} vertices",
            config.batch_size, n
        )));
    }
    let mut rng = stream_rng(config.seed, iteration, 0);
    Ok(index::sample(&mut rng, n, config.batch_size)
        .into_iter()
        .map(|v| v as VertexId)
        .collect())
}

/// Raw global draws of every hop, the independent record the dedup oracle
/// checks against.
pub type DrawLog = Vec<Vec<(VertexId, VertexId)>>;

/// Runs all hops from an explicit seed batch.
pub fn sample_minibatch(
    graph: &CsrGraph,
    config: &SampleConfig,
    seeds: &[VertexId],
    iteration: u64,
) -> Result<(SampledSubgraph, IterationMetadata)> {
    sample_minibatch_inner(graph, config, seeds, iteration, None)
}

/// Like [`sample_minibatch`], also returning the raw draw log.
pub fn sample_minibatch_logged(
    graph: &CsrGraph,
    config: &SampleConfig,
    seeds: &[VertexId],
    iteration: u64,
) -> Result<(SampledSubgraph, IterationMetadata, DrawLog)> {
    let mut log = Vec::with_capacity(config.hops());
    let (sub, meta) = sample_minibatch_inner(graph, config, seeds, iteration, Some(&mut log))?;
    Ok((sub, meta, log))
}

fn sample_minibatch_inner(
    graph: &CsrGraph,
    config: &SampleConfig,
    seeds: &[VertexId],
    iteration: u64,
    mut log: Option<&mut DrawLog>,
) -> Result<(SampledSubgraph, IterationMetadata)> {
    config.validate()?;
    if seeds.len() != config.batch_size {
        return Err(Error::Config(format!(
            "{} seeds supplied for batch size {}",
            seeds.len(),
            config.batch_size
        )));
    }
    for &s in seeds {
        graph.check_vertex(s)?;
    }
    let mut sub = SampledSubgraph::from_seeds(seeds)?;
    let mut frontier: Vec<VertexId> = seeds.to_vec();
    for (h, &fanout) in config.fanouts.iter().enumerate() {
        let mut rng = stream_rng(config.seed, iteration, h + 1);
        let pairs = sample_hop(graph, &frontier, fanout, &mut rng);
        sub.dedup_relabel(&frontier, &pairs)?;
        let block = sub.hops.last().unwrap();
        let next: Vec<VertexId> = block
            .dst_unique_local
            .iter()
            .map(|&l| sub.local_to_global[l as usize])
            .collect();
        if let Some(log) = log.as_deref_mut() {
            log.push(pairs);
        }
        frontier = next;
    }
    let meta = sub.metadata();
    Ok((sub, meta))
}

/// Seeds and samples iteration `iteration` of a training run.
pub fn sample_iteration(
    graph: &CsrGraph,
    config: &SampleConfig,
    iteration: u64,
) -> Result<(SampledSubgraph, IterationMetadata)> {
    let seeds = select_seeds(graph, config, iteration)?;
    sample_minibatch(graph, config, &seeds, iteration)
}

/// Metadata only; the Monte-Carlo loops need nothing else.
pub fn iteration_metadata(
    graph: &CsrGraph,
    config: &SampleConfig,
    iteration: u64,
) -> Result<IterationMetadata> {
    sample_iteration(graph, config, iteration).map(|(_, m)| m)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GatherIndices {
    /// Global ids of every unique sampled vertex, in local-id order.
    pub feature_rows: Vec<VertexId>,
    /// Global ids of the seed batch.
    pub label_rows: Vec<VertexId>,
}

pub fn gather_indices(sub: &SampledSubgraph) -> GatherIndices {
    GatherIndices {
        feature_rows: sub.local_to_global.clone(),
        label_rows: sub.seeds().to_vec(),
    }
}
