//! Statistical execution envelope.
//!
//! Every draw is modeled as hitting vertex `v` with the degree-proportional
//! probability `pi_v = deg(v) / sum(deg)`. After `S` draws the vertex is
//! present with probability `p_v = 1 - (1 - pi_v)^S`, so the deduplicated
//! sampled size is Poisson-binomial with mean `sum p_v` and variance
//! `sum p_v (1 - p_v)`. The envelope sizes every hop at `mu + z * sigma`
//! (plus the seed batch) with `z = Phi^-1(p^(1/m))`, which holds for all of
//! `m` iterations with confidence `p` under the normal approximation.
//!
//! Draw counts use the worst-case frontier expansion so the envelope is a
//! function of the configuration and the graph only.

mod pb;
mod quantile;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use pb::{
    pb_exact_distribution, pb_moments, pmf_quantile, vertex_hit_prob, PbMoments, PB_EXACT_MAX_LEN,
};
pub use quantile::{normal_cdf, normal_quantile, normal_quantile_upper, repetition_quantile};

use crate::graph::CsrGraph;
use crate::sampler::{IterationMetadata, SampleConfig};
use crate::{Error, Result};
use pb::CompensatedSum;

/// `pi_v = deg(v) / sum(deg)`.
pub fn hitting_probability(graph: &CsrGraph) -> Result<Vec<f64>> {
    let total = graph.total_degree();
    if total == 0 {
        return Err(Error::Model(
            "hit model needs a graph with at least one edge".into(),
        ));
    }
    let total = total as f64;
    Ok(graph.degrees().map(|d| d as f64 / total).collect())
}

/// Worst-case draws per hop: `S_h = min(B * prod_{i<h} F_i, n) * F_h`.
pub fn total_draws(config: &SampleConfig, num_vertices: usize) -> Vec<u64> {
    let n = num_vertices as u64;
    let mut frontier = config.batch_size as u64;
    config
        .fanouts
        .iter()
        .map(|&f| {
            let f = f as u64;
            let s = frontier.min(n).saturating_mul(f);
            frontier = frontier.saturating_mul(f);
            s
        })
        .collect()
}

/// MaxSG cumulative vertex capacity per hop: `min(B * prod_{i<=h} F_i + B, n)`.
pub fn maxsg_vertex_caps(config: &SampleConfig, num_vertices: usize) -> Vec<usize> {
    let b = config.batch_size;
    let mut product = b;
    config
        .fanouts
        .iter()
        .map(|&f| {
            product = product.saturating_mul(f);
            product.saturating_add(b).min(num_vertices)
        })
        .collect()
}

/// MaxSG frontier bound per hop: `min(B * prod_{i<h} F_i, n)`.
pub fn maxsg_frontier_caps(config: &SampleConfig, num_vertices: usize) -> Vec<usize> {
    let mut frontier = config.batch_size;
    config
        .fanouts
        .iter()
        .map(|&f| {
            let cap = frontier.min(num_vertices);
            frontier = frontier.saturating_mul(f);
            cap
        })
        .collect()
}

/// Degree-proportional hit model with worst-case draw counts.
#[derive(Debug, Clone)]
pub struct HitModel {
    pub pi: Vec<f64>,
    pub draws_per_hop: Vec<u64>,
    pub total_draws: u64,
    /// Distinct hit probabilities with multiplicities; vertices of equal
    /// degree share `pi`, which keeps the moment sums short.
    classes: Vec<(f64, u64)>,
}

impl HitModel {
    pub fn new(graph: &CsrGraph, config: &SampleConfig) -> Result<Self> {
        let pi = hitting_probability(graph)?;
        let draws_per_hop = total_draws(config, graph.num_vertices());
        let total_draws = draws_per_hop.iter().fold(0u64, |a, &s| a.saturating_add(s));
        let mut by_degree: BTreeMap<usize, u64> = BTreeMap::new();
        for d in graph.degrees().filter(|&d| d > 0) {
            *by_degree.entry(d).or_default() += 1;
        }
        let total = graph.total_degree() as f64;
        let classes = by_degree
            .into_iter()
            .map(|(d, count)| (d as f64 / total, count))
            .collect();
        Ok(Self {
            pi,
            draws_per_hop,
            total_draws,
            classes,
        })
    }

    /// Draws made through hop `h` (1-based).
    pub fn cumulative_draws(&self, h: usize) -> u64 {
        self.draws_per_hop[..h]
            .iter()
            .fold(0u64, |a, &s| a.saturating_add(s))
    }

    /// `p_v` for every vertex after `draws` draws.
    pub fn vertex_probabilities(&self, draws: u64) -> Vec<f64> {
        self.pi
            .iter()
            .map(|&pi| vertex_hit_prob(pi, draws))
            .collect()
    }

    /// Poisson-binomial moments after `draws` draws; equal to
    /// `pb_moments(&self.vertex_probabilities(draws))`.
    pub fn moments(&self, draws: u64) -> PbMoments {
        let mut mu = CompensatedSum::default();
        let mut var = CompensatedSum::default();
        for &(pi, count) in &self.classes {
            let p = vertex_hit_prob(pi, draws);
            mu.add(count as f64 * p);
            var.add(count as f64 * p * (1.0 - p));
        }
        PbMoments::from_sums(mu.value(), var.value())
    }
}

/// Per-hop conservative bounds on unique vertices and edges, together with
/// the statistics that justify them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSpec {
    pub confidence: f64,
    pub repetitions: u64,
    pub z: f64,
    pub safety_factor: f64,
    pub batch_size: usize,
    pub fanouts: Vec<usize>,
    pub num_vertices: usize,
    pub draws_per_hop: Vec<u64>,
    pub mu_per_hop: Vec<f64>,
    pub sigma_per_hop: Vec<f64>,
    /// Cumulative unique-vertex bound after each hop, seeds included.
    pub v_max_per_hop: Vec<usize>,
    /// Frontier bound entering each hop.
    pub frontier_max_per_hop: Vec<usize>,
    /// Edge (draw) bound at each hop.
    pub e_max_per_hop: Vec<usize>,
    pub v_max_total: usize,
    pub cv: Option<f64>,
    /// `2 z CV` of the final hop.
    pub range_bound: f64,
}

impl EnvelopeSpec {
    pub fn hops(&self) -> usize {
        self.v_max_per_hop.len()
    }

    pub fn e_max_total(&self) -> usize {
        self.e_max_per_hop.iter().sum()
    }

    /// Bound on vertices first seen at hop `h` (1-based), i.e. the frontier
    /// of hop `h + 1`.
    pub fn new_vertex_bound(&self, h: usize) -> usize {
        (self.v_max_per_hop[h - 1] - self.batch_size).min(self.e_max_per_hop[h - 1])
    }

    /// Bound on the cumulative unique count before hop `h` (1-based).
    pub fn vertices_before(&self, h: usize) -> usize {
        if h <= 1 {
            self.batch_size
        } else {
            self.v_max_per_hop[h - 2]
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Builds the execution envelope for `config` on `graph`.
///
/// Hop `h` is bounded by `min(ceil(s * (mu_h + z sigma_h)) + B, MaxSG_h, n)`
/// where the moments use all draws through hop `h`. The frontier entering
/// hop `h > 1` is bounded by the vertices first seen at hop `h - 1`, at most
/// `min(V_max_{h-1} - B, E_max_{h-1})`, and `E_max_h = frontier_h * F_h`.
pub fn compute_envelope(
    graph: &CsrGraph,
    config: &SampleConfig,
    confidence: f64,
    repetitions: u64,
    safety_factor: f64,
) -> Result<EnvelopeSpec> {
    config.validate()?;
    if !(safety_factor >= 1.0) || !safety_factor.is_finite() {
        return Err(Error::Config(format!(
            "safety factor {safety_factor} must be >= 1"
        )));
    }
    let z = repetition_quantile(confidence, repetitions)?;
    let model = HitModel::new(graph, config)?;
    let n = graph.num_vertices();
    let b = config.batch_size;
    if b > n {
        return Err(Error::Config(format!(
            "batch size {b} exceeds {n} vertices"
        )));
    }
    let maxsg = maxsg_vertex_caps(config, n);

    let hops = config.hops();
    let mut mu_per_hop = Vec::with_capacity(hops);
    let mut sigma_per_hop = Vec::with_capacity(hops);
    let mut v_max_per_hop = Vec::with_capacity(hops);
    let mut last = PbMoments::from_sums(0.0, 0.0);
    for h in 1..=hops {
        let m = model.moments(model.cumulative_draws(h));
        let raw = (safety_factor * (m.mu + z * m.sigma())).max(0.0).ceil();
        let bound = (raw as usize).saturating_add(b).min(maxsg[h - 1]).min(n);
        mu_per_hop.push(m.mu);
        sigma_per_hop.push(m.sigma());
        v_max_per_hop.push(bound);
        last = m;
    }

    let mut frontier_max_per_hop = Vec::with_capacity(hops);
    let mut e_max_per_hop: Vec<usize> = Vec::with_capacity(hops);
    for (i, &f) in config.fanouts.iter().enumerate() {
        let frontier = if i == 0 {
            b
        } else {
            (v_max_per_hop[i - 1] - b).min(e_max_per_hop[i - 1]).min(n)
        };
        frontier_max_per_hop.push(frontier);
        e_max_per_hop.push(frontier.saturating_mul(f));
    }

    let range_bound = last.cv.map_or(0.0, |cv| 2.0 * z * cv);
    Ok(EnvelopeSpec {
        confidence,
        repetitions,
        z,
        safety_factor,
        batch_size: b,
        fanouts: config.fanouts.clone(),
        num_vertices: n,
        draws_per_hop: model.draws_per_hop.clone(),
        mu_per_hop,
        sigma_per_hop,
        v_max_total: *v_max_per_hop.last().unwrap(),
        v_max_per_hop,
        frontier_max_per_hop,
        e_max_per_hop,
        cv: last.cv,
        range_bound,
    })
}

/// Normalized fluctuation band `2 z CV`.
pub fn normalized_range_bound(moments: &PbMoments, z: f64) -> Result<f64> {
    moments
        .cv
        .map(|cv| 2.0 * z * cv)
        .ok_or_else(|| Error::Model("range bound undefined for a zero mean".into()))
}

/// Per-hop overflow flags: the cumulative unique count or the edge count of a
/// hop exceeds its bound. Bounds are inclusive.
pub fn check_overflow(metadata: &IterationMetadata, envelope: &EnvelopeSpec) -> Result<Vec<bool>> {
    if metadata.hops() != envelope.hops() {
        return Err(Error::Config(format!(
            "metadata has {} hops, envelope {}",
            metadata.hops(),
            envelope.hops()
        )));
    }
    Ok((0..metadata.hops())
        .map(|h| {
            metadata.per_hop_vertex_counts[h] > envelope.v_max_per_hop[h]
                || metadata.per_hop_edge_counts[h] > envelope.e_max_per_hop[h]
        })
        .collect())
}

pub fn overflows(metadata: &IterationMetadata, envelope: &EnvelopeSpec) -> Result<bool> {
    Ok(check_overflow(metadata, envelope)?.into_iter().any(|f| f))
}
