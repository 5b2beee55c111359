use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CsrGraph, VertexId};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphKind {
    UniformRandom,
    /// Chung-Lu style graph with power-law expected degrees.
    PowerLaw,
    Star,
    Ring,
    Complete,
}

/// Edge budget: an explicit count of directed edge slots, or a density over
/// the `n * n` slot matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EdgeTarget {
    Count(u64),
    Probability(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphGenSpec {
    pub kind: GraphKind,
    pub num_vertices: usize,
    /// Required for the random kinds, ignored by the fixed shapes.
    #[serde(default)]
    pub target_edges: Option<EdgeTarget>,
    /// Degree exponent, power-law only.
    #[serde(default)]
    pub exponent: Option<f64>,
    /// Store both edge directions. Applies to the random kinds, star and ring;
    /// `complete` is symmetric already.
    #[serde(default)]
    pub undirected: bool,
}

impl GraphGenSpec {
    pub fn power_law(num_vertices: usize, edges: u64, exponent: f64) -> Self {
        Self {
            kind: GraphKind::PowerLaw,
            num_vertices,
            target_edges: Some(EdgeTarget::Count(edges)),
            exponent: Some(exponent),
            undirected: true,
        }
    }

    pub fn uniform(num_vertices: usize, edges: u64) -> Self {
        Self {
            kind: GraphKind::UniformRandom,
            num_vertices,
            target_edges: Some(EdgeTarget::Count(edges)),
            exponent: None,
            undirected: true,
        }
    }

    pub fn shape(kind: GraphKind, num_vertices: usize) -> Self {
        Self {
            kind,
            num_vertices,
            target_edges: None,
            exponent: None,
            undirected: false,
        }
    }

    fn edge_count(&self) -> Result<usize> {
        let n = self.num_vertices as u128;
        let slots = n * n;
        let m = match self.target_edges {
            None => {
                return Err(Error::Config(format!(
                    "{:?} graphs need target_edges",
                    self.kind
                )))
            }
            Some(EdgeTarget::Count(m)) => m as u128,
            Some(EdgeTarget::Probability(p)) => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::Config(format!(
                        "edge probability {p} outside [0, 1]"
                    )));
                }
                (p * slots as f64).round() as u128
            }
        };
        if m > slots {
            return Err(Error::Config(format!(
                "target_edges {m} exceeds n^2 = {slots}"
            )));
        }
        if self.undirected && m % 2 == 1 {
            return Err(Error::Config(
                "undirected graphs store two slots per edge; target_edges must be even".into(),
            ));
        }
        usize::try_from(m).map_err(|_| Error::Config("target_edges overflows usize".into()))
    }
}

/// Generates a graph; a pure function of `(spec, seed)`.
pub fn generate(spec: &GraphGenSpec, seed: u64) -> Result<CsrGraph> {
    let n = spec.num_vertices;
    if n == 0 {
        return Err(Error::Config("num_vertices must be positive".into()));
    }
    if n > VertexId::MAX as usize {
        return Err(Error::Config(format!(
            "{n} vertices exceed the 32-bit id space"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nv = n as VertexId;

    let edges: Vec<(VertexId, VertexId)> = match spec.kind {
        GraphKind::Star => (1..nv).map(|leaf| (0, leaf)).collect(),
        GraphKind::Ring => {
            if n == 1 {
                Vec::new()
            } else {
                (0..nv).map(|v| (v, (v + 1) % nv)).collect()
            }
        }
        GraphKind::Complete => {
            let mut e = Vec::with_capacity(n * (n - 1));
            for s in 0..nv {
                for d in 0..nv {
                    if s != d {
                        e.push((s, d));
                    }
                }
            }
            return CsrGraph::from_edges(n, &e);
        }
        GraphKind::UniformRandom => {
            let m = spec.edge_count()?;
            let pairs = if spec.undirected { m / 2 } else { m };
            (0..pairs)
                .map(|_| (rng.gen_range(0..nv), rng.gen_range(0..nv)))
                .collect()
        }
        GraphKind::PowerLaw => {
            let exponent = spec
                .exponent
                .ok_or_else(|| Error::Config("power-law graphs need an exponent".into()))?;
            if !(exponent > 1.0) || !exponent.is_finite() {
                return Err(Error::Config(format!(
                    "power-law exponent {exponent} must exceed 1"
                )));
            }
            let m = spec.edge_count()?;
            let pairs = if spec.undirected { m / 2 } else { m };
            chung_lu_edges(n, pairs, exponent, &mut rng)
        }
    };

    if spec.undirected {
        CsrGraph::from_undirected_edges(n, &edges)
    } else {
        CsrGraph::from_edges(n, &edges)
    }
}

/// Chung-Lu weights `w_i = (i + 1)^(-1 / (exponent - 1))`, capped at
/// `sqrt(n)` times the mean weight.
fn chung_lu_weights(n: usize, exponent: f64) -> Vec<f64> {
    let alpha = 1.0 / (exponent - 1.0);
    let mut w: Vec<f64> = (0..n).map(|i| ((i + 1) as f64).powf(-alpha)).collect();
    let mean = w.iter().sum::<f64>() / n as f64;
    let cap = mean * (n as f64).sqrt();
    for x in &mut w {
        *x = x.min(cap);
    }
    w
}

/// Each vertex emits an out-degree proportional to its weight (at least one
/// edge while the budget allows) and every endpoint is drawn proportionally
/// to weight. Self-loops and parallel edges are kept.
fn chung_lu_edges(
    n: usize,
    pairs: usize,
    exponent: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<(VertexId, VertexId)> {
    let weights = chung_lu_weights(n, exponent);
    let out = apportion(&weights, pairs);

    let mut cumulative = Vec::with_capacity(n);
    let mut acc = 0.0;
    for &w in &weights {
        acc += w;
        cumulative.push(acc);
    }
    let total = acc;

    let mut edges = Vec::with_capacity(pairs);
    for (src, &k) in out.iter().enumerate() {
        for _ in 0..k {
            let x = rng.gen::<f64>() * total;
            let dst = cumulative.partition_point(|&c| c <= x).min(n - 1);
            edges.push((src as VertexId, dst as VertexId));
        }
    }
    edges
}

/// Splits `total` integer units proportionally to `weights` by largest
/// remainder, giving every slot one unit first when `total >= len`.
fn apportion(weights: &[f64], total: usize) -> Vec<usize> {
    let n = weights.len();
    let (mut out, rest) = if total >= n {
        (vec![1usize; n], total - n)
    } else {
        (vec![0usize; n], total)
    };
    let sum: f64 = weights.iter().sum();
    let mut assigned = 0usize;
    let mut remainders: Vec<(f64, usize)> = Vec::with_capacity(n);
    for (i, &w) in weights.iter().enumerate() {
        let share = rest as f64 * w / sum;
        let whole = share.floor() as usize;
        out[i] += whole;
        assigned += whole;
        remainders.push((share - whole as f64, i));
    }
    remainders.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in remainders.iter().take(rest.saturating_sub(assigned)) {
        out[i] += 1;
    }
    out
}
