//! Compressed sparse row graphs.
//!
//! Graphs are directed. Undirected inputs are represented by storing both
//! directions of every edge, which is what the generators and the edge-list
//! loader do when asked for a symmetric graph.

mod generate;
mod io;

pub use generate::{generate, EdgeTarget, GraphGenSpec, GraphKind};
pub use io::{load_edge_list, read_binary, write_binary, write_edge_list, EdgeListOptions};

use crate::{Error, Result};

/// Dense vertex identifier. Desk-scale graphs fit comfortably in 32 bits.
pub type VertexId = u32;

/// Immutable CSR adjacency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsrGraph {
    offsets: Vec<usize>,
    targets: Vec<VertexId>,
}

impl CsrGraph {
    /// Builds a graph from raw CSR arrays, checking every structural invariant.
    pub fn from_parts(offsets: Vec<usize>, targets: Vec<VertexId>) -> Result<Self> {
        if offsets.is_empty() {
            return Err(Error::Format(
                "offsets must hold num_vertices + 1 entries".into(),
            ));
        }
        if offsets[0] != 0 {
            return Err(Error::Format("offsets[0] must be 0".into()));
        }
        if offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Format("offsets must be nondecreasing".into()));
        }
        if *offsets.last().unwrap() != targets.len() {
            return Err(Error::Format(format!(
                "offsets end at {} but there are {} targets",
                offsets.last().unwrap(),
                targets.len()
            )));
        }
        let n = offsets.len() - 1;
        if let Some(&bad) = targets.iter().find(|&&t| t as usize >= n) {
            return Err(Error::Index {
                index: bad as usize,
                limit: n,
            });
        }
        Ok(Self { offsets, targets })
    }

    /// Builds a graph from a directed edge list. Targets keep their input
    /// order within each source segment (stable counting sort).
    pub fn from_edges(num_vertices: usize, edges: &[(VertexId, VertexId)]) -> Result<Self> {
        Self::build(num_vertices, edges, false)
    }

    /// Builds a graph storing both directions of every edge; `(s, d)` is
    /// placed before `(d, s)`.
    pub fn from_undirected_edges(
        num_vertices: usize,
        edges: &[(VertexId, VertexId)],
    ) -> Result<Self> {
        Self::build(num_vertices, edges, true)
    }

    fn build(num_vertices: usize, edges: &[(VertexId, VertexId)], symmetric: bool) -> Result<Self> {
        let mut offsets = vec![0usize; num_vertices + 1];
        for &(s, d) in edges {
            for v in [s, d] {
                if v as usize >= num_vertices {
                    return Err(Error::Index {
                        index: v as usize,
                        limit: num_vertices,
                    });
                }
            }
            offsets[s as usize + 1] += 1;
            if symmetric {
                offsets[d as usize + 1] += 1;
            }
        }
        for i in 0..num_vertices {
            offsets[i + 1] += offsets[i];
        }
        let mut cursor = offsets[..num_vertices].to_vec();
        let mut targets = vec![0; offsets[num_vertices]];
        let mut place = |s: VertexId, d: VertexId| {
            let slot = &mut cursor[s as usize];
            targets[*slot] = d;
            *slot += 1;
        };
        for &(s, d) in edges {
            place(s, d);
            if symmetric {
                place(d, s);
            }
        }
        Ok(Self { offsets, targets })
    }

    pub fn empty(num_vertices: usize) -> Self {
        Self {
            offsets: vec![0; num_vertices + 1],
            targets: Vec::new(),
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Number of directed edge slots.
    pub fn num_edges(&self) -> usize {
        self.targets.len()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn targets(&self) -> &[VertexId] {
        &self.targets
    }

    #[inline]
    pub fn degree(&self, v: VertexId) -> usize {
        let v = v as usize;
        self.offsets[v + 1] - self.offsets[v]
    }

    #[inline]
    pub fn neighbors(&self, v: VertexId) -> &[VertexId] {
        let v = v as usize;
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degrees(&self) -> impl Iterator<Item = usize> + '_ {
        self.offsets.windows(2).map(|w| w[1] - w[0])
    }

    /// Sum of all out-degrees; the denominator of the degree-proportional
    /// hitting probability. Always equal to `num_edges`.
    pub fn total_degree(&self) -> usize {
        self.degrees().sum()
    }

    pub fn max_degree(&self) -> usize {
        self.degrees().max().unwrap_or(0)
    }

    pub fn check_vertex(&self, v: VertexId) -> Result<()> {
        if (v as usize) < self.num_vertices() {
            Ok(())
        } else {
            Err(Error::Index {
                index: v as usize,
                limit: self.num_vertices(),
            })
        }
    }
}
