use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};

use super::{CsrGraph, VertexId};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"CSR1";

/// Options for [`load_edge_list`].
#[derive(Debug, Clone, Default)]
pub struct EdgeListOptions {
    /// Store both directions of every listed edge.
    pub symmetric: bool,
    /// Remap sparse ids onto `0..k` in ascending id order.
    pub compact_ids: bool,
    /// Vertex count to use when the input carries no `n=` header.
    pub num_vertices: Option<usize>,
}

/// Parses a whitespace-separated `src dst` edge list.
///
/// Lines starting with `#` are comments. A line `n=<count>` before the first
/// edge declares the vertex count, which may exceed the largest id + 1.
pub fn load_edge_list<R: BufRead>(reader: R, opts: &EdgeListOptions) -> Result<CsrGraph> {
    let mut declared = opts.num_vertices;
    let mut raw: Vec<(u64, u64)> = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(count) = line.strip_prefix("n=") {
            if !raw.is_empty() {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "vertex-count header after the first edge".into(),
                });
            }
            let count = count.trim().parse::<usize>().map_err(|e| Error::Parse {
                line: lineno,
                msg: format!("bad vertex count: {e}"),
            })?;
            declared = Some(count);
            continue;
        }
        let mut fields = line.split_whitespace();
        let (Some(s), Some(d), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected `src dst`, got `{line}`"),
            });
        };
        let parse = |tok: &str| {
            tok.parse::<u64>().map_err(|e| Error::Parse {
                line: lineno,
                msg: format!("bad vertex id `{tok}`: {e}"),
            })
        };
        raw.push((parse(s)?, parse(d)?));
    }

    let (ids, implied): (Vec<(VertexId, VertexId)>, usize) = if opts.compact_ids {
        let mut map: BTreeMap<u64, VertexId> = BTreeMap::new();
        for &(s, d) in &raw {
            map.insert(s, 0);
            map.insert(d, 0);
        }
        if map.len() > VertexId::MAX as usize {
            return Err(Error::Range(format!("{} distinct vertex ids", map.len())));
        }
        for (dense, slot) in map.values_mut().enumerate() {
            *slot = dense as VertexId;
        }
        let edges = raw.iter().map(|(s, d)| (map[s], map[d])).collect();
        (edges, map.len())
    } else {
        let mut max_id = None::<u64>;
        for &(s, d) in &raw {
            let m = s.max(d);
            if m >= VertexId::MAX as u64 {
                return Err(Error::Range(format!(
                    "vertex id {m} exceeds 32-bit id space"
                )));
            }
            max_id = Some(max_id.map_or(m, |x| x.max(m)));
        }
        let edges = raw
            .iter()
            .map(|&(s, d)| (s as VertexId, d as VertexId))
            .collect();
        (edges, max_id.map_or(0, |m| m as usize + 1))
    };

    let n = match declared {
        Some(n) if n < implied => {
            return Err(Error::Range(format!(
                "declared {n} vertices but ids require {implied}"
            )))
        }
        Some(n) => n,
        None => implied,
    };

    if opts.symmetric {
        CsrGraph::from_undirected_edges(n, &ids)
    } else {
        CsrGraph::from_edges(n, &ids)
    }
}

/// Writes the graph as an edge list with an `n=` header.
pub fn write_edge_list<W: Write>(graph: &CsrGraph, mut out: W) -> Result<()> {
    writeln!(out, "n={}", graph.num_vertices())?;
    for v in 0..graph.num_vertices() as VertexId {
        for &t in graph.neighbors(v) {
            writeln!(out, "{v} {t}")?;
        }
    }
    Ok(())
}

/// Binary layout: `CSR1`, u64 vertex count, u64 edge count, u64 offsets,
/// u32 targets; all little-endian.
pub fn write_binary<W: Write>(graph: &CsrGraph, mut out: W) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&(graph.num_vertices() as u64).to_le_bytes())?;
    out.write_all(&(graph.num_edges() as u64).to_le_bytes())?;
    for &o in graph.offsets() {
        out.write_all(&(o as u64).to_le_bytes())?;
    }
    for &t in graph.targets() {
        out.write_all(&t.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut input: R) -> Result<CsrGraph> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let mut word = [0u8; 8];
    input.read_exact(&mut word)?;
    let n = usize::try_from(u64::from_le_bytes(word))
        .map_err(|_| Error::Format("vertex count overflows usize".into()))?;
    input.read_exact(&mut word)?;
    let m = usize::try_from(u64::from_le_bytes(word))
        .map_err(|_| Error::Format("edge count overflows usize".into()))?;

    let mut offsets = Vec::with_capacity(n + 1);
    for _ in 0..=n {
        input.read_exact(&mut word)?;
        offsets.push(u64::from_le_bytes(word) as usize);
    }
    let mut targets = Vec::with_capacity(m);
    let mut half = [0u8; 4];
    for _ in 0..m {
        input.read_exact(&mut half)?;
        targets.push(u32::from_le_bytes(half));
    }
    CsrGraph::from_parts(offsets, targets)
}
