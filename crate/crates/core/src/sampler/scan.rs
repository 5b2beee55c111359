use crate::graph::VertexId;
use crate::{Error, Result};

/// Groups local edges by source into CSR arrays. Offsets are the exclusive
/// prefix sum of per-source degrees; targets keep their input order within
/// each source.
pub fn build_subgraph_csr(
    edges: &[(VertexId, VertexId)],
    num_local_src: usize,
) -> Result<(Vec<usize>, Vec<VertexId>)> {
    let mut degree = vec![0usize; num_local_src];
    for &(s, _) in edges {
        let s = s as usize;
        if s >= num_local_src {
            return Err(Error::Index {
                index: s,
                limit: num_local_src,
            });
        }
        degree[s] += 1;
    }
    let mut offsets = Vec::with_capacity(num_local_src + 1);
    offsets.push(0);
    let mut acc = 0;
    for d in &degree {
        acc += d;
        offsets.push(acc);
    }
    let mut cursor = offsets[..num_local_src].to_vec();
    let mut targets = vec![0; edges.len()];
    for &(s, d) in edges {
        let c = &mut cursor[s as usize];
        targets[*c] = d;
        *c += 1;
    }
    Ok((offsets, targets))
}

/// Element counts at each level of a hierarchical block scan with `block_quota`
/// elements per block: `n, ceil(n/T), ...` until a level fits in one block.
pub fn scan_levels(n: usize, block_quota: usize) -> Result<Vec<usize>> {
    if block_quota < 2 {
        return Err(Error::Config(format!(
            "scan block quota must be at least 2, got {block_quota}"
        )));
    }
    let mut levels = vec![n];
    let mut cur = n;
    while cur > block_quota {
        cur = cur.div_ceil(block_quota);
        levels.push(cur);
    }
    Ok(levels)
}

/// Kernel invocations for the hierarchical scan: one scan per level plus one
/// add-offset pass per non-final level.
pub fn prefix_sum_rounds(n: usize, block_quota: usize) -> Result<usize> {
    Ok(2 * scan_levels(n, block_quota)?.len() - 1)
}
