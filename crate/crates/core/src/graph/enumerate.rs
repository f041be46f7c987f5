//! Connected graphs up to isomorphism, by brute force.
//!
//! The canonical form of a graph is the largest upper-triangle bit code over
//! all labelings that list nodes in non-increasing degree order. That set of
//! labelings is isomorphism-invariant, so two graphs are isomorphic iff their
//! codes agree. Permuting only within equal-degree blocks keeps the search
//! well below `n!` for most graphs.

use std::collections::BTreeSet;

use super::{GraphError, Topology};

/// Largest `n` accepted by [`enumerate_connected_topologies`].
pub const MAX_ENUMERATION_NODES: usize = 7;

/// Largest `n` whose upper triangle fits in a `u64` code.
const MAX_CODE_NODES: usize = 11;

fn pair_index(n: usize, p: usize, q: usize) -> usize {
    debug_assert!(p < q);
    p * (2 * n - p - 1) / 2 + (q - p - 1)
}

fn code_for_order(n: usize, adjacency: &[u8], order: &[usize]) -> u64 {
    let mut code = 0u64;
    let m = n * (n - 1) / 2;
    for p in 0..n {
        for q in (p + 1)..n {
            if adjacency[order[p] * n + order[q]] != 0 {
                code |= 1u64 << (m - 1 - pair_index(n, p, q));
            }
        }
    }
    code
}

/// Rearranges `block` into the next lexicographic permutation; false when it wraps.
fn next_permutation(block: &mut [usize]) -> bool {
    if block.len() < 2 {
        return false;
    }
    let mut i = block.len() - 1;
    while i > 0 && block[i - 1] >= block[i] {
        i -= 1;
    }
    if i == 0 {
        block.reverse();
        return false;
    }
    let mut j = block.len() - 1;
    while block[j] <= block[i - 1] {
        j -= 1;
    }
    block.swap(i - 1, j);
    block[i..].reverse();
    true
}

fn canonical_from_adjacency(n: usize, adjacency: &[u8]) -> u64 {
    let degree: Vec<usize> = (0..n)
        .map(|i| adjacency[i * n..(i + 1) * n].iter().filter(|&&a| a != 0).count())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| degree[b].cmp(&degree[a]).then(a.cmp(&b)));

    let mut blocks = Vec::new();
    let mut start = 0;
    for pos in 1..=n {
        if pos == n || degree[order[pos]] != degree[order[start]] {
            blocks.push(start..pos);
            start = pos;
        }
    }

    let mut best = code_for_order(n, adjacency, &order);
    // Odometer over the per-block permutations; each block starts sorted.
    loop {
        let mut advanced = false;
        for block in blocks.iter().rev() {
            if next_permutation(&mut order[block.clone()]) {
                advanced = true;
                break;
            }
        }
        if !advanced {
            break;
        }
        best = best.max(code_for_order(n, adjacency, &order));
    }
    best
}

fn topology_from_code(n: usize, code: u64) -> Topology {
    let m = n * (n - 1) / 2;
    let mut adjacency = vec![0u8; n * n];
    for p in 0..n {
        for q in (p + 1)..n {
            if code >> (m - 1 - pair_index(n, p, q)) & 1 == 1 {
                adjacency[p * n + q] = 1;
                adjacency[q * n + p] = 1;
            }
        }
    }
    Topology::from_adjacency_unchecked(n, adjacency)
}

/// Isomorphism-invariant code; equal codes mean isomorphic graphs.
pub fn canonical_code(t: &Topology) -> Result<u64, GraphError> {
    if t.n_banks() > MAX_CODE_NODES {
        return Err(GraphError::TooManyNodes {
            n: t.n_banks(),
            max: MAX_CODE_NODES,
        });
    }
    Ok(canonical_from_adjacency(t.n_banks(), t.adjacency()))
}

/// One representative per isomorphism class of connected graphs on `n` nodes,
/// in canonical labeling, ordered by edge count and then by code.
pub fn enumerate_connected_topologies(n: usize) -> Result<Vec<Topology>, GraphError> {
    if n == 0 {
        return Err(GraphError::NoBanks);
    }
    if n > MAX_ENUMERATION_NODES {
        return Err(GraphError::TooManyNodes {
            n,
            max: MAX_ENUMERATION_NODES,
        });
    }
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let mut seen = BTreeSet::new();
    let mut adjacency = vec![0u8; n * n];
    let mut degree = vec![0usize; n];

    for mask in 0u64..(1u64 << pairs.len()) {
        if (mask.count_ones() as usize) + 1 < n {
            continue;
        }
        degree.iter_mut().for_each(|d| *d = 0);
        for (bit, &(i, j)) in pairs.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                degree[i] += 1;
                degree[j] += 1;
            }
        }
        // Every class has a labeling with non-increasing degrees.
        if degree.windows(2).any(|w| w[0] < w[1]) || degree.iter().any(|&d| d == 0) && n > 1 {
            continue;
        }
        adjacency.iter_mut().for_each(|a| *a = 0);
        for (bit, &(i, j)) in pairs.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                adjacency[i * n + j] = 1;
                adjacency[j * n + i] = 1;
            }
        }
        let candidate = Topology::from_adjacency_unchecked(n, adjacency.clone());
        if !candidate.is_connected() {
            continue;
        }
        seen.insert((mask.count_ones(), canonical_from_adjacency(n, &adjacency)));
    }

    Ok(seen
        .into_iter()
        .map(|(_, code)| topology_from_code(n, code))
        .collect())
}
