//! Gray-code subset walks with incremental neighbourhood sizes.
//!
//! Consecutive Gray codes differ in one element, so `N(S)` can be maintained
//! with one counter per opposite-side vertex: adding `v` bumps the counters of
//! its retained neighbours, and a counter leaving zero means a newly covered
//! vertex. Each step costs `O(d)`.

use crate::lattice::{rank, PercolatedHypercube, Side};
use std::ops::Range;

#[inline]
pub fn gray(k: u64) -> u64 {
    k ^ (k >> 1)
}

/// Retained neighbours of each vertex of one side, as opposite-side ranks.
#[derive(Debug, Clone)]
pub struct SideNeighbors {
    pub side: Side,
    lists: Vec<Vec<u32>>,
    n_other: usize,
}

impl SideNeighbors {
    pub fn new(h: &PercolatedHypercube, side: Side) -> Self {
        let lists = side
            .vertices(h.d())
            .map(|v| h.neighbors(v).map(rank).collect())
            .collect::<Vec<_>>();
        Self {
            side,
            n_other: lists.len(),
            lists,
        }
    }

    pub fn len(&self) -> usize {
        self.lists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }

    pub fn of(&self, r: usize) -> &[u32] {
        &self.lists[r]
    }

    /// Neighbourhoods as bitmasks over opposite ranks; needs at most 64 of them.
    pub fn masks(&self) -> Vec<u64> {
        assert!(self.n_other <= 64);
        self.lists
            .iter()
            .map(|l| l.iter().fold(0u64, |m, &w| m | 1 << w))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct CoverageTracker {
    counts: Vec<u8>,
    covered: u32,
}

impl CoverageTracker {
    pub fn new(n_other: usize) -> Self {
        Self {
            counts: vec![0; n_other],
            covered: 0,
        }
    }

    #[inline]
    pub fn add(&mut self, nbrs: &[u32]) {
        for &w in nbrs {
            let c = &mut self.counts[w as usize];
            if *c == 0 {
                self.covered += 1;
            }
            *c += 1;
        }
    }

    #[inline]
    pub fn remove(&mut self, nbrs: &[u32]) {
        for &w in nbrs {
            let c = &mut self.counts[w as usize];
            *c -= 1;
            if *c == 0 {
                self.covered -= 1;
            }
        }
    }

    /// Number of opposite vertices with a positive counter, i.e. `N(S)`.
    #[inline]
    pub fn covered(&self) -> u32 {
        self.covered
    }
}

/// Visits the Gray codes `gray(k)` for `k` in `range`, handing `visit` the
/// subset mask (bit `r` = side vertex of rank `r`) and its `N(S)`.
pub fn walk_subsets(nb: &SideNeighbors, range: Range<u64>, mut visit: impl FnMut(u64, u32)) {
    if range.is_empty() {
        return;
    }
    let mut cov = CoverageTracker::new(nb.n_other);
    let mut mask = gray(range.start);
    let mut m = mask;
    while m != 0 {
        let r = m.trailing_zeros() as usize;
        cov.add(nb.of(r));
        m &= m - 1;
    }
    visit(mask, cov.covered());
    for k in range.start + 1..range.end {
        let r = k.trailing_zeros() as usize;
        let bit = 1u64 << r;
        mask ^= bit;
        if mask & bit != 0 {
            cov.add(nb.of(r));
        } else {
            cov.remove(nb.of(r));
        }
        visit(mask, cov.covered());
    }
}

/// Members of a subset mask as vertices of `side`.
pub fn mask_vertices(mask: u64, side: Side) -> Vec<u32> {
    let mut out = Vec::with_capacity(mask.count_ones() as usize);
    let mut m = mask;
    while m != 0 {
        out.push(side.vertex(m.trailing_zeros()));
        m &= m - 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gray_visits_every_subset_once() {
        let mut seen = vec![false; 1 << 10];
        for k in 0..1u64 << 10 {
            let g = gray(k);
            assert!(!seen[g as usize]);
            seen[g as usize] = true;
            if k > 0 {
                assert_eq!((g ^ gray(k - 1)).count_ones(), 1);
            }
        }
    }

    #[test]
    fn walk_matches_direct_neighborhood_sizes() {
        for seed in 0..4 {
            let h = PercolatedHypercube::build(4, 0.6, seed).unwrap();
            for side in Side::BOTH {
                let nb = SideNeighbors::new(&h, side);
                let n = nb.len() as u32;
                let mut visited = 0;
                // split range exercises the restart path
                for range in [0..77, 77..1u64 << n] {
                    walk_subsets(&nb, range, |mask, ns| {
                        let s = mask_vertices(mask, side);
                        assert_eq!(ns, h.neighborhood_size(&s, side).unwrap());
                        visited += 1;
                    });
                }
                assert_eq!(visited, 1 << n);
            }
        }
    }
}
