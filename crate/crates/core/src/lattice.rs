//! Hypercube geometry and edge percolation.
//!
//! A vertex of `Q_d` is a `u32` whose bit `i` is coordinate `i`. Even vertices
//! have even popcount. Edges are indexed from their even endpoint: the edge from
//! even `u` toward `u ^ (1 << i)` has index `rank(u) * d + i`, where `rank(u)` is
//! the position of `u` among even vertices in increasing order.
//!
//! Both parity classes share the same rank map, `rank(v) = v >> 1`: dropping bit
//! 0 is a bijection from either side onto `0..2^(d-1)`.

use crate::error::{check_dim, Error, Result};
use crate::rng::{CounterRng, Threshold};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const MAX_D: u32 = 24;

const MAGIC: &[u8; 4] = b"QDPC";
const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 24;

const EDGE_STREAM: u64 = 0x4544_4745;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Even,
    Odd,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Even, Side::Odd];

    #[inline]
    pub fn of(v: u32) -> Side {
        if v.count_ones() % 2 == 0 {
            Side::Even
        } else {
            Side::Odd
        }
    }

    pub fn other(self) -> Side {
        match self {
            Side::Even => Side::Odd,
            Side::Odd => Side::Even,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Even => "even",
            Side::Odd => "odd",
        }
    }

    /// The vertex of this side with the given rank.
    #[inline]
    pub fn vertex(self, rank: u32) -> u32 {
        let par = rank.count_ones() & 1;
        match self {
            Side::Even => (rank << 1) | par,
            Side::Odd => (rank << 1) | (par ^ 1),
        }
    }

    /// All vertices of this side in increasing order.
    pub fn vertices(self, d: u32) -> impl Iterator<Item = u32> {
        (0..side_len(d)).map(move |r| self.vertex(r))
    }
}

#[inline]
pub fn rank(v: u32) -> u32 {
    v >> 1
}

/// Number of vertices on one side, `2^(d-1)`.
#[inline]
pub fn side_len(d: u32) -> u32 {
    1u32 << (d - 1)
}

/// Number of edges of `Q_d`, `d * 2^(d-1)`.
#[inline]
pub fn edge_count(d: u32) -> usize {
    d as usize * side_len(d) as usize
}

/// Canonical index of the edge between `v` and `v ^ (1 << i)`.
#[inline]
pub fn edge_index(d: u32, v: u32, i: u32) -> usize {
    let even = if v.count_ones() % 2 == 0 { v } else { v ^ (1 << i) };
    rank(even) as usize * d as usize + i as usize
}

/// Number of dimers on one side, `d(d-1) 2^(d-3)`.
pub fn dimer_count(d: u32) -> u64 {
    if d < 2 {
        return 0;
    }
    (d as u64 * (d as u64 - 1) << (d - 1)) / 4
}

/// A same-side pair at Hamming distance two, `u < v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Dimer {
    pub u: u32,
    pub v: u32,
    pub side: Side,
}

impl Dimer {
    /// Builds the dimer `{a, b}` in canonical order.
    pub fn new(a: u32, b: u32) -> Result<Dimer> {
        if (a ^ b).count_ones() != 2 {
            return Err(Error::Contract(format!(
                "{a} and {b} are not at Hamming distance 2"
            )));
        }
        Ok(Dimer {
            u: a.min(b),
            v: a.max(b),
            side: Side::of(a),
        })
    }

    /// The two differing coordinates, lower first.
    #[inline]
    pub fn bits(&self) -> (u32, u32) {
        let x = self.u ^ self.v;
        let i = x.trailing_zeros();
        let j = 31 - x.leading_zeros();
        (i, j)
    }

    /// The two opposite-side vertices adjacent to both endpoints in `Q_d`.
    pub fn pivots(&self) -> [u32; 2] {
        let (i, j) = self.bits();
        [self.u ^ (1 << i), self.u ^ (1 << j)]
    }
}

/// Canonical dimer order: `u` increasing, then pairs `i < j` lexicographically,
/// keeping the pair only when `u` is the smaller endpoint.
pub fn dimers(d: u32, side: Side) -> impl Iterator<Item = Dimer> {
    let n = if d >= 2 { side_len(d) } else { 0 };
    (0..n).flat_map(move |r| {
        let u = side.vertex(r);
        (0..d).flat_map(move |i| {
            ((i + 1)..d).filter_map(move |j| {
                // u < u^ei^ej iff bit j of u is clear
                if u & (1 << j) == 0 {
                    Some(Dimer {
                        u,
                        v: u ^ (1 << i) ^ (1 << j),
                        side,
                    })
                } else {
                    None
                }
            })
        })
    })
}

pub fn enumerate_dimers(d: u32, side: Side) -> Vec<Dimer> {
    dimers(d, side).collect()
}

/// `Q_{d,p}`: the hypercube with each edge kept independently with probability `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct PercolatedHypercube {
    d: u32,
    p: f64,
    seed: u64,
    edges: Vec<u64>,
}

impl PercolatedHypercube {
    pub fn build(d: u32, p: f64, seed: u64) -> Result<Self> {
        check_dim("build_percolation", d, 1, MAX_D)?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("retention probability {p} not in [0,1]")));
        }
        let n = edge_count(d);
        let words = n.div_ceil(64);
        let rng = CounterRng::new(seed).substream(EDGE_STREAM);
        let t = Threshold::from_probability(p);
        let mut edges = vec![0u64; words];
        edges.par_iter_mut().enumerate().for_each(|(w, word)| {
            let lo = w * 64;
            let hi = (lo + 64).min(n);
            let mut bits = 0u64;
            for e in lo..hi {
                if rng.bernoulli(e as u64, t) {
                    bits |= 1 << (e - lo);
                }
            }
            *word = bits;
        });
        Ok(Self { d, p, seed, edges })
    }

    /// Wraps an explicit edge bitmap. Bits beyond `d * 2^(d-1)` must be clear.
    pub fn from_bitmap(d: u32, p: f64, seed: u64, edges: Vec<u64>) -> Result<Self> {
        check_dim("from_bitmap", d, 1, MAX_D)?;
        let n = edge_count(d);
        if edges.len() != n.div_ceil(64) {
            return Err(Error::Contract(format!(
                "bitmap has {} words, expected {}",
                edges.len(),
                n.div_ceil(64)
            )));
        }
        if n % 64 != 0 && edges[n / 64] >> (n % 64) != 0 {
            return Err(Error::Contract("bits set past the last edge".into()));
        }
        Ok(Self { d, p, seed, edges })
    }

    /// Builds the graph from a predicate over edge indices.
    pub fn from_fn(d: u32, mut keep: impl FnMut(usize) -> bool) -> Result<Self> {
        check_dim("from_fn", d, 1, MAX_D)?;
        let n = edge_count(d);
        let mut edges = vec![0u64; n.div_ceil(64)];
        for e in 0..n {
            if keep(e) {
                edges[e / 64] |= 1 << (e % 64);
            }
        }
        Ok(Self {
            d,
            p: f64::NAN,
            seed: 0,
            edges,
        })
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn bitmap(&self) -> &[u64] {
        &self.edges
    }

    pub fn num_vertices(&self) -> u32 {
        1 << self.d
    }

    #[inline]
    pub fn edge_bit(&self, e: usize) -> bool {
        self.edges[e >> 6] >> (e & 63) & 1 == 1
    }

    /// Whether the edge from `v` in direction `i` survived.
    #[inline]
    pub fn has_edge(&self, v: u32, i: u32) -> bool {
        self.edge_bit(edge_index(self.d, v, i))
    }

    pub fn retained_edges(&self) -> u64 {
        self.edges.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// Directions `i` whose edge at `v` is retained, as a bitmask.
    #[inline]
    pub fn retained_mask(&self, v: u32) -> u32 {
        let d = self.d;
        if v.count_ones() % 2 == 0 {
            let base = rank(v) as usize * d as usize;
            let w = base >> 6;
            let off = base & 63;
            let mut bits = self.edges[w] >> off;
            if off + d as usize > 64 {
                bits |= self.edges[w + 1] << (64 - off);
            }
            (bits & ((1u64 << d) - 1)) as u32
        } else {
            let mut m = 0;
            for i in 0..d {
                if self.has_edge(v, i) {
                    m |= 1 << i;
                }
            }
            m
        }
    }

    /// `N(v)`: the number of retained edges at `v`.
    #[inline]
    pub fn degree(&self, v: u32) -> u32 {
        self.retained_mask(v).count_ones()
    }

    /// Degrees of all vertices, indexed by vertex.
    pub fn degrees(&self) -> Vec<u8> {
        let mut deg = vec![0u8; 1 << self.d];
        for r in 0..side_len(self.d) {
            let u = Side::Even.vertex(r);
            let m = self.retained_mask(u);
            deg[u as usize] = m.count_ones() as u8;
            for i in 0..self.d {
                if m >> i & 1 == 1 {
                    deg[(u ^ (1 << i)) as usize] += 1;
                }
            }
        }
        deg
    }

    /// `retained_mask` for every vertex of a side, indexed by rank.
    pub fn retained_masks(&self, side: Side) -> Vec<u32> {
        let d = self.d;
        let n = side_len(d) as usize;
        let mut even = vec![0u32; n];
        even.par_iter_mut()
            .enumerate()
            .for_each(|(r, m)| *m = self.retained_mask(Side::Even.vertex(r as u32)));
        if side == Side::Even {
            return even;
        }
        let mut odd = vec![0u32; n];
        for (r, &m) in even.iter().enumerate() {
            let u = Side::Even.vertex(r as u32);
            let mut bits = m;
            while bits != 0 {
                let i = bits.trailing_zeros();
                odd[rank(u ^ (1 << i)) as usize] |= 1 << i;
                bits &= bits - 1;
            }
        }
        odd
    }

    /// Retained neighbours of `v`.
    pub fn neighbors(&self, v: u32) -> impl Iterator<Item = u32> + '_ {
        let m = self.retained_mask(v);
        (0..self.d).filter(move |i| m >> i & 1 == 1).map(move |i| v ^ (1 << i))
    }

    /// `N(S)`: the number of opposite-side vertices with a retained edge into `S`.
    pub fn neighborhood_size(&self, s: &[u32], side: Side) -> Result<u32> {
        check_side(self.d, s, side)?;
        let mut nb: Vec<u32> = s.iter().flat_map(|&v| self.neighbors(v)).collect();
        nb.sort_unstable();
        nb.dedup();
        Ok(nb.len() as u32)
    }

    /// Whether `set` (any mix of vertices) spans no retained edge.
    pub fn is_independent(&self, set: &[u32]) -> bool {
        let mut sorted = set.to_vec();
        sorted.sort_unstable();
        sorted
            .iter()
            .all(|&v| self.neighbors(v).all(|w| sorted.binary_search(&w).is_err()))
    }

    /// The same graph relabelled by `v -> v ^ mask`. An odd-weight mask swaps
    /// the two sides.
    pub fn translate(&self, mask: u32) -> Self {
        let d = self.d;
        let mask = mask & ((1u32 << d) - 1);
        let n = edge_count(d);
        let mut edges = vec![0u64; n.div_ceil(64)];
        for r in 0..side_len(d) {
            let u = Side::Even.vertex(r);
            let m = self.retained_mask(u);
            for i in 0..d {
                if m >> i & 1 == 1 {
                    let e = edge_index(d, u ^ mask, i);
                    edges[e / 64] |= 1 << (e % 64);
                }
            }
        }
        Self {
            d,
            p: self.p,
            seed: self.seed,
            edges,
        }
    }

    pub fn serialize(&self) -> Vec<u8> {
        let nbytes = edge_count(self.d).div_ceil(8);
        let mut out = Vec::with_capacity(HEADER_LEN + nbytes);
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(self.d as u8);
        out.extend_from_slice(&self.p.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&[0, 0]);
        for w in &self.edges {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out.truncate(HEADER_LEN + nbytes);
        out
    }

    pub fn deserialize(bytes: &[u8]) -> Result<Self> {
        let perr = |offset: usize, message: String| Error::Parse { offset, message };
        if bytes.len() < HEADER_LEN {
            return Err(perr(
                bytes.len(),
                format!("truncated header: {} of {HEADER_LEN} bytes", bytes.len()),
            ));
        }
        if &bytes[0..4] != MAGIC {
            return Err(perr(0, "bad magic, expected \"QDPC\"".into()));
        }
        if bytes[4] != VERSION {
            return Err(perr(4, format!("unsupported version {}", bytes[4])));
        }
        let d = bytes[5] as u32;
        if !(1..=MAX_D).contains(&d) {
            return Err(perr(5, format!("dimension {d} outside 1..={MAX_D}")));
        }
        let p = f64::from_le_bytes(bytes[6..14].try_into().unwrap());
        if !(0.0..=1.0).contains(&p) {
            return Err(perr(6, format!("retention probability {p} not in [0,1]")));
        }
        let seed = u64::from_le_bytes(bytes[14..22].try_into().unwrap());
        if bytes[22] != 0 || bytes[23] != 0 {
            let at = if bytes[22] != 0 { 22 } else { 23 };
            return Err(perr(at, "reserved bytes must be zero".into()));
        }
        let n = edge_count(d);
        let nbytes = n.div_ceil(8);
        let payload = &bytes[HEADER_LEN..];
        if payload.len() < nbytes {
            return Err(perr(
                bytes.len(),
                format!("truncated bitmap: {} of {nbytes} bytes", payload.len()),
            ));
        }
        if payload.len() > nbytes {
            return Err(perr(HEADER_LEN + nbytes, "trailing bytes after bitmap".into()));
        }
        if n % 8 != 0 && payload[nbytes - 1] >> (n % 8) != 0 {
            return Err(perr(HEADER_LEN + nbytes - 1, "nonzero padding bits".into()));
        }
        let mut edges = vec![0u64; n.div_ceil(64)];
        for (k, chunk) in payload.chunks(8).enumerate() {
            let mut buf = [0u8; 8];
            buf[..chunk.len()].copy_from_slice(chunk);
            edges[k] = u64::from_le_bytes(buf);
        }
        Ok(Self { d, p, seed, edges })
    }
}

pub(crate) fn check_side(d: u32, s: &[u32], side: Side) -> Result<()> {
    for &v in s {
        if v >> d != 0 {
            return Err(Error::Contract(format!("vertex {v} outside Q_{d}")));
        }
        if Side::of(v) != side {
            return Err(Error::Contract(format!(
                "vertex {v} is not on the {} side",
                side.name()
            )));
        }
    }
    Ok(())
}
