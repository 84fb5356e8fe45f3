//! Polymer machinery on one side of `Q_{d,p}`.
//!
//! Two same-side vertices are *2-linked* when they share a neighbour in the
//! unpercolated cube, which for same-parity vertices means Hamming distance 2.
//! A polymer is a 2-linked set whose closure holds at most `3/4` of the side;
//! a dimer is a two-vertex polymer. Distinct 2-linked components sit at
//! distance at least 4, so their neighbourhoods are disjoint and `N(S)` splits
//! into a sum over components.

use crate::dyadic::DyadicWeight;
use crate::error::{check_dim, Error, Result};
use crate::gray::{walk_subsets, SideNeighbors};
use crate::lattice::{check_side, dimers, rank, side_len, Dimer, PercolatedHypercube, Side};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::{Arc, Mutex, OnceLock};

/// Largest dimension for the enumerative partition functions.
pub const MAX_D_ENUM: u32 = 5;
/// Largest dimension for dimer sums.
pub const MAX_D_DIMER: u32 = 20;
/// Largest dimension for the layer/type/status breakdown.
pub const MAX_D_BREAKDOWN: u32 = 12;

/// Index of the pair `i < j` among the `C(d,2)` coordinate pairs.
#[inline]
pub fn pair_index(d: u32, i: u32, j: u32) -> u32 {
    i * (2 * d - i - 1) / 2 + (j - i - 1)
}

/// Dense slot for a dimer: `rank(u) * C(d,2) + pair_index`.
#[inline]
pub fn dimer_slot(d: u32, dm: &Dimer) -> usize {
    let (i, j) = dm.bits();
    rank(dm.u) as usize * (d * (d - 1) / 2) as usize + pair_index(d, i, j) as usize
}

/// XOR masks of weight exactly 2 in `d` coordinates.
fn weight2_masks(d: u32) -> Vec<u32> {
    let mut out = Vec::new();
    for i in 0..d {
        for j in i + 1..d {
            out.push((1 << i) | (1 << j));
        }
    }
    out
}

fn weight4_masks(d: u32) -> Vec<u32> {
    (0u32..1 << d).filter(|m| m.count_ones() == 4).collect()
}

/// Splits `s` into 2-linked components. Each component is sorted, and
/// components are ordered by their smallest vertex.
pub fn two_linked_components(d: u32, s: &[u32], side: Side) -> Result<Vec<Vec<u32>>> {
    check_side(d, s, side)?;
    let set: HashSet<u32> = s.iter().copied().collect();
    let links = weight2_masks(d);
    let mut seen: HashSet<u32> = HashSet::with_capacity(set.len());
    let mut start: Vec<u32> = set.iter().copied().collect();
    start.sort_unstable();
    let mut out = Vec::new();
    for &v in &start {
        if !seen.insert(v) {
            continue;
        }
        let mut comp = vec![v];
        let mut stack = vec![v];
        while let Some(x) = stack.pop() {
            for &m in &links {
                let y = x ^ m;
                if set.contains(&y) && seen.insert(y) {
                    comp.push(y);
                    stack.push(y);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    Ok(out)
}

/// Whether `s` is nonempty and 2-linked.
pub fn is_two_linked(d: u32, s: &[u32], side: Side) -> Result<bool> {
    Ok(!s.is_empty() && two_linked_components(d, s, side)?.len() == 1)
}

/// `[A]`: all side vertices whose unpercolated neighbourhood lies inside that of `A`.
pub fn closure(d: u32, a: &[u32], side: Side) -> Result<Vec<u32>> {
    check_side(d, a, side)?;
    if a.is_empty() {
        return Err(Error::Contract("closure of the empty set".into()));
    }
    let nbhd: HashSet<u32> = a
        .iter()
        .flat_map(|&v| (0..d).map(move |i| v ^ (1 << i)))
        .collect();
    // any v with N(v) inside N(A) is within distance 2 of A
    let mut cand: Vec<u32> = a.to_vec();
    let links = weight2_masks(d);
    for &v in a {
        cand.extend(links.iter().map(|m| v ^ m));
    }
    cand.sort_unstable();
    cand.dedup();
    cand.retain(|&v| (0..d).all(|i| nbhd.contains(&(v ^ (1 << i)))));
    Ok(cand)
}

/// Whether a closure of this size meets the polymer bound `|[p]| <= 3/4 * 2^(d-1)`.
#[inline]
fn closure_fits(d: u32, size: usize) -> bool {
    4 * size as u64 <= 3 * side_len(d) as u64
}

/// Whether `p` is a polymer: 2-linked with a small enough closure.
pub fn is_polymer(d: u32, p: &[u32], side: Side) -> Result<bool> {
    if !is_two_linked(d, p, side)? {
        return Ok(false);
    }
    Ok(closure_fits(d, closure(d, p, side)?.len()))
}

/// Whether every 2-linked component of `s` is a polymer.
pub fn is_decomposable(d: u32, s: &[u32], side: Side) -> Result<bool> {
    for comp in two_linked_components(d, s, side)? {
        if !closure_fits(d, closure(d, &comp, side)?.len()) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Whether `s` is decomposable into polymers of size at most `k`.
pub fn is_decomposable_le(d: u32, s: &[u32], side: Side, k: usize) -> Result<bool> {
    for comp in two_linked_components(d, s, side)? {
        if comp.len() > k || !closure_fits(d, closure(d, &comp, side)?.len()) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// No two members of `s` are 2-linked (and none coincide).
pub fn is_well_separated(s: &[u32]) -> bool {
    s.iter()
        .enumerate()
        .all(|(a, &x)| s[a + 1..].iter().all(|&y| (x ^ y).count_ones() > 2))
}

/// Bitmask geometry for sides of at most 64 vertices (`d <= 7`).
#[derive(Debug, Clone)]
pub struct SideMasks {
    pub d: u32,
    pub side: Side,
    /// Same-side ranks at Hamming distance 2.
    pub link: Vec<u64>,
    /// Unpercolated neighbourhoods as opposite-side rank masks.
    pub cube_nb: Vec<u64>,
}

impl SideMasks {
    pub fn new(d: u32, side: Side) -> Self {
        assert!((1..=7).contains(&d));
        let links = weight2_masks(d);
        let mut link = Vec::new();
        let mut cube_nb = Vec::new();
        for v in side.vertices(d) {
            link.push(links.iter().fold(0u64, |m, x| m | 1 << rank(v ^ x)));
            cube_nb.push((0..d).fold(0u64, |m, i| m | 1 << rank(v ^ (1 << i))));
        }
        Self {
            d,
            side,
            link,
            cube_nb,
        }
    }

    /// Components of a rank mask under 2-linkage.
    pub fn components(&self, mask: u64) -> Vec<u64> {
        let mut rest = mask;
        let mut out = Vec::new();
        while rest != 0 {
            let mut comp = rest & rest.wrapping_neg();
            let mut frontier = comp;
            while frontier != 0 {
                let r = frontier.trailing_zeros() as usize;
                frontier &= frontier - 1;
                let new = self.link[r] & mask & !comp;
                comp |= new;
                frontier |= new;
            }
            rest &= !comp;
            out.push(comp);
        }
        out
    }

    pub fn closure_size(&self, mask: u64) -> u32 {
        let nb = self.nbhd(mask);
        self.cube_nb.iter().filter(|&&m| m & !nb == 0).count() as u32
    }

    fn nbhd(&self, mask: u64) -> u64 {
        let mut nb = 0;
        let mut m = mask;
        while m != 0 {
            nb |= self.cube_nb[m.trailing_zeros() as usize];
            m &= m - 1;
        }
        nb
    }

    pub fn is_polymer_mask(&self, comp: u64) -> bool {
        closure_fits(self.d, self.closure_size(comp) as usize)
    }
}

/// Exact partition functions of one side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionFunctions {
    pub k: usize,
    /// Polymer configurations with components of size at most `k`.
    pub z_le_k: DyadicWeight,
    pub z_tilde_le_k: DyadicWeight,
    /// Configurations whose components all have size exactly `k`.
    pub z_k: DyadicWeight,
    pub z_tilde_k: DyadicWeight,
    /// Well-separated singleton configurations.
    pub z_1: DyadicWeight,
    pub z_tilde_1: DyadicWeight,
    /// All polymer configurations.
    pub z: DyadicWeight,
    /// Tilde weights summed over every subset of the side.
    pub z_tilde_enumerated: DyadicWeight,
    /// `prod_v (1 + phi_v)`.
    pub z_tilde: DyadicWeight,
}

/// Enumerates every subset of the side (`d <= 5`) and sorts it into the
/// polymer partition functions. Polymer weights use `N` of each component.
pub fn partition_functions(h: &PercolatedHypercube, side: Side, k: usize) -> Result<PartitionFunctions> {
    let d = h.d();
    check_dim("partition_functions", d, 1, MAX_D_ENUM)?;
    if k == 0 {
        return Err(Error::Contract("component size bound k must be >= 1".into()));
    }
    let geo = SideMasks::new(d, side);
    let nb = SideNeighbors::new(h, side);
    let ret: Vec<u64> = nb.masks();
    let deg: Vec<u32> = side.vertices(d).map(|v| h.degree(v)).collect();
    let n = nb.len() as u32;
    let tmax = (d * side_len(d)) as usize;

    #[derive(Clone, Copy, PartialEq)]
    enum Class {
        Skip,
        Take,
    }
    let mut polymer_cache: HashMap<u64, bool> = HashMap::new();
    // histograms indexed by the exponent of 2^(-x)
    let mut h_le = vec![0u64; tmax + 1];
    let mut ht_le = vec![0u64; tmax + 1];
    let mut h_k = vec![0u64; tmax + 1];
    let mut ht_k = vec![0u64; tmax + 1];
    let mut h_1 = vec![0u64; tmax + 1];
    let mut ht_1 = vec![0u64; tmax + 1];
    let mut h_all = vec![0u64; tmax + 1];
    let mut ht_enum = vec![0u64; tmax + 1];

    walk_subsets(&nb, 0..1u64 << n, |mask, _ns| {
        let mut tilde = 0usize;
        let mut m = mask;
        while m != 0 {
            tilde += deg[m.trailing_zeros() as usize] as usize;
            m &= m - 1;
        }
        ht_enum[tilde] += 1;

        let comps = geo.components(mask);
        let mut weight = 0usize;
        let mut max_len = 0;
        let mut all_k = true;
        let mut ok = Class::Take;
        for &c in &comps {
            let poly = *polymer_cache
                .entry(c)
                .or_insert_with(|| geo.is_polymer_mask(c));
            if !poly {
                ok = Class::Skip;
                break;
            }
            let mut cm = c;
            let mut nbm = 0u64;
            while cm != 0 {
                nbm |= ret[cm.trailing_zeros() as usize];
                cm &= cm - 1;
            }
            weight += nbm.count_ones() as usize;
            let len = c.count_ones() as usize;
            max_len = max_len.max(len);
            all_k &= len == k;
        }
        if ok == Class::Skip {
            return;
        }
        h_all[weight] += 1;
        if max_len <= 1 {
            h_1[weight] += 1;
            ht_1[tilde] += 1;
        }
        if max_len <= k {
            h_le[weight] += 1;
            ht_le[tilde] += 1;
        }
        if all_k {
            h_k[weight] += 1;
            ht_k[tilde] += 1;
        }
    });

    Ok(PartitionFunctions {
        k,
        z_le_k: DyadicWeight::from_histogram(&h_le),
        z_tilde_le_k: DyadicWeight::from_histogram(&ht_le),
        z_k: DyadicWeight::from_histogram(&h_k),
        z_tilde_k: DyadicWeight::from_histogram(&ht_k),
        z_1: DyadicWeight::from_histogram(&h_1),
        z_tilde_1: DyadicWeight::from_histogram(&ht_1),
        z: DyadicWeight::from_histogram(&h_all),
        z_tilde_enumerated: DyadicWeight::from_histogram(&ht_enum),
        z_tilde: z_tilde_exact(h, side),
    })
}

/// `prod_v (1 + 2^(-N(v)))` exactly.
pub fn z_tilde_exact(h: &PercolatedHypercube, side: Side) -> DyadicWeight {
    let mut acc = DyadicWeight::one();
    for v in side.vertices(h.d()) {
        let nv = h.degree(v) as u64;
        let f = &DyadicWeight::one() + &DyadicWeight::pow2_neg(nv);
        acc = &acc * &f;
    }
    acc
}

/// `ln prod_v (1 + 2^(-N(v)))`, for any `d`.
pub fn ln_z_tilde(h: &PercolatedHypercube, side: Side) -> f64 {
    let mut s = crate::stats::KahanSum::default();
    for v in side.vertices(h.d()) {
        s.add((-(h.degree(v) as f64)).exp2().ln_1p());
    }
    s.value()
}

/// `(N(u), N(v), c)` for a dimer, where `c` counts the pivots joined to both
/// endpoints by retained edges, so that `N({u,v}) = N(u) + N(v) - c`.
#[inline]
pub fn dimer_degrees(h: &PercolatedHypercube, dm: &Dimer) -> (u32, u32, u32) {
    let (i, j) = dm.bits();
    let mu = h.retained_mask(dm.u);
    let mv = h.retained_mask(dm.v);
    let c = (mu >> i & mv >> j & 1) + (mu >> j & mv >> i & 1);
    (mu.count_ones(), mv.count_ones(), c)
}

/// `phi_d = 2^(-N({u,v}))` as a float.
pub fn phi_dimer(h: &PercolatedHypercube, dm: &Dimer) -> f64 {
    let (a, b, c) = dimer_degrees(h, dm);
    (-((a + b - c) as f64)).exp2()
}

/// `phi~_d = 2^(-N(u)-N(v))` as a float.
pub fn phi_tilde_dimer(h: &PercolatedHypercube, dm: &Dimer) -> f64 {
    let (a, b, _) = dimer_degrees(h, dm);
    (-((a + b) as f64)).exp2()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeltaSums {
    pub delta: DyadicWeight,
    pub delta_tilde: DyadicWeight,
}

impl DeltaSums {
    pub fn delta_f64(&self) -> f64 {
        self.delta.to_f64()
    }
    pub fn delta_tilde_f64(&self) -> f64 {
        self.delta_tilde.to_f64()
    }
}

/// Exponent histograms of `phi_d` and `phi~_d` over the dimers adjacent to `u`
/// with `u` as the smaller endpoint.
fn dimer_histograms_at(h: &PercolatedHypercube, u: u32, hist: &mut [u64], hist_t: &mut [u64]) {
    let d = h.d();
    let mu = h.retained_mask(u);
    let a = mu.count_ones();
    for j in 1..d {
        if u >> j & 1 == 1 {
            continue;
        }
        for i in 0..j {
            let v = u ^ (1 << i) ^ (1 << j);
            let mv = h.retained_mask(v);
            let b = mv.count_ones();
            let c = (mu >> i & mv >> j & 1) + (mu >> j & mv >> i & 1);
            hist[(a + b - c) as usize] += 1;
            hist_t[(a + b) as usize] += 1;
        }
    }
}

/// `Delta = sum_d phi_d` and `Delta~ = sum_d phi~_d` over all dimers of the side, exactly.
pub fn delta_sums(h: &PercolatedHypercube, side: Side) -> Result<DeltaSums> {
    let d = h.d();
    check_dim("delta_sums", d, 1, MAX_D_DIMER)?;
    let len = 2 * d as usize + 1;
    let (hist, hist_t) = (0..side_len(d))
        .into_par_iter()
        .fold(
            || (vec![0u64; len], vec![0u64; len]),
            |(mut a, mut b), r| {
                dimer_histograms_at(h, side.vertex(r), &mut a, &mut b);
                (a, b)
            },
        )
        .reduce(
            || (vec![0u64; len], vec![0u64; len]),
            |(mut a, mut b), (x, y)| {
                a.iter_mut().zip(x).for_each(|(p, q)| *p += q);
                b.iter_mut().zip(y).for_each(|(p, q)| *p += q);
                (a, b)
            },
        );
    Ok(DeltaSums {
        delta: DyadicWeight::from_histogram(&hist),
        delta_tilde: DyadicWeight::from_histogram(&hist_t),
    })
}

/// Side ranks within Hamming distance 2 of `s` (including `s`), as a bitset.
fn ball2(d: u32, s: &[u32]) -> Vec<u64> {
    let mut bits = vec![0u64; (side_len(d) as usize).div_ceil(64)];
    let links = weight2_masks(d);
    for &v in s {
        let r = rank(v) as usize;
        bits[r / 64] |= 1 << (r % 64);
        for m in &links {
            let r = rank(v ^ m) as usize;
            bits[r / 64] |= 1 << (r % 64);
        }
    }
    bits
}

#[inline]
fn bit(bits: &[u64], r: u32) -> bool {
    bits[r as usize / 64] >> (r % 64) & 1 == 1
}

/// `d ~ S`: the dimer meets `S` or shares an unpercolated neighbour with it.
pub fn dimer_adjacent(dm: &Dimer, s: &[u32]) -> bool {
    s.iter().any(|&x| {
        let a = (x ^ dm.u).count_ones();
        let b = (x ^ dm.v).count_ones();
        a == 0 || a == 2 || b == 0 || b == 2
    })
}

/// Dimers adjacent to `s`, in canonical order.
pub fn adjacent_dimers(d: u32, side: Side, s: &[u32]) -> Result<Vec<Dimer>> {
    check_side(d, s, side)?;
    let ball = ball2(d, s);
    let links = weight2_masks(d);
    let mut out = Vec::new();
    for (w, &word) in ball.iter().enumerate() {
        let mut m = word;
        while m != 0 {
            let r = (w * 64) as u32 + m.trailing_zeros();
            m &= m - 1;
            let x = side.vertex(r);
            for l in &links {
                let y = x ^ l;
                // each dimer with an endpoint in the ball, reported from its smaller
                // in-ball endpoint
                let other_in = bit(&ball, rank(y));
                if other_in && y < x {
                    continue;
                }
                out.push(Dimer::new(x, y).unwrap());
            }
        }
    }
    out.sort_by_key(|dm| (dm.u, dm.bits()));
    Ok(out)
}

/// `Adj(S) = sum_{d ~ S} phi_d` and the tilde version, exactly.
pub fn adjacency(h: &PercolatedHypercube, side: Side, s: &[u32]) -> Result<(DyadicWeight, DyadicWeight)> {
    let d = h.d();
    check_dim("adjacency", d, 1, MAX_D_DIMER)?;
    let len = 2 * d as usize + 1;
    let mut hist = vec![0u64; len];
    let mut hist_t = vec![0u64; len];
    for dm in adjacent_dimers(d, side, s)? {
        let (a, b, c) = dimer_degrees(h, &dm);
        hist[(a + b - c) as usize] += 1;
        hist_t[(a + b) as usize] += 1;
    }
    Ok((
        DyadicWeight::from_histogram(&hist),
        DyadicWeight::from_histogram(&hist_t),
    ))
}

/// Checks that `s1` is a configuration of singleton polymers.
pub fn check_singletons(d: u32, s1: &[u32], side: Side) -> Result<()> {
    check_side(d, s1, side)?;
    let mut sorted = s1.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Contract("repeated vertex in singleton set".into()));
    }
    if !is_well_separated(&sorted) {
        return Err(Error::Contract("singleton set is not well separated".into()));
    }
    if !s1.is_empty() && !closure_fits(d, 1) {
        return Err(Error::Contract(format!("singletons are not polymers at d={d}")));
    }
    Ok(())
}

/// Dimers that can be added to the singleton configuration `s1`.
pub fn compat2(h: &PercolatedHypercube, side: Side, s1: &[u32]) -> Result<Vec<Dimer>> {
    let d = h.d();
    check_dim("compat2", d, 1, MAX_D_DIMER)?;
    check_singletons(d, s1, side)?;
    let ball = ball2(d, s1);
    Ok(dimers(d, side)
        .filter(|dm| !bit(&ball, rank(dm.u)) && !bit(&ball, rank(dm.v)))
        .collect())
}

/// A greedy colouring of the dimers of one side into classes whose members are
/// pairwise at distance at least 3 in the 2-link graph.
#[derive(Debug, Clone)]
pub struct LayerPartition {
    pub d: u32,
    pub side: Side,
    pub classes: Vec<Vec<Dimer>>,
    slot_layer: Vec<u32>,
    pub max_conflict_degree: usize,
}

impl LayerPartition {
    pub fn layer_of(&self, dm: &Dimer) -> u32 {
        self.slot_layer[dimer_slot(self.d, dm)]
    }
}

/// Dimers conflict when some endpoints are within Hamming distance 4.
pub fn dimers_conflict(a: &Dimer, b: &Dimer) -> bool {
    [a.u, a.v]
        .iter()
        .any(|&x| [b.u, b.v].iter().any(|&y| (x ^ y).count_ones() <= 4))
}

fn build_layers(d: u32, side: Side) -> LayerPartition {
    let n = side_len(d) as usize;
    let pairs = (d * (d - 1) / 2) as usize;
    let mut slot_layer = vec![u32::MAX; n * pairs];
    let mut ball: Vec<u32> = vec![0];
    ball.extend(weight2_masks(d));
    ball.extend(weight4_masks(d));
    // colours of already-coloured dimers at each vertex
    let mut at_vertex: Vec<Vec<u32>> = vec![Vec::new(); n];
    // dimers (by slot) at each vertex, to measure conflict degree
    let mut stamp: Vec<u32> = Vec::new();
    let mut classes: Vec<Vec<Dimer>> = Vec::new();
    let mut tick = 0u32;
    for dm in dimers(d, side) {
        tick += 1;
        for &end in &[dm.u, dm.v] {
            for &m in &ball {
                for &c in &at_vertex[rank(end ^ m) as usize] {
                    stamp[c as usize] = tick;
                }
            }
        }
        let colour = (0..stamp.len()).find(|&c| stamp[c] != tick).unwrap_or(stamp.len());
        if colour == stamp.len() {
            stamp.push(0);
            classes.push(Vec::new());
        }
        classes[colour].push(dm);
        slot_layer[dimer_slot(d, &dm)] = colour as u32;
        at_vertex[rank(dm.u) as usize].push(colour as u32);
        at_vertex[rank(dm.v) as usize].push(colour as u32);
    }
    // conflict degree: dimers other than dm with an endpoint in ball(u) or ball(v)
    let links = weight2_masks(d);
    let mut max_conflict_degree = 0;
    let mut seen: HashSet<(u32, u32)> = HashSet::new();
    for dm in dimers(d, side) {
        seen.clear();
        for &end in &[dm.u, dm.v] {
            for &m in &ball {
                let x = end ^ m;
                for l in &links {
                    let y = x ^ l;
                    seen.insert((x.min(y), x.max(y)));
                }
            }
        }
        max_conflict_degree = max_conflict_degree.max(seen.len() - 1);
    }
    LayerPartition {
        d,
        side,
        classes,
        slot_layer,
        max_conflict_degree,
    }
}

/// Layer classes for `(d, side)`, computed once per process.
pub fn layer_partition(d: u32, side: Side) -> Result<Arc<LayerPartition>> {
    check_dim("layer_partition", d, 2, MAX_D_BREAKDOWN)?;
    static CACHE: OnceLock<Mutex<HashMap<(u32, Side), Arc<LayerPartition>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(lp) = cache.lock().unwrap().get(&(d, side)) {
        return Ok(lp.clone());
    }
    let lp = Arc::new(build_layers(d, side));
    cache.lock().unwrap().insert((d, side), lp.clone());
    Ok(lp)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Status {
    /// `u` in `S`.
    O1,
    /// `v` in `S`, `u` not.
    O2,
    /// Disjoint from `S` but 2-linked to it.
    N,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Cell {
    pub a: u32,
    pub b: u32,
    pub layer: u32,
    pub status: Status,
}

#[derive(Debug, Clone)]
pub struct AdjBreakdown {
    pub cells: BTreeMap<Cell, u64>,
    /// Status-N counts refined by the degree of the smallest witness in `S`.
    pub n_by_witness: BTreeMap<(u32, u32, u32, u32), u64>,
    pub adj: DyadicWeight,
    pub adj_tilde: DyadicWeight,
}

impl AdjBreakdown {
    pub fn total(&self) -> u64 {
        self.cells.values().sum()
    }

    /// `sum 4 * 2^(-a-b)` over all counted dimers; bounds `Adj(S)` from above.
    pub fn type_bound(&self) -> DyadicWeight {
        let mut acc = DyadicWeight::zero();
        for (cell, &n) in &self.cells {
            let w = DyadicWeight::from_integer(4 * n);
            acc += &(&w * &DyadicWeight::pow2_neg((cell.a + cell.b) as u64));
        }
        acc
    }
}

pub fn adj_breakdown(h: &PercolatedHypercube, side: Side, s: &[u32]) -> Result<AdjBreakdown> {
    let d = h.d();
    check_dim("adj_breakdown", d, 2, MAX_D_BREAKDOWN)?;
    let layers = layer_partition(d, side)?;
    let mut sorted = s.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut cells = BTreeMap::new();
    let mut n_by_witness = BTreeMap::new();
    let len = 2 * d as usize + 1;
    let mut hist = vec![0u64; len];
    let mut hist_t = vec![0u64; len];
    for dm in adjacent_dimers(d, side, &sorted)? {
        let (a, b, c) = dimer_degrees(h, &dm);
        hist[(a + b - c) as usize] += 1;
        hist_t[(a + b) as usize] += 1;
        let layer = layers.layer_of(&dm);
        let status = if sorted.binary_search(&dm.u).is_ok() {
            Status::O1
        } else if sorted.binary_search(&dm.v).is_ok() {
            Status::O2
        } else {
            Status::N
        };
        *cells.entry(Cell { a, b, layer, status }).or_insert(0) += 1;
        if status == Status::N {
            let w = *sorted
                .iter()
                .find(|&&x| (x ^ dm.u).count_ones() == 2 || (x ^ dm.v).count_ones() == 2)
                .expect("adjacent dimer without witness");
            *n_by_witness.entry((a, b, layer, h.degree(w))).or_insert(0) += 1;
        }
    }
    Ok(AdjBreakdown {
        cells,
        n_by_witness,
        adj: DyadicWeight::from_histogram(&hist),
        adj_tilde: DyadicWeight::from_histogram(&hist_t),
    })
}

/// The finite inequalities behind the dimer-separation estimate, for one
/// singleton configuration `S1`.
#[derive(Debug, Clone, Serialize)]
pub struct DimerSandwich {
    /// `sum phi_d` over dimers compatible with `S1`.
    pub a: f64,
    /// `sum phi_d^2` over all dimers.
    pub b: f64,
    /// `prod (1 + phi_d)` over dimers compatible with `S1`.
    pub product: f64,
    /// Sum over pairwise compatible dimer collections inside compat2.
    pub collections: f64,
    /// `sum phi_d phi_d'` over unordered incompatible pairs inside compat2.
    pub cross: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
    pub collections_ok: bool,
    pub cross_ok: bool,
}

impl DimerSandwich {
    pub fn holds(&self) -> bool {
        self.lower_ok && self.upper_ok && self.collections_ok && self.cross_ok
    }
}

/// Two dimers are compatible when their union is not 2-linked.
pub fn dimers_compatible(x: &Dimer, y: &Dimer) -> bool {
    [x.u, x.v]
        .iter()
        .all(|&p| [y.u, y.v].iter().all(|&q| (p ^ q).count_ones() > 2))
}

pub fn dimer_sandwich(h: &PercolatedHypercube, side: Side, s1: &[u32]) -> Result<DimerSandwich> {
    let d = h.d();
    check_dim("dimer_sandwich", d, 4, MAX_D_ENUM)?;
    let comp = compat2(h, side, s1)?;
    if comp.len() > 128 {
        return Err(Error::Contract("too many compatible dimers".into()));
    }
    let phi: Vec<f64> = comp.iter().map(|dm| phi_dimer(h, dm)).collect();
    let a: f64 = phi.iter().sum();
    let b: f64 = dimers(d, side).map(|dm| phi_dimer(h, &dm).powi(2)).sum();
    let product: f64 = phi.iter().map(|x| 1.0 + x).product();
    let n = comp.len();
    let mut conflict = vec![0u128; n];
    let mut cross = 0.0;
    for x in 0..n {
        for y in x + 1..n {
            if !dimers_compatible(&comp[x], &comp[y]) {
                conflict[x] |= 1 << y;
                conflict[y] |= 1 << x;
                cross += phi[x] * phi[y];
            }
        }
    }
    // sum over independent sets of the conflict graph of prod phi
    fn indep(from: usize, allowed: u128, conflict: &[u128], phi: &[f64]) -> f64 {
        let mut total = 1.0;
        let mut m = allowed >> from << from;
        while m != 0 {
            let x = m.trailing_zeros() as usize;
            m &= m - 1;
            total += phi[x] * indep(x + 1, allowed & !conflict[x], conflict, phi);
        }
        total
    }
    let all = if n == 128 { u128::MAX } else { (1u128 << n) - 1 };
    let collections = indep(0, all, &conflict, &phi);
    let tol = 1e-12 * product.max(1.0);
    Ok(DimerSandwich {
        a,
        b,
        product,
        collections,
        cross,
        lower_ok: (a - b / 2.0).exp() <= product + tol,
        upper_ok: product <= a.exp() + tol,
        collections_ok: collections <= product + tol,
        cross_ok: product - collections <= cross * a.exp() + tol,
    })
}
