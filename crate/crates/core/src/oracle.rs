//! Exact ground truth for small cubes: independent-set counts, the law of
//! `I ∩ side` under the uniform independent set, and an exact sampler.
//!
//! Everything here is integer arithmetic. An independent set is an even part
//! `S` plus any subset of the odd vertices outside `N(S)`, so
//! `i = sum_S 2^(2^(d-1) - N(S))`.

use crate::error::{check_dim, Result};
use crate::gray::{gray, mask_vertices, walk_subsets, CoverageTracker, SideNeighbors};
use crate::lattice::{side_len, PercolatedHypercube, Side};
use crate::polymer::{self, SideMasks};
use crate::rng::CounterRng;
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Serialize, Serializer};

pub const MAX_D_BRUTE: u32 = 4;
pub const MAX_D_EVENSUM: u32 = 6;
pub const MAX_D_LAW: u32 = 5;

fn as_decimal<S: Serializer>(v: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_str_radix(10))
}

/// `i(Q_{d,p})` with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactCount {
    #[serde(serialize_with = "as_decimal")]
    pub value: BigUint,
    pub d: u32,
    pub p: f64,
    pub seed: u64,
}

impl ExactCount {
    fn new(h: &PercolatedHypercube, value: BigUint) -> Self {
        Self {
            value,
            d: h.d(),
            p: h.p(),
            seed: h.seed(),
        }
    }

    pub fn log2(&self) -> f64 {
        log2_big(&self.value)
    }
}

/// Retained neighbours of every vertex as a vertex bitmask (`d <= 5`).
fn vertex_adjacency(h: &PercolatedHypercube) -> Vec<u32> {
    (0..h.num_vertices())
        .map(|v| h.neighbors(v).fold(0u32, |m, w| m | 1 << w))
        .collect()
}

/// Counts independent sets by testing every subset of `V(Q_d)`.
pub fn count_bruteforce(h: &PercolatedHypercube) -> Result<ExactCount> {
    check_dim("count_bruteforce", h.d(), 1, MAX_D_BRUTE)?;
    let adj = vertex_adjacency(h);
    let n = h.num_vertices();
    let count = (0u32..1 << n)
        .filter(|&s| {
            let mut m = s;
            while m != 0 {
                let v = m.trailing_zeros();
                if adj[v as usize] & s != 0 {
                    return false;
                }
                m &= m - 1;
            }
            true
        })
        .count();
    Ok(ExactCount::new(h, BigUint::from(count)))
}

/// Counts independent sets as `sum_{S ⊆ Even} 2^(2^(d-1) - N(S))`.
pub fn count_evensum(h: &PercolatedHypercube) -> Result<ExactCount> {
    count_sidesum(h, Side::Even)
}

/// The same sum taken over subsets of either side.
pub fn count_sidesum(h: &PercolatedHypercube, side: Side) -> Result<ExactCount> {
    let d = h.d();
    check_dim("count_evensum", d, 1, MAX_D_EVENSUM)?;
    let value = if d <= 5 {
        let hist = neighborhood_histogram(h, side);
        let n = side_len(d) as usize;
        hist.iter()
            .enumerate()
            .fold(BigUint::zero(), |acc, (k, &c)| acc + (BigUint::from(c) << (n - k)))
    } else {
        split_sum_d6(h, side)
    };
    Ok(ExactCount::new(h, value))
}

/// `hist[k]` = number of subsets `S` of the side with `N(S) = k` (`d <= 5`).
pub fn neighborhood_histogram(h: &PercolatedHypercube, side: Side) -> Vec<u64> {
    let nb = SideNeighbors::new(h, side);
    let mut hist = vec![0u64; nb.len() + 1];
    walk_subsets(&nb, 0..1u64 << nb.len(), |_, ns| hist[ns as usize] += 1);
    hist
}

/// `d = 6`: the 32 side vertices split into a low and a high half of 16.
/// The high half is walked in Gray order with coverage counters; for each
/// high subset the 2^16 low subsets are summed against a precomputed table of
/// their neighbourhood masks.
fn split_sum_d6(h: &PercolatedHypercube, side: Side) -> BigUint {
    let nb = SideNeighbors::new(h, side);
    let masks = nb.masks();
    assert_eq!(masks.len(), 32);
    let lo_masks: Vec<u32> = masks[..16].iter().map(|&m| m as u32).collect();
    let mut table = vec![0u32; 1 << 16];
    for m in 1usize..1 << 16 {
        table[m] = table[m & (m - 1)] | lo_masks[m.trailing_zeros() as usize];
    }
    const BLOCKS: u64 = 64;
    let span = (1u64 << 16) / BLOCKS;
    let total: u128 = (0..BLOCKS)
        .into_par_iter()
        .map(|b| {
            let mut cov = CoverageTracker::new(32);
            let mut counts = [0u8; 32];
            let mut hi_nb = 0u32;
            let mut toggle = |r: usize, add: bool, cov: &mut CoverageTracker, hi_nb: &mut u32| {
                let list = nb.of(16 + r);
                if add {
                    cov.add(list);
                    for &w in list {
                        counts[w as usize] += 1;
                        *hi_nb |= 1 << w;
                    }
                } else {
                    cov.remove(list);
                    for &w in list {
                        counts[w as usize] -= 1;
                        if counts[w as usize] == 0 {
                            *hi_nb &= !(1 << w);
                        }
                    }
                }
            };
            let start = b * span;
            let mut mask = gray(start);
            let mut m = mask;
            while m != 0 {
                toggle(m.trailing_zeros() as usize, true, &mut cov, &mut hi_nb);
                m &= m - 1;
            }
            let mut acc: u128 = 0;
            for k in start..start + span {
                if k > start {
                    let r = k.trailing_zeros() as usize;
                    mask ^= 1 << r;
                    toggle(r, mask >> r & 1 == 1, &mut cov, &mut hi_nb);
                }
                debug_assert_eq!(cov.covered(), hi_nb.count_ones());
                let mut inner: u64 = 0;
                for &t in &table {
                    inner += 1u64 << (32 - (hi_nb | t).count_ones());
                }
                acc += inner as u128;
            }
            acc
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    BigUint::from(total)
}

/// Whether every 2-linked component of `s` is a polymer.
pub fn is_polymer_decomposable(d: u32, s: &[u32], side: Side) -> Result<bool> {
    polymer::is_decomposable(d, s, side)
}

/// The exact law of `I ∩ side` for a uniform independent set `I`:
/// `P[S] = 2^(2^(d-1) - N(S)) / i`.
#[derive(Debug, Clone)]
pub struct DefectLaw {
    pub d: u32,
    pub side: Side,
    /// Unnormalised weight of each subset mask (bit `r` = rank `r`).
    weights: Vec<u64>,
    total: u64,
}

impl DefectLaw {
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn weight(&self, mask: u64) -> u64 {
        self.weights[mask as usize]
    }

    pub fn support(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.weights.len() as u64).filter(|&m| self.weights[m as usize] > 0)
    }

    pub fn support_size(&self) -> usize {
        self.support().count()
    }

    pub fn probability(&self, mask: u64) -> BigRational {
        BigRational::new(
            BigInt::from(self.weights[mask as usize]),
            BigInt::from(self.total),
        )
    }

    pub fn probability_f64(&self, mask: u64) -> f64 {
        self.weights[mask as usize] as f64 / self.total as f64
    }

    /// Sum of all atoms as an exact rational.
    pub fn total_probability(&self) -> BigRational {
        let s: u64 = self.weights.iter().sum();
        BigRational::new(BigInt::from(s), BigInt::from(self.total))
    }

    /// The law conditioned on `S` being polymer-decomposable.
    pub fn conditional_decomposable(&self) -> DefectLaw {
        let geo = SideMasks::new(self.d, self.side);
        let weights: Vec<u64> = self
            .weights
            .iter()
            .enumerate()
            .map(|(m, &w)| {
                let ok = geo
                    .components(m as u64)
                    .into_iter()
                    .all(|c| geo.is_polymer_mask(c));
                if ok {
                    w
                } else {
                    0
                }
            })
            .collect();
        let total = weights.iter().sum();
        DefectLaw {
            d: self.d,
            side: self.side,
            weights,
            total,
        }
    }

    /// Exact draw: a uniform integer below the total picks the atom.
    pub fn sample(&self, rng: &CounterRng, counter: u64) -> u64 {
        let mut x = rng.below(counter, self.total);
        for (m, &w) in self.weights.iter().enumerate() {
            if x < w {
                return m as u64;
            }
            x -= w;
        }
        unreachable!()
    }

    pub fn sampler(&self) -> LawSampler<'_> {
        let mut cum = Vec::with_capacity(self.weights.len());
        let mut acc = 0u64;
        for &w in &self.weights {
            acc += w;
            cum.push(acc);
        }
        LawSampler { law: self, cum }
    }
}

/// Repeated exact draws from a [`DefectLaw`] by binary search.
pub struct LawSampler<'a> {
    law: &'a DefectLaw,
    cum: Vec<u64>,
}

impl LawSampler<'_> {
    pub fn sample(&self, rng: &CounterRng, counter: u64) -> u64 {
        let x = rng.below(counter, self.law.total);
        self.cum.partition_point(|&c| c <= x) as u64
    }
}

pub fn defect_distribution(h: &PercolatedHypercube, side: Side) -> Result<DefectLaw> {
    let d = h.d();
    check_dim("defect_distribution", d, 1, MAX_D_LAW)?;
    let nb = SideNeighbors::new(h, side);
    let n = nb.len() as u32;
    let mut weights = vec![0u64; 1 << n];
    walk_subsets(&nb, 0..1u64 << n, |mask, ns| {
        weights[mask as usize] = 1u64 << (n - ns);
    });
    let total = weights.iter().sum();
    Ok(DefectLaw {
        d,
        side,
        weights,
        total,
    })
}

/// Exactly uniform independent sets, for repeated draws.
pub struct ExactSampler<'a> {
    h: &'a PercolatedHypercube,
    law: DefectLaw,
    cum: Vec<u64>,
    rng: CounterRng,
}

impl<'a> ExactSampler<'a> {
    pub fn new(h: &'a PercolatedHypercube, seed: u64) -> Result<Self> {
        let law = defect_distribution(h, Side::Even)?;
        let cum = law.sampler().cum;
        Ok(Self {
            h,
            law,
            cum,
            rng: CounterRng::new(seed).substream(0x4558_4143),
        })
    }

    /// The `trial`-th draw, as a sorted vertex list.
    pub fn sample(&self, trial: u64) -> Vec<u32> {
        let t = self.rng.substream(trial);
        let x = t.below(0, self.law.total);
        let mask = self.cum.partition_point(|&c| c <= x) as u64;
        let even = mask_vertices(mask, Side::Even);
        let mut blocked = vec![false; self.h.num_vertices() as usize];
        for &v in &even {
            for w in self.h.neighbors(v) {
                blocked[w as usize] = true;
            }
        }
        let fill = t.substream(1);
        let mut out = even;
        for w in Side::Odd.vertices(self.h.d()) {
            if !blocked[w as usize] && fill.word(w as u64) >> 63 == 1 {
                out.push(w);
            }
        }
        out.sort_unstable();
        out
    }
}

pub fn sample_uniform_exact(h: &PercolatedHypercube, seed: u64) -> Result<Vec<u32>> {
    Ok(ExactSampler::new(h, seed)?.sample(0))
}

/// Independent sets sorted by which sides meet a polymer-decomposable set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Accounting {
    #[serde(serialize_with = "as_decimal")]
    pub total: BigUint,
    #[serde(serialize_with = "as_decimal")]
    pub n_even: BigUint,
    #[serde(serialize_with = "as_decimal")]
    pub n_odd: BigUint,
    #[serde(serialize_with = "as_decimal")]
    pub n_both: BigUint,
    #[serde(serialize_with = "as_decimal")]
    pub n_neither: BigUint,
}

impl Accounting {
    /// `i = N_even + N_odd - N_both + N_neither`.
    pub fn balances(&self) -> bool {
        &self.n_even + &self.n_odd + &self.n_neither == &self.total + &self.n_both
    }
}

/// Full enumeration of independent sets (`d <= 4`), classified by side.
pub fn accounting(h: &PercolatedHypercube) -> Result<Accounting> {
    let d = h.d();
    check_dim("accounting", d, 1, MAX_D_BRUTE)?;
    let adj = vertex_adjacency(h);
    let n = h.num_vertices();
    let half = side_len(d);
    let decomposable = |side: Side| -> Vec<bool> {
        let geo = SideMasks::new(d, side);
        (0u64..1 << half)
            .map(|m| geo.components(m).into_iter().all(|c| geo.is_polymer_mask(c)))
            .collect()
    };
    let dec_even = decomposable(Side::Even);
    let dec_odd = decomposable(Side::Odd);
    let (mut total, mut ne, mut no, mut nb, mut nn) = (0u64, 0u64, 0u64, 0u64, 0u64);
    for s in 0u32..1 << n {
        let mut m = s;
        let mut ok = true;
        let (mut em, mut om) = (0u64, 0u64);
        while m != 0 {
            let v = m.trailing_zeros();
            if adj[v as usize] & s != 0 {
                ok = false;
                break;
            }
            match Side::of(v) {
                Side::Even => em |= 1 << (v >> 1),
                Side::Odd => om |= 1 << (v >> 1),
            }
            m &= m - 1;
        }
        if !ok {
            continue;
        }
        total += 1;
        let (e, o) = (dec_even[em as usize], dec_odd[om as usize]);
        ne += e as u64;
        no += o as u64;
        nb += (e && o) as u64;
        nn += (!e && !o) as u64;
    }
    Ok(Accounting {
        total: total.into(),
        n_even: ne.into(),
        n_odd: no.into(),
        n_both: nb.into(),
        n_neither: nn.into(),
    })
}

/// Exact `2^(2^(d-1))`, the ground-state count of one side.
pub fn side_power(d: u32) -> BigUint {
    BigUint::one() << side_len(d)
}

/// `log2` of an exact count.
pub fn log2_big(v: &BigUint) -> f64 {
    let shift = v.bits().saturating_sub(64);
    let top = (v >> shift).to_f64().unwrap_or(f64::MAX);
    top.log2() + shift as f64
}
