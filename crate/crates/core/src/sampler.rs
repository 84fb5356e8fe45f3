//! Approximate uniform sampling of independent sets through the singleton and
//! dimer polymer picture, with explicit failure accounting.
//!
//! A run picks a defect side `H` with probability proportional to `e^Ψ`,
//! draws singletons and dimers on `H` independently, fails if they do not form
//! a family of pairwise compatible polymers of size at most 2, and otherwise
//! fills the other side uniformly around the result.

use crate::error::{check_dim, Error, Result};
use crate::estimator;
use crate::lattice::{dimers, rank, side_len, PercolatedHypercube, Side};
use crate::oracle::{self, DefectLaw};
use crate::polymer;
use crate::rng::{CounterRng, Threshold};
use crate::stats;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::sync::OnceLock;

pub const MAX_D: u32 = 16;
pub const MAX_D_TV: u32 = 5;

const TAG_SIDE: u64 = 1;
const TAG_VERTICES: u64 = 2;
const TAG_DIMERS: u64 = 4;
const TAG_FILL: u64 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureReason {
    /// A 2-linked component of three or more vertices.
    TripleTwoLinked,
    /// Two chosen dimers overlap or share a neighbour.
    DimerCollision,
    /// A chosen dimer overlaps or shares a neighbour with a chosen singleton.
    DimerSingletonAdjacency,
    /// A component of size at most 2 whose closure is too large to be a
    /// polymer; only possible for `d <= 3`.
    ClosureTooLarge,
}

impl FailureReason {
    pub fn name(self) -> &'static str {
        match self {
            FailureReason::TripleTwoLinked => "triple-2-linked",
            FailureReason::DimerCollision => "dimer-collision",
            FailureReason::DimerSingletonAdjacency => "dimer-singleton-adjacency",
            FailureReason::ClosureTooLarge => "closure-too-large",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Outcome {
    Success {
        /// `Ŝ`, the chosen side's part, sorted.
        defect: Vec<u32>,
        /// The full independent set, sorted.
        set: Vec<u32>,
    },
    Failure { step: u8, reason: FailureReason },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleOutcome {
    pub side: Side,
    pub q_even: f64,
    pub q_odd: f64,
    #[serde(flatten)]
    pub outcome: Outcome,
}

impl SampleOutcome {
    pub fn is_success(&self) -> bool {
        matches!(self.outcome, Outcome::Success { .. })
    }

    pub fn set(&self) -> Option<&[u32]> {
        match &self.outcome {
            Outcome::Success { set, .. } => Some(set),
            Outcome::Failure { .. } => None,
        }
    }

    pub fn defect(&self) -> Option<&[u32]> {
        match &self.outcome {
            Outcome::Success { defect, .. } => Some(defect),
            Outcome::Failure { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct DimerDraw {
    u: u32,
    v: u32,
    accept: Threshold,
}

/// Per-configuration state shared by all runs.
pub struct ApproxSampler<'a> {
    h: &'a PercolatedHypercube,
    psi: [f64; 2],
    q_even: f64,
    vertex_accept: [Vec<Threshold>; 2],
    dimer_draws: [OnceLock<Vec<DimerDraw>>; 2],
    links: Vec<u32>,
    rng: CounterRng,
}

fn slot(side: Side) -> usize {
    match side {
        Side::Even => 0,
        Side::Odd => 1,
    }
}

/// `φ / (1 + φ)` for `φ = 2^-k`.
fn inclusion(k: u32) -> Threshold {
    Threshold::from_probability(1.0 / ((k as f64).exp2() + 1.0))
}

impl<'a> ApproxSampler<'a> {
    pub fn new(h: &'a PercolatedHypercube, seed: u64) -> Result<Self> {
        let d = h.d();
        check_dim("approx_sample", d, 1, MAX_D)?;
        let pe = estimator::psi(h, Side::Even)?.psi;
        let po = estimator::psi(h, Side::Odd)?.psi;
        let vertex_accept = Side::BOTH.map(|s| h.retained_masks(s).iter().map(|m| inclusion(m.count_ones())).collect());
        Ok(Self {
            h,
            psi: [pe, po],
            q_even: 1.0 / (1.0 + (po - pe).exp()),
            vertex_accept,
            dimer_draws: [OnceLock::new(), OnceLock::new()],
            links: (0u32..1 << d).filter(|m| m.count_ones() == 2).collect(),
            rng: CounterRng::new(seed),
        })
    }

    pub fn q_even(&self) -> f64 {
        self.q_even
    }

    pub fn psi(&self, side: Side) -> f64 {
        self.psi[slot(side)]
    }

    fn dimer_draws(&self, side: Side) -> &[DimerDraw] {
        self.dimer_draws[slot(side)].get_or_init(|| {
            let d = self.h.d();
            let own = self.h.retained_masks(side);
            dimers(d, side)
                .map(|dm| {
                    let (i, j) = dm.bits();
                    let mu = own[rank(dm.u) as usize];
                    let mv = own[rank(dm.v) as usize];
                    let c = (mu >> i & mv >> j & 1) + (mu >> j & mv >> i & 1);
                    DimerDraw {
                        u: dm.u,
                        v: dm.v,
                        accept: inclusion(mu.count_ones() + mv.count_ones() - c),
                    }
                })
                .collect()
        })
    }

    /// The `trial`-th run.
    pub fn sample(&self, trial: u64) -> SampleOutcome {
        let t = self.rng.substream(trial);
        let side = if t.substream(TAG_SIDE).unit(0) < self.q_even {
            Side::Even
        } else {
            Side::Odd
        };
        self.run(side, &t)
    }

    /// The `trial`-th run with the side choice replaced by `side`; the law of
    /// the remaining steps is the law conditioned on choosing `side`.
    pub fn sample_on(&self, side: Side, trial: u64) -> SampleOutcome {
        self.run(side, &self.rng.substream(trial))
    }

    fn run(&self, side: Side, t: &CounterRng) -> SampleOutcome {
        let outcome = self.steps(side, t);
        SampleOutcome {
            side,
            q_even: self.q_even,
            q_odd: 1.0 - self.q_even,
            outcome,
        }
    }

    fn steps(&self, side: Side, t: &CounterRng) -> Outcome {
        let d = self.h.d();
        let fail = |step, reason| Outcome::Failure { step, reason };

        // step 2
        let vr = t.substream(TAG_VERTICES);
        let s_tilde: Vec<u32> = self.vertex_accept[slot(side)]
            .iter()
            .enumerate()
            .filter(|&(r, &a)| vr.bernoulli(r as u64, a))
            .map(|(r, _)| side.vertex(r as u32))
            .collect();

        // step 3
        let comps = components(&s_tilde, &self.links);
        if comps.iter().any(|c| c.len() >= 3) {
            return fail(3, FailureReason::TripleTwoLinked);
        }
        if !comps.iter().all(|c| small_polymer(d, c, side)) {
            return fail(3, FailureReason::ClosureTooLarge);
        }
        let s1: Vec<u32> = comps.iter().filter(|c| c.len() == 1).map(|c| c[0]).collect();

        // step 4
        let dr = t.substream(TAG_DIMERS);
        let s2: Vec<[u32; 2]> = self
            .dimer_draws(side)
            .iter()
            .enumerate()
            .filter(|&(k, dd)| dr.bernoulli(k as u64, dd.accept))
            .map(|(_, dd)| [dd.u, dd.v])
            .collect();

        // step 5
        if !s2.iter().all(|dm| small_polymer(d, dm, side)) {
            return fail(5, FailureReason::ClosureTooLarge);
        }
        if !family_compatible(&s1, &s2, &self.links) {
            let reason = explicit_conflict(&s1, &s2).unwrap_or(FailureReason::DimerSingletonAdjacency);
            return fail(5, reason);
        }
        let mut defect = s1;
        defect.extend(s2.iter().flatten());
        defect.sort_unstable();

        // step 6
        let mut blocked = vec![false; self.h.num_vertices() as usize];
        for &v in &defect {
            for w in self.h.neighbors(v) {
                blocked[w as usize] = true;
            }
        }
        let fr = t.substream(TAG_FILL);
        let mut set = defect.clone();
        set.extend(side.other().vertices(d).filter(|&w| !blocked[w as usize] && fr.word(w as u64) >> 63 == 1));
        set.sort_unstable();
        Outcome::Success { defect, set }
    }
}

/// Singletons and dimers are polymers from `d = 4` on; below that the closure decides.
fn small_polymer(d: u32, c: &[u32], side: Side) -> bool {
    d >= 4 || polymer::is_polymer(d, c, side).unwrap_or(false)
}

/// 2-linked components of a same-side vertex set, each sorted, ordered by
/// smallest member.
fn components(s: &[u32], links: &[u32]) -> Vec<Vec<u32>> {
    let mut sorted = s.to_vec();
    sorted.sort_unstable();
    let mut seen = vec![false; sorted.len()];
    let mut out = Vec::new();
    for start in 0..sorted.len() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![sorted[start]];
        let mut k = 0;
        while k < comp.len() {
            let x = comp[k];
            for &m in links {
                if let Ok(pos) = sorted.binary_search(&(x ^ m)) {
                    if !seen[pos] {
                        seen[pos] = true;
                        comp.push(sorted[pos]);
                    }
                }
            }
            k += 1;
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Whether singletons `s1` and dimers `s2` are pairwise compatible: every
/// 2-linked component of their union is exactly one of them.
pub fn family_compatible(s1: &[u32], s2: &[[u32; 2]], links: &[u32]) -> bool {
    let mut owner: Vec<(u32, usize)> = s1.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    for (k, dm) in s2.iter().enumerate() {
        owner.push((dm[0], s1.len() + k));
        owner.push((dm[1], s1.len() + k));
    }
    owner.sort_unstable();
    if owner.windows(2).any(|w| w[0].0 == w[1].0) {
        return false;
    }
    let union: Vec<u32> = owner.iter().map(|&(v, _)| v).collect();
    let comps = components(&union, links);
    comps.len() == s1.len() + s2.len()
        && comps.iter().all(|c| {
            let who = |v: &u32| owner[owner.partition_point(|&(x, _)| x < *v)].1;
            let first = who(&c[0]);
            c.iter().all(|v| who(v) == first)
        })
}

/// Pairwise reading of the step-5 rule: a dimer must not overlap or share a
/// neighbour with another dimer or with a singleton.
pub fn explicit_conflict(s1: &[u32], s2: &[[u32; 2]]) -> Option<FailureReason> {
    let close = |a: u32, b: u32| (a ^ b).count_ones() <= 2;
    for (k, x) in s2.iter().enumerate() {
        for y in &s2[k + 1..] {
            if x.iter().any(|&a| y.iter().any(|&b| close(a, b))) {
                return Some(FailureReason::DimerCollision);
            }
        }
    }
    for x in s2 {
        if x.iter().any(|&a| s1.iter().any(|&b| close(a, b))) {
            return Some(FailureReason::DimerSingletonAdjacency);
        }
    }
    None
}

pub fn approx_sample(h: &PercolatedHypercube, seed: u64) -> Result<SampleOutcome> {
    Ok(ApproxSampler::new(h, seed)?.sample(0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailureRate {
    pub trials: u64,
    pub failures: u64,
    pub rate: f64,
    pub se: f64,
    /// Successful runs whose output was not independent; always zero for a
    /// correct implementation.
    pub invalid_outputs: u64,
    pub by_reason: BTreeMap<String, u64>,
}

pub fn failure_rate(h: &PercolatedHypercube, trials: u64, seed: u64) -> Result<FailureRate> {
    if trials == 0 {
        return Err(Error::Contract("failure_rate needs at least one trial".into()));
    }
    let s = ApproxSampler::new(h, seed)?;
    let results: Vec<std::result::Result<bool, FailureReason>> = (0..trials)
        .into_par_iter()
        .map(|t| match s.sample(t).outcome {
            Outcome::Success { set, .. } => Ok(h.is_independent(&set)),
            Outcome::Failure { reason, .. } => Err(reason),
        })
        .collect();
    let mut by_reason = BTreeMap::new();
    let mut invalid = 0;
    for r in &results {
        match r {
            Ok(true) => {}
            Ok(false) => invalid += 1,
            Err(reason) => *by_reason.entry(reason.name().to_string()).or_insert(0) += 1,
        }
    }
    let failures: u64 = by_reason.values().sum();
    let rate = failures as f64 / trials as f64;
    Ok(FailureRate {
        trials,
        failures,
        rate,
        se: (rate * (1.0 - rate) / trials as f64).sqrt(),
        invalid_outputs: invalid,
        by_reason,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TvReport {
    pub d: u32,
    pub p: f64,
    pub side: Side,
    pub trials: u64,
    pub successes: u64,
    pub support_size: usize,
    pub tv: f64,
    pub noise_floor: f64,
}

fn side_mask(defect: &[u32]) -> u64 {
    defect.iter().fold(0, |m, &v| m | 1 << rank(v))
}

/// TV between an empirical histogram of side masks and an exact law, with the
/// noise floor `sqrt(support / samples)`.
pub fn tv_against_law(counts: &BTreeMap<u64, u64>, law: &DefectLaw) -> (f64, f64) {
    let n: u64 = counts.values().sum();
    let emp: BTreeMap<u64, f64> = counts.iter().map(|(&m, &c)| (m, c as f64 / n as f64)).collect();
    let exact: BTreeMap<u64, f64> = law.support().map(|m| (m, law.probability_f64(m))).collect();
    let floor = (law.support_size() as f64 / n.max(1) as f64).sqrt();
    (stats::tv_distance(&emp, &exact), floor)
}

fn tv_report(h: &PercolatedHypercube, side: Side, trials: u64, counts: &BTreeMap<u64, u64>, law: &DefectLaw) -> TvReport {
    let (tv, noise_floor) = tv_against_law(counts, law);
    TvReport {
        d: h.d(),
        p: h.p(),
        side,
        trials,
        successes: counts.values().sum(),
        support_size: law.support_size(),
        tv,
        noise_floor,
    }
}

fn conditional_law(h: &PercolatedHypercube, side: Side, trials: u64) -> Result<DefectLaw> {
    check_dim("empirical_tv_defect", h.d(), 1, MAX_D_TV)?;
    if trials == 0 {
        return Err(Error::Contract("TV estimate needs at least one trial".into()));
    }
    Ok(oracle::defect_distribution(h, side)?.conditional_decomposable())
}

/// TV between `Ŝ` (side forced, failures dropped) and the exact law of
/// `I ∩ side` given that it is polymer-decomposable.
pub fn empirical_tv_defect(h: &PercolatedHypercube, side: Side, trials: u64, seed: u64) -> Result<TvReport> {
    let law = conditional_law(h, side, trials)?;
    let s = ApproxSampler::new(h, seed)?;
    let masks: Vec<Option<u64>> = (0..trials)
        .into_par_iter()
        .map(|t| s.sample_on(side, t).defect().map(side_mask))
        .collect();
    let mut counts = BTreeMap::new();
    for m in masks.into_iter().flatten() {
        *counts.entry(m).or_insert(0) += 1;
    }
    Ok(tv_report(h, side, trials, &counts, &law))
}

/// The same estimator fed with exact draws from the reference law.
pub fn exact_tv_defect(h: &PercolatedHypercube, side: Side, trials: u64, seed: u64) -> Result<TvReport> {
    let law = conditional_law(h, side, trials)?;
    let sampler = law.sampler();
    let rng = CounterRng::new(seed).substream(0x5456);
    let mut counts = BTreeMap::new();
    for t in 0..trials {
        *counts.entry(sampler.sample(&rng, t)).or_insert(0) += 1;
    }
    Ok(tv_report(h, side, trials, &counts, &law))
}

/// Exact probability that a run on a forced side fails, by enumerating the
/// singleton draw and the dimer draw (`d <= 3`).
pub fn exact_failure_probability(h: &PercolatedHypercube, side: Side) -> Result<f64> {
    let d = h.d();
    check_dim("exact_failure_probability", d, 1, 3)?;
    let own = h.retained_masks(side);
    let n = side_len(d) as usize;
    let pv: Vec<f64> = own.iter().map(|m| 1.0 / ((m.count_ones() as f64).exp2() + 1.0)).collect();
    let dms: Vec<_> = dimers(d, side).collect();
    let pd: Vec<f64> = dms.iter().map(|dm| polymer::phi_dimer(h, dm)).map(|f| f / (1.0 + f)).collect();
    let links: Vec<u32> = (0u32..1 << d).filter(|m| m.count_ones() == 2).collect();
    let prob = |mask: u64, ps: &[f64]| -> f64 {
        ps.iter()
            .enumerate()
            .map(|(k, &q)| if mask >> k & 1 == 1 { q } else { 1.0 - q })
            .product()
    };
    let mut ok = 0.0;
    for sm in 0u64..1 << n {
        let s: Vec<u32> = (0..n as u32).filter(|&r| sm >> r & 1 == 1).map(|r| side.vertex(r)).collect();
        let comps = components(&s, &links);
        if comps.iter().any(|c| c.len() >= 3 || !small_polymer(d, c, side)) {
            continue;
        }
        let s1: Vec<u32> = comps.iter().filter(|c| c.len() == 1).map(|c| c[0]).collect();
        let ps = prob(sm, &pv);
        for dmask in 0u64..1 << dms.len() {
            let s2: Vec<[u32; 2]> = (0..dms.len())
                .filter(|&k| dmask >> k & 1 == 1)
                .map(|k| [dms[k].u, dms[k].v])
                .collect();
            if s2.iter().all(|x| small_polymer(d, x, side)) && family_compatible(&s1, &s2, &links) {
                ok += ps * prob(dmask, &pd);
            }
        }
    }
    Ok(1.0 - ok)
}

/// Exact law of `Ŝ` on a forced side as side masks, unnormalised: the masses
/// sum to the success probability (`d <= 4`).
pub fn exact_output_law(h: &PercolatedHypercube, side: Side) -> Result<BTreeMap<u64, f64>> {
    let d = h.d();
    check_dim("exact_output_law", d, 1, 4)?;
    let n = side_len(d) as usize;
    let pv: Vec<f64> = h.retained_masks(side).iter().map(|m| 1.0 / ((m.count_ones() as f64).exp2() + 1.0)).collect();
    let dms: Vec<[u32; 2]> = dimers(d, side).map(|dm| [dm.u, dm.v]).collect();
    let qd: Vec<f64> = dimers(d, side).map(|dm| polymer::phi_dimer(h, &dm)).map(|f| f / (1.0 + f)).collect();
    let none: f64 = qd.iter().map(|q| 1.0 - q).product();
    let links: Vec<u32> = (0u32..1 << d).filter(|m| m.count_ones() == 2).collect();
    let dimers_ok = dms.iter().all(|x| small_polymer(d, x, side));

    let mut law = BTreeMap::new();
    for sm in 0u64..1 << n {
        let s: Vec<u32> = (0..n as u32).filter(|&r| sm >> r & 1 == 1).map(|r| side.vertex(r)).collect();
        let comps = components(&s, &links);
        if comps.iter().any(|c| c.len() >= 3 || !small_polymer(d, c, side)) {
            continue;
        }
        let s1: Vec<u32> = comps.iter().filter(|c| c.len() == 1).map(|c| c[0]).collect();
        let ps: f64 = (0..n).map(|r| if sm >> r & 1 == 1 { pv[r] } else { 1.0 - pv[r] }).product();
        // dimer draws that pass step 5 are exactly the compatible families avoiding s1
        let cand: Vec<usize> = if dimers_ok {
            (0..dms.len()).filter(|&k| family_compatible(&s1, &dms[k..=k], &links)).collect()
        } else {
            Vec::new()
        };
        let mut stack: Vec<(usize, Vec<usize>)> = vec![(0, Vec::new())];
        while let Some((next, chosen)) = stack.pop() {
            let fam: Vec<[u32; 2]> = chosen.iter().map(|&k| dms[k]).collect();
            let w: f64 = chosen.iter().map(|&k| qd[k] / (1.0 - qd[k])).product();
            let mask = side_mask(&s1) | fam.iter().fold(0, |m, x| m | side_mask(x));
            *law.entry(mask).or_insert(0.0) += ps * none * w;
            for (pos, &k) in cand.iter().enumerate().skip(next) {
                if explicit_conflict(&[], &[fam.as_slice(), &[dms[k]]].concat()).is_none() {
                    let mut c = chosen.clone();
                    c.push(k);
                    stack.push((pos + 1, c));
                }
            }
        }
    }
    Ok(law)
}

/// Exact TV between `Ŝ` given success on a forced side and the conditional
/// defect law (`d <= 4`), free of sampling noise.
pub fn exact_defect_tv(h: &PercolatedHypercube, side: Side) -> Result<f64> {
    let out = exact_output_law(h, side)?;
    let success: f64 = out.values().sum();
    let a: BTreeMap<u64, f64> = out.into_iter().map(|(m, w)| (m, w / success)).collect();
    let law = oracle::defect_distribution(h, side)?.conditional_decomposable();
    let b: BTreeMap<u64, f64> = law.support().map(|m| (m, law.probability_f64(m))).collect();
    Ok(stats::tv_distance(&a, &b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn links(d: u32) -> Vec<u32> {
        (0u32..1 << d).filter(|m| m.count_ones() == 2).collect()
    }

    /// Union bound on the failure probability of a forced-side run: expected
    /// number of conflicting pairs among the independent draws.
    fn failure_union_bound(h: &PercolatedHypercube, side: Side) -> f64 {
        let d = h.d();
        let pv: Vec<f64> = h.retained_masks(side).iter().map(|m| 1.0 / ((m.count_ones() as f64).exp2() + 1.0)).collect();
        let p_of = |v: u32| pv[rank(v) as usize];
        let close = |a: u32, b: u32| (a ^ b).count_ones() <= 2;
        let verts: Vec<u32> = side.vertices(d).collect();
        let mut bound = 0.0;
        for (k, &u) in verts.iter().enumerate() {
            for &v in &verts[k + 1..] {
                if close(u, v) {
                    bound += p_of(u) * p_of(v);
                }
            }
        }
        let dms: Vec<(u32, u32, f64)> = dimers(d, side)
            .map(|dm| {
                let f = polymer::phi_dimer(h, &dm);
                (dm.u, dm.v, f / (1.0 + f))
            })
            .collect();
        for (k, &(u, v, q)) in dms.iter().enumerate() {
            let near: f64 = verts.iter().filter(|&&s| close(s, u) || close(s, v)).map(|&s| p_of(s)).sum();
            bound += q * near;
            for &(x, y, r) in &dms[k + 1..] {
                if close(u, x) || close(u, y) || close(v, x) || close(v, y) {
                    bound += q * r;
                }
            }
        }
        bound
    }

    #[test]
    fn full_retention_failure_is_within_union_bound() {
        let h = PercolatedHypercube::build(8, 1.0, 3).unwrap();
        let s = ApproxSampler::new(&h, 1).unwrap();
        let ub = s.q_even() * failure_union_bound(&h, Side::Even) + (1.0 - s.q_even()) * failure_union_bound(&h, Side::Odd);
        let r = failure_rate(&h, 10_000, 1).unwrap();
        assert_eq!(r.invalid_outputs, 0);
        assert!(r.rate <= ub + 4.0 * r.se.max(1e-3), "{r:?} bound {ub}");
        assert!(ub < 0.1);
    }

    #[test]
    fn zero_retention_failure_matches_enumeration_at_d3() {
        let h = PercolatedHypercube::build(3, 0.0, 0).unwrap();
        let exact = exact_failure_probability(&h, Side::Even).unwrap();
        // any two side vertices are 2-linked and dimers are not polymers at d=3
        assert!((exact - (1.0 - 5.0 / 16.0 / 64.0)).abs() < 1e-12);
        let s = ApproxSampler::new(&h, 9).unwrap();
        let n = 200_000;
        let fails = (0..n).filter(|&t| !s.sample_on(Side::Even, t).is_success()).count();
        let rate = fails as f64 / n as f64;
        let se = (exact * (1.0 - exact) / n as f64).sqrt();
        assert!((rate - exact).abs() <= 4.0 * se);
    }

    #[test]
    fn failure_rate_matches_enumeration_on_random_configs() {
        for seed in 0..3 {
            let h = PercolatedHypercube::build(3, 0.5, seed).unwrap();
            let exact = exact_failure_probability(&h, Side::Odd).unwrap();
            let s = ApproxSampler::new(&h, seed).unwrap();
            let n = 100_000;
            let fails = (0..n).filter(|&t| !s.sample_on(Side::Odd, t).is_success()).count();
            let se = (exact * (1.0 - exact) / n as f64).sqrt().max(1e-4);
            assert!((fails as f64 / n as f64 - exact).abs() <= 4.0 * se);
        }
    }

    #[test]
    fn successes_are_independent_and_decompose() {
        for (d, p) in [(6, 0.7), (8, 0.5), (9, 0.9)] {
            let h = PercolatedHypercube::build(d, p, 11).unwrap();
            let s = ApproxSampler::new(&h, 5).unwrap();
            assert!((s.q_even() + (1.0 - s.q_even()) - 1.0).abs() < 1e-15);
            for t in 0..2000 {
                let o = s.sample(t);
                assert_eq!(o.q_even + o.q_odd, 1.0);
                if let Outcome::Success { defect, set } = &o.outcome {
                    assert!(h.is_independent(set));
                    assert!(defect.iter().all(|&v| Side::of(v) == o.side));
                    assert!(polymer::is_decomposable_le(d, defect, o.side, 2).unwrap());
                    for c in polymer::two_linked_components(d, defect, o.side).unwrap() {
                        assert!(c.len() <= 2);
                    }
                }
            }
        }
    }

    #[test]
    fn runs_are_reproducible() {
        let h = PercolatedHypercube::build(7, 0.6, 2).unwrap();
        let a = ApproxSampler::new(&h, 77).unwrap();
        let b = ApproxSampler::new(&h, 77).unwrap();
        for t in [0, 5, 999] {
            assert_eq!(a.sample(t), b.sample(t));
        }
        assert_eq!(failure_rate(&h, 500, 3).unwrap(), failure_rate(&h, 500, 3).unwrap());
    }

    #[test]
    fn trials_zero_is_a_contract_error() {
        let h = PercolatedHypercube::build(5, 0.5, 0).unwrap();
        assert!(matches!(failure_rate(&h, 0, 0), Err(Error::Contract(_))));
        assert!(matches!(
            empirical_tv_defect(&PercolatedHypercube::build(6, 0.5, 0).unwrap(), Side::Even, 10, 0),
            Err(Error::Size { .. })
        ));
    }

    #[test]
    fn lower_retention_fails_more_often() {
        let median = |p: f64| {
            let mut r: Vec<f64> = (0..20)
                .map(|seed| failure_rate(&PercolatedHypercube::build(10, p, seed).unwrap(), 400, seed).unwrap().rate)
                .collect();
            r.sort_by(f64::total_cmp);
            (r[9] + r[10]) / 2.0
        };
        assert!(median(0.5) >= median(0.8));
    }

    #[test]
    fn exact_draws_sit_inside_the_noise_floor() {
        let h = PercolatedHypercube::build(4, 0.8, 1).unwrap();
        let r = exact_tv_defect(&h, Side::Even, 100_000, 3).unwrap();
        assert!(r.tv <= r.noise_floor, "{r:?}");
    }

    #[test]
    fn empirical_output_matches_exact_output_law() {
        for (d, p, seed) in [(3, 0.2, 0), (4, 0.8, 1), (4, 0.5, 2)] {
            let h = PercolatedHypercube::build(d, p, seed).unwrap();
            let law = exact_output_law(&h, Side::Even).unwrap();
            let success: f64 = law.values().sum();
            let exact_fail = if d <= 3 { Some(exact_failure_probability(&h, Side::Even).unwrap()) } else { None };
            if let Some(f) = exact_fail {
                assert!((1.0 - success - f).abs() < 1e-12);
            }
            let s = ApproxSampler::new(&h, 4).unwrap();
            let n = 200_000u64;
            let mut counts: BTreeMap<u64, f64> = BTreeMap::new();
            let mut ok = 0u64;
            for t in 0..n {
                if let Some(def) = s.sample_on(Side::Even, t).defect() {
                    *counts.entry(side_mask(def)).or_insert(0.0) += 1.0;
                    ok += 1;
                }
            }
            let se = (success * (1.0 - success) / n as f64).sqrt();
            assert!((ok as f64 / n as f64 - success).abs() <= 4.0 * se.max(1e-4));
            counts.values_mut().for_each(|c| *c /= ok as f64);
            let norm: BTreeMap<u64, f64> = law.iter().map(|(&m, &w)| (m, w / success)).collect();
            let floor = (norm.len() as f64 / ok as f64).sqrt();
            assert!(stats::tv_distance(&counts, &norm) <= floor, "d={d} p={p}");
        }
    }

    #[test]
    fn empirical_tv_tracks_exact_tv() {
        let h = PercolatedHypercube::build(4, 0.8, 1).unwrap();
        let r = empirical_tv_defect(&h, Side::Even, 200_000, 3).unwrap();
        let exact = exact_defect_tv(&h, Side::Even).unwrap();
        assert!((r.tv - exact).abs() <= r.noise_floor, "{r:?} exact {exact}");
    }

    #[test]
    fn exact_tv_is_at_least_the_mass_on_large_polymers() {
        for (p, seed) in [(0.5, 0), (0.8, 1), (1.0, 2)] {
            let h = PercolatedHypercube::build(4, p, seed).unwrap();
            let law = oracle::defect_distribution(&h, Side::Even).unwrap().conditional_decomposable();
            let large: f64 = law
                .support()
                .filter(|&m| {
                    let s = crate::gray::mask_vertices(m, Side::Even);
                    !polymer::is_decomposable_le(4, &s, Side::Even, 2).unwrap()
                })
                .map(|m| law.probability_f64(m))
                .sum();
            assert!(exact_defect_tv(&h, Side::Even).unwrap() >= large - 1e-12);
        }
    }

    #[test]
    fn tv_shrinks_with_retention() {
        for seed in 0..5 {
            let hi = PercolatedHypercube::build(4, 0.9, seed).unwrap();
            let lo = PercolatedHypercube::build(4, 0.5, seed).unwrap();
            assert!(exact_defect_tv(&hi, Side::Even).unwrap() <= exact_defect_tv(&lo, Side::Even).unwrap());
        }
    }

    #[test]
    fn step3_predicate_matches_component_sizes() {
        let d = 7;
        let l = links(d);
        let rng = CounterRng::new(4);
        for t in 0..2000u64 {
            let s: Vec<u32> = (0..side_len(d))
                .filter(|&r| rng.substream(t).unit(r as u64) < 0.03)
                .map(|r| Side::Odd.vertex(r))
                .collect();
            let ours = components(&s, &l);
            let reference = polymer::two_linked_components(d, &s, Side::Odd).unwrap();
            assert_eq!(ours, reference);
            let ok = ours.iter().all(|c| c.len() <= 2);
            assert_eq!(ok, polymer::is_decomposable_le(d, &s, Side::Odd, 2).unwrap());
        }
    }

    #[test]
    fn step5_readings_agree() {
        let d = 6;
        let l = links(d);
        let all: Vec<_> = dimers(d, Side::Even).collect();
        let rng = CounterRng::new(8);
        for t in 0..100_000u64 {
            let r = rng.substream(t);
            let n1 = r.below(0, 5) as usize;
            let mut s1: Vec<u32> = Vec::new();
            for k in 0..n1 {
                let v = Side::Even.vertex(r.below(1 + k as u64, side_len(d) as u64) as u32);
                if s1.iter().all(|&u| (u ^ v).count_ones() > 2) {
                    s1.push(v);
                }
            }
            let n2 = r.below(10, 4) as usize;
            let s2: Vec<[u32; 2]> = (0..n2)
                .map(|k| {
                    let dm = all[r.below(11 + k as u64, all.len() as u64) as usize];
                    [dm.u, dm.v]
                })
                .collect();
            assert_eq!(family_compatible(&s1, &s2, &l), explicit_conflict(&s1, &s2).is_none());
        }
    }

    proptest! {
        #[test]
        fn side_choice_follows_psi(d in 4u32..9, p in 0.3f64..0.9, seed in 0u64..1000) {
            let h = PercolatedHypercube::build(d, p, seed).unwrap();
            let s = ApproxSampler::new(&h, seed).unwrap();
            let (e, o) = (s.psi(Side::Even), s.psi(Side::Odd));
            prop_assert!((s.q_even() - e.exp() / (e.exp() + o.exp())).abs() < 1e-12);
        }
    }
}
