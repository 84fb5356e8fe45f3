//! The explicit estimator `Ψ` of `log(i(Q_{d,p}) / 2^(2^(d-1)))` and the
//! closed-form constants that centre and scale it.
//!
//! `Ψ` of a side is `Σ_v ln(1 + φ_v) + Σ_dimers (φ_d - φ~_d)` with
//! `φ_v = 2^(-N(v))`. Natural logs throughout; counts are reported in bits.
//!
//! The dimer sums are taken pivot by pivot: every dimer `{u, v}` has exactly
//! two opposite-side vertices adjacent to both, and the pairs of neighbours of
//! a pivot `w` are exactly the dimers through `w`.

use crate::entropy;
use crate::error::{check_dim, Error, Result};
use crate::lattice::{dimer_count, side_len, PercolatedHypercube, Side};
use crate::stats::KahanSum;
use serde::Serialize;
use std::collections::BTreeMap;

pub const MAX_D: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SidePsi {
    pub side: Side,
    /// `Σ ln(1 + φ_v)`.
    pub phi_log: f64,
    /// `Σ φ_v`.
    pub phi1: f64,
    /// `Σ φ_v²`.
    pub phi2: f64,
    pub delta: f64,
    pub delta_tilde: f64,
    pub psi: f64,
}

/// Singleton and dimer sums for one side.
pub fn psi(h: &PercolatedHypercube, side: Side) -> Result<SidePsi> {
    check_dim("psi", h.d(), 1, MAX_D)?;
    Ok(side_psi(h.d(), side, &h.retained_masks(side), &h.retained_masks(side.other())))
}

/// `psi` for the even and the odd side, sharing the neighbourhood masks.
pub fn psi_both(h: &PercolatedHypercube) -> Result<(SidePsi, SidePsi)> {
    check_dim("psi", h.d(), 1, MAX_D)?;
    let even = h.retained_masks(Side::Even);
    let odd = h.retained_masks(Side::Odd);
    Ok((side_psi(h.d(), Side::Even, &even, &odd), side_psi(h.d(), Side::Odd, &odd, &even)))
}

fn side_psi(d: u32, side: Side, own: &[u32], other: &[u32]) -> SidePsi {
    let phi: Vec<f64> = own.iter().map(|m| (-(m.count_ones() as f64)).exp2()).collect();

    let (mut phi_log, mut phi1, mut phi2) = (KahanSum::default(), KahanSum::default(), KahanSum::default());
    for &f in &phi {
        phi_log.add(f.ln_1p());
        phi1.add(f);
        phi2.add(f * f);
    }

    let (delta, delta_tilde) = if d >= 2 {
        pivot_dimer_sums(d, side.other(), own, other, &phi)
    } else {
        (0.0, 0.0)
    };
    let phi_log = phi_log.value();
    SidePsi {
        side,
        phi_log,
        phi1: phi1.value(),
        phi2: phi2.value(),
        delta,
        delta_tilde,
        psi: phi_log + delta - delta_tilde,
    }
}

/// `(Δ, Δ~)` from the pivots on `pivot_side`.
///
/// `Δ~` is half the sum over pivots of `Σ_{i<j} φ(w^e_i) φ(w^e_j)`. A dimer's
/// `φ_d / φ~_d = 2^c`, where `c` counts its pivots joined to both endpoints,
/// so `Δ - Δ~` gets `(2^c - 1) / c` times `φ~_d` at each such pivot. The other
/// pivot of `{w^e_i, w^e_j}` is joined to both when `w^e_i` keeps direction
/// `j` and `w^e_j` keeps direction `i`.
fn pivot_dimer_sums(d: u32, pivot_side: Side, own: &[u32], pivots: &[u32], phi: &[f64]) -> (f64, f64) {
    // φ next to the mask so one fetch serves both
    let cells: Vec<(f64, u32)> = phi.iter().copied().zip(own.iter().copied()).collect();
    let mut tilde = KahanSum::default();
    let mut excess = KahanSum::default();
    let mut fs = [0.0f64; 32];
    let mut ms = [0u32; 32];
    for (r, &m) in pivots.iter().enumerate() {
        let w = pivot_side.vertex(r as u32);
        let (mut s1, mut s2, mut sr, mut qr) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..d as usize {
            let (f, mu) = cells[((w ^ (1 << i)) >> 1) as usize];
            let keep = (m >> i & 1) as f64;
            s1 += f;
            s2 += f * f;
            sr += keep * f;
            qr += keep * f * f;
            fs[i] = f;
            ms[i] = mu;
        }
        tilde.add((s1 * s1 - s2) / 4.0);

        let mut both = 0.0;
        let mut rest = m;
        while rest != 0 {
            let i = rest.trailing_zeros();
            rest &= rest - 1;
            let mut js = ms[i as usize] & rest;
            while js != 0 {
                let j = js.trailing_zeros() as usize;
                js &= js - 1;
                both += ((ms[j] >> i & 1) as f64) * fs[i as usize] * fs[j];
            }
        }
        excess.add((sr * sr - qr + both) / 2.0);
    }
    let t = tilde.value();
    (t + excess.value(), t)
}

/// `log2 î = 2^(d-1) + log2(e^Ψ_even + e^Ψ_odd)`.
pub fn combine_log2(d: u32, psi_even: f64, psi_odd: f64) -> f64 {
    let hi = psi_even.max(psi_odd);
    let gap = (psi_even - psi_odd).abs();
    side_len(d) as f64 + (hi + (-gap).exp().ln_1p()) / std::f64::consts::LN_2
}

pub fn estimate_log2_count(h: &PercolatedHypercube) -> Result<f64> {
    let (e, o) = psi_both(h)?;
    Ok(combine_log2(h.d(), e.psi, o.psi))
}

#[derive(Debug, Clone, Serialize)]
pub struct PsiReport {
    pub d: u32,
    pub p: f64,
    pub seed: u64,
    pub even: SidePsi,
    pub odd: SidePsi,
    pub log2_estimate: f64,
    pub constants: ConstantSet,
}

pub fn psi_report(h: &PercolatedHypercube) -> Result<PsiReport> {
    let (even, odd) = psi_both(h)?;
    Ok(PsiReport {
        d: h.d(),
        p: h.p(),
        seed: h.seed(),
        even,
        odd,
        log2_estimate: combine_log2(h.d(), even.psi, odd.psi),
        constants: constants(h.d(), h.p())?,
    })
}

/// `E[φ_v^k] = (1 - (2^k - 1)/2^k · p)^d`.
pub fn singleton_moment(d: u32, p: f64, k: u32) -> f64 {
    let k = k as f64;
    (1.0 - (k.exp2() - 1.0) / k.exp2() * p).powi(d as i32)
}

/// `μ₁ᵏ = 2^(d-1) E[φ_v^k] = ½ (2 - (2^k - 1)/2^(k-1) · p)^d`.
pub fn mu1_k(d: u32, p: f64, k: u32) -> f64 {
    let k = k as f64;
    0.5 * (2.0 - (k.exp2() - 1.0) / (k - 1.0).exp2() * p).powi(d as i32)
}

/// Upper bound on `Cov(Φ_log^even, Φ_log^odd)`.
pub fn covariance_bound(d: u32, p: f64) -> f64 {
    side_len(d) as f64 * d as f64 * (1.0 - 0.75 * p) * (1.0 - 0.5 * p).powi(2 * d as i32 - 2)
}

/// `P[Bin(d,p) = k]` for all `k`.
fn binomial_pmf(d: u32, p: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(d as usize + 1);
    let mut c = 1.0;
    for k in 0..=d {
        if k > 0 {
            c = c * (d - k + 1) as f64 / k as f64;
        }
        out.push(c * p.powi(k as i32) * (1.0 - p).powi((d - k) as i32));
    }
    out
}

/// `E[Φ_log] = 2^(d-1) Σ_k P[N(v) = k] ln(1 + 2^-k)`; vertices of a side share
/// no edges, so `Var(Φ_log)` is `2^(d-1)` single-vertex variances.
pub fn phi_log_moments(d: u32, p: f64) -> (f64, f64) {
    let pmf = binomial_pmf(d, p);
    let (mut m1, mut m2) = (KahanSum::default(), KahanSum::default());
    for (k, &w) in pmf.iter().enumerate() {
        let x = (-(k as f64)).exp2().ln_1p();
        m1.add(w * x);
        m2.add(w * x * x);
    }
    let n = side_len(d) as f64;
    let (a, b) = (m1.value(), m2.value());
    (n * a, n * (b - a * a))
}

/// `Cov(Φ_log^Even, Φ_log^Odd)`: an even and an odd vertex share at most the
/// edge between them, so only the `d 2^(d-1)` adjacent pairs contribute, each
/// `p(1-p) (m(1) - m(0))²` with `m(e) = E ln(1 + 2^-(X+e))`, `X ~ Bin(d-1, p)`.
pub fn phi_log_covariance(d: u32, p: f64) -> f64 {
    if d == 0 {
        return 0.0;
    }
    let pmf = binomial_pmf(d - 1, p);
    let m = |e: usize| -> f64 {
        let mut s = KahanSum::default();
        for (k, &w) in pmf.iter().enumerate() {
            s.add(w * (-((k + e) as f64)).exp2().ln_1p());
        }
        s.value()
    };
    let gap = m(1) - m(0);
    d as f64 * side_len(d) as f64 * p * (1.0 - p) * gap * gap
}

/// `E[φ_d]` for one dimer: each of the two pivots is reached unless both of its
/// edges are gone, and the other `2d - 4` edges reach one endpoint each.
pub fn dimer_phi_mean(d: u32, p: f64) -> f64 {
    if d < 2 {
        return 0.0;
    }
    let q = 1.0 - p;
    (0.5 * (1.0 + q * q)).powi(2) * (1.0 - 0.5 * p).powi(2 * d as i32 - 4)
}

/// `E[φ~_d] = (1 - p/2)^(2d)`.
pub fn dimer_phi_tilde_mean(d: u32, p: f64) -> f64 {
    (1.0 - 0.5 * p).powi(2 * d as i32)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstantSet {
    pub d: u32,
    pub p: f64,
    /// `μ₁ᵏ` for `k = 1..=4`.
    pub mu1_k: [f64; 4],
    pub mu1: f64,
    pub sigma2: f64,
    pub mu_prime: f64,
    /// Prefactor `d(d-1)/4` and per-dimer factor `((1+(1-p)²)/(2-p))²`.
    pub mu2_quarter: f64,
    pub mu2_tilde_quarter: f64,
    pub mu_quarter: f64,
    /// Prefactor `d(d-1)/8` (the enumerated dimer count) with the same per-dimer factor.
    pub mu2_half: f64,
    /// Enumerated dimer count times the exact `E[φ_d]`.
    pub mu2: f64,
    /// Enumerated dimer count times `E[φ~_d]`.
    pub mu2_tilde: f64,
    pub mu: f64,
    /// `E[φ_v^k]` for `k = 1..=4`.
    pub singleton_moments: [f64; 4],
    pub covariance_bound: f64,
    pub phi_log_mean: f64,
    pub phi_log_variance: f64,
    pub phi_log_covariance: f64,
    pub regime: BTreeMap<String, bool>,
}

pub fn constants(d: u32, p: f64) -> Result<ConstantSet> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("p={p} outside [0,1]")));
    }
    let mk = [1, 2, 3, 4].map(|k| mu1_k(d, p, k));
    let mu1 = mk[0] - mk[1] / 2.0 + mk[2] / 3.0;
    let sigma2 = 0.5 * (2.0 - 1.5 * p).powi(d as i32);
    let mu_prime = 0.5 * (2.0 - p).powi(d as i32) - sigma2 / 2.0;

    let df = d as f64;
    let scale = (0.5 * (2.0 - p).powi(2)).powi(d as i32);
    let factor = ((1.0 + (1.0 - p).powi(2)) / (2.0 - p)).powi(2);
    let mu2_tilde_quarter = df * (df - 1.0) / 4.0 * scale;
    let mu2_quarter = mu2_tilde_quarter * factor;
    let mu2_half = mu2_quarter / 2.0;
    let count = dimer_count(d) as f64;
    let mu2 = count * dimer_phi_mean(d, p);
    let mu2_tilde = count * dimer_phi_tilde_mean(d, p);
    let (phi_log_mean, phi_log_variance) = phi_log_moments(d, p);

    Ok(ConstantSet {
        d,
        p,
        mu1_k: mk,
        mu1,
        sigma2,
        mu_prime,
        mu2_quarter,
        mu2_tilde_quarter,
        mu_quarter: mu1 + mu2_quarter - mu2_tilde_quarter,
        mu2_half,
        mu2,
        mu2_tilde,
        mu: mu1 + mu2 - mu2_tilde,
        singleton_moments: [1, 2, 3, 4].map(|k| singleton_moment(d, p, k)),
        covariance_bound: covariance_bound(d, p),
        phi_log_mean,
        phi_log_variance,
        phi_log_covariance: phi_log_covariance(d, p),
        regime: entropy::regime_flags(p).into_iter().collect(),
    })
}
