//! Binary relative entropy, binomial tail bounds and the threshold constants
//! derived from them. All logarithms are base 2.

use crate::error::{Error, Result};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;
use std::sync::OnceLock;

fn xlog2(x: f64, y: f64) -> f64 {
    // x * log2(x / y) with 0 log 0 = 0
    if x == 0.0 {
        0.0
    } else {
        x * (x / y).log2()
    }
}

/// `H_p(q)`, the relative entropy of Bernoulli(q) with respect to Bernoulli(p).
pub fn relative_entropy(p: f64, q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) || !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("relative_entropy({p}, {q}) outside [0,1]")));
    }
    if p == 0.0 || p == 1.0 {
        if q == p {
            return Ok(0.0);
        }
        return Err(Error::Domain(format!(
            "relative_entropy undefined for p={p}, q={q}"
        )));
    }
    Ok(xlog2(q, p) + xlog2(1.0 - q, 1.0 - p))
}

fn h(p: f64, q: f64) -> f64 {
    relative_entropy(p, q).expect("arguments checked by caller")
}

/// `2^(-n H_p(q))`, an upper bound on `P[Bin(n,p) >= nq]` for `q >= p`.
pub fn binomial_tail_bound(n: u64, p: f64, q: f64) -> Result<f64> {
    if q < p {
        return Err(Error::Contract(format!("tail bound needs q >= p, got q={q} < p={p}")));
    }
    Ok((-(n as f64) * relative_entropy(p, q)?).exp2())
}

fn binomial(n: u64, k: u64) -> BigUint {
    let mut c = BigUint::one();
    for i in 0..k {
        c = c * (n - i) / (i + 1);
    }
    c
}

/// `P[Bin(n,p) >= nq]` exactly, for `p` and `q` given as rationals.
pub fn exact_binomial_tail(n: u64, p: &BigRational, q: &BigRational) -> BigRational {
    let nq = q * BigRational::from_integer(BigInt::from(n));
    let k0 = nq.ceil().to_integer().to_u64().unwrap_or(0);
    let one = BigRational::one();
    let mut tail = BigRational::zero();
    for k in k0..=n {
        let c = BigRational::from_integer(BigInt::from(binomial(n, k)));
        tail += c * num_traits::pow(p.clone(), k as usize)
            * num_traits::pow(&one - p, (n - k) as usize);
    }
    tail
}

/// `f_m(p) = inf_s (m s + H_p(s))` and its minimiser `s* = p / ((1-p) 2^m + p)`.
pub fn f_min(m: u32, p: f64) -> Result<(f64, f64)> {
    if m == 0 {
        return Err(Error::Domain("f_min needs m >= 1".into()));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("f_min needs p in (0,1), got {p}")));
    }
    let s = p / ((1.0 - p) * (m as f64).exp2() + p);
    Ok((m as f64 * s + h(p, s), s))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DimerExponent {
    pub s_star: f64,
    /// `max_s 1 - 2s - 2 H_p(s) = 1 - 2 f_1(p)`.
    pub max_value: f64,
    /// `|(2-p)^2 / 2 - 2^max_value|`.
    pub residual: f64,
}

pub fn dimer_exponent_identity(p: f64) -> Result<DimerExponent> {
    let (f1, s_star) = f_min(1, p)?;
    let max_value = 1.0 - 2.0 * f1;
    Ok(DimerExponent {
        s_star,
        max_value,
        residual: ((2.0 - p).powi(2) / 2.0 - max_value.exp2()).abs(),
    })
}

/// Bisection to absolute width `tol` on a bracket with a sign change.
pub fn bisect(name: &str, f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(Error::Bracket {
            name: name.to_string(),
            lo,
            hi,
            f_lo: fa,
            f_hi: fb,
        });
    }
    let neg_at_a = fa < 0.0;
    while b - a > tol {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if (fm < 0.0) == neg_at_a {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

const ROOT_TOL: f64 = 1e-13;

/// The two solutions of `H_p(t) = level` around `t = p`.
fn entropy_level_roots(p: f64, level: f64) -> Result<(f64, f64)> {
    let lo = bisect("entropy level (low)", |t| h(p, t) - level, 0.0, p, ROOT_TOL)?;
    let hi = bisect("entropy level (high)", |t| h(p, t) - level, p, 1.0, ROOT_TOL)?;
    Ok((lo, hi))
}

/// `sup { 1 - 2 H_p(t) - 2t : 1 - 2 H_p(t) < log2(2-p) }`; the worst-case
/// adjacency bound works exactly when this is negative.
pub fn worst_case_exponent(p: f64) -> Result<f64> {
    let level = (1.0 - (2.0 - p).log2()) / 2.0;
    let (t_low, _t_high) = entropy_level_roots(p, level)?;
    let s_star = p / (2.0 - p);
    if s_star < t_low {
        Ok(((2.0 - p).powi(2) / 2.0).log2())
    } else {
        // the supremum sits on the boundary t_low; beyond t_high the objective is smaller
        Ok((2.0 - p).log2() - 2.0 * t_low)
    }
}

/// Whether the worst-case predicate holds at `p`.
pub fn worst_case_predicate(p: f64) -> Result<bool> {
    Ok(worst_case_exponent(p)? < 0.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct Threshold {
    pub name: &'static str,
    pub value: f64,
    /// Interval handed to bisection.
    pub bracket: (f64, f64),
    /// `|f(value)|` for the defining function.
    pub residual: f64,
    /// Interval the value is expected to land in.
    pub expected: (f64, f64),
    /// Second root of the defining quadratic, where there is one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub companion: Option<f64>,
}

impl Threshold {
    pub fn in_expected(&self) -> bool {
        self.expected.0 < self.value && self.value < self.expected.1
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdTable {
    pub entries: Vec<Threshold>,
}

impl ThresholdTable {
    pub fn get(&self, name: &str) -> Option<&Threshold> {
        self.entries.iter().find(|t| t.name == name)
    }

    pub fn value(&self, name: &str) -> f64 {
        self.get(name).map(|t| t.value).unwrap_or(f64::NAN)
    }
}

fn solve(
    name: &'static str,
    f: impl Fn(f64) -> f64,
    bracket: (f64, f64),
    expected: (f64, f64),
) -> Result<Threshold> {
    let value = bisect(name, &f, bracket.0, bracket.1, ROOT_TOL)?;
    Ok(Threshold {
        name,
        value,
        bracket,
        residual: f(value).abs(),
        expected,
        companion: None,
    })
}

fn quadratic_roots(a: f64, b: f64, c: f64) -> (f64, f64) {
    let disc = (b * b - 4.0 * a * c).sqrt();
    ((-b - disc) / (2.0 * a), (-b + disc) / (2.0 * a))
}

fn compute_thresholds() -> Result<ThresholdTable> {
    let mut entries = Vec::new();
    for k in 1..=3u32 {
        let name = ["p_1", "p_2", "p_3"][k as usize - 1];
        let closed = 2.0 - (k as f64 / (k as f64 + 1.0)).exp2();
        entries.push(solve(
            name,
            |p| (2.0 - p).powi(k as i32 + 1) - (k as f64).exp2(),
            (0.0, 1.0),
            (closed - 1e-12, closed + 1e-12),
        )?);
    }
    entries.push(solve(
        "worst_case",
        |p| worst_case_exponent(p).unwrap_or(f64::NAN),
        (0.5, 0.6),
        (0.548, 0.549),
    )?);

    let pair = solve(
        "gamma_pair",
        |p| f_min(1, p).unwrap().0 + f_min(2, p).unwrap().0 - 1.0,
        (0.01, 0.99),
        (0.0, 1.0),
    )?;
    let third = solve(
        "gamma_third",
        |p| f_min(1, p).unwrap().0 - 1.0 / 3.0,
        (0.01, 0.99),
        (0.0, 1.0),
    )?;
    let (bind, other) = if pair.value >= third.value {
        (pair, third)
    } else {
        (third, pair)
    };
    entries.push(Threshold {
        name: "gamma",
        value: bind.value,
        bracket: bind.bracket,
        residual: bind.residual.max(other.residual),
        expected: (0.46, 0.47),
        companion: Some(other.value),
    });

    entries.push(solve(
        "sigma_unit",
        |p| 2.0 - 1.5 * p - 1.0,
        (0.5, 0.8),
        (0.666, 0.667),
    )?);

    let q = |a: f64, b: f64, c: f64| move |p: f64| a * p * p + b * p + c;
    let mut t = solve("mu1_fourth_term", q(225.0 / 64.0, -6.0, 2.0), (0.3, 0.6), (0.454, 0.455))?;
    t.companion = Some(quadratic_roots(225.0 / 64.0, -6.0, 2.0).1);
    entries.push(t);

    entries.push(solve(
        "dimer_mean_scale",
        |p| ((2.0 - p).powi(2) / 2.0).powi(2) - (2.0 - 1.5 * p),
        (0.4, 0.6),
        (0.508, 0.509),
    )?);

    let mut t = solve("mu1_third_term", q(49.0 / 16.0, -5.5, 2.0), (0.3, 0.6), (0.506, 0.507))?;
    t.companion = Some(quadratic_roots(49.0 / 16.0, -5.5, 2.0).1);
    entries.push(t);

    entries.push(solve(
        "dimer_variance",
        |p| (1.0 - 0.75 * p).powi(2) - 0.5,
        (0.2, 0.6),
        (0.3905, 0.3906),
    )?);
    Ok(ThresholdTable { entries })
}

/// Every threshold constant, solved once per process.
pub fn thresholds() -> Result<ThresholdTable> {
    static TABLE: OnceLock<std::result::Result<ThresholdTable, String>> = OnceLock::new();
    TABLE
        .get_or_init(|| compute_thresholds().map_err(|e| e.to_string()))
        .clone()
        .map_err(Error::Regime)
}

/// `(name, p > value)` for every threshold.
pub fn regime_flags(p: f64) -> Vec<(String, bool)> {
    match thresholds() {
        Ok(t) => t
            .entries
            .iter()
            .map(|e| (format!("above_{}", e.name), p > e.value))
            .collect(),
        Err(_) => Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn entropy(q: f64) -> f64 {
        -xlog2(q, 1.0) - xlog2(1.0 - q, 1.0)
    }

    #[test]
    fn relative_entropy_examples() {
        assert_eq!(relative_entropy(0.3, 0.3).unwrap(), 0.0);
        assert_abs_diff_eq!(relative_entropy(0.5, 1.0).unwrap(), 1.0);
        let direct = 0.8 * 1.6f64.log2() + 0.2 * 0.4f64.log2();
        assert_abs_diff_eq!(relative_entropy(0.5, 0.8).unwrap(), direct, epsilon = 1e-15);
        // H(q||p) = cross-entropy - entropy
        let cross = -(0.8 * 0.5f64.log2() + 0.2 * 0.5f64.log2());
        assert_abs_diff_eq!(relative_entropy(0.5, 0.8).unwrap(), cross - entropy(0.8), epsilon = 1e-15);
        assert_eq!(relative_entropy(0.0, 0.0).unwrap(), 0.0);
        assert!(matches!(relative_entropy(1.0, 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn tail_bound_examples() {
        let pt = |x: f64| BigRational::from_float(x).unwrap();
        assert_abs_diff_eq!(binomial_tail_bound(7, 0.3, 1.0).unwrap(), 0.3f64.powi(7), epsilon = 1e-15);
        let tail = exact_binomial_tail(10, &pt(0.5), &BigRational::new(4.into(), 5.into()));
        assert_eq!(tail, BigRational::new(56.into(), 1024.into()));
        assert!(tail.to_f64().unwrap() <= binomial_tail_bound(10, 0.5, 0.8).unwrap());
        assert!(matches!(binomial_tail_bound(10, 0.5, 0.4), Err(Error::Contract(_))));
    }

    #[test]
    fn f_min_examples() {
        assert_abs_diff_eq!(f_min(1, 0.5).unwrap().0, 2.0 - 3f64.log2(), epsilon = 1e-12);
        assert_abs_diff_eq!(f_min(2, 0.5).unwrap().0, 3.0 - 5f64.log2(), epsilon = 1e-12);
        for m in 1..=6 {
            let closed = m as f64 + 1.0 - ((m as f64).exp2() + 1.0).log2();
            assert_abs_diff_eq!(f_min(m, 0.5).unwrap().0, closed, epsilon = 1e-12);
        }
    }

    #[test]
    fn f_min_beats_grid_search() {
        for m in 1..=4 {
            for &p in &[0.1, 0.35, 0.5, 0.77, 0.95] {
                let (v, s) = f_min(m, p).unwrap();
                assert!(s < p);
                let grid = (0..=20_000)
                    .map(|i| i as f64 / 20_000.0)
                    .map(|t| m as f64 * t + h(p, t))
                    .fold(f64::INFINITY, f64::min);
                assert!(grid >= v - 1e-12);
            }
        }
    }

    #[test]
    fn f_min_strictly_increasing() {
        for m in 1..=3 {
            let mut prev = f_min(m, 1e-3).unwrap().0;
            for i in 2..1000 {
                let cur = f_min(m, i as f64 * 1e-3).unwrap().0;
                assert!(cur > prev);
                prev = cur;
            }
        }
    }

    #[test]
    fn dimer_exponent_examples() {
        let e = dimer_exponent_identity(0.5).unwrap();
        assert_abs_diff_eq!(e.max_value.exp2(), 9.0 / 8.0, epsilon = 1e-14);
        let e = dimer_exponent_identity(1.0 - 1e-12).unwrap();
        assert_abs_diff_eq!(e.max_value.exp2(), 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(e.s_star, 1.0, epsilon = 1e-9);
        for i in 1..1000 {
            assert!(dimer_exponent_identity(i as f64 / 1000.0).unwrap().residual < 1e-12);
        }
    }

    #[test]
    fn worst_case_predicate_brackets() {
        assert!(worst_case_predicate(0.56).unwrap());
        assert!(!worst_case_predicate(0.54).unwrap());
    }

    #[test]
    fn threshold_table() {
        let t = thresholds().unwrap();
        assert_eq!(t.entries.len(), 10);
        for e in &t.entries {
            assert!(e.residual < 1e-9, "{}: residual {}", e.name, e.residual);
            assert!(e.in_expected(), "{}: {} not in {:?}", e.name, e.value, e.expected);
        }
        assert_abs_diff_eq!(t.value("p_1"), 2.0 - 2f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(t.value("p_2"), 2.0 - 2f64.powf(2.0 / 3.0), epsilon = 1e-12);
        assert_abs_diff_eq!(t.value("sigma_unit"), 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.value("dimer_variance"), 2.0 / 3.0 * (2.0 - 2f64.sqrt()), epsilon = 1e-12);
        assert_abs_diff_eq!(t.get("mu1_fourth_term").unwrap().companion.unwrap(), 1.2524, epsilon = 1e-4);
        assert_abs_diff_eq!(t.get("mu1_third_term").unwrap().companion.unwrap(), 1.289, epsilon = 1e-3);
    }

    #[test]
    fn bracket_failure_is_reported() {
        match bisect("square", |x| x * x + 1.0, -1.0, 1.0, 1e-9) {
            Err(Error::Bracket { lo, hi, .. }) => assert_eq!((lo, hi), (-1.0, 1.0)),
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #[test]
        fn small_relative_entropy_bound(p in 1e-4f64..0.099, frac in 0.0f64..1.0) {
            let x = 10.0 * p + frac * (1.0 - 10.0 * p);
            prop_assert!(relative_entropy(p, x).unwrap() >= 0.5 * x * (x / p).log2() - 1e-12);
        }

        #[test]
        fn relative_entropy_convex(p in 0.01f64..0.99, a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let lhs = h(p, a) + h(p, b);
            prop_assert!(lhs >= 2.0 * h(p, (a + b) / 2.0) - 1e-12);
            prop_assert!(h(p, a) >= 0.0);
        }

        #[test]
        fn tail_bound_dominates_exact_tail(n in 1u64..=40, pi in 1u32..20, qi in 0u32..=20) {
            let p = pi as f64 / 20.0;
            let q = (qi.max(pi)) as f64 / 20.0;
            let pr = BigRational::new(pi.into(), 20.into());
            let qr = BigRational::new(qi.max(pi).into(), 20.into());
            let tail = exact_binomial_tail(n, &pr, &qr).to_f64().unwrap();
            prop_assert!(tail <= binomial_tail_bound(n, p, q).unwrap() * (1.0 + 1e-12));
        }
    }
}
