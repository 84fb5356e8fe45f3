//! Small summary statistics with fixed summation order.

use statrs::distribution::{ContinuousCDF, Normal};
use std::collections::BTreeMap;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn sum(xs: &[f64]) -> f64 {
    let mut k = KahanSum::default();
    xs.iter().for_each(|&x| k.add(x));
    k.value()
}

pub fn mean(xs: &[f64]) -> f64 {
    sum(xs) / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let mut k = KahanSum::default();
    xs.iter().for_each(|&x| k.add((x - m) * (x - m)));
    k.value() / (xs.len() as f64 - 1.0)
}

/// Standard error of the mean.
pub fn std_error(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

pub fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let (mx, my) = (mean(xs), mean(ys));
    let mut k = KahanSum::default();
    xs.iter().zip(ys).for_each(|(&x, &y)| k.add((x - mx) * (y - my)));
    k.value() / (xs.len() as f64 - 1.0)
}

/// Standard error of the sample covariance, from the spread of the centred products.
pub fn covariance_se(xs: &[f64], ys: &[f64]) -> f64 {
    let (mx, my) = (mean(xs), mean(ys));
    let prods: Vec<f64> = xs.iter().zip(ys).map(|(&x, &y)| (x - mx) * (y - my)).collect();
    std_error(&prods)
}

pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    covariance(xs, ys) / (variance(xs) * variance(ys)).sqrt()
}

fn central_moment(xs: &[f64], k: i32) -> f64 {
    let m = mean(xs);
    let mut s = KahanSum::default();
    xs.iter().for_each(|&x| s.add((x - m).powi(k)));
    s.value() / xs.len() as f64
}

pub fn skewness(xs: &[f64]) -> f64 {
    central_moment(xs, 3) / central_moment(xs, 2).powf(1.5)
}

pub fn excess_kurtosis(xs: &[f64]) -> f64 {
    central_moment(xs, 4) / central_moment(xs, 2).powi(2) - 3.0
}

/// One-sample Kolmogorov-Smirnov distance to the standard normal.
pub fn ks_standard_normal(xs: &[f64]) -> f64 {
    let n = Normal::new(0.0, 1.0).unwrap();
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let len = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = n.cdf(x);
            (f - i as f64 / len).abs().max(((i + 1) as f64 / len - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Total variation distance between two laws on the same keys; missing keys
/// count as zero mass.
pub fn tv_distance<K: Ord>(a: &BTreeMap<K, f64>, b: &BTreeMap<K, f64>) -> f64 {
    let mut s = KahanSum::default();
    for (k, &pa) in a {
        s.add((pa - b.get(k).copied().unwrap_or(0.0)).abs());
    }
    for (k, &pb) in b {
        if !a.contains_key(k) {
            s.add(pb);
        }
    }
    s.value() / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn kahan_recovers_small_terms() {
        let mut k = KahanSum::default();
        k.add(1.0);
        for _ in 0..1_000_000 {
            k.add(1e-16);
        }
        assert_abs_diff_eq!(k.value(), 1.0 + 1e-10, epsilon = 1e-15);
    }

    #[test]
    fn moments_of_a_small_sample() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&xs), 2.5);
        assert_abs_diff_eq!(variance(&xs), 5.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(skewness(&xs), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(correlation(&xs, &[2.0, 4.0, 6.0, 8.0]), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn ks_of_normal_quantiles_is_small() {
        let n = Normal::new(0.0, 1.0).unwrap();
        let xs: Vec<f64> = (0..1000).map(|i| n.inverse_cdf((i as f64 + 0.5) / 1000.0)).collect();
        assert!(ks_standard_normal(&xs) < 0.0006);
        let shifted: Vec<f64> = xs.iter().map(|x| x + 1.0).collect();
        assert!(ks_standard_normal(&shifted) > 0.3);
    }

    #[test]
    fn tv_examples() {
        let a = BTreeMap::from([(0, 0.5), (1, 0.5)]);
        let b = BTreeMap::from([(1, 0.5), (2, 0.5)]);
        assert_abs_diff_eq!(tv_distance(&a, &b), 0.5);
        assert_eq!(tv_distance(&a, &a), 0.0);
    }
}
