//! Exact non-negative dyadic rationals `n / 2^k`.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul};

/// `numerator * 2^(-log2_denominator)`, kept with an odd numerator (or zero
/// with denominator exponent 0) so that equality is structural.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DyadicWeight {
    numerator: BigUint,
    log2_denominator: u64,
}

impl DyadicWeight {
    pub fn new(numerator: BigUint, log2_denominator: u64) -> Self {
        let mut w = Self {
            numerator,
            log2_denominator,
        };
        w.normalize();
        w
    }

    pub fn zero() -> Self {
        Self::new(BigUint::zero(), 0)
    }

    pub fn one() -> Self {
        Self::new(BigUint::one(), 0)
    }

    /// `2^(-k)`.
    pub fn pow2_neg(k: u64) -> Self {
        Self::new(BigUint::one(), k)
    }

    pub fn from_integer(n: impl Into<BigUint>) -> Self {
        Self::new(n.into(), 0)
    }

    /// `sum_k counts[k] * 2^(-k)`.
    pub fn from_histogram<T: Copy + Into<BigUint>>(counts: &[T]) -> Self {
        let Some(top) = counts.len().checked_sub(1) else {
            return Self::zero();
        };
        let mut num = BigUint::zero();
        for (k, &c) in counts.iter().enumerate() {
            let c: BigUint = c.into();
            if !c.is_zero() {
                num += c << (top - k);
            }
        }
        Self::new(num, top as u64)
    }

    fn normalize(&mut self) {
        if self.numerator.is_zero() {
            self.log2_denominator = 0;
            return;
        }
        let tz = self.numerator.trailing_zeros().unwrap_or(0);
        let s = tz.min(self.log2_denominator);
        if s > 0 {
            self.numerator >>= s;
            self.log2_denominator -= s;
        }
    }

    pub fn numerator(&self) -> &BigUint {
        &self.numerator
    }

    pub fn log2_denominator(&self) -> u64 {
        self.log2_denominator
    }

    pub fn is_zero(&self) -> bool {
        self.numerator.is_zero()
    }

    /// Multiplies by `2^k`.
    pub fn scale_pow2(&self, k: u64) -> Self {
        if k <= self.log2_denominator {
            Self::new(self.numerator.clone(), self.log2_denominator - k)
        } else {
            Self::new(&self.numerator << (k - self.log2_denominator), 0)
        }
    }

    /// The value as an integer, if it is one.
    pub fn to_integer(&self) -> Option<BigUint> {
        (self.log2_denominator == 0).then(|| self.numerator.clone())
    }

    pub fn to_rational(&self) -> BigRational {
        BigRational::new(
            BigInt::from(self.numerator.clone()),
            BigInt::from(BigUint::one() << self.log2_denominator),
        )
    }

    /// The 64 leading bits of the numerator and the binary exponent of the
    /// value they represent.
    fn split(&self) -> (f64, f64) {
        let bits = self.numerator.bits();
        let shift = bits.saturating_sub(64);
        let top = (&self.numerator >> shift).to_u64().unwrap_or(u64::MAX) as f64;
        (top, shift as f64 - self.log2_denominator as f64)
    }

    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let (top, e) = self.split();
        let v = top * e.exp2();
        if v.is_finite() && v > 0.0 {
            v
        } else {
            (top.log2() + e).exp2()
        }
    }

    /// `log2` of the value; `-inf` for zero.
    pub fn log2(&self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        let (top, e) = self.split();
        top.log2() + e
    }

    pub fn ln(&self) -> f64 {
        self.log2() * std::f64::consts::LN_2
    }
}

impl Default for DyadicWeight {
    fn default() -> Self {
        Self::zero()
    }
}

impl Ord for DyadicWeight {
    fn cmp(&self, other: &Self) -> Ordering {
        let k = self.log2_denominator.max(other.log2_denominator);
        let a = &self.numerator << (k - self.log2_denominator);
        let b = &other.numerator << (k - other.log2_denominator);
        a.cmp(&b)
    }
}

impl PartialOrd for DyadicWeight {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for &DyadicWeight {
    type Output = DyadicWeight;
    fn add(self, rhs: &DyadicWeight) -> DyadicWeight {
        let k = self.log2_denominator.max(rhs.log2_denominator);
        let a = &self.numerator << (k - self.log2_denominator);
        let b = &rhs.numerator << (k - rhs.log2_denominator);
        DyadicWeight::new(a + b, k)
    }
}

impl Add for DyadicWeight {
    type Output = DyadicWeight;
    fn add(self, rhs: DyadicWeight) -> DyadicWeight {
        &self + &rhs
    }
}

impl AddAssign<&DyadicWeight> for DyadicWeight {
    fn add_assign(&mut self, rhs: &DyadicWeight) {
        *self = &*self + rhs;
    }
}

impl Mul for &DyadicWeight {
    type Output = DyadicWeight;
    fn mul(self, rhs: &DyadicWeight) -> DyadicWeight {
        DyadicWeight::new(
            &self.numerator * &rhs.numerator,
            self.log2_denominator + rhs.log2_denominator,
        )
    }
}

impl Mul for DyadicWeight {
    type Output = DyadicWeight;
    fn mul(self, rhs: DyadicWeight) -> DyadicWeight {
        &self * &rhs
    }
}

impl Sum for DyadicWeight {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::zero(), |a, b| a + b)
    }
}

impl<'a> Sum<&'a DyadicWeight> for DyadicWeight {
    fn sum<I: Iterator<Item = &'a DyadicWeight>>(iter: I) -> Self {
        iter.fold(Self::zero(), |a, b| &a + b)
    }
}

impl fmt::Display for DyadicWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.log2_denominator == 0 {
            write!(f, "{}", self.numerator)
        } else {
            write!(f, "{}/2^{}", self.numerator, self.log2_denominator)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dy(n: u64, k: u64) -> DyadicWeight {
        DyadicWeight::new(BigUint::from(n), k)
    }

    #[test]
    fn canonical_form() {
        assert_eq!(dy(4, 3), dy(1, 1));
        assert_eq!(dy(0, 9), DyadicWeight::zero());
        assert_eq!(dy(0, 9).log2_denominator(), 0);
        assert_eq!(dy(12, 1), dy(6, 0));
        assert_eq!(dy(3, 2).numerator(), &BigUint::from(3u32));
    }

    #[test]
    fn arithmetic() {
        assert_eq!(&dy(1, 1) + &dy(1, 1), DyadicWeight::one());
        assert_eq!(&dy(3, 2) * &dy(1, 3), dy(3, 5));
        assert_eq!(dy(5, 3).scale_pow2(3).to_integer(), Some(BigUint::from(5u32)));
        assert_eq!(dy(5, 3).scale_pow2(1).to_integer(), None);
        assert!(dy(1, 2) < dy(3, 3));
        assert_eq!(DyadicWeight::from_histogram(&[1u64, 0, 2]), dy(3, 1));
        assert_eq!(dy(7, 3).to_f64(), 0.875);
        assert!((dy(1, 2000).log2() + 2000.0).abs() < 1e-12);
    }

    #[test]
    fn huge_values_stay_finite_in_log() {
        let big = DyadicWeight::from_integer(BigUint::one() << 5000u32);
        assert_eq!(big.log2(), 5000.0);
        assert!(big.to_f64().is_infinite());
    }

    proptest! {
        #[test]
        fn agrees_with_rationals(a: u32, ka in 0u64..40, b: u32, kb in 0u64..40) {
            let (x, y) = (dy(a as u64, ka), dy(b as u64, kb));
            prop_assert_eq!((&x + &y).to_rational(), x.to_rational() + y.to_rational());
            prop_assert_eq!((&x * &y).to_rational(), x.to_rational() * y.to_rational());
            prop_assert_eq!(x.cmp(&y), x.to_rational().cmp(&y.to_rational()));
        }
    }
}
