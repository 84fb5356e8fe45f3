//! Counter-based randomness.
//!
//! Every random draw in the crate is a pure function of a 64-bit key and a
//! 64-bit counter, so results never depend on evaluation order or on how work
//! is split across threads. The generator is the SplitMix64 output function
//! evaluated at an arbitrary position of the stream.

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent key from a parent key and a tag (trial index,
/// algorithm step, ...).
#[inline]
pub fn derive(key: u64, tag: u64) -> u64 {
    mix64(mix64(key ^ 0x5851_F42D_4C95_7F2D).wrapping_add(tag.wrapping_mul(GAMMA)))
}

/// A random-access stream of 64-bit words.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
}

impl CounterRng {
    pub fn new(key: u64) -> Self {
        Self { key: mix64(key) }
    }

    /// Child stream for a sub-task, independent of the parent stream.
    pub fn substream(&self, tag: u64) -> Self {
        Self {
            key: derive(self.key, tag),
        }
    }

    #[inline]
    pub fn word(&self, counter: u64) -> u64 {
        mix64(self.key.wrapping_add(counter.wrapping_add(1).wrapping_mul(GAMMA)))
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    #[inline]
    pub fn unit(&self, counter: u64) -> f64 {
        (self.word(counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn bernoulli(&self, counter: u64, threshold: Threshold) -> bool {
        threshold.accepts(self.word(counter))
    }

    /// Exactly uniform integer in [0, bound) by rejection; `attempt` walks the
    /// counter space so the draw stays a pure function of `counter`.
    pub fn below(&self, counter: u64, bound: u64) -> u64 {
        assert!(bound > 0);
        let zone = u64::MAX - (u64::MAX % bound);
        let sub = self.substream(counter);
        let mut attempt = 0;
        loop {
            let w = sub.word(attempt);
            if w < zone {
                return w % bound;
            }
            attempt += 1;
        }
    }

    /// Exactly uniform 128-bit integer in [0, bound).
    pub fn below_u128(&self, counter: u64, bound: u128) -> u128 {
        assert!(bound > 0);
        let zone = u128::MAX - (u128::MAX % bound);
        let sub = self.substream(counter);
        let mut attempt = 0;
        loop {
            let w = ((sub.word(2 * attempt) as u128) << 64) | sub.word(2 * attempt + 1) as u128;
            if w < zone {
                return w % bound;
            }
            attempt += 1;
        }
    }
}

/// Probability quantised to a 64-bit acceptance threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Threshold {
    Never,
    Below(u64),
    Always,
}

impl Threshold {
    pub fn from_probability(p: f64) -> Self {
        if !(p > 0.0) {
            Threshold::Never
        } else if p >= 1.0 {
            Threshold::Always
        } else {
            // p * 2^64, rounded down; p < 1 keeps this below 2^64.
            Threshold::Below((p * 18_446_744_073_709_551_616.0) as u64)
        }
    }

    #[inline]
    pub fn accepts(self, word: u64) -> bool {
        match self {
            Threshold::Never => false,
            Threshold::Always => true,
            Threshold::Below(t) => word < t,
        }
    }
}
