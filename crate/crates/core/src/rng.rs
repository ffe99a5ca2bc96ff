//! Counter-based random streams.
//!
//! [`RngStream`] is Philox4x32-10 keyed by a hash of `(seed, purpose tag, index)`.
//! Any stream can be reconstructed from those three numbers without replaying
//! other streams, which is what makes trial-level parallelism reproducible.
//! Gaussian variates use the inverse CDF, so they only depend on `libm`.

use crate::math::inverse_normal_cdf;

const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;

#[inline]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let product = u64::from(a) * u64::from(b);
    ((product >> 32) as u32, product as u32)
}

/// The Philox4x32 bijection with 10 rounds.
pub fn philox4x32_10(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut c = counter;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(PHILOX_W0);
            k[1] = k[1].wrapping_add(PHILOX_W1);
        }
        let (hi0, lo0) = mulhilo(PHILOX_M0, c[0]);
        let (hi1, lo1) = mulhilo(PHILOX_M1, c[2]);
        c = [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0];
    }
    c
}

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash of `(seed, tag, index)` used as a stream key.
pub fn stream_id(seed: u64, tag: u64, index: u64) -> u64 {
    let a = mix64(seed.wrapping_add(0x9E37_79B9_7F4A_7C15));
    let b = mix64(a ^ tag.wrapping_mul(0xD1B5_4A32_D192_ED03));
    mix64(b ^ index.wrapping_mul(0x8CB9_2BA7_2F3D_8DD7))
}

/// A single-owner random stream.
#[derive(Debug, Clone)]
pub struct RngStream {
    key: [u32; 2],
    block: u64,
    buffer: [u32; 4],
    used: usize,
}

impl RngStream {
    /// Stream identified by `(seed, tag, index)`.
    pub fn new(seed: u64, tag: u64, index: u64) -> Self {
        Self::from_key(stream_id(seed, tag, index))
    }

    pub fn from_key(key: u64) -> Self {
        Self { key: [key as u32, (key >> 32) as u32], block: 0, buffer: [0; 4], used: 4 }
    }

    /// An independent child stream; does not advance `self`.
    pub fn split(&self, tag: u64, index: u64) -> Self {
        let key = u64::from(self.key[0]) | (u64::from(self.key[1]) << 32);
        Self::new(key, tag, index)
    }

    #[inline]
    pub fn next_u32(&mut self) -> u32 {
        if self.used == 4 {
            let counter = [self.block as u32, (self.block >> 32) as u32, 0, 0];
            self.buffer = philox4x32_10(counter, self.key);
            self.block = self.block.wrapping_add(1);
            self.used = 0;
        }
        let v = self.buffer[self.used];
        self.used += 1;
        v
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let lo = u64::from(self.next_u32());
        let hi = u64::from(self.next_u32());
        lo | (hi << 32)
    }

    /// Uniform on the open interval `(0, 1)` with 53 random bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        inverse_normal_cdf(self.next_f64())
    }

    #[inline]
    pub fn normal(&mut self, mean: f64, sd: f64) -> f64 {
        mean + sd * self.standard_normal()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Known-answer vectors from the Random123 distribution.
    #[test]
    fn philox_known_answers() {
        assert_eq!(philox4x32_10([0, 0, 0, 0], [0, 0]), [0x6627_e8d5, 0xe169_c58d, 0xbc57_ac4c, 0x9b00_dbd8]);
        assert_eq!(
            philox4x32_10([u32::MAX; 4], [u32::MAX; 2]),
            [0x408f_276d, 0x41c8_3b0e, 0xa20b_c7c6, 0x6d54_51fd]
        );
        assert_eq!(
            philox4x32_10([0x243f_6a88, 0x85a3_08d3, 0x1319_8a2e, 0x0370_7344], [0xa409_3822, 0x299f_31d0]),
            [0xd16c_fe09, 0x94fd_cceb, 0x5001_e420, 0x2412_6ea1]
        );
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let mut a = RngStream::new(7, 1, 3);
        let mut b = RngStream::new(7, 1, 3);
        let mut c = RngStream::new(7, 1, 4);
        let xs: alloc::vec::Vec<u64> = (0..16).map(|_| a.next_u64()).collect();
        let ys: alloc::vec::Vec<u64> = (0..16).map(|_| b.next_u64()).collect();
        let zs: alloc::vec::Vec<u64> = (0..16).map(|_| c.next_u64()).collect();
        assert_eq!(xs, ys);
        assert_ne!(xs, zs);
    }

    #[test]
    fn uniform_is_open_interval_and_centered() {
        let mut s = RngStream::new(1, 2, 3);
        let n = 200_000;
        let mut total = 0.0;
        for _ in 0..n {
            let u = s.next_f64();
            assert!(u > 0.0 && u < 1.0);
            total += u;
        }
        let mean = total / n as f64;
        // 5 standard errors of a uniform mean
        assert!((mean - 0.5).abs() < 5.0 * (1.0 / 12.0f64).sqrt() / (n as f64).sqrt());
    }

    #[test]
    fn normal_moments() {
        let mut s = RngStream::new(11, 0, 0);
        let n = 200_000;
        let draws: alloc::vec::Vec<f64> = (0..n).map(|_| s.standard_normal()).collect();
        let m = crate::math::mean(&draws);
        let v = crate::math::sample_std(&draws).powi(2);
        assert!(m.abs() < 5.0 / (n as f64).sqrt());
        assert!((v - 1.0).abs() < 5.0 * (2.0f64).sqrt() / (n as f64).sqrt());
    }
}
