//! Bitwise CRC over GF(2) for short information blocks.
//!
//! Bits are processed MSB-first: the payload polynomial is shifted left by
//! the CRC degree and reduced modulo the generator. The check bits are the
//! remainder, most significant coefficient first.

use serde::{Deserialize, Serialize};

/// A CRC generator polynomial of degree `degree`.
///
/// `poly` holds every coefficient including the leading one, so
/// x^6 + x^5 + 1 is `0b110_0001`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Crc {
    degree: usize,
    poly: u64,
}

impl Crc {
    /// x^6 + x^5 + 1.
    pub const CRC6: Crc = Crc {
        degree: 6,
        poly: 0b110_0001,
    };

    /// Degree-0 "CRC": attaches nothing and accepts every word.
    pub const NONE: Crc = Crc { degree: 0, poly: 1 };

    /// Builds a generator from its full coefficient mask. Returns `None` if
    /// the mask is zero, lacks a constant term, or has degree above 63.
    pub fn new(poly: u64) -> Option<Crc> {
        if poly == 0 || poly & 1 == 0 {
            return None;
        }
        let degree = 63 - poly.leading_zeros() as usize;
        if degree >= 63 {
            return None;
        }
        Some(Crc { degree, poly })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Full coefficient mask including the leading term.
    pub fn poly(&self) -> u64 {
        self.poly
    }

    /// Coefficients from x^degree down to x^0.
    pub fn coefficients(&self) -> Vec<u8> {
        (0..=self.degree)
            .rev()
            .map(|k| ((self.poly >> k) & 1) as u8)
            .collect()
    }

    /// Remainder of `bits(x) * x^degree` modulo the generator.
    pub fn remainder(&self, bits: &[u8]) -> u64 {
        if self.degree == 0 {
            return 0;
        }
        let r = self.degree;
        let mask = (1u64 << r) - 1;
        let low = self.poly & mask;
        let mut reg = 0u64;
        for &b in bits {
            let top = ((reg >> (r - 1)) & 1) ^ u64::from(b & 1);
            reg = (reg << 1) & mask;
            if top == 1 {
                reg ^= low;
            }
        }
        reg
    }

    /// The `degree` check bits for `payload`, MSB first.
    pub fn check_bits(&self, payload: &[u8]) -> Vec<u8> {
        let rem = self.remainder(payload);
        (0..self.degree)
            .rev()
            .map(|k| ((rem >> k) & 1) as u8)
            .collect()
    }

    /// `payload ‖ check bits`.
    pub fn attach(&self, payload: &[u8]) -> Vec<u8> {
        let mut word = payload.to_vec();
        word.extend(self.check_bits(payload));
        word
    }

    /// True iff `word` (payload followed by check bits) is divisible by the
    /// generator. Words shorter than the degree are rejected.
    pub fn check(&self, word: &[u8]) -> bool {
        if word.len() < self.degree {
            return false;
        }
        let split = word.len() - self.degree;
        let rem = self.remainder(&word[..split]);
        word[split..]
            .iter()
            .fold(0u64, |acc, &b| (acc << 1) | u64::from(b & 1))
            == rem
    }
}

impl Default for Crc {
    fn default() -> Self {
        Crc::CRC6
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crc6_coefficients() {
        assert_eq!(Crc::CRC6.degree(), 6);
        assert_eq!(Crc::CRC6.coefficients(), vec![1, 1, 0, 0, 0, 0, 1]);
        assert_eq!(Crc::new(0b110_0001), Some(Crc::CRC6));
        assert_eq!(Crc::new(0b110_0000), None);
    }

    #[test]
    fn zero_payload_has_zero_check_bits() {
        assert_eq!(Crc::CRC6.check_bits(&[0; 26]), vec![0; 6]);
        assert!(Crc::CRC6.check(&[0; 32]));
    }

    #[test]
    fn fixed_payload_remainder() {
        let payload: Vec<u8> = "10110011100011110000101101"
            .bytes()
            .map(|c| c - b'0')
            .collect();
        assert_eq!(Crc::CRC6.check_bits(&payload), vec![1, 0, 1, 1, 1, 1]);
    }

    #[test]
    fn single_bit_errors_detected() {
        let payload: Vec<u8> = (0..26).map(|i| ((i * 7 + 3) % 5 % 2) as u8).collect();
        let word = Crc::CRC6.attach(&payload);
        assert!(Crc::CRC6.check(&word));
        for i in 0..word.len() {
            let mut bad = word.clone();
            bad[i] ^= 1;
            assert!(!Crc::CRC6.check(&bad), "missed error at {i}");
        }
    }

    #[test]
    fn none_accepts_everything() {
        assert_eq!(Crc::NONE.attach(&[1, 0, 1]), vec![1, 0, 1]);
        assert!(Crc::NONE.check(&[1, 1]));
        assert!(!Crc::CRC6.check(&[1, 0]));
    }
}
