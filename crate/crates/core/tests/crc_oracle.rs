//! CRC-6 (x^6 + x^5 + 1) against a textbook bitwise long division.

use polarbf::crc::Crc;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GENERATOR: [u8; 7] = [1, 1, 0, 0, 0, 0, 1];

/// Remainder of `bits · x^6` divided by the generator, MSB first.
fn long_division(bits: &[u8]) -> Vec<u8> {
    let mut work: Vec<u8> = bits.to_vec();
    work.extend([0u8; 6]);
    for i in 0..bits.len() {
        if work[i] == 1 {
            for (k, g) in GENERATOR.iter().enumerate() {
                work[i + k] ^= g;
            }
        }
    }
    work[bits.len()..].to_vec()
}

fn remainder_of_word(word: &[u8]) -> Vec<u8> {
    let mut work = word.to_vec();
    for i in 0..word.len() - 6 {
        if work[i] == 1 {
            for (k, g) in GENERATOR.iter().enumerate() {
                work[i + k] ^= g;
            }
        }
    }
    work[word.len() - 6..].to_vec()
}

#[test]
fn agrees_with_long_division_on_random_payloads() {
    let crc = Crc::CRC6;
    let mut rng = ChaCha8Rng::seed_from_u64(0xc0c0);
    for _ in 0..10_000 {
        let len = rng.random_range(1..=64);
        let payload: Vec<u8> = (0..len).map(|_| rng.random_range(0..2)).collect();
        let word = crc.attach(&payload);
        assert_eq!(&word[..len], payload.as_slice());
        assert_eq!(&word[len..], long_division(&payload).as_slice());
        assert!(crc.check(&word));
        assert_eq!(remainder_of_word(&word), vec![0; 6]);
    }
}

#[test]
fn every_single_bit_corruption_detected() {
    let crc = Crc::CRC6;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let payload: Vec<u8> = (0..26).map(|_| rng.random_range(0..2)).collect();
        let word = crc.attach(&payload);
        for i in 0..word.len() {
            let mut bad = word.clone();
            bad[i] ^= 1;
            assert!(!crc.check(&bad), "flip at {i} undetected");
            assert_ne!(remainder_of_word(&bad), vec![0; 6]);
        }
    }
}

#[test]
fn code_payload_fixture() {
    // 26-bit payload of the (64, 32) code, remainder by hand division.
    let payload: Vec<u8> = "10110011100011110000101101".bytes().map(|b| b - b'0').collect();
    assert_eq!(long_division(&payload), vec![1, 0, 1, 1, 1, 1]);
    assert_eq!(Crc::CRC6.check_bits(&payload), vec![1, 0, 1, 1, 1, 1]);
}
