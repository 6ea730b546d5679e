mod common;

use common::{code_64_32, frame};
use polarbf::bp::{decode, run_bp, BpState, BpTrace, DecoderConfig};
use polarbf::channel::{transmit, ChannelConfig};
use polarbf::polar::{crc_check, encode, CodeConfig};
use proptest::prelude::*;

#[test]
fn noiseless_round_trip_of_random_frames() {
    let cfg = code_64_32();
    let dec = DecoderConfig::default();
    let mut ch = ChannelConfig::new(0.0, cfg.rate(), 11).unwrap();
    ch.noiseless = true;
    for i in 0..1000 {
        let f = frame(&cfg, &ch, i, dec.llr_max);
        let run = run_bp(&f.llrs, &cfg, &dec, None).unwrap();
        assert_eq!(run.u_hat, f.u, "frame {i}");
        assert!(cfg.frozen_set().iter().all(|&j| run.u_hat[j] == 0));
        assert!(crc_check(&run.info_bits, &cfg));
        assert_eq!(run.trace.iterations(), 5);
    }
}

#[test]
fn all_zero_codeword_at_4db() {
    // Measured 8627 / 10000 passes for this seed; the bound sits ~7σ below.
    let cfg = code_64_32();
    let dec = DecoderConfig::default();
    let ch = ChannelConfig::new(4.0, cfg.rate(), 2024).unwrap();
    let passes = (0..10_000u64)
        .filter(|&i| {
            let rx = transmit(&[0u8; 64], &ch, i, dec.llr_max);
            crc_check(&decode(&rx.llrs, &cfg, &dec, None).unwrap().info_bits, &cfg)
        })
        .count();
    assert!(passes > 8400, "{passes} / 10000");
}

#[test]
fn zero_channel_is_a_fixed_point() {
    let cfg = code_64_32();
    let dec = DecoderConfig::default();
    let run = run_bp(&[0.0; 64], &cfg, &dec, None).unwrap();
    for snap in run.trace.snapshots() {
        for j in 0..64 {
            for i in 0..=cfg.stages() {
                if i > 0 || cfg.is_info(j) {
                    assert_eq!(snap.l_at(i, j), 0.0);
                }
            }
        }
    }
    assert_eq!(run.u_hat, vec![0; 64]);
}

#[test]
fn trace_serialization_round_trip() {
    let cfg = code_64_32();
    let ch = ChannelConfig::new(1.0, cfg.rate(), 3).unwrap();
    let f = frame(&cfg, &ch, 0, 100.0);
    let run = run_bp(&f.llrs, &cfg, &DecoderConfig::default(), None).unwrap();
    let bytes = run.trace.to_bytes();
    assert_eq!(&bytes[..4], b"PBPT");
    assert_eq!(bytes.len(), 4 + 4 * 4 + 5 * 2 * 7 * 64 * 4);
    let back = BpTrace::from_bytes(&bytes).unwrap();
    for (a, b) in back.snapshots().iter().zip(run.trace.snapshots()) {
        for (x, y) in a.l().iter().zip(b.l()).chain(a.r().iter().zip(b.r())) {
            assert_eq!(*x, f64::from(*y as f32));
        }
    }
    assert!(BpTrace::from_bytes(&bytes[..bytes.len() - 1]).is_err());
}

fn llr_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-150.0f64..150.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn messages_stay_bounded(llrs in llr_vec(64), iters in 1usize..8) {
        let cfg = code_64_32();
        let dec = DecoderConfig::new(iters, 100.0).unwrap();
        let clamped: Vec<f64> = llrs.iter().map(|v| v.clamp(-100.0, 100.0)).collect();
        let run = run_bp(&clamped, &cfg, &dec, None).unwrap();
        for snap in run.trace.snapshots() {
            prop_assert!(snap.max_abs() <= 100.0);
            prop_assert!(snap.l().iter().chain(snap.r()).all(|v| v.is_finite()));
        }
    }

    #[test]
    fn decoding_is_deterministic(llrs in llr_vec(64)) {
        let cfg = code_64_32();
        let dec = DecoderConfig::default();
        let a = run_bp(&llrs, &cfg, &dec, None).unwrap();
        let b = run_bp(&llrs, &cfg, &dec, None).unwrap();
        prop_assert_eq!(a.trace.to_bytes(), b.trace.to_bytes());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn snapshots_equal_live_states(llrs in llr_vec(64)) {
        let cfg = code_64_32();
        let dec = DecoderConfig::default();
        let run = run_bp(&llrs, &cfg, &dec, None).unwrap();
        let priors = polarbf::bp::init_priors(&cfg, &dec, None).unwrap();
        let mut live = BpState::new(&cfg, &priors, &llrs).unwrap();
        for snap in run.trace.snapshots() {
            live.iterate(dec.llr_max);
            prop_assert_eq!(snap, &live);
        }
        // Earlier snapshots are not aliased to the final state.
        let short = run_bp(&llrs, &cfg, &DecoderConfig::new(2, 100.0).unwrap(), None).unwrap();
        prop_assert_eq!(&short.trace.snapshots()[1], &run.trace.snapshots()[1]);
    }

    /// Translating the channel by a codeword translates the decision: with
    /// c = u_c·G, negating the LLRs where c = 1 gives û ⊕ u_c wherever the
    /// stage-0 marginal is nonzero.
    #[test]
    fn codeword_translation_symmetry(llrs in llr_vec(64), seed in any::<u64>()) {
        let cfg = code_64_32();
        let dec = DecoderConfig::default();
        let ch = ChannelConfig::new(0.0, cfg.rate(), seed).unwrap();
        let other = frame(&cfg, &ch, 0, 100.0);
        let c = encode(&other.u, &cfg).unwrap().into_bits();
        let clamped: Vec<f64> = llrs.iter().map(|v| v.clamp(-100.0, 100.0)).collect();
        let moved: Vec<f64> = clamped
            .iter()
            .zip(&c)
            .map(|(v, &b)| if b == 1 { -v } else { *v })
            .collect();
        let a = run_bp(&clamped, &cfg, &dec, None).unwrap();
        let b = run_bp(&moved, &cfg, &dec, None).unwrap();
        let last = a.trace.snapshots().last().unwrap();
        for j in 0..64 {
            if last.l_at(0, j) + last.r_at(0, j) != 0.0 {
                prop_assert_eq!(b.u_hat[j], a.u_hat[j] ^ other.u[j], "position {}", j);
            }
        }
    }
}

#[test]
fn small_code_noiseless_round_trip_is_exhaustive() {
    let cfg = CodeConfig::from_info_set(8, &[3, 5, 6, 7], polarbf::crc::Crc::NONE).unwrap();
    let dec = DecoderConfig::default();
    for word in 0u8..16 {
        let mut u = vec![0u8; 8];
        for (k, &pos) in cfg.info_set().iter().enumerate() {
            u[pos] = (word >> k) & 1;
        }
        let x = encode(&u, &cfg).unwrap().into_bits();
        let llrs: Vec<f64> = x.iter().map(|&b| if b == 0 { 100.0 } else { -100.0 }).collect();
        assert_eq!(decode(&llrs, &cfg, &dec, None).unwrap().u_hat, u);
    }
}
