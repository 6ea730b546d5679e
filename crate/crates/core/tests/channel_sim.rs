use polarbf::channel::{frame_rng, transmit, ChannelConfig, SnrMode};
use rand::Rng;

/// Q(x) = erfc(x / √2) / 2, via the Abramowitz–Stegun 7.1.26 erfc fit
/// (absolute error below 1.5e-7).
fn q_function(x: f64) -> f64 {
    let z = x / std::f64::consts::SQRT_2;
    let t = 1.0 / (1.0 + 0.327_591_1 * z);
    let poly = t
        * (0.254_829_592
            + t * (-0.284_496_736 + t * (1.421_413_741 + t * (-1.453_152_027 + t * 1.061_405_429))));
    0.5 * poly * (-z * z).exp()
}

#[test]
fn noise_variance_formula() {
    let ch = ChannelConfig::new(0.0, 0.5, 0).unwrap();
    assert!((ch.noise_var() - 1.0).abs() < 1e-15);
    let ch = ChannelConfig::new(3.0, 0.5, 0).unwrap();
    assert!((ch.noise_var() - 1.0 / 10f64.powf(0.3)).abs() < 1e-15);
    let mut es = ChannelConfig::new(0.0, 0.5, 0).unwrap();
    es.mode = SnrMode::EsN0;
    assert!((es.noise_var() - 0.5).abs() < 1e-15);
}

#[test]
fn noise_mean_and_variance() {
    let ch = ChannelConfig::new(1.0, 0.5, 99).unwrap();
    let var = ch.noise_var();
    let n = 64 * 4000;
    let mut sum = 0.0;
    let mut sq = 0.0;
    for f in 0..4000 {
        let rx = transmit(&[0u8; 64], &ch, f, 1e9);
        for y in rx.y {
            let e = y - 1.0;
            sum += e;
            sq += e * e;
        }
    }
    let mean = sum / n as f64;
    let v = sq / n as f64 - mean * mean;
    assert!(mean.abs() < 4.0 * (var / n as f64).sqrt(), "mean {mean}");
    // Var of the sample variance is 2σ⁴/n.
    assert!((v - var).abs() < 4.0 * var * (2.0 / n as f64).sqrt(), "var {v} vs {var}");
}

#[test]
fn uncoded_ber_matches_q_function() {
    for db in [0.0, 2.0, 4.0] {
        let ch = ChannelConfig::new(db, 1.0, 5).unwrap();
        let frames = 4000u64;
        let errors: usize = (0..frames)
            .map(|f| {
                let bits: Vec<u8> = (0..64).map(|k| ((f as usize + k) % 2) as u8).collect();
                let rx = transmit(&bits, &ch, f, 100.0);
                bits.iter()
                    .zip(&rx.llrs)
                    .filter(|(&b, &l)| (l < 0.0) != (b == 1))
                    .count()
            })
            .sum();
        let n = (frames * 64) as f64;
        let p = q_function((2.0 * 10f64.powf(db / 10.0)).sqrt());
        let ber = errors as f64 / n;
        assert!((ber - p).abs() < 4.0 * (p * (1.0 - p) / n).sqrt(), "{db} dB: {ber} vs {p}");
    }
}

#[test]
fn q_function_reference_values() {
    assert!((q_function(0.0) - 0.5).abs() < 1e-7);
    assert!((q_function(1.0) - 0.158_655_25).abs() < 1e-7);
    assert!((q_function(2.0) - 0.022_750_13).abs() < 1e-7);
}

#[test]
fn frames_reproduce_in_isolation() {
    let ch = ChannelConfig::new(2.0, 0.5, 1234).unwrap();
    let all: Vec<_> = (0..50).map(|f| transmit(&[0u8; 64], &ch, f, 100.0)).collect();
    for f in (0..50).rev() {
        assert_eq!(transmit(&[0u8; 64], &ch, f, 100.0), all[f as usize]);
    }
    assert_ne!(all[0], all[1]);
    let other = ChannelConfig::new(2.0, 0.5, 1235).unwrap();
    assert_ne!(transmit(&[0u8; 64], &other, 0, 100.0), all[0]);
    let mut a = frame_rng(1, 2);
    let mut b = frame_rng(1, 2);
    assert_eq!(a.random::<u64>(), b.random::<u64>());
}

#[test]
fn noiseless_mode_saturates() {
    let mut ch = ChannelConfig::new(-5.0, 0.5, 0).unwrap();
    ch.noiseless = true;
    let rx = transmit(&[0, 1, 1, 0], &ch, 3, 100.0);
    assert_eq!(rx.llrs, vec![100.0, -100.0, -100.0, 100.0]);
}
