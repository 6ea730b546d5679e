//! Oracle checks that run from the CLI without the test harness.

use anyhow::Result;
use polarbf::bp::{run_bp, DecoderConfig};
use polarbf::channel::ChannelConfig;
use polarbf::crc::Crc;
use polarbf::neural::gradcheck::{check_bce, check_conv, check_dense, check_model, GradCheckReport};
use polarbf::neural::{ConvSpec, Conv2d, Dense, Model, ModelConfig, Scalar, Tensor};
use polarbf::polar::{crc_check, encode, CodeConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::sim::simulate;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check {
        name: name.into(),
        passed,
        detail,
    }
}

/// `F^{⊗n}` with columns permuted by bit reversal, as rows over GF(2).
fn generator(n: usize) -> Vec<Vec<u8>> {
    let mut g = vec![vec![1u8]];
    while g.len() < n {
        let m = g.len();
        let mut next = vec![vec![0u8; 2 * m]; 2 * m];
        for i in 0..m {
            for j in 0..m {
                next[i][j] = g[i][j];
                next[m + i][j] = g[i][j];
                next[m + i][m + j] = g[i][j];
            }
        }
        g = next;
    }
    let bits = n.trailing_zeros();
    let rev = |j: usize| if bits == 0 { j } else { j.reverse_bits() >> (usize::BITS - bits) };
    g.iter().map(|row| (0..n).map(|j| row[rev(j)]).collect()).collect()
}

fn encoder_matrix(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut words = 0usize;
    let mut mismatches = 0usize;
    for n in [2usize, 4, 8, 16] {
        let g = generator(n);
        let cfg = CodeConfig::from_info_set(n, &(0..n).collect::<Vec<_>>(), Crc::NONE)?;
        let inputs: Vec<u64> = if n <= 8 {
            (0..1u64 << n).collect()
        } else {
            (0..4096).map(|_| rng.random_range(0..1u64 << n)).collect()
        };
        for word in inputs {
            let u: Vec<u8> = (0..n).map(|i| ((word >> i) & 1) as u8).collect();
            let expected: Vec<u8> = (0..n)
                .map(|j| (0..n).fold(0u8, |acc, i| acc ^ (u[i] & g[i][j])))
                .collect();
            words += 1;
            mismatches += usize::from(encode(&u, &cfg)?.bits() != expected.as_slice());
        }
    }
    Ok(check("encoder matrix", mismatches == 0, format!("{mismatches} mismatches over {words} words")))
}

fn long_division(payload: &[u8]) -> Vec<u8> {
    const GENERATOR: [u8; 7] = [1, 1, 0, 0, 0, 0, 1];
    let mut work = payload.to_vec();
    work.extend([0u8; 6]);
    for i in 0..payload.len() {
        if work[i] == 1 {
            for (k, g) in GENERATOR.iter().enumerate() {
                work[i + k] ^= g;
            }
        }
    }
    work[payload.len()..].to_vec()
}

fn crc_division(rng: &mut ChaCha8Rng) -> Check {
    let crc = Crc::CRC6;
    let mut bad = 0usize;
    let mut undetected = 0usize;
    for _ in 0..10_000 {
        let len = rng.random_range(1..=64);
        let payload: Vec<u8> = (0..len).map(|_| rng.random_range(0..2)).collect();
        let word = crc.attach(&payload);
        bad += usize::from(word[len..] != long_division(&payload)[..] || !crc.check(&word));
        let mut corrupt = word.clone();
        let i = rng.random_range(0..corrupt.len());
        corrupt[i] ^= 1;
        undetected += usize::from(crc.check(&corrupt));
    }
    check(
        "crc long division",
        bad == 0 && undetected == 0,
        format!("{bad} disagreements, {undetected} undetected single-bit errors over 10000 payloads"),
    )
}

fn uniform<F: Scalar>(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> Vec<F> {
    (0..n).map(|_| F::of(rng.random_range(-scale..scale))).collect()
}

fn gradient_suite<F: Scalar>(eps: f64, curved_eps: f64, floor: f64, seed: u64) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = GradCheckReport::default();
    for inst in 0..20u64 {
        let (oc, ic, h, w) = (rng.random_range(1..4), rng.random_range(1..4), 3, 5);
        let conv = Conv2d::new(
            Tensor::from_vec(vec![oc, ic, 3, 3], uniform::<F>(oc * ic * 9, 1.0, &mut rng))?,
            Tensor::from_vec(vec![oc], uniform::<F>(oc, 0.5, &mut rng))?,
        )?;
        let x = uniform::<F>(ic * h * w, 1.0, &mut rng);
        rep.merge(&check_conv(&conv, &x, h, w, eps, floor, &mut rng)?);

        let (o, i) = (rng.random_range(1..8), rng.random_range(1..10));
        let dense = Dense::new(
            Tensor::from_vec(vec![o, i], uniform::<F>(o * i, 1.0, &mut rng))?,
            Tensor::from_vec(vec![o], uniform::<F>(o, 0.5, &mut rng))?,
        )?;
        let x = uniform::<F>(i, 1.0, &mut rng);
        rep.merge(&check_dense(&dense, &x, eps, floor, &mut rng)?);

        let logits = uniform::<F>(6, 6.0, &mut rng);
        let labels: Vec<F> = (0..6).map(|_| F::of(f64::from(rng.random_range(0..2u8)))).collect();
        rep.merge(&check_bce(&logits, &labels, curved_eps, floor));

        let model = Model::<F>::new(ModelConfig {
            input: [4, 3, 8],
            conv: vec![ConvSpec::new(3, 3, 3), ConvSpec::new(2, 3, 3), ConvSpec::new(2, 1, 3)],
            dense: vec![6, 5, 4],
            dropout_rate: 0.5,
            seed: seed ^ inst,
            clip: 30.0,
        })?;
        let x = uniform::<F>(model.input_len(), 1.0, &mut rng);
        let labels: Vec<F> = (0..4).map(|_| F::of(f64::from(rng.random_range(0..2u8)))).collect();
        rep.merge(&check_model(&model, &x, &labels, curved_eps, floor, 8, &mut rng)?);
    }
    Ok(rep)
}

fn gradients() -> Result<Vec<Check>> {
    let r64 = gradient_suite::<f64>(1e-5, 1e-5, 1e-6, 1)?;
    let r32 = gradient_suite::<f32>(2e-2, 1e-2, 1e-2, 2)?;
    let line = |r: &GradCheckReport| {
        format!("{} coordinates, max relative error {:.2e}", r.checked, r.max_rel_error)
    };
    Ok(vec![
        check("gradients f64", r64.max_rel_error < 1e-5, line(&r64)),
        check("gradients f32", r32.max_rel_error < 1e-3, line(&r32)),
    ])
}

fn noiseless_round_trip() -> Result<Check> {
    let code = CodeConfig::construct(64, 32, 0.5)?;
    let dec = DecoderConfig::default();
    let mut ch = ChannelConfig::new(0.0, code.rate(), 11)?;
    ch.noiseless = true;
    let mut failures = 0usize;
    for i in 0..1000 {
        let f = simulate(&code, &ch, i, dec.llr_max)?;
        let run = run_bp(&f.llrs_f64(), &code, &dec, None)?;
        let ok = crc_check(&run.info_bits, &code) && run.info_bits[..code.payload_len()] == f.payload[..];
        failures += usize::from(!ok);
    }
    Ok(check("noiseless round trip", failures == 0, format!("{failures} of 1000 frames wrong")))
}

/// Runs every oracle and returns one entry per check.
pub fn run_all() -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e1f);
    let mut checks = vec![encoder_matrix(&mut rng)?, crc_division(&mut rng)];
    checks.extend(gradients()?);
    checks.push(noiseless_round_trip()?);
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_of_four() {
        assert_eq!(
            generator(4),
            vec![vec![1, 0, 0, 0], vec![1, 0, 1, 0], vec![1, 1, 0, 0], vec![1, 1, 1, 1]]
        );
    }

    #[test]
    fn division_of_one() {
        // x^6 mod (x^6 + x^5 + 1) = x^5 + 1.
        assert_eq!(long_division(&[1]), vec![1, 0, 0, 0, 0, 1]);
    }
}
