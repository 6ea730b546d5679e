//! Polar code construction, encoding and information-bit placement.
//!
//! The encoder computes `x = u · F^{⊗n} · B_N` over GF(2) with the kernel
//! `F = [[1, 0], [1, 1]]` and the bit-reversal permutation `B_N`. Information
//! positions are chosen by the Bhattacharyya-parameter recursion on a binary
//! erasure channel.

use serde::{Deserialize, Serialize};

use crate::crc::Crc;
use crate::error::{Error, Result};

/// Default erasure probability used when constructing codes.
pub const DEFAULT_DESIGN_PARAM: f64 = 0.5;

/// Parameters of an (N, K) polar code with an outer CRC.
///
/// `K` counts every information position, CRC bits included, so the user
/// payload is `K - r` bits long.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeConfig {
    block_len: usize,
    info_len: usize,
    stages: usize,
    info_set: Vec<usize>,
    frozen_set: Vec<usize>,
    info_mask: Vec<bool>,
    crc: Crc,
    design_param: f64,
    bhattacharyya: Vec<f64>,
}

impl CodeConfig {
    /// Constructs an (N, K) code with the x^6 + x^5 + 1 CRC.
    pub fn construct(block_len: usize, info_len: usize, design_param: f64) -> Result<Self> {
        Self::construct_with_crc(block_len, info_len, design_param, Crc::CRC6)
    }

    /// Picks the `info_len` positions with the smallest Bhattacharyya
    /// parameter. Ties go to the higher index.
    pub fn construct_with_crc(
        block_len: usize,
        info_len: usize,
        design_param: f64,
        crc: Crc,
    ) -> Result<Self> {
        check_block_len(block_len)?;
        if info_len == 0 || info_len >= block_len {
            return Err(Error::InvalidInfoLength {
                k: info_len,
                n: block_len,
            });
        }
        if !(design_param > 0.0 && design_param < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "design parameter {design_param} outside (0, 1)"
            )));
        }
        let z = bhattacharyya(block_len, design_param)?;
        let mut order: Vec<usize> = (0..block_len).collect();
        order.sort_by(|&a, &b| z[a].total_cmp(&z[b]).then(b.cmp(&a)));
        let mut info_set = order[..info_len].to_vec();
        info_set.sort_unstable();
        Self::assemble(block_len, info_set, crc, design_param, z)
    }

    /// Builds a config around an explicit information set. The set may be
    /// empty (an all-frozen code), which is only useful in tests.
    pub fn from_info_set(block_len: usize, info_set: &[usize], crc: Crc) -> Result<Self> {
        check_block_len(block_len)?;
        let z = bhattacharyya(block_len, DEFAULT_DESIGN_PARAM)?;
        let mut set = info_set.to_vec();
        set.sort_unstable();
        set.dedup();
        if set.len() != info_set.len() {
            return Err(Error::InvalidInfoSet("duplicate index".into()));
        }
        if let Some(&bad) = set.iter().find(|&&i| i >= block_len) {
            return Err(Error::InvalidInfoSet(format!(
                "index {bad} outside block of length {block_len}"
            )));
        }
        Self::assemble(block_len, set, crc, DEFAULT_DESIGN_PARAM, z)
    }

    fn assemble(
        block_len: usize,
        info_set: Vec<usize>,
        crc: Crc,
        design_param: f64,
        bhattacharyya: Vec<f64>,
    ) -> Result<Self> {
        let info_len = info_set.len();
        if info_len > 0 && info_len <= crc.degree() {
            return Err(Error::InvalidInfoLength {
                k: info_len,
                n: block_len,
            });
        }
        let mut info_mask = vec![false; block_len];
        for &i in &info_set {
            info_mask[i] = true;
        }
        let frozen_set = (0..block_len).filter(|&i| !info_mask[i]).collect();
        Ok(CodeConfig {
            block_len,
            info_len,
            stages: block_len.trailing_zeros() as usize,
            info_set,
            frozen_set,
            info_mask,
            crc,
            design_param,
            bhattacharyya,
        })
    }

    /// N.
    pub fn block_len(&self) -> usize {
        self.block_len
    }

    /// K, CRC bits included.
    pub fn info_len(&self) -> usize {
        self.info_len
    }

    /// n = log2(N).
    pub fn stages(&self) -> usize {
        self.stages
    }

    /// Information positions in ascending order.
    pub fn info_set(&self) -> &[usize] {
        &self.info_set
    }

    pub fn frozen_set(&self) -> &[usize] {
        &self.frozen_set
    }

    pub fn is_info(&self, index: usize) -> bool {
        self.info_mask.get(index).copied().unwrap_or(false)
    }

    pub fn crc(&self) -> Crc {
        self.crc
    }

    pub fn design_param(&self) -> f64 {
        self.design_param
    }

    /// Payload length `K - r`.
    pub fn payload_len(&self) -> usize {
        self.info_len.saturating_sub(self.crc.degree())
    }

    pub fn rate(&self) -> f64 {
        self.info_len as f64 / self.block_len as f64
    }

    /// Bhattacharyya parameter of every bit channel (smaller is more reliable).
    pub fn bhattacharyya(&self) -> &[f64] {
        &self.bhattacharyya
    }

    /// Position of `index` within the information set.
    pub fn info_rank(&self, index: usize) -> Option<usize> {
        self.info_set.binary_search(&index).ok()
    }

    /// Restricts a length-N estimate to the information positions.
    pub fn extract_info(&self, u: &[u8]) -> Vec<u8> {
        self.info_set.iter().map(|&i| u[i]).collect()
    }

    /// Frozen-set fixture: a `N=<N> K=<K> design=<p>` header followed by
    /// one frozen index per line.
    pub fn to_fixture(&self) -> String {
        let mut out = format!(
            "N={} K={} design={}\n",
            self.block_len, self.info_len, self.design_param
        );
        for i in &self.frozen_set {
            out.push_str(&format!("{i}\n"));
        }
        out
    }

    /// Parses a frozen-set fixture written by [`CodeConfig::to_fixture`].
    pub fn from_fixture(text: &str, crc: Crc) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidInfoSet("empty fixture".into()))?;
        let mut block_len = None;
        let mut info_len = None;
        let mut design = DEFAULT_DESIGN_PARAM;
        for field in header.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| Error::InvalidInfoSet(format!("bad header field {field}")))?;
            let bad = |_| Error::InvalidInfoSet(format!("bad header value {field}"));
            match key {
                "N" => block_len = Some(value.parse::<usize>().map_err(bad)?),
                "K" => info_len = Some(value.parse::<usize>().map_err(bad)?),
                "design" => {
                    design = value
                        .parse::<f64>()
                        .map_err(|_| Error::InvalidInfoSet(format!("bad header value {field}")))?
                }
                _ => {}
            }
        }
        let block_len =
            block_len.ok_or_else(|| Error::InvalidInfoSet("missing N in header".into()))?;
        let info_len =
            info_len.ok_or_else(|| Error::InvalidInfoSet("missing K in header".into()))?;
        check_block_len(block_len)?;
        let mut frozen = vec![false; block_len];
        for line in lines {
            let i: usize = line
                .parse()
                .map_err(|_| Error::InvalidInfoSet(format!("bad index line {line}")))?;
            if i >= block_len || frozen[i] {
                return Err(Error::InvalidInfoSet(format!("bad frozen index {i}")));
            }
            frozen[i] = true;
        }
        let info: Vec<usize> = (0..block_len).filter(|&i| !frozen[i]).collect();
        if info.len() != info_len {
            return Err(Error::InvalidInfoSet(format!(
                "header says K={info_len} but fixture leaves {} positions",
                info.len()
            )));
        }
        let mut cfg = Self::from_info_set(block_len, &info, crc)?;
        cfg.design_param = design;
        cfg.bhattacharyya = bhattacharyya(block_len, design)?;
        Ok(cfg)
    }
}

/// The K - r payload bits of one frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageWord(Vec<u8>);

impl MessageWord {
    pub fn new(bits: Vec<u8>, config: &CodeConfig) -> Result<Self> {
        if bits.len() != config.payload_len() {
            return Err(Error::LengthMismatch {
                expected: config.payload_len(),
                actual: bits.len(),
            });
        }
        Ok(MessageWord(bits))
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }
}

/// An N-bit transmitted codeword.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Codeword(Vec<u8>);

impl Codeword {
    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn into_bits(self) -> Vec<u8> {
        self.0
    }
}

fn check_block_len(block_len: usize) -> Result<()> {
    if block_len < 2 || !block_len.is_power_of_two() {
        return Err(Error::InvalidBlockLength(block_len));
    }
    Ok(())
}

/// Bhattacharyya parameters of the N synthesized channels of a BEC with
/// erasure probability `design_param`, in natural index order.
///
/// Index bits are consumed MSB first: a 0 bit applies `z -> 2z - z^2`, a 1
/// bit applies `z -> z^2`.
pub fn bhattacharyya(block_len: usize, design_param: f64) -> Result<Vec<f64>> {
    check_block_len(block_len)?;
    let mut z = vec![design_param];
    while z.len() < block_len {
        z = z
            .iter()
            .flat_map(|&v| [2.0 * v - v * v, v * v])
            .collect();
    }
    Ok(z)
}

/// `perm[i]` is `i` with its n-bit binary representation reversed.
pub fn bit_reversal_permutation(block_len: usize) -> Result<Vec<usize>> {
    check_block_len(block_len)?;
    let bits = block_len.trailing_zeros();
    Ok((0..block_len)
        .map(|i| i.reverse_bits() >> (usize::BITS - bits))
        .collect())
}

/// In-place `v · F^{⊗n}` via the butterfly network.
pub fn polar_transform(v: &mut [u8]) {
    let n = v.len();
    let mut half = n / 2;
    while half >= 1 {
        for block in (0..n).step_by(2 * half) {
            for j in block..block + half {
                v[j] ^= v[j + half];
            }
        }
        half /= 2;
    }
}

/// Encodes a length-N vector `u`: `x = u · F^{⊗n} · B_N`.
pub fn encode(u: &[u8], config: &CodeConfig) -> Result<Codeword> {
    let n = config.block_len();
    if u.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: u.len(),
        });
    }
    let mut v: Vec<u8> = u.iter().map(|b| b & 1).collect();
    polar_transform(&mut v);
    let perm = bit_reversal_permutation(n)?;
    Ok(Codeword(perm.iter().map(|&p| v[p]).collect()))
}

/// Attaches the CRC to `payload` and spreads the K resulting bits over the
/// information positions in ascending order. Frozen positions are zero.
pub fn assemble_u(payload: &MessageWord, config: &CodeConfig) -> Result<Vec<u8>> {
    if payload.bits().len() != config.payload_len() {
        return Err(Error::LengthMismatch {
            expected: config.payload_len(),
            actual: payload.bits().len(),
        });
    }
    let word = config.crc().attach(payload.bits());
    let mut u = vec![0u8; config.block_len()];
    for (&pos, &bit) in config.info_set().iter().zip(&word) {
        u[pos] = bit;
    }
    Ok(u)
}

/// CRC check on the K information bits.
pub fn crc_check(info_bits: &[u8], config: &CodeConfig) -> bool {
    info_bits.len() == config.info_len() && config.crc().check(info_bits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construct_small_codes() {
        let cfg = CodeConfig::construct_with_crc(8, 4, 0.5, Crc::NONE).unwrap();
        assert_eq!(cfg.info_set(), &[3, 5, 6, 7]);
        assert_eq!(cfg.frozen_set(), &[0, 1, 2, 4]);
        assert_eq!(cfg.stages(), 3);
        let cfg = CodeConfig::construct_with_crc(2, 1, 0.5, Crc::NONE).unwrap();
        assert_eq!(cfg.info_set(), &[1]);
    }

    #[test]
    fn construct_rejects_bad_parameters() {
        assert_eq!(
            CodeConfig::construct(12, 4, 0.5),
            Err(Error::InvalidBlockLength(12))
        );
        assert!(CodeConfig::construct(8, 0, 0.5).is_err());
        assert!(CodeConfig::construct(8, 8, 0.5).is_err());
        // K must exceed the CRC degree.
        assert!(CodeConfig::construct(8, 6, 0.5).is_err());
        assert!(CodeConfig::construct(64, 32, 1.5).is_err());
    }

    #[test]
    fn bit_reversal_examples() {
        assert_eq!(bit_reversal_permutation(2).unwrap(), vec![0, 1]);
        assert_eq!(bit_reversal_permutation(4).unwrap(), vec![0, 2, 1, 3]);
        assert_eq!(
            bit_reversal_permutation(8).unwrap(),
            vec![0, 4, 2, 6, 1, 5, 3, 7]
        );
        assert!(bit_reversal_permutation(6).is_err());
    }

    #[test]
    fn encode_n2_by_hand() {
        let cfg = CodeConfig::from_info_set(2, &[0, 1], Crc::NONE).unwrap();
        assert_eq!(encode(&[0, 1], &cfg).unwrap().bits(), &[1, 1]);
        assert_eq!(encode(&[1, 0], &cfg).unwrap().bits(), &[1, 0]);
        assert_eq!(encode(&[0; 2], &cfg).unwrap().bits(), &[0, 0]);
        assert!(encode(&[0; 3], &cfg).is_err());
    }

    #[test]
    fn assemble_places_bits_in_order() {
        let cfg = CodeConfig::from_info_set(8, &[3, 5, 6, 7], Crc::NONE).unwrap();
        let msg = MessageWord::new(vec![1, 0, 1, 1], &cfg).unwrap();
        assert_eq!(assemble_u(&msg, &cfg).unwrap(), vec![0, 0, 0, 1, 0, 0, 1, 1]);
        assert!(MessageWord::new(vec![1, 0], &cfg).is_err());
    }

    #[test]
    fn zero_payload_gives_zero_u() {
        let cfg = CodeConfig::construct(64, 32, 0.5).unwrap();
        let msg = MessageWord::new(vec![0; 26], &cfg).unwrap();
        assert_eq!(assemble_u(&msg, &cfg).unwrap(), vec![0; 64]);
    }

    #[test]
    fn fixture_round_trip() {
        let cfg = CodeConfig::construct(16, 8, 0.5).unwrap();
        let text = cfg.to_fixture();
        assert!(text.starts_with("N=16 K=8 design=0.5\n"));
        let back = CodeConfig::from_fixture(&text, Crc::CRC6).unwrap();
        assert_eq!(back, cfg);
        assert!(CodeConfig::from_fixture("N=16 K=9 design=0.5\n0\n", Crc::CRC6).is_err());
    }
}
