#![allow(dead_code)]

use polarbf::channel::{random_bits, transmit_with, ChannelConfig};
use polarbf::polar::{assemble_u, encode, CodeConfig, MessageWord};

pub struct Frame {
    pub payload: Vec<u8>,
    pub u: Vec<u8>,
    pub info: Vec<u8>,
    pub codeword: Vec<u8>,
    pub llrs: Vec<f64>,
}

pub fn code_64_32() -> CodeConfig {
    CodeConfig::construct(64, 32, 0.5).unwrap()
}

/// Random payload and channel noise drawn from the frame's own stream.
pub fn frame(cfg: &CodeConfig, ch: &ChannelConfig, index: u64, llr_max: f64) -> Frame {
    let mut rng = ch.frame_rng(index);
    let payload = random_bits(cfg.payload_len(), &mut rng);
    let u = assemble_u(&MessageWord::new(payload.clone(), cfg).unwrap(), cfg).unwrap();
    let info = cfg.extract_info(&u);
    let codeword = encode(&u, cfg).unwrap().into_bits();
    let rx = transmit_with(&codeword, ch, llr_max, &mut rng);
    Frame {
        payload,
        u,
        info,
        codeword,
        llrs: rx.llrs,
    }
}
