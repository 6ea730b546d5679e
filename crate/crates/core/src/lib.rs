//! Belief-propagation decoding of polar codes with single-bit flipping.
//!
//! The crate covers code construction and encoding ([`polar`], [`crc`]),
//! min-sum BP with full message tracing ([`bp`]), conversion of traces into
//! CNN input images ([`metadata`]), the critical-set and CNN-guided flip
//! searches plus the exhaustive labeling oracle ([`flip`]), the CNN itself
//! ([`neural`]) and a reproducible BPSK/AWGN channel ([`channel`]).

pub mod bp;
pub mod channel;
pub mod crc;
pub mod error;
pub mod flip;
pub mod metadata;
pub mod neural;
pub mod polar;

pub use bp::{BpDecision, BpRun, BpState, BpTrace, DecoderConfig};
pub use channel::ChannelConfig;
pub use crc::Crc;
pub use error::{Error, Result};
pub use flip::{CriticalSet, DecodeOutcome, FlipLabel, FlipPredictor, FlipScores};
pub use metadata::InputTensor;
pub use polar::{CodeConfig, Codeword, MessageWord};
