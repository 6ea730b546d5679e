//! Turns a BP trace into the image stack consumed by the flip predictor.
//!
//! Each iteration contributes four (n+1) × N planes, in this order:
//! |L|, sign(L), |R|, sign(R). Magnitudes are clipped and scaled to [0, 1];
//! signs take values in {-1, 0, +1}.

use crate::bp::BpTrace;
use crate::error::{Error, Result};
use crate::neural::Tensor;

pub const DEFAULT_CLIP: f64 = 30.0;

/// Planes per BP iteration.
pub const PLANES_PER_ITERATION: usize = 4;

/// A C × H × W float32 image stack with C = 4T, H = n + 1, W = N.
#[derive(Debug, Clone, PartialEq)]
pub struct InputTensor {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl InputTensor {
    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.channels, self.height, self.width]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// The plane `channel` as a row-major H × W slice.
    pub fn plane(&self, channel: usize) -> &[f32] {
        let size = self.height * self.width;
        &self.data[channel * size..(channel + 1) * size]
    }

    pub fn to_tensor(&self) -> Tensor<f32> {
        Tensor::from_vec(self.shape().to_vec(), self.data.clone())
            .expect("input tensor shape is consistent")
    }
}

fn sign(v: f64) -> f32 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Stacks every iteration of `trace` into a 4T-channel image.
pub fn build_input_tensor(trace: &BpTrace, clip: f64) -> Result<InputTensor> {
    if trace.iterations() == 0 {
        return Err(Error::EmptyTrace);
    }
    if !(clip > 0.0 && clip.is_finite()) {
        return Err(Error::InvalidParameter(format!("clip must be positive, got {clip}")));
    }
    let height = trace.stages() + 1;
    let width = trace.block_len();
    let channels = PLANES_PER_ITERATION * trace.iterations();
    let mut data = Vec::with_capacity(channels * height * width);
    for snap in trace.snapshots() {
        for messages in [snap.l(), snap.r()] {
            data.extend(messages.iter().map(|v| (v.abs().min(clip) / clip) as f32));
            data.extend(messages.iter().map(|&v| sign(v)));
        }
    }
    Ok(InputTensor {
        channels,
        height,
        width,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bp::BpState;

    fn trace_of(l: Vec<f64>, r: Vec<f64>) -> BpTrace {
        let state = BpState::from_messages(0, l.len(), l, r).unwrap();
        BpTrace::new(0, state.block_len(), vec![state]).unwrap()
    }

    #[test]
    fn zero_trace() {
        let t = build_input_tensor(&trace_of(vec![0.0; 4], vec![0.0; 4]), 30.0).unwrap();
        assert_eq!(t.shape(), [4, 1, 4]);
        assert!(t.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn clip_and_sign() {
        let t = build_input_tensor(&trace_of(vec![-1000.0, 15.0], vec![0.0, -3.0]), 30.0).unwrap();
        assert_eq!(t.plane(0), &[1.0, 0.5]);
        assert_eq!(t.plane(1), &[-1.0, 1.0]);
        assert_eq!(t.plane(2), &[0.0, 0.1]);
        assert_eq!(t.plane(3), &[0.0, -1.0]);
    }

    #[test]
    fn rejects_empty_trace_and_bad_clip() {
        let empty = BpTrace::new(1, 2, vec![]).unwrap();
        assert_eq!(build_input_tensor(&empty, 30.0), Err(Error::EmptyTrace));
        let t = trace_of(vec![1.0], vec![1.0]);
        assert!(build_input_tensor(&t, 0.0).is_err());
    }
}
