use crate::error::{shape_mismatch, Error, Result};
use crate::numerics::{Real, Tensor};

/// One `[C, H, W]` frame with intensities in `[0, 1]`.
pub type Frame = Tensor<f32>;

#[derive(Debug, Clone, PartialEq)]
pub struct VideoSequence {
    pub id: String,
    frames: Vec<Frame>,
    labels: Option<Vec<u8>>,
}

impl VideoSequence {
    pub fn new(id: impl Into<String>, frames: Vec<Frame>, labels: Option<Vec<u8>>) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::InvalidArgument("video has no frames".into()))?;
        if first.shape().len() != 3 {
            return Err(Error::InvalidArgument(format!("frames must be [C, H, W], got {:?}", first.shape())));
        }
        for f in &frames {
            if f.shape() != first.shape() {
                return Err(shape_mismatch("video frame", first.shape(), f.shape()));
            }
            if f.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidArgument("frame values must lie in [0, 1]".into()));
            }
        }
        if let Some(l) = &labels {
            if l.len() != frames.len() {
                return Err(Error::InvalidArgument(format!("{} labels for {} frames", l.len(), frames.len())));
            }
            if l.iter().any(|&v| v > 1) {
                return Err(Error::InvalidArgument("labels must be 0 or 1".into()));
            }
        }
        Ok(Self {
            id: id.into(),
            frames,
            labels,
        })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// `[C, H, W]` of every frame.
    pub fn frame_shape(&self) -> [usize; 3] {
        let s = self.frames[0].shape();
        [s[0], s[1], s[2]]
    }
}

/// Stacks `[C, H, W]` frames into a `[B, C, H, W]` batch.
pub fn batch_frames<T: Real>(frames: &[&Frame]) -> Result<Tensor<T>> {
    let first = frames
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty frame batch".into()))?;
    let mut data = Vec::with_capacity(first.len() * frames.len());
    for f in frames {
        if f.shape() != first.shape() {
            return Err(shape_mismatch("batch_frames", first.shape(), f.shape()));
        }
        data.extend(f.data().iter().map(|&v| T::from_f64(v as f64)));
    }
    let mut shape = vec![frames.len()];
    shape.extend_from_slice(first.shape());
    Tensor::from_vec(&shape, data)
}
