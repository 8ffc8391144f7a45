use super::video::{batch_frames, Frame, VideoSequence};
use crate::error::{Error, Result};
use crate::numerics::{Graph, NodeId, Real};

/// Context length `i`, target length `p` and stride of window extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    pub context: usize,
    pub target: usize,
    pub stride: usize,
}

impl WindowSpec {
    pub fn new(context: usize, target: usize) -> Result<Self> {
        if context == 0 || target == 0 {
            return Err(Error::InvalidArgument(format!(
                "window lengths must be positive, got i={context} p={target}"
            )));
        }
        Ok(Self {
            context,
            target,
            stride: 1,
        })
    }

    /// Frames spanned by one window: `2i + p`.
    pub fn span(&self) -> usize {
        2 * self.context + self.target
    }
}

/// `F` (before), `P` (target) and `B` (after) borrowed from one video.
#[derive(Debug, Clone, Copy)]
pub struct PredictionWindow<'a> {
    pub video: &'a VideoSequence,
    /// Index of the first target frame in the source video.
    pub start: usize,
    pub spec: WindowSpec,
}

impl<'a> PredictionWindow<'a> {
    pub fn new(video: &'a VideoSequence, start: usize, spec: WindowSpec) -> Result<Self> {
        if start < spec.context || start + spec.target + spec.context > video.len() {
            return Err(Error::InvalidArgument(format!(
                "window at {start} with i={} p={} does not fit a {}-frame video",
                spec.context,
                spec.target,
                video.len()
            )));
        }
        Ok(Self { video, start, spec })
    }

    pub fn before(&self) -> &'a [Frame] {
        &self.video.frames()[self.start - self.spec.context..self.start]
    }

    pub fn target(&self) -> &'a [Frame] {
        &self.video.frames()[self.start..self.start + self.spec.target]
    }

    pub fn after(&self) -> &'a [Frame] {
        let s = self.start + self.spec.target;
        &self.video.frames()[s..s + self.spec.context]
    }
}

/// Every window of `video` with target start `t = i, i+stride, …, T − p − i`.
pub fn iter_windows(video: &VideoSequence, spec: WindowSpec) -> impl Iterator<Item = PredictionWindow<'_>> {
    let first = spec.context;
    let last = video.len().checked_sub(spec.target + spec.context).filter(|&l| l >= first);
    last.into_iter()
        .flat_map(move |last| (first..=last).step_by(spec.stride.max(1)))
        .map(move |start| PredictionWindow { video, start, spec })
}

/// One `[B, C, H, W]` input node per position of the picked slice, batching
/// the same position across `windows`.
pub fn stack_window_frames<'a, T: Real>(
    g: &mut Graph<T>,
    windows: &[PredictionWindow<'a>],
    pick: fn(&PredictionWindow<'a>) -> &'a [Frame],
) -> Result<Vec<NodeId>> {
    let first = windows
        .first()
        .ok_or_else(|| Error::InvalidArgument("no windows to stack".into()))?;
    (0..pick(first).len())
        .map(|j| {
            let frames: Vec<&Frame> = windows.iter().map(|w| &pick(w)[j]).collect();
            Ok(g.input(batch_frames(&frames)?))
        })
        .collect()
}
