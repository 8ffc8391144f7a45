//! Bidirectional stacked ST-LSTM frame predictor.
//!
//! The forward stack reads the frames before the target span, the backward
//! stack reads the frames after it in reverse, and both then continue
//! autoregressively through the target span. Top-layer hidden states of the
//! two directions are concatenated and reduced by a 1×1 convolution to one
//! predicted frame per target position.
//!
//! Within a step `M` climbs the stack; across steps the top layer's `M`
//! feeds the bottom layer of the next step.

use rand::Rng;

use crate::error::{shape_mismatch, Error, Result};
use crate::numerics::init::uniform_kernel;
use crate::numerics::{Graph, NodeId, ParamId, ParamStore, Real, Tensor};
use crate::stlstm::{init_state, CellShape, DecoupleIncrements, StLstmCell, StateNodes};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorConfig {
    pub num_layers: usize,
    pub hidden_channels: usize,
    pub kernel_size: usize,
    /// Space-to-depth factor applied to frames before the recurrent stack.
    pub patch_factor: usize,
    /// `i`: frames before (and after) the target span.
    pub context_len: usize,
    /// `p`: frames predicted per window.
    pub prediction_len: usize,
    pub frame_channels: usize,
    /// `(height, width)` of input frames.
    pub frame_size: (usize, usize),
    pub bidirectional: bool,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            num_layers: 4,
            hidden_channels: 64,
            kernel_size: 5,
            patch_factor: 4,
            context_len: 8,
            prediction_len: 5,
            frame_channels: 1,
            frame_size: (32, 32),
            bidirectional: true,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.num_layers == 0 || self.hidden_channels == 0 || self.frame_channels == 0 {
            return bad("layers, hidden channels and frame channels must be positive".into());
        }
        if self.context_len == 0 || self.prediction_len == 0 {
            return bad(format!("need i >= 1 and p >= 1, got i={} p={}", self.context_len, self.prediction_len));
        }
        if self.kernel_size.is_multiple_of(2) {
            return bad(format!("kernel size must be odd, got {}", self.kernel_size));
        }
        let (h, w) = self.frame_size;
        if self.patch_factor == 0 || h % self.patch_factor != 0 || w % self.patch_factor != 0 {
            return bad(format!("patch factor {} must divide frame size {h}x{w}", self.patch_factor));
        }
        Ok(())
    }

    /// Channels of a frame after space-to-depth.
    pub fn patch_channels(&self) -> usize {
        self.frame_channels * self.patch_factor * self.patch_factor
    }

    pub fn latent_size(&self) -> (usize, usize) {
        (self.frame_size.0 / self.patch_factor, self.frame_size.1 / self.patch_factor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectionStack {
    pub cells: Vec<StLstmCell>,
}

impl DirectionStack {
    fn new<T: Real, R: Rng + ?Sized>(store: &mut ParamStore<T>, prefix: &str, cfg: &GeneratorConfig, rng: &mut R) -> Self {
        let cells = (0..cfg.num_layers)
            .map(|l| {
                let shape = CellShape {
                    in_channels: if l == 0 { cfg.patch_channels() } else { cfg.hidden_channels },
                    hidden_channels: cfg.hidden_channels,
                    kernel_size: cfg.kernel_size,
                };
                StLstmCell::new(store, &format!("{prefix}.l{l}"), shape, rng)
            })
            .collect();
        Self { cells }
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        self.cells.iter().flat_map(|c| c.params.ids()).collect()
    }
}

/// Everything recorded while one direction runs over its inputs.
#[derive(Debug, Clone, Default)]
pub struct DirectionalRollout {
    /// Top-layer hidden state after each step.
    pub top_hidden: Vec<NodeId>,
    /// Frame-space prediction of the next frame, where one was decoded.
    pub predictions: Vec<Option<NodeId>>,
    /// Frames generated past the end of the inputs, in generation order.
    pub generated: Vec<NodeId>,
    /// Top hidden state that produced each generated frame.
    pub generated_hidden: Vec<NodeId>,
    /// `[step][layer]` states.
    pub states: Vec<Vec<StateNodes>>,
    /// `M` fed to the bottom layer at each step.
    pub bottom_spatial_inputs: Vec<NodeId>,
    /// `[step][layer]` memory increments.
    pub increments: Vec<Vec<DecoupleIncrements>>,
}

/// Predicted target frames and the bookkeeping needed for the losses.
#[derive(Debug, Clone)]
pub struct WindowPrediction {
    /// `p` frames `[B, C, H, W]`, in target order.
    pub frames: Vec<NodeId>,
    pub forward: DirectionalRollout,
    pub backward: Option<DirectionalRollout>,
}

impl WindowPrediction {
    /// Increments of every `(step, layer)` of both directions.
    pub fn increments(&self) -> Vec<DecoupleIncrements> {
        let mut all: Vec<_> = self.forward.increments.iter().flatten().copied().collect();
        if let Some(b) = &self.backward {
            all.extend(b.increments.iter().flatten().copied());
        }
        all
    }
}

/// Number of recurrent steps for `inputs` observed frames and `generate` new ones.
pub fn rollout_steps(inputs: usize, generate: usize) -> usize {
    inputs + generate.saturating_sub(1)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generator {
    pub config: GeneratorConfig,
    pub forward: DirectionStack,
    pub backward: Option<DirectionStack>,
    /// `[C·f², 2·Ch, 1, 1]` reduction of concatenated forward/backward hidden states.
    pub fusion: ParamId,
}

impl Generator {
    pub fn new<T: Real, R: Rng + ?Sized>(config: GeneratorConfig, store: &mut ParamStore<T>, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let forward = DirectionStack::new(store, "gen.fwd", &config, rng);
        let backward = config
            .bidirectional
            .then(|| DirectionStack::new(store, "gen.bwd", &config, rng));
        let fusion = store.add(
            "gen.fusion",
            uniform_kernel(rng, [config.patch_channels(), 2 * config.hidden_channels, 1, 1]),
        );
        Ok(Self {
            config,
            forward,
            backward,
            fusion,
        })
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids = self.forward.param_ids();
        if let Some(b) = &self.backward {
            ids.extend(b.param_ids());
        }
        ids.push(self.fusion);
        ids
    }

    fn stack(&self, dir: Direction) -> Result<&DirectionStack> {
        match dir {
            Direction::Forward => Ok(&self.forward),
            Direction::Backward => self
                .backward
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("generator has no backward stack".into())),
        }
    }

    fn to_frame<T: Real>(&self, g: &mut Graph<T>, patches: NodeId) -> Result<NodeId> {
        g.depth_to_space(patches, self.config.patch_factor)
    }

    /// Concatenates both hidden states, applies the 1×1 fusion and returns to frame space.
    pub fn fuse_hidden<T: Real>(&self, g: &mut Graph<T>, store: &ParamStore<T>, forward: NodeId, backward: NodeId) -> Result<NodeId> {
        if g.shape(forward) != g.shape(backward) {
            return Err(shape_mismatch("fuse_hidden", g.shape(forward), g.shape(backward)));
        }
        let cat = g.concat_channels(&[forward, backward])?;
        let w = g.param(store, self.fusion);
        let patches = g.conv2d(cat, w, 1, 0)?;
        self.to_frame(g, patches)
    }

    /// Frame decoded from one direction alone: the fusion kernel applied to
    /// that direction's hidden state with zeros in the other half.
    pub fn decode_direction<T: Real>(&self, g: &mut Graph<T>, store: &ParamStore<T>, hidden: NodeId, dir: Direction) -> Result<NodeId> {
        let ch = self.config.hidden_channels;
        let w = g.param(store, self.fusion);
        let half = match dir {
            Direction::Forward => g.slice_channels(w, 0, ch)?,
            Direction::Backward => g.slice_channels(w, ch, ch)?,
        };
        let patches = g.conv2d(hidden, half, 1, 0)?;
        self.to_frame(g, patches)
    }

    /// Runs one direction over `frames` (each `[B, C, H, W]`), then generates
    /// `steps_to_generate` further frames from its own predictions.
    ///
    /// `teacher_mask[t]` selects the true frame (`true`) or the previous
    /// step's own prediction (`false`) as the step-`t` input. Its length must
    /// equal [`rollout_steps`]; the first entry must be `true` and entries past
    /// the observed frames must be `false`.
    pub fn directional_rollout<T: Real>(
        &self,
        g: &mut Graph<T>,
        store: &ParamStore<T>,
        dir: Direction,
        frames: &[NodeId],
        teacher_mask: &[bool],
        steps_to_generate: usize,
    ) -> Result<DirectionalRollout> {
        let stack = self.stack(dir)?;
        let n = frames.len();
        if n == 0 {
            return Err(Error::InvalidArgument("rollout needs at least one frame".into()));
        }
        let total = rollout_steps(n, steps_to_generate);
        if teacher_mask.len() != total {
            return Err(Error::InvalidArgument(format!(
                "teacher mask has {} entries for {total} rollout steps",
                teacher_mask.len()
            )));
        }
        if !teacher_mask[0] {
            return Err(Error::InvalidArgument("the first rollout step must read a true frame".into()));
        }
        if teacher_mask[n..].iter().any(|&m| m) {
            return Err(Error::InvalidArgument("generation steps cannot be teacher-forced".into()));
        }
        let cfg = &self.config;
        let frame_shape = g.shape(frames[0]).to_vec();
        let expected = [frame_shape[0], cfg.frame_channels, cfg.frame_size.0, cfg.frame_size.1];
        for &f in frames {
            if g.shape(f) != expected {
                return Err(shape_mismatch("directional_rollout", g.shape(f), &expected));
            }
        }
        let batch = frame_shape[0];
        let (lh, lw) = cfg.latent_size();
        let zero = init_state::<T>(batch, cfg.hidden_channels, lh, lw);
        let zero_h = g.input(zero.hidden);
        let zero_c = g.input(zero.temporal);
        let zero_m = g.input(zero.spatial);

        let mut out = DirectionalRollout::default();
        let mut hidden = vec![zero_h; cfg.num_layers];
        let mut temporal = vec![zero_c; cfg.num_layers];
        let mut spatial = zero_m;
        for t in 0..total {
            let frame = if t < n && teacher_mask[t] {
                frames[t]
            } else {
                out.predictions[t - 1].expect("prediction decoded for the next self-fed step")
            };
            let x = g.space_to_depth(frame, cfg.patch_factor)?;
            out.bottom_spatial_inputs.push(spatial);
            let mut layer_states = Vec::with_capacity(cfg.num_layers);
            let mut layer_incs = Vec::with_capacity(cfg.num_layers);
            let mut input = x;
            for (l, cell) in stack.cells.iter().enumerate() {
                let (s, inc) = cell.step(g, store, input, hidden[l], temporal[l], spatial)?;
                hidden[l] = s.hidden;
                temporal[l] = s.temporal;
                spatial = s.spatial;
                input = s.hidden;
                layer_states.push(s);
                layer_incs.push(inc);
            }
            let top = hidden[cfg.num_layers - 1];
            out.top_hidden.push(top);
            out.states.push(layer_states);
            out.increments.push(layer_incs);

            let generating = t + 1 >= n && out.generated.len() < steps_to_generate;
            let next_self_fed = t + 1 < total && !(t + 1 < n && teacher_mask[t + 1]);
            if generating || next_self_fed {
                let pred = self.decode_direction(g, store, top, dir)?;
                out.predictions.push(Some(pred));
                if generating {
                    out.generated.push(pred);
                    out.generated_hidden.push(top);
                }
            } else {
                out.predictions.push(None);
            }
        }
        Ok(out)
    }

    /// Predicts the `p` target frames of a window.
    ///
    /// `before` holds the `i` frames preceding the targets and `after` the `i`
    /// frames following them, in source order; each is `[B, C, H, W]`. The
    /// masks cover the `i` context steps of each direction. Target frames are
    /// never read.
    pub fn predict_window<T: Real>(
        &self,
        g: &mut Graph<T>,
        store: &ParamStore<T>,
        before: &[NodeId],
        after: &[NodeId],
        forward_mask: &[bool],
        backward_mask: &[bool],
    ) -> Result<WindowPrediction> {
        let (i, p) = (self.config.context_len, self.config.prediction_len);
        if before.len() != i || after.len() != i {
            return Err(Error::InvalidArgument(format!(
                "window needs {i} frames on each side, got {} and {}",
                before.len(),
                after.len()
            )));
        }
        if forward_mask.len() != i || backward_mask.len() != i {
            return Err(Error::InvalidArgument(format!("context masks must have {i} entries")));
        }
        let extend = |m: &[bool]| {
            let mut full = m.to_vec();
            full.resize(rollout_steps(i, p), false);
            full
        };
        let forward = self.directional_rollout(g, store, Direction::Forward, before, &extend(forward_mask), p)?;
        let backward = match self.backward {
            Some(_) => {
                let reversed: Vec<NodeId> = after.iter().rev().copied().collect();
                Some(self.directional_rollout(g, store, Direction::Backward, &reversed, &extend(backward_mask), p)?)
            }
            None => None,
        };
        let zeros = match backward {
            None => Some(g.input(Tensor::zeros(g.shape(forward.generated_hidden[0])))),
            Some(_) => None,
        };
        let mut frames = Vec::with_capacity(p);
        for k in 0..p {
            let hf = forward.generated_hidden[k];
            let hb = match &backward {
                Some(b) => b.generated_hidden[p - 1 - k],
                None => zeros.expect("zero hidden for forward-only model"),
            };
            frames.push(self.fuse_hidden(g, store, hf, hb)?);
        }
        Ok(WindowPrediction {
            frames,
            forward,
            backward,
        })
    }
}

/// Linear ramp of the probability that a context step reads its true frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReverseSchedule {
    pub start_prob: f64,
    pub end_prob: f64,
    pub ramp_iters: usize,
}

impl Default for ReverseSchedule {
    fn default() -> Self {
        Self {
            start_prob: 0.5,
            end_prob: 1.0,
            ramp_iters: 5000,
        }
    }
}

impl ReverseSchedule {
    pub fn true_frame_prob(&self, iteration: usize) -> f64 {
        if self.ramp_iters == 0 || iteration >= self.ramp_iters {
            return self.end_prob;
        }
        let frac = iteration as f64 / self.ramp_iters as f64;
        self.start_prob + (self.end_prob - self.start_prob) * frac
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.start_prob) || !(0.0..=1.0).contains(&self.end_prob) {
            return Err(Error::InvalidArgument(format!(
                "schedule probabilities must be in [0, 1], got {} and {}",
                self.start_prob, self.end_prob
            )));
        }
        Ok(())
    }
}

/// Context-step mask for one direction: `true` feeds the observed frame.
///
/// The first step always sees a true frame, since there is nothing to feed back yet.
pub fn reverse_scheduled_mask<R: Rng + ?Sized>(iteration: usize, schedule: &ReverseSchedule, context_len: usize, rng: &mut R) -> Vec<bool> {
    let prob = schedule.true_frame_prob(iteration);
    (0..context_len)
        .map(|t| {
            let draw = rng.random::<f64>();
            t == 0 || draw < prob
        })
        .collect()
}
