//! Alternating generator/discriminator optimization.

mod checkpoint;
mod config;

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{TrainConfig, DEFAULT_GRAD_CLIP};

use crate::data::{stack_window_frames, PredictionWindow, VideoSequence, WindowSpec};
use crate::discriminator::{Discriminator, Weights};
use crate::error::{Error, Result};
use crate::generator::{reverse_scheduled_mask, Generator};
use crate::losses::{
    decouple_loss, discriminator_total_loss, generator_total_loss, gradient_loss, intensity_loss, lsgan_g_loss, GeneratorTerms,
    LossBundle,
};
use crate::numerics::{clip_grad_norm, Adam, AdamConfig, Graph, NodeId, ParamStore, Tensor};

pub const TRAINING_LOG_HEADER: &str = "iteration,L_int,L_gd,L_adv_g,L_dec,L_G,L_D";

/// Generator outputs and targets of one batch, cut from the generator graph.
#[derive(Debug, Clone, PartialEq)]
pub struct DetachedSample {
    /// `p` tensors `[B, C, H, W]`.
    pub predicted: Vec<Tensor<f32>>,
    pub target: Vec<Tensor<f32>>,
}

/// Model, optimizers and sampling state of one training run.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub config: TrainConfig,
    pub generator: Generator,
    pub gen_store: ParamStore<f32>,
    pub gen_opt: Adam<f32>,
    /// Absent when training without the adversarial term.
    pub discriminator: Option<Discriminator>,
    pub disc_store: ParamStore<f32>,
    pub disc_opt: Adam<f32>,
    /// Completed iterations.
    pub iteration: usize,
    pub rng: ChaCha8Rng,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut gen_store = ParamStore::new();
        let generator = Generator::new(config.generator.clone(), &mut gen_store, &mut rng)?;
        let mut disc_store = ParamStore::new();
        let discriminator = match config.adversarial {
            true => Some(Discriminator::new(config.discriminator(), &mut disc_store, &mut rng)?),
            false => None,
        };
        let gen_opt = Adam::new(AdamConfig::with_learning_rate(config.gen_lr), &gen_store);
        let disc_opt = Adam::new(AdamConfig::with_learning_rate(config.disc_lr), &disc_store);
        Ok(Self {
            config,
            generator,
            gen_store,
            gen_opt,
            discriminator,
            disc_store,
            disc_opt,
            iteration: 0,
            rng,
        })
    }

    pub fn window_spec(&self) -> Result<WindowSpec> {
        WindowSpec::new(self.config.generator.context_len, self.config.generator.prediction_len)
    }

    /// Draws `batch_size` windows uniformly: a video, then a start within it.
    pub fn sample_batch<'a>(&mut self, videos: &'a [VideoSequence]) -> Result<Vec<PredictionWindow<'a>>> {
        let spec = self.window_spec()?;
        if let Some(v) = videos.iter().find(|v| v.len() < spec.span()) {
            return Err(Error::VideoTooShort {
                len: v.len(),
                required: spec.span(),
            });
        }
        if videos.is_empty() {
            return Err(Error::InvalidArgument("no training videos".into()));
        }
        (0..self.config.batch_size)
            .map(|_| {
                let v = &videos[self.rng.random_range(0..videos.len())];
                let last = v.len() - spec.target - spec.context;
                let start = self.rng.random_range(spec.context..=last);
                PredictionWindow::new(v, start, spec)
            })
            .collect()
    }

    /// One generator update followed by one discriminator update.
    pub fn train_step(&mut self, batch: &[PredictionWindow<'_>]) -> Result<LossBundle> {
        let (mut bundle, sample) = self.generator_step(batch)?;
        if self.discriminator.is_some() {
            bundle.total_d = self.discriminator_step(&sample)?;
        }
        self.iteration += 1;
        Ok(bundle)
    }

    /// Generator forward with reverse-scheduled context masks, backprop of
    /// the total generator loss and an optimizer step on generator weights.
    ///
    /// Returns the losses and detached predictions with their targets.
    pub fn generator_step(&mut self, batch: &[PredictionWindow<'_>]) -> Result<(LossBundle, DetachedSample)> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty training batch".into()));
        }
        let it = self.iteration;
        let i = self.config.generator.context_len;
        let fmask = reverse_scheduled_mask(it, &self.config.schedule, i, &mut self.rng);
        let bmask = reverse_scheduled_mask(it, &self.config.schedule, i, &mut self.rng);

        let mut g = Graph::<f32>::new();
        let before = stack_window_frames(&mut g, batch, PredictionWindow::before)?;
        let after = stack_window_frames(&mut g, batch, PredictionWindow::after)?;
        let target = stack_window_frames(&mut g, batch, PredictionWindow::target)?;
        let pred = self
            .generator
            .predict_window(&mut g, &self.gen_store, &before, &after, &fmask, &bmask)?;
        let intensity = intensity_loss(&mut g, &pred.frames, &target)?;
        let gradient = gradient_loss(&mut g, &pred.frames, &target)?;
        let (decouple, _) = decouple_loss(&mut g, &pred.increments())?;
        let adversarial = match &self.discriminator {
            Some(d) => {
                let fake = d.discriminate(&mut g, &self.disc_store, &pred.frames, Weights::Frozen)?;
                Some(lsgan_g_loss(&mut g, fake)?)
            }
            None => None,
        };
        let terms = GeneratorTerms {
            intensity,
            gradient,
            adversarial,
            decouple,
        };
        let total_g = generator_total_loss(&mut g, &terms, &self.config.weights)?;
        let bundle = LossBundle {
            intensity: g.scalar(intensity) as f64,
            gradient: g.scalar(gradient) as f64,
            adversarial_g: adversarial.map_or(0.0, |a| g.scalar(a) as f64),
            decouple: g.scalar(decouple) as f64,
            total_g: g.scalar(total_g) as f64,
            total_d: 0.0,
        };
        self.check_finite(&bundle)?;
        self.gen_store.zero_grad();
        g.backward(total_g, &mut self.gen_store)?;
        clip_grad_norm(&mut self.gen_store, self.config.grad_clip);
        self.gen_opt.step(&mut self.gen_store)?;
        let sample = DetachedSample {
            predicted: pred.frames.iter().map(|&f| g.value(f).clone()).collect(),
            target: target.iter().map(|&f| g.value(f).clone()).collect(),
        };
        Ok((bundle, sample))
    }

    /// Least-squares discriminator update on real targets versus detached
    /// predictions. Returns the discriminator loss.
    pub fn discriminator_step(&mut self, sample: &DetachedSample) -> Result<f64> {
        let d = self
            .discriminator
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("trainer has no discriminator".into()))?;
        let mut g = Graph::<f32>::new();
        let fake_frames: Vec<NodeId> = sample.predicted.iter().map(|f| g.input(f.clone())).collect();
        let real_frames: Vec<NodeId> = sample.target.iter().map(|f| g.input(f.clone())).collect();
        let real = d.discriminate(&mut g, &self.disc_store, &real_frames, Weights::Trainable)?;
        let fake = d.discriminate(&mut g, &self.disc_store, &fake_frames, Weights::Trainable)?;
        let loss = discriminator_total_loss(&mut g, real, fake)?;
        let value = g.scalar(loss) as f64;
        if !value.is_finite() {
            return Err(Error::NonFiniteLoss {
                iteration: self.iteration,
                breakdown: format!("L_D={value}"),
            });
        }
        self.disc_store.zero_grad();
        g.backward(loss, &mut self.disc_store)?;
        clip_grad_norm(&mut self.disc_store, self.config.grad_clip);
        self.disc_opt.step(&mut self.disc_store)?;
        Ok(value)
    }

    fn check_finite(&self, b: &LossBundle) -> Result<()> {
        if b.all_finite() {
            return Ok(());
        }
        Err(Error::NonFiniteLoss {
            iteration: self.iteration,
            breakdown: format!(
                "L_int={} L_gd={} L_adv_g={} L_dec={} L_G={} L_D={}",
                b.intensity, b.gradient, b.adversarial_g, b.decouple, b.total_g, b.total_d
            ),
        })
    }

    /// Runs until `config.iterations` steps are done, calling `on_step` after each.
    pub fn train(&mut self, videos: &[VideoSequence], mut on_step: impl FnMut(usize, &LossBundle)) -> Result<Vec<LossBundle>> {
        let mut trace = Vec::with_capacity(self.config.iterations.saturating_sub(self.iteration));
        while self.iteration < self.config.iterations {
            let batch = self.sample_batch(videos)?;
            let bundle = self.train_step(&batch)?;
            on_step(self.iteration, &bundle);
            trace.push(bundle);
        }
        Ok(trace)
    }
}

/// CSV with one row per iteration, numbered from `first_iteration`.
pub fn training_log_csv(trace: &[LossBundle], first_iteration: usize) -> String {
    let mut out = String::from(TRAINING_LOG_HEADER);
    out.push('\n');
    for (k, b) in trace.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{:?},{:?},{:?},{:?},{:?},{:?}",
            first_iteration + k,
            b.intensity,
            b.gradient,
            b.adversarial_g,
            b.decouple,
            b.total_g,
            b.total_d
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_generate, SyntheticSceneConfig};
    use crate::generator::GeneratorConfig;

    pub(crate) fn toy_config(adversarial: bool) -> TrainConfig {
        TrainConfig {
            generator: GeneratorConfig {
                num_layers: 1,
                hidden_channels: 4,
                kernel_size: 3,
                patch_factor: 4,
                context_len: 2,
                prediction_len: 2,
                frame_channels: 1,
                frame_size: (16, 16),
                bidirectional: true,
            },
            disc_channels: vec![4, 4],
            gen_lr: 1e-3,
            disc_lr: 1e-3,
            batch_size: 2,
            iterations: 4,
            adversarial,
            ..TrainConfig::default()
        }
    }

    pub(crate) fn toy_videos() -> Vec<VideoSequence> {
        (0..2)
            .map(|s| {
                synth_generate(&SyntheticSceneConfig {
                    size: 16,
                    length: 12,
                    object_size: 4.0,
                    seed: s,
                    ..SyntheticSceneConfig::default()
                })
                .unwrap()
            })
            .collect()
    }

    fn snapshot(store: &ParamStore<f32>) -> Vec<Vec<f32>> {
        store.iter().map(|p| p.value.data().to_vec()).collect()
    }

    #[test]
    fn identical_seeds_give_identical_traces() {
        let videos = toy_videos();
        let run = || {
            let mut t = Trainer::new(toy_config(true)).unwrap();
            t.train(&videos, |_, _| {}).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn each_phase_updates_only_its_own_weights() {
        let videos = toy_videos();
        let mut t = Trainer::new(toy_config(true)).unwrap();
        let batch = t.sample_batch(&videos).unwrap();
        let (g0, d0) = (snapshot(&t.gen_store), snapshot(&t.disc_store));
        let (_, sample) = t.generator_step(&batch).unwrap();
        assert_ne!(snapshot(&t.gen_store), g0);
        assert_eq!(snapshot(&t.disc_store), d0);
        let g1 = snapshot(&t.gen_store);
        t.discriminator_step(&sample).unwrap();
        assert_eq!(snapshot(&t.gen_store), g1);
        assert_ne!(snapshot(&t.disc_store), d0);
    }

    #[test]
    fn without_adversary_no_discriminator_is_built() {
        let videos = toy_videos();
        let mut t = Trainer::new(toy_config(false)).unwrap();
        assert!(t.discriminator.is_none());
        let trace = t.train(&videos, |_, _| {}).unwrap();
        assert!(trace.iter().all(|b| b.total_d == 0.0 && b.adversarial_g == 0.0));
        let b = trace[0];
        assert!((b.total_g - (b.intensity + b.gradient + b.decouple)).abs() < 1e-5);
    }

    #[test]
    fn log_has_header_and_rows() {
        let b = LossBundle::default();
        let csv = training_log_csv(&[b, b], 0);
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], TRAINING_LOG_HEADER);
        assert_eq!(lines.len(), 3);
        assert!(lines[2].starts_with("1,"));
    }

    #[test]
    fn short_videos_rejected() {
        let mut t = Trainer::new(toy_config(false)).unwrap();
        let short = vec![toy_videos()[0].clone()];
        let frames = short[0].frames()[..5].to_vec();
        let v = vec![VideoSequence::new("s", frames, None).unwrap()];
        assert!(matches!(t.sample_batch(&v), Err(Error::VideoTooShort { .. })));
    }
}
