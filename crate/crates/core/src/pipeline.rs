//! Train, score and evaluate in one place; shared by the CLI and the tests.

use std::fmt::Write as _;

use crate::config::KeyValues;
use crate::data::{SyntheticBenchmark, SyntheticBenchmarkConfig, VideoSequence};
use crate::error::{Error, Result};
use crate::harness::{evaluate, EvaluationReport};
use crate::losses::LossBundle;
use crate::scoring::{pad_to_frames, series_from_errors, window_errors, ScoreSeries, WindowErrors};
use crate::training::{TrainConfig, Trainer};

pub const DEFAULT_ACCUMULATION_OFFSET: usize = 2;

/// Training, benchmark and scoring settings read from one config file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub bench: SyntheticBenchmarkConfig,
    pub accumulation_offset: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let bench = SyntheticBenchmarkConfig::default();
        let mut train = TrainConfig::default();
        train.generator.frame_size = (bench.size, bench.size);
        Self {
            train,
            bench,
            accumulation_offset: DEFAULT_ACCUMULATION_OFFSET,
        }
    }
}

impl RunConfig {
    pub fn keys() -> Vec<&'static str> {
        let mut keys: Vec<&str> = TrainConfig::KEYS.to_vec();
        keys.extend(SyntheticBenchmarkConfig::KEYS.iter().filter(|k| !TrainConfig::KEYS.contains(k)));
        keys.push("accumulation_offset");
        keys
    }

    /// Unknown keys are rejected. The frame size follows the benchmark `size`
    /// unless `frame_height`/`frame_width` are given.
    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        kv.reject_unknown(&Self::keys())?;
        let mut cfg = Self::default();
        cfg.bench.apply(kv)?;
        cfg.train.generator.frame_size = (cfg.bench.size, cfg.bench.size);
        cfg.train.apply(kv)?;
        kv.read_into("accumulation_offset", &mut cfg.accumulation_offset)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_kv(&KeyValues::parse(text)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.accumulation_offset >= self.train.generator.prediction_len {
            return Err(Error::InvalidArgument(format!(
                "accumulation offset {} must be below the prediction length {}",
                self.accumulation_offset, self.train.generator.prediction_len
            )));
        }
        Ok(())
    }

    /// One seed drives both the benchmark and training.
    pub fn set_seed(&mut self, seed: u64) {
        self.train.seed = seed;
        self.bench.seed = seed;
    }

    pub fn to_kv_text(&self) -> String {
        let mut s = self.train.to_kv_text();
        let _ = writeln!(s, "accumulation_offset = {}", self.accumulation_offset);
        s
    }
}

/// A trained model with its loss trace.
pub struct TrainedModel {
    pub trainer: Trainer,
    pub trace: Vec<LossBundle>,
}

pub fn train_model(config: TrainConfig, videos: &[VideoSequence], on_step: impl FnMut(usize, &LossBundle)) -> Result<TrainedModel> {
    let mut trainer = Trainer::new(config)?;
    let trace = trainer.train(videos, on_step)?;
    Ok(TrainedModel { trainer, trace })
}

/// Window errors of every video, computed once and reused across offsets.
pub fn all_window_errors(trainer: &Trainer, videos: &[VideoSequence]) -> Result<Vec<WindowErrors>> {
    videos.iter().map(|v| window_errors(&trainer.generator, &trainer.gen_store, v)).collect()
}

pub fn series_at_offset(videos: &[VideoSequence], errors: &[WindowErrors], offset: usize) -> Result<Vec<ScoreSeries>> {
    videos
        .iter()
        .zip(errors)
        .map(|(v, e)| series_from_errors(&v.id, e, v.len(), v.labels().map(<[u8]>::to_vec), offset))
        .collect()
}

/// Mean squared prediction error over abnormal frames when frame `t` is
/// charged with the error of the `offset`-th generated frame of window `t`.
pub fn mean_abnormal_error(videos: &[VideoSequence], errors: &[WindowErrors], offset: usize) -> Result<f64> {
    let (mut sum, mut count) = (0.0, 0usize);
    for (v, e) in videos.iter().zip(errors) {
        let Some(labels) = v.labels() else { continue };
        let per_window: Vec<f64> = e.mse.iter().map(|w| w[offset]).collect();
        for (err, &l) in pad_to_frames(&e.starts, &per_window, v.len()).iter().zip(labels) {
            if l == 1 {
                sum += err;
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::SingleClass);
    }
    Ok(sum / count as f64)
}

pub fn evaluate_at_offset(
    videos: &[VideoSequence],
    errors: &[WindowErrors],
    offset: usize,
    config_echo: &str,
) -> Result<(Vec<ScoreSeries>, EvaluationReport)> {
    let series = series_at_offset(videos, errors, offset)?;
    let report = evaluate(&series, offset, config_echo)?;
    Ok((series, report))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub variant: &'static str,
    pub bidirectional: bool,
    pub adversarial: bool,
    pub accumulation_offset: usize,
    pub auc: f64,
    pub delta_p: f64,
}

pub const ABLATION_HEADER: &str = "variant,bidirectional,adversarial,accumulation_offset,auc,delta_p";

/// Trains three models (forward only; forward with the adversary;
/// bidirectional with the adversary) and scores the last at `d = 0` and at
/// the configured offset. `on_variant` is called before each training run.
pub fn run_ablation(cfg: &RunConfig, bench: &SyntheticBenchmark, mut on_variant: impl FnMut(&str)) -> Result<Vec<AblationRow>> {
    let echo = cfg.to_kv_text();
    let mut rows = Vec::with_capacity(4);
    let variants: [(&'static str, bool, bool); 3] = [("model1", false, false), ("model2", false, true), ("model3", true, true)];
    for (name, bidirectional, adversarial) in variants {
        on_variant(name);
        let mut train = cfg.train.clone();
        train.generator.bidirectional = bidirectional;
        train.adversarial = adversarial;
        let model = train_model(train, &bench.train, |_, _| {})?;
        let errors = all_window_errors(&model.trainer, &bench.test)?;
        let mut offsets = vec![(name, 0)];
        if name == "model3" {
            offsets.push(("stcnet", cfg.accumulation_offset));
        }
        for (variant, offset) in offsets {
            let (_, report) = evaluate_at_offset(&bench.test, &errors, offset, &echo)?;
            rows.push(AblationRow {
                variant,
                bidirectional,
                adversarial,
                accumulation_offset: offset,
                auc: report.micro_auc,
                delta_p: report.delta_p,
            });
        }
    }
    Ok(rows)
}

pub fn ablation_table(rows: &[AblationRow]) -> String {
    let mut s = String::from(ABLATION_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{:.6},{:.6}",
            r.variant, r.bidirectional, r.adversarial, r.accumulation_offset, r.auc, r.delta_p
        );
    }
    s
}
