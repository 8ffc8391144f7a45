use std::fmt::Write as _;

use crate::config::KeyValues;
use crate::discriminator::DiscriminatorConfig;
use crate::error::{Error, Result};
use crate::generator::{GeneratorConfig, ReverseSchedule};
use crate::losses::LossWeights;

pub const DEFAULT_GRAD_CLIP: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub generator: GeneratorConfig,
    /// Hidden widths of the discriminator.
    pub disc_channels: Vec<usize>,
    pub gen_lr: f64,
    pub disc_lr: f64,
    pub batch_size: usize,
    pub weights: LossWeights,
    pub iterations: usize,
    pub schedule: ReverseSchedule,
    pub grad_clip: f64,
    pub seed: u64,
    /// Train against the discriminator; off means `λ_adv = 0` and no discriminator.
    pub adversarial: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            generator: GeneratorConfig::default(),
            disc_channels: vec![64, 128, 256],
            gen_lr: 1e-4,
            disc_lr: 1e-5,
            batch_size: 4,
            weights: LossWeights::default(),
            iterations: 10_000,
            schedule: ReverseSchedule::default(),
            grad_clip: DEFAULT_GRAD_CLIP,
            seed: 0,
            adversarial: true,
        }
    }
}

fn parse_list(key: &str, raw: &str) -> Result<Vec<usize>> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("`{key}` expects comma-separated integers, got `{raw}`")))
        })
        .collect()
}

impl TrainConfig {
    pub const KEYS: &'static [&'static str] = &[
        "layers",
        "hidden_channels",
        "kernel_size",
        "patch_factor",
        "context_len",
        "prediction_len",
        "frame_channels",
        "frame_height",
        "frame_width",
        "bidirectional",
        "adversarial",
        "disc_channels",
        "gen_lr",
        "disc_lr",
        "batch_size",
        "lambda_int",
        "lambda_gd",
        "lambda_adv",
        "lambda_dec",
        "iterations",
        "schedule_start",
        "schedule_end",
        "schedule_ramp",
        "grad_clip",
        "seed",
    ];

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.weights.validate()?;
        self.schedule.validate()?;
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.gen_lr > 0.0 && self.disc_lr > 0.0) {
            return bad(format!("learning rates must be positive, got {} and {}", self.gen_lr, self.disc_lr));
        }
        if self.iterations == 0 || self.batch_size == 0 {
            return bad("iterations and batch size must be positive".into());
        }
        if !(self.grad_clip > 0.0) {
            return bad(format!("grad_clip must be positive, got {}", self.grad_clip));
        }
        Ok(())
    }

    pub fn discriminator(&self) -> DiscriminatorConfig {
        DiscriminatorConfig {
            sequence_len: self.generator.prediction_len,
            frame_channels: self.generator.frame_channels,
            channels: self.disc_channels.clone(),
        }
    }

    /// Reads the `KEYS` subset of `kv`, leaving other keys alone.
    pub fn apply(&mut self, kv: &KeyValues) -> Result<()> {
        let g = &mut self.generator;
        kv.read_into("layers", &mut g.num_layers)?;
        kv.read_into("hidden_channels", &mut g.hidden_channels)?;
        kv.read_into("kernel_size", &mut g.kernel_size)?;
        kv.read_into("patch_factor", &mut g.patch_factor)?;
        kv.read_into("context_len", &mut g.context_len)?;
        kv.read_into("prediction_len", &mut g.prediction_len)?;
        kv.read_into("frame_channels", &mut g.frame_channels)?;
        kv.read_into("frame_height", &mut g.frame_size.0)?;
        kv.read_into("frame_width", &mut g.frame_size.1)?;
        kv.read_into("bidirectional", &mut g.bidirectional)?;
        kv.read_into("adversarial", &mut self.adversarial)?;
        if let Some(raw) = kv.get_raw("disc_channels") {
            self.disc_channels = parse_list("disc_channels", raw)?;
        }
        kv.read_into("gen_lr", &mut self.gen_lr)?;
        kv.read_into("disc_lr", &mut self.disc_lr)?;
        kv.read_into("batch_size", &mut self.batch_size)?;
        kv.read_into("lambda_int", &mut self.weights.intensity)?;
        kv.read_into("lambda_gd", &mut self.weights.gradient)?;
        kv.read_into("lambda_adv", &mut self.weights.adversarial)?;
        kv.read_into("lambda_dec", &mut self.weights.decouple)?;
        kv.read_into("iterations", &mut self.iterations)?;
        kv.read_into("schedule_start", &mut self.schedule.start_prob)?;
        kv.read_into("schedule_end", &mut self.schedule.end_prob)?;
        kv.read_into("schedule_ramp", &mut self.schedule.ramp_iters)?;
        kv.read_into("grad_clip", &mut self.grad_clip)?;
        kv.read_into("seed", &mut self.seed)?;
        Ok(())
    }

    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply(kv)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every field as `key = value` lines; parses back to an equal config.
    pub fn to_kv_text(&self) -> String {
        let g = &self.generator;
        let list = self.disc_channels.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let pairs: [(&str, String); 25] = [
            ("layers", g.num_layers.to_string()),
            ("hidden_channels", g.hidden_channels.to_string()),
            ("kernel_size", g.kernel_size.to_string()),
            ("patch_factor", g.patch_factor.to_string()),
            ("context_len", g.context_len.to_string()),
            ("prediction_len", g.prediction_len.to_string()),
            ("frame_channels", g.frame_channels.to_string()),
            ("frame_height", g.frame_size.0.to_string()),
            ("frame_width", g.frame_size.1.to_string()),
            ("bidirectional", g.bidirectional.to_string()),
            ("adversarial", self.adversarial.to_string()),
            ("disc_channels", list),
            ("gen_lr", format!("{:?}", self.gen_lr)),
            ("disc_lr", format!("{:?}", self.disc_lr)),
            ("batch_size", self.batch_size.to_string()),
            ("lambda_int", format!("{:?}", self.weights.intensity)),
            ("lambda_gd", format!("{:?}", self.weights.gradient)),
            ("lambda_adv", format!("{:?}", self.weights.adversarial)),
            ("lambda_dec", format!("{:?}", self.weights.decouple)),
            ("iterations", self.iterations.to_string()),
            ("schedule_start", format!("{:?}", self.schedule.start_prob)),
            ("schedule_end", format!("{:?}", self.schedule.end_prob)),
            ("schedule_ramp", self.schedule.ramp_iters.to_string()),
            ("grad_clip", format!("{:?}", self.grad_clip)),
            ("seed", self.seed.to_string()),
        ];
        for (k, v) in pairs {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_text_roundtrip() {
        let mut cfg = TrainConfig::default();
        cfg.gen_lr = 3e-4;
        cfg.generator.bidirectional = false;
        cfg.disc_channels = vec![8, 16];
        cfg.schedule.ramp_iters = 77;
        let kv = KeyValues::parse(&cfg.to_kv_text()).unwrap();
        kv.reject_unknown(TrainConfig::KEYS).unwrap();
        assert_eq!(TrainConfig::from_kv(&kv).unwrap(), cfg);
    }

    #[test]
    fn invalid_values_rejected() {
        let kv = KeyValues::parse("gen_lr = 0").unwrap();
        assert!(TrainConfig::from_kv(&kv).is_err());
        let kv = KeyValues::parse("disc_channels = 4,x").unwrap();
        assert!(TrainConfig::from_kv(&kv).is_err());
        let kv = KeyValues::parse("layers = many").unwrap();
        assert!(TrainConfig::from_kv(&kv).unwrap_err().to_string().contains("line 1"));
    }
}
