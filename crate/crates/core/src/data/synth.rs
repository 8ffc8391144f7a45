//! Procedural moving-shapes videos with labelled anomaly intervals.
//!
//! Objects drift with constant velocity and bounce off the canvas border.
//! Inside an anomaly interval the first object deviates: it speeds up,
//! turns into a shape never seen in normal footage, or teleports.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::video::VideoSequence;
use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::numerics::Tensor;

const SUPERSAMPLE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeKind {
    Square,
    Circle,
    /// Only appears during [`AnomalyKind::NovelShape`] intervals.
    Cross,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnomalyKind {
    None,
    SpeedUp { factor: f32 },
    NovelShape,
    Teleport { every: usize },
}

impl AnomalyKind {
    pub fn name(&self) -> &'static str {
        match self {
            AnomalyKind::None => "none",
            AnomalyKind::SpeedUp { .. } => "speed",
            AnomalyKind::NovelShape => "shape",
            AnomalyKind::Teleport { .. } => "teleport",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSceneConfig {
    pub size: usize,
    pub length: usize,
    pub objects: usize,
    pub kinds: Vec<ShapeKind>,
    /// Edge length (squares) or diameter (circles), in pixels.
    pub object_size: f32,
    /// Normal speed range in pixels per frame.
    pub speed: (f32, f32),
    pub anomaly: AnomalyKind,
    /// Half-open frame interval `[start, end)` of the anomaly.
    pub anomaly_interval: Option<(usize, usize)>,
    pub seed: u64,
}

impl Default for SyntheticSceneConfig {
    fn default() -> Self {
        Self {
            size: 32,
            length: 80,
            objects: 2,
            kinds: vec![ShapeKind::Square, ShapeKind::Circle],
            object_size: 7.0,
            speed: (0.6, 1.2),
            anomaly: AnomalyKind::None,
            anomaly_interval: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
struct Object {
    kind: ShapeKind,
    size: f32,
    intensity: f32,
    pos: (f32, f32),
    vel: (f32, f32),
}

impl Object {
    fn advance(&mut self, factor: f32, canvas: f32) {
        let half = self.size / 2.0;
        for axis in 0..2 {
            let (p, v) = match axis {
                0 => (&mut self.pos.0, &mut self.vel.0),
                _ => (&mut self.pos.1, &mut self.vel.1),
            };
            *p += *v * factor;
            if *p < half {
                *p = 2.0 * half - *p;
                *v = v.abs();
            }
            if *p > canvas - half {
                *p = 2.0 * (canvas - half) - *p;
                *v = -v.abs();
            }
            *p = p.clamp(half, canvas - half);
        }
    }

    fn covers(&self, kind: ShapeKind, size: f32, x: f32, y: f32) -> bool {
        let (dx, dy) = ((x - self.pos.0).abs(), (y - self.pos.1).abs());
        let half = size / 2.0;
        match kind {
            ShapeKind::Square => dx <= half && dy <= half,
            ShapeKind::Circle => dx * dx + dy * dy <= half * half,
            ShapeKind::Cross => {
                let arm = size / 6.0;
                (dx <= half && dy <= arm) || (dx <= arm && dy <= half)
            }
        }
    }
}

fn validate(cfg: &SyntheticSceneConfig) -> Result<()> {
    if cfg.size < 4 || cfg.length == 0 || cfg.objects == 0 || cfg.kinds.is_empty() {
        return Err(Error::InvalidArgument("synthetic scene needs size >= 4, frames and objects".into()));
    }
    if cfg.object_size <= 0.0 || cfg.object_size * 1.5 >= cfg.size as f32 {
        return Err(Error::InvalidArgument(format!(
            "object size {} does not fit a {}px canvas",
            cfg.object_size, cfg.size
        )));
    }
    if !(cfg.speed.0 >= 0.0 && cfg.speed.1 >= cfg.speed.0) {
        return Err(Error::InvalidArgument(format!("bad speed range {:?}", cfg.speed)));
    }
    match (cfg.anomaly, cfg.anomaly_interval) {
        (AnomalyKind::None, _) => {}
        (_, None) => return Err(Error::InvalidArgument("anomaly kind set without an interval".into())),
        (kind, Some((s, e))) => {
            if s >= e || e > cfg.length {
                return Err(Error::InvalidArgument(format!(
                    "anomaly interval [{s}, {e}) outside a {}-frame video",
                    cfg.length
                )));
            }
            if let AnomalyKind::Teleport { every: 0 } = kind {
                return Err(Error::InvalidArgument("teleport period must be positive".into()));
            }
            if let AnomalyKind::SpeedUp { factor } = kind {
                if !(factor > 0.0) {
                    return Err(Error::InvalidArgument("speed-up factor must be positive".into()));
                }
            }
        }
    }
    Ok(())
}

/// Renders one video. A pure function of `cfg`, seed included.
pub fn synth_generate(cfg: &SyntheticSceneConfig) -> Result<VideoSequence> {
    validate(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let canvas = cfg.size as f32;
    let mut objects: Vec<Object> = (0..cfg.objects)
        .map(|k| {
            let half = cfg.object_size / 2.0;
            let speed = rng.random_range(cfg.speed.0..=cfg.speed.1);
            let angle = rng.random_range(0.0..std::f32::consts::TAU);
            Object {
                kind: cfg.kinds[k % cfg.kinds.len()],
                size: cfg.object_size,
                intensity: rng.random_range(0.6..=1.0),
                pos: (rng.random_range(half..canvas - half), rng.random_range(half..canvas - half)),
                vel: (speed * angle.cos(), speed * angle.sin()),
            }
        })
        .collect();

    let active = |t: usize| {
        cfg.anomaly != AnomalyKind::None && cfg.anomaly_interval.is_some_and(|(s, e)| t >= s && t < e)
    };
    let mut frames = Vec::with_capacity(cfg.length);
    let mut labels = Vec::with_capacity(cfg.length);
    for t in 0..cfg.length {
        let abnormal = active(t);
        labels.push(abnormal as u8);
        frames.push(render(&objects, cfg, abnormal)?);

        // motion into frame t + 1
        let next_abnormal = active(t + 1);
        for (k, obj) in objects.iter_mut().enumerate() {
            let factor = match cfg.anomaly {
                AnomalyKind::SpeedUp { factor } if k == 0 && next_abnormal => factor,
                _ => 1.0,
            };
            obj.advance(factor, canvas);
        }
        if let (AnomalyKind::Teleport { every }, Some((s, _))) = (cfg.anomaly, cfg.anomaly_interval) {
            if next_abnormal && (t + 1 - s) % every == 0 {
                let half = objects[0].size / 2.0;
                objects[0].pos = (rng.random_range(half..canvas - half), rng.random_range(half..canvas - half));
            }
        }
    }
    VideoSequence::new(format!("synth-{}", cfg.seed), frames, Some(labels))
}

fn render(objects: &[Object], cfg: &SyntheticSceneConfig, abnormal: bool) -> Result<Tensor<f32>> {
    let n = cfg.size;
    let mut data = vec![0f32; n * n];
    let step = 1.0 / SUPERSAMPLE as f32;
    for (k, obj) in objects.iter().enumerate() {
        let (kind, size) = if abnormal && k == 0 && cfg.anomaly == AnomalyKind::NovelShape {
            (ShapeKind::Cross, obj.size * 1.6)
        } else {
            (obj.kind, obj.size)
        };
        let half = size / 2.0 + 1.0;
        let (x0, x1) = ((obj.pos.0 - half).floor().max(0.0) as usize, ((obj.pos.0 + half).ceil() as usize).min(n));
        let (y0, y1) = ((obj.pos.1 - half).floor().max(0.0) as usize, ((obj.pos.1 + half).ceil() as usize).min(n));
        for y in y0..y1 {
            for x in x0..x1 {
                let mut hits = 0;
                for sy in 0..SUPERSAMPLE {
                    for sx in 0..SUPERSAMPLE {
                        let px = x as f32 + (sx as f32 + 0.5) * step;
                        let py = y as f32 + (sy as f32 + 0.5) * step;
                        hits += obj.covers(kind, size, px, py) as usize;
                    }
                }
                let v = obj.intensity * hits as f32 / (SUPERSAMPLE * SUPERSAMPLE) as f32;
                let cell = &mut data[y * n + x];
                *cell = cell.max(v);
            }
        }
    }
    Tensor::from_vec(&[1, n, n], data)
}

/// Normal training videos plus anomalous test videos.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticBenchmarkConfig {
    pub size: usize,
    pub train_videos: usize,
    pub train_length: usize,
    pub test_videos: usize,
    pub test_length: usize,
    pub objects: usize,
    pub object_size: f32,
    pub speed: (f32, f32),
    /// Cycled over the test videos.
    pub anomalies: Vec<AnomalyKind>,
    pub anomaly_length: usize,
    pub seed: u64,
}

impl Default for SyntheticBenchmarkConfig {
    fn default() -> Self {
        Self {
            size: 32,
            train_videos: 8,
            train_length: 80,
            test_videos: 4,
            test_length: 100,
            objects: 2,
            object_size: 7.0,
            speed: (0.6, 1.2),
            anomalies: vec![AnomalyKind::SpeedUp { factor: 3.0 }, AnomalyKind::NovelShape],
            anomaly_length: 30,
            seed: 0,
        }
    }
}

impl SyntheticBenchmarkConfig {
    pub const KEYS: &'static [&'static str] = &[
        "size",
        "train_videos",
        "train_length",
        "test_videos",
        "test_length",
        "objects",
        "object_size",
        "speed_min",
        "speed_max",
        "anomalies",
        "speedup_factor",
        "teleport_every",
        "anomaly_length",
        "seed",
    ];

    /// Reads the `KEYS` subset of `kv`, leaving other keys alone.
    pub fn apply(&mut self, kv: &KeyValues) -> Result<()> {
        kv.read_into("size", &mut self.size)?;
        kv.read_into("train_videos", &mut self.train_videos)?;
        kv.read_into("train_length", &mut self.train_length)?;
        kv.read_into("test_videos", &mut self.test_videos)?;
        kv.read_into("test_length", &mut self.test_length)?;
        kv.read_into("objects", &mut self.objects)?;
        kv.read_into("object_size", &mut self.object_size)?;
        kv.read_into("speed_min", &mut self.speed.0)?;
        kv.read_into("speed_max", &mut self.speed.1)?;
        kv.read_into("anomaly_length", &mut self.anomaly_length)?;
        kv.read_into("seed", &mut self.seed)?;
        let factor: f32 = kv.get("speedup_factor")?.unwrap_or(3.0);
        let every: usize = kv.get("teleport_every")?.unwrap_or(4);
        if let Some(list) = kv.get_raw("anomalies") {
            self.anomalies = list
                .split(',')
                .map(|s| match s.trim() {
                    "speed" => Ok(AnomalyKind::SpeedUp { factor }),
                    "shape" => Ok(AnomalyKind::NovelShape),
                    "teleport" => Ok(AnomalyKind::Teleport { every }),
                    "none" => Ok(AnomalyKind::None),
                    other => Err(Error::InvalidArgument(format!("unknown anomaly kind `{other}`"))),
                })
                .collect::<Result<_>>()?;
        } else {
            for a in &mut self.anomalies {
                match a {
                    AnomalyKind::SpeedUp { factor: f } => *f = factor,
                    AnomalyKind::Teleport { every: e } => *e = every,
                    _ => {}
                }
            }
        }
        Ok(())
    }

    fn scene(&self, length: usize, seed: u64) -> SyntheticSceneConfig {
        SyntheticSceneConfig {
            size: self.size,
            length,
            objects: self.objects,
            object_size: self.object_size,
            speed: self.speed,
            seed,
            ..SyntheticSceneConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticBenchmark {
    pub train: Vec<VideoSequence>,
    pub test: Vec<VideoSequence>,
}

impl SyntheticBenchmark {
    pub fn generate(cfg: &SyntheticBenchmarkConfig) -> Result<Self> {
        if cfg.anomalies.is_empty() && cfg.test_videos > 0 {
            return Err(Error::InvalidArgument("test videos need at least one anomaly kind".into()));
        }
        let mut seeds = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut train = Vec::with_capacity(cfg.train_videos);
        for k in 0..cfg.train_videos {
            let mut v = synth_generate(&cfg.scene(cfg.train_length, seeds.random()))?;
            v.id = format!("train_{k:02}");
            train.push(v);
        }
        let mut test = Vec::with_capacity(cfg.test_videos);
        for k in 0..cfg.test_videos {
            let mut scene = cfg.scene(cfg.test_length, seeds.random());
            scene.anomaly = cfg.anomalies[k % cfg.anomalies.len()];
            if scene.anomaly != AnomalyKind::None {
                let margin = cfg.test_length / 5;
                let latest = cfg.test_length.saturating_sub(cfg.anomaly_length + margin);
                if latest <= margin {
                    return Err(Error::InvalidArgument(format!(
                        "anomaly length {} too long for {}-frame test videos",
                        cfg.anomaly_length, cfg.test_length
                    )));
                }
                let start = seeds.random_range(margin..=latest);
                scene.anomaly_interval = Some((start, start + cfg.anomaly_length));
            }
            let mut v = synth_generate(&scene)?;
            v.id = format!("test_{k:02}_{}", scene.anomaly.name());
            test.push(v);
        }
        Ok(Self { train, test })
    }
}
