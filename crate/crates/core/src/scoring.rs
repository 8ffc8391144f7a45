//! PSNR-based regular scores.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::data::{iter_windows, stack_window_frames, Frame, PredictionWindow, VideoSequence, WindowSpec};
use crate::error::{shape_mismatch, Error, Result};
use crate::generator::Generator;
use crate::numerics::{Graph, ParamStore};

pub const PSNR_CAP_DB: f64 = 100.0;
pub const PSNR_MSE_FLOOR: f64 = 1e-10;
pub const PSNR_PEAK_FLOOR: f64 = 1e-3;
/// Windows predicted together during scoring.
pub const SCORING_BATCH: usize = 8;

/// `10·log10(peak² / MSE)` with `peak = max(max x̂, 1e-3)`, capped at 100 dB.
pub fn psnr(truth: &[f32], predicted: &[f32]) -> Result<f64> {
    if truth.len() != predicted.len() || truth.is_empty() {
        return Err(shape_mismatch("psnr", &[truth.len()], &[predicted.len()]));
    }
    let mse = truth
        .iter()
        .zip(predicted)
        .map(|(&a, &b)| {
            let d = a as f64 - b as f64;
            d * d
        })
        .sum::<f64>()
        / truth.len() as f64;
    if mse < PSNR_MSE_FLOOR {
        return Ok(PSNR_CAP_DB);
    }
    let peak = predicted.iter().fold(PSNR_PEAK_FLOOR, |m, &v| m.max(v as f64));
    Ok(10.0 * (peak * peak / mse).log10())
}

/// Min-max normalization of one video's series; a constant series maps to 0.5.
pub fn normalize_scores(series: &[f64]) -> Result<Vec<f64>> {
    if series.is_empty() {
        return Err(Error::InvalidArgument("cannot normalize an empty score series".into()));
    }
    let min = series.iter().copied().fold(f64::INFINITY, f64::min);
    let max = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == min {
        return Ok(vec![0.5; series.len()]);
    }
    Ok(series
        .iter()
        .map(|&v| {
            if v == max {
                1.0
            } else {
                (v - min) / (max - min)
            }
        })
        .collect())
}

/// `1 − S(t)`.
pub fn anomaly_scores(regular: &[f64]) -> Vec<f64> {
    regular.iter().map(|s| 1.0 - s).collect()
}

/// Per-frame scores of one video.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSeries {
    pub video_id: String,
    pub psnr: Vec<f64>,
    pub regular: Vec<f64>,
    pub anomaly: Vec<f64>,
    pub labels: Option<Vec<u8>>,
}

pub const SCORE_CSV_HEADER: &str = "frame_index,psnr,regular_score,anomaly_score,label";

impl ScoreSeries {
    /// Normalizes `psnr` and derives the anomaly scores.
    pub fn from_psnr(video_id: impl Into<String>, psnr: Vec<f64>, labels: Option<Vec<u8>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != psnr.len() {
                return Err(Error::InvalidArgument(format!("{} labels for {} scores", l.len(), psnr.len())));
            }
        }
        let regular = normalize_scores(&psnr)?;
        let anomaly = anomaly_scores(&regular);
        Ok(Self {
            video_id: video_id.into(),
            psnr,
            regular,
            anomaly,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.psnr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psnr.is_empty()
    }

    /// Unlabelled frames get an empty label column.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(SCORE_CSV_HEADER);
        out.push('\n');
        for t in 0..self.len() {
            let label = self.labels.as_ref().map(|l| l[t].to_string()).unwrap_or_default();
            let _ = writeln!(out, "{t},{:?},{:?},{:?},{label}", self.psnr[t], self.regular[t], self.anomaly[t]);
        }
        out
    }

    pub fn from_csv(video_id: impl Into<String>, text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(SCORE_CSV_HEADER) {
            return Err(Error::InvalidArgument("score CSV has an unexpected header".into()));
        }
        let (mut psnr, mut regular, mut anomaly, mut labels) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        let mut labelled = true;
        for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = || Error::InvalidArgument(format!("score CSV line {}: cannot parse `{line}`", n + 2));
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 5 || cols[0].parse::<usize>().map_err(|_| bad())? != psnr.len() {
                return Err(bad());
            }
            psnr.push(cols[1].parse().map_err(|_| bad())?);
            regular.push(cols[2].parse().map_err(|_| bad())?);
            anomaly.push(cols[3].parse().map_err(|_| bad())?);
            match cols[4] {
                "" => labelled = false,
                l => labels.push(l.parse().map_err(|_| bad())?),
            }
        }
        Ok(Self {
            video_id: video_id.into(),
            psnr,
            regular,
            anomaly,
            labels: labelled.then_some(labels),
        })
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Predicts the target frames of each window with every context frame
/// observed and every target frame generated. Targets are never read.
pub fn predict_windows(gen: &Generator, store: &ParamStore<f32>, windows: &[PredictionWindow<'_>]) -> Result<Vec<Vec<Frame>>> {
    let cfg = &gen.config;
    let mut out = Vec::with_capacity(windows.len());
    for chunk in windows.chunks(SCORING_BATCH) {
        let mut g = Graph::<f32>::new();
        let before = stack_window_frames(&mut g, chunk, PredictionWindow::before)?;
        let after = stack_window_frames(&mut g, chunk, PredictionWindow::after)?;
        let mask = vec![true; cfg.context_len];
        let pred = gen.predict_window(&mut g, store, &before, &after, &mask, &mask)?;
        for b in 0..chunk.len() {
            let frames = pred
                .frames
                .iter()
                .map(|&f| g.value(f).batch_item(b).reshape(&g.shape(f)[1..]))
                .collect::<Result<Vec<_>>>()?;
            out.push(frames);
        }
    }
    Ok(out)
}

/// `PSNR(x_{t+k}, clamp(x̂_{t+k}))` for every window start `t` and target offset `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowErrors {
    pub starts: Vec<usize>,
    /// `[window][k]`.
    pub psnr: Vec<Vec<f64>>,
    /// `[window][k]` mean squared error.
    pub mse: Vec<Vec<f64>>,
}

/// Minimum video length accepted by scoring: `2i + p`.
pub fn min_scoring_length(gen: &Generator) -> usize {
    2 * gen.config.context_len + gen.config.prediction_len
}

pub fn window_errors(gen: &Generator, store: &ParamStore<f32>, video: &VideoSequence) -> Result<WindowErrors> {
    let required = min_scoring_length(gen);
    if video.len() < required {
        return Err(Error::VideoTooShort {
            len: video.len(),
            required,
        });
    }
    let spec = WindowSpec::new(gen.config.context_len, gen.config.prediction_len)?;
    let windows: Vec<_> = iter_windows(video, spec).collect();
    let predictions = predict_windows(gen, store, &windows)?;
    let mut errs = WindowErrors {
        starts: windows.iter().map(|w| w.start).collect(),
        psnr: Vec::with_capacity(windows.len()),
        mse: Vec::with_capacity(windows.len()),
    };
    for (w, preds) in windows.iter().zip(&predictions) {
        let mut ps = Vec::with_capacity(preds.len());
        let mut ms = Vec::with_capacity(preds.len());
        for (truth, pred) in w.target().iter().zip(preds) {
            let clamped: Vec<f32> = pred.data().iter().map(|v| v.clamp(0.0, 1.0)).collect();
            ps.push(psnr(truth.data(), &clamped)?);
            let mse = truth
                .data()
                .iter()
                .zip(&clamped)
                .map(|(&a, &b)| ((a - b) as f64).powi(2))
                .sum::<f64>()
                / clamped.len() as f64;
            ms.push(mse);
        }
        errs.psnr.push(ps);
        errs.mse.push(ms);
    }
    Ok(errs)
}

/// Spreads per-window values to every frame: window start `t` owns frame `t`,
/// frames without a window copy the nearest scored frame.
pub fn pad_to_frames(starts: &[usize], values: &[f64], len: usize) -> Vec<f64> {
    let (first, last) = (starts[0], starts[starts.len() - 1]);
    (0..len)
        .map(|t| {
            let t = t.clamp(first, last);
            values[starts.partition_point(|&s| s < t)]
        })
        .collect()
}

/// Scores every frame of `video` with the PSNR of the `offset`-th generated
/// frame of its window, then normalizes over the video.
pub fn accumulated_regular_score(gen: &Generator, store: &ParamStore<f32>, video: &VideoSequence, offset: usize) -> Result<ScoreSeries> {
    let errs = window_errors(gen, store, video)?;
    series_from_errors(&video.id, &errs, video.len(), video.labels().map(<[u8]>::to_vec), offset)
}

pub fn series_from_errors(id: &str, errs: &WindowErrors, len: usize, labels: Option<Vec<u8>>, offset: usize) -> Result<ScoreSeries> {
    let p = errs.psnr.first().map_or(0, Vec::len);
    if offset >= p {
        return Err(Error::InvalidArgument(format!(
            "accumulation offset {offset} must be below the prediction length {p}"
        )));
    }
    let per_window: Vec<f64> = errs.psnr.iter().map(|w| w[offset]).collect();
    ScoreSeries::from_psnr(id, pad_to_frames(&errs.starts, &per_window, len), labels)
}

/// Squared-error map `(x − clamp(x̂))²` for one frame.
pub fn error_map(truth: &Frame, predicted: &Frame) -> Result<Frame> {
    truth.zip_map(predicted, "error_map", |a: f32, b: f32| (a - b.clamp(0.0, 1.0)).powi(2))
}
