//! Frame-level evaluation and artifact export.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::data::{save_frame_png, VideoSequence};
use crate::error::{Error, Result};
use crate::generator::Generator;
use crate::numerics::ParamStore;
use crate::scoring::{error_map, predict_windows, ScoreSeries};

/// ROC AUC via the Mann–Whitney rank statistic; tied pairs count ½.
pub fn frame_level_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidArgument(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let positives = labels.iter().filter(|&&l| l == 1).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass);
    }
    // average ranks over tie groups, ranks starting at 1
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum_pos += avg_rank * order[i..=j].iter().filter(|&&k| labels[k] == 1).count() as f64;
        i = j + 1;
    }
    let (p, n) = (positives as f64, negatives as f64);
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n))
}

/// Mean PSNR of normal frames minus mean PSNR of abnormal frames.
pub fn delta_p(psnr: &[f64], labels: &[u8]) -> Result<f64> {
    if psnr.len() != labels.len() {
        return Err(Error::InvalidArgument(format!("{} scores for {} labels", psnr.len(), labels.len())));
    }
    let mean_of = |class: u8| {
        let v: Vec<f64> = psnr.iter().zip(labels).filter(|(_, &l)| l == class).map(|(&s, _)| s).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    match (mean_of(0), mean_of(1)) {
        (Some(normal), Some(abnormal)) => Ok(normal - abnormal),
        _ => Err(Error::SingleClass),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoAuc {
    pub video_id: String,
    /// `None` when the video holds a single class.
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub per_video: Vec<VideoAuc>,
    /// AUC over all frames pooled after per-video normalization.
    pub micro_auc: f64,
    /// Mean of the defined per-video AUCs.
    pub macro_auc: Option<f64>,
    pub delta_p: f64,
    pub normal_frames: usize,
    pub abnormal_frames: usize,
    pub accumulation_offset: usize,
    /// `key = value` lines describing the run.
    pub config_echo: String,
}

/// Pools labelled series into one report.
pub fn evaluate(series: &[ScoreSeries], accumulation_offset: usize, config_echo: &str) -> Result<EvaluationReport> {
    let mut scores = Vec::new();
    let mut psnr = Vec::new();
    let mut labels = Vec::new();
    let mut per_video = Vec::with_capacity(series.len());
    for s in series {
        let l = s
            .labels
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument(format!("video `{}` has no labels", s.video_id)))?;
        per_video.push(VideoAuc {
            video_id: s.video_id.clone(),
            auc: frame_level_auc(&s.anomaly, l).ok(),
        });
        scores.extend_from_slice(&s.anomaly);
        psnr.extend_from_slice(&s.psnr);
        labels.extend_from_slice(l);
    }
    let defined: Vec<f64> = per_video.iter().filter_map(|v| v.auc).collect();
    let abnormal = labels.iter().filter(|&&l| l == 1).count();
    Ok(EvaluationReport {
        micro_auc: frame_level_auc(&scores, &labels)?,
        macro_auc: (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64),
        delta_p: delta_p(&psnr, &labels)?,
        normal_frames: labels.len() - abnormal,
        abnormal_frames: abnormal,
        per_video,
        accumulation_offset,
        config_echo: config_echo.to_string(),
    })
}

impl EvaluationReport {
    pub fn to_kv_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "auc = {:?}", self.micro_auc);
        match self.macro_auc {
            Some(m) => writeln!(s, "macro_auc = {m:?}"),
            None => writeln!(s, "macro_auc = nan"),
        }
        .ok();
        let _ = writeln!(s, "delta_p = {:?}", self.delta_p);
        let _ = writeln!(s, "normal_frames = {}", self.normal_frames);
        let _ = writeln!(s, "abnormal_frames = {}", self.abnormal_frames);
        let _ = writeln!(s, "accumulation_offset = {}", self.accumulation_offset);
        for v in &self.per_video {
            match v.auc {
                Some(a) => writeln!(s, "auc.{} = {a:?}", v.video_id),
                None => writeln!(s, "auc.{} = nan", v.video_id),
            }
            .ok();
        }
        for line in self.config_echo.lines().filter(|l| !l.trim().is_empty()) {
            let _ = writeln!(s, "config.{}", line.trim());
        }
        s
    }
}

/// Writes `scores/<video>.csv`, `report.txt` and, for every `map_every`-th
/// window of each video (0 disables), the per-pixel squared-error maps
/// `error_maps/<video>/t<start>_k<offset>.png`.
pub fn export_artifacts(
    out_dir: &Path,
    series: &[ScoreSeries],
    report: &EvaluationReport,
    maps: Option<(&Generator, &ParamStore<f32>, &[VideoSequence], usize)>,
) -> Result<()> {
    let scores_dir = out_dir.join("scores");
    fs::create_dir_all(&scores_dir)?;
    for s in series {
        s.save_csv(&scores_dir.join(format!("{}.csv", s.video_id)))?;
    }
    fs::write(out_dir.join("report.txt"), report.to_kv_text())?;
    let Some((gen, store, videos, every)) = maps else {
        return Ok(());
    };
    if every == 0 {
        return Ok(());
    }
    let spec = crate::data::WindowSpec::new(gen.config.context_len, gen.config.prediction_len)?;
    for v in videos {
        let dir = out_dir.join("error_maps").join(&v.id);
        fs::create_dir_all(&dir)?;
        let windows: Vec<_> = crate::data::iter_windows(v, spec).step_by(every).collect();
        let preds = predict_windows(gen, store, &windows)?;
        for (w, frames) in windows.iter().zip(&preds) {
            for (k, (truth, pred)) in w.target().iter().zip(frames).enumerate() {
                let map = error_map(truth, pred)?;
                save_frame_png(&map, &dir.join(format!("t{:05}_k{k}.png", w.start)))?;
            }
        }
    }
    Ok(())
}
