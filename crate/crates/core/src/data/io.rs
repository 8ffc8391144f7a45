use std::fs;
use std::path::{Path, PathBuf};

use image::imageops::FilterType;
use image::{DynamicImage, GrayImage, RgbImage};

use super::video::{Frame, VideoSequence};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

const IMAGE_EXTENSIONS: &[&str] = &["png", "pgm", "pnm", "ppm"];

/// Name of the per-frame label file inside a video directory.
pub const LABEL_FILE: &str = "labels.txt";

fn image_err(path: &Path, message: impl ToString) -> Error {
    Error::Image {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

fn image_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    files.sort();
    Ok(files)
}

/// Decodes every image in `dir` (lexicographic order), resizes it bilinearly
/// to `size = (height, width)` and scales intensities to `[0, 1]`.
///
/// `channels` selects grayscale (1) or RGB (3) decoding.
pub fn load_frame_dir(dir: &Path, size: (usize, usize), channels: usize) -> Result<VideoSequence> {
    if channels != 1 && channels != 3 {
        return Err(Error::InvalidArgument(format!("channels must be 1 or 3, got {channels}")));
    }
    let files = image_files(dir)?;
    if files.is_empty() {
        return Err(image_err(dir, "no image files found"));
    }
    let (h, w) = size;
    let mut frames = Vec::with_capacity(files.len());
    for path in &files {
        let img = image::open(path).map_err(|e| image_err(path, e))?;
        let img = img.resize_exact(w as u32, h as u32, FilterType::Triangle);
        let raw: Vec<u8> = match channels {
            1 => img.to_luma8().into_raw(),
            _ => img.to_rgb8().into_raw(),
        };
        if raw.len() != h * w * channels {
            return Err(image_err(path, format!("decoded {} values, expected {}", raw.len(), h * w * channels)));
        }
        // interleaved HWC -> planar CHW
        let mut data = vec![0f32; raw.len()];
        for (i, &v) in raw.iter().enumerate() {
            let (pix, c) = (i / channels, i % channels);
            data[c * h * w + pix] = v as f32 / 255.0;
        }
        frames.push(Tensor::from_vec(&[channels, h, w], data)?);
    }
    let id = dir.file_name().and_then(|n| n.to_str()).unwrap_or("video").to_string();
    VideoSequence::new(id, frames, None)
}

/// One `0`/`1` label per line.
pub fn load_labels(path: &Path) -> Result<Vec<u8>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, l)| match l {
            "0" => Ok(0),
            "1" => Ok(1),
            other => Err(Error::InvalidArgument(format!(
                "{}: line {}: label must be 0 or 1, got `{other}`",
                path.display(),
                i + 1
            ))),
        })
        .collect()
}

/// Loads a frame directory and its `labels.txt`, if present.
pub fn load_video_dir(dir: &Path, size: (usize, usize), channels: usize) -> Result<VideoSequence> {
    let video = load_frame_dir(dir, size, channels)?;
    let label_path = dir.join(LABEL_FILE);
    if label_path.exists() {
        let labels = load_labels(&label_path)?;
        let id = video.id.clone();
        return VideoSequence::new(id, video.frames().to_vec(), Some(labels));
    }
    Ok(video)
}

/// Writes a `[1, H, W]` or `[3, H, W]` frame as an 8-bit PNG, clamping to `[0, 1]`.
pub fn save_frame_png(frame: &Frame, path: &Path) -> Result<()> {
    let s = frame.shape();
    let (c, h, w) = (s[0], s[1], s[2]);
    let quant = |v: f32| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    let img = match c {
        1 => DynamicImage::ImageLuma8(
            GrayImage::from_raw(w as u32, h as u32, frame.data().iter().map(|&v| quant(v)).collect())
                .ok_or_else(|| image_err(path, "buffer size"))?,
        ),
        3 => {
            let mut raw = vec![0u8; h * w * 3];
            for ch in 0..3 {
                for p in 0..h * w {
                    raw[p * 3 + ch] = quant(frame.data()[ch * h * w + p]);
                }
            }
            DynamicImage::ImageRgb8(RgbImage::from_raw(w as u32, h as u32, raw).ok_or_else(|| image_err(path, "buffer size"))?)
        }
        _ => return Err(image_err(path, format!("cannot encode {c}-channel frame"))),
    };
    img.save(path).map_err(|e| image_err(path, e))
}

/// Writes `frame_00000.png, …` and `labels.txt` (when labelled) into `dir`.
pub fn save_video_dir(video: &VideoSequence, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (i, f) in video.frames().iter().enumerate() {
        save_frame_png(f, &dir.join(format!("frame_{i:05}.png")))?;
    }
    if let Some(labels) = video.labels() {
        let text: String = labels.iter().map(|l| format!("{l}\n")).collect();
        fs::write(dir.join(LABEL_FILE), text)?;
    }
    Ok(())
}
