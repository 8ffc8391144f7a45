//! Python bindings: synthetic data, training, scoring and the evaluation metrics.

use std::collections::HashMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use stcnet::data::{SyntheticBenchmark, VideoSequence};
use stcnet::harness;
use stcnet::pipeline::RunConfig;
use stcnet::scoring;
use stcnet::training::{load_checkpoint, save_checkpoint, Trainer};

fn to_py(e: stcnet::Error) -> PyErr {
    match e {
        stcnet::Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn run_config(config: &str, seed: Option<u64>) -> PyResult<RunConfig> {
    let mut cfg = RunConfig::parse(config).map_err(to_py)?;
    if let Some(s) = seed {
        cfg.set_seed(s);
    }
    Ok(cfg)
}

/// A grayscale or RGB video with optional per-frame labels.
#[pyclass(name = "Video", frozen, from_py_object)]
#[derive(Clone)]
struct PyVideo {
    inner: VideoSequence,
}

#[pymethods]
impl PyVideo {
    /// `frames` holds flattened `[C, H, W]` frames with values in `[0, 1]`.
    #[new]
    #[pyo3(signature = (id, frames, shape, labels=None))]
    fn new(id: String, frames: Vec<Vec<f32>>, shape: (usize, usize, usize), labels: Option<Vec<u8>>) -> PyResult<Self> {
        let (c, h, w) = shape;
        let frames = frames
            .into_iter()
            .map(|f| stcnet::numerics::Tensor::from_vec(&[c, h, w], f))
            .collect::<stcnet::Result<Vec<_>>>()
            .map_err(to_py)?;
        let inner = VideoSequence::new(id, frames, labels).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn id(&self) -> String {
        self.inner.id.clone()
    }

    #[getter]
    fn labels(&self) -> Option<Vec<u8>> {
        self.inner.labels().map(<[u8]>::to_vec)
    }

    #[getter]
    fn shape(&self) -> (usize, usize, usize) {
        let s = self.inner.frame_shape();
        (s[0], s[1], s[2])
    }

    fn frame(&self, index: usize) -> PyResult<Vec<f32>> {
        self.inner
            .frames()
            .get(index)
            .map(|f| f.data().to_vec())
            .ok_or_else(|| PyValueError::new_err(format!("frame {index} out of range")))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Generates `(train, test)` video lists from `key = value` config text.
#[pyfunction]
#[pyo3(signature = (config="", seed=None))]
fn synthetic_benchmark(config: &str, seed: Option<u64>) -> PyResult<(Vec<PyVideo>, Vec<PyVideo>)> {
    let cfg = run_config(config, seed)?;
    let bench = SyntheticBenchmark::generate(&cfg.bench).map_err(to_py)?;
    let wrap = |v: Vec<VideoSequence>| v.into_iter().map(|inner| PyVideo { inner }).collect();
    Ok((wrap(bench.train), wrap(bench.test)))
}

/// Generator, optional discriminator and optimizer state.
#[pyclass(name = "Model")]
struct PyModel {
    trainer: Trainer,
    accumulation_offset: usize,
}

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (config="", seed=None))]
    fn new(config: &str, seed: Option<u64>) -> PyResult<Self> {
        let cfg = run_config(config, seed)?;
        Ok(Self {
            trainer: Trainer::new(cfg.train).map_err(to_py)?,
            accumulation_offset: cfg.accumulation_offset,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (path, accumulation_offset=stcnet::pipeline::DEFAULT_ACCUMULATION_OFFSET))]
    fn load(path: PathBuf, accumulation_offset: usize) -> PyResult<Self> {
        Ok(Self {
            trainer: load_checkpoint(&path).map_err(to_py)?,
            accumulation_offset,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_checkpoint(&self.trainer, &path).map_err(to_py)
    }

    #[getter]
    fn iteration(&self) -> usize {
        self.trainer.iteration
    }

    #[getter]
    fn config(&self) -> String {
        self.trainer.config.to_kv_text()
    }

    /// Trains `iterations` more steps (default: up to the configured budget)
    /// and returns one loss dict per step.
    #[pyo3(signature = (videos, iterations=None))]
    fn train(&mut self, py: Python<'_>, videos: Vec<PyVideo>, iterations: Option<usize>) -> PyResult<Vec<HashMap<String, f64>>> {
        if let Some(n) = iterations {
            self.trainer.config.iterations = self.trainer.iteration + n;
        }
        let videos: Vec<VideoSequence> = videos.into_iter().map(|v| v.inner).collect();
        let trainer = &mut self.trainer;
        let trace = py.detach(|| trainer.train(&videos, |_, _| {})).map_err(to_py)?;
        Ok(trace
            .iter()
            .map(|b| {
                HashMap::from([
                    ("L_int".to_string(), b.intensity),
                    ("L_gd".to_string(), b.gradient),
                    ("L_adv_g".to_string(), b.adversarial_g),
                    ("L_dec".to_string(), b.decouple),
                    ("L_G".to_string(), b.total_g),
                    ("L_D".to_string(), b.total_d),
                ])
            })
            .collect())
    }

    /// Per-frame `psnr`, `regular` and `anomaly` series for one video.
    #[pyo3(signature = (video, accumulation_offset=None))]
    fn score(&self, video: &PyVideo, accumulation_offset: Option<usize>) -> PyResult<HashMap<String, Vec<f64>>> {
        let d = accumulation_offset.unwrap_or(self.accumulation_offset);
        let s = scoring::accumulated_regular_score(&self.trainer.generator, &self.trainer.gen_store, &video.inner, d)
            .map_err(to_py)?;
        Ok(HashMap::from([
            ("psnr".to_string(), s.psnr),
            ("regular".to_string(), s.regular),
            ("anomaly".to_string(), s.anomaly),
        ]))
    }
}

#[pyfunction]
fn psnr(truth: Vec<f32>, predicted: Vec<f32>) -> PyResult<f64> {
    scoring::psnr(&truth, &predicted).map_err(to_py)
}

#[pyfunction]
fn normalize_scores(series: Vec<f64>) -> PyResult<Vec<f64>> {
    scoring::normalize_scores(&series).map_err(to_py)
}

#[pyfunction]
fn frame_level_auc(scores: Vec<f64>, labels: Vec<u8>) -> PyResult<f64> {
    harness::frame_level_auc(&scores, &labels).map_err(to_py)
}

#[pyfunction]
fn delta_p(psnr: Vec<f64>, labels: Vec<u8>) -> PyResult<f64> {
    harness::delta_p(&psnr, &labels).map_err(to_py)
}

#[pymodule]
pub fn stcnet_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyVideo>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(synthetic_benchmark, m)?)?;
    m.add_function(wrap_pyfunction!(psnr, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_scores, m)?)?;
    m.add_function(wrap_pyfunction!(frame_level_auc, m)?)?;
    m.add_function(wrap_pyfunction!(delta_p, m)?)?;
    Ok(())
}
