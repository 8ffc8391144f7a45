//! Frame ingestion, window extraction and the synthetic benchmark.

mod io;
mod synth;
mod video;
mod windows;

pub use io::{load_frame_dir, load_labels, load_video_dir, save_frame_png, save_video_dir};
pub use synth::{synth_generate, AnomalyKind, ShapeKind, SyntheticBenchmark, SyntheticBenchmarkConfig, SyntheticSceneConfig};
pub use video::{batch_frames, Frame, VideoSequence};
pub use windows::{iter_windows, stack_window_frames, PredictionWindow, WindowSpec};
