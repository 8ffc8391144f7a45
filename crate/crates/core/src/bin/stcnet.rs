use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use stcnet::config::KeyValues;
use stcnet::data::{load_video_dir, save_video_dir, SyntheticBenchmark, VideoSequence};
use stcnet::generator::GeneratorConfig;
use stcnet::harness::{evaluate, export_artifacts};
use stcnet::pipeline::{ablation_table, all_window_errors, evaluate_at_offset, run_ablation, series_at_offset, RunConfig};
use stcnet::scoring::ScoreSeries;
use stcnet::training::{load_checkpoint, save_checkpoint, training_log_csv, Trainer};
use stcnet::Error;

#[derive(Parser)]
#[command(name = "stcnet", version, about = "Frame-prediction video anomaly detector")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic benchmark as PNG frame directories.
    Synth(Common),
    /// Train a model on `--data` or on a freshly generated synthetic benchmark.
    Train(TrainArgs),
    /// Score test videos with a trained checkpoint.
    Score(ScoreArgs),
    /// Recompute the evaluation report from exported score CSVs.
    Eval(EvalArgs),
    /// Train and score the ablation variants on a synthetic benchmark.
    Ablate(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `seed` for both data generation and training.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    no_gan: bool,
    #[arg(long)]
    no_bidirectional: bool,
    #[arg(long)]
    accumulation_offset: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// Dataset root holding `train/<video>/` frame directories.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Resume from this checkpoint instead of starting fresh.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Overrides the iteration budget.
    #[arg(long)]
    iterations: Option<usize>,
}

#[derive(Args)]
struct ScoreArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Dataset root holding `test/<video>/` frame directories.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Export error maps for every n-th window (0 disables).
    #[arg(long, default_value_t = 10)]
    map_every: usize,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    /// Directory of score CSVs; defaults to `<out>/scores`.
    #[arg(long)]
    scores: Option<PathBuf>,
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::ShapeMismatch { .. } => "shape_mismatch",
        Error::InvalidArgument(_) => "invalid_argument",
        Error::NonFiniteGradient(_) => "non_finite_gradient",
        Error::NonFiniteLoss { .. } => "non_finite_loss",
        Error::VideoTooShort { .. } => "video_too_short",
        Error::SingleClass => "single_class",
        Error::Checkpoint(_) => "checkpoint",
        Error::Config { .. } => "config",
        Error::Image { .. } => "image",
        Error::Io(_) => "io",
    }
}

fn one_line(message: &str) -> String {
    message.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn load_config(c: &Common) -> stcnet::Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(path) => RunConfig::from_kv(&KeyValues::load(path)?)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = c.seed {
        cfg.set_seed(seed);
    }
    if c.no_gan {
        cfg.train.adversarial = false;
    }
    if c.no_bidirectional {
        cfg.train.generator.bidirectional = false;
    }
    if let Some(d) = c.accumulation_offset {
        cfg.accumulation_offset = d;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_split(root: &Path, split: &str, g: &GeneratorConfig) -> stcnet::Result<Vec<VideoSequence>> {
    let dir = root.join(split);
    let mut dirs: Vec<PathBuf> = fs::read_dir(&dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::InvalidArgument(format!("no video directories under {}", dir.display())));
    }
    dirs.iter().map(|d| load_video_dir(d, g.frame_size, g.frame_channels)).collect()
}

fn synth(c: &Common) -> stcnet::Result<()> {
    let cfg = load_config(c)?;
    let bench = SyntheticBenchmark::generate(&cfg.bench)?;
    for (split, videos) in [("train", &bench.train), ("test", &bench.test)] {
        for v in videos {
            save_video_dir(v, &c.out.join(split).join(&v.id))?;
        }
    }
    println!("wrote {} train and {} test videos to {}", bench.train.len(), bench.test.len(), c.out.display());
    Ok(())
}

fn train(a: &TrainArgs) -> stcnet::Result<()> {
    let cfg = load_config(&a.common)?;
    let mut trainer = match &a.checkpoint {
        Some(path) => load_checkpoint(path)?,
        None => Trainer::new(cfg.train.clone())?,
    };
    let videos = match &a.data {
        Some(root) => load_split(root, "train", &trainer.config.generator)?,
        None => SyntheticBenchmark::generate(&cfg.bench)?.train,
    };
    if let Some(n) = a.iterations {
        trainer.config.iterations = n;
    }
    let first = trainer.iteration;
    let total = trainer.config.iterations;
    let trace = trainer.train(&videos, |i, b| {
        if i % 100 == 0 || i == total {
            eprintln!("iteration {i}/{total} L_G={:.5} L_D={:.5}", b.total_g, b.total_d);
        }
    })?;
    fs::create_dir_all(&a.common.out)?;
    fs::write(a.common.out.join("training_log.csv"), training_log_csv(&trace, first + 1))?;
    fs::write(a.common.out.join("config.txt"), trainer.config.to_kv_text())?;
    let path = a.common.out.join("checkpoint.bin");
    save_checkpoint(&trainer, &path)?;
    println!("checkpoint {} after {} iterations", path.display(), trainer.iteration);
    Ok(())
}

fn score(a: &ScoreArgs) -> stcnet::Result<()> {
    let cfg = load_config(&a.common)?;
    let trainer = load_checkpoint(&a.checkpoint)?;
    let videos = match &a.data {
        Some(root) => load_split(root, "test", &trainer.config.generator)?,
        None => SyntheticBenchmark::generate(&cfg.bench)?.test,
    };
    let errors = all_window_errors(&trainer, &videos)?;
    let d = cfg.accumulation_offset;
    let mut echo = trainer.config.to_kv_text();
    echo.push_str(&format!("accumulation_offset = {d}\n"));
    let out = &a.common.out;
    let maps = Some((&trainer.generator, &trainer.gen_store, videos.as_slice(), a.map_every));
    if videos.iter().all(|v| v.labels().is_some()) {
        let (series, report) = evaluate_at_offset(&videos, &errors, d, &echo)?;
        export_artifacts(out, &series, &report, maps)?;
        print!("{}", report.to_kv_text());
    } else {
        let series = series_at_offset(&videos, &errors, d)?;
        let dir = out.join("scores");
        fs::create_dir_all(&dir)?;
        for s in &series {
            s.save_csv(&dir.join(format!("{}.csv", s.video_id)))?;
        }
        println!("scored {} unlabelled videos into {}", series.len(), dir.display());
    }
    Ok(())
}

fn eval(a: &EvalArgs) -> stcnet::Result<()> {
    let cfg = load_config(&a.common)?;
    let dir = a.scores.clone().unwrap_or_else(|| a.common.out.join("scores"));
    let mut files: Vec<PathBuf> = fs::read_dir(&dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::InvalidArgument(format!("no score CSVs in {}", dir.display())));
    }
    let series = files
        .iter()
        .map(|p| {
            let id = p.file_stem().and_then(|s| s.to_str()).unwrap_or("video");
            ScoreSeries::from_csv(id, &fs::read_to_string(p)?)
        })
        .collect::<stcnet::Result<Vec<_>>>()?;
    let report = evaluate(&series, cfg.accumulation_offset, &cfg.to_kv_text())?;
    fs::create_dir_all(&a.common.out)?;
    fs::write(a.common.out.join("report.txt"), report.to_kv_text())?;
    print!("{}", report.to_kv_text());
    Ok(())
}

fn ablate(c: &Common) -> stcnet::Result<()> {
    let cfg = load_config(c)?;
    let bench = SyntheticBenchmark::generate(&cfg.bench)?;
    let rows = run_ablation(&cfg, &bench, |v| eprintln!("training {v}"))?;
    let table = ablation_table(&rows);
    fs::create_dir_all(&c.out)?;
    fs::write(c.out.join("ablation.csv"), &table)?;
    print!("{table}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error kind=usage message={}", one_line(first));
            return ExitCode::from(2);
        }
    };
    let result = match &cli.command {
        Command::Synth(c) => synth(c),
        Command::Train(a) => train(a),
        Command::Score(a) => score(a),
        Command::Eval(a) => eval(a),
        Command::Ablate(c) => ablate(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error kind={} message={}", error_kind(&e), one_line(&e.to_string()));
            ExitCode::FAILURE
        }
    }
}
