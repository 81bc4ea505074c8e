//! Command line front end.
//!
//! Exit codes: 0 on success, 1 with `error: <category>: <message>` on stderr
//! when a run fails, 2 with usage text for malformed command lines.

use std::ffi::OsString;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use lrvp_core::eval::{copy_last_baseline, evaluate, refine_study, sample_seed, Protocol};
use lrvp_core::exec::Executor;
use lrvp_core::synth::{gen_sequence, BlobSceneSpec};
use lrvp_core::training::Trainer;
use lrvp_core::video::VideoTensor;
use serde::Serialize;

use crate::checkpoint::{Checkpoint, CheckpointMeta, TrainMeta};
use crate::config::{
    require_path, resolve, EvaluateConfig, FetchConfig, GenerateConfig, InspectConfig, PenaltyKind, PreprocessConfig, RefineConfig, Resolved,
    SynthConfig, TrainRunConfig,
};
use crate::error::{config_err, format_err, io_err, Result};
use crate::fetch::{check_report, fetch, FetchOptions};
use crate::lrvv::{read_video, write_video, VideoFile};
use crate::pipeline::{preprocess_dir, PreprocessOptions};
use crate::report::{panel, write_evaluation, write_pgm, write_refine, MetricsLog};
use crate::threads::Threads;

#[derive(Debug, Parser)]
#[command(name = "lrvp", version, about = "Latent residual video prediction: data preparation, training and evaluation")]
pub struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    /// Convert slice bundles into packed multi-band videos.
    Preprocess(PreprocessArgs),
    /// Download slice bundles for a day and hour window into a local cache.
    Fetch(FetchArgs),
    /// Generate synthetic moving-blob videos.
    Synth(SynthArgs),
    /// Train a model on a directory of videos.
    Train(TrainArgs),
    /// Sample forecasts from a checkpoint.
    Generate(GenerateArgs),
    /// Best-of-n evaluation against held-out videos.
    Evaluate(EvaluateArgs),
    /// Compare forecasts across Euler sub-step counts.
    Refine(RefineArgs),
    /// Print a checkpoint's header and parameter shapes.
    Inspect(InspectArgs),
}

fn pair<T: FromStr>(s: &str, sep: char) -> std::result::Result<[T; 2], String>
where
    T::Err: Display,
{
    let (a, b) = s.split_once(sep).ok_or_else(|| format!("expected A{sep}B, got {s}"))?;
    let parse = |x: &str| x.trim().parse::<T>().map_err(|e| format!("{x}: {e}"));
    Ok([parse(a)?, parse(b)?])
}

fn span_u32(s: &str) -> std::result::Result<[u32; 2], String> {
    pair(s, ':')
}

fn span_u8(s: &str) -> std::result::Result<[u8; 2], String> {
    pair(s, ':')
}

fn origin(s: &str) -> std::result::Result<[usize; 2], String> {
    pair(s, ',')
}

#[derive(Debug, Args, Serialize)]
pub struct PreprocessArgs {
    /// Settings file; flags override its values.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Directory of .gslc slice bundles.
    #[arg(long, alias = "cache")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Crop origin as ROW,COL.
    #[arg(long, value_parser = origin)]
    pub crop_origin: Option<[usize; 2]>,
    #[arg(long)]
    pub crop_size: Option<usize>,
    #[arg(long)]
    pub frames: Option<usize>,
    /// Inclusive band range FIRST:LAST.
    #[arg(long, value_parser = span_u8)]
    pub bands: Option<[u8; 2]>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub compress: Option<bool>,
}

#[derive(Debug, Args, Serialize)]
pub struct FetchArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// URL with {year}, {doy}, {hour}, {minute} and {band} placeholders.
    #[arg(long)]
    pub url_template: Option<String>,
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Directory for the fetch report.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub year: Option<u32>,
    /// Inclusive day-of-year range FIRST:LAST.
    #[arg(long, value_parser = span_u32)]
    pub days: Option<[u32; 2]>,
    /// UTC hour window START:END, end exclusive.
    #[arg(long, value_parser = span_u32)]
    pub hours: Option<[u32; 2]>,
    #[arg(long)]
    pub slices_per_hour: Option<u32>,
    #[arg(long, value_parser = span_u8)]
    pub bands: Option<[u8; 2]>,
    #[arg(long)]
    pub retries: Option<u32>,
    #[arg(long)]
    pub retry_delay_ms: Option<u64>,
    #[arg(long)]
    pub timeout_secs: Option<u64>,
    /// Report the manifest and cache state without downloading.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub dry_run: Option<bool>,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Number of videos; video i uses seed + i.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Frame height and width.
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long)]
    pub bands: Option<usize>,
    #[arg(long)]
    pub blobs: Option<usize>,
    #[arg(long)]
    pub radius: Option<f64>,
    /// Pixels per frame.
    #[arg(long)]
    pub speed: Option<f64>,
    /// Per-frame probability of a new random direction.
    #[arg(long)]
    pub p_turn: Option<f64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub compress: Option<bool>,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Directory of .lrvv training videos.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub beta1: Option<f64>,
    #[arg(long)]
    pub beta2: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// Weight of the residual penalty.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, value_enum)]
    pub penalty: Option<PenaltyKind>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Encoder stage widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub channels: Option<Vec<usize>>,
    #[arg(long)]
    pub enc_width: Option<usize>,
    #[arg(long)]
    pub d_y: Option<usize>,
    #[arg(long)]
    pub d_z: Option<usize>,
    #[arg(long)]
    pub d_w: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub lstm_width: Option<usize>,
    #[arg(long)]
    pub n_cond: Option<usize>,
    #[arg(long)]
    pub k_content: Option<usize>,
    #[arg(long)]
    pub substeps: Option<usize>,
    /// Steps between intermediate checkpoints; 0 keeps only the final one.
    #[arg(long)]
    pub checkpoint_every: Option<u64>,
    #[arg(long)]
    pub log_every: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub ckpt: Option<PathBuf>,
    /// Video whose first n_cond frames condition the forecasts.
    #[arg(long)]
    pub cond: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Euler steps per frame; 0 keeps the checkpoint's value.
    #[arg(long)]
    pub substeps: Option<usize>,
    /// Also write the frames decoded at every sub-step.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub dense: Option<bool>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub compress: Option<bool>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub ckpt: Option<PathBuf>,
    /// Directory of .lrvv test videos.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub substeps: Option<usize>,
    /// Predicted frames per video; 0 predicts all frames after the conditioning ones.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Sequences rendered as truth/forecast panels.
    #[arg(long)]
    pub panels: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct RefineArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub ckpt: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Sub-step counts, comma separated; deltas are relative to the first.
    #[arg(long, value_delimiter = ',')]
    pub substeps: Option<Vec<usize>>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub horizon: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct InspectArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Checkpoint file (also accepted as a positional argument).
    #[arg(long)]
    pub ckpt: Option<PathBuf>,
    #[arg(conflicts_with = "ckpt")]
    #[serde(skip)]
    pub path: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}: {}", e.category(), e.to_string().replace('\n', " "));
            1
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let w = cli.workers;
    match cli.command {
        Command::Preprocess(a) => run_preprocess(&resolve("preprocess", a.config.as_deref(), w, &a)?),
        Command::Fetch(a) => run_fetch(&resolve("fetch", a.config.as_deref(), w, &a)?),
        Command::Synth(a) => run_synth(&resolve("synth", a.config.as_deref(), w, &a)?),
        Command::Train(a) => run_train(&resolve("train", a.config.as_deref(), w, &a)?),
        Command::Generate(a) => run_generate(&resolve("generate", a.config.as_deref(), w, &a)?),
        Command::Evaluate(a) => run_evaluate(&resolve("evaluate", a.config.as_deref(), w, &a)?),
        Command::Refine(a) => run_refine(&resolve("refine", a.config.as_deref(), w, &a)?),
        Command::Inspect(mut a) => {
            if a.path.is_some() {
                a.ckpt = a.path.take();
            }
            run_inspect(&resolve("inspect", a.config.as_deref(), w, &a)?)
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Every `.lrvv` file in `dir`, sorted by file name.
pub fn load_videos(dir: &Path) -> Result<Vec<(PathBuf, VideoTensor)>> {
    let mut paths = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io_err(dir))? {
        let p = entry.map_err(io_err(dir))?.path();
        if p.extension().is_some_and(|e| e == "lrvv") {
            paths.push(p);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(config_err(format!("no .lrvv videos in {}", dir.display())));
    }
    paths
        .into_iter()
        .map(|p| {
            let v = read_video(&p)?;
            Ok((p, v))
        })
        .collect()
}

fn same_dims(videos: &[(PathBuf, VideoTensor)]) -> Result<[usize; 4]> {
    let dims = videos[0].1.dims();
    for (p, v) in videos {
        if v.dims() != dims {
            return Err(format_err(format!("{} has dims {:?}, expected {dims:?}", p.display(), v.dims())));
        }
    }
    Ok(dims)
}

fn run_synth(r: &Resolved<SynthConfig>) -> Result<()> {
    let c = &r.settings;
    require_path(&c.out, "out")?;
    let spec = BlobSceneSpec {
        height: c.size,
        width: c.size,
        bands: c.bands,
        blobs: c.blobs,
        radius: c.radius,
        speed: c.speed,
        p_turn: c.p_turn,
        frames: c.frames,
    };
    spec.validate()?;
    if c.n == 0 {
        return Err(config_err("n must be at least 1"));
    }
    create_dir(&c.out)?;
    r.write(&c.out)?;
    let exec = Threads::new(r.workers);
    let encoded = exec.map(c.n, |i| -> Result<Vec<u8>> {
        let v = gen_sequence(&spec, c.seed.wrapping_add(i as u64))?;
        VideoFile::from_video(&v, None)?.encode(c.compress)
    });
    for (i, bytes) in encoded.into_iter().enumerate() {
        let path = c.out.join(format!("seq_{i:04}.lrvv"));
        std::fs::write(&path, bytes?).map_err(io_err(&path))?;
    }
    log::info!("wrote {} videos to {}", c.n, c.out.display());
    Ok(())
}

fn run_preprocess(r: &Resolved<PreprocessConfig>) -> Result<()> {
    let c = &r.settings;
    require_path(&c.input, "input")?;
    require_path(&c.out, "out")?;
    let opts = PreprocessOptions {
        origin: (c.crop_origin[0], c.crop_origin[1]),
        size: c.crop_size,
        frames: c.frames,
        bands: c.band_list()?,
        compress: c.compress,
    };
    create_dir(&c.out)?;
    r.write(&c.out)?;
    let videos = preprocess_dir(&c.input, &c.out, &opts, &Threads::new(r.workers))?;
    let path = c.out.join("index.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["video", "frame", "timestamp", "nan_pixels", "degenerate_slices"])?;
    for v in &videos {
        let name = v.path.file_name().unwrap().to_string_lossy().to_string();
        for (t, ts) in v.timestamps.iter().enumerate() {
            w.write_record([name.clone(), t.to_string(), ts.to_string(), v.nan_pixels.to_string(), v.degenerate_slices.to_string()])?;
        }
    }
    w.flush().map_err(io_err(&path))?;
    log::info!("wrote {} videos to {}", videos.len(), c.out.display());
    Ok(())
}

fn run_fetch(r: &Resolved<FetchConfig>) -> Result<()> {
    let c = &r.settings;
    require_path(&c.cache, "cache")?;
    require_path(&c.out, "out")?;
    if c.url_template.is_empty() {
        return Err(config_err("missing required setting url_template"));
    }
    create_dir(&c.out)?;
    r.write(&c.out)?;
    let opts = FetchOptions {
        retries: c.retries,
        retry_delay: std::time::Duration::from_millis(c.retry_delay_ms),
        timeout: std::time::Duration::from_secs(c.timeout_secs),
        dry_run: c.dry_run,
    };
    let report = fetch(&c.window(), &c.url_template, &c.cache, &opts)?;
    report.write(&c.out)?;
    log::info!(
        "{} objects expected ({} per band), {} downloaded, {} failed",
        report.records.len(),
        report.expected_per_band,
        report.downloaded(),
        report.failed()
    );
    check_report(&report)
}

fn checkpoint_meta(trainer: &Trainer<'_>) -> CheckpointMeta {
    let tc = trainer.config();
    CheckpointMeta {
        step: trainer.steps_done(),
        model: (&tc.model).into(),
        train: TrainMeta {
            seed: tc.seed,
            lambda: tc.lambda,
            lr: tc.adam.lr,
            beta1: tc.adam.beta1,
            beta2: tc.adam.beta2,
            eps: tc.adam.eps,
            batch_size: tc.batch_size,
            penalty: match tc.penalty {
                lrvp_core::training::Penalty::L2 => PenaltyKind::L2,
                lrvp_core::training::Penalty::SquaredL2 => PenaltyKind::SquaredL2,
            },
        },
    }
}

fn run_train(r: &Resolved<TrainRunConfig>) -> Result<()> {
    let c = &r.settings;
    require_path(&c.data, "data")?;
    require_path(&c.out, "out")?;
    let videos = load_videos(&c.data)?;
    let [_, b, h, w] = same_dims(&videos)?;
    let data: Vec<VideoTensor> = videos.into_iter().map(|(_, v)| v).collect();
    let tc = c.train_config([b, h, w]);
    let mut trainer = Trainer::new(tc, &data)?;
    create_dir(&c.out)?;
    r.write(&c.out)?;
    if c.checkpoint_every > 0 {
        create_dir(&c.out.join("checkpoints"))?;
    }
    let exec = Threads::new(r.workers);
    let mut log = MetricsLog::create(&c.out.join("metrics.csv"))?;
    log::info!("training on {} videos, {} parameters", data.len(), trainer.store().num_scalars());
    for _ in 0..c.steps {
        let m = trainer.step(&exec)?;
        log.push(&m)?;
        let done = trainer.steps_done();
        if c.log_every > 0 && done % c.log_every == 0 {
            log::info!("step {done}: total {:.3} recon {:.3} kl_y0 {:.3} kl_z {:.3}", m.loss.total, m.loss.recon, m.loss.kl_y0, m.loss.kl_z);
        }
        if c.checkpoint_every > 0 && done % c.checkpoint_every == 0 && done < c.steps {
            let path = c.out.join("checkpoints").join(format!("step_{done:06}.lrvp"));
            Checkpoint::from_store(&checkpoint_meta(&trainer), trainer.store())?.write(&path)?;
        }
    }
    log.close()?;
    Checkpoint::from_store(&checkpoint_meta(&trainer), trainer.store())?.write(&c.out.join("checkpoint.lrvp"))?;
    log::info!("wrote {}", c.out.join("checkpoint.lrvp").display());
    Ok(())
}

fn load_checkpoint(path: &Path) -> Result<(lrvp_core::dynamics::Model, lrvp_core::diff::ParamStore)> {
    require_path(path, "ckpt")?;
    let (model, store, _) = Checkpoint::read(path)?.load_model()?;
    Ok((model, store))
}

fn check_frames(model: &lrvp_core::dynamics::Model, path: &Path, v: &VideoTensor) -> Result<()> {
    if v.frame_dims() != model.cfg.frame_dims() {
        return Err(format_err(format!(
            "{} has frames {:?}, the checkpoint expects {:?}",
            path.display(),
            v.frame_dims(),
            model.cfg.frame_dims()
        )));
    }
    Ok(())
}

fn run_generate(r: &Resolved<GenerateConfig>) -> Result<()> {
    let c = &r.settings;
    require_path(&c.cond, "cond")?;
    require_path(&c.out, "out")?;
    if c.horizon == 0 || c.samples == 0 {
        return Err(config_err("horizon and samples must be at least 1"));
    }
    let (model, store) = load_checkpoint(&c.ckpt)?;
    let video = read_video(&c.cond)?;
    check_frames(&model, &c.cond, &video)?;
    let n_cond = model.cfg.n_cond;
    if video.len() < n_cond {
        return Err(format_err(format!("{} has {} frames, {n_cond} needed for conditioning", c.cond.display(), video.len())));
    }
    let substeps = if c.substeps == 0 { model.cfg.substeps } else { c.substeps };
    create_dir(&c.out)?;
    r.write(&c.out)?;
    let ctx = model.condition(&store, &video.frames(0, n_cond)?)?;
    let exec = Threads::new(r.workers);
    let outputs = exec.map(c.samples, |s| -> Result<(VideoTensor, Option<VideoTensor>)> {
        let g = model.sample_future(&store, &ctx, c.horizon, substeps, sample_seed(c.seed, 0, s))?;
        let dense = if c.dense { Some(model.decode_dense(&store, &g.trajectory, &g.content)?) } else { None };
        Ok((g.frames, dense))
    });
    let path = c.out.join("manifest.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["sample", "seed", "file", "frames", "dense_file", "dense_frames"])?;
    for (s, out) in outputs.into_iter().enumerate() {
        let (frames, dense) = out?;
        let name = format!("pred_{s:03}.lrvv");
        write_video(&c.out.join(&name), &frames, c.compress)?;
        let (dense_name, dense_len) = match dense {
            Some(d) => {
                let n = format!("dense_{s:03}.lrvv");
                write_video(&c.out.join(&n), &d, c.compress)?;
                (n, d.len().to_string())
            }
            None => (String::new(), String::new()),
        };
        w.write_record([s.to_string(), sample_seed(c.seed, 0, s).to_string(), name, frames.len().to_string(), dense_name, dense_len])?;
    }
    w.flush().map_err(io_err(&path))?;
    log::info!("wrote {} forecasts to {}", c.samples, c.out.display());
    Ok(())
}

/// Test videos cut to `n_cond + horizon` frames (all frames when `horizon` is 0).
fn eval_sequences(model: &lrvp_core::dynamics::Model, dir: &Path, horizon: usize) -> Result<Vec<VideoTensor>> {
    let videos = load_videos(dir)?;
    let n_cond = model.cfg.n_cond;
    videos
        .into_iter()
        .map(|(p, v)| {
            check_frames(model, &p, &v)?;
            let len = if horizon == 0 { v.len() } else { n_cond + horizon };
            if v.len() < len || len <= n_cond {
                return Err(format_err(format!("{} has {} frames; {n_cond} conditioning plus at least one predicted frame needed", p.display(), v.len())));
            }
            Ok(v.frames(0, len)?)
        })
        .collect()
}

fn run_evaluate(r: &Resolved<EvaluateConfig>) -> Result<()> {
    let c = &r.settings;
    require_path(&c.data, "data")?;
    require_path(&c.out, "out")?;
    let (model, store) = load_checkpoint(&c.ckpt)?;
    let seqs = eval_sequences(&model, &c.data, c.horizon)?;
    let n_cond = model.cfg.n_cond;
    let substeps = if c.substeps == 0 { model.cfg.substeps } else { c.substeps };
    create_dir(&c.out)?;
    r.write(&c.out)?;
    let exec = Threads::new(r.workers);
    let proto = Protocol { samples: c.samples, substeps, seed: c.seed };
    let report = evaluate(&model, &store, &seqs, &proto, &exec)?;
    let baseline = seqs.iter().map(|s| copy_last_baseline(s, n_cond)).collect::<lrvp_core::Result<Vec<_>>>()?;
    write_evaluation(&c.out, &report, &baseline, n_cond)?;
    if c.panels > 0 {
        let dir = c.out.join("panels");
        create_dir(&dir)?;
        for (i, seq) in seqs.iter().enumerate().take(c.panels) {
            let best = report.sequences[i].best_psnr_sample;
            let g = model.generate(&store, &seq.frames(0, n_cond)?, report.horizon, substeps, sample_seed(c.seed, i, best))?;
            let truth = seq.frames(n_cond, seq.len())?;
            let (w, h, px) = panel(&[&truth, &g.frames])?;
            write_pgm(&dir.join(format!("seq_{i:04}.pgm")), w, h, &px)?;
        }
    }
    let agg = report.aggregate();
    let base = baseline.iter().map(|b| b.mean_psnr()).sum::<f64>() / baseline.len() as f64;
    println!(
        "best-of-{} PSNR {:.3} SSIM {:.4} over {} sequences (copy-last PSNR {:.3})",
        c.samples,
        agg.mean_best_psnr,
        agg.mean_best_ssim,
        seqs.len(),
        base
    );
    Ok(())
}

fn run_refine(r: &Resolved<RefineConfig>) -> Result<()> {
    let c = &r.settings;
    require_path(&c.data, "data")?;
    require_path(&c.out, "out")?;
    let (model, store) = load_checkpoint(&c.ckpt)?;
    let seqs = eval_sequences(&model, &c.data, c.horizon)?;
    create_dir(&c.out)?;
    r.write(&c.out)?;
    let rows = refine_study(&model, &store, &seqs, &c.substeps, c.samples, c.seed, &Threads::new(r.workers))?;
    write_refine(&c.out.join("refine.csv"), &rows)?;
    for row in &rows {
        println!(
            "substeps {:>3}: PSNR {:.4} (delta {:+.4}) SSIM {:.5} (delta {:+.5}), {} frames, {} dense",
            row.substeps, row.mean_best_psnr, row.delta_psnr, row.mean_best_ssim, row.delta_ssim, row.frames, row.dense_frames
        );
    }
    Ok(())
}

fn run_inspect(r: &Resolved<InspectConfig>) -> Result<()> {
    let c = &r.settings;
    require_path(&c.ckpt, "ckpt")?;
    let ck = Checkpoint::read(&c.ckpt)?;
    ck.load_model()?;
    println!("format LRVP version {}", ck.version);
    println!("config:");
    for line in ck.config.lines() {
        println!("  {line}");
    }
    println!("parameters:");
    let mut total = 0;
    for p in &ck.params {
        println!("  {} {:?} {}", p.name, p.dims, p.values.len());
        total += p.values.len();
    }
    println!("total {} parameters in {} tensors", total, ck.params.len());
    Ok(())
}
