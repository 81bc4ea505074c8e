//! Run configuration.
//!
//! Each subcommand has a settings struct with defaults. A run resolves its
//! settings from defaults, then the optional `--config` file, then command-line
//! flags, and writes the result as `resolved_config.toml` next to its outputs:
//!
//! ```toml
//! command = "train"
//! workers = 1
//!
//! [train]
//! data = "data/train"
//! steps = 2000
//! ```
//!
//! Unknown keys are rejected at every level.

use std::path::{Path, PathBuf};

use lrvp_core::diff::Adam;
use lrvp_core::dynamics::ModelConfig;
use lrvp_core::goes;
use lrvp_core::training::{Penalty, TrainConfig};
use lrvp_core::synth::BlobSceneSpec;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, io_err, Result};

pub const RESOLVED_NAME: &str = "resolved_config.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyKind {
    #[default]
    L2,
    #[value(name = "squared_l2")]
    SquaredL2,
}

impl From<PenaltyKind> for Penalty {
    fn from(p: PenaltyKind) -> Self {
        match p {
            PenaltyKind::L2 => Penalty::L2,
            PenaltyKind::SquaredL2 => Penalty::SquaredL2,
        }
    }
}

/// Serializable mirror of [`ModelConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub bands: usize,
    pub height: usize,
    pub width: usize,
    pub channels: Vec<usize>,
    pub enc_width: usize,
    pub d_y: usize,
    pub d_z: usize,
    pub d_w: usize,
    pub hidden: usize,
    pub lstm_width: usize,
    pub n_cond: usize,
    pub k_content: usize,
    pub substeps: usize,
}

impl ModelSection {
    pub fn to_model_config(&self) -> ModelConfig {
        ModelConfig {
            bands: self.bands,
            height: self.height,
            width: self.width,
            channels: self.channels.clone(),
            enc_width: self.enc_width,
            d_y: self.d_y,
            d_z: self.d_z,
            d_w: self.d_w,
            hidden: self.hidden,
            lstm_width: self.lstm_width,
            n_cond: self.n_cond,
            k_content: self.k_content,
            substeps: self.substeps,
        }
    }
}

impl From<&ModelConfig> for ModelSection {
    fn from(c: &ModelConfig) -> Self {
        Self {
            bands: c.bands,
            height: c.height,
            width: c.width,
            channels: c.channels.clone(),
            enc_width: c.enc_width,
            d_y: c.d_y,
            d_z: c.d_z,
            d_w: c.d_w,
            hidden: c.hidden,
            lstm_width: c.lstm_width,
            n_cond: c.n_cond,
            k_content: c.k_content,
            substeps: c.substeps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub out: PathBuf,
    pub n: usize,
    pub seed: u64,
    pub size: usize,
    pub frames: usize,
    pub bands: usize,
    pub blobs: usize,
    pub radius: f64,
    pub speed: f64,
    pub p_turn: f64,
    pub compress: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let scene = BlobSceneSpec::default();
        Self {
            out: PathBuf::new(),
            n: 50,
            seed: 1,
            size: scene.height,
            frames: scene.frames,
            bands: scene.bands,
            blobs: scene.blobs,
            radius: scene.radius,
            speed: scene.speed,
            p_turn: scene.p_turn,
            compress: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    /// Directory of `.gslc` slice bundles.
    pub input: PathBuf,
    pub out: PathBuf,
    pub crop_origin: [usize; 2],
    pub crop_size: usize,
    pub frames: usize,
    /// Inclusive band range.
    pub bands: [u8; 2],
    pub compress: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            input: PathBuf::new(),
            out: PathBuf::new(),
            crop_origin: [goes::DEFAULT_CROP_ORIGIN.0, goes::DEFAULT_CROP_ORIGIN.1],
            crop_size: goes::CROP_SIZE,
            frames: goes::FRAMES_PER_VIDEO,
            bands: [goes::FIRST_BAND, goes::LAST_BAND],
            compress: false,
        }
    }
}

impl PreprocessConfig {
    pub fn band_list(&self) -> Result<Vec<u8>> {
        let [a, b] = self.bands;
        if a > b || a < goes::FIRST_BAND || b > goes::LAST_BAND {
            return Err(config_err(format!("bands {a}:{b} must lie within {}:{}", goes::FIRST_BAND, goes::LAST_BAND)));
        }
        Ok((a..=b).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FetchConfig {
    /// URL with `{year}`, `{doy}`, `{hour}`, `{minute}` and `{band}` placeholders.
    pub url_template: String,
    pub cache: PathBuf,
    /// Directory for the fetch report.
    pub out: PathBuf,
    pub year: u32,
    /// Inclusive day-of-year range.
    pub days: [u32; 2],
    /// UTC hours, end exclusive.
    pub hours: [u32; 2],
    pub slices_per_hour: u32,
    pub bands: [u8; 2],
    pub retries: u32,
    pub retry_delay_ms: u64,
    pub timeout_secs: u64,
    /// List the manifest and cache state without downloading.
    pub dry_run: bool,
}

impl Default for FetchConfig {
    fn default() -> Self {
        let w = goes::FetchWindow::default();
        Self {
            url_template: String::new(),
            cache: PathBuf::new(),
            out: PathBuf::new(),
            year: w.year,
            days: [w.first_day, w.last_day],
            hours: [w.start_hour, w.end_hour],
            slices_per_hour: w.slices_per_hour,
            bands: [goes::FIRST_BAND, goes::LAST_BAND],
            retries: 3,
            retry_delay_ms: 500,
            timeout_secs: 60,
            dry_run: false,
        }
    }
}

impl FetchConfig {
    pub fn window(&self) -> goes::FetchWindow {
        goes::FetchWindow {
            year: self.year,
            first_day: self.days[0],
            last_day: self.days[1],
            start_hour: self.hours[0],
            end_hour: self.hours[1],
            slices_per_hour: self.slices_per_hour,
            bands: (self.bands[0]..=self.bands[1]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainRunConfig {
    /// Directory of `.lrvv` training videos.
    pub data: PathBuf,
    pub out: PathBuf,
    pub steps: u64,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub lambda: f64,
    pub penalty: PenaltyKind,
    pub seed: u64,
    pub channels: Vec<usize>,
    pub enc_width: usize,
    pub d_y: usize,
    pub d_z: usize,
    pub d_w: usize,
    pub hidden: usize,
    pub lstm_width: usize,
    pub n_cond: usize,
    pub k_content: usize,
    pub substeps: usize,
    /// Steps between intermediate checkpoints; 0 writes only the final one.
    pub checkpoint_every: u64,
    /// Steps between progress log lines.
    pub log_every: u64,
}

impl Default for TrainRunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        let m = &t.model;
        Self {
            data: PathBuf::new(),
            out: PathBuf::new(),
            steps: t.steps,
            batch_size: t.batch_size,
            lr: t.adam.lr,
            beta1: t.adam.beta1,
            beta2: t.adam.beta2,
            eps: t.adam.eps,
            lambda: t.lambda,
            penalty: PenaltyKind::L2,
            seed: 1,
            channels: m.channels.clone(),
            enc_width: m.enc_width,
            d_y: m.d_y,
            d_z: m.d_z,
            d_w: m.d_w,
            hidden: m.hidden,
            lstm_width: m.lstm_width,
            n_cond: m.n_cond,
            k_content: m.k_content,
            substeps: m.substeps,
            checkpoint_every: 500,
            log_every: 100,
        }
    }
}

impl TrainRunConfig {
    /// Core training settings for frames of the given `[bands, height, width]`.
    pub fn train_config(&self, frame_dims: [usize; 3]) -> TrainConfig {
        let [bands, height, width] = frame_dims;
        TrainConfig {
            model: ModelConfig {
                bands,
                height,
                width,
                channels: self.channels.clone(),
                enc_width: self.enc_width,
                d_y: self.d_y,
                d_z: self.d_z,
                d_w: self.d_w,
                hidden: self.hidden,
                lstm_width: self.lstm_width,
                n_cond: self.n_cond,
                k_content: self.k_content,
                substeps: self.substeps,
            },
            lambda: self.lambda,
            adam: Adam {
                lr: self.lr,
                beta1: self.beta1,
                beta2: self.beta2,
                eps: self.eps,
            },
            batch_size: self.batch_size,
            steps: self.steps,
            seed: self.seed,
            penalty: self.penalty.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateConfig {
    pub ckpt: PathBuf,
    /// Video whose first `n_cond` frames condition the forecasts.
    pub cond: PathBuf,
    pub out: PathBuf,
    pub horizon: usize,
    pub samples: usize,
    pub seed: u64,
    /// Euler steps per frame; 0 uses the checkpoint's value.
    pub substeps: usize,
    /// Also write every intermediate sub-step frame.
    pub dense: bool,
    pub compress: bool,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            ckpt: PathBuf::new(),
            cond: PathBuf::new(),
            out: PathBuf::new(),
            horizon: 10,
            samples: 3,
            seed: 1,
            substeps: 0,
            dense: false,
            compress: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub ckpt: PathBuf,
    /// Directory of `.lrvv` test videos.
    pub data: PathBuf,
    pub out: PathBuf,
    pub samples: usize,
    pub seed: u64,
    /// Euler steps per frame; 0 uses the checkpoint's value.
    pub substeps: usize,
    /// Predicted frames per sequence; 0 predicts every frame after the conditioning ones.
    pub horizon: usize,
    /// Number of sequences to render as truth/forecast panels.
    pub panels: usize,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self {
            ckpt: PathBuf::new(),
            data: PathBuf::new(),
            out: PathBuf::new(),
            samples: 100,
            seed: 1,
            substeps: 0,
            horizon: 0,
            panels: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineConfig {
    pub ckpt: PathBuf,
    pub data: PathBuf,
    pub out: PathBuf,
    /// Sub-step counts to compare; deltas are relative to the first.
    pub substeps: Vec<usize>,
    pub samples: usize,
    pub seed: u64,
    pub horizon: usize,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            ckpt: PathBuf::new(),
            data: PathBuf::new(),
            out: PathBuf::new(),
            substeps: vec![2, 4],
            samples: 10,
            seed: 1,
            horizon: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InspectConfig {
    pub ckpt: PathBuf,
}

/// Settings of one run after merging defaults, config file and flags.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved<C> {
    pub command: String,
    pub workers: usize,
    pub settings: C,
}

impl<C: Serialize> Resolved<C> {
    pub fn to_toml(&self) -> Result<String> {
        let mut t = toml::Table::new();
        t.insert("command".into(), toml::Value::String(self.command.clone()));
        t.insert("workers".into(), toml::Value::Integer(self.workers as i64));
        let body = toml::Value::try_from(&self.settings).map_err(|e| config_err(format!("cannot serialize settings: {e}")))?;
        t.insert(self.command.clone(), body);
        toml::to_string(&t).map_err(|e| config_err(format!("cannot serialize settings: {e}")))
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(RESOLVED_NAME);
        std::fs::write(&path, self.to_toml()?).map_err(io_err(&path))
    }
}

/// Merges `file` and the flag overrides over the defaults of `C`.
///
/// `overrides` must serialize to a flat table whose unset flags are `None`.
pub fn resolve<C, O>(command: &str, file: Option<&Path>, workers: Option<usize>, overrides: &O) -> Result<Resolved<C>>
where
    C: DeserializeOwned,
    O: Serialize,
{
    let mut body = toml::Table::new();
    let mut file_workers = None;
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let mut top: toml::Table = toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        if let Some(cmd) = top.remove("command") {
            if cmd.as_str() != Some(command) {
                return Err(config_err(format!("{}: written for command {cmd}, not {command}", path.display())));
            }
        }
        if let Some(w) = top.remove("workers") {
            file_workers = Some(w.as_integer().filter(|&w| w >= 1).ok_or_else(|| config_err("workers must be a positive integer"))? as usize);
        }
        if let Some(section) = top.remove(command) {
            match section {
                toml::Value::Table(t) => body = t,
                _ => return Err(config_err(format!("[{command}] must be a table"))),
            }
        }
        if let Some(key) = top.keys().next() {
            return Err(config_err(format!("{}: unknown key {key}", path.display())));
        }
    }
    let flags = toml::Table::try_from(overrides).map_err(|e| config_err(format!("flags: {e}")))?;
    body.extend(flags);
    let settings = toml::Value::Table(body).try_into().map_err(|e: toml::de::Error| config_err(e.message().to_string()))?;
    let workers = workers.or(file_workers).unwrap_or(1);
    if workers == 0 {
        return Err(config_err("workers must be at least 1"));
    }
    Ok(Resolved { command: command.to_string(), workers, settings })
}

pub(crate) fn require_path(p: &Path, key: &str) -> Result<()> {
    if p.as_os_str().is_empty() {
        return Err(config_err(format!("missing required setting {key}")));
    }
    Ok(())
}
