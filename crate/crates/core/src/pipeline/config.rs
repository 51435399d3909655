use std::path::Path;

use serde_json::{Map, Value};

use crate::bgfg::{Channel, SegmentParams, DEFAULT_SIGMA_FLOOR, DEFAULT_TRAINING_FRAMES, DEFAULT_UPDATE_RATE};
use crate::classify::{ClassifierKind, ClassifierParams, KernelKind};
use crate::encoding::DictionaryParams;
use crate::error::{Error, Result};
use crate::evalreport::ReportFormat;
use crate::imaging::{DEFAULT_FPS, DEFAULT_PATTERN};
use crate::shotseg::ShotParams;
use crate::sift::PyramidParams;

pub const CONFIG_ENV: &str = "RITESCENE_CONFIG";
pub const DEFAULT_MAX_SAMPLES: usize = 5000;

/// Every key accepted in a config file or `--set`, in documentation order.
pub const KEYS: &[&str] = &[
    "shot.k",
    "shot.motion_threshold",
    "shot.block_threshold",
    "shot.block_size",
    "shot.block_change_level",
    "bg.training_frames",
    "bg.sigma_floor",
    "bg.update_rate",
    "bg.window",
    "bg.threshold",
    "bg.channel",
    "sift.octaves",
    "sift.scales",
    "sift.sigma0",
    "sift.contrast_threshold",
    "sift.edge_ratio",
    "dict.m",
    "dict.lambda",
    "dict.iterations",
    "dict.max_samples",
    "classifier.kind",
    "knn.k",
    "mlp.hidden",
    "mlp.rate",
    "mlp.epochs",
    "svm.c",
    "svm.kernel",
    "svm.gamma",
    "svm.degree",
    "svm.tol",
    "svm.max_iter",
    "seed",
    "workers",
    "io.pattern",
    "io.fps",
    "report.format",
];

/// Keys that affect scheduling or output only and are left out of bundle
/// snapshots.
pub const RUNTIME_KEYS: &[&str] = &["workers", "report.format"];

/// All tunables of the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub shot: ShotParams,
    /// Frames used to fit each shot's background model (N).
    pub bg_training_frames: usize,
    pub bg_sigma_floor: f64,
    pub bg_update_rate: f64,
    pub segment: SegmentParams,
    pub sift: PyramidParams,
    pub dict_m: usize,
    pub dict_lambda: f64,
    pub dict_iterations: usize,
    /// Cap on descriptors used to learn the dictionary; a seeded subset is drawn above it.
    pub dict_max_samples: usize,
    pub classifier: ClassifierParams,
    pub seed: u64,
    /// Worker threads; 0 means one per available core.
    pub workers: usize,
    pub pattern: String,
    pub fps: f64,
    pub report_format: ReportFormat,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            shot: ShotParams::default(),
            bg_training_frames: DEFAULT_TRAINING_FRAMES,
            bg_sigma_floor: DEFAULT_SIGMA_FLOOR,
            bg_update_rate: DEFAULT_UPDATE_RATE,
            segment: SegmentParams::default(),
            sift: PyramidParams::default(),
            dict_m: crate::encoding::DEFAULT_ATOMS,
            dict_lambda: crate::encoding::DEFAULT_LAMBDA,
            dict_iterations: crate::encoding::DEFAULT_ITERATIONS,
            dict_max_samples: DEFAULT_MAX_SAMPLES,
            classifier: ClassifierParams::default(),
            seed: 0,
            workers: 0,
            pattern: DEFAULT_PATTERN.to_string(),
            fps: DEFAULT_FPS,
            report_format: ReportFormat::Csv,
        }
    }
}

fn bad(key: &str, value: &Value, want: &str) -> Error {
    Error::InvalidParam(format!("{key}: expected {want}, got {value}"))
}

fn as_usize(key: &str, v: &Value) -> Result<usize> {
    v.as_u64().map(|n| n as usize).ok_or_else(|| bad(key, v, "a non-negative integer"))
}

fn as_f64(key: &str, v: &Value) -> Result<f64> {
    v.as_f64().filter(|x| x.is_finite()).ok_or_else(|| bad(key, v, "a number"))
}

fn as_str<'a>(key: &str, v: &'a Value) -> Result<&'a str> {
    v.as_str().ok_or_else(|| bad(key, v, "a string"))
}

/// Parses the value half of `key=value`: JSON if it parses, a bare string otherwise.
pub fn parse_value(text: &str) -> Value {
    serde_json::from_str(text).unwrap_or_else(|_| Value::String(text.to_string()))
}

/// Splits `key=value`.
pub fn parse_assignment(text: &str) -> Result<(String, Value)> {
    let (k, v) = text
        .split_once('=')
        .ok_or_else(|| Error::InvalidParam(format!("expected key=value, got {text:?}")))?;
    Ok((k.trim().to_string(), parse_value(v.trim())))
}

impl PipelineConfig {
    pub fn get(&self, key: &str) -> Option<Value> {
        let c = &self.classifier;
        let v = match key {
            "shot.k" => self.shot.k.into(),
            "shot.motion_threshold" => self.shot.motion_threshold.into(),
            "shot.block_threshold" => self.shot.block_threshold.into(),
            "shot.block_size" => self.shot.block_size.into(),
            "shot.block_change_level" => self.shot.block_change_level.into(),
            "bg.training_frames" => self.bg_training_frames.into(),
            "bg.sigma_floor" => self.bg_sigma_floor.into(),
            "bg.update_rate" => self.bg_update_rate.into(),
            "bg.window" => self.segment.window.into(),
            "bg.threshold" => self.segment.threshold.into(),
            "bg.channel" => self.segment.channel.name().into(),
            "sift.octaves" => self.sift.octaves.into(),
            "sift.scales" => self.sift.scales.into(),
            "sift.sigma0" => self.sift.sigma0.into(),
            "sift.contrast_threshold" => self.sift.contrast_threshold.into(),
            "sift.edge_ratio" => self.sift.edge_ratio.into(),
            "dict.m" => self.dict_m.into(),
            "dict.lambda" => self.dict_lambda.into(),
            "dict.iterations" => self.dict_iterations.into(),
            "dict.max_samples" => self.dict_max_samples.into(),
            "classifier.kind" => c.kind.name().into(),
            "knn.k" => c.knn_k.into(),
            "mlp.hidden" => c.mlp.hidden.into(),
            "mlp.rate" => c.mlp.rate.into(),
            "mlp.epochs" => c.mlp.epochs.into(),
            "svm.c" => c.svm_c.into(),
            "svm.kernel" => c.svm_kernel.name().into(),
            "svm.gamma" => c.svm_gamma.map_or(Value::Null, Value::from),
            "svm.degree" => c.svm_degree.into(),
            "svm.tol" => c.svm_tol.into(),
            "svm.max_iter" => c.svm_max_iter.into(),
            "seed" => self.seed.into(),
            "workers" => self.workers.into(),
            "io.pattern" => self.pattern.clone().into(),
            "io.fps" => self.fps.into(),
            "report.format" => self.report_format.name().into(),
            _ => return None,
        };
        Some(v)
    }

    /// Sets one key. Range checks happen in `validate`.
    pub fn set(&mut self, key: &str, v: &Value) -> Result<()> {
        let c = &mut self.classifier;
        match key {
            "shot.k" => self.shot.k = as_usize(key, v)?,
            "shot.motion_threshold" => self.shot.motion_threshold = as_f64(key, v)?,
            "shot.block_threshold" => self.shot.block_threshold = as_f64(key, v)?,
            "shot.block_size" => self.shot.block_size = as_usize(key, v)?,
            "shot.block_change_level" => self.shot.block_change_level = as_f64(key, v)?,
            "bg.training_frames" => self.bg_training_frames = as_usize(key, v)?,
            "bg.sigma_floor" => self.bg_sigma_floor = as_f64(key, v)?,
            "bg.update_rate" => self.bg_update_rate = as_f64(key, v)?,
            "bg.window" => self.segment.window = as_usize(key, v)?,
            "bg.threshold" => self.segment.threshold = as_f64(key, v)?,
            "bg.channel" => self.segment.channel = Channel::parse(as_str(key, v)?)?,
            "sift.octaves" => self.sift.octaves = as_usize(key, v)?,
            "sift.scales" => self.sift.scales = as_usize(key, v)?,
            "sift.sigma0" => self.sift.sigma0 = as_f64(key, v)?,
            "sift.contrast_threshold" => self.sift.contrast_threshold = as_f64(key, v)?,
            "sift.edge_ratio" => self.sift.edge_ratio = as_f64(key, v)?,
            "dict.m" => self.dict_m = as_usize(key, v)?,
            "dict.lambda" => self.dict_lambda = as_f64(key, v)?,
            "dict.iterations" => self.dict_iterations = as_usize(key, v)?,
            "dict.max_samples" => self.dict_max_samples = as_usize(key, v)?,
            "classifier.kind" => c.kind = ClassifierKind::parse(as_str(key, v)?)?,
            "knn.k" => c.knn_k = as_usize(key, v)?,
            "mlp.hidden" => c.mlp.hidden = as_usize(key, v)?,
            "mlp.rate" => c.mlp.rate = as_f64(key, v)?,
            "mlp.epochs" => c.mlp.epochs = as_usize(key, v)?,
            "svm.c" => c.svm_c = as_f64(key, v)?,
            "svm.kernel" => c.svm_kernel = KernelKind::parse(as_str(key, v)?)?,
            "svm.gamma" => c.svm_gamma = if v.is_null() { None } else { Some(as_f64(key, v)?) },
            "svm.degree" => {
                c.svm_degree = u32::try_from(as_usize(key, v)?).map_err(|_| bad(key, v, "a small integer"))?
            }
            "svm.tol" => c.svm_tol = as_f64(key, v)?,
            "svm.max_iter" => c.svm_max_iter = as_usize(key, v)?,
            "seed" => self.seed = v.as_u64().ok_or_else(|| bad(key, v, "a non-negative integer"))?,
            "workers" => self.workers = as_usize(key, v)?,
            "io.pattern" => self.pattern = as_str(key, v)?.to_string(),
            "io.fps" => self.fps = as_f64(key, v)?,
            "report.format" => self.report_format = ReportFormat::parse(as_str(key, v)?)?,
            _ => return Err(Error::InvalidParam(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Applies every entry of a flat JSON object, rejecting unknown keys.
    pub fn apply_json(&mut self, text: &str) -> Result<()> {
        let v: Value = serde_json::from_str(text)?;
        let map = v.as_object().ok_or_else(|| Error::Format("config must be a JSON object".into()))?;
        for (k, v) in map {
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::default();
        cfg.apply_json(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_json(&text).map_err(|e| match e {
            Error::InvalidParam(m) | Error::Format(m) => Error::InvalidParam(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Defaults, then the config file (`file`, else the file named by
    /// `RITESCENE_CONFIG`), then `overrides` in order.
    pub fn resolve(file: Option<&Path>, overrides: &[(String, Value)]) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::default();
        let env = std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty());
        if let Some(path) = file.map(Path::to_path_buf).or_else(|| env.map(Into::into)) {
            cfg.apply_file(&path)?;
        }
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Flat key/value object. Without `runtime`, scheduling and output keys are
    /// omitted, leaving the settings that determine extracted features and models.
    pub fn to_map(&self, runtime: bool) -> Map<String, Value> {
        KEYS.iter()
            .filter(|k| runtime || !RUNTIME_KEYS.contains(k))
            .map(|&k| (k.to_string(), self.get(k).expect("known key")))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&Value::Object(self.to_map(true))).expect("config serializes") + "\n"
    }

    pub fn validate(&self) -> Result<()> {
        self.shot.validate()?;
        self.segment.validate()?;
        self.sift.validate()?;
        if self.bg_training_frames < 2 {
            return Err(Error::InvalidParam("bg.training_frames must be >= 2".into()));
        }
        if !(self.bg_sigma_floor > 0.0) {
            return Err(Error::InvalidParam("bg.sigma_floor must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.bg_update_rate) {
            return Err(Error::InvalidParam("bg.update_rate must lie in [0, 1]".into()));
        }
        if self.dict_m == 0 || self.dict_max_samples == 0 {
            return Err(Error::InvalidParam("dict.m and dict.max_samples must be >= 1".into()));
        }
        if self.dict_lambda < 0.0 {
            return Err(Error::InvalidParam("dict.lambda must be >= 0".into()));
        }
        let c = &self.classifier;
        if c.knn_k == 0 {
            return Err(Error::InvalidParam("knn.k must be >= 1".into()));
        }
        if c.mlp.hidden == 0 || !(c.mlp.rate > 0.0) {
            return Err(Error::InvalidParam("mlp.hidden must be >= 1 and mlp.rate positive".into()));
        }
        if c.svm_gamma.is_some_and(|g| !(g > 0.0)) {
            return Err(Error::InvalidParam("svm.gamma must be positive".into()));
        }
        c.svm_params(1).validate()?;
        if !(self.fps > 0.0) {
            return Err(Error::InvalidParam("io.fps must be positive".into()));
        }
        glob::Pattern::new(&self.pattern)
            .map_err(|e| Error::InvalidParam(format!("io.pattern {:?}: {e}", self.pattern)))?;
        Ok(())
    }

    pub fn dictionary_params(&self) -> DictionaryParams {
        DictionaryParams { m: self.dict_m, lambda: self.dict_lambda, iterations: self.dict_iterations, seed: self.seed }
    }

    /// Classifier settings with the run seed threaded into the MLP.
    pub fn classifier_params(&self) -> ClassifierParams {
        let mut p = self.classifier.clone();
        p.mlp.seed = self.seed;
        p
    }
}
