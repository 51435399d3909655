use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::bgfg::{fit_background, segment_frame, ForegroundMask};
use crate::classify::{LabeledDataset, Prediction, TrainedModel};
use crate::encoding::{learn_dictionary, Dictionary, ImageFeature, SparseCode};
use crate::error::{Error, Result};
use crate::evalreport::{ComparisonReport, MetricsReport, ReportFormat};
use crate::imaging::{encode_pgm, encode_ppm, luminance, rgb_to_hsi, Frame, FrameSequence};
use crate::shotseg::{detect_shots, export_shots, parse_shots, ShotList};
use crate::sift::{extract_frame, parse_descriptors, write_descriptors, DescriptorRecord};

use super::bundle::TrainedBundle;
use super::config::PipelineConfig;
use super::dataset::{discover_samples, DatasetLayout, Sample};
use super::synth::{write_synthetic, SynthParams};

const SUBSET_SALT: u64 = 0x5EED_D1C7;
pub const EXTRACT_STAMP: &str = "extract.json";
pub const SHOTS_FILE: &str = "shots.json";
pub const BACKGROUND_DESCRIPTORS: &str = "background.jsonl";
pub const FOREGROUND_DESCRIPTORS: &str = "foreground.jsonl";
pub const CODES_FILE: &str = "codes.jsonl";

/// Runs `f` on a pool of `workers` threads (0: one per core).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParam(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Background and mask state at one keyframe.
#[derive(Debug, Clone)]
pub struct KeyframeResult {
    pub index: usize,
    pub frame: Arc<Frame>,
    /// Rendered background mean (RGB), or the frame itself on the fallback path.
    pub background: Frame,
    pub mask: ForegroundMask,
    /// The shot was shorter than `bg.training_frames`.
    pub fallback: bool,
}

impl KeyframeResult {
    pub fn foreground(&self) -> Frame {
        self.mask.apply(&self.frame).expect("mask matches frame")
    }
}

/// Fits a background model on the first `bg.training_frames` frames of every
/// shot and tracks it through the shot with selective updates, recording the
/// model mean and the foreground mask at each keyframe.
pub fn segment_keyframes(seq: &FrameSequence, shots: &ShotList, cfg: &PipelineConfig) -> Result<Vec<KeyframeResult>> {
    let n = cfg.bg_training_frames;
    let mut out = Vec::new();
    for shot in &shots.shots {
        if shot.len() < n {
            warn!(
                "shot {}..{} has {} frames, fewer than bg.training_frames = {n}; using whole frames as background",
                shot.start,
                shot.end,
                shot.len()
            );
            for &k in &shot.keyframes {
                let frame = seq.get(k)?;
                out.push(KeyframeResult {
                    index: k,
                    background: (*frame).clone(),
                    mask: ForegroundMask::empty(frame.width(), frame.height()),
                    frame,
                    fallback: true,
                });
            }
            continue;
        }
        let training: Vec<Frame> =
            (shot.start..shot.start + n).into_par_iter().map(|t| rgb_to_hsi(&*seq.get(t)?)).collect::<Result<_>>()?;
        let mut model = fit_background(&training, cfg.bg_sigma_floor, cfg.bg_update_rate)?;
        drop(training);
        let last = shot.keyframes.last().copied().unwrap_or(shot.start);
        for t in shot.start..=last {
            let is_key = shot.keyframes.contains(&t);
            let tracking = t >= shot.start + n;
            if !is_key && !tracking {
                continue;
            }
            let frame = seq.get(t)?;
            let hsi = rgb_to_hsi(&frame)?;
            let mask = segment_frame(&model, &hsi, &cfg.segment)?;
            if is_key {
                out.push(KeyframeResult {
                    index: t,
                    background: model.background_image(),
                    mask: mask.clone(),
                    frame,
                    fallback: false,
                });
            }
            if tracking {
                model.update(&hsi, &mask)?;
            }
        }
    }
    Ok(out)
}

/// Shots and SIFT descriptors of one sample. Background descriptors of all
/// keyframes are concatenated in keyframe order.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleDescriptors {
    pub shots: ShotList,
    pub background: Vec<DescriptorRecord>,
    /// Empty unless foreground extraction was requested.
    pub foreground: Vec<DescriptorRecord>,
}

impl SampleDescriptors {
    pub fn vectors(&self) -> Vec<Vec<f64>> {
        self.background.iter().map(|r| r.descriptor.clone()).collect()
    }

    fn load(dir: &Path) -> Result<SampleDescriptors> {
        let shots = parse_shots(&read(&dir.join(SHOTS_FILE))?)?;
        let background = parse_descriptors(&read(&dir.join(BACKGROUND_DESCRIPTORS))?)?;
        let fg = dir.join(FOREGROUND_DESCRIPTORS);
        let foreground = if fg.exists() { parse_descriptors(&read(&fg)?)? } else { Vec::new() };
        Ok(SampleDescriptors { shots, background, foreground })
    }
}

fn keyframe_file(index: usize, kind: &str, ext: &str) -> String {
    format!("keyframe_{index:04}_{kind}.{ext}")
}

fn sift_records(frame: &Frame, cfg: &PipelineConfig) -> Result<Vec<DescriptorRecord>> {
    Ok(extract_frame(&luminance(frame)?, &cfg.sift)?.iter().map(|f| f.record()).collect())
}

/// Shot detection, background modelling and SIFT for one sample. With `dump`,
/// shots, keyframe images, masks and descriptors are written under it.
pub fn describe_sample(
    sample: &Sample,
    cfg: &PipelineConfig,
    foreground: bool,
    dump: Option<&Path>,
) -> Result<SampleDescriptors> {
    let seq = sample.source.sequence(&cfg.pattern, cfg.fps)?;
    let shots = detect_shots(&seq, &cfg.shot)?;
    let keyframes = segment_keyframes(&seq, &shots, cfg)?;
    let mut background = Vec::new();
    let mut fg = Vec::new();
    for kf in &keyframes {
        background.extend(sift_records(&kf.background, cfg)?);
        if foreground {
            fg.extend(sift_records(&kf.foreground(), cfg)?);
        }
    }
    let out = SampleDescriptors { shots, background, foreground: fg };
    if let Some(dir) = dump {
        write(&dir.join(SHOTS_FILE), export_shots(&out.shots))?;
        write_keyframes(dir, &keyframes)?;
        write(&dir.join(BACKGROUND_DESCRIPTORS), write_descriptors(&out.background))?;
        if foreground {
            write(&dir.join(FOREGROUND_DESCRIPTORS), write_descriptors(&out.foreground))?;
        }
    }
    Ok(out)
}

fn write_keyframes(dir: &Path, keyframes: &[KeyframeResult]) -> Result<()> {
    for kf in keyframes {
        write(&dir.join(keyframe_file(kf.index, "background", "ppm")), encode_ppm(&kf.background)?)?;
        write(&dir.join(keyframe_file(kf.index, "mask", "pgm")), encode_pgm(&kf.mask.to_frame())?)?;
        write(&dir.join(keyframe_file(kf.index, "foreground", "ppm")), encode_ppm(&kf.foreground())?)?;
    }
    Ok(())
}

/// Settings that determine extracted descriptors.
fn extraction_settings(cfg: &PipelineConfig) -> Map<String, Value> {
    cfg.to_map(false)
        .into_iter()
        .filter(|(k, _)| ["shot.", "bg.", "sift.", "io."].iter().any(|p| k.starts_with(p)))
        .collect()
}

fn stamp_dump(dump: &Path, cfg: &PipelineConfig, resume: bool) -> Result<()> {
    let path = dump.join(EXTRACT_STAMP);
    let settings = Value::Object(extraction_settings(cfg));
    if resume && path.exists() {
        let previous: Value = serde_json::from_str(&read(&path)?)?;
        if previous != settings {
            return Err(Error::InvalidParam(format!(
                "{} was produced with different extraction settings; rerun without resume",
                dump.display()
            )));
        }
        return Ok(());
    }
    write(&path, serde_json::to_string_pretty(&settings).expect("settings serialize") + "\n")
}

/// Descriptors for every sample, in sample order, processed in parallel. With
/// `resume`, samples whose dump already holds descriptors are read back instead
/// of recomputed.
pub fn extract_all(
    samples: &[Sample],
    cfg: &PipelineConfig,
    foreground: bool,
    dump: Option<&Path>,
    resume: bool,
) -> Result<Vec<SampleDescriptors>> {
    if let Some(d) = dump {
        stamp_dump(d, cfg, resume)?;
    }
    samples
        .par_iter()
        .map(|s| {
            let dir = dump.map(|d| d.join(s.key()));
            if let Some(dir) = dir.as_deref().filter(|d| resume && d.join(BACKGROUND_DESCRIPTORS).exists()) {
                return SampleDescriptors::load(dir);
            }
            describe_sample(s, cfg, foreground, dir.as_deref())
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub bundle: TrainedBundle,
    pub features: Vec<ImageFeature>,
    /// Percent of training samples the trained model labels correctly.
    pub training_accuracy: f64,
}

/// Descriptor subset for dictionary learning: everything when under the cap,
/// else a seeded sample kept in original order.
fn dictionary_subset(all: Vec<Vec<f64>>, cfg: &PipelineConfig) -> Vec<Vec<f64>> {
    if all.len() <= cfg.dict_max_samples {
        return all;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ SUBSET_SALT);
    let mut keep = rand::seq::index::sample(&mut rng, all.len(), cfg.dict_max_samples).into_vec();
    keep.sort_unstable();
    let mut all: Vec<Option<Vec<f64>>> = all.into_iter().map(Some).collect();
    keep.into_iter().map(|i| all[i].take().expect("distinct indices")).collect()
}

/// Dictionary learned on the background descriptors of the training samples,
/// and the number of descriptors it was learned from.
pub fn learn_codebook(descriptors: &[SampleDescriptors], cfg: &PipelineConfig) -> Result<(Dictionary, usize)> {
    let all: Vec<Vec<f64>> = descriptors.iter().flat_map(|d| d.vectors()).collect();
    if all.is_empty() {
        return Err(Error::Empty("training samples produced no background descriptors".into()));
    }
    let subset = dictionary_subset(all, cfg);
    Ok((learn_dictionary(&subset, &cfg.dictionary_params())?, subset.len()))
}

/// One max-pooled code vector per sample.
pub fn pool_features(dictionary: &Dictionary, descriptors: &[SampleDescriptors]) -> Result<Vec<ImageFeature>> {
    descriptors
        .par_iter()
        .map(|d| {
            let codes = dictionary.encode_all(&d.vectors())?;
            crate::encoding::pool_codes(&codes, dictionary.m())
        })
        .collect()
}

/// Trains the configured classifier on pooled features and assembles the bundle.
pub fn train_classifier(
    dictionary: Dictionary,
    features: Vec<ImageFeature>,
    labels: &[String],
    cfg: &PipelineConfig,
) -> Result<TrainOutput> {
    if features.len() != labels.len() {
        return Err(Error::Dimension("one label per training sample required".into()));
    }
    let data = LabeledDataset::new(features.iter().map(|f| f.values.clone()).collect(), labels.to_vec())?;
    let model = TrainedModel::train(&data, &cfg.classifier_params())?;
    let train_counts = model.labels.iter().map(|l| labels.iter().filter(|t| *t == l).count()).collect();
    let predictions = model.predict_all(&data.features)?;
    let correct = predictions.iter().zip(labels).filter(|(p, t)| &p.label == *t).count();
    let bundle = TrainedBundle { config: cfg.clone(), dictionary, model, train_counts };
    Ok(TrainOutput { bundle, features, training_accuracy: 100.0 * correct as f64 / labels.len() as f64 })
}

/// Learns the dictionary on the training descriptors, pools one feature per
/// sample and trains the configured classifier.
pub fn train_bundle(descriptors: &[SampleDescriptors], labels: &[String], cfg: &PipelineConfig) -> Result<TrainOutput> {
    if descriptors.len() != labels.len() {
        return Err(Error::Dimension("one label per training sample required".into()));
    }
    let (dictionary, _) = learn_codebook(descriptors, cfg)?;
    let features = pool_features(&dictionary, descriptors)?;
    train_classifier(dictionary, features, labels, cfg)
}

/// Predictions for already-extracted samples.
pub fn classify_samples(bundle: &TrainedBundle, descriptors: &[SampleDescriptors]) -> Result<Vec<Prediction>> {
    descriptors.par_iter().map(|d| bundle.model.predict(&bundle.feature(&d.vectors())?.values)).collect()
}

/// Per-class counts of `predictions` against `truths` over the bundle's labels.
pub fn evaluate(bundle: &TrainedBundle, predictions: &[Prediction], truths: &[String]) -> Result<MetricsReport> {
    let predicted: Vec<String> = predictions.iter().map(|p| p.label.clone()).collect();
    MetricsReport::from_predictions(bundle.model.kind().name(), &predicted, truths, bundle.labels())
}

fn read_frames_dir(input: &Path, cfg: &PipelineConfig) -> Result<FrameSequence> {
    let seq = crate::imaging::load_sequence(input, &cfg.pattern)?;
    if seq.is_empty() {
        return Err(Error::Empty(format!("{}: no frames matching {:?}", input.display(), cfg.pattern)));
    }
    Ok(seq.with_fps(cfg.fps))
}

/// Shots of the clip in `input`, written to `out/shots.json` with every
/// keyframe copied to `out/keyframes/`.
pub fn run_preprocess(input: &Path, out: &Path, cfg: &PipelineConfig) -> Result<ShotList> {
    with_workers(cfg.workers, || {
        let seq = read_frames_dir(input, cfg)?;
        let shots = detect_shots(&seq, &cfg.shot)?;
        write(&out.join(SHOTS_FILE), export_shots(&shots))?;
        for k in shots.keyframes() {
            let name = seq
                .path(k)
                .and_then(|p| p.file_name())
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(super::synth::frame_name(k)));
            write(&out.join("keyframes").join(name), encode_ppm(&*seq.get(k)?)?)?;
        }
        Ok(shots)
    })?
}

/// Background, mask and foreground images for every keyframe of the clip in
/// `input`, written under `out`.
pub fn run_segment(input: &Path, out: &Path, cfg: &PipelineConfig) -> Result<Vec<KeyframeResult>> {
    with_workers(cfg.workers, || {
        let seq = read_frames_dir(input, cfg)?;
        let shots = detect_shots(&seq, &cfg.shot)?;
        let keyframes = segment_keyframes(&seq, &shots, cfg)?;
        write(&out.join(SHOTS_FILE), export_shots(&shots))?;
        write_keyframes(out, &keyframes)?;
        Ok(keyframes)
    })?
}

/// Background and foreground descriptors for every sample found under
/// `input`, dumped under `out/<sample>`.
pub fn run_features(input: &Path, out: &Path, cfg: &PipelineConfig, resume: bool) -> Result<Vec<(Sample, SampleDescriptors)>> {
    with_workers(cfg.workers, || {
        let samples = discover_samples(input, &cfg.pattern)?;
        let descriptors = extract_all(&samples, cfg, true, Some(out), resume)?;
        Ok(samples.into_iter().zip(descriptors).collect())
    })?
}

fn write_codes(path: &Path, codes: &[SparseCode]) -> Result<()> {
    let mut text = String::new();
    for c in codes {
        text += &serde_json::to_string(&c.0).expect("codes serialize");
        text.push('\n');
    }
    write(path, text)
}

/// Reads a codes dump written by training.
pub fn read_codes(path: &Path) -> Result<Vec<SparseCode>> {
    read(path)?
        .lines()
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str::<Vec<f64>>(l)
                .map(SparseCode)
                .map_err(|e| Error::Format(format!("{} line {}: {e}", path.display(), i + 1)))
        })
        .collect()
}

/// Trains on the dataset under `data` and writes the bundle to `bundle_path`.
/// With `dump`, every intermediate artifact (shots, keyframe images, masks,
/// descriptors, sparse codes) is written under it; `resume` reuses dumped
/// descriptors.
pub fn run_train(
    data: &Path,
    bundle_path: &Path,
    cfg: &PipelineConfig,
    dump: Option<&Path>,
    resume: bool,
) -> Result<TrainOutput> {
    with_workers(cfg.workers, || {
        let layout = DatasetLayout::scan(data, &cfg.pattern)?;
        let output = train_layout(&layout, cfg, dump, resume)?;
        output.bundle.save(bundle_path)?;
        Ok(output)
    })?
}

/// `run_train` without touching the filesystem for the bundle.
pub fn train_layout(layout: &DatasetLayout, cfg: &PipelineConfig, dump: Option<&Path>, resume: bool) -> Result<TrainOutput> {
    let descriptors = extract_all(&layout.samples, cfg, dump.is_some(), dump, resume)?;
    let output = train_bundle(&descriptors, &layout.truths(), cfg)?;
    if let Some(d) = dump {
        layout.samples.par_iter().zip(&descriptors).try_for_each(|(s, desc)| {
            let codes = output.bundle.dictionary.encode_all(&desc.vectors())?;
            write_codes(&d.join(s.key()).join(CODES_FILE), &codes)
        })?;
    }
    Ok(output)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifyRecord {
    pub sample: String,
    pub label: String,
    pub score: f64,
    pub scores: Map<String, Value>,
}

fn record(sample: &Sample, p: &Prediction, labels: &[String]) -> ClassifyRecord {
    ClassifyRecord {
        sample: sample.key().to_string_lossy().into_owned(),
        label: p.label.clone(),
        score: p.score,
        scores: labels.iter().zip(&p.scores).map(|(l, &s)| (l.clone(), Value::from(s))).collect(),
    }
}

/// Classifies every sample found under `input` with the bundle at `bundle_path`.
/// Extraction settings come from the bundle; only `workers` is taken from `cfg`.
pub fn run_classify(bundle_path: &Path, input: &Path, cfg: &PipelineConfig) -> Result<Vec<ClassifyRecord>> {
    let bundle = TrainedBundle::load(bundle_path)?;
    with_workers(cfg.workers, || {
        let samples = discover_samples(input, &bundle.config.pattern)?;
        let descriptors = extract_all(&samples, &bundle.config, false, None, false)?;
        let predictions = classify_samples(&bundle, &descriptors)?;
        Ok(samples.iter().zip(&predictions).map(|(s, p)| record(s, p, bundle.labels())).collect())
    })?
}

#[derive(Debug, Clone)]
pub struct EvalOutput {
    pub reports: Vec<MetricsReport>,
    pub comparison: ComparisonReport,
}

impl EvalOutput {
    /// Writes `metrics_<kind>.<ext>` per report and `comparison.<ext>`.
    pub fn write(&self, out: &Path, format: ReportFormat) -> Result<()> {
        let ext = format.name();
        for r in &self.reports {
            write(&out.join(format!("metrics_{}.{ext}", r.classifier)), r.emit(format))?;
        }
        write(&out.join(format!("comparison.{ext}")), self.comparison.emit(format))
    }
}

/// Classifies a labeled dataset with each bundle and builds one per-class report
/// per bundle plus the classifier comparison. Bundles must differ in kind.
pub fn evaluate_layout(bundles: &[TrainedBundle], layout: &DatasetLayout) -> Result<EvalOutput> {
    let first = bundles.first().ok_or_else(|| Error::InvalidParam("at least one bundle required".into()))?;
    let truths = layout.truths();
    let mut reports = Vec::new();
    let mut cached: Option<(Map<String, Value>, Vec<SampleDescriptors>)> = None;
    for b in bundles {
        if reports.iter().any(|r: &MetricsReport| r.classifier == b.model.kind().name()) {
            return Err(Error::InvalidParam(format!("two bundles of kind {}", b.model.kind().name())));
        }
        let settings = extraction_settings(&b.config);
        let reuse = cached.as_ref().is_some_and(|(s, _)| *s == settings);
        if !reuse {
            cached = Some((settings, extract_all(&layout.samples, &b.config, false, None, false)?));
        }
        let descriptors = &cached.as_ref().expect("extracted").1;
        let predictions = classify_samples(b, descriptors)?;
        reports.push(evaluate(b, &predictions, &truths)?);
    }
    let pairs: Vec<(&str, &MetricsReport)> = reports.iter().map(|r| (r.classifier.as_str(), r)).collect();
    let comparison = ComparisonReport::new(first.labels(), &first.train_counts, &pairs)?;
    Ok(EvalOutput { reports, comparison })
}

/// `evaluate_layout` on the dataset under `data`, reports written to `out`.
pub fn run_eval(bundle_paths: &[PathBuf], data: &Path, out: &Path, cfg: &PipelineConfig) -> Result<EvalOutput> {
    let bundles = bundle_paths.iter().map(|p| TrainedBundle::load(p)).collect::<Result<Vec<_>>>()?;
    with_workers(cfg.workers, || {
        let pattern = bundles.first().map_or(cfg.pattern.as_str(), |b| b.config.pattern.as_str());
        let layout = DatasetLayout::scan(data, pattern)?;
        let output = evaluate_layout(&bundles, &layout)?;
        output.write(out, cfg.report_format)?;
        Ok(output)
    })?
}

/// Writes a synthetic dataset under `dest` and returns its layout.
pub fn run_synth(dest: &Path, params: &SynthParams, cfg: &PipelineConfig) -> Result<DatasetLayout> {
    with_workers(cfg.workers, || {
        write_synthetic(dest, params)?;
        DatasetLayout::scan(dest, crate::imaging::DEFAULT_PATTERN)
    })?
}
