use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ritescene::classify::ClassifierKind;
use ritescene::encoding::pool_codes;
use ritescene::error::Error;
use ritescene::imaging::{encode_ppm, FrameSequence};
use ritescene::pipeline::synth::{cut_video, frame_name, moving_square, render_clip, write_synthetic, Pattern, Scene, SynthParams, NOISE};
use ritescene::pipeline::*;
use ritescene::shotseg::{detect_shots, parse_shots, ShotList};
use serde_json::json;

fn small_params() -> SynthParams {
    SynthParams { seed: 11, samples_per_class: 2, frames: 40, width: 96, height: 72 }
}

fn small_config(kind: ClassifierKind) -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.dict_m = 32;
    cfg.dict_iterations = 5;
    cfg.dict_max_samples = 1500;
    cfg.classifier.kind = kind;
    cfg.classifier.knn_k = 1;
    cfg
}

/// Two samples per class written once and shared by the tests below.
fn dataset() -> &'static Path {
    static DIR: OnceLock<tempfile::TempDir> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        write_synthetic(dir.path(), &small_params()).unwrap();
        dir
    })
    .path()
}

fn layout() -> DatasetLayout {
    DatasetLayout::scan(dataset(), &PipelineConfig::default().pattern).unwrap()
}

fn descriptors() -> &'static Vec<SampleDescriptors> {
    static D: OnceLock<Vec<SampleDescriptors>> = OnceLock::new();
    D.get_or_init(|| extract_all(&layout().samples, &small_config(ClassifierKind::Knn), false, None, false).unwrap())
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn config_precedence_three_way() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("cfg.json");
    std::fs::write(&file, r#"{"shot.k": 7, "svm.c": 3.0}"#).unwrap();
    let overrides = vec![parse_assignment("svm.c=5").unwrap()];
    let cfg = PipelineConfig::resolve(Some(&file), &overrides).unwrap();
    assert_eq!(cfg.shot.k, 7);
    assert_eq!(cfg.get("svm.c"), Some(json!(5.0)));
    assert_eq!(cfg.dict_m, PipelineConfig::default().dict_m);

    std::env::set_var(CONFIG_ENV, &file);
    let from_env = PipelineConfig::resolve(None, &[]).unwrap();
    std::env::remove_var(CONFIG_ENV);
    assert_eq!(from_env.shot.k, 7);
    assert_eq!(from_env.get("svm.c"), Some(json!(3.0)));
}

#[test]
fn unknown_and_out_of_range_keys_are_rejected() {
    let mut cfg = PipelineConfig::default();
    assert!(cfg.set("shot.kk", &json!(3)).is_err());
    assert!(PipelineConfig::from_json(r#"{"bogus": 1}"#).is_err());
    assert!(PipelineConfig::resolve(None, &[parse_assignment("bg.window=4").unwrap()]).is_err());
    assert!(parse_assignment("novalue").is_err());
}

#[test]
fn config_json_round_trips_every_key() {
    let cfg = PipelineConfig::resolve(None, &[parse_assignment("classifier.kind=svm").unwrap(), parse_assignment("seed=9").unwrap()]).unwrap();
    let back = PipelineConfig::from_json(&cfg.to_json()).unwrap();
    assert_eq!(back, cfg);
    for key in KEYS {
        assert!(cfg.get(key).is_some(), "{key}");
    }
}

#[test]
fn generator_writes_expected_tree_deterministically() {
    let params = SynthParams { seed: 42, samples_per_class: 2, frames: 60, width: 64, height: 48 };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_synthetic(a.path(), &params).unwrap();
    write_synthetic(b.path(), &params).unwrap();
    let (ta, tb) = (tree(a.path()), tree(b.path()));
    assert_eq!(ta.len(), 6 * 2 * 60);
    assert!(ta == tb, "trees differ");
    let layout = DatasetLayout::scan(a.path(), &PipelineConfig::default().pattern).unwrap();
    assert_eq!(layout.samples.len(), 12);
    assert_eq!(layout.labels().len(), 6);
}

fn mean_abs_diff(a: &ritescene::imaging::Frame, b: &ritescene::imaging::Frame) -> f64 {
    let n = a.len() as f64 * 3.0;
    (0..3).map(|c| a.plane(c).iter().zip(b.plane(c)).map(|(x, y)| (x - y).abs()).sum::<f64>()).sum::<f64>() / n
}

#[test]
fn inter_class_difference_exceeds_intra_class() {
    let params = SynthParams { seed: 5, samples_per_class: 4, frames: 1, width: 96, height: 72 };
    let frames: Vec<Vec<_>> = (0..6)
        .map(|c| (0..4).map(|i| synth::synthetic_sample(&params, c, i).frames.remove(0)).collect())
        .collect();
    let (mut intra, mut ni, mut inter, mut nx) = (0.0, 0, 0.0, 0);
    for c in 0..6 {
        for d in c..6 {
            for i in 0..4 {
                for j in 0..4 {
                    if c == d && j <= i {
                        continue;
                    }
                    let v = mean_abs_diff(&frames[c][i], &frames[d][j]);
                    if c == d {
                        intra += v;
                        ni += 1;
                    } else {
                        inter += v;
                        nx += 1;
                    }
                }
            }
        }
    }
    let (intra, inter) = (intra / ni as f64, inter / nx as f64);
    assert!(inter > intra, "inter {inter} intra {intra}");
}

fn write_frames(dir: &Path, frames: &[ritescene::imaging::Frame]) {
    std::fs::create_dir_all(dir).unwrap();
    for (t, f) in frames.iter().enumerate() {
        std::fs::write(dir.join(frame_name(t)), encode_ppm(f).unwrap()).unwrap();
    }
}

#[test]
fn two_scene_video_gives_two_shots_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let (frames, cuts) = cut_video(3, 2, 40, 50, 96, 72);
    write_frames(&dir.path().join("in"), &frames);
    let out = dir.path().join("out");
    let shots = run_preprocess(&dir.path().join("in"), &out, &PipelineConfig::default()).unwrap();
    assert_eq!(shots.shots.len(), 2);
    let k = PipelineConfig::default().shot.k;
    assert!(shots.boundaries()[0].abs_diff(cuts[0]) <= k);
    let text = std::fs::read_to_string(out.join(SHOTS_FILE)).unwrap();
    assert_eq!(parse_shots(&text).unwrap(), shots);
    let copied = std::fs::read_dir(out.join("keyframes")).unwrap().count();
    assert_eq!(copied, shots.keyframes().count());
}

#[test]
fn single_frame_is_one_shot_with_one_keyframe() {
    let dir = tempfile::tempdir().unwrap();
    let (frames, _) = cut_video(4, 1, 1, 1, 32, 24);
    write_frames(dir.path(), &frames);
    let shots = run_preprocess(dir.path(), &dir.path().join("out"), &PipelineConfig::default()).unwrap();
    assert_eq!(shots.shots.len(), 1);
    assert_eq!(shots.keyframes().collect::<Vec<_>>(), vec![0]);
}

#[test]
fn unreadable_input_is_an_io_error() {
    let err = run_preprocess(Path::new("/nonexistent/ritescene"), Path::new("/tmp/unused"), &PipelineConfig::default()).unwrap_err();
    assert!(matches!(err, Error::Io { .. }), "{err:?}");
}

fn sequence(frames: Vec<ritescene::imaging::Frame>) -> FrameSequence {
    FrameSequence::from_frames(frames).unwrap()
}

#[test]
fn static_noise_free_scene_has_empty_masks() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cfg = PipelineConfig::default();
    for p in Pattern::ALL {
        let scene = Scene::random(p, 0.6, 96, 72, &mut rng);
        let seq = sequence(render_clip(&scene, &[], 45, 96, 72, 0.0, &mut rng));
        let shots = ShotList::from_boundaries(45, &[], cfg.shot.k);
        for kf in segment_keyframes(&seq, &shots, &cfg).unwrap() {
            assert!(!kf.fallback);
            assert!(kf.mask.foreground_fraction() < 0.01, "{p:?} {}", kf.mask.foreground_fraction());
        }
    }
}

fn iou(mask: &ritescene::bgfg::ForegroundMask, corner: (usize, usize), size: usize) -> f64 {
    let (w, h) = mask.dims();
    let (mut inter, mut union) = (0, 0);
    for y in 0..h {
        for x in 0..w {
            let truth = (corner.0..corner.0 + size).contains(&x) && (corner.1..corner.1 + size).contains(&y);
            let fg = mask.is_foreground(x, y);
            inter += usize::from(truth && fg);
            union += usize::from(truth || fg);
        }
    }
    inter as f64 / union as f64
}

#[test]
fn foreground_mask_tracks_moving_square() {
    let (frames, truth) = moving_square(1, 30, 20, 120, 90, 36, 0.45);
    let seq = sequence(frames);
    let mut cfg = PipelineConfig::default();
    cfg.shot.k = 1;
    let shots = ShotList::from_boundaries(seq.len(), &[], 1);
    for kf in segment_keyframes(&seq, &shots, &cfg).unwrap() {
        match truth[kf.index] {
            Some(corner) => assert!(iou(&kf.mask, corner, 36) > 0.85, "frame {}", kf.index),
            None => assert!(kf.mask.foreground_fraction() < 0.01),
        }
    }
}

#[test]
fn short_shot_takes_fallback_path() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let scene = Scene::random(Pattern::Checkers, 0.1, 48, 36, &mut rng);
    let seq = sequence(render_clip(&scene, &[], 12, 48, 36, NOISE, &mut rng));
    let cfg = PipelineConfig::default();
    let shots = detect_shots(&seq, &cfg.shot).unwrap();
    let kfs = segment_keyframes(&seq, &shots, &cfg).unwrap();
    assert!(!kfs.is_empty());
    for kf in kfs {
        assert!(kf.fallback);
        assert_eq!(kf.background, *kf.frame);
        assert_eq!(kf.mask.foreground_count(), 0);
    }
}

#[test]
fn segment_writes_background_mask_and_foreground_images() {
    let dir = tempfile::tempdir().unwrap();
    let (frames, _) = moving_square(2, 30, 15, 64, 48, 16, 0.45);
    write_frames(&dir.path().join("in"), &frames);
    let out = dir.path().join("out");
    let kfs = run_segment(&dir.path().join("in"), &out, &PipelineConfig::default()).unwrap();
    let names: Vec<String> = std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    for kf in &kfs {
        for suffix in ["background.ppm", "mask.pgm", "foreground.ppm"] {
            let name = format!("keyframe_{:04}_{suffix}", kf.index);
            assert!(names.contains(&name), "{name} missing from {names:?}");
        }
    }
}

#[test]
fn knn_k1_replays_its_training_samples() {
    let layout = layout();
    let out = train_bundle(descriptors(), &layout.truths(), &small_config(ClassifierKind::Knn)).unwrap();
    assert_eq!(out.bundle.model.kind(), ClassifierKind::Knn);
    let predictions = classify_samples(&out.bundle, descriptors()).unwrap();
    for (p, t) in predictions.iter().zip(layout.truths()) {
        assert_eq!(p.label, t);
    }
    assert_eq!(out.training_accuracy, 100.0);
}

#[test]
fn shared_dictionary_equals_separate_training() {
    let layout = layout();
    let cfg = small_config(ClassifierKind::Svm);
    let direct = train_bundle(descriptors(), &layout.truths(), &cfg).unwrap();
    let (dictionary, _) = learn_codebook(descriptors(), &cfg).unwrap();
    let features = pool_features(&dictionary, descriptors()).unwrap();
    let staged = train_classifier(dictionary, features, &layout.truths(), &cfg).unwrap();
    assert_eq!(direct.bundle.to_json(), staged.bundle.to_json());
}

#[test]
fn bundle_round_trips_and_checks_version() {
    let out = train_bundle(descriptors(), &layout().truths(), &small_config(ClassifierKind::Svm)).unwrap();
    let text = out.bundle.to_json();
    let back = TrainedBundle::from_json(&text).unwrap();
    assert_eq!(back.to_json(), text);
    assert_eq!(classify_samples(&back, descriptors()).unwrap(), classify_samples(&out.bundle, descriptors()).unwrap());

    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    doc["version"] = json!(BUNDLE_VERSION + 1);
    assert!(matches!(TrainedBundle::from_json(&doc.to_string()), Err(Error::Format(_))));
    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    doc["config"]["dict.m"] = json!(16);
    assert!(TrainedBundle::from_json(&doc.to_string()).is_err());
    assert!(TrainedBundle::from_json(&text[..text.len() / 2]).is_err());
}

#[test]
fn bundle_snapshot_omits_runtime_keys() {
    let mut cfg = small_config(ClassifierKind::Knn);
    cfg.workers = 3;
    let out = train_bundle(descriptors(), &layout().truths(), &cfg).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&out.bundle.to_json()).unwrap();
    for key in RUNTIME_KEYS {
        assert!(doc["config"].get(key).is_none(), "{key}");
    }
    assert_eq!(doc["version"], json!(1));
}

#[test]
fn resume_from_dump_equals_straight_run() {
    let cfg = small_config(ClassifierKind::Svm);
    let layout = layout();
    let dump = tempfile::tempdir().unwrap();
    let straight = train_layout(&layout, &cfg, None, false).unwrap();
    let dumped = train_layout(&layout, &cfg, Some(dump.path()), false).unwrap();
    let resumed = train_layout(&layout, &cfg, Some(dump.path()), true).unwrap();
    assert_eq!(straight.bundle.to_json(), dumped.bundle.to_json());
    assert_eq!(straight.bundle.to_json(), resumed.bundle.to_json());

    let first = layout.samples[0].key();
    assert!(dump.path().join(&first).join(SHOTS_FILE).is_file());
    assert!(dump.path().join(&first).join(BACKGROUND_DESCRIPTORS).is_file());
    assert!(dump.path().join(&first).join(FOREGROUND_DESCRIPTORS).is_file());
    for (i, s) in layout.samples.iter().enumerate() {
        let codes = read_codes(&dump.path().join(s.key()).join(CODES_FILE)).unwrap();
        assert_eq!(pool_codes(&codes, cfg.dict_m).unwrap(), straight.features[i]);
    }

    let mut other = cfg.clone();
    other.sift.contrast_threshold = 0.04;
    assert!(train_layout(&layout, &other, Some(dump.path()), true).is_err());
}

#[test]
fn retraining_gives_identical_bundle_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(ClassifierKind::Ann);
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    run_train(dataset(), &a, &cfg, None, false).unwrap();
    let mut two = cfg.clone();
    two.workers = 2;
    run_train(dataset(), &b, &two, None, false).unwrap();
    assert!(std::fs::read(&a).unwrap() == std::fs::read(&b).unwrap());
}

#[test]
fn perfect_split_and_mislabel_perturbation() {
    let layout = layout();
    let out = train_bundle(descriptors(), &layout.truths(), &small_config(ClassifierKind::Knn)).unwrap();
    let eval = evaluate_layout(std::slice::from_ref(&out.bundle), &layout).unwrap();
    let report = &eval.reports[0];
    for l in report.labels() {
        let m = report.class(&l).unwrap();
        assert_eq!(m.precision, Some(100.0));
        assert_eq!(m.recall, Some(100.0));
    }

    let predictions = classify_samples(&out.bundle, descriptors()).unwrap();
    let mut truths = layout.truths();
    let victim = truths.iter().position(|t| t == "say").unwrap();
    truths[victim] = "tawaf".into();
    let perturbed = evaluate(&out.bundle, &predictions, &truths).unwrap();
    let tawaf = perturbed.class("tawaf").unwrap();
    let before = report.class("tawaf").unwrap();
    assert_eq!(tawaf.counts.correct, before.counts.correct);
    assert_eq!(tawaf.counts.miss, before.counts.miss + 1);
    let expected = 100.0 * before.counts.correct as f64 / (before.counts.correct + 1) as f64;
    assert!((tawaf.recall.unwrap() - expected).abs() < 1e-9);
}

#[test]
fn three_classifier_comparison_and_classify_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let mut paths = Vec::new();
    for kind in [ClassifierKind::Ann, ClassifierKind::Knn, ClassifierKind::Svm] {
        let path = dir.path().join(format!("{}.json", kind.name()));
        let out = train_bundle(descriptors(), &layout().truths(), &small_config(kind)).unwrap();
        out.bundle.save(&path).unwrap();
        paths.push(path);
    }
    let reports = dir.path().join("reports");
    let eval = run_eval(&paths, dataset(), &reports, &PipelineConfig::default()).unwrap();
    assert_eq!(eval.reports.len(), 3);
    let csv = std::fs::read_to_string(reports.join("comparison.csv")).unwrap();
    assert!(csv.starts_with("Event,TrainN,TestN,ANN,KNN,SVM\n"), "{csv}");
    for kind in ["ann", "knn", "svm"] {
        assert!(reports.join(format!("metrics_{kind}.csv")).is_file());
    }
    assert!(run_eval(&[paths[0].clone(), paths[0].clone()], dataset(), &reports, &PipelineConfig::default()).is_err());

    let sample = layout().samples[3].clone();
    let SampleSource::Dir(sample_dir) = &sample.source else { panic!("disk sample") };
    let records = run_classify(&paths[1], sample_dir, &PipelineConfig::default()).unwrap();
    assert_eq!(records.len(), 1);
    assert_eq!(Some(&records[0].label), sample.label.as_ref());

    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{\"version\": 1, \"labels\": [").unwrap();
    assert!(run_classify(&broken, sample_dir, &PipelineConfig::default()).is_err());
}

#[test]
fn in_memory_samples_match_disk_samples() {
    let params = small_params();
    let s = synth::synthetic_sample(&params, 2, 1);
    let mem = Sample { label: Some(s.label.clone()), name: s.name.clone(), source: SampleSource::Frames(Arc::new(s.frames)) };
    let lazy = DatasetLayout::synthetic(&params, 1..2).samples.remove(2);
    let disk = layout().samples.into_iter().find(|d| d.key() == mem.key()).unwrap();
    let cfg = small_config(ClassifierKind::Knn);
    let got = extract_all(&[mem, lazy, disk], &cfg, false, None, false).unwrap();
    assert_eq!(got[0], got[1]);
    assert_eq!(got[0], got[2]);
}
