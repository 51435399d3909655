//! End-to-end pipeline: shot detection, background modelling, SIFT on the
//! background image of every keyframe, sparse coding with max pooling, and
//! classification of one pooled vector per sample.

mod bundle;
mod config;
mod dataset;
mod stages;
pub mod synth;

pub use bundle::{TrainedBundle, BUNDLE_VERSION};
pub use config::{parse_assignment, parse_value, PipelineConfig, CONFIG_ENV, DEFAULT_MAX_SAMPLES, KEYS, RUNTIME_KEYS};
pub use dataset::{discover_samples, DatasetLayout, Sample, SampleSource};
pub use stages::{
    classify_samples, describe_sample, evaluate, evaluate_layout, extract_all, learn_codebook, pool_features, read_codes, run_classify, run_eval,
    run_features, run_preprocess, run_segment, run_synth, run_train, segment_keyframes, train_bundle, train_classifier, train_layout,
    with_workers, ClassifyRecord, EvalOutput, KeyframeResult, SampleDescriptors, TrainOutput, BACKGROUND_DESCRIPTORS,
    CODES_FILE, EXTRACT_STAMP, FOREGROUND_DESCRIPTORS, SHOTS_FILE,
};
