use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use serde_json::{json, Value};

use ritescene::evalreport::ReportFormat;
use ritescene::pipeline::synth::SynthParams;
use ritescene::pipeline::{self, parse_assignment, PipelineConfig};
use ritescene::Error;

const USAGE: u8 = 1;
const IO: u8 = 2;
const DATA: u8 = 3;
const INTERNAL: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "ritescene", version, about = "Classify ritual locations in video from background scene features")]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON config file (defaults to $RITESCENE_CONFIG).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads (0: one per core).
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
    /// Override any config key, e.g. `--set svm.c=10`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args, Debug, Clone, Default)]
struct ShotFlags {
    /// Frame step between compared frames (shot.k).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    motion_threshold: Option<f64>,
    #[arg(long)]
    block_threshold: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
struct SegmentFlags {
    /// Frames used to fit the background model (bg.training_frames).
    #[arg(long)]
    training_frames: Option<usize>,
    /// Correlation distance threshold (bg.threshold).
    #[arg(long)]
    threshold: Option<f64>,
    /// Frame file glob inside sample directories (io.pattern).
    #[arg(long)]
    pattern: Option<String>,
}

#[derive(Args, Debug, Clone, Default)]
struct TrainFlags {
    /// knn, ann or svm (classifier.kind).
    #[arg(long)]
    classifier: Option<String>,
    /// Dictionary size (dict.m).
    #[arg(long)]
    atoms: Option<usize>,
    /// Sparsity weight (dict.lambda).
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Detect shots in a frame directory; writes shots.json and keyframes/.
    Shots {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        shot: ShotFlags,
    },
    /// Background, mask and foreground images for every keyframe.
    Segment {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        shot: ShotFlags,
        #[command(flatten)]
        seg: SegmentFlags,
    },
    /// Dump shots, keyframe images and SIFT descriptors for every sample.
    Features {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        shot: ShotFlags,
        #[command(flatten)]
        seg: SegmentFlags,
        /// Reuse descriptors already dumped under --out.
        #[arg(long)]
        resume: bool,
    },
    /// Train on a labeled dataset; writes bundle.json under --out.
    Train {
        data: PathBuf,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        shot: ShotFlags,
        #[command(flatten)]
        seg: SegmentFlags,
        #[command(flatten)]
        train: TrainFlags,
        /// Also write every intermediate artifact under <out>/dump.
        #[arg(long)]
        dump: bool,
        /// Reuse descriptors from <out>/dump.
        #[arg(long, requires = "dump")]
        resume: bool,
    },
    /// Label every sample under INPUT; prints one JSON record per sample.
    Classify {
        input: PathBuf,
        #[arg(long, value_name = "FILE")]
        bundle: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate one or more bundles on a labeled dataset.
    Eval {
        data: PathBuf,
        /// Trained bundle; repeat to compare classifiers.
        #[arg(long, value_name = "FILE", required = true)]
        bundle: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
        /// csv or json (report.format).
        #[arg(long)]
        format: Option<String>,
    },
    /// Write a synthetic six-class dataset under --out.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10)]
        samples_per_class: usize,
        #[arg(long, default_value_t = 60)]
        frames: usize,
        #[arg(long, default_value_t = 160)]
        width: usize,
        #[arg(long, default_value_t = 120)]
        height: usize,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => USAGE,
            Failure::Run(e) => match e {
                Error::Io { .. } | Error::Empty(_) => IO,
                Error::Decode { .. } | Error::Format(_) | Error::Dimension(_) | Error::Training(_) => DATA,
                Error::InvalidParam(_) => USAGE,
                Error::ColorSpace { .. } => INTERNAL,
            },
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => f.write_str(m),
            Failure::Run(e) => write!(f, "{e}"),
        }
    }
}

fn push<T: Into<Value>>(out: &mut Vec<(String, Value)>, key: &str, v: Option<T>) {
    if let Some(v) = v {
        out.push((key.to_string(), v.into()));
    }
}

impl ShotFlags {
    fn overrides(&self, out: &mut Vec<(String, Value)>) {
        push(out, "shot.k", self.k);
        push(out, "shot.motion_threshold", self.motion_threshold);
        push(out, "shot.block_threshold", self.block_threshold);
    }
}

impl SegmentFlags {
    fn overrides(&self, out: &mut Vec<(String, Value)>) {
        push(out, "bg.training_frames", self.training_frames);
        push(out, "bg.threshold", self.threshold);
        push(out, "io.pattern", self.pattern.clone());
    }
}

impl TrainFlags {
    fn overrides(&self, out: &mut Vec<(String, Value)>) {
        push(out, "classifier.kind", self.classifier.clone());
        push(out, "dict.m", self.atoms);
        push(out, "dict.lambda", self.lambda);
    }
}

/// Config from defaults, then the config file, then command flags, then `--set`.
fn resolve(common: &Common, flags: Vec<(String, Value)>) -> Result<PipelineConfig, Failure> {
    let mut overrides = flags;
    push(&mut overrides, "seed", common.seed);
    push(&mut overrides, "workers", common.workers);
    for s in &common.set {
        overrides.push(parse_assignment(s)?);
    }
    let cfg = PipelineConfig::resolve(common.config.as_deref(), &overrides)?;
    info!("config: {}", cfg.to_json().trim_end());
    Ok(cfg)
}

fn out_dir(common: &Common) -> Result<&Path, Failure> {
    common.out.as_deref().ok_or_else(|| Failure::Usage("--out DIR is required".into()))
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string(v).expect("json serializes"));
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Shots { input, common, shot } => {
            let mut o = Vec::new();
            shot.overrides(&mut o);
            let cfg = resolve(&common, o)?;
            let shots = pipeline::run_preprocess(&input, out_dir(&common)?, &cfg)?;
            print_json(&json!({"frames": shots.frame_count, "shots": shots.shots.len(), "boundaries": shots.boundaries()}));
        }
        Command::Segment { input, common, shot, seg } => {
            let mut o = Vec::new();
            shot.overrides(&mut o);
            seg.overrides(&mut o);
            let cfg = resolve(&common, o)?;
            let keyframes = pipeline::run_segment(&input, out_dir(&common)?, &cfg)?;
            for kf in &keyframes {
                print_json(&json!({
                    "keyframe": kf.index,
                    "foreground_fraction": kf.mask.foreground_fraction(),
                    "fallback": kf.fallback,
                }));
            }
        }
        Command::Features { input, common, shot, seg, resume } => {
            let mut o = Vec::new();
            shot.overrides(&mut o);
            seg.overrides(&mut o);
            let cfg = resolve(&common, o)?;
            for (sample, d) in pipeline::run_features(&input, out_dir(&common)?, &cfg, resume)? {
                print_json(&json!({
                    "sample": sample.key().to_string_lossy(),
                    "shots": d.shots.shots.len(),
                    "background": d.background.len(),
                    "foreground": d.foreground.len(),
                }));
            }
        }
        Command::Train { data, common, shot, seg, train, dump, resume } => {
            let mut o = Vec::new();
            shot.overrides(&mut o);
            seg.overrides(&mut o);
            train.overrides(&mut o);
            let cfg = resolve(&common, o)?;
            let out = out_dir(&common)?;
            std::fs::create_dir_all(out).map_err(|e| Error::Io { path: out.to_path_buf(), source: e })?;
            let bundle_path = out.join("bundle.json");
            let dump_dir = dump.then(|| out.join("dump"));
            let output = pipeline::run_train(&data, &bundle_path, &cfg, dump_dir.as_deref(), resume)?;
            print_json(&json!({
                "bundle": bundle_path.to_string_lossy(),
                "classifier": output.bundle.model.kind().name(),
                "samples": output.features.len(),
                "training_accuracy": output.training_accuracy,
            }));
        }
        Command::Classify { input, bundle, common } => {
            let cfg = resolve(&common, Vec::new())?;
            let records = pipeline::run_classify(&bundle, &input, &cfg)?;
            let mut text = String::new();
            for r in &records {
                text += &serde_json::to_string(r).expect("json serializes");
                text.push('\n');
            }
            print!("{text}");
            if let Some(out) = &common.out {
                let path = out.join("predictions.jsonl");
                std::fs::create_dir_all(out)
                    .and_then(|_| std::fs::write(&path, &text))
                    .map_err(|e| Error::Io { path, source: e })?;
            }
        }
        Command::Eval { data, bundle, common, format } => {
            let mut o = Vec::new();
            push(&mut o, "report.format", format);
            let cfg = resolve(&common, o)?;
            let output = pipeline::run_eval(&bundle, &data, out_dir(&common)?, &cfg)?;
            print!("{}", output.comparison.emit(ReportFormat::Csv));
        }
        Command::Synth { common, samples_per_class, frames, width, height } => {
            let cfg = resolve(&common, Vec::new())?;
            let params = SynthParams { seed: cfg.seed, samples_per_class, frames, width, height };
            let layout = pipeline::run_synth(out_dir(&common)?, &params, &cfg)?;
            print_json(&json!({"samples": layout.samples.len(), "labels": layout.labels()}));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match std::panic::catch_unwind(|| run(cli.command)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(f)) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
        Err(_) => ExitCode::from(INTERNAL),
    }
}
