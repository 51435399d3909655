use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::imaging::{load_sequence, Frame, FrameSequence};

use super::synth::{synthetic_sample, SynthParams};

/// Where a sample's frames come from.
#[derive(Debug, Clone)]
pub enum SampleSource {
    /// Directory of frame files matching the configured pattern.
    Dir(PathBuf),
    Frames(Arc<Vec<Frame>>),
    /// Generated on demand: sample `index` of class `class`.
    Synthetic { params: SynthParams, class: usize, index: usize },
}

impl SampleSource {
    pub fn sequence(&self, pattern: &str, fps: f64) -> Result<FrameSequence> {
        let seq = match self {
            SampleSource::Dir(dir) => load_sequence(dir, pattern)?,
            SampleSource::Frames(frames) => FrameSequence::from_frames(frames.to_vec())?,
            SampleSource::Synthetic { params, class, index } => {
                FrameSequence::from_frames(synthetic_sample(params, *class, *index).frames)?
            }
        };
        if seq.is_empty() {
            return Err(Error::Empty(format!("{}: no frames", self.describe())));
        }
        Ok(seq.with_fps(fps))
    }

    pub fn describe(&self) -> String {
        match self {
            SampleSource::Dir(d) => d.display().to_string(),
            SampleSource::Frames(_) => "<memory>".into(),
            SampleSource::Synthetic { class, index, .. } => format!("<synthetic {class}/{index}>"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Sample {
    pub label: Option<String>,
    pub name: String,
    pub source: SampleSource,
}

impl Sample {
    /// Relative path used for per-sample outputs: `label/name` or `name`.
    pub fn key(&self) -> PathBuf {
        match &self.label {
            Some(l) => Path::new(l).join(&self.name),
            None => PathBuf::from(&self.name),
        }
    }
}

/// Labeled samples: one subdirectory per label, each holding sample
/// directories of frames.
#[derive(Debug, Clone)]
pub struct DatasetLayout {
    pub samples: Vec<Sample>,
}

fn has_frames(dir: &Path, pattern: &glob::Pattern) -> Result<bool> {
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        if entry.file_name().to_str().is_some_and(|n| pattern.matches(n)) && entry.path().is_file() {
            return Ok(true);
        }
    }
    Ok(false)
}

fn subdirs(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.is_dir() {
            if let Some(name) = entry.file_name().to_str() {
                out.push((name.to_string(), path));
            }
        }
    }
    out.sort();
    Ok(out)
}

fn file_name(path: &Path) -> String {
    path.file_name().and_then(|n| n.to_str()).unwrap_or("sample").to_string()
}

/// Finds samples under `root`: `root` itself if it holds frames, else each
/// subdirectory holding frames (unlabeled), else `label/sample` directories.
/// Directories are visited in byte order of their names.
pub fn discover_samples(root: &Path, pattern: &str) -> Result<Vec<Sample>> {
    let pat = glob::Pattern::new(pattern).map_err(|e| Error::InvalidParam(format!("bad pattern {pattern:?}: {e}")))?;
    if has_frames(root, &pat)? {
        return Ok(vec![Sample { label: None, name: file_name(root), source: SampleSource::Dir(root.to_path_buf()) }]);
    }
    let mut out = Vec::new();
    for (name, dir) in subdirs(root)? {
        if has_frames(&dir, &pat)? {
            out.push(Sample { label: None, name, source: SampleSource::Dir(dir) });
            continue;
        }
        for (sample, sdir) in subdirs(&dir)? {
            if has_frames(&sdir, &pat)? {
                out.push(Sample { label: Some(name.clone()), name: sample, source: SampleSource::Dir(sdir) });
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Empty(format!("{}: no frames matching {pattern:?}", root.display())));
    }
    Ok(out)
}

impl DatasetLayout {
    pub fn scan(root: &Path, pattern: &str) -> Result<DatasetLayout> {
        let samples = discover_samples(root, pattern)?;
        if let Some(s) = samples.iter().find(|s| s.label.is_none()) {
            return Err(Error::InvalidParam(format!(
                "{}: {} is not inside a label directory",
                root.display(),
                s.source.describe()
            )));
        }
        Ok(DatasetLayout { samples })
    }

    pub fn from_samples(samples: Vec<Sample>) -> Result<DatasetLayout> {
        if samples.is_empty() {
            return Err(Error::Empty("dataset has no samples".into()));
        }
        if samples.iter().any(|s| s.label.is_none()) {
            return Err(Error::InvalidParam("every dataset sample needs a label".into()));
        }
        Ok(DatasetLayout { samples })
    }

    /// Synthetic samples `range` of every class, generated lazily.
    pub fn synthetic(params: &SynthParams, range: std::ops::Range<usize>) -> DatasetLayout {
        let samples = (0..super::synth::DEFAULT_CLASSES.len())
            .flat_map(|class| {
                range.clone().map(move |index| (class, index))
            })
            .map(|(class, index)| Sample {
                label: Some(super::synth::DEFAULT_CLASSES[class].to_string()),
                name: super::synth::sample_name(index),
                source: SampleSource::Synthetic { params: params.clone(), class, index },
            })
            .collect();
        DatasetLayout { samples }
    }

    pub fn labels(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for s in &self.samples {
            let l = s.label.as_ref().expect("labeled");
            if !out.contains(l) {
                out.push(l.clone());
            }
        }
        out
    }

    pub fn truths(&self) -> Vec<String> {
        self.samples.iter().map(|s| s.label.clone().expect("labeled")).collect()
    }
}
