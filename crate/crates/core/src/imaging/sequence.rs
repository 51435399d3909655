use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use super::frame::Frame;
use super::pnm::decode_ppm;
use crate::error::{Error, Result};

pub const DEFAULT_PATTERN: &str = "frame_*.ppm";
pub const DEFAULT_FPS: f64 = 30.0;

#[derive(Debug)]
enum Slot {
    File { path: PathBuf, cell: OnceLock<Arc<Frame>> },
    Memory(Arc<Frame>),
}

/// Ordered frames of one clip. File-backed frames decode on first access.
#[derive(Debug)]
pub struct FrameSequence {
    slots: Vec<Slot>,
    fps: f64,
    dims: OnceLock<(usize, usize)>,
}

impl FrameSequence {
    pub fn from_frames(frames: Vec<Frame>) -> Result<Self> {
        if let Some(first) = frames.first() {
            for f in &frames[1..] {
                first.expect_same_dims(f)?;
            }
        }
        let dims = OnceLock::new();
        if let Some(f) = frames.first() {
            let _ = dims.set(f.dims());
        }
        Ok(FrameSequence {
            slots: frames.into_iter().map(|f| Slot::Memory(Arc::new(f))).collect(),
            fps: DEFAULT_FPS,
            dims,
        })
    }

    pub fn from_paths(paths: Vec<PathBuf>) -> Self {
        FrameSequence {
            slots: paths.into_iter().map(|path| Slot::File { path, cell: OnceLock::new() }).collect(),
            fps: DEFAULT_FPS,
            dims: OnceLock::new(),
        }
    }

    pub fn with_fps(mut self, fps: f64) -> Self {
        self.fps = fps;
        self
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn path(&self, index: usize) -> Option<&Path> {
        match &self.slots[index] {
            Slot::File { path, .. } => Some(path),
            Slot::Memory(_) => None,
        }
    }

    /// Frame `index`, decoding it if needed. Fails if its size differs from the
    /// first frame's.
    pub fn get(&self, index: usize) -> Result<Arc<Frame>> {
        let slot = self
            .slots
            .get(index)
            .ok_or_else(|| Error::InvalidParam(format!("frame index {index} out of range 0..{}", self.len())))?;
        match slot {
            Slot::Memory(f) => Ok(f.clone()),
            Slot::File { path, cell } => {
                if let Some(f) = cell.get() {
                    return Ok(f.clone());
                }
                if index != 0 && self.dims.get().is_none() {
                    self.get(0)?;
                }
                let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
                let frame = decode_ppm(&bytes).map_err(|e| match e {
                    Error::Decode { offset, message } => {
                        Error::decode(offset, format!("{}: {message}", path.display()))
                    }
                    other => other,
                })?;
                let expected = *self.dims.get_or_init(|| frame.dims());
                if frame.dims() != expected {
                    return Err(Error::Dimension(format!(
                        "{} is {}x{}, sequence frames are {}x{}",
                        path.display(),
                        frame.width(),
                        frame.height(),
                        expected.0,
                        expected.1
                    )));
                }
                Ok(cell.get_or_init(|| Arc::new(frame)).clone())
            }
        }
    }

    /// Decode every frame, in order.
    pub fn load_all(&self) -> Result<Vec<Arc<Frame>>> {
        (0..self.len()).map(|i| self.get(i)).collect()
    }
}

/// Collect files in `dir` whose names match `pattern`, sorted by byte order of
/// the file name. Frames are decoded lazily.
pub fn load_sequence(dir: &Path, pattern: &str) -> Result<FrameSequence> {
    let matcher = glob::Pattern::new(pattern)
        .map_err(|e| Error::InvalidParam(format!("bad filename pattern {pattern:?}: {e}")))?;
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut names = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        let Some(s) = name.to_str() else { continue };
        if matcher.matches(s) && entry.path().is_file() {
            names.push(s.to_owned());
        }
    }
    if names.is_empty() {
        return Err(Error::Empty(format!("no frames matched {pattern:?} in {}", dir.display())));
    }
    names.sort_unstable_by(|a, b| a.as_bytes().cmp(b.as_bytes()));
    Ok(FrameSequence::from_paths(names.into_iter().map(|n| dir.join(n)).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{encode_ppm, ColorSpace};

    fn write(dir: &Path, name: &str, w: usize, h: usize, v: f64) {
        let f = Frame::filled(w, h, ColorSpace::Rgb, &[v, v, v]).unwrap();
        std::fs::write(dir.join(name), encode_ppm(&f).unwrap()).unwrap();
    }

    #[test]
    fn orders_lexicographically() {
        let tmp = tempfile::tempdir().unwrap();
        write(tmp.path(), "frame_000003.ppm", 4, 4, 1.0);
        write(tmp.path(), "frame_000001.ppm", 4, 4, 0.0);
        write(tmp.path(), "frame_000002.ppm", 4, 4, 0.6);
        write(tmp.path(), "other.ppm", 4, 4, 0.6);
        let seq = load_sequence(tmp.path(), DEFAULT_PATTERN).unwrap();
        assert_eq!(seq.len(), 3);
        let first: Vec<f64> = seq.load_all().unwrap().iter().map(|f| f.at(0, 0, 0)).collect();
        assert_eq!(first, vec![0.0, 0.6, 1.0]);
        assert!(seq.path(0).unwrap().ends_with("frame_000001.ppm"));
    }

    #[test]
    fn empty_dir_is_an_error() {
        let tmp = tempfile::tempdir().unwrap();
        let err = load_sequence(tmp.path(), DEFAULT_PATTERN).unwrap_err();
        assert!(err.to_string().contains("no frames matched"), "{err}");
    }

    #[test]
    fn mixed_dimensions_name_the_file() {
        let tmp = tempfile::tempdir().unwrap();
        write(tmp.path(), "frame_000001.ppm", 64, 64, 0.0);
        write(tmp.path(), "frame_000002.ppm", 32, 32, 0.0);
        let seq = load_sequence(tmp.path(), DEFAULT_PATTERN).unwrap();
        let err = seq.load_all().unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
        assert!(err.to_string().contains("frame_000002.ppm"), "{err}");

        // Random access to the odd frame still checks against frame 0.
        let seq = load_sequence(tmp.path(), DEFAULT_PATTERN).unwrap();
        assert!(seq.get(1).is_err());
    }

    #[test]
    fn in_memory_sequences_check_dims() {
        let a = Frame::filled(2, 2, ColorSpace::Rgb, &[0.0; 3]).unwrap();
        let b = Frame::filled(3, 2, ColorSpace::Rgb, &[0.0; 3]).unwrap();
        assert!(FrameSequence::from_frames(vec![a.clone(), b]).is_err());
        let seq = FrameSequence::from_frames(vec![a.clone(), a]).unwrap();
        assert_eq!(seq.fps(), 30.0);
        assert!(seq.get(2).is_err());
    }
}
