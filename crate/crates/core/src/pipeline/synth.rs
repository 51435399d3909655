//! Procedural scenes for exercising the pipeline without recorded video.
//!
//! Each class owns a background structure (rings, stripes, blob fields,
//! gradients, checkers, radial spokes) whose geometry and colours are drawn per
//! sample. Small squares move over the background and every frame gets
//! independent noise. Frames are quantized to 8 bits so a clip written to disk
//! and read back is identical to the in-memory one.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::imaging::{encode_ppm, pixel_hsi_to_rgb, Frame};

pub const DEFAULT_CLASSES: [&str; 6] = ["tawaf", "say", "arafat", "muzdalifah", "mina", "jamarat"];
pub const NOISE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pattern {
    Rings,
    Stripes,
    Blobs,
    Gradient,
    Checkers,
    Spokes,
}

impl Pattern {
    pub const ALL: [Pattern; 6] =
        [Pattern::Rings, Pattern::Stripes, Pattern::Blobs, Pattern::Gradient, Pattern::Checkers, Pattern::Spokes];
}

/// A static textured background.
#[derive(Debug, Clone)]
pub struct Scene {
    pattern: Pattern,
    cx: f64,
    cy: f64,
    period: f64,
    angle: f64,
    phase: f64,
    count: usize,
    blobs: Vec<(f64, f64, f64, f64)>,
    dark: [f64; 3],
    light: [f64; 3],
}

fn hsi_color(h: f64, s: f64, i: f64) -> [f64; 3] {
    let (r, g, b) = pixel_hsi_to_rgb(h, s, i);
    [r, g, b]
}

impl Scene {
    /// Random geometry for `pattern`; colours built around `hue` (in turns).
    pub fn random(pattern: Pattern, hue: f64, width: usize, height: usize, rng: &mut impl Rng) -> Scene {
        let (w, h) = (width as f64, height as f64);
        let blobs = if pattern == Pattern::Blobs {
            let n = rng.gen_range(30..45);
            (0..n)
                .map(|_| {
                    let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                    (rng.gen_range(0.0..w), rng.gen_range(0.0..h), rng.gen_range(2.5..6.0), sign * rng.gen_range(0.5..1.0))
                })
                .collect()
        } else {
            Vec::new()
        };
        Scene {
            pattern,
            cx: w * rng.gen_range(0.35..0.65),
            cy: h * rng.gen_range(0.35..0.65),
            period: match pattern {
                Pattern::Rings => rng.gen_range(12.0..18.0),
                Pattern::Stripes => rng.gen_range(14.0..20.0),
                Pattern::Checkers => rng.gen_range(10.0..16.0),
                Pattern::Gradient => rng.gen_range(0.8..1.2) * w,
                _ => 1.0,
            },
            angle: rng.gen_range(0.0..PI),
            phase: rng.gen_range(0.0..2.0 * PI),
            count: rng.gen_range(8..15),
            blobs,
            dark: hsi_color(hue, rng.gen_range(0.5..0.8), rng.gen_range(0.08..0.14)),
            light: hsi_color(hue + rng.gen_range(0.05..0.1), rng.gen_range(0.2..0.35), rng.gen_range(0.8..0.9)),
        }
    }

    pub fn pattern(&self) -> Pattern {
        self.pattern
    }

    /// Texture value in `[0, 1]` at a pixel.
    pub fn texture(&self, x: f64, y: f64) -> f64 {
        let (dx, dy) = (x - self.cx, y - self.cy);
        let (c, s) = (self.angle.cos(), self.angle.sin());
        let (along, across) = (dx * c + dy * s, -dx * s + dy * c);
        let wave = |v: f64| 0.5 + 0.5 * v.cos();
        // Near-binary shapes: broadband edges and corners.
        let sharpen = |v: f64| (0.5 + 4.0 * (v - 0.5)).clamp(0.0, 1.0);
        let t = match self.pattern {
            // Rings broken into arcs.
            Pattern::Rings => {
                let r = dx.hypot(dy);
                let arcs = wave(self.count as f64 * dy.atan2(dx) + self.phase);
                sharpen(0.5 + (wave(2.0 * PI * r / self.period) - 0.5) * arcs)
            }
            // Parallel stripes cut into short dashes.
            Pattern::Stripes => {
                let stripe = wave(2.0 * PI * along / self.period + self.phase);
                let dash = wave(2.0 * PI * across / (1.6 * self.period));
                sharpen(0.5 + (stripe - 0.5) * dash)
            }
            Pattern::Blobs => {
                let v: f64 = self
                    .blobs
                    .iter()
                    .map(|&(bx, by, r, a)| a * (-((x - bx).powi(2) + (y - by).powi(2)) / (2.0 * r * r)).exp())
                    .sum();
                0.5 + 0.5 * v.clamp(-1.0, 1.0)
            }
            // A ramp with broad soft bumps.
            Pattern::Gradient => {
                let ramp = along / self.period;
                let bumps = 0.4 * (2.0 * PI * along / 32.0 + self.phase).sin() * (2.0 * PI * across / 32.0).sin();
                0.5 + 0.3 * ramp + bumps
            }
            Pattern::Checkers => {
                let u = (along / self.period + self.phase).floor() as i64;
                let v = (across / self.period).floor() as i64;
                if (u + v).rem_euclid(2) == 0 { 0.0 } else { 1.0 }
            }
            // Spokes cut into segments by concentric bands.
            Pattern::Spokes => {
                let r = dx.hypot(dy);
                let spoke = wave(self.count as f64 * dy.atan2(dx) + self.phase);
                let band = wave(2.0 * PI * r / 24.0);
                let fade = (r / 6.0).min(1.0);
                sharpen(0.5 + (spoke - 0.5) * fade * band)
            }
        };
        t.clamp(0.0, 1.0)
    }

    pub fn color(&self, x: f64, y: f64) -> [f64; 3] {
        let t = self.texture(x, y);
        std::array::from_fn(|c| self.dark[c] + t * (self.light[c] - self.dark[c]))
    }
}

/// A solid square moving with constant velocity, bouncing off the borders.
#[derive(Debug, Clone)]
pub struct Mover {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub size: usize,
    pub color: [f64; 3],
}

impl Mover {
    pub fn random(width: usize, height: usize, size: usize, rng: &mut impl Rng) -> Mover {
        let speed = rng.gen_range(1.0..2.5);
        let dir = rng.gen_range(0.0..2.0 * PI);
        Mover {
            x: rng.gen_range(0.0..(width - size) as f64),
            y: rng.gen_range(0.0..(height - size) as f64),
            vx: speed * dir.cos(),
            vy: speed * dir.sin(),
            size,
            color: hsi_color(rng.gen_range(0.0..1.0), rng.gen_range(0.3..0.9), rng.gen_range(0.2..0.9)),
        }
    }

    /// Top-left corner at frame `t`, integer pixels.
    pub fn position(&self, t: usize, width: usize, height: usize) -> (usize, usize) {
        let bounce = |p: f64, v: f64, span: usize| {
            let span = span as f64;
            if span <= 0.0 {
                return 0;
            }
            let q = (p + v * t as f64).rem_euclid(2.0 * span);
            (if q > span { 2.0 * span - q } else { q }).round() as usize
        };
        (bounce(self.x, self.vx, width - self.size), bounce(self.y, self.vy, height - self.size))
    }

    pub fn covers(&self, t: usize, x: usize, y: usize, width: usize, height: usize) -> bool {
        let (px, py) = self.position(t, width, height);
        (px..px + self.size).contains(&x) && (py..py + self.size).contains(&y)
    }
}

/// Renders `frames` frames of `scene` with `movers` on top and uniform noise of
/// amplitude `noise` per channel.
pub fn render_clip(
    scene: &Scene,
    movers: &[Mover],
    frames: usize,
    width: usize,
    height: usize,
    noise: f64,
    rng: &mut impl Rng,
) -> Vec<Frame> {
    let background: Vec<[f64; 3]> =
        (0..width * height).map(|i| scene.color((i % width) as f64, (i / width) as f64)).collect();
    (0..frames)
        .map(|t| {
            let mut rgb = background.clone();
            for m in movers {
                let (px, py) = m.position(t, width, height);
                for y in py..(py + m.size).min(height) {
                    for x in px..(px + m.size).min(width) {
                        rgb[y * width + x] = m.color;
                    }
                }
            }
            Frame::rgb_from_fn(width, height, |x, y| {
                let p = rgb[y * width + x];
                std::array::from_fn(|c| {
                    let n = if noise > 0.0 { rng.gen_range(-noise..noise) } else { 0.0 };
                    (p[c] + n).clamp(0.0, 1.0)
                })
            })
            .expect("frame dims")
            .quantized()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub seed: u64,
    pub samples_per_class: usize,
    pub frames: usize,
    pub width: usize,
    pub height: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams { seed: 0, samples_per_class: 10, frames: 60, width: 160, height: 120 }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 || self.samples_per_class == 0 {
            return Err(Error::InvalidParam("synthetic dataset needs frames and samples".into()));
        }
        if self.width < 32 || self.height < 32 {
            return Err(Error::InvalidParam("synthetic frames must be at least 32x32".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticSample {
    pub label: String,
    pub name: String,
    pub frames: Vec<Frame>,
}

pub fn sample_name(index: usize) -> String {
    format!("sample_{index:03}")
}

pub fn frame_name(index: usize) -> String {
    format!("frame_{index:04}.ppm")
}

fn sample_seed(seed: u64, class: usize, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ((class as u64) << 32) ^ index as u64
}

/// One sample of class `class` (index into [`DEFAULT_CLASSES`]).
pub fn synthetic_sample(params: &SynthParams, class: usize, index: usize) -> SyntheticSample {
    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(params.seed, class, index));
    let (w, h) = (params.width, params.height);
    let scene = Scene::random(Pattern::ALL[class % 6], rng.gen_range(0.0..1.0), w, h, &mut rng);
    let movers: Vec<Mover> = (0..rng.gen_range(1..=3)).map(|_| Mover::random(w, h, rng.gen_range(6..11), &mut rng)).collect();
    SyntheticSample {
        label: DEFAULT_CLASSES[class % 6].to_string(),
        name: sample_name(index),
        frames: render_clip(&scene, &movers, params.frames, w, h, NOISE, &mut rng),
    }
}

/// Writes every sample to `dest/<label>/sample_NNN/frame_NNNN.ppm`. Sample
/// `i` of a class depends only on `(seed, class, i)`.
pub fn write_synthetic(dest: &Path, params: &SynthParams) -> Result<()> {
    use rayon::prelude::*;
    params.validate()?;
    let jobs: Vec<(usize, usize)> =
        (0..DEFAULT_CLASSES.len()).flat_map(|c| (0..params.samples_per_class).map(move |i| (c, i))).collect();
    jobs.into_par_iter().try_for_each(|(c, i)| {
        let s = synthetic_sample(params, c, i);
        let dir = dest.join(&s.label).join(&s.name);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for (t, f) in s.frames.iter().enumerate() {
            let path = dir.join(frame_name(t));
            std::fs::write(&path, encode_ppm(f)?).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    })
}

/// A clip of `scenes` hard-cut takes, each `min_len..=max_len` frames long.
/// Consecutive takes differ in pattern and sit at least a third of the hue
/// circle apart. Returns the frames and the first frame index of every take
/// after the first.
pub fn cut_video(
    seed: u64,
    scenes: usize,
    min_len: usize,
    max_len: usize,
    width: usize,
    height: usize,
) -> (Vec<Frame>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut frames = Vec::new();
    let mut cuts = Vec::new();
    let mut hue = rng.gen_range(0.0..1.0);
    let mut pattern = rng.gen_range(0..6);
    for s in 0..scenes {
        if s > 0 {
            cuts.push(frames.len());
            hue += rng.gen_range(0.33..0.67);
            pattern = (pattern + rng.gen_range(1..6)) % 6;
        }
        let scene = Scene::random(Pattern::ALL[pattern], hue, width, height, &mut rng);
        let movers: Vec<Mover> =
            (0..rng.gen_range(0..=2)).map(|_| Mover::random(width, height, rng.gen_range(6..11), &mut rng)).collect();
        let len = rng.gen_range(min_len..=max_len);
        frames.extend(render_clip(&scene, &movers, len, width, height, NOISE, &mut rng));
    }
    (frames, cuts)
}

/// Static i.i.d. texture (intensity 0.2..0.8) with a solid square of
/// intensity `level` that appears after `still` frames and then moves
/// diagonally, bouncing off the borders. Returns the frames and the square's
/// top-left corner per frame (`None` while it is absent).
pub fn moving_square(
    seed: u64,
    still: usize,
    moving: usize,
    width: usize,
    height: usize,
    size: usize,
    level: f64,
) -> (Vec<Frame>, Vec<Option<(usize, usize)>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let texture: Vec<f64> = (0..width * height).map(|_| rng.gen_range(0.2..0.8)).collect();
    let tint = [1.0, 0.9, 0.8];
    let square = hsi_color(rng.gen_range(0.0..1.0), 0.5, level);
    let mover = Mover { x: 3.0, y: 5.0, vx: 2.0, vy: 1.0, size, color: square };
    let mut frames = Vec::with_capacity(still + moving);
    let mut truth = Vec::with_capacity(still + moving);
    for t in 0..still + moving {
        let pos = (t >= still).then(|| mover.position(t - still, width, height));
        let frame = Frame::rgb_from_fn(width, height, |x, y| {
            let inside = pos.is_some_and(|(px, py)| (px..px + size).contains(&x) && (py..py + size).contains(&y));
            std::array::from_fn(|c| {
                let v = if inside { square[c] } else { texture[y * width + x] * tint[c] };
                (v + rng.gen_range(-NOISE..NOISE)).clamp(0.0, 1.0)
            })
        })
        .expect("frame dims")
        .quantized();
        frames.push(frame);
        truth.push(pos);
    }
    (frames, truth)
}
