//! Per-pixel Gaussian background model over HSI with correlation-distance segmentation.
//!
//! The model keeps a mean and standard deviation for every pixel and channel. A pixel
//! is background when the correlation distance between the local window of the
//! current frame and the same window of the mean image is below the threshold.
//! Only background pixels feed the running update.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{decode_f64s_len, encode_f64s};
use crate::error::{Error, Result};
use crate::imaging::{hsi_to_rgb, ColorSpace, Frame};

pub const DEFAULT_TRAINING_FRAMES: usize = 30;
pub const DEFAULT_SIGMA_FLOOR: f64 = 1e-3;
pub const DEFAULT_UPDATE_RATE: f64 = 0.05;
pub const DEFAULT_WINDOW: usize = 5;
pub const DEFAULT_THRESHOLD: f64 = 0.2;

/// Centered norms at or below this are treated as a constant window.
const FLAT_NORM: f64 = 1e-12;

/// HSI plane index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    H,
    S,
    I,
}

impl Channel {
    pub fn index(self) -> usize {
        match self {
            Channel::H => 0,
            Channel::S => 1,
            Channel::I => 2,
        }
    }

    pub fn parse(s: &str) -> Result<Channel> {
        match s.to_ascii_lowercase().as_str() {
            "h" => Ok(Channel::H),
            "s" => Ok(Channel::S),
            "i" => Ok(Channel::I),
            _ => Err(Error::InvalidParam(format!("unknown channel {s:?}, expected h, s or i"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::H => "h",
            Channel::S => "s",
            Channel::I => "i",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundModel {
    width: usize,
    height: usize,
    mean: [Vec<f64>; 3],
    std: [Vec<f64>; 3],
    training_frames: usize,
    sigma_floor: f64,
    update_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForegroundMask {
    width: usize,
    height: usize,
    /// 1 = foreground.
    data: Vec<u8>,
}

impl ForegroundMask {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height || data.iter().any(|&v| v > 1) {
            return Err(Error::InvalidParam("mask must hold width*height values in {0, 1}".into()));
        }
        Ok(ForegroundMask { width, height, data })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        ForegroundMask { width, height, data: vec![0; width * height] }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn is_foreground(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x] == 1
    }

    pub fn foreground_count(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    pub fn foreground_fraction(&self) -> f64 {
        self.foreground_count() as f64 / self.data.len() as f64
    }

    /// Gray frame with foreground at 1.0, for PGM export (0/255).
    pub fn to_frame(&self) -> Frame {
        Frame::gray(self.width, self.height, self.data.iter().map(|&v| v as f64).collect()).expect("mask dims")
    }

    /// Keep the pixels of `frame` under the mask, zero elsewhere.
    pub fn apply(&self, frame: &Frame) -> Result<Frame> {
        if frame.dims() != self.dims() {
            return Err(Error::Dimension("mask and frame differ in size".into()));
        }
        let planes = frame
            .planes()
            .iter()
            .map(|p| p.iter().zip(&self.data).map(|(&v, &m)| if m == 1 { v } else { 0.0 }).collect())
            .collect();
        Frame::new(frame.width(), frame.height(), frame.space(), planes)
    }
}

fn check_rho_eps(sigma_floor: f64, update_rate: f64) -> Result<()> {
    if !(sigma_floor > 0.0 && sigma_floor.is_finite()) {
        return Err(Error::InvalidParam(format!("sigma floor must be positive, got {sigma_floor}")));
    }
    if !(0.0..=1.0).contains(&update_rate) {
        return Err(Error::InvalidParam(format!("update rate must lie in [0, 1], got {update_rate}")));
    }
    Ok(())
}

/// Fit mean and population standard deviation (floored at `sigma_floor`) over the
/// given HSI frames. Streams the frames once (Welford).
pub fn fit_background<'a, I>(frames: I, sigma_floor: f64, update_rate: f64) -> Result<BackgroundModel>
where
    I: IntoIterator<Item = &'a Frame>,
{
    check_rho_eps(sigma_floor, update_rate)?;
    let mut iter = frames.into_iter();
    let first = iter.next().ok_or_else(|| Error::Empty("background fit needs at least 2 frames".into()))?;
    first.expect_space(ColorSpace::Hsi)?;
    let n = first.len();
    let mut mean: [Vec<f64>; 3] = std::array::from_fn(|c| first.plane(c).to_vec());
    let mut m2: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; n]);
    let mut count = 1usize;
    for f in iter {
        f.expect_space(ColorSpace::Hsi)?;
        first.expect_same_dims(f)?;
        count += 1;
        let inv = 1.0 / count as f64;
        for c in 0..3 {
            let (mu, acc, x) = (&mut mean[c], &mut m2[c], f.plane(c));
            for k in 0..n {
                let delta = x[k] - mu[k];
                mu[k] += delta * inv;
                acc[k] += delta * (x[k] - mu[k]);
            }
        }
    }
    if count < 2 {
        return Err(Error::Empty(format!("background fit needs at least 2 frames, got {count}")));
    }
    let std = std::array::from_fn(|c| {
        m2[c].iter().map(|&s| (s.max(0.0) / count as f64).sqrt().max(sigma_floor)).collect()
    });
    Ok(BackgroundModel {
        width: first.width(),
        height: first.height(),
        mean,
        std,
        training_frames: count,
        sigma_floor,
        update_rate,
    })
}

impl BackgroundModel {
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn mean(&self, channel: Channel) -> &[f64] {
        &self.mean[channel.index()]
    }

    pub fn std(&self, channel: Channel) -> &[f64] {
        &self.std[channel.index()]
    }

    pub fn training_frames(&self) -> usize {
        self.training_frames
    }

    pub fn sigma_floor(&self) -> f64 {
        self.sigma_floor
    }

    pub fn update_rate(&self) -> f64 {
        self.update_rate
    }

    pub fn set_update_rate(&mut self, rho: f64) -> Result<()> {
        check_rho_eps(self.sigma_floor, rho)?;
        self.update_rate = rho;
        Ok(())
    }

    fn check_frame(&self, frame: &Frame) -> Result<()> {
        frame.expect_space(ColorSpace::Hsi)?;
        if frame.dims() != self.dims() {
            return Err(Error::Dimension(format!(
                "model is {}x{}, frame is {}x{}",
                self.width,
                self.height,
                frame.width(),
                frame.height()
            )));
        }
        Ok(())
    }

    /// Density at `x` for channel `channel` of pixel `pos`, with exponent
    /// `-(x - mu)^2 / sigma^2`. Diagnostic only; segmentation does not use it.
    pub fn pixel_probability(&self, channel: Channel, x: f64, pos: usize) -> f64 {
        let mu = self.mean[channel.index()][pos];
        let sigma = self.std[channel.index()][pos];
        (-(x - mu).powi(2) / (sigma * sigma)).exp() / ((2.0 * PI).sqrt() * sigma)
    }

    /// The mean planes as an HSI frame.
    pub fn mean_frame(&self) -> Frame {
        Frame::new(self.width, self.height, ColorSpace::Hsi, self.mean.to_vec()).expect("model dims")
    }

    /// The mean image converted to RGB.
    pub fn background_image(&self) -> Frame {
        hsi_to_rgb(&self.mean_frame()).expect("hsi frame")
    }

    /// Blend background-classified pixels into the statistics; foreground pixels are untouched.
    pub fn update(&mut self, frame: &Frame, mask: &ForegroundMask) -> Result<()> {
        self.check_frame(frame)?;
        if mask.dims() != self.dims() {
            return Err(Error::Dimension("mask and model differ in size".into()));
        }
        let rho = self.update_rate;
        let floor2 = self.sigma_floor * self.sigma_floor;
        for c in 0..3 {
            let x = frame.plane(c);
            let (mu, sd) = (&mut self.mean[c], &mut self.std[c]);
            for k in 0..x.len() {
                if mask.data[k] == 1 {
                    continue;
                }
                let m = (1.0 - rho) * mu[k] + rho * x[k];
                let var = ((1.0 - rho) * sd[k] * sd[k] + rho * (x[k] - m).powi(2)).max(floor2);
                mu[k] = m;
                sd[k] = var.sqrt().max(self.sigma_floor);
            }
        }
        Ok(())
    }
}

/// Functional form of [`BackgroundModel::update`].
pub fn update_background(model: &BackgroundModel, frame: &Frame, mask: &ForegroundMask) -> Result<BackgroundModel> {
    let mut next = model.clone();
    next.update(frame, mask)?;
    Ok(next)
}

/// `1 - corr(x, y)` in `[0, 2]`.
///
/// A window with zero centered norm has no defined correlation: the distance is 0
/// when both windows are flat, 2 when only one is.
pub fn correlation_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Dimension(format!(
            "correlation windows must have equal length >= 2, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    Ok(correlation_distance_unchecked(x, y))
}

fn correlation_distance_unchecked(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    let (nx, ny) = (sxx.sqrt(), syy.sqrt());
    match (nx <= FLAT_NORM, ny <= FLAT_NORM) {
        (true, true) => 0.0,
        (true, false) | (false, true) => 2.0,
        (false, false) => (1.0 - sxy / (nx * ny)).clamp(0.0, 2.0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentParams {
    /// Odd side length of the correlation window.
    pub window: usize,
    pub threshold: f64,
    pub channel: Channel,
}

impl Default for SegmentParams {
    fn default() -> Self {
        SegmentParams { window: DEFAULT_WINDOW, threshold: DEFAULT_THRESHOLD, channel: Channel::I }
    }
}

impl SegmentParams {
    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window % 2 == 0 {
            return Err(Error::InvalidParam(format!("window must be odd and >= 3, got {}", self.window)));
        }
        if !(0.0..=2.0).contains(&self.threshold) {
            return Err(Error::InvalidParam(format!("threshold must lie in [0, 2], got {}", self.threshold)));
        }
        Ok(())
    }
}

/// Classify every pixel of `frame` against the model's mean image.
pub fn segment_frame(model: &BackgroundModel, frame: &Frame, params: &SegmentParams) -> Result<ForegroundMask> {
    params.validate()?;
    model.check_frame(frame)?;
    let (w, h) = model.dims();
    let r = (params.window / 2) as isize;
    let cur = frame.plane(params.channel.index());
    let reference = model.mean(params.channel);
    let clamp_idx = |x: isize, y: isize| {
        let x = x.clamp(0, w as isize - 1) as usize;
        let y = y.clamp(0, h as isize - 1) as usize;
        y * w + x
    };
    let data: Vec<u8> = (0..h)
        .into_par_iter()
        .flat_map_iter(|y| {
            let mut xs = Vec::with_capacity(params.window * params.window);
            let mut ys = Vec::with_capacity(params.window * params.window);
            (0..w)
                .map(|x| {
                    xs.clear();
                    ys.clear();
                    for dy in -r..=r {
                        for dx in -r..=r {
                            let i = clamp_idx(x as isize + dx, y as isize + dy);
                            xs.push(cur[i]);
                            ys.push(reference[i]);
                        }
                    }
                    let d = correlation_distance_unchecked(&xs, &ys);
                    u8::from(d >= params.threshold)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(ForegroundMask { width: w, height: h, data })
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    width: usize,
    height: usize,
    epsilon: f64,
    rho: f64,
    training_frames: usize,
    /// H, S, I planes.
    mean: [String; 3],
    std: [String; 3],
}

impl BackgroundModel {
    pub fn to_json(&self) -> String {
        let doc = ModelDoc {
            width: self.width,
            height: self.height,
            epsilon: self.sigma_floor,
            rho: self.update_rate,
            training_frames: self.training_frames,
            mean: std::array::from_fn(|c| encode_f64s(&self.mean[c])),
            std: std::array::from_fn(|c| encode_f64s(&self.std[c])),
        };
        serde_json::to_string_pretty(&doc).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(text)?;
        check_rho_eps(doc.epsilon, doc.rho).map_err(|e| Error::Format(e.to_string()))?;
        let n = doc
            .width
            .checked_mul(doc.height)
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Format("bad model dimensions".into()))?;
        if doc.training_frames < 2 {
            return Err(Error::Format("model must be trained on at least 2 frames".into()));
        }
        let mut mean: [Vec<f64>; 3] = Default::default();
        let mut std: [Vec<f64>; 3] = Default::default();
        for c in 0..3 {
            mean[c] = decode_f64s_len(&doc.mean[c], n, "mean plane")?;
            std[c] = decode_f64s_len(&doc.std[c], n, "std plane")?;
            if std[c].iter().any(|&s| !(s >= doc.epsilon)) {
                return Err(Error::Format("std plane below sigma floor".into()));
            }
        }
        Ok(BackgroundModel {
            width: doc.width,
            height: doc.height,
            mean,
            std,
            training_frames: doc.training_frames,
            sigma_floor: doc.epsilon,
            update_rate: doc.rho,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn hsi(w: usize, h: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Frame {
        let mut planes = vec![Vec::with_capacity(w * h); 3];
        for (c, plane) in planes.iter_mut().enumerate() {
            for k in 0..w * h {
                plane.push(f(c, k % w, k / w));
            }
        }
        Frame::new(w, h, ColorSpace::Hsi, planes).unwrap()
    }

    fn texture(x: usize, y: usize) -> f64 {
        // deterministic hash texture in [0.2, 0.8]
        let v = (x as u64).wrapping_mul(73_856_093) ^ (y as u64).wrapping_mul(19_349_663);
        0.2 + 0.6 * ((v.wrapping_mul(2_654_435_761) >> 7) % 1000) as f64 / 999.0
    }

    #[test]
    fn identical_frames_hit_sigma_floor() {
        let f = hsi(4, 3, |c, _, _| 0.1 * (c + 1) as f64);
        let m = fit_background(vec![&f; 5], 1e-3, 0.05).unwrap();
        assert_eq!(m.training_frames(), 5);
        for c in [Channel::H, Channel::S, Channel::I] {
            assert!(m.mean(c).iter().all(|&v| (v - 0.1 * (c.index() + 1) as f64).abs() < 1e-15));
            assert!(m.std(c).iter().all(|&s| s == 1e-3));
        }
    }

    #[test]
    fn alternating_values_closed_form() {
        let (a, b) = (0.2, 0.7);
        let fa = hsi(3, 3, |_, _, _| a);
        let fb = hsi(3, 3, |_, _, _| b);
        let frames = [&fa, &fb, &fa, &fb, &fa, &fb];
        let m = fit_background(frames, 1e-3, 0.05).unwrap();
        assert!(m.mean(Channel::I).iter().all(|&v| (v - (a + b) / 2.0).abs() < 1e-14));
        assert!(m.std(Channel::S).iter().all(|&s| (s - (b - a) / 2.0).abs() < 1e-14));
    }

    #[test]
    fn random_stack_matches_two_pass_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let frames: Vec<Frame> = (0..17).map(|_| hsi(6, 5, |_, _, _| rng.gen())).collect();
        let m = fit_background(&frames, 1e-3, 0.05).unwrap();
        for c in 0..3 {
            for k in 0..30 {
                let xs: Vec<f64> = frames.iter().map(|f| f.plane(c)[k]).collect();
                let mean = xs.iter().sum::<f64>() / xs.len() as f64;
                let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
                assert!((m.mean[c][k] - mean).abs() < 1e-12);
                assert!((m.std[c][k] - var.sqrt().max(1e-3)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fit_errors() {
        let f = hsi(2, 2, |_, _, _| 0.5);
        assert!(fit_background(vec![&f], 1e-3, 0.05).is_err());
        assert!(fit_background(Vec::<&Frame>::new(), 1e-3, 0.05).is_err());
        let g = hsi(3, 2, |_, _, _| 0.5);
        assert!(matches!(fit_background(vec![&f, &g], 1e-3, 0.05), Err(Error::Dimension(_))));
        assert!(fit_background(vec![&f, &f], 0.0, 0.05).is_err());
        let rgb = Frame::filled(2, 2, ColorSpace::Rgb, &[0.0; 3]).unwrap();
        assert!(fit_background(vec![&rgb, &rgb], 1e-3, 0.05).is_err());
    }

    #[test]
    fn density_values() {
        let fa = hsi(1, 1, |_, _, _| 0.3);
        let fb = hsi(1, 1, |_, _, _| 0.5);
        let m = fit_background(vec![&fa, &fb], 1e-3, 0.05).unwrap();
        let (mu, sigma) = (0.4, 0.1);
        let peak = 1.0 / ((2.0 * PI).sqrt() * sigma);
        assert!((m.pixel_probability(Channel::I, mu, 0) - peak).abs() < 1e-9);
        assert!((m.pixel_probability(Channel::I, mu + sigma, 0) - peak * (-1.0f64).exp()).abs() < 1e-9);
        for d in [0.01, 0.05, 0.3] {
            let (p, q) = (m.pixel_probability(Channel::H, mu + d, 0), m.pixel_probability(Channel::H, mu - d, 0));
            assert!((p - q).abs() < 1e-9 * p.max(1e-300));
        }
    }

    #[test]
    fn correlation_cases() {
        let x = [0.1, 0.5, 0.2, 0.9, 0.4];
        assert!(correlation_distance(&x, &x).unwrap().abs() < 1e-12);
        let affine: Vec<f64> = x.iter().map(|v| 2.0 * v + 3.0).collect();
        assert!(correlation_distance(&x, &affine).unwrap().abs() < 1e-12);
        let z = [-1.0, 2.0, -3.0, 1.0, 1.0];
        let neg: Vec<f64> = z.iter().map(|v| -v).collect();
        assert!((correlation_distance(&z, &neg).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(correlation_distance(&[0.3; 4], &[0.7; 4]).unwrap(), 0.0);
        assert_eq!(correlation_distance(&[0.3; 4], &[0.1, 0.2, 0.3, 0.4]).unwrap(), 2.0);
        assert!(correlation_distance(&[1.0], &[1.0]).is_err());
        assert!(correlation_distance(&[1.0, 2.0], &[1.0]).is_err());
    }

    fn textured_background(w: usize, h: usize) -> Frame {
        hsi(w, h, |c, x, y| if c == 2 { texture(x, y) } else { 0.5 })
    }

    #[test]
    fn frame_equal_to_mean_is_all_background() {
        let bg = textured_background(32, 24);
        let m = fit_background(vec![&bg, &bg, &bg], 1e-3, 0.05).unwrap();
        let mask = segment_frame(&m, &bg, &SegmentParams::default()).unwrap();
        assert_eq!(mask.foreground_count(), 0);
        let all = segment_frame(&m, &bg, &SegmentParams { threshold: 0.0, ..Default::default() }).unwrap();
        assert_eq!(all.foreground_count(), 32 * 24);
    }

    #[test]
    fn inverted_square_found_within_dilation_band() {
        let (w, h) = (64, 48);
        let bg = textured_background(w, h);
        let m = fit_background(vec![&bg, &bg], 1e-3, 0.05).unwrap();
        let (sx, sy, side) = (20usize, 14usize, 16usize);
        let inside = |x: usize, y: usize| (sx..sx + side).contains(&x) && (sy..sy + side).contains(&y);
        let frame = hsi(w, h, |c, x, y| {
            let v = if c == 2 { texture(x, y) } else { 0.5 };
            if c == 2 && inside(x, y) {
                1.0 - v
            } else {
                v
            }
        });
        // A 3x3 window reaches one pixel past the square.
        let params = SegmentParams { window: 3, ..Default::default() };
        let mask = segment_frame(&m, &frame, &params).unwrap();
        for y in 0..h {
            for x in 0..w {
                let band = (sx.saturating_sub(1)..sx + side + 1).contains(&x)
                    && (sy.saturating_sub(1)..sy + side + 1).contains(&y);
                if inside(x, y) {
                    assert!(mask.is_foreground(x, y), "missed ({x},{y})");
                } else if !band {
                    assert!(!mask.is_foreground(x, y), "spurious ({x},{y})");
                }
            }
        }
    }

    #[test]
    fn update_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let frames: Vec<Frame> = (0..4).map(|_| hsi(4, 4, |_, _, _| rng.gen())).collect();
        let m = fit_background(&frames, 1e-3, 0.0).unwrap();
        let x = hsi(4, 4, |_, _, _| 0.42);
        let none = ForegroundMask::empty(4, 4);
        assert_eq!(update_background(&m, &x, &none).unwrap(), m);

        let mut full = m.clone();
        full.set_update_rate(1.0).unwrap();
        let replaced = update_background(&full, &x, &none).unwrap();
        assert!(replaced.mean(Channel::S).iter().all(|&v| v == 0.42));
        assert!(replaced.std(Channel::H).iter().all(|&s| s == 1e-3));

        // foreground pixels keep their statistics
        let mut data = vec![0u8; 16];
        data[5] = 1;
        let mask = ForegroundMask::new(4, 4, data).unwrap();
        let partial = update_background(&full, &x, &mask).unwrap();
        for c in 0..3 {
            assert_eq!(partial.mean[c][5], m.mean[c][5]);
            assert_eq!(partial.std[c][5], m.std[c][5]);
        }
    }

    #[test]
    fn constant_updates_converge_geometrically() {
        let a = hsi(2, 2, |_, _, _| 0.0);
        let b = hsi(2, 2, |_, _, _| 0.2);
        let mut m = fit_background(vec![&a, &b], 1e-3, 0.1).unwrap();
        let v = hsi(2, 2, |_, _, _| 0.9);
        let mask = ForegroundMask::empty(2, 2);
        let mu0 = 0.1;
        for t in 1..=40 {
            m.update(&v, &mask).unwrap();
            let expected = 0.9 + (mu0 - 0.9) * 0.9f64.powi(t);
            assert!((m.mean(Channel::I)[0] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let frames: Vec<Frame> = (0..3).map(|_| hsi(3, 2, |_, _, _| rng.gen())).collect();
        let m = fit_background(&frames, 1e-3, 0.05).unwrap();
        assert_eq!(BackgroundModel::from_json(&m.to_json()).unwrap(), m);
        assert!(BackgroundModel::from_json("{}").is_err());
        let broken = m.to_json().replace("\"width\": 3", "\"width\": 4");
        assert!(BackgroundModel::from_json(&broken).is_err());
    }

    #[test]
    fn mask_helpers() {
        assert!(ForegroundMask::new(2, 2, vec![0, 1, 2, 0]).is_err());
        let m = ForegroundMask::new(2, 1, vec![1, 0]).unwrap();
        let f = Frame::filled(2, 1, ColorSpace::Rgb, &[0.5; 3]).unwrap();
        let out = m.apply(&f).unwrap();
        assert_eq!(out.pixel(0, 0), vec![0.5; 3]);
        assert_eq!(out.pixel(1, 0), vec![0.0; 3]);
        assert_eq!(m.to_frame().plane(0), &[1.0, 0.0]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn correlation_properties(seed in any::<u64>(), n in 2usize..30, a in 0.1..5.0f64, b in -3.0..3.0f64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
            let d = correlation_distance(&x, &y).unwrap();
            prop_assert!((0.0..=2.0).contains(&d));
            prop_assert!((d - correlation_distance(&y, &x).unwrap()).abs() < 1e-12);
            let ya: Vec<f64> = y.iter().map(|v| a * v + b).collect();
            prop_assert!((d - correlation_distance(&x, &ya).unwrap()).abs() < 1e-9);
            let neg: Vec<f64> = x.iter().map(|v| -v).collect();
            prop_assert!((correlation_distance(&x, &neg).unwrap() - 2.0).abs() < 1e-9);
        }

        #[test]
        fn sigma_floor_survives_updates(seed in any::<u64>(), rho in 0.0..=1.0f64, steps in 1usize..20) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let frames: Vec<Frame> = (0..3).map(|_| hsi(3, 3, |_, _, _| rng.gen())).collect();
            let mut m = fit_background(&frames, 1e-3, rho).unwrap();
            for _ in 0..steps {
                let f = hsi(3, 3, |_, _, _| rng.gen());
                let mask = ForegroundMask::new(3, 3, (0..9).map(|_| rng.gen_range(0..2)).collect()).unwrap();
                m.update(&f, &mask).unwrap();
                for c in 0..3 {
                    prop_assert!(m.std[c].iter().all(|&s| s >= 1e-3));
                }
            }
        }

        #[test]
        fn training_frames_are_mostly_background(seed in any::<u64>()) {
            // noise-free: the background is static, frames differ only by a global gain
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let frames: Vec<Frame> = (0..6).map(|_| {
                let gain = rng.gen_range(0.9..1.0);
                hsi(24, 20, |c, x, y| if c == 2 { gain * texture(x, y) } else { 0.4 })
            }).collect();
            let m = fit_background(&frames, 1e-3, 0.05).unwrap();
            for f in &frames {
                let mask = segment_frame(&m, f, &SegmentParams::default()).unwrap();
                prop_assert!(mask.foreground_fraction() < 0.05);
            }
        }
    }
}
