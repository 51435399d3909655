//! RGB ↔ HSI conversion and luminance.

use std::f64::consts::PI;

use super::frame::{ColorSpace, Frame};
use crate::error::Result;

/// Convert one RGB pixel (unit interval) to `(h, s, i)` with `h` in `[0, 1)`.
///
/// Achromatic pixels get `h = 0`; black gets `s = 0`.
pub fn pixel_rgb_to_hsi(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let sum = r + g + b;
    let i = sum / 3.0;
    let s = if sum <= 0.0 { 0.0 } else { (1.0 - 3.0 * r.min(g).min(b) / sum).clamp(0.0, 1.0) };

    let num = 0.5 * ((r - g) + (r - b));
    let den = ((r - g) * (r - g) + (r - b) * (g - b)).sqrt();
    let h = if den <= f64::EPSILON {
        0.0
    } else {
        let theta = (num / den).clamp(-1.0, 1.0).acos();
        let deg = if b > g { 2.0 * PI - theta } else { theta };
        let h = deg / (2.0 * PI);
        if h >= 1.0 { h - 1.0 } else { h }
    };
    (h, s, i)
}

/// Inverse of [`pixel_rgb_to_hsi`] using the sector formulas. Output is clamped to `[0, 1]`.
pub fn pixel_hsi_to_rgb(h: f64, s: f64, i: f64) -> (f64, f64, f64) {
    let deg = h.rem_euclid(1.0) * 360.0;
    let s = s.clamp(0.0, 1.0);
    let lo = i * (1.0 - s);
    let hi = |angle: f64| {
        let a = angle.to_radians();
        i * (1.0 + s * a.cos() / (PI / 3.0 - a).cos())
    };
    let (r, g, b) = if deg < 120.0 {
        let r = hi(deg);
        (r, 3.0 * i - (r + lo), lo)
    } else if deg < 240.0 {
        let g = hi(deg - 120.0);
        (lo, g, 3.0 * i - (lo + g))
    } else {
        let b = hi(deg - 240.0);
        (3.0 * i - (b + lo), lo, b)
    };
    (r.clamp(0.0, 1.0), g.clamp(0.0, 1.0), b.clamp(0.0, 1.0))
}

pub fn rgb_to_hsi(frame: &Frame) -> Result<Frame> {
    frame.expect_space(ColorSpace::Rgb)?;
    let n = frame.len();
    let (r, g, b) = (frame.plane(0), frame.plane(1), frame.plane(2));
    let mut planes = vec![Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
    for k in 0..n {
        let (h, s, i) = pixel_rgb_to_hsi(r[k], g[k], b[k]);
        planes[0].push(h);
        planes[1].push(s);
        planes[2].push(i);
    }
    Ok(frame.with_planes(ColorSpace::Hsi, planes))
}

pub fn hsi_to_rgb(frame: &Frame) -> Result<Frame> {
    frame.expect_space(ColorSpace::Hsi)?;
    let n = frame.len();
    let (h, s, i) = (frame.plane(0), frame.plane(1), frame.plane(2));
    let mut planes = vec![Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
    for k in 0..n {
        let (r, g, b) = pixel_hsi_to_rgb(h[k], s[k], i[k]);
        planes[0].push(r);
        planes[1].push(g);
        planes[2].push(b);
    }
    Ok(frame.with_planes(ColorSpace::Rgb, planes))
}

pub const LUMA_R: f64 = 0.299;
pub const LUMA_G: f64 = 0.587;
pub const LUMA_B: f64 = 0.114;

#[inline]
pub fn pixel_luminance(r: f64, g: f64, b: f64) -> f64 {
    LUMA_R * r + LUMA_G * g + LUMA_B * b
}

/// `Y = 0.299 R + 0.587 G + 0.114 B`.
pub fn luminance(frame: &Frame) -> Result<Frame> {
    frame.expect_space(ColorSpace::Rgb)?;
    let (r, g, b) = (frame.plane(0), frame.plane(1), frame.plane(2));
    let y = (0..frame.len()).map(|k| pixel_luminance(r[k], g[k], b[k])).collect();
    Ok(frame.with_planes(ColorSpace::Gray, vec![y]))
}
