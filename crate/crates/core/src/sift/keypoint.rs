use serde::{Deserialize, Serialize};

use super::pyramid::ScaleSpace;
use super::{Plane, PyramidParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    /// Position in base-image pixels.
    pub x: f64,
    pub y: f64,
    pub octave: usize,
    /// DoG level inside the octave (1..=s).
    pub level: usize,
    /// Integer position inside the octave image.
    pub ox: usize,
    pub oy: usize,
    /// Blur in base-image pixels.
    pub sigma: f64,
    /// Degrees in `[0, 360)`.
    pub theta: f64,
    /// DoG value at the extremum.
    pub response: f64,
}

/// Strict 3x3x3 extrema of the DoG stacks, skipping the outermost DoG levels and a
/// one-pixel border. Ordered by (octave, level, y, x).
pub fn detect_extrema(space: &ScaleSpace) -> Vec<Keypoint> {
    let mut out = Vec::new();
    for (o, oct) in space.octaves.iter().enumerate() {
        let (w, h) = (oct.width, oct.height);
        if w < 3 || h < 3 {
            continue;
        }
        for level in 1..oct.dogs.len() - 1 {
            let (below, cur, above) = (&oct.dogs[level - 1].data, &oct.dogs[level].data, &oct.dogs[level + 1].data);
            for y in 1..h - 1 {
                for x in 1..w - 1 {
                    let v = cur[y * w + x];
                    let (mut is_max, mut is_min) = (true, true);
                    'scan: for plane in [below, cur, above] {
                        for dy in [-1isize, 0, 1] {
                            let row = (y as isize + dy) as usize * w;
                            for dx in [-1isize, 0, 1] {
                                let idx = row + (x as isize + dx) as usize;
                                if std::ptr::eq(plane, cur) && dx == 0 && dy == 0 {
                                    continue;
                                }
                                let n = plane[idx];
                                is_max &= v > n;
                                is_min &= v < n;
                                if !is_max && !is_min {
                                    break 'scan;
                                }
                            }
                        }
                    }
                    if is_max || is_min {
                        out.push(Keypoint {
                            x: (x * oct.scale) as f64,
                            y: (y * oct.scale) as f64,
                            octave: o,
                            level,
                            ox: x,
                            oy: y,
                            sigma: oct.sigmas[level] * oct.scale as f64,
                            theta: 0.0,
                            response: v,
                        });
                    }
                }
            }
        }
    }
    out
}

/// 2x2 Hessian of the DoG level at the keypoint from second differences:
/// `(dxx, dyy, dxy)`.
pub fn dog_hessian(space: &ScaleSpace, kp: &Keypoint) -> (f64, f64, f64) {
    let d = &space.octaves[kp.octave].dogs[kp.level];
    let (x, y) = (kp.ox as isize, kp.oy as isize);
    let at = |dx: isize, dy: isize| d.at_clamped(x + dx, y + dy);
    let c = at(0, 0);
    let dxx = at(1, 0) + at(-1, 0) - 2.0 * c;
    let dyy = at(0, 1) + at(0, -1) - 2.0 * c;
    let dxy = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / 4.0;
    (dxx, dyy, dxy)
}

/// Whether the principal-curvature ratio test passes for Hessian entries.
pub fn passes_edge_test(dxx: f64, dyy: f64, dxy: f64, edge_ratio: f64) -> bool {
    let tr = dxx + dyy;
    let det = dxx * dyy - dxy * dxy;
    det > 0.0 && tr * tr / det < (edge_ratio + 1.0).powi(2) / edge_ratio
}

/// Drop low-contrast candidates and those lying on edges.
pub fn filter_keypoints(candidates: Vec<Keypoint>, space: &ScaleSpace, params: &PyramidParams) -> Vec<Keypoint> {
    candidates
        .into_iter()
        .filter(|kp| kp.response.abs() >= params.contrast_threshold)
        .filter(|kp| {
            let (dxx, dyy, dxy) = dog_hessian(space, kp);
            passes_edge_test(dxx, dyy, dxy, params.edge_ratio)
        })
        .collect()
}

/// Central-difference gradient magnitude and orientation in degrees `[0, 360)`,
/// with edge replication. A zero gradient has orientation 0.
pub fn gradient_at(image: &Plane, x: isize, y: isize) -> (f64, f64) {
    let gx = image.at_clamped(x + 1, y) - image.at_clamped(x - 1, y);
    let gy = image.at_clamped(x, y + 1) - image.at_clamped(x, y - 1);
    let mag = (gx * gx + gy * gy).sqrt();
    if mag == 0.0 {
        return (0.0, 0.0);
    }
    (mag, wrap_degrees(gy.atan2(gx).to_degrees()))
}

pub(crate) fn wrap_degrees(deg: f64) -> f64 {
    let d = deg.rem_euclid(360.0);
    if d >= 360.0 {
        0.0
    } else {
        d
    }
}

const ORIENTATION_BINS: usize = 36;

/// Dominant gradient orientation around the keypoint.
///
/// 36 bins centred on multiples of 10 degrees, votes weighted by magnitude and a
/// Gaussian of 1.5 sigma over radius `ceil(4.5 sigma)`. The peak bin is refined by
/// a parabola through its neighbours.
pub fn assign_orientation(kp: &Keypoint, space: &ScaleSpace) -> Keypoint {
    let oct = &space.octaves[kp.octave];
    let image = &oct.gaussians[kp.level];
    let sigma = oct.sigmas[kp.level];
    let sw = 1.5 * sigma;
    let radius = (4.5 * sigma).ceil() as isize;
    let mut hist = [0.0f64; ORIENTATION_BINS];
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            let r2 = (dx * dx + dy * dy) as f64;
            if r2 > (radius * radius) as f64 {
                continue;
            }
            let (mag, deg) = gradient_at(image, kp.ox as isize + dx, kp.oy as isize + dy);
            if mag == 0.0 {
                continue;
            }
            let bin = (deg / 10.0).round() as usize % ORIENTATION_BINS;
            hist[bin] += mag * (-r2 / (2.0 * sw * sw)).exp();
        }
    }
    let mut out = kp.clone();
    out.theta = peak_orientation(&hist);
    out
}

fn peak_orientation(hist: &[f64; ORIENTATION_BINS]) -> f64 {
    let (best, &peak) = hist
        .iter()
        .enumerate()
        .fold((0, &0.0), |acc, (i, v)| if *v > *acc.1 { (i, v) } else { acc });
    if peak <= 0.0 {
        return 0.0;
    }
    let l = hist[(best + ORIENTATION_BINS - 1) % ORIENTATION_BINS];
    let r = hist[(best + 1) % ORIENTATION_BINS];
    let denom = l - 2.0 * peak + r;
    let offset = if denom < 0.0 { (0.5 * (l - r) / denom).clamp(-0.5, 0.5) } else { 0.0 };
    wrap_degrees((best as f64 + offset) * 10.0)
}
