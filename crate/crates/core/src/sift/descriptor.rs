use serde::{Deserialize, Serialize};

use super::keypoint::{gradient_at, wrap_degrees, Keypoint};
use super::pyramid::ScaleSpace;
use crate::error::{Error, Result};

pub const DESCRIPTOR_LEN: usize = 128;
pub const DESCRIPTOR_CLAMP: f64 = 0.2;

const GRID: usize = 16;
const CELLS: usize = 4;
const ORI_BINS: usize = 8;
/// Sample spacing in units of the keypoint's octave-level sigma.
const SPACING: f64 = 0.75;

/// 4x4x8 histogram of gradient orientations relative to the keypoint orientation.
///
/// A 16x16 grid of samples is laid around the keypoint in its rotated frame, each
/// sample taking the nearest-pixel gradient of the keypoint's Gaussian level. Votes
/// are spread trilinearly over neighbouring cells and orientation bins and weighted
/// by a Gaussian with sigma equal to half the grid width. The result is normalized,
/// clamped at 0.2 and normalized again; a patch without gradients gives zeros.
pub fn compute_descriptor(kp: &Keypoint, space: &ScaleSpace) -> Vec<f64> {
    let oct = &space.octaves[kp.octave];
    let image = &oct.gaussians[kp.level];
    let step = SPACING * oct.sigmas[kp.level];
    let (sin, cos) = kp.theta.to_radians().sin_cos();
    let half = (GRID as f64 - 1.0) / 2.0;
    let sw = GRID as f64 / 2.0;
    let mut hist = vec![0.0; DESCRIPTOR_LEN];

    for i in 0..GRID {
        for j in 0..GRID {
            let (u, v) = ((j as f64 - half) * step, (i as f64 - half) * step);
            let px = kp.ox as f64 + u * cos - v * sin;
            let py = kp.oy as f64 + u * sin + v * cos;
            let (mag, deg) = gradient_at(image, px.round() as isize, py.round() as isize);
            if mag == 0.0 {
                continue;
            }
            let r2 = (j as f64 - half).powi(2) + (i as f64 - half).powi(2);
            let weight = mag * (-r2 / (2.0 * sw * sw)).exp();

            // Continuous cell coordinates, cell centres at integers.
            let cx = (j as f64 + 0.5) / (GRID / CELLS) as f64 - 0.5;
            let cy = (i as f64 + 0.5) / (GRID / CELLS) as f64 - 0.5;
            let co = wrap_degrees(deg - kp.theta) / (360.0 / ORI_BINS as f64);
            let (x0, y0, o0) = (cx.floor(), cy.floor(), co.floor());
            let (fx, fy, fo) = (cx - x0, cy - y0, co - o0);
            for (dy, wy) in [(0, 1.0 - fy), (1, fy)] {
                let yc = y0 as isize + dy;
                if !(0..CELLS as isize).contains(&yc) || wy == 0.0 {
                    continue;
                }
                for (dx, wx) in [(0, 1.0 - fx), (1, fx)] {
                    let xc = x0 as isize + dx;
                    if !(0..CELLS as isize).contains(&xc) || wx == 0.0 {
                        continue;
                    }
                    for (d_o, wo) in [(0, 1.0 - fo), (1, fo)] {
                        let ob = (o0 as usize + d_o) % ORI_BINS;
                        let idx = (yc as usize * CELLS + xc as usize) * ORI_BINS + ob;
                        hist[idx] += weight * wy * wx * wo;
                    }
                }
            }
        }
    }

    match clamp_descriptor(&hist) {
        Some(mut clamped) => {
            let norm = l2(&clamped);
            clamped.iter_mut().for_each(|v| *v /= norm);
            clamped
        }
        None => vec![0.0; DESCRIPTOR_LEN],
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// First normalization and clamping stage. `None` for an all-zero histogram.
pub fn clamp_descriptor(raw: &[f64]) -> Option<Vec<f64>> {
    let norm = l2(raw);
    if norm == 0.0 {
        return None;
    }
    Some(raw.iter().map(|v| (v / norm).min(DESCRIPTOR_CLAMP)).collect())
}

/// One line of a descriptor dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DescriptorRecord {
    pub x: f64,
    pub y: f64,
    pub sigma: f64,
    pub theta: f64,
    pub descriptor: Vec<f64>,
}

/// JSON lines, one record per keypoint.
pub fn write_descriptors(records: &[DescriptorRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("descriptor record serializes"));
        out.push('\n');
    }
    out
}

pub fn parse_descriptors(text: &str) -> Result<Vec<DescriptorRecord>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: DescriptorRecord = serde_json::from_str(line)
            .map_err(|e| Error::Format(format!("descriptor line {}: {e}", n + 1)))?;
        if rec.descriptor.len() != DESCRIPTOR_LEN {
            return Err(Error::Format(format!(
                "descriptor line {}: expected {DESCRIPTOR_LEN} values, got {}",
                n + 1,
                rec.descriptor.len()
            )));
        }
        if rec.descriptor.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Format(format!("descriptor line {}: values must be finite and >= 0", n + 1)));
        }
        out.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sift::{build_scale_space, Plane, PyramidParams};

    fn kp_at(x: usize, y: usize, theta: f64) -> Keypoint {
        Keypoint { x: x as f64, y: y as f64, octave: 0, level: 1, ox: x, oy: y, sigma: 2.0, theta, response: 0.1 }
    }

    #[test]
    fn flat_patch_gives_zeros() {
        let img = Plane::new(32, 32, vec![0.2; 1024]);
        let ss = build_scale_space(&img, &PyramidParams::default()).unwrap();
        let d = compute_descriptor(&kp_at(16, 16, 0.0), &ss);
        assert_eq!(d, vec![0.0; 128]);
    }

    #[test]
    fn unit_norm_and_nonnegative() {
        let img = Plane::from_fn(48, 48, |x, y| ((x as f64 * 0.7).sin() + (y as f64 * 0.3).cos()) * 0.25 + 0.5);
        let ss = build_scale_space(&img, &PyramidParams::default()).unwrap();
        for theta in [0.0, 33.0, 190.0] {
            let d = compute_descriptor(&kp_at(24, 24, theta), &ss);
            assert_eq!(d.len(), DESCRIPTOR_LEN);
            assert!(d.iter().all(|&v| v >= 0.0));
            assert!((l2(&d) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ramp_votes_land_in_one_orientation_bin() {
        // Gradient along +x, keypoint orientation 0: every vote is in bin 0.
        let img = Plane::from_fn(48, 48, |x, _| x as f64 / 48.0);
        let ss = build_scale_space(&img, &PyramidParams::default()).unwrap();
        let d = compute_descriptor(&kp_at(24, 24, 0.0), &ss);
        for (i, &v) in d.iter().enumerate() {
            if i % ORI_BINS != 0 {
                assert!(v.abs() < 1e-12, "bin {i} = {v}");
            }
        }
        // Rotating the keypoint by 90 degrees moves the mass to relative angle 270.
        let d = compute_descriptor(&kp_at(24, 24, 90.0), &ss);
        let mass: f64 = d.iter().enumerate().filter(|(i, _)| i % ORI_BINS == 6).map(|(_, v)| v).sum();
        assert!(mass > 0.0);
        assert!(d.iter().enumerate().filter(|(i, _)| i % ORI_BINS != 6).all(|(_, v)| v.abs() < 1e-12));
    }

    #[test]
    fn clamp_stage_bound() {
        let mut raw = vec![0.0; 128];
        raw[0] = 10.0;
        raw[1] = 1.0;
        let c = clamp_descriptor(&raw).unwrap();
        assert!(c.iter().all(|&v| (0.0..=DESCRIPTOR_CLAMP).contains(&v)));
        assert_eq!(c[0], DESCRIPTOR_CLAMP);
        assert!(clamp_descriptor(&[0.0; 128]).is_none());
    }

    #[test]
    fn dump_round_trip() {
        let rec = DescriptorRecord { x: 3.0, y: 4.5, sigma: 1.6, theta: 359.5, descriptor: (0..128).map(|i| i as f64 / 1e3).collect() };
        let text = write_descriptors(&[rec.clone(), rec.clone()]);
        assert_eq!(text.lines().count(), 2);
        assert_eq!(parse_descriptors(&text).unwrap(), vec![rec.clone(), rec]);
        assert!(parse_descriptors("{\"x\":1}").is_err());
        let short = r#"{"x":0,"y":0,"sigma":1,"theta":0,"descriptor":[0.5]}"#;
        assert!(parse_descriptors(short).unwrap_err().to_string().contains("expected 128"));
        assert!(parse_descriptors("").unwrap().is_empty());
    }
}
