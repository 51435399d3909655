//! Scale-invariant keypoints and 128-d gradient-histogram descriptors.

mod descriptor;
mod keypoint;
mod pyramid;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{ColorSpace, Frame};

pub use descriptor::{
    clamp_descriptor, compute_descriptor, parse_descriptors, write_descriptors, DescriptorRecord, DESCRIPTOR_CLAMP,
    DESCRIPTOR_LEN,
};
pub use keypoint::{
    assign_orientation, detect_extrema, dog_hessian, filter_keypoints, gradient_at, passes_edge_test, Keypoint,
};
pub use pyramid::{blur, build_scale_space, gaussian_kernel, usable_octaves, Octave, ScaleSpace};

/// Single-channel f64 image.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Plane {
    /// Panics if `data.len() != width * height`.
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Plane {
        assert_eq!(data.len(), width * height, "plane data does not match {width}x{height}");
        Plane { width, height, data }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Plane {
        let data = (0..width * height).map(|i| f(i % width, i / width)).collect();
        Plane { width, height, data }
    }

    /// The single plane of a gray frame.
    pub fn from_gray(frame: &Frame) -> Result<Plane> {
        frame.expect_space(ColorSpace::Gray)?;
        Ok(Plane { width: frame.width(), height: frame.height(), data: frame.plane(0).to_vec() })
    }

    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Value with coordinates clamped into the image.
    pub fn at_clamped(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.data[y * self.width + x]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PyramidParams {
    pub octaves: usize,
    /// Scales per octave `s`.
    pub scales: usize,
    pub sigma0: f64,
    pub contrast_threshold: f64,
    /// Maximum principal-curvature ratio `r`.
    pub edge_ratio: f64,
}

impl Default for PyramidParams {
    fn default() -> Self {
        PyramidParams { octaves: 4, scales: 3, sigma0: 1.6, contrast_threshold: 0.03, edge_ratio: 10.0 }
    }
}

impl PyramidParams {
    /// Scale step between adjacent levels, `2^(1/s)`.
    pub fn k(&self) -> f64 {
        2f64.powf(1.0 / self.scales as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.octaves < 1 || self.scales < 1 {
            return Err(Error::InvalidParam("sift.octaves and sift.scales must be >= 1".into()));
        }
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            return Err(Error::InvalidParam(format!("sift.sigma0 must be positive, got {}", self.sigma0)));
        }
        if !(self.contrast_threshold > 0.0) {
            return Err(Error::InvalidParam("sift.contrast_threshold must be positive".into()));
        }
        if !(self.edge_ratio > 1.0) {
            return Err(Error::InvalidParam("sift.edge_ratio must exceed 1".into()));
        }
        Ok(())
    }
}

/// An oriented keypoint with its descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub keypoint: Keypoint,
    pub descriptor: Vec<f64>,
}

impl Feature {
    pub fn record(&self) -> DescriptorRecord {
        DescriptorRecord {
            x: self.keypoint.x,
            y: self.keypoint.y,
            sigma: self.keypoint.sigma,
            theta: self.keypoint.theta,
            descriptor: self.descriptor.clone(),
        }
    }
}

/// Keypoints of `image` only, oriented, ordered by (octave, level, y, x).
pub fn detect(image: &Plane, params: &PyramidParams) -> Result<(ScaleSpace, Vec<Keypoint>)> {
    let space = build_scale_space(image, params)?;
    let candidates = detect_extrema(&space);
    let kept = filter_keypoints(candidates, &space, params);
    let oriented = kept.par_iter().map(|kp| assign_orientation(kp, &space)).collect();
    Ok((space, oriented))
}

/// Full detector and descriptor on one gray image.
pub fn extract(image: &Plane, params: &PyramidParams) -> Result<Vec<Feature>> {
    let (space, keypoints) = detect(image, params)?;
    Ok(keypoints
        .into_par_iter()
        .map(|kp| {
            let descriptor = compute_descriptor(&kp, &space);
            Feature { keypoint: kp, descriptor }
        })
        .collect())
}

/// `extract` on a gray frame.
pub fn extract_frame(frame: &Frame, params: &PyramidParams) -> Result<Vec<Feature>> {
    extract(&Plane::from_gray(frame)?, params)
}
