use crate::error::{Error, Result};

/// Colour space tag carried by every [`Frame`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ColorSpace {
    Rgb,
    /// Hue is stored as degrees / 360 in `[0, 1)`.
    Hsi,
    Gray,
}

impl ColorSpace {
    pub fn name(self) -> &'static str {
        match self {
            ColorSpace::Rgb => "RGB",
            ColorSpace::Hsi => "HSI",
            ColorSpace::Gray => "GRAY",
        }
    }

    pub fn plane_count(self) -> usize {
        match self {
            ColorSpace::Rgb | ColorSpace::Hsi => 3,
            ColorSpace::Gray => 1,
        }
    }
}

/// A decoded image stored as planar unit-interval `f64` samples, row major.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    space: ColorSpace,
    planes: Vec<Vec<f64>>,
}

impl Frame {
    pub fn new(width: usize, height: usize, space: ColorSpace, planes: Vec<Vec<f64>>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!("frame must be non-empty, got {width}x{height}")));
        }
        if planes.len() != space.plane_count() {
            return Err(Error::Dimension(format!(
                "{} frame needs {} planes, got {}",
                space.name(),
                space.plane_count(),
                planes.len()
            )));
        }
        let n = width * height;
        if let Some(p) = planes.iter().find(|p| p.len() != n) {
            return Err(Error::Dimension(format!("plane has {} samples, expected {n}", p.len())));
        }
        Ok(Frame { width, height, space, planes })
    }

    /// Constant frame with every plane set to the matching entry of `values`.
    pub fn filled(width: usize, height: usize, space: ColorSpace, values: &[f64]) -> Result<Self> {
        let planes = values.iter().map(|&v| vec![v; width * height]).collect();
        Frame::new(width, height, space, planes)
    }

    pub fn gray(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        Frame::new(width, height, ColorSpace::Gray, vec![data])
    }

    pub fn rgb(width: usize, height: usize, r: Vec<f64>, g: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        Frame::new(width, height, ColorSpace::Rgb, vec![r, g, b])
    }

    /// Build an RGB frame from a per-pixel function `f(x, y) -> [r, g, b]`.
    pub fn rgb_from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Result<Self> {
        let n = width * height;
        let mut planes = vec![Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
        for y in 0..height {
            for x in 0..width {
                let px = f(x, y);
                for c in 0..3 {
                    planes[c].push(px[c]);
                }
            }
        }
        Frame::new(width, height, ColorSpace::Rgb, planes)
    }

    pub fn gray_from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Frame::gray(width, height, data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn space(&self) -> ColorSpace {
        self.space
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        &self.planes[c]
    }

    pub fn planes(&self) -> &[Vec<f64>] {
        &self.planes
    }

    pub fn into_planes(self) -> Vec<Vec<f64>> {
        self.planes
    }

    #[inline]
    pub fn at(&self, c: usize, x: usize, y: usize) -> f64 {
        self.planes[c][y * self.width + x]
    }

    /// Sample with edge replication for out-of-range coordinates.
    #[inline]
    pub fn at_clamped(&self, c: usize, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.planes[c][y * self.width + x]
    }

    pub fn pixel(&self, x: usize, y: usize) -> Vec<f64> {
        let i = y * self.width + x;
        self.planes.iter().map(|p| p[i]).collect()
    }

    pub fn expect_space(&self, expected: ColorSpace) -> Result<()> {
        if self.space == expected {
            Ok(())
        } else {
            Err(Error::ColorSpace { expected: expected.name(), actual: self.space.name() })
        }
    }

    pub fn expect_same_dims(&self, other: &Frame) -> Result<()> {
        if self.dims() == other.dims() {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "{}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )))
        }
    }

    /// Round every sample to the nearest 8-bit level, as the PPM encoder does.
    pub fn quantized(&self) -> Frame {
        let planes = self
            .planes
            .iter()
            .map(|p| p.iter().map(|&v| quantize_u8(v) as f64 / 255.0).collect())
            .collect();
        Frame { planes, ..*self }
    }
}

/// `round(v * 255)` with halves rounded up, clamped to `0..=255`.
#[inline]
pub fn quantize_u8(v: f64) -> u8 {
    let s = (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor();
    s.clamp(0.0, 255.0) as u8
}

impl Frame {
    pub(crate) fn with_planes(&self, space: ColorSpace, planes: Vec<Vec<f64>>) -> Frame {
        debug_assert_eq!(planes.len(), space.plane_count());
        Frame { width: self.width, height: self.height, space, planes }
    }
}
