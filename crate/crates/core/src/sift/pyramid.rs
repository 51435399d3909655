use crate::error::{Error, Result};

use super::{Plane, PyramidParams};

/// Smallest octave side we are willing to build.
const MIN_OCTAVE_SIDE: usize = 8;

/// Sampled, normalized 1-d Gaussian on radius `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParam(format!("gaussian sigma must be positive, got {sigma}")));
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius).map(|x| (-((x * x) as f64) / (2.0 * sigma * sigma)).exp()).collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    Ok(k)
}

/// Separable Gaussian blur with edge replication.
pub fn blur(image: &Plane, sigma: f64) -> Result<Plane> {
    let kernel = gaussian_kernel(sigma)?;
    let r = (kernel.len() / 2) as isize;
    let (w, h) = (image.width, image.height);
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;

    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &image.data[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (t, &kv) in kernel.iter().enumerate() {
                acc += kv * row[clamp(x as isize + t as isize - r, w)];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for (t, &kv) in kernel.iter().enumerate() {
            let src = clamp(y as isize + t as isize - r, h) * w;
            let dst = y * w;
            for x in 0..w {
                out[dst + x] += kv * tmp[src + x];
            }
        }
    }
    Ok(Plane { width: w, height: h, data: out })
}

fn downsample(image: &Plane) -> Plane {
    let (w, h) = (image.width.div_ceil(2), image.height.div_ceil(2));
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            data.push(image.data[2 * y * image.width + 2 * x]);
        }
    }
    Plane { width: w, height: h, data }
}

#[derive(Debug, Clone)]
pub struct Octave {
    /// Power-of-two factor from octave pixels to base-image pixels.
    pub scale: usize,
    pub width: usize,
    pub height: usize,
    /// `s + 3` Gaussian levels.
    pub gaussians: Vec<Plane>,
    /// `s + 2` DoG levels, `dogs[i] = gaussians[i + 1] - gaussians[i]`.
    pub dogs: Vec<Plane>,
    /// Blur of each Gaussian level in octave pixel units.
    pub sigmas: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ScaleSpace {
    pub octaves: Vec<Octave>,
    pub params: PyramidParams,
}

/// Number of octaves that fit the image, capped at the requested count.
pub fn usable_octaves(width: usize, height: usize, requested: usize) -> usize {
    let mut n = 0;
    let (mut w, mut h) = (width, height);
    while n < requested && w.min(h) >= MIN_OCTAVE_SIDE {
        n += 1;
        w = w.div_ceil(2);
        h = h.div_ceil(2);
    }
    n
}

/// Gaussian and DoG pyramids.
///
/// Every level is blurred directly from its octave base, so the first octave holds
/// exactly `G(sigma0 * k^i) * I`. Later octaves start from the level with twice the
/// base blur, subsampled by two.
pub fn build_scale_space(image: &Plane, params: &PyramidParams) -> Result<ScaleSpace> {
    params.validate()?;
    if image.width < 16 || image.height < 16 {
        return Err(Error::InvalidParam(format!(
            "SIFT input must be at least 16x16, got {}x{}",
            image.width, image.height
        )));
    }
    let n_oct = usable_octaves(image.width, image.height, params.octaves);
    if n_oct < params.octaves {
        log::warn!(
            "{}x{} image supports only {n_oct} of {} octaves",
            image.width,
            image.height,
            params.octaves
        );
    }
    let s = params.scales;
    let k = params.k();
    let sigmas: Vec<f64> = (0..s + 3).map(|i| params.sigma0 * k.powi(i as i32)).collect();

    let mut octaves: Vec<Octave> = Vec::with_capacity(n_oct);
    for o in 0..n_oct {
        let gaussians = if o == 0 {
            sigmas.iter().map(|&sg| blur(image, sg)).collect::<Result<Vec<_>>>()?
        } else {
            let base = downsample(&octaves[o - 1].gaussians[s]);
            let mut levels = vec![base.clone()];
            for &sg in &sigmas[1..] {
                let extra = (sg * sg - params.sigma0 * params.sigma0).sqrt();
                levels.push(blur(&base, extra)?);
            }
            levels
        };
        let dogs = gaussians
            .windows(2)
            .map(|pair| Plane {
                width: pair[0].width,
                height: pair[0].height,
                data: pair[1].data.iter().zip(&pair[0].data).map(|(a, b)| a - b).collect(),
            })
            .collect();
        octaves.push(Octave {
            scale: 1 << o,
            width: gaussians[0].width,
            height: gaussians[0].height,
            gaussians,
            dogs,
            sigmas: sigmas.clone(),
        });
    }
    Ok(ScaleSpace { octaves, params: params.clone() })
}
