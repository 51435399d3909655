#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ritescene::sift::Plane;

/// Isotropic Gaussian bump of peak `amp` added to `base`.
pub fn blobs(w: usize, h: usize, base: f64, spots: &[(f64, f64, f64, f64)]) -> Plane {
    Plane::from_fn(w, h, |x, y| {
        let mut v = base;
        for &(cx, cy, s, amp) in spots {
            let r2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
            v += amp * (-r2 / (2.0 * s * s)).exp();
        }
        v
    })
}

/// Sum of random Gaussian bumps, used as a texture with many keypoints.
pub fn blob_texture(w: usize, h: usize, count: usize, seed: u64) -> Plane {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spots: Vec<_> = (0..count)
        .map(|_| {
            let amp = if rng.gen_bool(0.5) { 0.5 } else { -0.5 };
            (rng.gen_range(0.0..w as f64), rng.gen_range(0.0..h as f64), rng.gen_range(1.5..5.0), amp)
        })
        .collect();
    blobs(w, h, 0.5, &spots)
}

pub fn crop(p: &Plane, x0: usize, y0: usize, w: usize, h: usize) -> Plane {
    Plane::from_fn(w, h, |x, y| p.at(x + x0, y + y0))
}

/// Independent 1-d sampled Gaussian on radius ceil(3 sigma), normalized.
pub fn oracle_kernel(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as i64;
    let raw: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// Response of the dense 2-d kernel g(sigma) x g(sigma) to a unit impulse at (cx, cy).
pub fn impulse_response(w: usize, h: usize, cx: usize, cy: usize, sigma: f64) -> Vec<f64> {
    let k = oracle_kernel(sigma);
    let r = (k.len() / 2) as i64;
    let mut out = vec![0.0; w * h];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let (dx, dy) = (x - cx as i64, y - cy as i64);
            if dx.abs() <= r && dy.abs() <= r {
                out[(y as usize) * w + x as usize] = k[(dx + r) as usize] * k[(dy + r) as usize];
            }
        }
    }
    out
}

pub fn random_plane(w: usize, h: usize, seed: u64) -> Plane {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Plane::new(w, h, (0..w * h).map(|_| rng.gen()).collect())
}
