//! Sparse coding of descriptors against a learned dictionary, and max pooling of
//! the codes of one image into a fixed-length feature.
//!
//! Codes minimize `||x - Phi a||^2 + lambda ||a||_1` by cyclic coordinate descent.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{decode_f64s_len, encode_f64s};
use crate::error::{Error, Result};

pub const DEFAULT_ATOMS: usize = 256;
pub const DEFAULT_LAMBDA: f64 = 0.15;
pub const DEFAULT_ITERATIONS: usize = 30;

const CD_TOL: f64 = 1e-6;
const CD_MAX_SWEEPS: usize = 500;
const NORM_TOL: f64 = 1e-9;
const DUPLICATE_COSINE: f64 = 0.99;
const STAT_CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    dim: usize,
    m: usize,
    /// Atom-major: atom `j` is `atoms[j * dim..(j + 1) * dim]`.
    atoms: Vec<f64>,
    lambda: f64,
    gram: Vec<f64>,
    seed: u64,
    iterations: usize,
    objective: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseCode(pub Vec<f64>);

impl SparseCode {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Fraction of coefficients that are exactly zero.
    pub fn sparsity(&self) -> f64 {
        if self.0.is_empty() {
            return 1.0;
        }
        self.0.iter().filter(|&&v| v == 0.0).count() as f64 / self.0.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageFeature {
    pub values: Vec<f64>,
    /// Number of descriptors pooled.
    pub descriptor_count: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParam(format!("dict.lambda must be finite and >= 0, got {lambda}")));
    }
    Ok(())
}

impl Dictionary {
    /// Build from atom-major data; every atom is scaled to unit norm.
    pub fn new(dim: usize, atoms: Vec<f64>, lambda: f64) -> Result<Dictionary> {
        check_lambda(lambda)?;
        if dim == 0 || atoms.is_empty() || atoms.len() % dim != 0 {
            return Err(Error::Dimension(format!("{} atom values do not split into dim {dim}", atoms.len())));
        }
        let mut atoms = atoms;
        for (j, a) in atoms.chunks_mut(dim).enumerate() {
            let n = dot(a, a).sqrt();
            if !(n > 0.0 && n.is_finite()) {
                return Err(Error::InvalidParam(format!("atom {j} has zero or non-finite norm")));
            }
            a.iter_mut().for_each(|v| *v /= n);
        }
        Ok(Self::from_unit_atoms(dim, atoms, lambda))
    }

    fn from_unit_atoms(dim: usize, atoms: Vec<f64>, lambda: f64) -> Dictionary {
        let m = atoms.len() / dim;
        let mut d = Dictionary { dim, m, atoms, lambda, gram: Vec::new(), seed: 0, iterations: 0, objective: Vec::new() };
        d.refresh_gram();
        d
    }

    fn refresh_gram(&mut self) {
        let m = self.m;
        let mut g = vec![0.0; m * m];
        for i in 0..m {
            for j in i..m {
                let v = dot(self.atom(i), self.atom(j));
                g[i * m + j] = v;
                g[j * m + i] = v;
            }
        }
        self.gram = g;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of atoms.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn atom(&self, j: usize) -> &[f64] {
        &self.atoms[j * self.dim..(j + 1) * self.dim]
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Mean per-sample objective after each training alternation.
    pub fn objective_trace(&self) -> &[f64] {
        &self.objective
    }

    pub fn reconstruct(&self, code: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (j, &a) in code.iter().enumerate() {
            if a != 0.0 {
                for (o, &p) in out.iter_mut().zip(self.atom(j)) {
                    *o += a * p;
                }
            }
        }
        out
    }

    /// `||x - Phi a||^2 + lambda ||a||_1`.
    pub fn objective(&self, x: &[f64], code: &[f64]) -> f64 {
        let r = self.reconstruct(code);
        let err: f64 = x.iter().zip(&r).map(|(a, b)| (a - b) * (a - b)).sum();
        err + self.lambda * code.iter().map(|a| a.abs()).sum::<f64>()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Dimension(format!("descriptor has {} values, dictionary dim is {}", x.len(), self.dim)));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParam("descriptor contains non-finite values".into()));
        }
        Ok(())
    }

    pub fn encode(&self, x: &[f64]) -> Result<SparseCode> {
        self.encode_from(x, vec![0.0; self.m])
    }

    /// Coordinate descent started from `init`.
    pub fn encode_from(&self, x: &[f64], init: Vec<f64>) -> Result<SparseCode> {
        self.check_input(x)?;
        if init.len() != self.m {
            return Err(Error::Dimension(format!("initial code has {} values, expected {}", init.len(), self.m)));
        }
        Ok(SparseCode(self.coordinate_descent(x, init)))
    }

    fn coordinate_descent(&self, x: &[f64], mut a: Vec<f64>) -> Vec<f64> {
        let m = self.m;
        let half = self.lambda / 2.0;
        // corr[j] = phi_j . (x - Phi a)
        let mut corr: Vec<f64> = (0..m).map(|j| dot(self.atom(j), x)).collect();
        for (k, &ak) in a.iter().enumerate() {
            if ak != 0.0 {
                let gk = &self.gram[k * m..(k + 1) * m];
                corr.iter_mut().zip(gk).for_each(|(c, &g)| *c -= g * ak);
            }
        }
        // Full sweeps alternate with sweeps over the nonzero coordinates until
        // those settle; the run ends when a full sweep moves nothing by more than
        // the tolerance.
        let mut sweeps = 0;
        let mut active: Vec<usize> = Vec::with_capacity(m);
        while sweeps < CD_MAX_SWEEPS {
            sweeps += 1;
            if self.sweep(0..m, &mut a, &mut corr, half) < CD_TOL {
                break;
            }
            active.clear();
            active.extend((0..m).filter(|&j| a[j] != 0.0));
            while sweeps < CD_MAX_SWEEPS {
                sweeps += 1;
                if self.sweep(active.iter().copied(), &mut a, &mut corr, half) < CD_TOL {
                    break;
                }
            }
        }
        a
    }

    /// One coordinate pass over `coords`; returns the largest change.
    fn sweep(&self, coords: impl Iterator<Item = usize>, a: &mut [f64], corr: &mut [f64], half: f64) -> f64 {
        let m = self.m;
        let mut max_change: f64 = 0.0;
        for j in coords {
            let gjj = self.gram[j * m + j];
            let old = a[j];
            let new = soft_threshold(corr[j] + gjj * old, half) / gjj;
            let delta = new - old;
            if delta != 0.0 {
                a[j] = new;
                let gj = &self.gram[j * m..(j + 1) * m];
                corr.iter_mut().zip(gj).for_each(|(c, &g)| *c -= g * delta);
                max_change = max_change.max(delta.abs());
            }
        }
        max_change
    }

    /// Encode many descriptors in parallel, preserving order.
    pub fn encode_all(&self, xs: &[Vec<f64>]) -> Result<Vec<SparseCode>> {
        xs.par_iter().map(|x| self.encode(x)).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.doc()).expect("dictionary serializes")
    }

    pub fn from_json(text: &str) -> Result<Dictionary> {
        let doc: DictionaryDoc = serde_json::from_str(text)?;
        Self::from_doc(doc)
    }

    pub(crate) fn doc(&self) -> DictionaryDoc {
        DictionaryDoc {
            m: self.m,
            dim: self.dim,
            lambda: self.lambda,
            seed: self.seed,
            iterations: self.iterations,
            objective: self.objective.clone(),
            basis: encode_f64s(&self.atoms),
        }
    }

    pub(crate) fn from_doc(doc: DictionaryDoc) -> Result<Dictionary> {
        check_lambda(doc.lambda)?;
        if doc.m == 0 || doc.dim == 0 {
            return Err(Error::Format("dictionary needs m >= 1 and dim >= 1".into()));
        }
        let atoms = decode_f64s_len(&doc.basis, doc.m * doc.dim, "dictionary basis")?;
        for (j, a) in atoms.chunks(doc.dim).enumerate() {
            if (dot(a, a).sqrt() - 1.0).abs() > NORM_TOL {
                return Err(Error::Format(format!("dictionary atom {j} is not unit norm")));
            }
        }
        let mut d = Self::from_unit_atoms(doc.dim, atoms, doc.lambda);
        d.seed = doc.seed;
        d.iterations = doc.iterations;
        d.objective = doc.objective;
        Ok(d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct DictionaryDoc {
    pub m: usize,
    pub dim: usize,
    pub lambda: f64,
    pub seed: u64,
    pub iterations: usize,
    pub objective: Vec<f64>,
    /// Base64 of atom-major little-endian f64.
    pub basis: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DictionaryParams {
    pub m: usize,
    pub lambda: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for DictionaryParams {
    fn default() -> Self {
        DictionaryParams { m: DEFAULT_ATOMS, lambda: DEFAULT_LAMBDA, iterations: DEFAULT_ITERATIONS, seed: 0 }
    }
}

/// Alternate between encoding all samples and a per-atom basis update.
///
/// The initial basis is `m` nonzero samples chosen in seeded random order,
/// normalized, preferring ones not nearly parallel to an earlier pick. Each basis step is one pass of block coordinate descent over the
/// atoms on the least-squares term, each atom projected onto the unit ball; atoms
/// that shrank are then rescaled to unit norm with their codes scaled to match, so
/// reconstructions are unchanged and the objective cannot rise. An atom no sample
/// uses is replaced by the normalized residual of the worst-reconstructed sample;
/// its codes are all zero, so this too leaves the objective unchanged.
pub fn learn_dictionary(samples: &[Vec<f64>], params: &DictionaryParams) -> Result<Dictionary> {
    check_lambda(params.lambda)?;
    if params.m == 0 {
        return Err(Error::InvalidParam("dict.m must be >= 1".into()));
    }
    let dim = samples.first().map(|s| s.len()).ok_or_else(|| Error::Empty("no descriptors to learn from".into()))?;
    if dim == 0 || samples.iter().any(|s| s.len() != dim) {
        return Err(Error::Dimension("descriptors must share one nonzero length".into()));
    }
    if samples.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParam("descriptors contain non-finite values".into()));
    }
    let usable: Vec<usize> = (0..samples.len()).filter(|&i| samples[i].iter().any(|&v| v != 0.0)).collect();
    if usable.len() < params.m {
        return Err(Error::Empty(format!(
            "dictionary of {} atoms needs at least as many nonzero descriptors, got {}",
            params.m,
            usable.len()
        )));
    }
    let init = initial_atoms(samples, &usable, params.m, params.seed);
    let mut dict = Dictionary::new(dim, init, params.lambda)?;
    dict.seed = params.seed;

    let m = params.m;
    let n = samples.len() as f64;
    let mut codes: Vec<Vec<f64>> = vec![vec![0.0; m]; samples.len()];
    for _ in 0..params.iterations {
        codes = samples
            .par_iter()
            .zip(codes.into_par_iter())
            .map(|(x, a)| dict.coordinate_descent(x, a))
            .collect();

        // Sufficient statistics A = sum a a^T, B = sum x a^T (B stored atom-major).
        // Summed over fixed-size chunks in order so the result does not depend on
        // the thread count.
        let partials: Vec<(Vec<f64>, Vec<f64>)> = samples
            .par_chunks(STAT_CHUNK)
            .zip(codes.par_chunks(STAT_CHUNK))
            .map(|(xs, cs)| {
                let (mut am, mut bm) = (vec![0.0; m * m], vec![0.0; m * dim]);
                for (x, a) in xs.iter().zip(cs) {
                    let nz: Vec<usize> = (0..m).filter(|&j| a[j] != 0.0).collect();
                    for &i in &nz {
                        for &j in &nz {
                            am[i * m + j] += a[i] * a[j];
                        }
                        for (b, &xv) in bm[i * dim..(i + 1) * dim].iter_mut().zip(x) {
                            *b += a[i] * xv;
                        }
                    }
                }
                (am, bm)
            })
            .collect();
        let (mut a_mat, mut b_mat) = (vec![0.0; m * m], vec![0.0; m * dim]);
        for (am, bm) in partials {
            a_mat.iter_mut().zip(&am).for_each(|(x, y)| *x += y);
            b_mat.iter_mut().zip(&bm).for_each(|(x, y)| *x += y);
        }

        let mut atoms = dict.atoms.clone();
        let mut scale = vec![1.0; m];
        for j in 0..m {
            let ajj = a_mat[j * m + j];
            if ajj <= 0.0 {
                continue;
            }
            // u = phi_j + (B_j - Phi A_j) / A_jj
            let mut u: Vec<f64> = atoms[j * dim..(j + 1) * dim].to_vec();
            let mut phi_aj = vec![0.0; dim];
            for k in 0..m {
                let akj = a_mat[k * m + j];
                if akj != 0.0 {
                    for (p, &v) in phi_aj.iter_mut().zip(&atoms[k * dim..(k + 1) * dim]) {
                        *p += akj * v;
                    }
                }
            }
            for ((uv, &bv), &pv) in u.iter_mut().zip(&b_mat[j * dim..(j + 1) * dim]).zip(&phi_aj) {
                *uv += (bv - pv) / ajj;
            }
            let norm = dot(&u, &u).sqrt();
            if norm < 1e-12 {
                continue;
            }
            if norm > 1.0 {
                u.iter_mut().for_each(|v| *v /= norm);
            }
            atoms[j * dim..(j + 1) * dim].copy_from_slice(&u);
        }
        for j in 0..m {
            let a = &mut atoms[j * dim..(j + 1) * dim];
            let norm = dot(a, a).sqrt();
            if norm < 1.0 {
                a.iter_mut().for_each(|v| *v /= norm);
                scale[j] = norm;
            }
        }
        for code in codes.iter_mut() {
            code.iter_mut().zip(&scale).for_each(|(c, &s)| *c *= s);
        }
        let unused: Vec<usize> = (0..m).filter(|&j| a_mat[j * m + j] <= 0.0).collect();
        if !unused.is_empty() {
            replace_unused_atoms(&mut atoms, dim, &unused, samples, &codes);
        }
        let mut next = Dictionary::from_unit_atoms(dim, atoms, params.lambda);
        next.seed = dict.seed;
        next.objective = std::mem::take(&mut dict.objective);
        let per_sample: Vec<f64> = samples.par_iter().zip(&codes).map(|(x, a)| next.objective(x, a)).collect();
        let total: f64 = per_sample.iter().sum();
        next.objective.push(total / n);
        next.iterations = dict.iterations + 1;
        dict = next;
    }
    Ok(dict)
}

/// Nonzero samples in seeded random order, skipping any nearly parallel to one
/// already taken; the skipped ones fill in if too few distinct directions exist.
fn initial_atoms(samples: &[Vec<f64>], usable: &[usize], m: usize, seed: u64) -> Vec<f64> {
    let mut order = usable.to_vec();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let unit = |i: usize| {
        let n = dot(&samples[i], &samples[i]).sqrt();
        samples[i].iter().map(|v| v / n).collect::<Vec<f64>>()
    };
    let mut chosen: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut skipped = Vec::new();
    for &i in &order {
        if chosen.len() == m {
            break;
        }
        let u = unit(i);
        if chosen.iter().any(|c| dot(c, &u).abs() > DUPLICATE_COSINE) {
            skipped.push(u);
        } else {
            chosen.push(u);
        }
    }
    chosen.extend(skipped.into_iter().take(m - chosen.len()));
    chosen.concat()
}

fn replace_unused_atoms(atoms: &mut [f64], dim: usize, unused: &[usize], samples: &[Vec<f64>], codes: &[Vec<f64>]) {
    let mut residuals: Vec<(f64, usize, Vec<f64>)> = samples
        .par_iter()
        .zip(codes)
        .enumerate()
        .map(|(i, (x, a))| {
            let mut r = x.clone();
            for (j, &c) in a.iter().enumerate() {
                if c != 0.0 {
                    for (rv, &p) in r.iter_mut().zip(&atoms[j * dim..(j + 1) * dim]) {
                        *rv -= c * p;
                    }
                }
            }
            (dot(&r, &r), i, r)
        })
        .collect();
    residuals.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for (&j, (err, _, r)) in unused.iter().zip(residuals) {
        if err <= 1e-24 {
            break;
        }
        let n = err.sqrt();
        for (a, v) in atoms[j * dim..(j + 1) * dim].iter_mut().zip(r) {
            *a = v / n;
        }
    }
}

/// Componentwise max of absolute coefficients; zeros of length `m` when empty.
pub fn pool_codes(codes: &[SparseCode], m: usize) -> Result<ImageFeature> {
    let mut values = vec![0.0; m];
    for c in codes {
        if c.len() != m {
            return Err(Error::Dimension(format!("code has {} values, expected {m}", c.len())));
        }
        values.iter_mut().zip(&c.0).for_each(|(v, a): (&mut f64, &f64)| *v = v.max(a.abs()));
    }
    Ok(ImageFeature { values, descriptor_count: codes.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn identity(dim: usize, lambda: f64) -> Dictionary {
        let mut atoms = vec![0.0; dim * dim];
        for i in 0..dim {
            atoms[i * dim + i] = 1.0;
        }
        Dictionary::new(dim, atoms, lambda).unwrap()
    }

    /// Random orthonormal basis by Gram-Schmidt.
    fn orthonormal(dim: usize, rng: &mut impl Rng) -> Vec<f64> {
        let mut out: Vec<Vec<f64>> = Vec::new();
        while out.len() < dim {
            let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for u in &out {
                let p = dot(&v, u);
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= p * b);
            }
            let n = dot(&v, &v).sqrt();
            if n > 1e-3 {
                out.push(v.into_iter().map(|a| a / n).collect());
            }
        }
        out.concat()
    }

    #[test]
    fn identity_without_penalty_reproduces_input() {
        let d = identity(128, 0.0);
        let x: Vec<f64> = (0..128).map(|i| (i as f64 * 0.37).sin()).collect();
        assert_eq!(d.encode(&x).unwrap().0, x);
    }

    #[test]
    fn large_penalty_gives_zero_code() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let atoms: Vec<f64> = (0..8 * 16).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let d0 = Dictionary::new(16, atoms, 0.0).unwrap();
        let x: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let max_corr = (0..8).map(|j| dot(d0.atom(j), &x).abs()).fold(0.0, f64::max);
        let d = Dictionary::new(16, d0.atoms().to_vec(), 2.0 * max_corr).unwrap();
        let code = d.encode(&x).unwrap();
        assert!(code.0.iter().all(|&a| a == 0.0));
        assert_eq!(code.sparsity(), 1.0);
    }

    #[test]
    fn orthonormal_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for lambda in [0.0, 0.05, 0.3, 1.0] {
            let d = Dictionary::new(32, orthonormal(32, &mut rng), lambda).unwrap();
            let x: Vec<f64> = (0..32).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let code = d.encode(&x).unwrap();
            for j in 0..32 {
                let c = dot(d.atom(j), &x);
                let expect = c.signum() * (c.abs() - lambda / 2.0).max(0.0);
                assert!((code.0[j] - expect).abs() < 1e-8, "lambda {lambda} atom {j}");
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        let d = identity(4, 0.1);
        assert!(d.encode(&[0.0, 1.0, f64::NAN, 0.0]).is_err());
        assert!(d.encode(&[0.0; 3]).is_err());
        assert!(Dictionary::new(2, vec![0.0, 0.0], 0.1).is_err());
        assert!(Dictionary::new(2, vec![1.0, 0.0], -0.1).is_err());
    }

    #[test]
    fn pooling() {
        let a = SparseCode(vec![1.0, 0.0]);
        let b = SparseCode(vec![0.0, -2.0]);
        assert_eq!(pool_codes(&[a.clone()], 2).unwrap().values, vec![1.0, 0.0]);
        assert_eq!(pool_codes(&[a.clone(), b], 2).unwrap().values, vec![1.0, 2.0]);
        let empty = pool_codes(&[], 3).unwrap();
        assert_eq!((empty.values, empty.descriptor_count), (vec![0.0; 3], 0));
        assert!(pool_codes(&[a, SparseCode(vec![1.0])], 2).is_err());
    }

    #[test]
    fn zero_iterations_keeps_seeded_init() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let samples: Vec<Vec<f64>> = (0..20).map(|_| (0..6).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
        let p = DictionaryParams { m: 4, lambda: 0.1, iterations: 0, seed: 77 };
        let d = learn_dictionary(&samples, &p).unwrap();
        let mut order: Vec<usize> = (0..20).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(77));
        for (j, &p) in order[..4].iter().enumerate() {
            let n = dot(&samples[p], &samples[p]).sqrt();
            for (a, b) in d.atom(j).iter().zip(&samples[p]) {
                assert!((a - b / n).abs() < 1e-15);
            }
        }
        assert!(d.objective_trace().is_empty());
        assert_eq!(learn_dictionary(&samples, &p).unwrap(), d);
    }

    #[test]
    fn too_few_descriptors() {
        let samples = vec![vec![1.0, 0.0]; 3];
        let p = DictionaryParams { m: 4, ..DictionaryParams::default() };
        assert!(matches!(learn_dictionary(&samples, &p), Err(Error::Empty(_))));
    }

    #[test]
    fn json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples: Vec<Vec<f64>> = (0..40).map(|_| (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let d = learn_dictionary(&samples, &DictionaryParams { m: 5, lambda: 0.2, iterations: 3, seed: 1 }).unwrap();
        let back = Dictionary::from_json(&d.to_json()).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.to_json(), d.to_json());
        assert!(Dictionary::from_json("{\"m\": 1}").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn code_never_worse_than_zero(seed in any::<u64>(), lambda in 0.0f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let atoms: Vec<f64> = (0..12 * 10).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let d = Dictionary::new(10, atoms, lambda).unwrap();
            let x: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let code = d.encode(&x).unwrap();
            prop_assert!(code.0.iter().all(|v| v.is_finite()));
            prop_assert!(d.objective(&x, &code.0) <= d.objective(&x, &[0.0; 12]) + 1e-12);
        }

        // Holds for orthonormal dictionaries. For general overcomplete ones the
        // lasso path can drop one coefficient and pick up two as lambda grows.
        #[test]
        fn orthonormal_sparsity_monotone_in_lambda(seed in any::<u64>(), l1 in 0.0f64..2.0, l2 in 0.0f64..2.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let basis = orthonormal(8, &mut rng);
            let x: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let zeros = |l: f64| {
                let d = Dictionary::new(8, basis.clone(), l).unwrap();
                d.encode(&x).unwrap().0.iter().filter(|&&a| a == 0.0).count()
            };
            prop_assert!(zeros(l1.max(l2)) >= zeros(l1.min(l2)));
        }
    }
}
