use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ritescene::encoding::*;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimum of the 2-atom objective over a in [-2, 2]^2 on a 1e-3 grid.
fn grid_oracle(d: &Dictionary, x: &[f64]) -> f64 {
    let (p, q) = (d.atom(0), d.atom(1));
    let (pp, qq, pq) = (dot(p, p), dot(q, q), dot(p, q));
    let (px, qx, xx) = (dot(p, x), dot(q, x), dot(x, x));
    let mut best = f64::INFINITY;
    for i in 0..=4000 {
        let a = -2.0 + i as f64 * 1e-3;
        for j in 0..=4000 {
            let b = -2.0 + j as f64 * 1e-3;
            let err = xx - 2.0 * (a * px + b * qx) + a * a * pp + b * b * qq + 2.0 * a * b * pq;
            let v = err + d.lambda() * (a.abs() + b.abs());
            if v < best {
                best = v;
            }
        }
    }
    best
}

#[test]
fn two_dim_instances_match_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..6 {
        let atoms: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let lambda = rng.gen_range(0.0..0.8);
        let d = Dictionary::new(2, atoms, lambda).unwrap();
        let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let code = d.encode(&x).unwrap();
        assert!(code.0.iter().all(|a| a.abs() <= 2.0), "code outside grid: {:?}", code.0);
        let got = d.objective(&x, &code.0);
        let oracle = grid_oracle(&d, &x);
        assert!((got - oracle).abs() < 1e-4, "solver {got}, grid {oracle}");
    }
}

fn orthonormal(dim: usize, count: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    while out.len() < count {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for u in &out {
            let p = dot(&v, u);
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= p * b);
        }
        let n = dot(&v, &v).sqrt();
        out.push(v.into_iter().map(|a| a / n).collect());
    }
    out
}

#[test]
fn planted_basis_is_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let basis = orthonormal(128, 6, &mut rng);
    let samples: Vec<Vec<f64>> = (0..300)
        .map(|i| {
            let c = rng.gen_range(0.5..1.5) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            basis[i % 6].iter().map(|v| c * v).collect()
        })
        .collect();
    let d = learn_dictionary(&samples, &DictionaryParams { m: 6, lambda: 1e-3, iterations: 30, seed: 3 }).unwrap();
    let err: f64 = samples
        .iter()
        .map(|x| {
            let r = d.reconstruct(&d.encode(x).unwrap().0);
            x.iter().zip(&r).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
        })
        .sum::<f64>()
        / samples.len() as f64;
    assert!(err < 1e-3, "mean reconstruction error {err}");
}

fn random_samples(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0f64..1.0).powi(3)).collect();
            let n = dot(&v, &v).sqrt();
            v.into_iter().map(|a| a / n).collect()
        })
        .collect()
}

#[test]
fn objective_trace_non_increasing_and_atoms_unit() {
    for seed in 0..10u64 {
        let samples = random_samples(150, 32, 100 + seed);
        let d = learn_dictionary(&samples, &DictionaryParams { m: 16, lambda: 0.15, iterations: 12, seed }).unwrap();
        let trace = d.objective_trace();
        assert_eq!(trace.len(), 12);
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "seed {seed}: {trace:?}");
        }
        for j in 0..d.m() {
            assert!((dot(d.atom(j), d.atom(j)).sqrt() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn learning_is_deterministic_per_seed() {
    let samples = random_samples(80, 16, 1);
    let p = DictionaryParams { m: 8, lambda: 0.1, iterations: 5, seed: 9 };
    let a = learn_dictionary(&samples, &p).unwrap();
    assert_eq!(a.to_json(), learn_dictionary(&samples, &p).unwrap().to_json());
    let other = learn_dictionary(&samples, &DictionaryParams { seed: 10, ..p }).unwrap();
    assert_ne!(a.atoms(), other.atoms());
}

#[test]
fn pooled_feature_is_zero_only_without_descriptors() {
    let samples = random_samples(40, 16, 2);
    let d = learn_dictionary(&samples, &DictionaryParams { m: 8, lambda: 0.1, iterations: 2, seed: 0 }).unwrap();
    let codes = d.encode_all(&samples[..5]).unwrap();
    let f = pool_codes(&codes, d.m()).unwrap();
    assert_eq!(f.descriptor_count, 5);
    assert!(f.values.iter().all(|&v| v >= 0.0) && f.values.iter().any(|&v| v > 0.0));
}
