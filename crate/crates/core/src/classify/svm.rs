use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use super::check_dim;
use super::kernel::Kernel;
use crate::error::{Error, Result};

/// Curvature used when a pair's second derivative is not positive.
const TAU: f64 = 1e-12;
/// Largest training set whose kernel matrix is eigen-checked.
const PSD_CHECK_LIMIT: usize = 1500;

#[derive(Debug, Clone, PartialEq)]
pub struct SvmParams {
    pub c: f64,
    pub kernel: Kernel,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams { c: 10.0, kernel: Kernel::Rbf { gamma: 1.0 }, tol: 1e-3, max_iter: 100_000 }
    }
}

impl SvmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidParam(format!("svm.c must be positive, got {}", self.c)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParam("svm.tol must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParam("svm.max_iter must be >= 1".into()));
        }
        self.kernel.validate()
    }
}

/// Two-class kernel SVM, `f(x) = sum alpha_i y_i K(x_i, x) + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySvm {
    pub(crate) kernel: Kernel,
    pub(crate) c: f64,
    pub(crate) dim: usize,
    /// Support vectors only (`alpha > 0`).
    pub(crate) vectors: Vec<Vec<f64>>,
    pub(crate) alphas: Vec<f64>,
    pub(crate) ys: Vec<f64>,
    pub(crate) bias: f64,
}

/// Full solver state, kept for inspection and tests.
#[derive(Debug, Clone)]
pub struct SmoSolution {
    pub alphas: Vec<f64>,
    pub bias: f64,
    /// Dual objective `sum alpha - 1/2 alpha^T Q alpha` after every accepted step,
    /// starting with 0 at `alpha = 0`.
    pub dual_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

pub fn kernel_matrix(kernel: &Kernel, xs: &[Vec<f64>]) -> Vec<f64> {
    let n = xs.len();
    let rows: Vec<Vec<f64>> = (0..n).into_par_iter().map(|i| xs.iter().map(|xj| kernel.eval(&xs[i], xj)).collect()).collect();
    rows.concat()
}

/// Smallest eigenvalue of the symmetric kernel matrix.
pub fn min_eigenvalue(k: &[f64], n: usize) -> f64 {
    let m = DMatrix::from_row_slice(n, n, k);
    SymmetricEigen::new(m).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Dual objective at `alphas`.
pub fn dual_objective(kmat: &[f64], ys: &[f64], alphas: &[f64]) -> f64 {
    let n = ys.len();
    let mut quad = 0.0;
    for i in 0..n {
        if alphas[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            quad += alphas[i] * alphas[j] * ys[i] * ys[j] * kmat[i * n + j];
        }
    }
    alphas.iter().sum::<f64>() - 0.5 * quad
}

/// Sequential minimal optimization on the dual with second-order working-set
/// selection. Stops when the maximal KKT violation gap falls below `tol`.
pub fn smo(kmat: &[f64], ys: &[f64], params: &SvmParams) -> SmoSolution {
    let n = ys.len();
    let c = params.c;
    let q = |i: usize, j: usize| ys[i] * ys[j] * kmat[i * n + j];
    let mut alpha = vec![0.0; n];
    // Gradient of 1/2 a^T Q a - e^T a.
    let mut grad = vec![-1.0; n];
    let mut trace = vec![0.0];
    let mut iterations = 0;
    let mut converged = false;
    let up = |a: f64| a >= c;
    let low = |a: f64| a <= 0.0;

    while iterations < params.max_iter {
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let v = -ys[t] * grad[t];
            let in_up = if ys[t] > 0.0 { !up(alpha[t]) } else { !low(alpha[t]) };
            if in_up && v > gmax {
                gmax = v;
                i_sel = Some(t);
            }
        }
        let Some(i) = i_sel else {
            converged = true;
            break;
        };
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut best = f64::INFINITY;
        for t in 0..n {
            let in_low = if ys[t] > 0.0 { !low(alpha[t]) } else { !up(alpha[t]) };
            if !in_low {
                continue;
            }
            let v = ys[t] * grad[t];
            gmax2 = gmax2.max(v);
            let diff = gmax + v;
            if diff > 0.0 {
                let quad = kmat[i * n + i] + kmat[t * n + t] - 2.0 * kmat[i * n + t];
                let obj = -(diff * diff) / if quad > 0.0 { quad } else { TAU };
                if obj < best {
                    best = obj;
                    j_sel = Some(t);
                }
            }
        }
        let Some(j) = j_sel.filter(|_| gmax + gmax2 >= params.tol) else {
            converged = true;
            break;
        };

        let (old_i, old_j) = (alpha[i], alpha[j]);
        if ys[i] != ys[j] {
            let quad = (q(i, i) + q(j, j) + 2.0 * q(i, j)).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (q(i, i) + q(j, j) - 2.0 * q(i, j)).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for (t, g) in grad.iter_mut().enumerate() {
            *g += q(i, t) * di + q(j, t) * dj;
        }
        iterations += 1;
        let obj = -0.5 * alpha.iter().zip(&grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>();
        trace.push(obj);
    }

    // b = -rho, rho averaged over free vectors, else the midpoint of the feasible range.
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum_free) = (0usize, 0.0);
    for t in 0..n {
        let yg = ys[t] * grad[t];
        if up(alpha[t]) {
            if ys[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if low(alpha[t]) {
            if ys[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    let rho = if free > 0 { sum_free / free as f64 } else { (ub + lb) / 2.0 };
    SmoSolution { alphas: alpha, bias: -rho, dual_trace: trace, iterations, converged }
}

impl BinarySvm {
    /// `ys` must hold only -1 and +1, both present.
    pub fn train(xs: &[Vec<f64>], ys: &[f64], params: &SvmParams) -> Result<(BinarySvm, SmoSolution)> {
        params.validate()?;
        if xs.len() != ys.len() || xs.is_empty() {
            return Err(Error::Dimension("features and labels differ in count".into()));
        }
        if ys.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::InvalidParam("binary SVM labels must be -1 or +1".into()));
        }
        if !(ys.contains(&1.0) && ys.contains(&-1.0)) {
            return Err(Error::Training("binary SVM needs both classes".into()));
        }
        let n = xs.len();
        let kmat = kernel_matrix(&params.kernel, xs);
        if n <= PSD_CHECK_LIMIT {
            let scale = kmat.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
            let min = min_eigenvalue(&kmat, n);
            if min < -1e-8 * scale * n as f64 {
                log::warn!("kernel matrix is not positive semidefinite (eigenvalue {min:.3e}); SMO may not reach the optimum");
            }
        }
        let sol = smo(&kmat, ys, params);
        if !sol.converged {
            log::warn!("SMO stopped at the iteration cap ({}) before reaching tolerance", params.max_iter);
        }
        let keep: Vec<usize> = (0..n).filter(|&i| sol.alphas[i] > 0.0).collect();
        let model = BinarySvm {
            kernel: params.kernel,
            c: params.c,
            dim: xs[0].len(),
            vectors: keep.iter().map(|&i| xs[i].clone()).collect(),
            alphas: keep.iter().map(|&i| sol.alphas[i]).collect(),
            ys: keep.iter().map(|&i| ys[i]).collect(),
            bias: sol.bias,
        };
        Ok((model, sol))
    }

    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        check_dim(x, self.dim)?;
        Ok(self.decision_unchecked(x))
    }

    pub(crate) fn decision_unchecked(&self, x: &[f64]) -> f64 {
        self.vectors
            .iter()
            .zip(&self.alphas)
            .zip(&self.ys)
            .map(|((v, a), y)| a * y * self.kernel.eval(v, x))
            .sum::<f64>()
            + self.bias
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn support_vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }
}

/// Largest KKT violation of a trained machine on its training set, measured on
/// `y f(x)`: `alpha = 0` needs `y f >= 1`, `0 < alpha < C` needs `y f = 1`,
/// `alpha = C` needs `y f <= 1`.
pub fn kkt_violation(model: &BinarySvm, xs: &[Vec<f64>], ys: &[f64], alphas: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for ((x, &y), &a) in xs.iter().zip(ys).zip(alphas) {
        let m = y * model.decision_unchecked(x);
        let v = if a <= 0.0 {
            (1.0 - m).max(0.0)
        } else if a >= model.c {
            (m - 1.0).max(0.0)
        } else {
            (m - 1.0).abs()
        };
        worst = worst.max(v);
    }
    worst
}
