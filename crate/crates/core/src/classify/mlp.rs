use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{argmax_label, check_dim, Prediction};
use crate::error::{Error, Result};

const GRAD_CHUNK: usize = 32;

/// One hidden layer, sigmoid everywhere, trained on half mean squared error
/// `1/(2n) sum (o - t)^2` against one-hot targets.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub(crate) inputs: usize,
    pub(crate) hidden: usize,
    pub(crate) outputs: usize,
    /// `hidden x inputs`, row-major.
    pub(crate) w1: Vec<f64>,
    pub(crate) b1: Vec<f64>,
    /// `outputs x hidden`, row-major.
    pub(crate) w2: Vec<f64>,
    pub(crate) b2: Vec<f64>,
    pub(crate) loss: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub hidden: usize,
    pub rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams { hidden: 64, rate: 0.1, epochs: 500, seed: 0 }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl MlpModel {
    /// Weights and biases drawn from uniform(-0.5, 0.5) in the order w1, b1, w2, b2.
    pub fn init(inputs: usize, hidden: usize, outputs: usize, seed: u64) -> MlpModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |n: usize| (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect::<Vec<f64>>();
        let w1 = draw(hidden * inputs);
        let b1 = draw(hidden);
        let w2 = draw(outputs * hidden);
        let b2 = draw(outputs);
        MlpModel { inputs, hidden, outputs, w1, b1, w2, b2, loss: Vec::new() }
    }

    pub fn train(features: &[Vec<f64>], targets: &[usize], classes: usize, params: &MlpParams) -> Result<MlpModel> {
        if classes < 2 {
            return Err(Error::Training("MLP needs at least two classes".into()));
        }
        if params.hidden < 1 || !(params.rate > 0.0 && params.rate.is_finite()) {
            return Err(Error::InvalidParam("mlp.hidden must be >= 1 and mlp.rate positive".into()));
        }
        let inputs = features.first().map_or(0, |f| f.len());
        let mut model = MlpModel::init(inputs, params.hidden, classes, params.seed);
        for _ in 0..params.epochs {
            let (loss, grad) = model.loss_and_gradient(features, targets);
            model.loss.push(loss);
            let mut p = model.parameters();
            p.iter_mut().zip(&grad).for_each(|(w, g)| *w -= params.rate * g);
            model.set_parameters(&p);
        }
        if model.parameters().iter().any(|v| !v.is_finite()) {
            return Err(Error::Training("MLP weights diverged".into()));
        }
        Ok(model)
    }

    pub fn loss_trace(&self) -> &[f64] {
        &self.loss
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn parameter_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// All weights flattened as w1, b1, w2, b2.
    pub fn parameters(&self) -> Vec<f64> {
        [&self.w1[..], &self.b1, &self.w2, &self.b2].concat()
    }

    pub fn set_parameters(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.parameter_count());
        let (a, rest) = p.split_at(self.w1.len());
        let (b, rest) = rest.split_at(self.b1.len());
        let (c, d) = rest.split_at(self.w2.len());
        self.w1.copy_from_slice(a);
        self.b1.copy_from_slice(b);
        self.w2.copy_from_slice(c);
        self.b2.copy_from_slice(d);
    }

    fn forward(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let hidden: Vec<f64> = (0..self.hidden)
            .map(|j| {
                let row = &self.w1[j * self.inputs..(j + 1) * self.inputs];
                sigmoid(row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b1[j])
            })
            .collect();
        let out = (0..self.outputs)
            .map(|k| {
                let row = &self.w2[k * self.hidden..(k + 1) * self.hidden];
                sigmoid(row.iter().zip(&hidden).map(|(w, v)| w * v).sum::<f64>() + self.b2[k])
            })
            .collect();
        (hidden, out)
    }

    pub fn outputs(&self, x: &[f64]) -> Vec<f64> {
        self.forward(x).1
    }

    /// Loss and its gradient with respect to `parameters()`, by backpropagation.
    pub fn loss_and_gradient(&self, features: &[Vec<f64>], targets: &[usize]) -> (f64, Vec<f64>) {
        let n = features.len() as f64;
        let (h, v, c) = (self.hidden, self.inputs, self.outputs);
        // Fixed-size chunks summed in order keep the result independent of the
        // thread count.
        let partials: Vec<(f64, Vec<f64>)> = features
            .par_chunks(GRAD_CHUNK)
            .zip(targets.par_chunks(GRAD_CHUNK))
            .map(|(xs, ts)| {
                let mut loss = 0.0;
                let mut g = vec![0.0; self.parameter_count()];
                for (x, &t) in xs.iter().zip(ts) {
                    let (hid, out) = self.forward(x);
                    let mut d2 = vec![0.0; c];
                    for k in 0..c {
                        let target = if k == t { 1.0 } else { 0.0 };
                        let e = out[k] - target;
                        loss += 0.5 * e * e;
                        d2[k] = e * out[k] * (1.0 - out[k]);
                    }
                    let mut d1 = vec![0.0; h];
                    for (j, d) in d1.iter_mut().enumerate() {
                        let back: f64 = (0..c).map(|k| self.w2[k * h + j] * d2[k]).sum();
                        *d = back * hid[j] * (1.0 - hid[j]);
                    }
                    let (gw1, rest) = g.split_at_mut(h * v);
                    let (gb1, rest) = rest.split_at_mut(h);
                    let (gw2, gb2) = rest.split_at_mut(c * h);
                    for j in 0..h {
                        if d1[j] != 0.0 {
                            for (gw, &xv) in gw1[j * v..(j + 1) * v].iter_mut().zip(x.iter()) {
                                *gw += d1[j] * xv;
                            }
                        }
                        gb1[j] += d1[j];
                    }
                    for k in 0..c {
                        for (gw, &hv) in gw2[k * h..(k + 1) * h].iter_mut().zip(&hid) {
                            *gw += d2[k] * hv;
                        }
                        gb2[k] += d2[k];
                    }
                }
                (loss, g)
            })
            .collect();
        let mut loss = 0.0;
        let mut grad = vec![0.0; self.parameter_count()];
        for (l, g) in partials {
            loss += l;
            grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        }
        grad.iter_mut().for_each(|g| *g /= n);
        (loss / n, grad)
    }

    pub fn predict(&self, query: &[f64], labels: &[String]) -> Result<Prediction> {
        check_dim(query, self.inputs)?;
        let scores = self.outputs(query);
        let best = argmax_label(&scores, labels);
        Ok(Prediction { label: labels[best].clone(), class: best, score: scores[best], scores })
    }
}
