use super::kernel::squared_distance;
use super::{check_dim, Prediction};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    pub(crate) k: usize,
    pub(crate) dim: usize,
    pub(crate) features: Vec<Vec<f64>>,
    /// Index into the label vocabulary.
    pub(crate) targets: Vec<usize>,
}

impl KnnModel {
    pub fn train(features: &[Vec<f64>], targets: &[usize], k: usize) -> Result<KnnModel> {
        if k < 1 {
            return Err(Error::InvalidParam("knn.k must be >= 1".into()));
        }
        if k > features.len() {
            return Err(Error::InvalidParam(format!("knn.k = {k} exceeds the {} training samples", features.len())));
        }
        let dim = features.first().map_or(0, |f| f.len());
        Ok(KnnModel { k, dim, features: features.to_vec(), targets: targets.to_vec() })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Majority vote of the `k` nearest training samples (distance ties by
    /// training order). Vote ties go to the class with the smaller summed
    /// distance, then the lexicographically smaller label. Scores are vote fractions.
    pub fn predict(&self, query: &[f64], labels: &[String]) -> Result<Prediction> {
        check_dim(query, self.dim)?;
        let mut order: Vec<(f64, usize)> =
            self.features.iter().enumerate().map(|(i, f)| (squared_distance(f, query), i)).collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut votes = vec![0usize; labels.len()];
        let mut dist = vec![0.0; labels.len()];
        for &(d2, i) in &order[..self.k] {
            votes[self.targets[i]] += 1;
            dist[self.targets[i]] += d2.sqrt();
        }
        let best = (0..labels.len())
            .filter(|&c| votes[c] > 0)
            .min_by(|&a, &b| {
                votes[b].cmp(&votes[a]).then(dist[a].total_cmp(&dist[b])).then(labels[a].cmp(&labels[b]))
            })
            .expect("k >= 1 neighbours");
        Ok(Prediction {
            label: labels[best].clone(),
            class: best,
            score: votes[best] as f64 / self.k as f64,
            scores: votes.iter().map(|&v| v as f64 / self.k as f64).collect(),
        })
    }
}
