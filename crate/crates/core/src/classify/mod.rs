//! KNN, sigmoid MLP and kernel SVM classifiers behind one train/predict interface.
//!
//! Class indices follow the order in which labels first appear in the training
//! data. The SVM is made multiclass one-vs-rest.

mod kernel;
mod knn;
mod mlp;
mod svm;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{decode_f64s_len, encode_f64s};
use crate::error::{Error, Result};

pub use kernel::{dot, euclidean_distance, squared_distance, Kernel};
pub use knn::KnnModel;
pub use mlp::{sigmoid, MlpModel, MlpParams};
pub use svm::{dual_objective, kernel_matrix, kkt_violation, min_eigenvalue, smo, BinarySvm, SmoSolution, SvmParams};

/// Features with string labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledDataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<String>,
}

impl LabeledDataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<String>) -> Result<LabeledDataset> {
        let d = LabeledDataset { features, labels };
        d.validate()?;
        Ok(d)
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, |f| f.len())
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.len() != self.labels.len() {
            return Err(Error::Dimension(format!(
                "{} feature vectors but {} labels",
                self.features.len(),
                self.labels.len()
            )));
        }
        if self.features.is_empty() {
            return Err(Error::Empty("dataset has no samples".into()));
        }
        let dim = self.dim();
        if self.features.iter().any(|f| f.len() != dim) {
            return Err(Error::Dimension("feature vectors differ in length".into()));
        }
        if self.features.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParam("features contain non-finite values".into()));
        }
        Ok(())
    }

    /// Distinct labels in order of first appearance.
    pub fn vocabulary(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for l in &self.labels {
            if !out.contains(l) {
                out.push(l.clone());
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: String,
    /// Index of `label` in the model's vocabulary.
    pub class: usize,
    /// Vote fraction (KNN), output activation (MLP) or signed score (SVM) of the winner.
    pub score: f64,
    /// Per-class scores in vocabulary order.
    pub scores: Vec<f64>,
}

pub(crate) fn check_dim(x: &[f64], dim: usize) -> Result<()> {
    if x.len() != dim {
        return Err(Error::Dimension(format!("query has {} values, model expects {dim}", x.len())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParam("query contains non-finite values".into()));
    }
    Ok(())
}

/// Index of the highest score; ties go to the lexicographically smallest label.
pub(crate) fn argmax_label(scores: &[f64], labels: &[String]) -> usize {
    (0..scores.len())
        .min_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(labels[a].cmp(&labels[b])))
        .expect("at least one class")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Knn,
    Ann,
    Svm,
}

impl ClassifierKind {
    pub fn parse(s: &str) -> Result<ClassifierKind> {
        match s.to_ascii_lowercase().as_str() {
            "knn" => Ok(ClassifierKind::Knn),
            "ann" | "mlp" => Ok(ClassifierKind::Ann),
            "svm" => Ok(ClassifierKind::Svm),
            _ => Err(Error::InvalidParam(format!("unknown classifier {s:?}, expected knn, ann or svm"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Knn => "knn",
            ClassifierKind::Ann => "ann",
            ClassifierKind::Svm => "svm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Rbf,
    Poly,
    Linear,
}

impl KernelKind {
    pub fn parse(s: &str) -> Result<KernelKind> {
        match s.to_ascii_lowercase().as_str() {
            "rbf" => Ok(KernelKind::Rbf),
            "poly" | "polynomial" => Ok(KernelKind::Poly),
            "linear" => Ok(KernelKind::Linear),
            _ => Err(Error::InvalidParam(format!("unknown kernel {s:?}, expected rbf, poly or linear"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Rbf => "rbf",
            KernelKind::Poly => "poly",
            KernelKind::Linear => "linear",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParams {
    pub kind: ClassifierKind,
    pub knn_k: usize,
    pub mlp: MlpParams,
    pub svm_c: f64,
    pub svm_kernel: KernelKind,
    /// RBF width; `None` means `1 / dim`.
    pub svm_gamma: Option<f64>,
    pub svm_degree: u32,
    pub svm_tol: f64,
    pub svm_max_iter: usize,
}

impl Default for ClassifierParams {
    fn default() -> Self {
        ClassifierParams {
            kind: ClassifierKind::Svm,
            knn_k: 5,
            mlp: MlpParams::default(),
            svm_c: 10.0,
            svm_kernel: KernelKind::Rbf,
            svm_gamma: None,
            svm_degree: 3,
            svm_tol: 1e-3,
            svm_max_iter: 100_000,
        }
    }
}

impl ClassifierParams {
    pub fn svm_params(&self, dim: usize) -> SvmParams {
        let kernel = match self.svm_kernel {
            KernelKind::Rbf => Kernel::Rbf { gamma: self.svm_gamma.unwrap_or(1.0 / dim.max(1) as f64) },
            KernelKind::Poly => Kernel::Poly { degree: self.svm_degree },
            KernelKind::Linear => Kernel::Linear,
        };
        SvmParams { c: self.svm_c, kernel, tol: self.svm_tol, max_iter: self.svm_max_iter }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelBody {
    Knn(KnnModel),
    Ann(MlpModel),
    /// One machine per class, positive for that class.
    Svm(Vec<BinarySvm>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub labels: Vec<String>,
    pub dim: usize,
    pub body: ModelBody,
}

impl TrainedModel {
    pub fn kind(&self) -> ClassifierKind {
        match self.body {
            ModelBody::Knn(_) => ClassifierKind::Knn,
            ModelBody::Ann(_) => ClassifierKind::Ann,
            ModelBody::Svm(_) => ClassifierKind::Svm,
        }
    }

    pub fn train(data: &LabeledDataset, params: &ClassifierParams) -> Result<TrainedModel> {
        data.validate()?;
        let labels = data.vocabulary();
        if labels.len() < 2 {
            return Err(Error::Training(format!("need at least two classes, got {}", labels.len())));
        }
        let targets: Vec<usize> =
            data.labels.iter().map(|l| labels.iter().position(|v| v == l).expect("label in vocabulary")).collect();
        let dim = data.dim();
        let body = match params.kind {
            ClassifierKind::Knn => ModelBody::Knn(KnnModel::train(&data.features, &targets, params.knn_k)?),
            ClassifierKind::Ann => {
                ModelBody::Ann(MlpModel::train(&data.features, &targets, labels.len(), &params.mlp)?)
            }
            ClassifierKind::Svm => {
                let sp = params.svm_params(dim);
                sp.validate()?;
                let machines = (0..labels.len())
                    .into_par_iter()
                    .map(|c| {
                        let ys: Vec<f64> = targets.iter().map(|&t| if t == c { 1.0 } else { -1.0 }).collect();
                        BinarySvm::train(&data.features, &ys, &sp).map(|(m, _)| m)
                    })
                    .collect::<Result<Vec<_>>>()?;
                ModelBody::Svm(machines)
            }
        };
        Ok(TrainedModel { labels, dim, body })
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        check_dim(x, self.dim)?;
        match &self.body {
            ModelBody::Knn(m) => m.predict(x, &self.labels),
            ModelBody::Ann(m) => m.predict(x, &self.labels),
            ModelBody::Svm(ms) => {
                let scores: Vec<f64> = ms.iter().map(|m| m.decision_unchecked(x)).collect();
                let best = argmax_label(&scores, &self.labels);
                Ok(Prediction { label: self.labels[best].clone(), class: best, score: scores[best], scores })
            }
        }
    }

    /// Predict many queries in parallel, preserving order.
    pub fn predict_all(&self, xs: &[Vec<f64>]) -> Result<Vec<Prediction>> {
        xs.par_iter().map(|x| self.predict(x)).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.doc()).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<TrainedModel> {
        Self::from_doc(serde_json::from_str(text)?)
    }

    pub(crate) fn doc(&self) -> ModelDoc {
        let labels = self.labels.clone();
        let dim = self.dim;
        match &self.body {
            ModelBody::Knn(m) => ModelDoc::Knn {
                labels,
                dim,
                k: m.k,
                features: encode_f64s(&m.features.concat()),
                targets: m.targets.clone(),
            },
            ModelBody::Ann(m) => ModelDoc::Ann {
                labels,
                dim,
                hidden: m.hidden,
                w1: encode_f64s(&m.w1),
                b1: encode_f64s(&m.b1),
                w2: encode_f64s(&m.w2),
                b2: encode_f64s(&m.b2),
                loss: encode_f64s(&m.loss),
            },
            ModelBody::Svm(ms) => ModelDoc::Svm {
                labels,
                dim,
                machines: ms
                    .iter()
                    .map(|m| MachineDoc {
                        kernel: m.kernel,
                        c: m.c,
                        bias: m.bias,
                        support_vectors: m.vectors.len(),
                        vectors: encode_f64s(&m.vectors.concat()),
                        alphas: encode_f64s(&m.alphas),
                        ys: encode_f64s(&m.ys),
                    })
                    .collect(),
            },
        }
    }

    pub(crate) fn from_doc(doc: ModelDoc) -> Result<TrainedModel> {
        let split = |flat: Vec<f64>, dim: usize| -> Vec<Vec<f64>> {
            if dim == 0 {
                return Vec::new();
            }
            flat.chunks(dim).map(|c| c.to_vec()).collect()
        };
        let check_labels = |labels: &[String]| -> Result<()> {
            if labels.len() < 2 {
                return Err(Error::Format("model needs at least two labels".into()));
            }
            for (i, l) in labels.iter().enumerate() {
                if labels[..i].contains(l) {
                    return Err(Error::Format(format!("duplicate label {l:?} in model")));
                }
            }
            Ok(())
        };
        match doc {
            ModelDoc::Knn { labels, dim, k, features, targets } => {
                check_labels(&labels)?;
                let n = targets.len();
                if k < 1 || k > n || targets.iter().any(|&t| t >= labels.len()) {
                    return Err(Error::Format("inconsistent knn model".into()));
                }
                let features = split(decode_f64s_len(&features, n * dim, "knn features")?, dim);
                if features.len() != n {
                    return Err(Error::Format("knn model needs dim >= 1".into()));
                }
                Ok(TrainedModel { labels, dim, body: ModelBody::Knn(KnnModel { k, dim, features, targets }) })
            }
            ModelDoc::Ann { labels, dim, hidden, w1, b1, w2, b2, loss } => {
                check_labels(&labels)?;
                let c = labels.len();
                let m = MlpModel {
                    inputs: dim,
                    hidden,
                    outputs: c,
                    w1: decode_f64s_len(&w1, hidden * dim, "ann w1")?,
                    b1: decode_f64s_len(&b1, hidden, "ann b1")?,
                    w2: decode_f64s_len(&w2, c * hidden, "ann w2")?,
                    b2: decode_f64s_len(&b2, c, "ann b2")?,
                    loss: crate::codec::decode_f64s(&loss)?,
                };
                Ok(TrainedModel { labels, dim, body: ModelBody::Ann(m) })
            }
            ModelDoc::Svm { labels, dim, machines } => {
                check_labels(&labels)?;
                if machines.len() != labels.len() {
                    return Err(Error::Format(format!(
                        "svm model has {} machines for {} labels",
                        machines.len(),
                        labels.len()
                    )));
                }
                let ms = machines
                    .into_iter()
                    .map(|md| {
                        md.kernel.validate().map_err(|e| Error::Format(e.to_string()))?;
                        let n = md.support_vectors;
                        let vectors = split(decode_f64s_len(&md.vectors, n * dim, "svm vectors")?, dim);
                        if vectors.len() != n {
                            return Err(Error::Format("svm model needs dim >= 1".into()));
                        }
                        Ok(BinarySvm {
                            kernel: md.kernel,
                            c: md.c,
                            dim,
                            vectors,
                            alphas: decode_f64s_len(&md.alphas, n, "svm alphas")?,
                            ys: decode_f64s_len(&md.ys, n, "svm ys")?,
                            bias: md.bias,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(TrainedModel { labels, dim, body: ModelBody::Svm(ms) })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub(crate) enum ModelDoc {
    Knn {
        labels: Vec<String>,
        dim: usize,
        k: usize,
        features: String,
        targets: Vec<usize>,
    },
    Ann {
        labels: Vec<String>,
        dim: usize,
        hidden: usize,
        w1: String,
        b1: String,
        w2: String,
        b2: String,
        loss: String,
    },
    Svm {
        labels: Vec<String>,
        dim: usize,
        machines: Vec<MachineDoc>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct MachineDoc {
    kernel: Kernel,
    c: f64,
    bias: f64,
    support_vectors: usize,
    vectors: String,
    alphas: String,
    ys: String,
}
