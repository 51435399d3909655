use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::classify::{ModelDoc, TrainedModel};
use crate::encoding::{Dictionary, DictionaryDoc, ImageFeature};
use crate::error::{Error, Result};
use crate::sift::DESCRIPTOR_LEN;

use super::config::PipelineConfig;

pub const BUNDLE_VERSION: u32 = 1;

/// Everything needed to classify new samples: the extraction settings, the
/// dictionary and the trained classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedBundle {
    pub config: PipelineConfig,
    pub dictionary: Dictionary,
    pub model: TrainedModel,
    /// Training samples per label, in vocabulary order.
    pub train_counts: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BundleDoc {
    version: u32,
    labels: Vec<String>,
    train_counts: Vec<usize>,
    config: Map<String, Value>,
    dictionary: DictionaryDoc,
    model: ModelDoc,
}

impl TrainedBundle {
    pub fn labels(&self) -> &[String] {
        &self.model.labels
    }

    /// Pooled feature from the sparse codes of `descriptors`.
    pub fn feature(&self, descriptors: &[Vec<f64>]) -> Result<ImageFeature> {
        let codes = self.dictionary.encode_all(descriptors)?;
        crate::encoding::pool_codes(&codes, self.dictionary.m())
    }

    pub fn to_json(&self) -> String {
        let doc = BundleDoc {
            version: BUNDLE_VERSION,
            labels: self.model.labels.clone(),
            train_counts: self.train_counts.clone(),
            config: self.config.to_map(false),
            dictionary: self.dictionary.doc(),
            model: self.model.doc(),
        };
        serde_json::to_string_pretty(&doc).expect("bundle serializes") + "\n"
    }

    /// Parses a bundle. Runtime settings (`workers`, `report.format`) come back
    /// at their defaults.
    pub fn from_json(text: &str) -> Result<TrainedBundle> {
        let raw: Value = serde_json::from_str(text)?;
        match raw.get("version").and_then(Value::as_u64) {
            Some(v) if v == BUNDLE_VERSION as u64 => {}
            Some(v) => return Err(Error::Format(format!("unsupported bundle version {v}, expected {BUNDLE_VERSION}"))),
            None => return Err(Error::Format("bundle has no version field".into())),
        }
        let doc: BundleDoc = serde_json::from_value(raw)?;
        let mut config = PipelineConfig::default();
        for (k, v) in &doc.config {
            config.set(k, v).map_err(|e| Error::Format(format!("bundle config: {e}")))?;
        }
        config.validate().map_err(|e| Error::Format(format!("bundle config: {e}")))?;
        let dictionary = Dictionary::from_doc(doc.dictionary)?;
        let model = TrainedModel::from_doc(doc.model)?;
        if model.labels != doc.labels || doc.train_counts.len() != doc.labels.len() {
            return Err(Error::Format("bundle labels disagree with its model".into()));
        }
        if dictionary.dim() != DESCRIPTOR_LEN || model.dim != dictionary.m() {
            return Err(Error::Format(format!(
                "dictionary is {}x{} but model expects {} inputs",
                dictionary.m(),
                dictionary.dim(),
                model.dim
            )));
        }
        if dictionary.m() != config.dict_m {
            return Err(Error::Format("dictionary size disagrees with dict.m".into()));
        }
        Ok(TrainedBundle { config, dictionary, model, train_counts: doc.train_counts })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<TrainedBundle> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        TrainedBundle::from_json(&text).map_err(|e| match e {
            Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}
