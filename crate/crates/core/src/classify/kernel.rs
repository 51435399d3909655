use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Kernel {
    /// `exp(-gamma ||x - y||^2)`
    Rbf { gamma: f64 },
    /// `(x . y + 1)^degree`
    Poly { degree: u32 },
    Linear,
}

impl Kernel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Kernel::Rbf { gamma } if !(gamma > 0.0 && gamma.is_finite()) => {
                Err(Error::InvalidParam(format!("svm.gamma must be positive, got {gamma}")))
            }
            Kernel::Poly { degree } if degree < 1 => Err(Error::InvalidParam("svm.degree must be >= 1".into())),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            Kernel::Rbf { gamma } => (-gamma * squared_distance(x, y)).exp(),
            Kernel::Poly { degree } => (dot(x, y) + 1.0).powi(degree as i32),
            Kernel::Linear => dot(x, y),
        }
    }
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Standard Euclidean distance.
pub fn euclidean_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("vectors of length {} and {}", x.len(), y.len())));
    }
    Ok(squared_distance(x, y).sqrt())
}
