//! Base64 packing of `f64` arrays (little-endian IEEE 754) for the JSON model formats.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;

use crate::error::{Error, Result};

pub fn encode_f64s(values: &[f64]) -> String {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    STANDARD.encode(bytes)
}

pub fn decode_f64s(text: &str) -> Result<Vec<f64>> {
    let bytes = STANDARD.decode(text).map_err(|e| Error::Format(format!("bad base64 array: {e}")))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Format(format!("base64 array has {} bytes, not a multiple of 8", bytes.len())));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

/// Decode and check the element count.
pub fn decode_f64s_len(text: &str, expected: usize, what: &str) -> Result<Vec<f64>> {
    let v = decode_f64s(text)?;
    if v.len() != expected {
        return Err(Error::Format(format!("{what}: expected {expected} values, found {}", v.len())));
    }
    Ok(v)
}
