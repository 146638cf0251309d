//! Token embedders used by embedding retrieval and greedy-match similarity.

use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("embedder `{name}` failed: {message}")]
    Failed { name: String, message: String },
}

/// Produces one vector per input token.
pub trait Embedder: Send + Sync {
    fn name(&self) -> &str;
    fn embed_tokens(&self, tokens: &[String]) -> Result<Vec<Vec<f64>>, EmbedError>;
}

/// Test-only, non-semantic embedder: each token maps to a one-hot basis
/// vector chosen by hashing. Distinct tokens are orthogonal unless their
/// hashes collide modulo `dim`.
#[derive(Debug, Clone)]
pub struct HashedOneHot {
    pub dim: usize,
}

impl Default for HashedOneHot {
    fn default() -> Self {
        HashedOneHot { dim: 4096 }
    }
}

impl HashedOneHot {
    pub fn slot(&self, token: &str) -> usize {
        let d = Sha256::digest(token.as_bytes());
        let mut b = [0u8; 8];
        b.copy_from_slice(&d[..8]);
        (u64::from_le_bytes(b) % self.dim as u64) as usize
    }
}

impl Embedder for HashedOneHot {
    fn name(&self) -> &str {
        "hashed-onehot"
    }

    fn embed_tokens(&self, tokens: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
        Ok(tokens
            .iter()
            .map(|t| {
                let mut v = vec![0.0; self.dim];
                v[self.slot(t)] = 1.0;
                v
            })
            .collect())
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Mean of token vectors; empty input gives an empty vector.
pub fn mean_vector(vectors: &[Vec<f64>]) -> Vec<f64> {
    let Some(first) = vectors.first() else { return Vec::new() };
    let mut out = vec![0.0; first.len()];
    for v in vectors {
        for (o, x) in out.iter_mut().zip(v) {
            *o += x;
        }
    }
    let n = vectors.len() as f64;
    out.iter_mut().for_each(|o| *o /= n);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hot_is_unit_and_deterministic() {
        let e = HashedOneHot::default();
        let v = e.embed_tokens(&["heap".into(), "heap".into()]).unwrap();
        assert_eq!(v[0], v[1]);
        assert_eq!(v[0].iter().sum::<f64>(), 1.0);
        assert!((cosine(&v[0], &v[1]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_of_zero_vector_is_zero() {
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 0.0]), 0.0);
        assert_eq!(mean_vector(&[vec![1.0, 0.0], vec![0.0, 1.0]]), vec![0.5, 0.5]);
    }
}
