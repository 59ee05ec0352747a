//! Embedding acquisition, cosine similarity and clustering.
//!
//! Vectors are kept L2-normalized throughout the engine; the cache is keyed
//! by `(provider id, model id, content hash)` so a run never embeds the same
//! text twice and identical runs see identical vectors.

mod cluster;
mod provider;

pub use cluster::{
    cluster_entities, kmeans_partition, partition_cohesion, top_cluster, ClusterId,
    EntityCluster, DEFAULT_KMEANS_RESTARTS,
};
pub use provider::{
    EmbeddingBackend, EmbeddingService, HttpEmbeddingBackend, MockEmbeddingBackend,
};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

pub const UNIT_NORM_TOLERANCE: f64 = 1e-9;

/// A fixed-length real vector, normalized unless stated otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    /// Builds a vector without normalizing. Rejects empty or non-finite input.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::validation("embedding vector must be non-empty"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation(
                "embedding vector contains NaN or infinite components",
            ));
        }
        Ok(Self { values })
    }

    /// Builds an L2-normalized vector. Rejects the zero vector.
    pub fn unit(values: Vec<f64>) -> Result<Self> {
        let v = Self::new(values)?;
        let norm = v.l2_norm();
        if norm == 0.0 {
            return Err(Error::validation("cannot normalize the zero vector"));
        }
        Ok(Self {
            values: v.values.iter().map(|x| x / norm).collect(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_normalized(&self) -> bool {
        (self.l2_norm() - 1.0).abs() <= UNIT_NORM_TOLERANCE
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() || self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Integrity(
                "embedding vector has empty or non-finite components".into(),
            ));
        }
        Ok(())
    }
}

/// Standard cosine similarity. Errors on dimension mismatch or zero vectors.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::validation(format!(
            "cosine dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let norm_a = a.l2_norm();
    let norm_b = b.l2_norm();
    if norm_a == 0.0 || norm_b == 0.0 {
        return Err(Error::validation("cosine undefined for zero vector"));
    }
    let dot: f64 = a
        .values
        .iter()
        .zip(b.values.iter())
        .map(|(x, y)| x * y)
        .sum();
    Ok((dot / (norm_a * norm_b)).clamp(-1.0, 1.0))
}

/// Normalized arithmetic mean of the inputs; permutation-invariant.
///
/// A degenerate zero-sum mean falls back to the first input vector.
pub fn aggregate(vectors: &[EmbeddingVector]) -> Result<EmbeddingVector> {
    let first = vectors
        .first()
        .ok_or_else(|| Error::validation("aggregate requires at least one vector"))?;
    let dim = first.dim();
    if vectors.iter().any(|v| v.dim() != dim) {
        return Err(Error::validation("aggregate requires equal dimensions"));
    }
    let mut sum = vec![0.0; dim];
    for v in vectors {
        for (acc, x) in sum.iter_mut().zip(v.values.iter()) {
            *acc += x;
        }
    }
    let n = vectors.len() as f64;
    let mean: Vec<f64> = sum.into_iter().map(|x| x / n).collect();
    if mean.iter().map(|v| v * v).sum::<f64>().sqrt() == 0.0 {
        return Ok(first.clone());
    }
    EmbeddingVector::unit(mean)
}

/// Cache key for one embedded text under one backend.
pub fn cache_key(provider_id: &str, model_id: &str, text: &str) -> String {
    format!(
        "{provider_id}:{model_id}:{}",
        crate::util::sha256_hex(text)
    )
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheRecord {
    key: String,
    dim: usize,
    values: Vec<f64>,
}

/// Persistent store of embedded vectors, one record per `(key, dim, values)`.
#[derive(Debug, Default, Clone)]
pub struct EmbeddingCache {
    entries: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: &str) -> Option<EmbeddingVector> {
        self.entries
            .get(key)
            .map(|values| EmbeddingVector { values: values.clone() })
    }

    pub fn insert(&mut self, key: String, vector: &EmbeddingVector) {
        self.entries.insert(key, vector.values.clone());
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Writes one JSON record per line, sorted by key.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for (key, values) in &self.entries {
            let record = CacheRecord {
                key: key.clone(),
                dim: values.len(),
                values: values.clone(),
            };
            let line = serde_json::to_string(&record).map_err(|e| Error::Format {
                message: e.to_string(),
                offset: None,
            })?;
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let reader = std::io::BufReader::new(file);
        let mut entries = BTreeMap::new();
        let mut offset = 0usize;
        for line in reader.lines() {
            let line = line?;
            let record: CacheRecord =
                serde_json::from_str(&line).map_err(|e| Error::Format {
                    message: format!("bad cache record: {e}"),
                    offset: Some(offset + e.column().saturating_sub(1)),
                })?;
            if record.values.len() != record.dim {
                return Err(Error::Integrity(format!(
                    "cache record {} declares dim {} but carries {} values",
                    record.key,
                    record.dim,
                    record.values.len()
                )));
            }
            entries.insert(record.key, record.values);
            offset += line.len() + 1;
        }
        Ok(Self { entries })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(values: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(values.to_vec()).unwrap()
    }

    #[test]
    fn cosine_identity_orthogonality_and_hand_value() {
        let a = v(&[1.0, 0.0]);
        let b = v(&[0.0, 1.0]);
        let c = v(&[1.0, 1.0]);
        assert!((cosine(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        assert!(cosine(&a, &b).unwrap().abs() < 1e-12);
        // 1/sqrt(2)
        assert!((cosine(&a, &c).unwrap() - 0.70710678).abs() < 1e-8);
    }

    #[test]
    fn cosine_rejects_mismatch_and_zero() {
        let a = v(&[1.0, 0.0]);
        let b = v(&[1.0, 0.0, 0.0]);
        assert!(cosine(&a, &b).is_err());
        let z = EmbeddingVector {
            values: vec![0.0, 0.0],
        };
        assert!(cosine(&a, &z).is_err());
    }

    #[test]
    fn cosine_is_symmetric() {
        let a = v(&[0.3, -0.2, 0.9]);
        let b = v(&[-0.1, 0.8, 0.2]);
        assert_eq!(cosine(&a, &b).unwrap(), cosine(&b, &a).unwrap());
    }

    #[test]
    fn aggregate_singleton_and_hand_value() {
        let a = EmbeddingVector::unit(vec![1.0, 0.0]).unwrap();
        let b = EmbeddingVector::unit(vec![0.0, 1.0]).unwrap();
        let single = aggregate(&[a.clone()]).unwrap();
        assert_eq!(single, a);
        let mean = aggregate(&[a.clone(), b.clone()]).unwrap();
        assert!((mean.values()[0] - 0.7071).abs() < 1e-4);
        assert!((mean.values()[1] - 0.7071).abs() < 1e-4);
        // permutation invariance
        assert_eq!(mean, aggregate(&[b, a]).unwrap());
    }

    #[test]
    fn aggregate_zero_mean_falls_back_to_first() {
        let a = v(&[1.0, 0.0]);
        let b = v(&[-1.0, 0.0]);
        assert_eq!(aggregate(&[a.clone(), b]).unwrap(), a);
    }

    #[test]
    fn aggregate_rejects_empty() {
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn unit_rejects_zero_and_normalizes() {
        assert!(EmbeddingVector::unit(vec![0.0, 0.0]).is_err());
        let u = EmbeddingVector::unit(vec![3.0, 4.0]).unwrap();
        assert!(u.is_normalized());
        assert!((u.values()[0] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let mut cache = EmbeddingCache::new();
        cache.insert("mock:m:abc".into(), &v(&[0.6, 0.8]));
        cache.save(&path).unwrap();
        let loaded = EmbeddingCache::load(&path).unwrap();
        assert_eq!(loaded.get("mock:m:abc").unwrap(), v(&[0.6, 0.8]));
    }
}
