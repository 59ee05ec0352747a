//! Embedding backends: a seeded deterministic mock and an OpenAI-compatible
//! HTTP client, both fronted by a caching service.

use super::{cache_key, EmbeddingCache, EmbeddingVector};
use crate::error::{Error, Result};
use crate::util::derive_rng;
use async_trait::async_trait;
use rand_distr::{Distribution, Normal};
use serde::Deserialize;
use std::path::Path;
use std::sync::{Arc, Mutex};
use tokio::sync::Semaphore;

#[async_trait]
pub trait EmbeddingBackend: Send + Sync {
    fn provider_id(&self) -> &str;
    fn model_id(&self) -> &str;
    /// Embeds a batch of texts, preserving order. Vectors need not be normalized.
    async fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>>;
}

/// Seeded hash-to-vector generator: the vector for a text is a pure function
/// of `(seed, text)`, so identical runs embed identically.
pub struct MockEmbeddingBackend {
    seed: u64,
    dim: usize,
    model_id: String,
}

impl MockEmbeddingBackend {
    pub fn new(seed: u64, dim: usize) -> Self {
        Self {
            seed,
            dim,
            model_id: format!("mock-embed-{dim}d"),
        }
    }
}

#[async_trait]
impl EmbeddingBackend for MockEmbeddingBackend {
    fn provider_id(&self) -> &str {
        "mock"
    }

    fn model_id(&self) -> &str {
        &self.model_id
    }

    async fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        Ok(texts
            .iter()
            .map(|text| {
                let mut rng = derive_rng(self.seed, &format!("embed:{text}"));
                (0..self.dim).map(|_| normal.sample(&mut rng)).collect()
            })
            .collect())
    }
}

#[derive(Debug, Clone)]
pub struct HttpEmbeddingConfig {
    pub base_url: String,
    pub model_id: String,
    pub api_key_env: String,
    pub timeout_ms: u64,
    pub max_retries: u32,
}

#[derive(Deserialize)]
struct EmbeddingsResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    index: usize,
    embedding: Vec<f64>,
}

/// OpenAI-compatible `/embeddings` client.
pub struct HttpEmbeddingBackend {
    config: HttpEmbeddingConfig,
    client: reqwest::Client,
}

impl HttpEmbeddingBackend {
    pub fn new(config: HttpEmbeddingConfig) -> Result<Self> {
        let client = reqwest::Client::builder()
            .timeout(std::time::Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| Error::config(format!("http client: {e}")))?;
        Ok(Self { config, client })
    }

    fn api_key(&self) -> Result<String> {
        std::env::var(&self.config.api_key_env).map_err(|_| {
            Error::config(format!(
                "api key environment variable {} is not set",
                self.config.api_key_env
            ))
        })
    }
}

#[async_trait]
impl EmbeddingBackend for HttpEmbeddingBackend {
    fn provider_id(&self) -> &str {
        "http"
    }

    fn model_id(&self) -> &str {
        &self.config.model_id
    }

    async fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        let url = format!("{}/embeddings", self.config.base_url.trim_end_matches('/'));
        let key = self.api_key()?;
        let body = serde_json::json!({ "model": self.config.model_id, "input": texts });
        let mut last_err = String::new();
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                tokio::time::sleep(std::time::Duration::from_millis(200 * (1 << attempt))).await;
            }
            let response = self
                .client
                .post(&url)
                .bearer_auth(&key)
                .json(&body)
                .send()
                .await;
            match response {
                Ok(resp) if resp.status().is_success() => {
                    let parsed: EmbeddingsResponse = resp
                        .json()
                        .await
                        .map_err(|e| Error::Provider(format!("bad embeddings payload: {e}")))?;
                    let mut data = parsed.data;
                    data.sort_by_key(|d| d.index);
                    if data.len() != texts.len() {
                        return Err(Error::Provider(format!(
                            "embeddings response carried {} vectors for {} inputs",
                            data.len(),
                            texts.len()
                        )));
                    }
                    return Ok(data.into_iter().map(|d| d.embedding).collect());
                }
                Ok(resp) => {
                    let status = resp.status();
                    last_err = format!("status {status}");
                    if !(status.as_u16() == 429 || status.is_server_error()) {
                        return Err(Error::Request(last_err));
                    }
                }
                Err(e) => last_err = e.to_string(),
            }
        }
        Err(Error::Provider(format!(
            "embedding request failed after retries: {last_err}"
        )))
    }
}

/// Caching front over an [`EmbeddingBackend`].
///
/// Concurrent `embed_text` calls are bounded by the configured parallelism;
/// cache insertion is last-writer-wins, which is safe because values are
/// deterministic per key.
pub struct EmbeddingService {
    backend: Arc<dyn EmbeddingBackend>,
    cache: Mutex<EmbeddingCache>,
    semaphore: Arc<Semaphore>,
}

impl EmbeddingService {
    pub fn new(backend: Arc<dyn EmbeddingBackend>, parallelism: usize) -> Self {
        Self {
            backend,
            cache: Mutex::new(EmbeddingCache::new()),
            semaphore: Arc::new(Semaphore::new(parallelism.max(1))),
        }
    }

    pub fn provider_id(&self) -> String {
        self.backend.provider_id().to_string()
    }

    pub fn model_id(&self) -> String {
        self.backend.model_id().to_string()
    }

    /// Cache key this service would use for `text`.
    pub fn key_for(&self, text: &str) -> String {
        cache_key(self.backend.provider_id(), self.backend.model_id(), text)
    }

    pub fn cached_by_key(&self, key: &str) -> Option<EmbeddingVector> {
        self.cache.lock().expect("cache lock").get(key)
    }

    pub async fn embed_text(&self, text: &str) -> Result<EmbeddingVector> {
        Ok(self.embed_many(&[text.to_string()]).await?.pop().expect("one vector"))
    }

    /// Embeds texts, serving repeats from the cache. Order is preserved.
    pub async fn embed_many(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        for text in texts {
            if text.trim().is_empty() {
                return Err(Error::validation("cannot embed empty text"));
            }
        }
        let keys: Vec<String> = texts.iter().map(|t| self.key_for(t)).collect();
        let mut result: Vec<Option<EmbeddingVector>> = {
            let cache = self.cache.lock().expect("cache lock");
            keys.iter().map(|k| cache.get(k)).collect()
        };
        let mut missing: Vec<usize> = Vec::new();
        let mut missing_texts: Vec<String> = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        for (i, slot) in result.iter().enumerate() {
            if slot.is_none() && seen.insert(keys[i].clone()) {
                missing.push(i);
                missing_texts.push(texts[i].clone());
            }
        }
        if !missing_texts.is_empty() {
            let _permit = self.semaphore.acquire().await.expect("semaphore open");
            let raw = self.backend.embed_batch(&missing_texts).await?;
            let mut cache = self.cache.lock().expect("cache lock");
            for (slot, values) in missing.iter().zip(raw.into_iter()) {
                let unit = EmbeddingVector::unit(values)?;
                cache.insert(keys[*slot].clone(), &unit);
            }
            for (i, slot) in result.iter_mut().enumerate() {
                if slot.is_none() {
                    *slot = cache.get(&keys[i]);
                }
            }
        }
        Ok(result.into_iter().map(|v| v.expect("filled")).collect())
    }

    pub fn export_cache(&self) -> EmbeddingCache {
        self.cache.lock().expect("cache lock").clone()
    }

    pub fn import_cache(&self, cache: EmbeddingCache) {
        *self.cache.lock().expect("cache lock") = cache;
    }

    pub fn save_cache(&self, path: &Path) -> Result<()> {
        self.cache.lock().expect("cache lock").save(path)
    }

    pub fn load_cache(&self, path: &Path) -> Result<()> {
        let cache = EmbeddingCache::load(path)?;
        self.import_cache(cache);
        Ok(())
    }
}
