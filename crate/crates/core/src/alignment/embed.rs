use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;
use std::sync::RwLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::AlignError;
use crate::genpipe::{GenError, HttpConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub provider_id: String,
}

impl EmbeddingVector {
    pub fn dim(&self) -> usize {
        self.values.len()
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

pub trait EmbeddingProvider: Send + Sync {
    fn id(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<EmbeddingVector, AlignError>;
}

impl<T: EmbeddingProvider + ?Sized> EmbeddingProvider for &T {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn embed(&self, text: &str) -> Result<EmbeddingVector, AlignError> {
        (**self).embed(text)
    }
}

impl<T: EmbeddingProvider + ?Sized> EmbeddingProvider for Box<T> {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn embed(&self, text: &str) -> Result<EmbeddingVector, AlignError> {
        (**self).embed(text)
    }
}

fn digest_u64(parts: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// Offline provider: each whitespace token maps to a seeded Gaussian
/// vector; a text embeds as the sum of its token vectors over the square
/// root of the token count.
#[derive(Debug, Clone)]
pub struct MockEmbeddingProvider {
    id: String,
    seed: u64,
    dim: usize,
}

impl MockEmbeddingProvider {
    pub fn new(seed: u64, dim: usize) -> Self {
        MockEmbeddingProvider {
            id: format!("mock-{dim}-{seed}"),
            seed,
            dim,
        }
    }

    fn token_vector(&self, token: &str) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(digest_u64(&[&self.seed.to_le_bytes(), token.as_bytes()]));
        (0..self.dim).map(|_| StandardNormal.sample(&mut rng)).collect()
    }
}

impl Default for MockEmbeddingProvider {
    fn default() -> Self {
        MockEmbeddingProvider::new(0, 64)
    }
}

impl EmbeddingProvider for MockEmbeddingProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, AlignError> {
        let tokens: Vec<&str> = text.split_whitespace().collect();
        if tokens.is_empty() {
            return Err(AlignError::EmptyText);
        }
        let mut values = vec![0.0; self.dim];
        for t in &tokens {
            for (v, x) in values.iter_mut().zip(self.token_vector(t)) {
                *v += x;
            }
        }
        let scale = (tokens.len() as f64).sqrt();
        values.iter_mut().for_each(|v| *v /= scale);
        Ok(EmbeddingVector {
            values,
            provider_id: self.id.clone(),
        })
    }
}

/// Fixed text-to-vector table; unknown texts are an error.
#[derive(Debug, Clone)]
pub struct LookupEmbeddingProvider {
    id: String,
    dim: usize,
    table: HashMap<String, Vec<f64>>,
}

impl LookupEmbeddingProvider {
    pub fn new(id: impl Into<String>, dim: usize) -> Self {
        LookupEmbeddingProvider {
            id: id.into(),
            dim,
            table: HashMap::new(),
        }
    }

    pub fn insert(&mut self, text: impl Into<String>, values: Vec<f64>) -> Result<(), AlignError> {
        if values.len() != self.dim {
            return Err(AlignError::DimensionMismatch {
                expected: self.dim,
                got: values.len(),
            });
        }
        self.table.insert(text.into(), values);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl EmbeddingProvider for LookupEmbeddingProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, AlignError> {
        if text.trim().is_empty() {
            return Err(AlignError::EmptyText);
        }
        let values = self
            .table
            .get(text)
            .cloned()
            .ok_or_else(|| AlignError::InvalidConfig(format!("no embedding stored for {text:?}")))?;
        Ok(EmbeddingVector {
            values,
            provider_id: self.id.clone(),
        })
    }
}

/// `POST {base_url}/embeddings` with `{model, input}`.
pub struct OpenAiEmbeddingProvider {
    http: HttpConfig,
    model: String,
    dim: usize,
}

impl OpenAiEmbeddingProvider {
    /// `dim` is the model's published width; replies of another width are
    /// rejected.
    pub fn new(http: HttpConfig, model: impl Into<String>, dim: usize) -> Self {
        OpenAiEmbeddingProvider {
            http,
            model: model.into(),
            dim,
        }
    }
}

impl EmbeddingProvider for OpenAiEmbeddingProvider {
    fn id(&self) -> &str {
        &self.model
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, AlignError> {
        if text.trim().is_empty() {
            return Err(AlignError::EmptyText);
        }
        let body = serde_json::json!({"model": self.model, "input": text});
        let v = self.http.post_json("embeddings", &body)?;
        let values: Vec<f64> = v["data"][0]["embedding"]
            .as_array()
            .ok_or_else(|| GenError::BadResponse("missing data[0].embedding".into()))?
            .iter()
            .map(|x| x.as_f64().ok_or_else(|| GenError::BadResponse("non-numeric embedding entry".into())))
            .collect::<Result<_, _>>()?;
        if values.len() != self.dim {
            return Err(AlignError::DimensionMismatch {
                expected: self.dim,
                got: values.len(),
            });
        }
        Ok(EmbeddingVector {
            values,
            provider_id: self.model.clone(),
        })
    }
}

/// Memoizes another provider by `(provider id, sha256(text))`, in memory
/// and optionally as one JSON file per entry.
pub struct CachedEmbeddings<P> {
    inner: P,
    dir: Option<PathBuf>,
    memory: RwLock<HashMap<String, EmbeddingVector>>,
}

impl<P: EmbeddingProvider> CachedEmbeddings<P> {
    pub fn new(inner: P, dir: Option<PathBuf>) -> Result<Self, AlignError> {
        if let Some(d) = &dir {
            fs::create_dir_all(d)?;
        }
        Ok(CachedEmbeddings {
            inner,
            dir,
            memory: RwLock::new(HashMap::new()),
        })
    }

    pub fn key(&self, text: &str) -> String {
        let mut h = Sha256::new();
        h.update(self.inner.id().as_bytes());
        h.update([0u8]);
        h.update(text.as_bytes());
        hex::encode(h.finalize())
    }

    pub fn cached_len(&self) -> usize {
        self.memory.read().expect("cache lock").len()
    }
}

impl<P: EmbeddingProvider> EmbeddingProvider for CachedEmbeddings<P> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, AlignError> {
        let key = self.key(text);
        if let Some(v) = self.memory.read().expect("cache lock").get(&key) {
            return Ok(v.clone());
        }
        let path = self.dir.as_ref().map(|d| d.join(format!("{key}.json")));
        if let Some(p) = &path {
            if let Ok(bytes) = fs::read(p) {
                if let Ok(v) = serde_json::from_slice::<EmbeddingVector>(&bytes) {
                    self.memory.write().expect("cache lock").insert(key, v.clone());
                    return Ok(v);
                }
            }
        }
        let v = self.inner.embed(text)?;
        if let Some(p) = &path {
            let tmp = p.with_extension("tmp");
            fs::write(&tmp, serde_json::to_vec(&v)?)?;
            fs::rename(&tmp, p)?;
        }
        self.memory.write().expect("cache lock").insert(key, v.clone());
        Ok(v)
    }
}
