//! Covariate vectors for the coreset sampler.
//!
//! Production embeddings are computed elsewhere and ingested from a vector
//! file; [`FeatureHashEmbedder`] gives a deterministic, dependency-free
//! stand-in for hermetic pipelines.
//!
//! Vector file layout (all integers little-endian):
//!
//! ```text
//! b"SEVBVEC1" | u32 dimension | u64 count | count x (u16 id_len | id bytes | dimension x f32)
//! ```

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::EmbeddingError;
use crate::model::{check_vector_pool, EmbeddingVector, Interaction};

pub const VECTOR_MAGIC: &[u8; 8] = b"SEVBVEC1";

/// Anything that can map a pool of interactions to vectors, order-aligned.
pub trait Embedder {
    fn embed(&self, pool: &[Interaction]) -> Result<Vec<EmbeddingVector>, EmbeddingError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedderKind {
    ExternalFile,
    FeatureHash,
}

/// Serializable description of an embedder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedderSpec {
    pub kind: EmbedderKind,
    pub dimension: usize,
    #[serde(default)]
    pub hash_seed: u64,
    /// Vector file, required for `external_file`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl EmbedderSpec {
    pub fn feature_hash(dimension: usize, hash_seed: u64) -> Self {
        Self {
            kind: EmbedderKind::FeatureHash,
            dimension,
            hash_seed,
            path: None,
        }
    }

    /// `dimension` 0 accepts whatever the file header declares.
    pub fn external_file(path: impl Into<PathBuf>, dimension: usize) -> Self {
        Self {
            kind: EmbedderKind::ExternalFile,
            dimension,
            hash_seed: 0,
            path: Some(path.into()),
        }
    }

    pub fn build(&self) -> Result<Box<dyn Embedder + Send + Sync>, EmbeddingError> {
        match self.kind {
            EmbedderKind::FeatureHash => {
                Ok(Box::new(FeatureHashEmbedder::new(self.dimension, self.hash_seed)?))
            }
            EmbedderKind::ExternalFile => {
                let path = self.path.as_ref().ok_or_else(|| {
                    EmbeddingError::Config("external_file embedder needs a vector file path".into())
                })?;
                let emb = ExternalFileEmbedder::open(path)?;
                if self.dimension != 0 && emb.dimension() != self.dimension {
                    return Err(EmbeddingError::Dimension(format!(
                        "file has dimension {}, embedder configured for {}",
                        emb.dimension(),
                        self.dimension
                    )));
                }
                Ok(Box::new(emb))
            }
        }
    }
}

/// Embeds `pool` according to `spec`.
pub fn embed(spec: &EmbedderSpec, pool: &[Interaction]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
    spec.build()?.embed(pool)
}

/// Signed feature hashing of whitespace tokens of query and answer,
/// L2-normalised.
#[derive(Debug, Clone)]
pub struct FeatureHashEmbedder {
    dimension: usize,
    seed: u64,
}

impl FeatureHashEmbedder {
    pub fn new(dimension: usize, seed: u64) -> Result<Self, EmbeddingError> {
        if dimension == 0 {
            return Err(EmbeddingError::Config("feature_hash dimension must be >= 1".into()));
        }
        if dimension > u32::MAX as usize {
            return Err(EmbeddingError::Config("feature_hash dimension too large".into()));
        }
        Ok(Self { dimension, seed })
    }

    fn hash(&self, domain: u8, token: &str) -> u64 {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update([domain]);
        h.update(token.as_bytes());
        let digest = h.finalize();
        u64::from_le_bytes(digest[..8].try_into().expect("sha256 digest is 32 bytes"))
    }

    pub fn embed_text(&self, query: &str, answer: &str) -> Vec<f32> {
        let mut acc = vec![0.0f64; self.dimension];
        for token in query.split_whitespace().chain(answer.split_whitespace()) {
            let bucket = (self.hash(0, token) % self.dimension as u64) as usize;
            let sign = if self.hash(1, token) & 1 == 0 { 1.0 } else { -1.0 };
            acc[bucket] += sign;
        }
        let norm = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            let mut e = vec![0.0f32; self.dimension];
            e[0] = 1.0;
            return e;
        }
        acc.iter().map(|x| (x / norm) as f32).collect()
    }
}

impl Embedder for FeatureHashEmbedder {
    fn embed(&self, pool: &[Interaction]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        if pool.is_empty() {
            return Err(EmbeddingError::EmptyPool);
        }
        // par_iter().collect() preserves pool order.
        Ok(pool
            .par_iter()
            .map(|rec| EmbeddingVector::new(rec.id.clone(), self.embed_text(&rec.query, &rec.answer)))
            .collect())
    }
}

/// Looks vectors up by interaction id in a previously written vector file.
#[derive(Debug, Clone)]
pub struct ExternalFileEmbedder {
    dimension: usize,
    by_id: HashMap<String, Vec<f32>>,
}

impl ExternalFileEmbedder {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, EmbeddingError> {
        let (dimension, vectors) = read_vectors_with_dim(path)?;
        Ok(Self::from_vectors(dimension, vectors))
    }

    pub fn from_vectors(dimension: usize, vectors: Vec<EmbeddingVector>) -> Self {
        let by_id = vectors.into_iter().map(|v| (v.interaction_id, v.values)).collect();
        Self { dimension, by_id }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }
}

impl Embedder for ExternalFileEmbedder {
    fn embed(&self, pool: &[Interaction]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        if pool.is_empty() {
            return Err(EmbeddingError::EmptyPool);
        }
        pool.iter()
            .map(|rec| {
                self.by_id
                    .get(&rec.id)
                    .map(|v| EmbeddingVector::new(rec.id.clone(), v.clone()))
                    .ok_or_else(|| EmbeddingError::MissingVector(rec.id.clone()))
            })
            .collect()
    }
}

pub fn write_vectors_to<W: Write>(vectors: &[EmbeddingVector], mut w: W) -> Result<(), EmbeddingError> {
    let dim = check_vector_pool(vectors).map_err(|e| EmbeddingError::Dimension(e.to_string()))?;
    let dim = u32::try_from(dim).map_err(|_| EmbeddingError::Dimension("dimension exceeds u32".into()))?;
    w.write_all(VECTOR_MAGIC)?;
    w.write_all(&dim.to_le_bytes())?;
    w.write_all(&(vectors.len() as u64).to_le_bytes())?;
    for v in vectors {
        let id = v.interaction_id.as_bytes();
        let len = u16::try_from(id.len()).map_err(|_| EmbeddingError::IdTooLong(v.interaction_id.clone()))?;
        w.write_all(&len.to_le_bytes())?;
        w.write_all(id)?;
        for x in &v.values {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_vectors(vectors: &[EmbeddingVector], path: impl AsRef<Path>) -> Result<(), EmbeddingError> {
    let file = File::create(path)?;
    write_vectors_to(vectors, BufWriter::new(file))
}

fn read_exact_or<R: Read>(r: &mut R, buf: &mut [u8], what: impl FnOnce() -> String) -> Result<(), EmbeddingError> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => EmbeddingError::Truncated(what()),
        _ => EmbeddingError::Io(e),
    })
}

/// Reads a vector file, returning the header dimension alongside the vectors.
pub fn read_vectors_from<R: Read>(mut r: R) -> Result<(usize, Vec<EmbeddingVector>), EmbeddingError> {
    let mut magic = [0u8; 8];
    read_exact_or(&mut r, &mut magic, || "header".into())?;
    if &magic != VECTOR_MAGIC {
        return Err(EmbeddingError::BadMagic);
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    read_exact_or(&mut r, &mut b4, || "header".into())?;
    let dim = u32::from_le_bytes(b4) as usize;
    read_exact_or(&mut r, &mut b8, || "header".into())?;
    let count = u64::from_le_bytes(b8);
    if count > 0 && dim == 0 {
        return Err(EmbeddingError::Dimension("header declares dimension 0 with records present".into()));
    }
    let mut out = Vec::with_capacity(count.min(1 << 20) as usize);
    let mut raw = vec![0u8; dim * 4];
    for i in 0..count {
        let mut b2 = [0u8; 2];
        read_exact_or(&mut r, &mut b2, || format!("record {i}"))?;
        let mut id = vec![0u8; u16::from_le_bytes(b2) as usize];
        read_exact_or(&mut r, &mut id, || format!("record {i}"))?;
        let id = String::from_utf8(id)
            .map_err(|_| EmbeddingError::Dimension(format!("record {i} id is not UTF-8")))?;
        read_exact_or(&mut r, &mut raw, || format!("record {i} ({id})"))?;
        let values = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("chunk of 4")))
            .collect();
        out.push(EmbeddingVector::new(id, values));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(EmbeddingError::Dimension(format!(
            "trailing bytes after {count} records of dimension {dim}"
        )));
    }
    Ok((dim, out))
}

pub fn read_vectors_with_dim(path: impl AsRef<Path>) -> Result<(usize, Vec<EmbeddingVector>), EmbeddingError> {
    let file = File::open(path)?;
    read_vectors_from(BufReader::new(file))
}

pub fn read_vectors(path: impl AsRef<Path>) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
    Ok(read_vectors_with_dim(path)?.1)
}
