use serde::{Deserialize, Serialize};

use super::backend::EncoderBackend;
use super::RetrievalError;
use crate::par;
use crate::skilldb::SkillDatabase;

/// Unit-normalized instruction embeddings, one row per database record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingIndex {
    pub ids: Vec<u64>,
    pub dim: usize,
    /// Row-major `ids.len() x dim`.
    pub rows: Vec<f64>,
    pub backend: String,
    pub db_fingerprint: String,
}

impl EmbeddingIndex {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    /// Fail if the database or backend changed since the index was built.
    pub fn ensure_current(
        &self,
        db: &SkillDatabase,
        backend: &dyn EncoderBackend,
    ) -> Result<(), RetrievalError> {
        let db_fp = db.fingerprint();
        if db_fp != self.db_fingerprint {
            return Err(RetrievalError::StaleIndex {
                index_fp: self.db_fingerprint.clone(),
                db_fp,
            });
        }
        let current = backend.identity();
        if current != self.backend {
            return Err(RetrievalError::BackendMismatch {
                index: self.backend.clone(),
                current,
            });
        }
        Ok(())
    }

    /// Cosine similarity of a unit query against every row.
    pub fn similarities(&self, query: &[f64]) -> Vec<f64> {
        par::map_range(self.len(), |i| dot(self.row(i), query))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Check dimension and finiteness, then scale to unit length.
pub(crate) fn normalize(mut v: Vec<f64>, dim: usize) -> Result<Vec<f64>, RetrievalError> {
    if v.len() != dim {
        return Err(RetrievalError::Dimension {
            expected: dim,
            got: v.len(),
        });
    }
    let norm = dot(&v, &v).sqrt();
    if !norm.is_finite() || norm == 0.0 {
        return Err(RetrievalError::DegenerateEmbedding);
    }
    for x in &mut v {
        *x /= norm;
    }
    Ok(v)
}

/// Embed every instruction in `db`.
pub fn build_index(
    db: &SkillDatabase,
    backend: &dyn EncoderBackend,
) -> Result<EmbeddingIndex, RetrievalError> {
    if db.is_empty() {
        return Err(RetrievalError::EmptyDatabase);
    }
    let dim = backend.dim();
    let embedded = par::try_map(db.records(), |r| {
        let v = backend
            .embed_text(&r.instruction)
            .map_err(|source| RetrievalError::Backend {
                record: Some(r.id),
                source,
            })?;
        normalize(v, dim)
    })?;
    let mut rows = Vec::with_capacity(db.len() * dim);
    for v in embedded {
        rows.extend(v);
    }
    Ok(EmbeddingIndex {
        ids: db.records().iter().map(|r| r.id).collect(),
        dim,
        rows,
        backend: backend.identity(),
        db_fingerprint: db.fingerprint(),
    })
}
