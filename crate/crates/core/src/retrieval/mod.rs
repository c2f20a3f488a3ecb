//! Two-stage skill retrieval.
//!
//! Stage one ranks every database instruction by cosine similarity to the
//! query embedding and keeps the top `K`; the similarities of just those `K`
//! are softmaxed into `p1`. Stage two asks the backend's image-text matching
//! head for (negative, positive) logits per candidate and softmaxes each pair
//! into `p2`. The mixed method picks `argmax(p1 + p2)`.
//!
//! Ties anywhere (top-K boundary or final argmax) resolve to the lowest
//! record id.

mod backend;
mod eval;
mod http;
mod image;
mod index;
mod rank;
pub mod wire;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backend::{
    BackendError, ConstantItm, DegradedBackend, DegradedParams, EncoderBackend, HashBackend,
    OracleBackend, Payload, SlotRegistry,
};
pub use eval::{evaluate, EvalReport, EvalRow};
pub use http::HttpBackend;
pub use image::{render_text_image, ImageError, RasterImage, RenderConfig};
pub use index::{build_index, EmbeddingIndex};
pub use rank::{positive_probability, retrieve, softmax, stage1, stage2, Retriever, Stage1};

use crate::descriptor::MotionDescriptor;

/// Default number of stage-one candidates.
pub const DEFAULT_K: usize = 5;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("database is empty")]
    EmptyDatabase,
    #[error("k = {k} must lie in 1..={n}")]
    BadK { k: usize, n: usize },
    #[error("index is stale: built for database {index_fp}, current database is {db_fp}")]
    StaleIndex { index_fp: String, db_fp: String },
    #[error("index was built with backend `{index}`, query uses `{current}`")]
    BackendMismatch { index: String, current: String },
    #[error("backend failed{}: {source}", .record.map(|r| format!(" on record {r}")).unwrap_or_default())]
    Backend {
        record: Option<u64>,
        #[source]
        source: BackendError,
    },
    #[error("embedding has dimension {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("embedding is zero or not finite")]
    DegenerateEmbedding,
    #[error("empty text query")]
    EmptyQuery,
    #[error(transparent)]
    Image(#[from] ImageError),
}

/// Retrieval metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Global argmax of cosine similarity.
    Cosine,
    /// Argmax of `p1` over the top-K.
    Topk,
    /// Argmax of `p2` over the top-K.
    TopkItm,
    /// Argmax of `p1 + p2` over the top-K.
    Mixed,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Cosine, Method::Topk, Method::TopkItm, Method::Mixed];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Cosine => "cosine",
            Method::Topk => "topk",
            Method::TopkItm => "topk_itm",
            Method::Mixed => "mixed",
        }
    }

    /// Whether the method needs image-text matching calls.
    pub fn uses_itm(self) -> bool {
        matches!(self, Method::TopkItm | Method::Mixed)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method `{s}` (expected cosine, topk, topk_itm or mixed)"))
    }
}

/// A retrieval query.
#[derive(Debug, Clone, PartialEq)]
pub enum Query {
    Text(String),
    Image(RasterImage),
    /// Text rendered to an image before embedding.
    TextAsImage(String),
}

impl Query {
    pub fn kind(&self) -> &'static str {
        match self {
            Query::Text(_) => "text",
            Query::Image(_) => "image",
            Query::TextAsImage(_) => "text_as_image",
        }
    }
}

/// Outcome of one retrieval with the per-stage scores of every candidate.
///
/// Candidate vectors are aligned and ordered by descending similarity.
/// `p2` is empty for methods that never consult the matching head;
/// `combined` holds whatever score the method maximized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub chosen_id: u64,
    pub instruction: String,
    pub descriptor: MotionDescriptor,
    pub method: Method,
    pub query_kind: String,
    pub candidates: Vec<u64>,
    pub similarities: Vec<f64>,
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    pub combined: Vec<f64>,
}
