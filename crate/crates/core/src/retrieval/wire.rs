//! JSON shapes of the encoder-backend protocol and the retrieval endpoint.
//!
//! ```text
//! POST /v1/embed    {"kind":"text"|"image","payload":"<utf8 | base64 png>"} -> {"dim":D,"vector":[...]}
//! POST /v1/itm      {"query":{kind,payload},"candidate_text":"..."}         -> {"logits":[neg,pos]}
//! GET  /v1/info                                                             -> {"name":...,"dim":D}
//! POST /v1/retrieve {"query":{kind,payload},"k":5,"method":"mixed"}         -> RetrievalResult
//! ```

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::backend::{EncoderBackend, Payload};
use super::image::RasterImage;
use super::{Method, Query, DEFAULT_K};

/// JSON Schemas (draft 2020-12) for every message above, keyed by name.
pub const SCHEMAS: &[(&str, &str)] = &[
    ("embed_request", include_str!("../../schemas/embed_request.json")),
    ("embed_response", include_str!("../../schemas/embed_response.json")),
    ("itm_request", include_str!("../../schemas/itm_request.json")),
    ("itm_response", include_str!("../../schemas/itm_response.json")),
    ("info_response", include_str!("../../schemas/info_response.json")),
    ("retrieve_request", include_str!("../../schemas/retrieve_request.json")),
    ("retrieval_result", include_str!("../../schemas/retrieval_result.json")),
    ("error_response", include_str!("../../schemas/error_response.json")),
];

/// Schema text by name.
pub fn schema(name: &str) -> Option<&'static str> {
    SCHEMAS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

#[derive(Debug, Error, PartialEq)]
pub enum WireError {
    #[error("bad base64 payload: {0}")]
    Base64(String),
    #[error("bad image payload: {0}")]
    Image(String),
    #[error("`{0}` queries are not accepted here")]
    UnsupportedKind(&'static str),
    #[error("empty payload")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryKind {
    Text,
    Image,
    TextAsImage,
}

/// `{"kind": ..., "payload": ...}`; image payloads are base64 PNG.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireQuery {
    pub kind: QueryKind,
    pub payload: String,
}

impl WireQuery {
    pub fn text(text: impl Into<String>) -> Self {
        Self {
            kind: QueryKind::Text,
            payload: text.into(),
        }
    }

    pub fn from_payload(p: Payload<'_>) -> Result<Self, WireError> {
        Ok(match p {
            Payload::Text(t) => Self::text(t),
            Payload::Image(img) => Self {
                kind: QueryKind::Image,
                payload: STANDARD.encode(img.to_png().map_err(|e| WireError::Image(e.to_string()))?),
            },
        })
    }

    pub fn from_query(q: &Query) -> Result<Self, WireError> {
        Ok(match q {
            Query::Text(t) => Self::text(t.clone()),
            Query::Image(img) => Self::from_payload(Payload::Image(img))?,
            Query::TextAsImage(t) => Self {
                kind: QueryKind::TextAsImage,
                payload: t.clone(),
            },
        })
    }

    pub fn to_query(&self) -> Result<Query, WireError> {
        if self.payload.is_empty() {
            return Err(WireError::Empty);
        }
        Ok(match self.kind {
            QueryKind::Text => Query::Text(self.payload.clone()),
            QueryKind::TextAsImage => Query::TextAsImage(self.payload.clone()),
            QueryKind::Image => Query::Image(decode_image(&self.payload)?),
        })
    }
}

pub fn decode_image(b64: &str) -> Result<RasterImage, WireError> {
    let bytes = STANDARD
        .decode(b64.trim())
        .map_err(|e| WireError::Base64(e.to_string()))?;
    RasterImage::from_png(&bytes).map_err(|e| WireError::Image(e.to_string()))
}

pub type EmbedRequest = WireQuery;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub dim: usize,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItmRequest {
    pub query: WireQuery,
    pub candidate_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItmResponse {
    /// `[negative, positive]`.
    pub logits: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfoResponse {
    pub name: String,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
}

fn default_k() -> usize {
    DEFAULT_K
}

fn default_method() -> Method {
    Method::Mixed
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrieveRequest {
    pub query: WireQuery,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_method")]
    pub method: Method,
}

/// Decoded backend-protocol query: text or image only.
pub enum OwnedPayload {
    Text(String),
    Image(RasterImage),
}

impl OwnedPayload {
    pub fn from_wire(q: &WireQuery) -> Result<Self, WireError> {
        if q.payload.is_empty() {
            return Err(WireError::Empty);
        }
        match q.kind {
            QueryKind::Text => Ok(Self::Text(q.payload.clone())),
            QueryKind::Image => Ok(Self::Image(decode_image(&q.payload)?)),
            QueryKind::TextAsImage => Err(WireError::UnsupportedKind("text_as_image")),
        }
    }

    pub fn as_payload(&self) -> Payload<'_> {
        match self {
            Self::Text(t) => Payload::Text(t),
            Self::Image(i) => Payload::Image(i),
        }
    }
}

/// Why a protocol request could not be served.
#[derive(Debug, Error, PartialEq)]
pub enum ServeError {
    /// The request itself is unusable.
    #[error(transparent)]
    BadRequest(#[from] WireError),
    #[error("backend failure: {0}")]
    Backend(String),
}

/// Serve `/v1/embed` from any backend, normalizing the vector.
pub fn serve_embed(backend: &dyn EncoderBackend, req: &EmbedRequest) -> Result<EmbedResponse, ServeError> {
    let payload = OwnedPayload::from_wire(req)?;
    let v = backend
        .embed(payload.as_payload())
        .map_err(|e| ServeError::Backend(e.to_string()))?;
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !norm.is_finite() || norm == 0.0 {
        return Err(ServeError::Backend("degenerate embedding".into()));
    }
    Ok(EmbedResponse {
        dim: v.len(),
        vector: v.into_iter().map(|x| x / norm).collect(),
    })
}

/// Serve `/v1/itm` from any backend.
pub fn serve_itm(backend: &dyn EncoderBackend, req: &ItmRequest) -> Result<ItmResponse, ServeError> {
    let payload = OwnedPayload::from_wire(&req.query)?;
    let logits = backend
        .itm_logits(payload.as_payload(), &req.candidate_text)
        .map_err(|e| ServeError::Backend(e.to_string()))?;
    Ok(ItmResponse { logits })
}

/// `/v1/info` for a local backend.
pub fn serve_info(backend: &dyn EncoderBackend) -> InfoResponse {
    InfoResponse {
        name: backend.identity(),
        dim: backend.dim(),
        model: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieval::{render_text_image, RenderConfig};

    #[test]
    fn query_kinds_serialize_as_snake_case() {
        let q = WireQuery::from_query(&Query::TextAsImage("hi".into())).unwrap();
        assert_eq!(
            serde_json::to_value(&q).unwrap(),
            serde_json::json!({"kind": "text_as_image", "payload": "hi"})
        );
    }

    #[test]
    fn image_queries_travel_as_base64_png() {
        let img = render_text_image("trot", &RenderConfig::default()).unwrap();
        let w = WireQuery::from_query(&Query::Image(img.clone())).unwrap();
        assert_eq!(w.kind, QueryKind::Image);
        assert_eq!(w.to_query().unwrap(), Query::Image(img));
        let bad = WireQuery {
            kind: QueryKind::Image,
            payload: "%%%".into(),
        };
        assert!(matches!(bad.to_query(), Err(WireError::Base64(_))));
    }

    #[test]
    fn retrieve_request_defaults() {
        let r: RetrieveRequest =
            serde_json::from_str(r#"{"query":{"kind":"text","payload":"x"}}"#).unwrap();
        assert_eq!((r.k, r.method), (5, Method::Mixed));
    }
}
