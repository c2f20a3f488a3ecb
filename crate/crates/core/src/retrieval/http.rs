use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::backend::{BackendError, EncoderBackend, Payload};
use super::image::RasterImage;
use super::wire::{EmbedResponse, InfoResponse, ItmRequest, ItmResponse, WireQuery};

/// Remote encoder speaking the JSON wire protocol.
pub struct HttpBackend {
    base: String,
    agent: ureq::Agent,
    info: InfoResponse,
}

impl HttpBackend {
    /// Connects and reads `/v1/info`.
    pub fn connect(base_url: &str, timeout: Duration) -> Result<Self, BackendError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        let base = base_url.trim_end_matches('/').to_string();
        let info: InfoResponse = agent
            .get(format!("{base}/v1/info"))
            .call()
            .map_err(transport)?
            .body_mut()
            .read_json()
            .map_err(protocol)?;
        if info.dim == 0 {
            return Err(BackendError::Protocol("advertised dim is 0".into()));
        }
        Ok(Self { base, agent, info })
    }

    pub fn info(&self) -> &InfoResponse {
        &self.info
    }

    fn post<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        path: &str,
        body: &Req,
    ) -> Result<Resp, BackendError> {
        self.agent
            .post(format!("{}{path}", self.base))
            .send_json(body)
            .map_err(transport)?
            .body_mut()
            .read_json()
            .map_err(protocol)
    }

    fn embed_wire(&self, q: WireQuery) -> Result<Vec<f64>, BackendError> {
        let resp: EmbedResponse = self.post("/v1/embed", &q)?;
        if resp.dim != self.info.dim || resp.vector.len() != self.info.dim {
            return Err(BackendError::Protocol(format!(
                "embedding dim {} (vector len {}) != advertised {}",
                resp.dim,
                resp.vector.len(),
                self.info.dim
            )));
        }
        Ok(resp.vector)
    }
}

fn transport(e: ureq::Error) -> BackendError {
    BackendError::Transport(e.to_string())
}

fn protocol(e: ureq::Error) -> BackendError {
    BackendError::Protocol(e.to_string())
}

fn wire(p: Payload<'_>) -> Result<WireQuery, BackendError> {
    WireQuery::from_payload(p).map_err(|e| BackendError::Other(e.to_string()))
}

impl EncoderBackend for HttpBackend {
    fn identity(&self) -> String {
        format!("http:{}({},dim={})", self.base, self.info.name, self.info.dim)
    }

    fn dim(&self) -> usize {
        self.info.dim
    }

    fn embed_text(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        self.embed_wire(WireQuery::text(text))
    }

    fn embed_image(&self, image: &RasterImage) -> Result<Vec<f64>, BackendError> {
        self.embed_wire(wire(Payload::Image(image))?)
    }

    fn itm_logits(&self, query: Payload<'_>, candidate: &str) -> Result<[f64; 2], BackendError> {
        let req = ItmRequest {
            query: wire(query)?,
            candidate_text: candidate.to_string(),
        };
        let resp: ItmResponse = self.post("/v1/itm", &req)?;
        if !resp.logits.iter().all(|x| x.is_finite()) {
            return Err(BackendError::Protocol("non-finite logits".into()));
        }
        Ok(resp.logits)
    }
}
