//! Black-box checks that a server speaks the encoder protocol correctly.
//!
//! Every response body is validated against the bundled JSON Schemas, then
//! checked for the semantic rules the schemas cannot express.

use std::fmt;
use std::time::Duration;

use serde_json::{json, Value};

use skillground::retrieval::wire::{self, EmbedResponse, InfoResponse, ItmResponse, WireQuery};
use skillground::retrieval::{render_text_image, Payload, RasterImage, RenderConfig};

const NORM_TOL: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub outcome: Result<(), String>,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.outcome.is_ok()
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.outcome {
            Ok(()) => write!(f, "PASS  {}", self.name),
            Err(e) => write!(f, "FAIL  {}: {e}", self.name),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed())
    }
}

struct Client {
    base: String,
    agent: ureq::Agent,
}

struct Reply {
    status: u16,
    body: Value,
}

impl Client {
    fn new(base_url: &str, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            base: base_url.trim_end_matches('/').to_string(),
            agent,
        }
    }

    fn read(mut resp: ureq::http::Response<ureq::Body>) -> Result<Reply, String> {
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| e.to_string())?;
        let body = serde_json::from_str(&text)
            .map_err(|e| format!("status {status}: body is not JSON ({e}): {text}"))?;
        Ok(Reply { status, body })
    }

    fn get(&self, path: &str) -> Result<Reply, String> {
        let resp = self
            .agent
            .get(format!("{}{path}", self.base))
            .call()
            .map_err(|e| e.to_string())?;
        Self::read(resp)
    }

    fn post(&self, path: &str, body: &Value) -> Result<Reply, String> {
        let resp = self
            .agent
            .post(format!("{}{path}", self.base))
            .send_json(body)
            .map_err(|e| e.to_string())?;
        Self::read(resp)
    }

    fn post_raw(&self, path: &str, body: &str) -> Result<Reply, String> {
        let resp = self
            .agent
            .post(format!("{}{path}", self.base))
            .header("content-type", "application/json")
            .send(body)
            .map_err(|e| e.to_string())?;
        Self::read(resp)
    }
}

/// Validate `instance` against the named bundled schema.
pub fn validate(schema_name: &str, instance: &Value) -> Result<(), String> {
    let raw = wire::schema(schema_name).ok_or_else(|| format!("unknown schema {schema_name}"))?;
    let schema: Value = serde_json::from_str(raw).map_err(|e| e.to_string())?;
    let validator = jsonschema::validator_for(&schema).map_err(|e| e.to_string())?;
    let errors: Vec<String> = validator.iter_errors(instance).map(|e| e.to_string()).collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(format!("{schema_name}: {}", errors.join("; ")))
    }
}

fn expect_ok<T: serde::de::DeserializeOwned>(reply: Reply, schema: &str) -> Result<T, String> {
    if reply.status != 200 {
        return Err(format!("status {}: {}", reply.status, reply.body));
    }
    validate(schema, &reply.body)?;
    serde_json::from_value(reply.body).map_err(|e| e.to_string())
}

fn expect_client_error(reply: Reply) -> Result<(), String> {
    if !(400..500).contains(&reply.status) {
        return Err(format!("expected 4xx, got {}: {}", reply.status, reply.body));
    }
    validate("error_response", &reply.body)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn unit_vector(resp: &EmbedResponse, dim: usize) -> Result<(), String> {
    if resp.dim != dim || resp.vector.len() != dim {
        return Err(format!(
            "dim {} with {} components, info says {dim}",
            resp.dim,
            resp.vector.len()
        ));
    }
    let n = norm(&resp.vector);
    if (n - 1.0).abs() > NORM_TOL {
        return Err(format!("norm {n}"));
    }
    Ok(())
}

/// Run every check against `base_url` using `probe` as the sample instruction.
pub fn run(base_url: &str, probe: &str, timeout: Duration) -> Report {
    let client = Client::new(base_url, timeout);
    let mut checks = Vec::new();
    let mut push = |name: &'static str, outcome: Result<(), String>| {
        checks.push(Check { name, outcome });
    };

    let info = client
        .get("/v1/info")
        .and_then(|r| expect_ok::<InfoResponse>(r, "info_response"));
    push("info matches schema", info.as_ref().map(|_| ()).map_err(Clone::clone));
    let dim = match &info {
        Ok(i) => i.dim,
        Err(_) => return Report { checks },
    };

    let text_req = json!(WireQuery::text(probe));
    let embed_text = || {
        client
            .post("/v1/embed", &text_req)
            .and_then(|r| expect_ok::<EmbedResponse>(r, "embed_response"))
    };
    let first = embed_text();
    push(
        "text embedding is unit norm with advertised dim",
        first.as_ref().map_err(Clone::clone).and_then(|e| unit_vector(e, dim)),
    );
    push(
        "text embedding is deterministic",
        match (&first, embed_text()) {
            (Ok(a), Ok(b)) if a.vector == b.vector => Ok(()),
            (Ok(_), Ok(_)) => Err("two calls returned different vectors".into()),
            (Err(e), _) => Err(e.clone()),
            (_, Err(e)) => Err(e),
        },
    );

    let embed_image = |img: &RasterImage| {
        WireQuery::from_payload(Payload::Image(img))
            .map_err(|e| e.to_string())
            .and_then(|q| client.post("/v1/embed", &json!(q)))
            .and_then(|r| expect_ok::<EmbedResponse>(r, "embed_response"))
    };
    let render = RenderConfig::default();
    let image_outcome = render_text_image(probe, &render)
        .map_err(|e| e.to_string())
        .and_then(|img| embed_image(&img))
        .and_then(|rendered| {
            unit_vector(&rendered, dim)?;
            let blank = embed_image(&RasterImage::blank(render.width, render.height, 255))?;
            unit_vector(&blank, dim)?;
            if blank.vector == rendered.vector {
                return Err("rendered text and blank canvas embed identically".into());
            }
            Ok(())
        });
    push("image embeddings are unit norm and content dependent", image_outcome);

    let itm = client
        .post(
            "/v1/itm",
            &json!(wire::ItmRequest {
                query: WireQuery::text(probe),
                candidate_text: probe.to_string(),
            }),
        )
        .and_then(|r| expect_ok::<ItmResponse>(r, "itm_response"))
        .and_then(|r| {
            let [neg, pos] = r.logits;
            if !(neg.is_finite() && pos.is_finite()) {
                Err(format!("non-finite logits {:?}", r.logits))
            } else if pos <= neg {
                Err(format!("identical pair scored negative: {:?}", r.logits))
            } else {
                Ok(())
            }
        });
    push("matching pair has positive logit above negative", itm);

    push(
        "malformed JSON yields a 4xx error body",
        client.post_raw("/v1/embed", "{").and_then(expect_client_error),
    );
    push(
        "text_as_image is rejected by embed",
        client
            .post("/v1/embed", &json!({"kind": "text_as_image", "payload": probe}))
            .and_then(expect_client_error),
    );
    push(
        "unknown kind yields a 4xx error body",
        client
            .post("/v1/embed", &json!({"kind": "audio", "payload": probe}))
            .and_then(expect_client_error),
    );

    Report { checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_bundled_schema_compiles() {
        for (name, raw) in wire::SCHEMAS {
            let schema: Value = serde_json::from_str(raw).unwrap();
            assert!(jsonschema::validator_for(&schema).is_ok(), "{name}");
        }
    }

    #[test]
    fn schema_rejects_wrong_shapes() {
        assert!(validate("itm_response", &json!({"logits": [0.1, 0.2]})).is_ok());
        assert!(validate("itm_response", &json!({"logits": [0.1]})).is_err());
        assert!(validate("embed_response", &json!({"dim": 2, "vector": [1.0, 0.0]})).is_ok());
        assert!(validate("embed_response", &json!({"vector": [1.0]})).is_err());
        assert!(validate("error_response", &json!({"error": "x"})).is_ok());
        assert!(validate("error_response", &json!({"message": "x"})).is_err());
        assert!(validate("nope", &json!({})).is_err());
    }

    #[test]
    fn unit_vector_checks_dim_and_norm() {
        let ok = EmbedResponse { dim: 2, vector: vec![0.6, 0.8] };
        assert!(unit_vector(&ok, 2).is_ok());
        assert!(unit_vector(&ok, 3).is_err());
        let long = EmbedResponse { dim: 2, vector: vec![1.0, 1.0] };
        assert!(unit_vector(&long, 2).is_err());
    }
}
