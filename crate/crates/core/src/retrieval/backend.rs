use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::image::{render_text_image, RasterImage, RenderConfig};
use crate::skilldb::{normalize_instruction, SkillDatabase};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BackendError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("protocol: {0}")]
    Protocol(String),
    #[error("{0}")]
    Other(String),
}

/// What gets embedded or matched: a string or a raster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Payload<'a> {
    Text(&'a str),
    Image(&'a RasterImage),
}

/// Vision-language encoder with an image-text matching head.
///
/// Implementations must be deterministic for identical inputs and return
/// vectors of a fixed dimension. Callers normalize embeddings themselves.
pub trait EncoderBackend: Send + Sync {
    /// Stable identity string; indexes remember it.
    fn identity(&self) -> String;

    fn dim(&self) -> usize;

    fn embed_text(&self, text: &str) -> Result<Vec<f64>, BackendError>;

    fn embed_image(&self, image: &RasterImage) -> Result<Vec<f64>, BackendError>;

    /// `(negative, positive)` match logits for a query against an instruction.
    fn itm_logits(&self, query: Payload<'_>, candidate: &str) -> Result<[f64; 2], BackendError>;

    fn embed(&self, payload: Payload<'_>) -> Result<Vec<f64>, BackendError> {
        match payload {
            Payload::Text(t) => self.embed_text(t),
            Payload::Image(i) => self.embed_image(i),
        }
    }
}

impl<B: EncoderBackend + ?Sized> EncoderBackend for Box<B> {
    fn identity(&self) -> String {
        (**self).identity()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn embed_text(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        (**self).embed_text(text)
    }
    fn embed_image(&self, image: &RasterImage) -> Result<Vec<f64>, BackendError> {
        (**self).embed_image(image)
    }
    fn itm_logits(&self, query: Payload<'_>, candidate: &str) -> Result<[f64; 2], BackendError> {
        (**self).itm_logits(query, candidate)
    }
}

impl<B: EncoderBackend + ?Sized> EncoderBackend for std::sync::Arc<B> {
    fn identity(&self) -> String {
        (**self).identity()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn embed_text(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        (**self).embed_text(text)
    }
    fn embed_image(&self, image: &RasterImage) -> Result<Vec<f64>, BackendError> {
        (**self).embed_image(image)
    }
    fn itm_logits(&self, query: Payload<'_>, candidate: &str) -> Result<[f64; 2], BackendError> {
        (**self).itm_logits(query, candidate)
    }
}

fn seeded_rng(parts: &[&[u8]]) -> ChaCha8Rng {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    ChaCha8Rng::from_seed(h.finalize().into())
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

fn payload_key(p: Payload<'_>) -> (&'static [u8], Vec<u8>) {
    match p {
        Payload::Text(t) => (b"text", t.as_bytes().to_vec()),
        Payload::Image(i) => (b"image", i.digest().to_vec()),
    }
}

/// Deterministic pseudo-random embeddings keyed on a digest of the input.
#[derive(Debug, Clone)]
pub struct HashBackend {
    pub seed: u64,
    pub dim: usize,
}

impl HashBackend {
    pub fn new(seed: u64, dim: usize) -> Self {
        Self { seed, dim }
    }

    fn vector(&self, p: Payload<'_>) -> Vec<f64> {
        let (tag, content) = payload_key(p);
        let mut rng = seeded_rng(&[&self.seed.to_le_bytes(), tag, &content]);
        gaussian(&mut rng, self.dim)
    }
}

impl EncoderBackend for HashBackend {
    fn identity(&self) -> String {
        format!("mock:hash(seed={},dim={})", self.seed, self.dim)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_text(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        Ok(self.vector(Payload::Text(text)))
    }

    fn embed_image(&self, image: &RasterImage) -> Result<Vec<f64>, BackendError> {
        Ok(self.vector(Payload::Image(image)))
    }

    fn itm_logits(&self, query: Payload<'_>, candidate: &str) -> Result<[f64; 2], BackendError> {
        let (tag, content) = payload_key(query);
        let mut rng = seeded_rng(&[
            &self.seed.to_le_bytes(),
            b"itm",
            tag,
            &content,
            candidate.as_bytes(),
        ]);
        let v = gaussian(&mut rng, 2);
        Ok([2.0 * v[0], 2.0 * v[1]])
    }
}

/// Maps texts and rendered images onto database slots (record positions).
///
/// Every instruction owns the slot of its record; aliases (for example
/// annotated paraphrases) share the slot of the record they point to.
/// Images are registered by digest of the text rendered with `render`.
#[derive(Debug, Clone, Default)]
pub struct SlotRegistry {
    dim: usize,
    text: HashMap<String, usize>,
    image: HashMap<[u8; 32], usize>,
}

impl SlotRegistry {
    pub fn from_database<'a>(
        db: &SkillDatabase,
        aliases: impl IntoIterator<Item = (&'a str, u64)>,
        render: &RenderConfig,
    ) -> Self {
        let mut reg = SlotRegistry {
            dim: db.len(),
            ..Default::default()
        };
        let position: HashMap<u64, usize> =
            db.records().iter().enumerate().map(|(i, r)| (r.id, i)).collect();
        for (slot, r) in db.records().iter().enumerate() {
            reg.register(&r.instruction, slot, render);
        }
        for (text, id) in aliases {
            if let Some(&slot) = position.get(&id) {
                reg.register(text, slot, render);
            }
        }
        reg
    }

    fn register(&mut self, text: &str, slot: usize, render: &RenderConfig) {
        self.text.entry(normalize_instruction(text)).or_insert(slot);
        // Texts that do not fit the canvas simply have no image slot.
        if let Ok(img) = render_text_image(text, render) {
            self.image.entry(img.digest()).or_insert(slot);
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn slot_of(&self, p: Payload<'_>) -> Option<usize> {
        match p {
            Payload::Text(t) => self.text.get(&normalize_instruction(t)).copied(),
            Payload::Image(i) => self.image.get(&i.digest()).copied(),
        }
    }

    fn one_hot(&self, slot: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        v[slot] = 1.0;
        v
    }
}

/// Perfect backend: every known instruction embeds to its own one-hot
/// vector and the matching head is certain.
#[derive(Debug, Clone)]
pub struct OracleBackend {
    registry: SlotRegistry,
    fallback: HashBackend,
}

/// Logit magnitude used by the oracle's matching head.
const ORACLE_LOGIT: f64 = 8.0;

impl OracleBackend {
    pub fn new(registry: SlotRegistry, seed: u64) -> Self {
        let dim = registry.dim().max(1);
        Self {
            registry,
            fallback: HashBackend::new(seed, dim),
        }
    }

    fn vector(&self, p: Payload<'_>) -> Vec<f64> {
        match self.registry.slot_of(p) {
            Some(slot) => self.registry.one_hot(slot),
            None => self.fallback.vector(p),
        }
    }
}

impl EncoderBackend for OracleBackend {
    fn identity(&self) -> String {
        format!("mock:oracle(dim={})", self.fallback.dim)
    }

    fn dim(&self) -> usize {
        self.fallback.dim
    }

    fn embed_text(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        Ok(self.vector(Payload::Text(text)))
    }

    fn embed_image(&self, image: &RasterImage) -> Result<Vec<f64>, BackendError> {
        Ok(self.vector(Payload::Image(image)))
    }

    fn itm_logits(&self, query: Payload<'_>, candidate: &str) -> Result<[f64; 2], BackendError> {
        let q = self.registry.slot_of(query);
        let c = self.registry.slot_of(Payload::Text(candidate));
        let matched = q.is_some() && q == c;
        Ok([0.0, if matched { ORACLE_LOGIT } else { -ORACLE_LOGIT }])
    }
}

/// Noise levels for [`DegradedBackend`].
///
/// The defaults make stage one pick the right record about half the time on
/// the bundled 300-record fixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegradedParams {
    /// Per-dimension Gaussian noise added to the one-hot embedding.
    pub embed_noise: f64,
    /// Positive-logit bonus when query and candidate share a slot.
    pub itm_signal: f64,
    /// Gaussian noise on the positive logit.
    pub itm_noise: f64,
    pub seed: u64,
}

impl Default for DegradedParams {
    fn default() -> Self {
        Self {
            embed_noise: 0.13,
            itm_signal: 3.0,
            itm_noise: 1.5,
            seed: 0,
        }
    }
}

/// Oracle with independent noise on both the embeddings and the matching
/// head, so that each stage is informative but unreliable on its own.
#[derive(Debug, Clone)]
pub struct DegradedBackend {
    registry: SlotRegistry,
    params: DegradedParams,
}

impl DegradedBackend {
    pub fn new(registry: SlotRegistry, params: DegradedParams) -> Self {
        Self { registry, params }
    }

    fn vector(&self, p: Payload<'_>) -> Vec<f64> {
        let dim = self.dim();
        let (tag, content) = payload_key(p);
        let mut rng = seeded_rng(&[&self.params.seed.to_le_bytes(), b"embed", tag, &content]);
        let mut v = gaussian(&mut rng, dim);
        for x in &mut v {
            *x *= self.params.embed_noise;
        }
        if let Some(slot) = self.registry.slot_of(p) {
            v[slot] += 1.0;
        }
        v
    }
}

impl EncoderBackend for DegradedBackend {
    fn identity(&self) -> String {
        let p = &self.params;
        format!(
            "mock:degraded(dim={},embed_noise={},itm_signal={},itm_noise={},seed={})",
            self.dim(),
            p.embed_noise,
            p.itm_signal,
            p.itm_noise,
            p.seed
        )
    }

    fn dim(&self) -> usize {
        self.registry.dim().max(1)
    }

    fn embed_text(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        Ok(self.vector(Payload::Text(text)))
    }

    fn embed_image(&self, image: &RasterImage) -> Result<Vec<f64>, BackendError> {
        Ok(self.vector(Payload::Image(image)))
    }

    fn itm_logits(&self, query: Payload<'_>, candidate: &str) -> Result<[f64; 2], BackendError> {
        let (tag, content) = payload_key(query);
        let mut rng = seeded_rng(&[
            &self.params.seed.to_le_bytes(),
            b"itm",
            tag,
            &content,
            candidate.as_bytes(),
        ]);
        let noise: f64 = StandardNormal.sample(&mut rng);
        let q = self.registry.slot_of(query);
        let matched = q.is_some() && q == self.registry.slot_of(Payload::Text(candidate));
        let signal = if matched { self.params.itm_signal } else { 0.0 };
        Ok([0.0, signal + self.params.itm_noise * noise])
    }
}

/// Wraps a backend and replaces its matching head with fixed logits.
#[derive(Debug, Clone)]
pub struct ConstantItm<B> {
    pub inner: B,
    pub logits: [f64; 2],
}

impl<B: EncoderBackend> ConstantItm<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            logits: [0.0, 0.0],
        }
    }
}

impl<B: EncoderBackend> EncoderBackend for ConstantItm<B> {
    fn identity(&self) -> String {
        format!("constant-itm({})", self.inner.identity())
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn embed_text(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        self.inner.embed_text(text)
    }

    fn embed_image(&self, image: &RasterImage) -> Result<Vec<f64>, BackendError> {
        self.inner.embed_image(image)
    }

    fn itm_logits(&self, _query: Payload<'_>, _candidate: &str) -> Result<[f64; 2], BackendError> {
        Ok(self.logits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptor::MotionDescriptor;
    use crate::skilldb::{Category, SkillRecord};

    fn db(texts: &[&str]) -> SkillDatabase {
        let mut db = SkillDatabase::new();
        for t in texts {
            db.insert(SkillRecord {
                id: 0,
                instruction: t.to_string(),
                reasoning: None,
                category: Category::Direct,
                descriptor: MotionDescriptor::new([0.0; 4], 0.5, 1.0),
            })
            .unwrap();
        }
        db
    }

    #[test]
    fn hash_backend_is_deterministic_per_input() {
        let b = HashBackend::new(3, 16);
        assert_eq!(b.embed_text("trot").unwrap(), b.embed_text("trot").unwrap());
        assert_ne!(b.embed_text("trot").unwrap(), b.embed_text("pace").unwrap());
        assert_ne!(
            b.embed_text("trot").unwrap(),
            HashBackend::new(4, 16).embed_text("trot").unwrap()
        );
        let img = render_text_image("trot", &RenderConfig::default()).unwrap();
        assert_ne!(b.embed_image(&img).unwrap(), b.embed_text("trot").unwrap());
        let q = Payload::Text("trot");
        assert_eq!(b.itm_logits(q, "x").unwrap(), b.itm_logits(q, "x").unwrap());
    }

    #[test]
    fn oracle_maps_instructions_aliases_and_images() {
        let render = RenderConfig::default();
        let db = db(&["trot slowly", "pronk high", "gallop away"]);
        let reg = SlotRegistry::from_database(&db, [("hop like a kangaroo", 1)], &render);
        let b = OracleBackend::new(reg, 0);
        assert_eq!(b.embed_text("Trot  slowly").unwrap(), vec![1.0, 0.0, 0.0]);
        assert_eq!(b.embed_text("hop like a kangaroo").unwrap(), vec![0.0, 1.0, 0.0]);
        let img = render_text_image("gallop away", &render).unwrap();
        assert_eq!(b.embed_image(&img).unwrap(), vec![0.0, 0.0, 1.0]);
        let [neg, pos] = b.itm_logits(Payload::Image(&img), "gallop away").unwrap();
        assert!(pos > neg);
        let [neg, pos] = b.itm_logits(Payload::Text("pronk high"), "gallop away").unwrap();
        assert!(pos < neg);
        // Unknown text falls back to a pseudo-random vector of the same size.
        assert_eq!(b.embed_text("unseen").unwrap().len(), 3);
    }

    #[test]
    fn degraded_backend_keeps_signal_under_noise() {
        let db = db(&["a", "b"]);
        let reg = SlotRegistry::from_database(&db, [], &RenderConfig::default());
        let b = DegradedBackend::new(
            reg,
            DegradedParams {
                embed_noise: 0.01,
                ..Default::default()
            },
        );
        let v = b.embed_text("a").unwrap();
        assert!(v[0] > 0.9 && v[1].abs() < 0.1);
    }
}
