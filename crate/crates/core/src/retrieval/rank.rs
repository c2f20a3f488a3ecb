use std::cmp::Ordering;

use super::backend::{EncoderBackend, Payload};
use super::image::{render_text_image, RasterImage, RenderConfig};
use super::index::{normalize, EmbeddingIndex};
use super::{Method, Query, RetrievalError, RetrievalResult};
use crate::par;
use crate::skilldb::SkillDatabase;

/// Numerically stable softmax.
pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = xs.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Positive component of `softmax([negative, positive])`.
pub fn positive_probability(logits: [f64; 2]) -> f64 {
    softmax(&logits)[1]
}

/// Stage-one output, ordered by descending similarity (ties by lower id).
#[derive(Debug, Clone, PartialEq)]
pub struct Stage1 {
    /// Row positions in the index.
    pub positions: Vec<usize>,
    pub ids: Vec<u64>,
    pub similarities: Vec<f64>,
    pub p1: Vec<f64>,
}

/// Top-`k` cosine candidates and their softmax-normalized similarities.
pub fn stage1(query_emb: &[f64], index: &EmbeddingIndex, k: usize) -> Result<Stage1, RetrievalError> {
    let n = index.len();
    if n == 0 {
        return Err(RetrievalError::EmptyDatabase);
    }
    if k == 0 || k > n {
        return Err(RetrievalError::BadK { k, n });
    }
    let query = normalize(query_emb.to_vec(), index.dim)?;
    let sims = index.similarities(&query);
    let order = |a: &usize, b: &usize| -> Ordering {
        sims[*b]
            .total_cmp(&sims[*a])
            .then_with(|| index.ids[*a].cmp(&index.ids[*b]))
    };
    let mut positions: Vec<usize> = (0..n).collect();
    if k < n {
        positions.select_nth_unstable_by(k - 1, order);
        positions.truncate(k);
    }
    positions.sort_unstable_by(order);
    let similarities: Vec<f64> = positions.iter().map(|&i| sims[i]).collect();
    Ok(Stage1 {
        ids: positions.iter().map(|&i| index.ids[i]).collect(),
        p1: softmax(&similarities),
        similarities,
        positions,
    })
}

/// Probability that `candidate` matches the query according to the ITM head.
pub fn stage2(
    query: Payload<'_>,
    candidate: &str,
    backend: &dyn EncoderBackend,
) -> Result<f64, RetrievalError> {
    let logits = backend
        .itm_logits(query, candidate)
        .map_err(|source| RetrievalError::Backend {
            record: None,
            source,
        })?;
    Ok(positive_probability(logits))
}

/// Index of the maximum score; ties go to the lowest id.
fn argmax_lowest_id(scores: &[f64], ids: &[u64]) -> usize {
    let mut best = 0;
    for i in 1..scores.len() {
        match scores[i].total_cmp(&scores[best]) {
            Ordering::Greater => best = i,
            Ordering::Equal if ids[i] < ids[best] => best = i,
            _ => {}
        }
    }
    best
}

enum Resolved {
    Text(String),
    Image(RasterImage),
}

impl Resolved {
    fn payload(&self) -> Payload<'_> {
        match self {
            Resolved::Text(t) => Payload::Text(t),
            Resolved::Image(i) => Payload::Image(i),
        }
    }
}

pub(crate) struct Scored {
    pub stage1: Stage1,
    pub p2: Option<Vec<f64>>,
}

impl Scored {
    /// Candidate slot chosen by `method` and the score vector it maximized.
    pub fn choose(&self, method: Method) -> (usize, Vec<f64>) {
        let s = &self.stage1;
        let combined = match method {
            Method::Cosine => s.similarities.clone(),
            Method::Topk => s.p1.clone(),
            Method::TopkItm => self.p2.clone().expect("p2 computed for ITM methods"),
            Method::Mixed => {
                let p2 = self.p2.as_ref().expect("p2 computed for ITM methods");
                s.p1.iter().zip(p2).map(|(a, b)| a + b).collect()
            }
        };
        (argmax_lowest_id(&combined, &s.ids), combined)
    }
}

/// A database, its index and the backend that built it.
pub struct Retriever<'a> {
    pub db: &'a SkillDatabase,
    pub index: &'a EmbeddingIndex,
    pub backend: &'a dyn EncoderBackend,
    pub render: RenderConfig,
}

impl<'a> Retriever<'a> {
    /// Checks that the index still matches the database and backend.
    pub fn new(
        db: &'a SkillDatabase,
        index: &'a EmbeddingIndex,
        backend: &'a dyn EncoderBackend,
    ) -> Result<Self, RetrievalError> {
        if db.is_empty() {
            return Err(RetrievalError::EmptyDatabase);
        }
        index.ensure_current(db, backend)?;
        Ok(Self {
            db,
            index,
            backend,
            render: RenderConfig::default(),
        })
    }

    pub fn with_render(mut self, render: RenderConfig) -> Self {
        self.render = render;
        self
    }

    fn resolve(&self, query: &Query) -> Result<Resolved, RetrievalError> {
        Ok(match query {
            Query::Text(t) if t.trim().is_empty() => return Err(RetrievalError::EmptyQuery),
            Query::Text(t) => Resolved::Text(t.clone()),
            Query::Image(img) => Resolved::Image(img.clone()),
            Query::TextAsImage(t) => Resolved::Image(render_text_image(t, &self.render)?),
        })
    }

    fn backend_err(source: super::BackendError) -> RetrievalError {
        RetrievalError::Backend {
            record: None,
            source,
        }
    }

    pub(crate) fn score(&self, query: &Query, k: usize, need_itm: bool) -> Result<Scored, RetrievalError> {
        let n = self.index.len();
        if k == 0 || k > n {
            return Err(RetrievalError::BadK { k, n });
        }
        let resolved = self.resolve(query)?;
        let payload = resolved.payload();
        let emb = self.backend.embed(payload).map_err(Self::backend_err)?;
        let stage1 = stage1(&emb, self.index, k)?;
        let p2 = if need_itm {
            let records = self.db.records();
            Some(par::try_map(&stage1.positions, |&pos| {
                stage2(payload, &records[pos].instruction, self.backend)
            })?)
        } else {
            None
        };
        Ok(Scored { stage1, p2 })
    }

    pub fn retrieve(&self, query: &Query, k: usize, method: Method) -> Result<RetrievalResult, RetrievalError> {
        let scored = self.score(query, k, method.uses_itm())?;
        let (best, combined) = scored.choose(method);
        let s = scored.stage1;
        let record = &self.db.records()[s.positions[best]];
        Ok(RetrievalResult {
            chosen_id: record.id,
            instruction: record.instruction.clone(),
            descriptor: record.descriptor,
            method,
            query_kind: query.kind().to_string(),
            candidates: s.ids,
            similarities: s.similarities,
            p1: s.p1,
            p2: scored.p2.unwrap_or_default(),
            combined,
        })
    }

    /// Chosen record id for each method from a single scoring pass.
    pub fn retrieve_ids(
        &self,
        query: &Query,
        k: usize,
        methods: &[Method],
    ) -> Result<Vec<u64>, RetrievalError> {
        let need_itm = methods.iter().any(|m| m.uses_itm());
        let scored = self.score(query, k, need_itm)?;
        Ok(methods
            .iter()
            .map(|&m| scored.stage1.ids[scored.choose(m).0])
            .collect())
    }
}

/// One-shot retrieval with the default render settings.
pub fn retrieve(
    query: &Query,
    db: &SkillDatabase,
    index: &EmbeddingIndex,
    backend: &dyn EncoderBackend,
    k: usize,
    method: Method,
) -> Result<RetrievalResult, RetrievalError> {
    Retriever::new(db, index, backend)?.retrieve(query, k, method)
}
