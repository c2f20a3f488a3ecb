use serde::{Deserialize, Serialize};

use super::rank::Retriever;
use super::{Method, Query, RetrievalError};
use crate::par;
use crate::skilldb::AnnotationSet;

/// Correct retrievals for one method under both query representations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRow {
    pub method: Method,
    pub text_correct: usize,
    pub image_correct: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalReport {
    pub total: usize,
    pub k: usize,
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn row(&self, method: Method) -> Option<&EvalRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn text_accuracy(&self, method: Method) -> Option<f64> {
        self.row(method)
            .map(|r| r.text_correct as f64 / self.total.max(1) as f64)
    }

    pub fn image_accuracy(&self, method: Method) -> Option<f64> {
        self.row(method)
            .map(|r| r.image_correct as f64 / self.total.max(1) as f64)
    }

    /// `method,text_as_string,text_as_image,average` with `hits/total` cells
    /// and the average as a percentage.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,text_as_string,text_as_image,average\n");
        for r in &self.rows {
            let avg = 100.0 * (r.text_correct + r.image_correct) as f64 / (2 * self.total.max(1)) as f64;
            out.push_str(&format!(
                "{},{}/{},{}/{},{:.1}%\n",
                r.method, r.text_correct, self.total, r.image_correct, self.total, avg
            ));
        }
        out
    }
}

/// Retrieval accuracy per method, once with each query as a string and once
/// rendered as an image.
pub fn evaluate(
    annotations: &AnnotationSet,
    retriever: &Retriever<'_>,
    k: usize,
    methods: &[Method],
) -> Result<EvalReport, RetrievalError> {
    let per_query = par::try_map(&annotations.entries, |a| {
        let text = retriever.retrieve_ids(&Query::Text(a.query.clone()), k, methods)?;
        let image = retriever.retrieve_ids(&Query::TextAsImage(a.query.clone()), k, methods)?;
        Ok::<_, RetrievalError>((a.expected_id, text, image))
    })?;
    let rows = methods
        .iter()
        .enumerate()
        .map(|(m, &method)| EvalRow {
            method,
            text_correct: per_query.iter().filter(|(e, t, _)| t[m] == *e).count(),
            image_correct: per_query.iter().filter(|(e, _, i)| i[m] == *e).count(),
        })
        .collect();
    Ok(EvalReport {
        total: annotations.entries.len(),
        k,
        rows,
    })
}
