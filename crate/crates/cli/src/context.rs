use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use skillground::fixture::{fixture_annotation_set, fixture_database};
use skillground::retrieval::{
    build_index, DegradedBackend, DegradedParams, EmbeddingIndex, EncoderBackend, HashBackend,
    HttpBackend, OracleBackend, RenderConfig, SlotRegistry,
};
use skillground::skilldb::AnnotationSet;
use skillground::SkillDatabase;

use crate::CliError;

pub const HASH_DIM: usize = 256;
const HTTP_TIMEOUT: Duration = Duration::from_secs(120);

/// `mock:oracle`, `mock:hash`, `mock:degraded` or `http:<url>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendSpec {
    Oracle,
    Hash,
    Degraded,
    Http(String),
}

impl FromStr for BackendSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mock:oracle" => Ok(Self::Oracle),
            "mock:hash" => Ok(Self::Hash),
            "mock:degraded" => Ok(Self::Degraded),
            _ => match s.strip_prefix("http:") {
                Some(rest) if !rest.is_empty() => {
                    let url = if rest.starts_with("http://") || rest.starts_with("https://") {
                        rest.to_string()
                    } else {
                        format!("http://{}", rest.trim_start_matches('/'))
                    };
                    Ok(Self::Http(url))
                }
                _ => Err(format!(
                    "unknown backend `{s}` (expected mock:oracle, mock:hash, mock:degraded or http:<url>)"
                )),
            },
        }
    }
}

impl fmt::Display for BackendSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Oracle => f.write_str("mock:oracle"),
            Self::Hash => f.write_str("mock:hash"),
            Self::Degraded => f.write_str("mock:degraded"),
            Self::Http(url) => write!(f, "http:{url}"),
        }
    }
}

impl BackendSpec {
    /// Mock backends that know the database use `aliases` as extra
    /// phrasings of its records.
    pub fn build(
        &self,
        db: &SkillDatabase,
        aliases: Option<&AnnotationSet>,
        seed: u64,
    ) -> Result<Box<dyn EncoderBackend>, CliError> {
        let registry = || {
            SlotRegistry::from_database(
                db,
                aliases
                    .into_iter()
                    .flat_map(|a| a.entries.iter().map(|e| (e.query.as_str(), e.expected_id))),
                &RenderConfig::default(),
            )
        };
        Ok(match self {
            Self::Oracle => Box::new(OracleBackend::new(registry(), seed)),
            Self::Hash => Box::new(HashBackend::new(seed, HASH_DIM)),
            Self::Degraded => Box::new(DegradedBackend::new(
                registry(),
                DegradedParams {
                    seed,
                    ..DegradedParams::default()
                },
            )),
            Self::Http(url) => Box::new(
                HttpBackend::connect(url, HTTP_TIMEOUT)
                    .map_err(|e| CliError::usage(format!("cannot reach backend {url}: {e}")))?,
            ),
        })
    }
}

/// Database plus the annotations that go with it.
pub struct Corpus {
    pub db: SkillDatabase,
    pub annotations: Option<AnnotationSet>,
}

fn existing(path: &Path) -> Result<&Path, CliError> {
    if path.exists() {
        Ok(path)
    } else {
        Err(CliError::usage(format!("{} does not exist", path.display())))
    }
}

/// Without `--db` the bundled fixture database and its annotations are used.
pub fn load_corpus(db: Option<&PathBuf>, annotations: Option<&PathBuf>) -> Result<Corpus, CliError> {
    let (db, default_ann) = match db {
        Some(p) => (
            SkillDatabase::load(existing(p)?)
                .map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?,
            None,
        ),
        None => (fixture_database(), Some(fixture_annotation_set())),
    };
    let annotations = match annotations {
        Some(p) => {
            let a = AnnotationSet::load(existing(p)?)
                .map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?;
            a.validate_against(&db)
                .map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?;
            Some(a)
        }
        None => default_ann,
    };
    Ok(Corpus { db, annotations })
}

pub struct Engine {
    pub backend: Box<dyn EncoderBackend>,
    pub index: EmbeddingIndex,
}

impl Corpus {
    pub fn engine(&self, spec: &BackendSpec, seed: u64) -> Result<Engine, CliError> {
        if self.db.is_empty() {
            return Err(CliError::usage("the skill database is empty"));
        }
        let backend = spec.build(&self.db, self.annotations.as_ref(), seed)?;
        let index = build_index(&self.db, &*backend).map_err(CliError::runtime)?;
        Ok(Engine { backend, index })
    }
}
