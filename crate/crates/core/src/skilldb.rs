//! The instruction-grounded skill database.
//!
//! Records are deduplicated on their normalized instruction text (casefolded,
//! whitespace collapsed). Different instructions may legitimately share a
//! descriptor, so descriptors are never part of the key.
//!
//! On disk the database is pretty-printed UTF-8 JSON with sorted keys:
//!
//! ```json
//! {"meta": {...}, "records": [{"category": "mimic", "descriptor": {...},
//!   "id": 0, "instruction": "...", "reasoning": "..."}]}
//! ```

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::descriptor::{classify_gait, GaitClass, MotionDescriptor, Violation, DEFAULT_GAIT_TOL};
use crate::par;

/// Instruction category used during generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Mimic,
    Scene,
    Direct,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Mimic, Category::Scene, Category::Direct];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Mimic => "mimic",
            Category::Scene => "scene",
            Category::Direct => "direct",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mimic" => Ok(Category::Mimic),
            "scene" => Ok(Category::Scene),
            "direct" | "action" => Ok(Category::Direct),
            other => Err(format!("unknown category `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillRecord {
    pub id: u64,
    pub instruction: String,
    pub reasoning: Option<String>,
    pub category: Category,
    pub descriptor: MotionDescriptor,
}

/// Generation provenance.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DbMeta {
    pub model: String,
    pub provider: String,
    pub shuffle_seed: Option<u64>,
    pub batch_size: Option<usize>,
    pub with_reasoning: Option<bool>,
    /// SHA-256 of each prompt asset, keyed by asset name.
    pub prompt_hashes: BTreeMap<String, String>,
    /// Unix seconds; left empty for reproducible fixture builds.
    pub generated_unix: Option<u64>,
}

#[derive(Debug, Error)]
pub enum DbError {
    #[error("instruction already present as record {existing_id}")]
    Duplicate { existing_id: u64 },
    #[error("instruction text is empty")]
    EmptyInstruction,
    #[error("invalid descriptor: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidDescriptor(Vec<Violation>),
    #[error("database is empty")]
    Empty,
    #[error("record {id}: {field} = {value} falls outside the histogram bins")]
    OutOfRange { id: u64, field: &'static str, value: f64 },
    #[error("bad histogram bins: {0}")]
    BadBins(String),
    #[error("malformed JSON at byte {offset}: {message}")]
    Json { offset: usize, message: String },
    #[error("record {index}: field `{field}`: {message}")]
    Schema {
        index: usize,
        field: String,
        message: String,
    },
    #[error("annotation {index}: record id {id} does not exist")]
    UnknownAnnotationId { index: usize, id: u64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Casefold and collapse whitespace.
pub fn normalize_instruction(text: &str) -> String {
    text.split_whitespace()
        .map(|w| w.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, Default)]
pub struct SkillDatabase {
    pub meta: DbMeta,
    records: Vec<SkillRecord>,
    keys: HashMap<String, u64>,
    next_id: u64,
}

impl PartialEq for SkillDatabase {
    fn eq(&self, other: &Self) -> bool {
        self.meta == other.meta && self.records == other.records
    }
}

#[derive(Serialize)]
struct DbFileRef<'a> {
    meta: &'a DbMeta,
    records: &'a [SkillRecord],
}

impl SkillDatabase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_meta(meta: DbMeta) -> Self {
        Self {
            meta,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[SkillRecord] {
        &self.records
    }

    pub fn get(&self, id: u64) -> Option<&SkillRecord> {
        // Ids are assigned in increasing order, so binary search works.
        self.records
            .binary_search_by_key(&id, |r| r.id)
            .ok()
            .map(|i| &self.records[i])
    }

    /// Record whose normalized instruction equals that of `text`.
    pub fn find_instruction(&self, text: &str) -> Option<&SkillRecord> {
        self.keys
            .get(&normalize_instruction(text))
            .and_then(|&id| self.get(id))
    }

    /// Append `record` under a fresh id (the incoming id is ignored).
    ///
    /// A rejected insert leaves the database untouched.
    pub fn insert(&mut self, mut record: SkillRecord) -> Result<u64, DbError> {
        if record.instruction.trim().is_empty() {
            return Err(DbError::EmptyInstruction);
        }
        record
            .descriptor
            .validate()
            .map_err(DbError::InvalidDescriptor)?;
        let key = normalize_instruction(&record.instruction);
        if let Some(&existing_id) = self.keys.get(&key) {
            return Err(DbError::Duplicate { existing_id });
        }
        let id = self.next_id;
        record.id = id;
        self.next_id += 1;
        self.keys.insert(key, id);
        self.records.push(record);
        Ok(id)
    }

    /// Content hash over meta-independent record data. Changes whenever a
    /// record is added, removed or edited.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(&self.records).expect("records serialize");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Pretty JSON with sorted keys and a trailing newline.
    pub fn to_json_string(&self) -> String {
        let file = DbFileRef {
            meta: &self.meta,
            records: &self.records,
        };
        // Routing through Value sorts object keys.
        let value = serde_json::to_value(file).expect("database serializes");
        let mut s = serde_json::to_string_pretty(&value).expect("value serializes");
        s.push('\n');
        s
    }

    pub fn from_json_str(text: &str) -> Result<Self, DbError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| json_error(text, &e))?;
        let (meta_value, records_value) = match value {
            serde_json::Value::Array(_) => (None, value),
            serde_json::Value::Object(mut map) => {
                let records = map.remove("records").ok_or_else(|| DbError::Schema {
                    index: 0,
                    field: "records".into(),
                    message: "missing top-level `records` array".into(),
                })?;
                (map.remove("meta"), records)
            }
            _ => {
                return Err(DbError::Schema {
                    index: 0,
                    field: "records".into(),
                    message: "expected an object or an array of records".into(),
                })
            }
        };
        let meta = match meta_value {
            Some(m) => serde_json::from_value(m).map_err(|e| DbError::Schema {
                index: 0,
                field: "meta".into(),
                message: e.to_string(),
            })?,
            None => DbMeta::default(),
        };
        let records: Vec<SkillRecord> =
            serde_path_to_error::deserialize(records_value).map_err(schema_error)?;
        Self::from_records(meta, records)
    }

    /// Rebuild a database from stored records, keeping their ids.
    pub fn from_records(meta: DbMeta, records: Vec<SkillRecord>) -> Result<Self, DbError> {
        let mut keys = HashMap::with_capacity(records.len());
        let mut seen_ids = HashSet::with_capacity(records.len());
        let mut last_id = None;
        for (index, r) in records.iter().enumerate() {
            let schema = |field: &str, message: String| DbError::Schema {
                index,
                field: field.to_string(),
                message,
            };
            if r.instruction.trim().is_empty() {
                return Err(schema("instruction", "empty instruction".into()));
            }
            if let Err(v) = r.descriptor.validate() {
                let msg = v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ");
                return Err(schema("descriptor", msg));
            }
            if !seen_ids.insert(r.id) || last_id.is_some_and(|l| r.id < l) {
                return Err(schema("id", format!("id {} is duplicated or out of order", r.id)));
            }
            last_id = Some(r.id);
            if let Some(prev) = keys.insert(normalize_instruction(&r.instruction), r.id) {
                return Err(schema(
                    "instruction",
                    format!("duplicates record {prev} after normalization"),
                ));
            }
        }
        let next_id = last_id.map_or(0, |l| l + 1);
        Ok(Self {
            meta,
            records,
            keys,
            next_id,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DbError> {
        fs::write(path, self.to_json_string())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DbError> {
        Self::from_json_str(&fs::read_to_string(path)?)
    }
}

/// Convert a serde_json line/column to a byte offset into `text`.
pub(crate) fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let mut offset = 0;
    for (i, l) in text.split_inclusive('\n').enumerate() {
        if i + 1 == line {
            return offset + column;
        }
        offset += l.len();
    }
    offset + column
}

fn json_error(text: &str, e: &serde_json::Error) -> DbError {
    DbError::Json {
        offset: byte_offset(text, e.line(), e.column()),
        message: e.to_string(),
    }
}

fn schema_error(e: serde_path_to_error::Error<serde_json::Error>) -> DbError {
    use serde_path_to_error::Segment;
    let mut index = 0;
    let mut fields = Vec::new();
    for seg in e.path().iter() {
        match seg {
            Segment::Seq { index: i } if fields.is_empty() => index = *i,
            Segment::Seq { index: i } => fields.push(format!("[{i}]")),
            Segment::Map { key } => fields.push(key.clone()),
            Segment::Enum { variant } => fields.push(variant.clone()),
            Segment::Unknown => fields.push("?".into()),
        }
    }
    let message = e.inner().to_string();
    if let Some(missing) = message
        .strip_prefix("missing field `")
        .and_then(|rest| rest.split('`').next())
    {
        fields.push(missing.to_string());
    }
    DbError::Schema {
        index,
        field: fields.join("."),
        message,
    }
}

// ---------------------------------------------------------------------------
// Statistics

/// Normalized histogram over half-open bins; the last bin is closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub probabilities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbStats {
    pub gait_dist: BTreeMap<GaitClass, f64>,
    pub period_hist: Histogram,
    pub vel_hist: Histogram,
}

/// Period bins: 0.1 s to 1.1 s in 0.1 s steps.
pub fn default_period_bins() -> Vec<f64> {
    (1..=11).map(|i| i as f64 / 10.0).collect()
}

/// Velocity bins: 0 to 3 m/s in 0.25 m/s steps.
pub fn default_vel_bins() -> Vec<f64> {
    (0..=12).map(|i| i as f64 * 0.25).collect()
}

fn check_edges(edges: &[f64], name: &str) -> Result<(), DbError> {
    if edges.len() < 2 {
        return Err(DbError::BadBins(format!("{name}: need at least two edges")));
    }
    if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(DbError::BadBins(format!("{name}: edges must be finite and strictly increasing")));
    }
    Ok(())
}

fn bin_index(edges: &[f64], v: f64) -> Option<usize> {
    let last = edges.len() - 1;
    if !(v >= edges[0] && v <= edges[last]) {
        return None;
    }
    if v == edges[last] {
        return Some(last - 1);
    }
    // First edge strictly greater than v, minus one.
    Some(edges.partition_point(|&e| e <= v) - 1)
}

fn histogram(
    records: &[SkillRecord],
    edges: &[f64],
    field: &'static str,
    get: impl Fn(&SkillRecord) -> f64,
) -> Result<Histogram, DbError> {
    let mut counts = vec![0usize; edges.len() - 1];
    for r in records {
        let value = get(r);
        let i = bin_index(edges, value).ok_or(DbError::OutOfRange { id: r.id, field, value })?;
        counts[i] += 1;
    }
    let n = records.len() as f64;
    Ok(Histogram {
        edges: edges.to_vec(),
        probabilities: counts.iter().map(|&c| c as f64 / n).collect(),
        counts,
    })
}

/// Gait distribution and period/velocity histograms, each summing to 1.
pub fn stats(db: &SkillDatabase, period_bins: &[f64], vel_bins: &[f64]) -> Result<DbStats, DbError> {
    if db.is_empty() {
        return Err(DbError::Empty);
    }
    check_edges(period_bins, "period")?;
    check_edges(vel_bins, "velocity")?;
    let records = db.records();
    let classes = par::map(records, |r| classify_gait(&r.descriptor.offsets, DEFAULT_GAIT_TOL));
    let mut gait_dist: BTreeMap<GaitClass, f64> = GaitClass::ALL.iter().map(|&g| (g, 0.0)).collect();
    for g in classes {
        *gait_dist.get_mut(&g).expect("all classes present") += 1.0;
    }
    let n = records.len() as f64;
    for p in gait_dist.values_mut() {
        *p /= n;
    }
    Ok(DbStats {
        gait_dist,
        period_hist: histogram(records, period_bins, "period_s", |r| r.descriptor.period_s)?,
        vel_hist: histogram(records, vel_bins, "vel_limit", |r| r.descriptor.vel_limit)?,
    })
}

/// Parse bins given as `start:stop:step` or a comma-separated edge list.
pub fn parse_bins(spec: &str) -> Result<Vec<f64>, DbError> {
    let bad = |m: &str| DbError::BadBins(format!("`{spec}`: {m}"));
    let edges = if spec.contains(':') {
        let parts: Vec<f64> = spec
            .split(':')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad("expected numbers"))?;
        let [start, stop, step] = parts[..] else {
            return Err(bad("expected start:stop:step"));
        };
        if !(step > 0.0) || !(stop > start) {
            return Err(bad("need stop > start and step > 0"));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        let mut edges: Vec<f64> = (0..=n).map(|i| start + i as f64 * step).collect();
        if (edges[n] - stop).abs() > 1e-9 {
            edges.push(stop);
        } else {
            edges[n] = stop;
        }
        edges
    } else {
        spec.split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad("expected comma-separated numbers"))?
    };
    check_edges(&edges, "bins")?;
    Ok(edges)
}

impl DbStats {
    pub fn gait_csv(&self) -> String {
        let mut out = String::from("gait,probability\n");
        for (g, p) in &self.gait_dist {
            out.push_str(&format!("{g},{p}\n"));
        }
        out
    }
}

impl Histogram {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_start,bin_end,count,probability\n");
        for i in 0..self.counts.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.edges[i],
                self.edges[i + 1],
                self.counts[i],
                self.probabilities[i]
            ));
        }
        out
    }

    pub fn labels(&self) -> Vec<String> {
        self.edges
            .windows(2)
            .map(|w| format!("{:.2}", (w[0] + w[1]) / 2.0))
            .collect()
    }
}

/// Minimal SVG bar chart for probabilities in `[0, 1]`.
pub fn bar_chart_svg(title: &str, labels: &[String], values: &[f64]) -> String {
    const W: f64 = 480.0;
    const H: f64 = 260.0;
    const PAD: f64 = 40.0;
    let n = values.len().max(1) as f64;
    let bar_w = (W - 2.0 * PAD) / n;
    let top = values.iter().cloned().fold(0.0f64, f64::max).max(1e-12);
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
        W / 2.0,
        xml_escape(title)
    );
    for (i, (&v, label)) in values.iter().zip(labels).enumerate() {
        let h = (H - 2.0 * PAD) * v / top;
        let x = PAD + i as f64 * bar_w;
        let y = H - PAD - h;
        svg.push_str(&format!(
            "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{h:.2}\" fill=\"#4a6fa5\"><title>{}: {v:.4}</title></rect>\n",
            bar_w * 0.9,
            xml_escape(label)
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"8\" text-anchor=\"middle\">{}</text>\n",
            x + bar_w * 0.45,
            H - PAD + 12.0,
            xml_escape(label)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

// ---------------------------------------------------------------------------
// Annotations

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub query: String,
    pub expected_id: u64,
}

/// Ground-truth (query, record id) pairs for retrieval evaluation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub entries: Vec<Annotation>,
}

impl AnnotationSet {
    pub fn validate_against(&self, db: &SkillDatabase) -> Result<(), DbError> {
        for (index, a) in self.entries.iter().enumerate() {
            if db.get(a.expected_id).is_none() {
                return Err(DbError::UnknownAnnotationId {
                    index,
                    id: a.expected_id,
                });
            }
        }
        Ok(())
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.entries).expect("annotations serialize");
        s.push('\n');
        s
    }

    pub fn from_json_str(text: &str) -> Result<Self, DbError> {
        let entries: Vec<Annotation> = serde_path_to_error::deserialize(
            &mut serde_json::Deserializer::from_str(text),
        )
        .map_err(|e| {
            let inner = e.inner();
            if inner.is_syntax() || inner.is_eof() {
                json_error(text, inner)
            } else {
                schema_error(e)
            }
        })?;
        Ok(Self { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DbError> {
        Self::from_json_str(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DbError> {
        fs::write(path, self.to_json_string())?;
        Ok(())
    }
}
