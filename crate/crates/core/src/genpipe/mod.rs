//! Offline generation of the skill database.
//!
//! Instructions are produced per category from the template prompt, then
//! translated into motion descriptors in shuffled batches. Every provider
//! call goes through a [`QueryLedger`] so runs can be costed afterwards.

pub mod prompts;
pub mod provider;

use std::collections::HashSet;
use std::fmt;
use std::sync::Mutex;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::descriptor::MotionDescriptor;
use crate::par;
use crate::skilldb::{byte_offset, normalize_instruction, Category, DbError, DbMeta, SkillDatabase, SkillRecord};

pub use provider::{
    approx_tokens, Completion, HttpProvider, LlmProvider, ProviderError, ScriptedProvider,
};

/// Extra attempts allowed per request after the first one.
pub const RETRY_CAP: usize = 3;
pub const DEFAULT_BATCH_SIZE: usize = 25;

#[derive(Debug, Clone, Error, PartialEq)]
#[error("malformed provider output at byte {offset}: {message}\n--- raw output ---\n{raw}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
    pub raw: String,
}

#[derive(Debug, Error)]
pub enum GenError {
    #[error("requested instruction count must be at least 1")]
    ZeroCount,
    #[error("instruction list is empty")]
    NoInstructions,
    #[error("batch size must be at least 1")]
    ZeroBatch,
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Db(#[from] DbError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenConfig {
    pub batch_size: usize,
    pub with_reasoning: bool,
    pub shuffle_seed: u64,
    pub category: Category,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            batch_size: DEFAULT_BATCH_SIZE,
            with_reasoning: true,
            shuffle_seed: 0,
            category: Category::Mimic,
        }
    }
}

/// Number of provider calls needed for `n` items in batches of `batch_size`.
///
/// # Panics
/// If `batch_size` is 0.
pub fn query_count(n: usize, batch_size: usize) -> usize {
    assert!(batch_size >= 1, "batch_size must be at least 1");
    n.div_ceil(batch_size)
}

// ---------------------------------------------------------------------------
// Accounting

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CallKind {
    Instructions,
    Descriptors,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerSnapshot {
    pub instruction_calls: u64,
    pub descriptor_calls: u64,
    pub failed_calls: u64,
    pub retries: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl LedgerSnapshot {
    /// Successful calls of both kinds.
    pub fn calls(&self) -> u64 {
        self.instruction_calls + self.descriptor_calls
    }
}

/// Per-run provider usage, safe to update from concurrent batches.
#[derive(Debug, Default)]
pub struct QueryLedger {
    inner: Mutex<LedgerSnapshot>,
}

impl QueryLedger {
    pub fn new() -> Self {
        Self::default()
    }

    fn update(&self, f: impl FnOnce(&mut LedgerSnapshot)) {
        f(&mut self.inner.lock().expect("ledger lock"));
    }

    pub fn record_call(&self, kind: CallKind, c: &Completion) {
        self.update(|s| {
            match kind {
                CallKind::Instructions => s.instruction_calls += 1,
                CallKind::Descriptors => s.descriptor_calls += 1,
            }
            s.prompt_tokens += c.prompt_tokens;
            s.completion_tokens += c.completion_tokens;
        });
    }

    pub fn record_failure(&self) {
        self.update(|s| s.failed_calls += 1);
    }

    pub fn record_retry(&self) {
        self.update(|s| s.retries += 1);
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        *self.inner.lock().expect("ledger lock")
    }
}

/// User-supplied token prices; no built-in rates are assumed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PriceTable {
    pub usd_per_1k_prompt: f64,
    pub usd_per_1k_completion: f64,
}

impl PriceTable {
    pub fn cost(&self, s: &LedgerSnapshot) -> f64 {
        (s.prompt_tokens as f64 * self.usd_per_1k_prompt
            + s.completion_tokens as f64 * self.usd_per_1k_completion)
            / 1000.0
    }
}

impl std::str::FromStr for PriceTable {
    type Err = String;

    /// `"<prompt>,<completion>"` in USD per 1000 tokens.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once(',')
            .ok_or_else(|| format!("expected `<prompt>,<completion>`, got `{s}`"))?;
        let parse = |x: &str| {
            x.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| format!("bad price `{x}`"))
        };
        Ok(Self {
            usd_per_1k_prompt: parse(a)?,
            usd_per_1k_completion: parse(b)?,
        })
    }
}

fn call(
    provider: &dyn LlmProvider,
    kind: CallKind,
    system: &str,
    user: &str,
    ledger: &QueryLedger,
) -> Result<String, ProviderError> {
    match provider.complete(system, user) {
        Ok(c) => {
            ledger.record_call(kind, &c);
            Ok(c.text)
        }
        Err(e) => {
            ledger.record_failure();
            Err(e)
        }
    }
}

// ---------------------------------------------------------------------------
// Parsing

/// One item of the descriptor response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedSkill {
    pub instruction: String,
    #[serde(default)]
    pub reasoning: Option<String>,
    pub descriptor: MotionDescriptor,
}

/// Parse `text` strictly, falling back to the span from the first opening
/// bracket to the last closing one when the model wrapped the JSON in prose.
fn parse_salvaged<T: DeserializeOwned>(text: &str) -> Result<T, ParseError> {
    let strict = match serde_json::from_str::<T>(text) {
        Ok(v) => return Ok(v),
        Err(e) => e,
    };
    let mut err = (byte_offset(text, strict.line(), strict.column()), strict.to_string());
    let start = text.find(['[', '{']);
    let end = text.rfind([']', '}']);
    if let (Some(s), Some(e)) = (start, end) {
        let wrapped = s > 0 || e + 1 < text.trim_end().len();
        if s < e && wrapped {
            let inner = &text[s..=e];
            match serde_json::from_str::<T>(inner) {
                Ok(v) => return Ok(v),
                Err(se) => err = (s + byte_offset(inner, se.line(), se.column()), se.to_string()),
            }
        }
    }
    Err(ParseError {
        offset: err.0,
        message: err.1,
        raw: text.to_string(),
    })
}

/// Parse a descriptor response: a JSON array of
/// `{instruction, reasoning?, descriptor}`.
pub fn parse_llm_output(text: &str) -> Result<Vec<ParsedSkill>, ParseError> {
    parse_salvaged(text)
}

/// Parse an instruction response: a JSON array of strings.
pub fn parse_instruction_list(text: &str) -> Result<Vec<String>, ParseError> {
    parse_salvaged(text)
}

// ---------------------------------------------------------------------------
// Instructions

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionBatch {
    pub category: Category,
    pub requested: usize,
    pub instructions: Vec<String>,
    pub retries: usize,
}

impl InstructionBatch {
    /// False when the retry cap ran out before `requested` unique
    /// instructions were collected.
    pub fn is_complete(&self) -> bool {
        self.instructions.len() == self.requested
    }
}

/// Ask for `n` unique instructions of one category, re-requesting the
/// shortfall (with everything accepted so far as an exclusion list) up to
/// [`RETRY_CAP`] times.
pub fn gen_instructions(
    provider: &dyn LlmProvider,
    category: Category,
    n: usize,
    ledger: &QueryLedger,
) -> Result<InstructionBatch, GenError> {
    if n == 0 {
        return Err(GenError::ZeroCount);
    }
    let system = prompts::instruction_system_prompt(category);
    let mut accepted: Vec<String> = Vec::with_capacity(n);
    let mut keys = HashSet::new();
    let mut retries = 0;
    let mut last_failure = None;
    loop {
        let user = prompts::instruction_user_prompt(n - accepted.len(), &accepted);
        match call(provider, CallKind::Instructions, &system, &user, ledger) {
            Ok(text) => {
                if let Ok(list) = parse_instruction_list(&text) {
                    for s in list {
                        let s = s.trim().to_string();
                        if accepted.len() < n && !s.is_empty() && keys.insert(normalize_instruction(&s)) {
                            accepted.push(s);
                        }
                    }
                }
            }
            Err(e) if e.is_retryable() => last_failure = Some(e),
            Err(e) => return Err(e.into()),
        }
        if accepted.len() == n {
            break;
        }
        if retries == RETRY_CAP {
            if let (true, Some(e)) = (accepted.is_empty(), last_failure) {
                return Err(e.into());
            }
            break;
        }
        retries += 1;
        ledger.record_retry();
    }
    Ok(InstructionBatch {
        category,
        requested: n,
        instructions: accepted,
        retries,
    })
}

// ---------------------------------------------------------------------------
// Descriptors

/// An input instruction that produced no record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    /// Position in the input instruction list.
    pub index: usize,
    pub instruction: String,
    pub reason: String,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{} {:?}: {}", self.index, self.instruction, self.reason)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutcome {
    /// Accepted records in input order; `id` is the input position.
    pub records: Vec<SkillRecord>,
    pub rejections: Vec<Rejection>,
    pub batches: usize,
}

impl BatchOutcome {
    pub fn is_complete(&self) -> bool {
        self.rejections.is_empty()
    }
}

enum Slot {
    Accepted(SkillRecord),
    Rejected(String),
}

fn match_batch(
    batch: &[usize],
    instructions: &[String],
    items: Vec<ParsedSkill>,
    cfg: &GenConfig,
) -> Vec<(usize, Slot)> {
    let mut pending: Vec<(usize, String)> = batch
        .iter()
        .map(|&i| (i, normalize_instruction(&instructions[i])))
        .collect();
    let mut out = Vec::with_capacity(batch.len());
    for item in items {
        let key = normalize_instruction(&item.instruction);
        let Some(pos) = pending.iter().position(|(_, k)| *k == key) else {
            continue;
        };
        let (index, _) = pending.remove(pos);
        let reasoning = item
            .reasoning
            .map(|r| r.trim().to_string())
            .filter(|r| !r.is_empty());
        let slot = if let Err(v) = item.descriptor.validate() {
            Slot::Rejected(format!(
                "invalid descriptor: {}",
                v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
            ))
        } else if cfg.with_reasoning && reasoning.is_none() {
            Slot::Rejected("reasoning missing".into())
        } else {
            Slot::Accepted(SkillRecord {
                id: index as u64,
                instruction: instructions[index].clone(),
                reasoning: if cfg.with_reasoning { reasoning } else { None },
                category: cfg.category,
                descriptor: item.descriptor,
            })
        };
        out.push((index, slot));
    }
    out.extend(
        pending
            .into_iter()
            .map(|(i, _)| (i, Slot::Rejected("missing from provider output".into()))),
    );
    out
}

fn run_batch(
    provider: &dyn LlmProvider,
    system: &str,
    instructions: &[String],
    batch: &[usize],
    cfg: &GenConfig,
    ledger: &QueryLedger,
) -> Result<Vec<(usize, Slot)>, ProviderError> {
    let texts: Vec<&str> = batch.iter().map(|&i| instructions[i].as_str()).collect();
    let user = prompts::skill_user_prompt(&texts);
    let mut attempt = 0;
    let failure = loop {
        let failure = match call(provider, CallKind::Descriptors, system, &user, ledger) {
            Ok(text) => match parse_llm_output(&text) {
                Ok(items) => return Ok(match_batch(batch, instructions, items, cfg)),
                Err(e) => e.to_string(),
            },
            Err(e) if e.is_retryable() => e.to_string(),
            Err(e) => return Err(e),
        };
        if attempt == RETRY_CAP {
            break failure;
        }
        attempt += 1;
        ledger.record_retry();
    };
    let reason = format!("batch failed after {} attempts: {failure}", RETRY_CAP + 1);
    Ok(batch.iter().map(|&i| (i, Slot::Rejected(reason.clone()))).collect())
}

/// Translate `instructions` into records.
///
/// The list is shuffled with `cfg.shuffle_seed`, split into batches of
/// `cfg.batch_size` and dispatched concurrently. Results come back in the
/// original order. Items the provider skipped or described invalidly land
/// in [`BatchOutcome::rejections`]; a non-retryable provider error aborts.
pub fn gen_descriptors_batch(
    provider: &dyn LlmProvider,
    instructions: &[String],
    cfg: &GenConfig,
    ledger: &QueryLedger,
) -> Result<BatchOutcome, GenError> {
    if instructions.is_empty() {
        return Err(GenError::NoInstructions);
    }
    if cfg.batch_size == 0 {
        return Err(GenError::ZeroBatch);
    }
    let mut order: Vec<usize> = (0..instructions.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.shuffle_seed));
    let batches: Vec<Vec<usize>> = order.chunks(cfg.batch_size).map(<[usize]>::to_vec).collect();
    let system = prompts::skill_system_prompt(cfg.with_reasoning);
    let results = par::try_map(&batches, |b| run_batch(provider, &system, instructions, b, cfg, ledger))?;

    let mut slots: Vec<Option<Slot>> = (0..instructions.len()).map(|_| None).collect();
    for (index, slot) in results.into_iter().flatten() {
        slots[index] = Some(slot);
    }
    let mut records = Vec::new();
    let mut rejections = Vec::new();
    for (index, slot) in slots.into_iter().enumerate() {
        match slot.expect("every input lands in exactly one batch") {
            Slot::Accepted(r) => records.push(r),
            Slot::Rejected(reason) => rejections.push(Rejection {
                index,
                instruction: instructions[index].clone(),
                reason,
            }),
        }
    }
    Ok(BatchOutcome {
        records,
        rejections,
        batches: batches.len(),
    })
}

// ---------------------------------------------------------------------------
// Whole-database build

#[derive(Debug, Clone, PartialEq)]
pub struct BuildOutcome {
    pub db: SkillDatabase,
    pub instructions: Vec<InstructionBatch>,
    /// Per-category rejections, with indices into that category's list.
    pub rejections: Vec<(Category, Rejection)>,
}

impl BuildOutcome {
    pub fn is_complete(&self) -> bool {
        self.rejections.is_empty() && self.instructions.iter().all(InstructionBatch::is_complete)
    }
}

/// Generate instructions for each `(category, count)` and then their
/// descriptors, appending categories in the given order.
pub fn build_database(
    provider: &dyn LlmProvider,
    provider_label: &str,
    counts: &[(Category, usize)],
    cfg: &GenConfig,
    ledger: &QueryLedger,
) -> Result<BuildOutcome, GenError> {
    let batches = counts
        .iter()
        .map(|&(category, n)| gen_instructions(provider, category, n, ledger))
        .collect::<Result<Vec<_>, _>>()?;
    build_database_from_instructions(provider, provider_label, batches, cfg, ledger)
}

/// Descriptor generation for instruction lists produced earlier.
pub fn build_database_from_instructions(
    provider: &dyn LlmProvider,
    provider_label: &str,
    batches: Vec<InstructionBatch>,
    cfg: &GenConfig,
    ledger: &QueryLedger,
) -> Result<BuildOutcome, GenError> {
    if batches.iter().all(|b| b.instructions.is_empty()) {
        return Err(GenError::NoInstructions);
    }
    let mut db = SkillDatabase::with_meta(DbMeta {
        model: provider.model_name(),
        provider: provider_label.to_string(),
        shuffle_seed: Some(cfg.shuffle_seed),
        batch_size: Some(cfg.batch_size),
        with_reasoning: Some(cfg.with_reasoning),
        prompt_hashes: prompts::prompt_hashes(),
        generated_unix: None,
    });
    let mut rejections = Vec::new();
    for batch in &batches {
        if batch.instructions.is_empty() {
            continue;
        }
        let category = batch.category;
        let cat_cfg = GenConfig { category, ..*cfg };
        let outcome = gen_descriptors_batch(provider, &batch.instructions, &cat_cfg, ledger)?;
        for r in outcome.records {
            let index = r.id as usize;
            if let Err(e) = db.insert(r) {
                rejections.push((
                    category,
                    Rejection {
                        index,
                        instruction: batch.instructions[index].clone(),
                        reason: e.to_string(),
                    },
                ));
            }
        }
        rejections.extend(outcome.rejections.into_iter().map(|r| (category, r)));
    }
    Ok(BuildOutcome {
        db,
        instructions: batches,
        rejections,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn skill(instr: &str, offsets: &str) -> String {
        format!(
            r#"{{"instruction":"{instr}","reasoning":"r","descriptor":{{"offsets":{offsets},"period_s":0.4,"vel_limit":1.0}}}}"#
        )
    }

    #[test]
    fn query_count_examples() {
        assert_eq!(query_count(300, 1), 300);
        assert_eq!(query_count(300, 25), 12);
        assert_eq!(query_count(0, 7), 0);
        assert_eq!(query_count(26, 25), 2);
    }

    #[test]
    fn parse_valid_array() {
        let text = format!("[{},{}]", skill("a", "[0,0.5,0.5,0]"), skill("b", "[0,0,0,0]"));
        let items = parse_llm_output(&text).unwrap();
        assert_eq!(items.len(), 2);
        assert_eq!(items[1].instruction, "b");
        assert_eq!(items[0].reasoning.as_deref(), Some("r"));
    }

    #[test]
    fn parse_salvages_prose_wrapper() {
        let text = format!(
            "Here is the result:\n```json\n[{}]\n```\nLet me know if you need more.",
            skill("a", "[0,0.5,0.5,0]")
        );
        assert_eq!(parse_llm_output(&text).unwrap().len(), 1);
        assert_eq!(parse_instruction_list("Sure! [\"x\", \"y\"] done").unwrap(), ["x", "y"]);
    }

    #[test]
    fn parse_error_reports_offset_and_raw_text() {
        let e = parse_llm_output("[{").unwrap_err();
        assert_eq!(e.offset, 2);
        assert_eq!(e.raw, "[{");
        assert!(e.to_string().contains("[{"));
        let e = parse_llm_output("xyz").unwrap_err();
        assert_eq!(e.offset, 1);
    }

    #[test]
    fn zero_instructions_is_a_precondition_error() {
        let p = ScriptedProvider::new(Vec::<String>::new());
        assert!(matches!(
            gen_instructions(&p, Category::Mimic, 0, &QueryLedger::new()),
            Err(GenError::ZeroCount)
        ));
        assert!(p.prompts().is_empty());
    }

    #[test]
    fn duplicate_instruction_triggers_one_retry() {
        let p = ScriptedProvider::new([r#"["walk like a duck", "Walk  like a DUCK", "hop"]"#, r#"["sway"]"#]);
        let ledger = QueryLedger::new();
        let out = gen_instructions(&p, Category::Mimic, 3, &ledger).unwrap();
        assert_eq!(out.instructions, ["walk like a duck", "hop", "sway"]);
        assert_eq!(out.retries, 1);
        assert!(out.is_complete());
        let prompts = p.prompts();
        assert_eq!(prompts.len(), 2);
        assert!(prompts[1].1.starts_with("Generate 1 new commands."));
        assert!(prompts[1].1.contains("- walk like a duck\n- hop"));
        let s = ledger.snapshot();
        assert_eq!((s.instruction_calls, s.retries), (2, 1));
    }

    #[test]
    fn retry_cap_yields_partial_result() {
        let p = ScriptedProvider::new([r#"["a"]"#, r#"["a"]"#, "garbage", r#"["a"]"#, r#"["b"]"#]);
        let out = gen_instructions(&p, Category::Scene, 2, &QueryLedger::new()).unwrap();
        assert_eq!(out.instructions, ["a"]);
        assert_eq!(out.retries, RETRY_CAP);
        assert!(!out.is_complete());
        assert_eq!(p.prompts().len(), RETRY_CAP + 1);
    }

    #[test]
    fn transient_failures_are_retried() {
        let p = ScriptedProvider::with_results([
            Err(ProviderError::Transient("timeout".into())),
            Ok(r#"["a"]"#.to_string()),
        ]);
        let out = gen_instructions(&p, Category::Direct, 1, &QueryLedger::new()).unwrap();
        assert_eq!(out.instructions, ["a"]);
        let p = ScriptedProvider::with_results([Err(ProviderError::Fatal("denied".into()))]);
        assert!(matches!(
            gen_instructions(&p, Category::Direct, 1, &QueryLedger::new()),
            Err(GenError::Provider(ProviderError::Fatal(_)))
        ));
    }

    #[test]
    fn invalid_offset_rejects_only_that_item() {
        let instructions: Vec<String> = vec!["a".into(), "b".into(), "c".into()];
        let body = format!(
            "[{},{},{}]",
            skill("c", "[0,0,0,0]"),
            skill("b", "[0,1.5,0,0]"),
            skill("a", "[0,0.5,0.5,0]")
        );
        let p = ScriptedProvider::new([body]);
        let cfg = GenConfig {
            batch_size: 3,
            ..GenConfig::default()
        };
        let out = gen_descriptors_batch(&p, &instructions, &cfg, &QueryLedger::new()).unwrap();
        let kept: Vec<&str> = out.records.iter().map(|r| r.instruction.as_str()).collect();
        assert_eq!(kept, ["a", "c"]);
        assert_eq!(out.rejections.len(), 1);
        assert_eq!(out.rejections[0].instruction, "b");
        assert!(out.rejections[0].reason.contains("FR"));
    }

    #[test]
    fn malformed_batch_is_retried_then_rejected() {
        let instructions: Vec<String> = vec!["a".into()];
        let p = ScriptedProvider::new(["oops"; RETRY_CAP + 1]);
        let ledger = QueryLedger::new();
        let out = gen_descriptors_batch(&p, &instructions, &GenConfig::default(), &ledger).unwrap();
        assert!(out.records.is_empty());
        assert!(out.rejections[0].reason.contains("oops"));
        assert_eq!(ledger.snapshot().retries, RETRY_CAP as u64);
    }

    #[test]
    fn reasoning_required_when_enabled() {
        let instructions: Vec<String> = vec!["a".into()];
        let body = r#"[{"instruction":"a","descriptor":{"offsets":[0,0,0,0],"period_s":0.4,"vel_limit":1.0}}]"#;
        let on = gen_descriptors_batch(
            &ScriptedProvider::new([body]),
            &instructions,
            &GenConfig::default(),
            &QueryLedger::new(),
        )
        .unwrap();
        assert_eq!(on.rejections[0].reason, "reasoning missing");
        let off_cfg = GenConfig {
            with_reasoning: false,
            ..GenConfig::default()
        };
        let off = gen_descriptors_batch(&ScriptedProvider::new([body]), &instructions, &off_cfg, &QueryLedger::new())
            .unwrap();
        assert_eq!(off.records.len(), 1);
        assert_eq!(off.records[0].reasoning, None);
    }

    #[test]
    fn empty_instruction_list_is_rejected() {
        let p = ScriptedProvider::new(Vec::<String>::new());
        assert!(matches!(
            gen_descriptors_batch(&p, &[], &GenConfig::default(), &QueryLedger::new()),
            Err(GenError::NoInstructions)
        ));
    }

    #[test]
    fn price_table_parses_and_costs() {
        let p: PriceTable = "2.5,10".parse().unwrap();
        let s = LedgerSnapshot {
            prompt_tokens: 1000,
            completion_tokens: 500,
            ..LedgerSnapshot::default()
        };
        assert!((p.cost(&s) - 7.5).abs() < 1e-12);
        assert!("x".parse::<PriceTable>().is_err());
    }
}
