use std::fs;
use std::io::{self, BufRead, Write};
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use serde_json::json;

use skillground::fixture::{category_counts, FixtureProvider};
use skillground::genpipe::{
    build_database, build_database_from_instructions, gen_instructions as generate_instructions,
    BuildOutcome, GenConfig, HttpProvider, InstructionBatch, LlmProvider, QueryLedger,
};
use skillground::nav::{simulate, GovernorConfig, RetrievalAdvisor, Scenario, SimRun};
use skillground::retrieval::{evaluate, EvalReport, EvalRow, Retriever};
use skillground::skilldb::{self, bar_chart_svg, default_period_bins, default_vel_bins};
use skillground::{Method, Query, RasterImage, RetrievalResult, SkillDatabase};
use skillground_service::{app, conformance as protocol, run_until_signal, Snapshot};

use crate::context::{load_corpus, Corpus, Engine};
use crate::{
    CliError, ConformanceArgs, EvalArgs, GenInstructionsArgs, GenSkillsArgs, NavsimArgs,
    ProviderKind, RetrieveArgs, ServeArgs, StatsArgs,
};

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

/// Write to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let mut out = io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|()| out.flush());
}

fn print_json(value: &serde_json::Value) {
    emit(&(serde_json::to_string_pretty(value).expect("JSON value serializes") + "\n"));
}

fn provider(kind: ProviderKind) -> Result<(Box<dyn LlmProvider>, &'static str), CliError> {
    Ok(match kind {
        ProviderKind::Fixture => (Box::new(FixtureProvider), "fixture"),
        ProviderKind::Http => (
            Box::new(HttpProvider::from_env().map_err(|e| CliError::usage(e.to_string()))?),
            "http",
        ),
    })
}

fn incomplete_batches(batches: &[InstructionBatch]) -> Vec<serde_json::Value> {
    batches
        .iter()
        .filter(|b| !b.is_complete())
        .map(|b| {
            json!({
                "category": b.category,
                "requested": b.requested,
                "generated": b.instructions.len(),
            })
        })
        .collect()
}

pub fn gen_instructions(a: &GenInstructionsArgs) -> Result<(), CliError> {
    let (provider, _) = provider(a.provider)?;
    let n = a.n as usize;
    let counts = match a.category.category() {
        Some(c) => vec![(c, n)],
        None => category_counts(n),
    };
    let ledger = QueryLedger::new();
    let batches = counts
        .iter()
        .map(|&(c, k)| generate_instructions(&*provider, c, k, &ledger))
        .collect::<Result<Vec<_>, _>>()
        .map_err(CliError::runtime)?;
    let body = serde_json::to_string_pretty(&batches).expect("batches serialize") + "\n";
    write_file(&a.out, &body)?;
    let incomplete = incomplete_batches(&batches);
    print_json(&json!({
        "out": a.out,
        "instructions": batches.iter().map(|b| b.instructions.len()).sum::<usize>(),
        "ledger": ledger.snapshot(),
        "incomplete": incomplete,
    }));
    for b in batches.iter().filter(|b| !b.is_complete()) {
        eprintln!(
            "{}: {} of {} unique instructions after retries",
            b.category,
            b.instructions.len(),
            b.requested
        );
    }
    if incomplete.is_empty() {
        Ok(())
    } else {
        Err(CliError::partial("instruction generation was partial"))
    }
}

pub fn gen_skills(a: &GenSkillsArgs, seed: u64) -> Result<(), CliError> {
    let (provider, label) = provider(a.provider)?;
    let cfg = GenConfig {
        batch_size: a.batch_size,
        with_reasoning: !a.no_reasoning,
        shuffle_seed: seed,
        ..GenConfig::default()
    };
    let ledger = QueryLedger::new();
    let outcome: BuildOutcome = match (&a.instructions, a.n) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let batches: Vec<InstructionBatch> =
                serde_json::from_str(&text).map_err(|e| CliError::io(path, e))?;
            build_database_from_instructions(&*provider, label, batches, &cfg, &ledger)
        }
        (None, Some(n)) => build_database(&*provider, label, &category_counts(n as usize), &cfg, &ledger),
        (None, None) => return Err(CliError::usage("either --n or --instructions is required")),
    }
    .map_err(CliError::runtime)?;
    write_file(&a.out, &outcome.db.to_json_string())?;
    let snapshot = ledger.snapshot();
    let rejections: Vec<_> = outcome
        .rejections
        .iter()
        .map(|(c, r)| json!({"category": c, "index": r.index, "instruction": r.instruction, "reason": r.reason}))
        .collect();
    print_json(&json!({
        "out": a.out,
        "records": outcome.db.len(),
        "ledger": snapshot,
        "cost_usd": a.price.map(|p| p.cost(&snapshot)),
        "rejections": rejections,
        "incomplete_instructions": incomplete_batches(&outcome.instructions),
    }));
    for (c, r) in &outcome.rejections {
        eprintln!("rejected {c} {r}");
    }
    if outcome.is_complete() {
        Ok(())
    } else {
        Err(CliError::partial(format!(
            "{} instruction(s) produced no record",
            outcome.rejections.len()
        )))
    }
}

pub fn stats(a: &StatsArgs) -> Result<(), CliError> {
    let corpus = load_corpus(a.db.as_ref(), None)?;
    let bins = |spec: &Option<String>, default: fn() -> Vec<f64>| match spec {
        Some(s) => skilldb::parse_bins(s).map_err(|e| CliError::usage(e.to_string())),
        None => Ok(default()),
    };
    let period_bins = bins(&a.period_bins, default_period_bins)?;
    let vel_bins = bins(&a.vel_bins, default_vel_bins)?;
    let st = skilldb::stats(&corpus.db, &period_bins, &vel_bins).map_err(CliError::runtime)?;
    let gait_labels: Vec<String> = st.gait_dist.keys().map(|g| g.to_string()).collect();
    let gait_values: Vec<f64> = st.gait_dist.values().copied().collect();
    let files = [
        ("gait.csv", st.gait_csv()),
        ("period.csv", st.period_hist.to_csv()),
        ("velocity.csv", st.vel_hist.to_csv()),
        ("gait.svg", bar_chart_svg("Gait", &gait_labels, &gait_values)),
        (
            "period.svg",
            bar_chart_svg("Period (s)", &st.period_hist.labels(), &st.period_hist.probabilities),
        ),
        (
            "velocity.svg",
            bar_chart_svg("Velocity limit (m/s)", &st.vel_hist.labels(), &st.vel_hist.probabilities),
        ),
    ];
    for (name, body) in &files {
        write_file(&a.out.join(name), body)?;
    }
    print_json(&json!({
        "records": corpus.db.len(),
        "stats": st,
        "files": files.iter().map(|(n, _)| a.out.join(n)).collect::<Vec<_>>(),
    }));
    Ok(())
}

fn retriever<'a>(corpus: &'a Corpus, engine: &'a Engine) -> Result<Retriever<'a>, CliError> {
    Retriever::new(&corpus.db, &engine.index, &*engine.backend).map_err(CliError::runtime)
}

fn breakdown(out: &mut impl Write, query: &str, r: &RetrievalResult, db: &SkillDatabase) -> io::Result<()> {
    writeln!(out, "query: {query:?} ({}), method {}", r.query_kind, r.method)?;
    writeln!(out, "  {:>4} {:>5} {:>8} {:>8} {:>8} {:>8}  instruction", "rank", "id", "sim", "p1", "p2", "score")?;
    for (i, id) in r.candidates.iter().enumerate() {
        let p2 = r.p2.get(i).map_or("-".to_string(), |v| format!("{v:.4}"));
        let text = db.get(*id).map_or("", |rec| rec.instruction.as_str());
        writeln!(
            out,
            "  {:>4} {:>5} {:>8.4} {:>8.4} {:>8} {:>8.4}  {}{}",
            i + 1,
            id,
            r.similarities[i],
            r.p1[i],
            p2,
            r.combined[i],
            if *id == r.chosen_id { "* " } else { "" },
            text
        )?;
    }
    let d = &r.descriptor;
    writeln!(
        out,
        "=> #{} {:?}: offsets {:?}, period {} s, velocity limit {} m/s, {}",
        r.chosen_id,
        r.instruction,
        d.offsets,
        d.period_s,
        d.vel_limit,
        d.gait_class()
    )
}

pub fn retrieve(a: &RetrieveArgs, seed: u64) -> Result<(), CliError> {
    let ra = &a.retrieval;
    let corpus = load_corpus(ra.corpus.db.as_ref(), ra.corpus.annotations.as_ref())?;
    let engine = corpus.engine(&ra.backend, seed)?;
    let r = retriever(&corpus, &engine)?;
    if a.repl {
        let stdin = io::stdin();
        let mut out = io::stdout().lock();
        for line in stdin.lock().lines() {
            let line = line.map_err(|e| CliError::usage(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let query = match line.strip_prefix("img:") {
                Some(t) => Query::TextAsImage(t.trim().to_string()),
                None => Query::Text(line.to_string()),
            };
            match r.retrieve(&query, ra.k, ra.method) {
                Ok(res) => breakdown(&mut out, line, &res, &corpus.db).map_err(|e| CliError::usage(e.to_string()))?,
                Err(e) => eprintln!("error: {e}"),
            }
            out.flush().map_err(|e| CliError::usage(e.to_string()))?;
        }
        return Ok(());
    }
    let query = if let Some(t) = &a.text {
        Query::Text(t.clone())
    } else if let Some(t) = &a.text_as_image {
        Query::TextAsImage(t.clone())
    } else if let Some(p) = &a.image {
        let bytes = fs::read(p).map_err(|e| CliError::io(p, e))?;
        Query::Image(RasterImage::from_png(&bytes).map_err(|e| CliError::io(p, e))?)
    } else {
        return Err(CliError::usage("no query given"));
    };
    let result = r.retrieve(&query, ra.k, ra.method).map_err(CliError::runtime)?;
    print_json(&serde_json::to_value(&result).expect("result serializes"));
    Ok(())
}

/// Pool per-seed reports into one with summed hits and totals.
fn pool(reports: &[EvalReport]) -> EvalReport {
    let rows = Method::ALL
        .iter()
        .map(|&method| EvalRow {
            method,
            text_correct: reports.iter().filter_map(|r| r.row(method)).map(|r| r.text_correct).sum(),
            image_correct: reports.iter().filter_map(|r| r.row(method)).map(|r| r.image_correct).sum(),
        })
        .collect();
    EvalReport {
        total: reports.iter().map(|r| r.total).sum(),
        k: reports.first().map_or(0, |r| r.k),
        rows,
    }
}

pub fn eval(a: &EvalArgs, seed: u64) -> Result<(), CliError> {
    let corpus = load_corpus(a.corpus.db.as_ref(), a.corpus.annotations.as_ref())?;
    let Some(annotations) = &corpus.annotations else {
        return Err(CliError::usage("--annotations is required with a custom --db"));
    };
    let reports = (seed..seed + a.seeds)
        .map(|s| {
            let engine = corpus.engine(&a.backend, s)?;
            let r = retriever(&corpus, &engine)?;
            evaluate(annotations, &r, a.k, &Method::ALL).map_err(CliError::runtime)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let csv = pool(&reports).to_csv();
    if let Some(out) = &a.out {
        write_file(out, &csv)?;
    }
    emit(&csv);
    Ok(())
}

fn run_summary(run: &SimRun) -> serde_json::Value {
    json!({
        "min_clearance": run.min_clearance,
        "reached_goal": run.reached_goal,
        "steps": run.log.len(),
        "max_speed": run.log.iter().map(|r| r.clamped).fold(0.0, f64::max),
        "swaps": run.swaps,
    })
}

pub fn navsim(a: &NavsimArgs, seed: u64) -> Result<(), CliError> {
    let scenario = match &a.scenario {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            Scenario::from_json_str(&text).map_err(|e| CliError::io(p, e))?
        }
        None => Scenario::corridor(),
    };
    let ra = &a.retrieval;
    let cfg = GovernorConfig {
        inference_period_s: a.period,
        k: ra.k,
        method: ra.method,
        fallback_vel_limit: a.fallback_limit,
    };
    cfg.validate().map_err(CliError::runtime)?;
    let corpus = load_corpus(ra.corpus.db.as_ref(), ra.corpus.annotations.as_ref())?;
    let engine = corpus.engine(&ra.backend, seed)?;
    let advisor = RetrievalAdvisor {
        retriever: retriever(&corpus, &engine)?,
        k: ra.k,
        method: ra.method,
    };
    let ungoverned = simulate(&scenario, None).map_err(CliError::runtime)?;
    let governed = simulate(&scenario, Some((&cfg, &advisor))).map_err(CliError::runtime)?;
    if let Some(dir) = &a.out {
        write_file(&dir.join("governed.csv"), &governed.to_csv())?;
        write_file(&dir.join("ungoverned.csv"), &ungoverned.to_csv())?;
    }
    print_json(&json!({
        "scenario": scenario.name,
        "backend": ra.backend.to_string(),
        "governed": run_summary(&governed),
        "ungoverned": run_summary(&ungoverned),
        "clearance_gain": governed.min_clearance - ungoverned.min_clearance,
    }));
    Ok(())
}

pub fn serve(a: &ServeArgs, seed: u64) -> Result<(), CliError> {
    let corpus = load_corpus(a.corpus.db.as_ref(), a.corpus.annotations.as_ref())?;
    let Engine { backend, index } = corpus.engine(&a.backend, seed)?;
    let snapshot = Snapshot::new(corpus.db, index, Arc::from(backend)).map_err(CliError::runtime)?;
    let router = app(Arc::new(snapshot), a.expose_encoder);
    run_until_signal(router, a.listen, |addr| {
        println!("listening on http://{addr}");
        let _ = io::stdout().flush();
    })
    .map_err(|e| CliError::usage(format!("{}: {e}", a.listen)))
}

pub fn conformance(a: &ConformanceArgs) -> Result<(), CliError> {
    let report = protocol::run(&a.url, &a.probe, Duration::from_secs(a.timeout_s));
    for c in &report.checks {
        emit(&format!("{c}\n"));
    }
    if report.all_passed() {
        Ok(())
    } else {
        Err(CliError::partial(format!(
            "{} conformance check(s) failed",
            report.failures().count()
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pooling_sums_hits_and_totals() {
        let one = |t: usize, i: usize| EvalReport {
            total: 10,
            k: 5,
            rows: Method::ALL
                .iter()
                .map(|&method| EvalRow { method, text_correct: t, image_correct: i })
                .collect(),
        };
        let p = pool(&[one(3, 4), one(5, 6)]);
        assert_eq!(p.total, 20);
        assert_eq!(p.k, 5);
        let row = p.row(Method::Mixed).unwrap();
        assert_eq!((row.text_correct, row.image_correct), (8, 10));
    }
}
