//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use skillground::descriptor::{
    canonical_offsets, classify_gait, max_foot_distance, normalize_phase,
    GaitClass, MotionDescriptor,
};
use skillground::fixture::{
    fixture_annotation_set, fixture_config, fixture_database, generate_fixture_database,
    FIXTURE_DB_JSON,
};
use skillground::gait::{contact_reward, desired_contact, foot_error, ComplianceConfig};
use skillground::genpipe::{query_count, QueryLedger};
use skillground::nav::{
    governor_step, simulate, speed, GovernorConfig, GovernorState, Inference, RetrievalAdvisor,
    Scenario,
};
use skillground::retrieval::{
    build_index, evaluate, ConstantItm, DegradedBackend, DegradedParams,
    EncoderBackend, HashBackend, Method, OracleBackend, Query, RenderConfig, RetrievalError,
    RetrievalResult, Retriever, SlotRegistry,
};
use skillground::skilldb::{default_period_bins, default_vel_bins, stats, Category, SkillDatabase, SkillRecord};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------------------

fn gait_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for g in GaitClass::CANONICAL {
        let row = canonical_offsets(g).unwrap();
        ensure(classify_gait(&row, 0.05) == g, || format!("{g} row misclassified"))?;
        for _ in 0..1000 {
            let s: f64 = rng.random();
            let shifted = row.map(|o| (o + s).rem_euclid(1.0) % 1.0);
            let got = classify_gait(&shifted, 0.05);
            ensure(got == g, || format!("{g} shifted by {s} classified as {got}"))?;
        }
    }
    let rows: Vec<[f64; 4]> = GaitClass::CANONICAL
        .iter()
        .map(|&g| normalize_phase(&canonical_offsets(g).unwrap()))
        .collect();
    let mut tested = 0;
    while tested < 1000 {
        let q: [f64; 4] = [rng.random(), rng.random(), rng.random(), rng.random()];
        let nq = normalize_phase(&q);
        if rows.iter().any(|r| max_foot_distance(&nq, r) <= 0.25) {
            continue;
        }
        tested += 1;
        let got = classify_gait(&q, 0.05);
        ensure(got == GaitClass::Others, || format!("{q:?} classified as {got}"))?;
    }
    Ok("5 rows, 5000 shifts, 1000 far quadruples".into())
}

fn compliance_fraction() -> Outcome {
    let n = 10_000;
    let mut parts = Vec::new();
    for delta in [0.0, 0.25, 0.5, 0.75] {
        let cfg = ComplianceConfig {
            delta,
            ..ComplianceConfig::default()
        };
        let free = (0..n)
            .filter(|i| {
                let phi = (*i as f64 + 0.5) / n as f64;
                let mismatched = !desired_contact(phi, cfg.stance_fraction);
                foot_error(phi, mismatched, &cfg) == 0.0
            })
            .count();
        let frac = free as f64 / n as f64;
        ensure((frac - delta).abs() <= 0.01, || format!("delta {delta}: fraction {frac}"))?;
        parts.push(format!("{delta}->{frac:.4}"));
    }
    Ok(parts.join(" "))
}

fn reward_kernel() -> Outcome {
    let at0 = contact_reward(0.0, 0.25).unwrap();
    ensure(at0 == 1.0, || format!("reward(0) = {at0}"))?;
    let at_sigma = contact_reward(0.25, 0.25).unwrap();
    ensure((at_sigma - (-1.0f64).exp()).abs() < 1e-12, || format!("reward(sigma) = {at_sigma}"))?;
    let grid: Vec<f64> = (0..1000).map(|i| contact_reward(i as f64 * 0.004, 0.25).unwrap()).collect();
    ensure(grid.windows(2).all(|w| w[1] < w[0]), || "not strictly decreasing".into())?;
    Ok(format!("r(0)=1, r(sigma)={at_sigma:.12}"))
}

// ---------------------------------------------------------------------------

fn record(i: usize, text: String) -> SkillRecord {
    SkillRecord {
        id: i as u64,
        instruction: text,
        reasoning: None,
        category: Category::Direct,
        descriptor: MotionDescriptor::new([0.0, 0.5, 0.5, 0.0], 0.5, 1.0),
    }
}

fn random_db(tag: u64, n: usize) -> SkillDatabase {
    let mut db = SkillDatabase::new();
    for i in 0..n {
        db.insert(record(i, format!("instruction {tag}-{i}"))).unwrap();
    }
    db
}

/// Brute-force reference for mixed retrieval on a text query.
fn oracle_mixed(backend: &dyn EncoderBackend, db: &SkillDatabase, query: &str, k: usize) -> u64 {
    fn unit(v: Vec<f64>) -> Vec<f64> {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / n).collect()
    }
    let q = unit(backend.embed_text(query).unwrap());
    let mut scored: Vec<(f64, u64, &str)> = db
        .records()
        .iter()
        .map(|r| {
            let e = unit(backend.embed_text(&r.instruction).unwrap());
            let cos: f64 = q.iter().zip(&e).map(|(a, b)| a * b).sum();
            (cos, r.id, r.instruction.as_str())
        })
        .collect();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let top = &scored[..k];
    let z: f64 = top.iter().map(|t| t.0.exp()).sum();
    let mut best: Option<(f64, u64)> = None;
    for &(cos, id, text) in top {
        let p1 = cos.exp() / z;
        let [neg, pos] = backend.itm_logits(skillground::retrieval::Payload::Text(query), text).unwrap();
        let p2 = 1.0 / (1.0 + (neg - pos).exp());
        let s = p1 + p2;
        best = match best {
            Some((bs, bid)) if bs > s || (bs == s && bid < id) => Some((bs, bid)),
            _ => Some((s, id)),
        };
    }
    best.unwrap().1
}

fn mixed_oracle_equivalence() -> Outcome {
    let mut mismatches = 0;
    let mut disagreements_with_topk = 0;
    for seed in 0..1000u64 {
        let backend = HashBackend::new(seed, 16);
        let db = random_db(seed, 100);
        let index = build_index(&db, &backend).map_err(|e| e.to_string())?;
        let r = Retriever::new(&db, &index, &backend).map_err(|e| e.to_string())?;
        let query = format!("query {seed}");
        let got = r.retrieve(&Query::Text(query.clone()), 5, Method::Mixed).map_err(|e| e.to_string())?;
        if got.chosen_id != oracle_mixed(&backend, &db, &query, 5) {
            mismatches += 1;
        }
        let topk = r.retrieve(&Query::Text(query), 5, Method::Topk).map_err(|e| e.to_string())?;
        if topk.chosen_id != got.chosen_id {
            disagreements_with_topk += 1;
        }
    }
    ensure(mismatches == 0, || format!("{mismatches} mismatches"))?;
    ensure(disagreements_with_topk > 0, || "stage two never changed the answer".into())?;
    Ok(format!("0/1000 mismatches; stage two changed {disagreements_with_topk} answers"))
}

fn degenerate_reductions() -> Outcome {
    for seed in 0..100u64 {
        let backend = ConstantItm::new(HashBackend::new(seed, 16));
        let db = random_db(seed, 50);
        let index = build_index(&db, &backend).map_err(|e| e.to_string())?;
        let r = Retriever::new(&db, &index, &backend).map_err(|e| e.to_string())?;
        let q = Query::Text(format!("q{seed}"));
        let ids = r.retrieve_ids(&q, 5, &[Method::Mixed, Method::Topk]).map_err(|e| e.to_string())?;
        ensure(ids[0] == ids[1], || format!("seed {seed}: mixed {} vs topk {}", ids[0], ids[1]))?;
    }
    let db = random_db(7, 1);
    let backend = HashBackend::new(7, 8);
    let index = build_index(&db, &backend).map_err(|e| e.to_string())?;
    let r = Retriever::new(&db, &index, &backend).map_err(|e| e.to_string())?;
    for m in Method::ALL {
        for q in [Query::Text("anything".into()), Query::TextAsImage("anything".into())] {
            let res = r.retrieve(&q, 1, m).map_err(|e| e.to_string())?;
            ensure(res.chosen_id == 0 && res.p1 == vec![1.0], || format!("{m}: {res:?}"))?;
        }
    }
    Ok("constant ITM: mixed == topk on 100 instances; K=N=1 ok for all methods".into())
}

fn evaluation_ordering() -> Outcome {
    let db = fixture_database();
    let ann = fixture_annotation_set();
    let render = RenderConfig::default();
    let reg = SlotRegistry::from_database(
        &db,
        ann.entries.iter().map(|a| (a.query.as_str(), a.expected_id)),
        &render,
    );
    let oracle = OracleBackend::new(reg.clone(), 0);
    let index = build_index(&db, &oracle).map_err(|e| e.to_string())?;
    let r = Retriever::new(&db, &index, &oracle).map_err(|e| e.to_string())?;
    let rep = evaluate(&ann, &r, 5, &Method::ALL).map_err(|e| e.to_string())?;
    ensure(rep.total == 100, || format!("{} annotations", rep.total))?;
    for row in &rep.rows {
        ensure(row.text_correct == 100 && row.image_correct == 100, || format!("oracle: {row:?}"))?;
    }

    let seeds = 50;
    let mut text = [0.0; 4];
    let mut image = [0.0; 4];
    let mut stage1_top1 = 0.0;
    for seed in 0..seeds {
        let b = DegradedBackend::new(reg.clone(), DegradedParams { seed, ..DegradedParams::default() });
        let index = build_index(&db, &b).map_err(|e| e.to_string())?;
        let r = Retriever::new(&db, &index, &b).map_err(|e| e.to_string())?;
        let rep = evaluate(&ann, &r, 5, &Method::ALL).map_err(|e| e.to_string())?;
        for (i, m) in Method::ALL.iter().enumerate() {
            text[i] += rep.text_accuracy(*m).unwrap() / seeds as f64;
            image[i] += rep.image_accuracy(*m).unwrap() / seeds as f64;
        }
        stage1_top1 += rep.text_accuracy(Method::Cosine).unwrap() / seeds as f64;
    }
    for (name, acc) in [("text", text), ("text_as_image", image)] {
        ensure(acc.windows(2).all(|w| w[0] <= w[1]), || format!("{name} ordering broken: {acc:?}"))?;
    }
    ensure((0.35..=0.65).contains(&stage1_top1), || format!("stage one accuracy {stage1_top1}"))?;
    let fmt = |a: [f64; 4]| a.map(|x| format!("{:.3}", x)).join("/");
    Ok(format!(
        "oracle 100/100 everywhere; degraded x{seeds}: text {} image {}",
        fmt(text),
        fmt(image)
    ))
}

fn pipeline_reproducibility() -> Outcome {
    let ledger = QueryLedger::new();
    let a = generate_fixture_database(300, &fixture_config(), &ledger).map_err(|e| e.to_string())?;
    let b = generate_fixture_database(300, &fixture_config(), &QueryLedger::new()).map_err(|e| e.to_string())?;
    ensure(a.is_complete() && a.db.len() == 300, || "incomplete generation".into())?;
    let (ja, jb) = (a.db.to_json_string(), b.db.to_json_string());
    ensure(ja == jb, || "two runs differ".into())?;
    ensure(ja == FIXTURE_DB_JSON, || "differs from bundled fixture".into())?;
    ensure(query_count(300, 25) == 12 && query_count(300, 1) == 300, || "query_count".into())?;
    let snap = ledger.snapshot();
    ensure(snap.descriptor_calls == 12, || format!("{} descriptor calls", snap.descriptor_calls))?;
    let s = stats(&a.db, &default_period_bins(), &default_vel_bins()).map_err(|e| e.to_string())?;
    let sums = [
        s.gait_dist.values().sum::<f64>(),
        s.period_hist.probabilities.iter().sum(),
        s.vel_hist.probabilities.iter().sum(),
    ];
    ensure(sums.iter().all(|x| (x - 1.0).abs() <= 1e-9), || format!("sums {sums:?}"))?;
    Ok(format!("byte-identical; 12 vs 300 calls; sums {sums:?}"))
}

fn governor_safety() -> Outcome {
    let cfg = GovernorConfig::default();
    let mut st = GovernorState::new(&cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let base = {
        let db = fixture_database();
        db.records()[0].clone()
    };
    let mut t = 0.0;
    let mut swaps: Vec<f64> = Vec::new();
    let obs = Query::Text("obs".into());
    for _ in 0..100_000 {
        t += rng.random_range(0.0..0.2);
        let limit: f64 = rng.random_range(0.05..5.0);
        let fail = rng.random_bool(0.2);
        let mut desc = base.descriptor;
        desc.vel_limit = limit;
        let adv = |_: &Query| -> Result<RetrievalResult, RetrievalError> {
            if fail {
                return Err(RetrievalError::EmptyQuery);
            }
            Ok(RetrievalResult {
                chosen_id: 0,
                instruction: base.instruction.clone(),
                descriptor: desc,
                method: Method::Mixed,
                query_kind: "text".into(),
                candidates: vec![0],
                similarities: vec![1.0],
                p1: vec![1.0],
                p2: vec![],
                combined: vec![1.0],
            })
        };
        let cmd = [rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0)];
        let observation = rng.random_bool(0.5).then_some(&obs);
        let out = governor_step(&mut st, &cfg, &adv, t, observation, cmd);
        ensure(speed(out.cmd) <= st.active_limit, || {
            format!("t={t}: speed {} > limit {}", speed(out.cmd), st.active_limit)
        })?;
        if out.inference == Inference::Swapped {
            swaps.push(t);
        }
    }
    ensure(swaps.windows(2).all(|w| w[1] - w[0] >= 5.0), || "limit swaps closer than 5 s".into())?;

    let db = fixture_database();
    let render = RenderConfig::default();
    let backend = OracleBackend::new(SlotRegistry::from_database(&db, [], &render), 0);
    let index = build_index(&db, &backend).map_err(|e| e.to_string())?;
    let retriever = Retriever::new(&db, &index, &backend).map_err(|e| e.to_string())?;
    let advisor = RetrievalAdvisor {
        retriever,
        k: cfg.k,
        method: cfg.method,
    };
    let scenario = Scenario::corridor();
    let with = simulate(&scenario, Some((&cfg, &advisor))).map_err(|e| e.to_string())?;
    let without = simulate(&scenario, None).map_err(|e| e.to_string())?;
    ensure(with.min_clearance >= without.min_clearance, || {
        format!("clearance with {} < without {}", with.min_clearance, without.min_clearance)
    })?;
    Ok(format!(
        "1e5 steps, {} swaps; corridor clearance {:.3} (governed) vs {:.3}",
        swaps.len(),
        with.min_clearance,
        without.min_clearance
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("gait classification round trip", gait_round_trip, Some(Duration::from_secs(1))),
        ("compliance fraction", compliance_fraction, Some(Duration::from_secs(1))),
        ("reward kernel", reward_kernel, None),
        ("mixed-precision oracle equivalence", mixed_oracle_equivalence, Some(Duration::from_secs(30))),
        ("degenerate reductions", degenerate_reductions, None),
        ("evaluation-harness ordering", evaluation_ordering, None),
        ("database pipeline reproducibility", pipeline_reproducibility, None),
        ("governor safety", governor_safety, Some(Duration::from_secs(10))),
    ];
    let mut failed = 0;
    for (name, run, budget) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let outcome = match (outcome, budget) {
            (Ok(_), Some(b)) if elapsed > b => Err(format!("took {elapsed:?}, budget {b:?}")),
            (o, _) => o,
        };
        match outcome {
            Ok(detail) => println!("PASS  {name} ({} ms): {detail}", elapsed.as_millis()),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name} ({} ms): {why}", elapsed.as_millis());
            }
        }
    }
    println!("{} of 8 acceptance criteria passed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
