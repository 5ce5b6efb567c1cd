//! Acceptance runner: one PASS/FAIL line per criterion, with wall time
//! checked against each criterion's budget. Built without the libtest
//! harness so the lines always reach stdout.

// `ensure!(x >= y)` negates the whole condition so a NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod common;

use std::collections::BTreeMap;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{levenshtein_recursive, random_dag, random_word, rank_oracle};
use stimkb::affect::{build_equivalence_closure, Dimension, EquivalenceClosure, QualifiedTerm};
use stimkb::corpus::StimulusId;
use stimkb::eval::{
    aggregate, classify_at_threshold, confusion, f1_score, lift_curve, lift_curve_from_flags,
    metrics, run_experiment, select_threshold, ConfusionMatrix, ExperimentConfig, Scheme,
};
use stimkb::kb::{load_manifest, KnowledgeBase};
use stimkb::retrieval::{filter_query, parse_query, ranked_query, Term};
use stimkb::sequence::{
    build_sequence, emit_schedule, merge_sequences, SequenceItem, SequenceParams, StimulusSequence,
};
use stimkb::similarity::{levenshtein_rel, relatedness, Measure, MeasureParams, Operand};
use stimkb::synthetic::{generate, SyntheticConfig};
use stimkb::taxonomy::Taxonomy;

/// Ok carries an optional note for the report line.
type Check = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn fixture_kb() -> KnowledgeBase {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/manifest.kv");
    KnowledgeBase::ingest(&load_manifest(&manifest).unwrap())
        .unwrap()
        .0
}

fn fixture_suite() -> Check {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/manifest.kv");
    let (kb, summary) =
        KnowledgeBase::ingest(&load_manifest(&manifest).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    ensure!(
        summary.records == 4 && summary.invalid == 0,
        "ingest summary {summary:?}"
    );

    let rec = kb.corpus.get("IAPS/8163").map_err(|e| e.to_string())?;
    let dims = rec.dimensions.as_ref().ok_or("8163 has no dimensions")?;
    ensure!(
        dims.get(Dimension::Valence) == Some(7.14) && dims.get(Dimension::Arousal) == Some(6.53),
        "8163 ratings"
    );
    ensure!(
        rec.semantics.len() == 6 && rec.physiology.len() == 2,
        "8163 components"
    );
    ensure!(
        rec.physiology.iter().all(|p| p.path.contains("subject1")),
        "8163 physiology subject"
    );
    let r311 = kb.corpus.get("IADS/311").map_err(|e| e.to_string())?;
    ensure!(
        r311.context.as_ref().and_then(|c| c.length_seconds) == Some(6.0),
        "311 length"
    );
    for (key, v, a) in [("IAPS/5635", 6.25, 3.97), ("IAPS/7039", 5.93, 3.29)] {
        let d = kb.corpus.get(key).unwrap().dimensions.as_ref().unwrap();
        ensure!(
            d.get(Dimension::Valence) == Some(v) && d.get(Dimension::Arousal) == Some(a),
            "{key} ratings"
        );
    }

    let boxed = parse_query("valence:[6.5,9] arousal:[1,3.5] mode:filter").unwrap();
    let hits =
        filter_query(&kb.corpus, &kb.taxonomy, &kb.closure, &boxed).map_err(|e| e.to_string())?;
    ensure!(hits.is_empty(), "box query returned {hits:?}");

    let q = parse_query("concept:GroupOfPeople mode:filter").unwrap();
    let hits =
        filter_query(&kb.corpus, &kb.taxonomy, &kb.closure, &q).map_err(|e| e.to_string())?;
    let hits: Vec<String> = hits.iter().map(|k| k.to_string()).collect();
    ensure!(hits == ["IADS/311"], "GroupOfPeople returned {hits:?}");
    Ok(String::new())
}

fn concept_axioms(g: &Taxonomy) -> Check {
    let p = MeasureParams::default();
    let names = g.concepts();
    for m in Measure::ALL.into_iter().filter(|m| !m.is_lexical()) {
        for (i, &a) in names.iter().enumerate() {
            let rel =
                |x, y| relatedness(m, g, &p, Operand::Concept(x), Operand::Concept(y)).unwrap();
            ensure!(rel(a, a) == 1.0, "{m}: rel({a},{a}) != 1");
            for &b in &names[i + 1..] {
                let ab = rel(a, b);
                ensure!(ab == rel(b, a), "{m}: asymmetric on {a},{b}");
                ensure!((0.0..1.0).contains(&ab), "{m}: rel({a},{b}) = {ab}");
            }
        }
    }
    Ok(String::new())
}

fn measure_axioms() -> Check {
    let dag = random_dag(&mut ChaCha8Rng::seed_from_u64(200), 200);
    let g = Taxonomy::from_edges(dag.edge_names()).map_err(|e| e.to_string())?;
    ensure!(g.len() == 200, "taxonomy has {} concepts", g.len());
    concept_axioms(&g)?;

    let p = MeasureParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    for _ in 0..1000 {
        let a = random_word(&mut rng, b"abcdeXY", 10);
        let b = random_word(&mut rng, b"abcdexy", 10);
        for m in [Measure::Inclusion, Measure::Levenshtein] {
            let rel =
                |x, y| relatedness(m, &g, &p, Operand::Keyword(x), Operand::Keyword(y)).unwrap();
            ensure!(rel(&a, &a) == 1.0, "{m}: rel({a},{a}) != 1");
            let ab = rel(&a, &b);
            ensure!(ab == rel(&b, &a), "{m}: asymmetric on {a},{b}");
            ensure!((0.0..=1.0).contains(&ab), "{m}: out of range on {a},{b}");
            let equal = a.to_lowercase() == b.to_lowercase();
            ensure!((ab == 1.0) == equal, "{m}: rel({a},{b}) = {ab}");
        }
    }
    Ok(String::new())
}

fn oracle_equivalence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for round in 0..100 {
        let n = rng.gen_range(2..=100);
        let dag = random_dag(&mut rng, n);
        let o = dag.oracle();
        let g = Taxonomy::from_edges(dag.edge_names()).map_err(|e| e.to_string())?;
        for a in 0..n {
            let an = dag.names[a].as_str();
            let ancestors: Vec<&str> = g.ancestors(an).unwrap().into_iter().collect();
            let mut expected: Vec<&str> = o.ancestors[a]
                .iter()
                .map(|&i| dag.names[i].as_str())
                .collect();
            expected.sort();
            ensure!(ancestors == expected, "dag {round}: ancestors of {an}");
            for b in 0..n {
                let bn = dag.names[b].as_str();
                ensure!(
                    g.lcs(an, bn).unwrap() == dag.names[o.lcs(a, b)],
                    "dag {round}: lcs {an} {bn}"
                );
                ensure!(
                    g.shortest_path(an, bn).unwrap() == o.dist[a][b],
                    "dag {round}: path {an} {bn}"
                );
                ensure!(
                    g.is_subclass_of(an, bn).unwrap() == o.reaches(a, b),
                    "dag {round}: subclass {an} {bn}"
                );
            }
        }
    }

    for _ in 0..2000 {
        let a = random_word(&mut rng, b"abc", 8);
        let b = random_word(&mut rng, b"abc", 8);
        let (ca, cb): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
        let expected = 1.0 - levenshtein_recursive(&ca, &cb) as f64 / ca.len().max(cb.len()) as f64;
        ensure!(
            levenshtein_rel(&a, &b).unwrap() == expected,
            "levenshtein {a} {b}"
        );
    }

    for seed in 0..30 {
        let ws = generate(&SyntheticConfig {
            seed,
            concepts: 30,
            stimuli: 60,
            queries: 1,
            ..SyntheticConfig::default()
        });
        let concepts = ws.taxonomy.concepts();
        let keywords: Vec<&str> = ws.corpus.records().flat_map(|r| r.keywords()).collect();
        for m in Measure::ALL {
            let term = if m.is_lexical() {
                Term::Keyword(keywords[seed as usize % keywords.len()].to_string())
            } else {
                Term::Concept(concepts[seed as usize % concepts.len()].to_string())
            };
            let mut q = parse_query("concept:X").unwrap();
            q.term = Some(term.clone());
            q.measure = Some(m);
            q.limit = Some(40);
            let got = ranked_query(
                &ws.corpus,
                &ws.taxonomy,
                &EquivalenceClosure::default(),
                &MeasureParams::default(),
                &q,
            )
            .map_err(|e| e.to_string())?;
            let got: Vec<(String, f64)> = got
                .entries
                .iter()
                .map(|e| (e.stimulus.to_string(), e.score))
                .collect();
            ensure!(
                got == rank_oracle(ws.corpus.records(), &ws.taxonomy, &term, m, 40),
                "ranking seed {seed} {m}"
            );
        }
    }

    for _ in 0..500 {
        let k = rng.gen_range(1..10);
        let ms: Vec<ConfusionMatrix> = (0..k)
            .map(|_| ConfusionMatrix {
                tp: rng.gen_range(0..40),
                fp: rng.gen_range(0..40),
                fn_: rng.gen_range(0..40),
                tn: rng.gen_range(0..40),
            })
            .collect();
        let sum = ms.iter().fold(
            ConfusionMatrix {
                tp: 0,
                fp: 0,
                fn_: 0,
                tn: 0,
            },
            |acc, m| ConfusionMatrix {
                tp: acc.tp + m.tp,
                fp: acc.fp + m.fp,
                fn_: acc.fn_ + m.fn_,
                tn: acc.tn + m.tn,
            },
        );
        let (pooled, report) = aggregate(&ms).map_err(|e| e.to_string())?;
        ensure!(
            pooled == sum && report == metrics(&sum),
            "aggregate of {ms:?}"
        );
    }
    Ok(String::new())
}

fn lift_protocol() -> Check {
    let curve = lift_curve_from_flags(&[true, false, true, false]).map_err(|e| e.to_string())?;
    let lifts: Vec<f64> = curve.iter().map(|p| p.lift).collect();
    ensure!(lifts == [2.0, 1.0, 4.0 / 3.0, 1.0], "lifts {lifts:?}");
    ensure!(
        select_threshold(&curve) == Some(1),
        "threshold of [T,F,T,F]"
    );

    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let mut cases = 0;
    while cases < 500 {
        let n = rng.gen_range(1..=100);
        let rate = rng.gen_range(0.05..0.9);
        let flags: Vec<bool> = (0..n).map(|_| rng.gen_bool(rate)).collect();
        if !flags.contains(&true) {
            continue;
        }
        cases += 1;
        let ranked: Vec<StimulusId> = (0..n)
            .map(|i| StimulusId::new("T", &i.to_string()).unwrap())
            .collect();
        let judged: BTreeMap<StimulusId, bool> =
            ranked.iter().cloned().zip(flags.iter().copied()).collect();
        let t = select_threshold(&lift_curve(&ranked, &judged).unwrap()).unwrap();
        let m = confusion(&classify_at_threshold(&ranked, t).unwrap(), &judged).unwrap();
        let hits = |k: usize| flags[..k].iter().filter(|&&r| r).count() as u64;
        for k in 1..=n {
            ensure!(
                m.tp * k as u64 >= hits(k) * t as u64,
                "case {cases}: cut {k} beats threshold {t}"
            );
        }
    }
    Ok(String::new())
}

fn directional_reproduction() -> Check {
    let cfg = SyntheticConfig::default();
    ensure!(
        cfg.stimuli == 100 && cfg.concepts == 50 && cfg.queries >= 20,
        "synthetic shape {cfg:?}"
    );
    let ws = generate(&cfg);
    let config = ExperimentConfig {
        seed: 2024,
        candidates: cfg.candidates,
        ..ExperimentConfig::default()
    };
    let report = run_experiment(
        &ws.corpus,
        &ws.taxonomy,
        &ws.queries,
        &ws.judgments,
        &config,
    )
    .map_err(|e| e.to_string())?;
    let keyword = report
        .scheme_metrics(Scheme::Keyword)
        .ok_or("no keyword rows")?
        .precision;
    let concept = report
        .scheme_metrics(Scheme::Concept)
        .ok_or("no concept rows")?
        .precision;
    ensure!(
        concept - keyword >= 0.05,
        "gap {:.4} below 0.05",
        concept - keyword
    );
    Ok(format!(
        "keyword precision {keyword:.4}, concept precision {concept:.4}"
    ))
}

fn metric_identities() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..10_000 {
        let m = ConfusionMatrix {
            tp: rng.gen_range(0..30),
            fp: rng.gen_range(0..30),
            fn_: rng.gen_range(0..30),
            tn: rng.gen_range(0..30),
        };
        let r = metrics(&m);
        if m.tp + m.fn_ > 0 {
            ensure!(
                (r.recall + r.miss_rate - 1.0).abs() < 1e-12,
                "recall + miss rate on {m:?}"
            );
        }
        if m.fp + m.tn > 0 {
            ensure!(
                (r.fallout_standard + r.specificity - 1.0).abs() < 1e-12,
                "fallout + specificity on {m:?}"
            );
        }
    }
    let f1 = f1_score(0.5887, 0.3279);
    ensure!((f1 - 0.4212).abs() <= 1e-4, "F1 = {f1}");
    Ok(String::new())
}

fn equivalence_inference() -> Check {
    let kb = fixture_kb();
    let fsre = QualifiedTerm::new("FSRE", "anger");
    let occ = QualifiedTerm::new("OCC", "anger");
    ensure!(
        kb.closure.are_equivalent(&fsre, &occ),
        "FSRE.anger and OCC.anger not equivalent"
    );

    let closure = build_equivalence_closure(&kb.axioms);
    ensure!(closure == kb.closure, "closure differs from a fresh build");
    // the fixture annotates 8163 with BigSix.happiness only
    let q = parse_query("category:BigSix.happiness mode:filter").unwrap();
    let hits =
        filter_query(&kb.corpus, &kb.taxonomy, &kb.closure, &q).map_err(|e| e.to_string())?;
    ensure!(hits.len() == 1, "category filter returned {hits:?}");

    let mut corpus = stimkb::corpus::Corpus::new();
    let mut rec = stimkb::corpus::StimulusRecord::new(StimulusId::new("X", "1").unwrap());
    rec.categories
        .push(stimkb::affect::CategoryAnnotation::new("OCC", "anger"));
    corpus.add(rec).map_err(|e| e.to_string())?;
    let q = parse_query("category:FSRE.anger mode:filter").unwrap();
    let hits = filter_query(&corpus, &kb.taxonomy, &kb.closure, &q).map_err(|e| e.to_string())?;
    ensure!(
        hits.len() == 1,
        "FSRE.anger query missed the OCC.anger record"
    );
    Ok(String::new())
}

fn sequence_suite() -> Check {
    let kb = fixture_kb();
    let q = parse_query("concept:Object measure:pathlen").unwrap();
    let results = ranked_query(
        &kb.corpus,
        &kb.taxonomy,
        &kb.closure,
        &MeasureParams::default(),
        &q,
    )
    .map_err(|e| e.to_string())?;
    let params = SequenceParams {
        count: 3,
        duration_ms: 2000,
        isi_ms: 500,
        track: "main".into(),
    };
    let s = build_sequence(&results, &params).map_err(|e| e.to_string())?;
    let onsets: Vec<u64> = s.items.iter().map(|i| i.start_ms).collect();
    ensure!(onsets == [0, 2500, 5000], "onsets {onsets:?}");
    ensure!(s.total_ms == 7000, "total {}", s.total_ms);
    ensure!(emit_schedule(&s).len() == 6, "schedule length");

    let clash = StimulusSequence::from_items(vec![SequenceItem {
        stimulus: StimulusId::new("IADS", "311").unwrap(),
        track: "main".into(),
        start_ms: 1000,
        duration_ms: 6000,
    }])
    .unwrap();
    ensure!(
        merge_sequences(&s, &clash).is_err(),
        "same-track overlap accepted"
    );
    let mut audio = clash.clone();
    audio.items[0].track = "audio".into();
    let merged = merge_sequences(&s, &audio).map_err(|e| e.to_string())?;
    ensure!(merged.items.len() == 4, "cross-track merge lost items");
    Ok(String::new())
}

fn determinism() -> Check {
    let ws = generate(&SyntheticConfig::default());
    let config = ExperimentConfig {
        seed: 9,
        candidates: 60,
        ..ExperimentConfig::default()
    };
    let run = || {
        run_experiment(
            &ws.corpus,
            &ws.taxonomy,
            &ws.queries,
            &ws.judgments,
            &config,
        )
        .unwrap()
        .to_tsv()
    };
    ensure!(run() == run(), "eval report differs between runs");

    let kb = fixture_kb();
    let q = parse_query("concept:Human measure:wupalmer").unwrap();
    let query = || {
        let r = ranked_query(
            &kb.corpus,
            &kb.taxonomy,
            &kb.closure,
            &MeasureParams::default(),
            &q,
        )
        .unwrap();
        serde_json::to_string(&r).unwrap()
    };
    ensure!(query() == query(), "query output differs between runs");
    Ok(String::new())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("fixture suite", Duration::from_secs(1), fixture_suite),
        ("measure axioms", Duration::from_secs(10), measure_axioms),
        (
            "oracle equivalence",
            Duration::from_secs(60),
            oracle_equivalence,
        ),
        ("lift protocol", Duration::from_secs(60), lift_protocol),
        (
            "directional precision gap",
            Duration::from_secs(30),
            directional_reproduction,
        ),
        (
            "metric identities",
            Duration::from_secs(60),
            metric_identities,
        ),
        (
            "equivalence inference",
            Duration::from_secs(60),
            equivalence_inference,
        ),
        ("sequence suite", Duration::from_secs(60), sequence_suite),
        ("determinism", Duration::from_secs(60), determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let outcome = match panic::catch_unwind(AssertUnwindSafe(check)) {
            Ok(r) => r,
            Err(p) => Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into())),
        };
        let elapsed = start.elapsed();
        let outcome = outcome.and_then(|note| {
            if elapsed <= budget {
                Ok(note)
            } else {
                Err(format!("took {elapsed:.2?}, budget {budget:?}"))
            }
        });
        match outcome {
            Ok(note) if note.is_empty() => println!("PASS  {name} ({elapsed:.2?})"),
            Ok(note) => println!("PASS  {name} ({elapsed:.2?}): {note}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name} ({elapsed:.2?}): {why}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
