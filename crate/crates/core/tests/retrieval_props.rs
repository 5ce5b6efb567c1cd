mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use stimkb::affect::{build_equivalence_closure, Dimension, EquivalenceClosure};
use stimkb::corpus::{Corpus, StimulusId};
use stimkb::retrieval::{filter_query, parse_query, ranked_query, Mode, Query, Term};
use stimkb::similarity::{Measure, MeasureParams};
use stimkb::synthetic::{generate, SyntheticConfig, SyntheticWorkspace};
use stimkb::taxonomy::fold_keyword;

fn workspace(seed: u64, concepts: usize, stimuli: usize) -> SyntheticWorkspace {
    generate(&SyntheticConfig {
        seed,
        concepts,
        stimuli,
        queries: 1,
        ..SyntheticConfig::default()
    })
}

fn in_box(corpus: &Corpus, key: &StimulusId, q: &Query) -> bool {
    let rec = corpus.get(key.as_str()).unwrap();
    q.boxes.iter().all(|(&dim, &(lo, hi))| {
        rec.dimensions
            .as_ref()
            .and_then(|d| d.get(dim))
            .is_some_and(|v| lo <= v && v <= hi)
    })
}

fn rank_oracle(ws: &SyntheticWorkspace, q: &Query, measure: Measure) -> Vec<(String, f64)> {
    let records = ws
        .corpus
        .records()
        .filter(|r| in_box(&ws.corpus, &r.key, q));
    common::rank_oracle(
        records,
        &ws.taxonomy,
        q.term.as_ref().unwrap(),
        measure,
        q.limit.unwrap(),
    )
}

prop_compose! {
    fn query_case()(seed in any::<u64>(), pick in any::<prop::sample::Index>(),
                    m in 0usize..6, lo in 1.0f64..9.0, width in 0.0f64..9.0,
                    boxed in any::<bool>(), limit in 1usize..60)
        -> (SyntheticWorkspace, Query, Measure)
    {
        let ws = workspace(seed, 30, 50);
        let measure = Measure::ALL[m];
        let term = if measure.is_lexical() {
            let keywords: Vec<&str> = ws.corpus.records().flat_map(|r| r.keywords()).collect();
            Term::Keyword(pick.get(&keywords).to_string())
        } else {
            Term::Concept(pick.get(&ws.taxonomy.concepts()).to_string())
        };
        let mut q = Query { term: Some(term), measure: Some(measure), limit: Some(limit), ..Query::default() };
        if boxed {
            q.boxes.insert(Dimension::Valence, (lo, lo + width));
        }
        (ws, q, measure)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn ranked_query_matches_score_all_then_sort((ws, q, measure) in query_case()) {
        let closure = EquivalenceClosure::default();
        let got = ranked_query(&ws.corpus, &ws.taxonomy, &closure, &MeasureParams::default(), &q).unwrap();
        let got: Vec<(String, f64)> = got.entries.iter().map(|e| (e.stimulus.to_string(), e.score)).collect();
        prop_assert_eq!(got, rank_oracle(&ws, &q, measure));
    }

    #[test]
    fn filter_matches_brute_force((ws, mut q, _) in query_case()) {
        q.mode = Mode::Filter;
        q.measure = None;
        q.limit = None;
        let got = filter_query(&ws.corpus, &ws.taxonomy, &EquivalenceClosure::default(), &q).unwrap();
        let mut expected = BTreeSet::new();
        for rec in ws.corpus.records() {
            let term_ok = match q.term.as_ref().unwrap() {
                Term::Concept(c) => rec.concepts().any(|x| {
                    x == c || ws.taxonomy.ancestors(x).unwrap().contains(c.as_str())
                }),
                Term::Keyword(k) => rec.keywords().any(|x| fold_keyword(x) == fold_keyword(k)),
            };
            if term_ok && in_box(&ws.corpus, &rec.key, &q) {
                expected.insert(rec.key.clone());
            }
        }
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn query_text_round_trip((_, q, _) in query_case(), filter in any::<bool>()) {
        let mut q = q;
        if filter {
            q.mode = Mode::Filter;
            q.measure = None;
        }
        let back = parse_query(&q.to_string()).unwrap();
        prop_assert_eq!(back, q);
    }
}

#[test]
fn category_filter_crosses_equivalent_vocabularies() {
    use stimkb::affect::{CategoryAnnotation, QualifiedTerm};
    use stimkb::corpus::StimulusRecord;
    use stimkb::taxonomy::parse_taxonomy;

    let g = parse_taxonomy("Thing\n").unwrap();
    let mut corpus = Corpus::new();
    for (id, vocab) in [("1", "OCC"), ("2", "FSRE"), ("3", "BigSix")] {
        let mut rec = StimulusRecord::new(StimulusId::new("X", id).unwrap());
        rec.categories.push(CategoryAnnotation::new(vocab, "anger"));
        corpus.add(rec).unwrap();
    }
    let mut rec = StimulusRecord::new(StimulusId::new("X", "4").unwrap());
    rec.categories.push(CategoryAnnotation::new("OCC", "fear"));
    corpus.add(rec).unwrap();

    let axioms = vec![
        (
            QualifiedTerm::new("BigSix", "anger"),
            QualifiedTerm::new("OCC", "anger"),
        ),
        (
            QualifiedTerm::new("BigSix", "anger"),
            QualifiedTerm::new("FSRE", "anger"),
        ),
    ];
    let closure = build_equivalence_closure(&axioms);
    let q = parse_query("category:FSRE.anger mode:filter").unwrap();
    let hits: Vec<String> = filter_query(&corpus, &g, &closure, &q)
        .unwrap()
        .iter()
        .map(|k| k.to_string())
        .collect();
    assert_eq!(hits, ["X/1", "X/2", "X/3"]);

    let none = filter_query(&corpus, &g, &EquivalenceClosure::default(), &q).unwrap();
    assert_eq!(none.len(), 1);
}
