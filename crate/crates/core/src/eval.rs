//! Ranked-retrieval evaluation: per-query lift-curve thresholding,
//! confusion matrices and micro-averaged metrics per (annotation scheme,
//! measure).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::corpus::{Corpus, StimulusId};
use crate::retrieval::{rank_records, Term};
use crate::similarity::{Measure, MeasureParams, SimilarityError};
use crate::taxonomy::Taxonomy;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("no relevant items among {0} ranked entries")]
    NoRelevant(usize),
    #[error("stimulus {0} has no relevance judgment")]
    Unjudged(StimulusId),
    #[error("threshold {t} outside 1..={n}")]
    ThresholdOutOfRange { t: usize, n: usize },
    #[error("empty ranking")]
    EmptyRanking,
    #[error("nothing to aggregate")]
    NothingToAggregate,
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
}

/// Binary relevance per query id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RelevanceJudgments {
    by_query: BTreeMap<String, BTreeMap<StimulusId, bool>>,
}

impl RelevanceJudgments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, query: &str, stimulus: StimulusId, relevant: bool) {
        self.by_query
            .entry(query.to_string())
            .or_default()
            .insert(stimulus, relevant);
    }

    pub fn for_query(&self, query: &str) -> Option<&BTreeMap<StimulusId, bool>> {
        self.by_query.get(query)
    }

    pub fn queries(&self) -> impl Iterator<Item = &str> {
        self.by_query.keys().map(String::as_str)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (q, judged) in &self.by_query {
            for (s, &r) in judged {
                out.push_str(&format!("{q}\t{s}\t{}\n", u8::from(r)));
            }
        }
        out
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() || line.starts_with('#') {
            None
        } else {
            Some((i + 1, line))
        }
    })
}

/// Reads `query-id<TAB>stimulus-id<TAB>0|1` lines.
pub fn parse_judgments(text: &str) -> Result<RelevanceJudgments, EvalError> {
    let mut out = RelevanceJudgments::new();
    for (line, raw) in content_lines(text) {
        let bad = |reason: String| EvalError::Malformed { line, reason };
        let fields: Vec<&str> = raw.split('\t').collect();
        let [query, stimulus, flag] = fields.as_slice() else {
            return Err(bad("expected `query<TAB>stimulus<TAB>0|1`".into()));
        };
        let relevant = match flag.trim() {
            "0" => false,
            "1" => true,
            other => return Err(bad(format!("relevance `{other}` is not 0 or 1"))),
        };
        if query.is_empty() {
            return Err(bad("empty query id".into()));
        }
        out.insert(query, stimulus.parse().map_err(bad)?, relevant);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LiftPoint {
    pub rank: usize,
    pub lift: f64,
}

/// `lift(r) = precision@r / base rate` for every rank of the list.
pub fn lift_curve(
    ranked: &[StimulusId],
    judged: &BTreeMap<StimulusId, bool>,
) -> Result<Vec<LiftPoint>, EvalError> {
    let relevance = ranked
        .iter()
        .map(|s| {
            judged
                .get(s)
                .copied()
                .ok_or_else(|| EvalError::Unjudged(s.clone()))
        })
        .collect::<Result<Vec<bool>, _>>()?;
    lift_curve_from_flags(&relevance)
}

/// Lift curve of a relevance pattern given in rank order.
pub fn lift_curve_from_flags(relevance: &[bool]) -> Result<Vec<LiftPoint>, EvalError> {
    let n = relevance.len();
    let total = relevance.iter().filter(|&&r| r).count();
    if total == 0 {
        return Err(EvalError::NoRelevant(n));
    }
    let mut hits = 0usize;
    Ok(relevance
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            hits += usize::from(r);
            let rank = i + 1;
            // (hits / rank) / (total / n), evaluated as one rounded division
            let lift = (hits * n) as f64 / (rank * total) as f64;
            LiftPoint { rank, lift }
        })
        .collect())
}

/// Rank with the highest lift; the smallest such rank on ties.
pub fn select_threshold(curve: &[LiftPoint]) -> Option<usize> {
    let mut best: Option<LiftPoint> = None;
    for &p in curve {
        if best.is_none_or(|b| p.lift > b.lift) {
            best = Some(p);
        }
    }
    best.map(|p| p.rank)
}

/// Labels the first `t` entries relevant and the rest not.
pub fn classify_at_threshold(
    ranked: &[StimulusId],
    t: usize,
) -> Result<Vec<(StimulusId, bool)>, EvalError> {
    if t == 0 || t > ranked.len() {
        return Err(EvalError::ThresholdOutOfRange { t, n: ranked.len() });
    }
    Ok(ranked
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i < t))
        .collect())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn metrics(&self) -> Metrics {
        metrics(self)
    }
}

impl std::ops::Add for ConfusionMatrix {
    type Output = ConfusionMatrix;

    fn add(self, o: ConfusionMatrix) -> ConfusionMatrix {
        ConfusionMatrix {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            tn: self.tn + o.tn,
        }
    }
}

/// Compares predicted labels with judgments.
pub fn confusion(
    labels: &[(StimulusId, bool)],
    judged: &BTreeMap<StimulusId, bool>,
) -> Result<ConfusionMatrix, EvalError> {
    let mut m = ConfusionMatrix::default();
    for (s, predicted) in labels {
        let actual = *judged
            .get(s)
            .ok_or_else(|| EvalError::Unjudged(s.clone()))?;
        match (predicted, actual) {
            (true, true) => m.tp += 1,
            (true, false) => m.fp += 1,
            (false, true) => m.fn_ += 1,
            (false, false) => m.tn += 1,
        }
    }
    Ok(m)
}

/// Confusion-matrix statistics. A ratio whose denominator is zero is
/// reported as 0; `precision_defined` flags that case for precision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    /// fp / (fp + tn)
    pub fallout_standard: f64,
    /// fn / (fn + tp)
    pub miss_rate: f64,
    pub specificity: f64,
    pub f1: f64,
    pub precision_defined: bool,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn metrics(m: &ConfusionMatrix) -> Metrics {
    let precision = ratio(m.tp, m.tp + m.fp);
    let recall = ratio(m.tp, m.tp + m.fn_);
    Metrics {
        accuracy: ratio(m.tp + m.tn, m.total()),
        precision,
        recall,
        fallout_standard: ratio(m.fp, m.fp + m.tn),
        miss_rate: ratio(m.fn_, m.fn_ + m.tp),
        specificity: ratio(m.tn, m.fp + m.tn),
        f1: f1_score(precision, recall),
        precision_defined: m.tp + m.fp > 0,
    }
}

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// Micro-average: metrics of the element-wise sum.
pub fn aggregate(matrices: &[ConfusionMatrix]) -> Result<(ConfusionMatrix, Metrics), EvalError> {
    if matrices.is_empty() {
        return Err(EvalError::NothingToAggregate);
    }
    let sum = matrices
        .iter()
        .copied()
        .fold(ConfusionMatrix::default(), |a, b| a + b);
    Ok((sum, metrics(&sum)))
}

/// Lift-threshold classification of one ranked list followed by its
/// confusion matrix.
pub fn evaluate_ranking(
    ranked: &[StimulusId],
    judged: &BTreeMap<StimulusId, bool>,
) -> Result<(usize, ConfusionMatrix), EvalError> {
    if ranked.is_empty() {
        return Err(EvalError::EmptyRanking);
    }
    let curve = lift_curve(ranked, judged)?;
    let t = select_threshold(&curve).expect("curve is non-empty");
    let labels = classify_at_threshold(ranked, t)?;
    Ok((t, confusion(&labels, judged)?))
}

/// Annotation scheme a measure reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Scheme {
    #[serde(rename = "keywords")]
    Keyword,
    #[serde(rename = "ontology")]
    Concept,
}

impl Scheme {
    pub fn of(measure: Measure) -> Scheme {
        if measure.is_lexical() {
            Scheme::Keyword
        } else {
            Scheme::Concept
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Keyword => "keywords",
            Scheme::Concept => "ontology",
        })
    }
}

/// One retrieval task: the same information need phrased as a keyword and
/// as a concept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalQuery {
    pub id: String,
    pub keyword: Option<String>,
    pub concept: Option<String>,
}

impl EvalQuery {
    pub fn term(&self, scheme: Scheme) -> Option<Term> {
        match scheme {
            Scheme::Keyword => self.keyword.clone().map(Term::Keyword),
            Scheme::Concept => self.concept.clone().map(Term::Concept),
        }
    }
}

/// Reads `query-id<TAB>keyword<TAB>concept` lines; `-` marks a missing term.
pub fn parse_eval_queries(text: &str) -> Result<Vec<EvalQuery>, EvalError> {
    let mut out: Vec<EvalQuery> = Vec::new();
    let mut ids = BTreeSet::new();
    for (line, raw) in content_lines(text) {
        let bad = |reason: String| EvalError::Malformed { line, reason };
        let fields: Vec<&str> = raw.split('\t').map(str::trim).collect();
        let [id, keyword, concept] = fields.as_slice() else {
            return Err(bad("expected `query<TAB>keyword<TAB>concept`".into()));
        };
        if id.is_empty() || !ids.insert(id.to_string()) {
            return Err(bad(format!("empty or repeated query id `{id}`")));
        }
        let opt = |s: &str| (!s.is_empty() && s != "-").then(|| s.to_string());
        out.push(EvalQuery {
            id: id.to_string(),
            keyword: opt(keyword),
            concept: opt(concept),
        });
    }
    Ok(out)
}

pub fn eval_queries_to_text(queries: &[EvalQuery]) -> String {
    queries
        .iter()
        .map(|q| {
            format!(
                "{}\t{}\t{}\n",
                q.id,
                q.keyword.as_deref().unwrap_or("-"),
                q.concept.as_deref().unwrap_or("-")
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Candidates sampled per query (all judged stimuli when fewer).
    pub candidates: usize,
    /// Extra samples drawn when a sample holds no relevant stimulus.
    pub max_retries: usize,
    pub measures: Vec<Measure>,
    pub params: MeasureParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            candidates: 100,
            max_retries: 10,
            measures: vec![
                Measure::Inclusion,
                Measure::Levenshtein,
                Measure::PathLength,
                Measure::WuPalmer,
            ],
            params: MeasureParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub scheme: Scheme,
    pub measure: Measure,
    pub queries: usize,
    pub matrix: ConfusionMatrix,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
    pub notes: Vec<String>,
}

pub const REPORT_COLUMNS: [&str; 15] = [
    "scheme",
    "measure",
    "queries",
    "accuracy",
    "precision",
    "recall",
    "fall_out",
    "f_measure",
    "fallout_standard",
    "miss_rate",
    "f1_standard",
    "tp",
    "fp",
    "fn",
    "tn",
];

impl ExperimentReport {
    pub fn row(&self, measure: Measure) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.measure == measure)
    }

    /// Micro-averaged metrics over every row of one scheme.
    pub fn scheme_metrics(&self, scheme: Scheme) -> Option<Metrics> {
        let matrices: Vec<ConfusionMatrix> = self
            .rows
            .iter()
            .filter(|r| r.scheme == scheme)
            .map(|r| r.matrix)
            .collect();
        aggregate(&matrices).ok().map(|(_, m)| m)
    }

    /// Tab-separated table. `fall_out` follows the published table's
    /// convention (1 - recall) and `f_measure` is the standard F1; the
    /// unambiguous definitions follow in their own columns.
    pub fn to_tsv(&self) -> String {
        let mut out = REPORT_COLUMNS.join("\t");
        out.push('\n');
        for r in &self.rows {
            let m = &r.metrics;
            let cells = [
                r.scheme.to_string(),
                r.measure.to_string(),
                r.queries.to_string(),
                format!("{:.4}", m.accuracy),
                format!("{:.4}", m.precision),
                format!("{:.4}", m.recall),
                format!("{:.4}", m.miss_rate),
                format!("{:.4}", m.f1),
                format!("{:.4}", m.fallout_standard),
                format!("{:.4}", m.miss_rate),
                format!("{:.4}", m.f1),
                r.matrix.tp.to_string(),
                r.matrix.fp.to_string(),
                r.matrix.fn_.to_string(),
                r.matrix.tn.to_string(),
            ];
            out.push_str(&cells.join("\t"));
            out.push('\n');
        }
        out
    }
}

fn query_rng(seed: u64, index: usize) -> ChaCha8Rng {
    // distinct, reproducible stream per query
    ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Runs every query under every measure on a sampled candidate set and
/// micro-aggregates the confusion matrices per (scheme, measure). One
/// candidate sample per query is shared by all measures.
pub fn run_experiment(
    corpus: &Corpus,
    g: &Taxonomy,
    queries: &[EvalQuery],
    judgments: &RelevanceJudgments,
    config: &ExperimentConfig,
) -> Result<ExperimentReport, EvalError> {
    let mut report = ExperimentReport::default();
    let mut per_measure: BTreeMap<Measure, Vec<ConfusionMatrix>> = BTreeMap::new();

    for (qi, query) in queries.iter().enumerate() {
        let Some(judged) = judgments.for_query(&query.id) else {
            report
                .notes
                .push(format!("query {}: no judgments, skipped", query.id));
            continue;
        };
        let pool: Vec<&StimulusId> = judged
            .keys()
            .filter(|s| corpus.get(s.as_str()).is_ok())
            .collect();
        if pool.is_empty() {
            report.notes.push(format!(
                "query {}: no judged stimulus in corpus, skipped",
                query.id
            ));
            continue;
        }
        let size = config.candidates.min(pool.len());
        let mut rng = query_rng(config.seed, qi);
        let mut chosen = None;
        for _ in 0..=config.max_retries {
            let mut sampled: Vec<&StimulusId> = sample(&mut rng, pool.len(), size)
                .into_iter()
                .map(|i| pool[i])
                .collect();
            sampled.sort();
            if sampled.iter().any(|s| judged[*s]) {
                chosen = Some(sampled);
                break;
            }
        }
        let Some(candidates) = chosen else {
            report.notes.push(format!(
                "query {}: no relevant candidate after {} samples, skipped",
                query.id,
                config.max_retries + 1
            ));
            continue;
        };
        let records: Vec<_> = candidates
            .iter()
            .map(|s| corpus.get(s.as_str()).expect("pool holds corpus stimuli"))
            .collect();

        for &measure in &config.measures {
            let scheme = Scheme::of(measure);
            let Some(term) = query.term(scheme) else {
                report.notes.push(format!(
                    "query {}: no {scheme} term for {measure}",
                    query.id
                ));
                continue;
            };
            let ranked = rank_records(records.iter().copied(), g, &config.params, measure, &term)?;
            let ids: Vec<StimulusId> = ranked.into_iter().map(|e| e.stimulus).collect();
            let (_, matrix) = evaluate_ranking(&ids, judged)?;
            per_measure.entry(measure).or_default().push(matrix);
        }
    }

    for &measure in &config.measures {
        let Some(matrices) = per_measure.get(&measure) else {
            continue;
        };
        let (matrix, metrics) = aggregate(matrices)?;
        report.rows.push(ReportRow {
            scheme: Scheme::of(measure),
            measure,
            queries: matrices.len(),
            matrix,
            metrics,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<StimulusId> {
        (0..n)
            .map(|i| format!("T/{i:03}").parse().unwrap())
            .collect()
    }

    fn judged(pattern: &[bool]) -> BTreeMap<StimulusId, bool> {
        ids(pattern.len())
            .into_iter()
            .zip(pattern.iter().copied())
            .collect()
    }

    #[test]
    fn lift_examples() {
        let pattern = [true, false, true, false];
        let curve = lift_curve(&ids(4), &judged(&pattern)).unwrap();
        let lifts: Vec<f64> = curve.iter().map(|p| p.lift).collect();
        assert_eq!(lifts, [2.0, 1.0, 4.0 / 3.0, 1.0]);
        assert_eq!(select_threshold(&curve), Some(1));

        let all = lift_curve_from_flags(&[true; 7]).unwrap();
        assert!(all.iter().all(|p| p.lift == 1.0));
        assert_eq!(select_threshold(&all), Some(1));

        let mut single = vec![false; 100];
        single[0] = true;
        assert_eq!(lift_curve_from_flags(&single).unwrap()[0].lift, 100.0);
    }

    #[test]
    fn lift_requires_relevance() {
        assert_eq!(
            lift_curve_from_flags(&[false, false]),
            Err(EvalError::NoRelevant(2))
        );
        let mut j = judged(&[true]);
        j.clear();
        assert!(matches!(
            lift_curve(&ids(1), &j),
            Err(EvalError::Unjudged(_))
        ));
        assert_eq!(select_threshold(&[]), None);
    }

    #[test]
    fn classification() {
        let list = ids(100);
        let labels = classify_at_threshold(&list, 5).unwrap();
        assert_eq!(labels.iter().filter(|(_, l)| *l).count(), 5);
        assert!(labels[..5].iter().all(|(_, l)| *l));
        assert!(classify_at_threshold(&list, 100)
            .unwrap()
            .iter()
            .all(|(_, l)| *l));
        let first = classify_at_threshold(&list, 1).unwrap();
        assert!(first[0].1 && !first[1].1);
        assert_eq!(
            classify_at_threshold(&list, 0),
            Err(EvalError::ThresholdOutOfRange { t: 0, n: 100 })
        );
        assert!(classify_at_threshold(&list, 101).is_err());
    }

    #[test]
    fn metric_arithmetic() {
        let m = ConfusionMatrix {
            tp: 5,
            fp: 1,
            fn_: 10,
            tn: 84,
        };
        let x = metrics(&m);
        assert!((x.precision - 5.0 / 6.0).abs() < 1e-12);
        assert!((x.recall - 1.0 / 3.0).abs() < 1e-12);
        assert!((x.accuracy - 0.89).abs() < 1e-12);
        assert!((x.fallout_standard - 1.0 / 85.0).abs() < 1e-12);
        assert!((x.miss_rate - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_classifier() {
        let x = metrics(&ConfusionMatrix {
            tp: 7,
            fp: 0,
            fn_: 0,
            tn: 3,
        });
        assert_eq!(
            (
                x.accuracy,
                x.precision,
                x.recall,
                x.f1,
                x.fallout_standard,
                x.miss_rate
            ),
            (1.0, 1.0, 1.0, 1.0, 0.0, 0.0)
        );
    }

    #[test]
    fn zero_denominators_are_flagged() {
        let x = metrics(&ConfusionMatrix {
            tp: 0,
            fp: 0,
            fn_: 3,
            tn: 2,
        });
        assert_eq!(x.precision, 0.0);
        assert!(!x.precision_defined);
        assert_eq!(x.f1, 0.0);
        let x = metrics(&ConfusionMatrix::default());
        assert_eq!((x.accuracy, x.recall, x.fallout_standard), (0.0, 0.0, 0.0));
    }

    #[test]
    fn aggregation() {
        let m = ConfusionMatrix {
            tp: 3,
            fp: 2,
            fn_: 1,
            tn: 4,
        };
        assert_eq!(aggregate(&[m]).unwrap().1, metrics(&m));
        assert_eq!(aggregate(&[m, m]).unwrap().1, metrics(&m));
        assert_eq!(aggregate(&[]), Err(EvalError::NothingToAggregate));
    }

    #[test]
    fn judgments_file() {
        let j = parse_judgments("q1\tIAPS/1\t1\nq1\tIAPS/2\t0\n").unwrap();
        assert_eq!(j.for_query("q1").unwrap().len(), 2);
        assert_eq!(parse_judgments(&j.to_text()).unwrap(), j);
        assert!(matches!(
            parse_judgments("q1\tIAPS/1\tyes\n"),
            Err(EvalError::Malformed { line: 1, .. })
        ));
        assert!(parse_judgments("q1\tIAPS1\t1\n").is_err());
    }

    #[test]
    fn queries_file() {
        let q = parse_eval_queries("q1\tman\tMan\nq2\t-\tGroupOfPeople\n").unwrap();
        assert_eq!(q[1].keyword, None);
        assert_eq!(
            q[1].term(Scheme::Concept),
            Some(Term::Concept("GroupOfPeople".into()))
        );
        assert_eq!(parse_eval_queries(&eval_queries_to_text(&q)).unwrap(), q);
        assert!(parse_eval_queries("q1\tman\tMan\nq1\tx\tY\n").is_err());
    }
}
