//! Query language, subsumption filtering and ranked retrieval.
//!
//! A query is one line of whitespace-separated clauses:
//!
//! ```text
//! concept:<Ident> | keyword:"<text>" | valence:[lo,hi] | arousal:[lo,hi]
//! dominance:[lo,hi] | category:<vocab>.<term> | db:<Ident>
//! measure:<name> | mode:filter|rank | limit:<int>
//! ```
//!
//! All clauses are combined with AND. A keyword may be unquoted when it
//! contains no whitespace.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::affect::{Dimension, EquivalenceClosure, QualifiedTerm};
use crate::corpus::{Corpus, StimulusId, StimulusRecord};
use crate::similarity::{relatedness, Measure, MeasureParams, Operand, SimilarityError};
use crate::taxonomy::{fold_keyword, is_valid_concept_name, Taxonomy, TaxonomyError};

/// Result list size used when a rank query gives no `limit`.
pub const DEFAULT_LIMIT: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term {
    Concept(String),
    Keyword(String),
}

impl Term {
    pub fn operand(&self) -> Operand<'_> {
        match self {
            Term::Concept(c) => Operand::Concept(c),
            Term::Keyword(k) => Operand::Keyword(k),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Filter,
    Rank,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub term: Option<Term>,
    pub boxes: BTreeMap<Dimension, (f64, f64)>,
    pub category: Option<QualifiedTerm>,
    pub db: Option<String>,
    pub measure: Option<Measure>,
    pub mode: Mode,
    pub limit: Option<usize>,
}

impl Default for Query {
    fn default() -> Self {
        Query {
            term: None,
            boxes: BTreeMap::new(),
            category: None,
            db: None,
            measure: None,
            mode: Mode::Rank,
            limit: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QueryErrorKind {
    #[error("expected `name:value`")]
    Syntax,
    #[error("unknown clause `{0}`")]
    UnknownClause(String),
    #[error("clause `{0}` given twice")]
    DuplicateClause(String),
    #[error("at most one of concept/keyword may be given")]
    TwoTerms,
    #[error("expected interval `[lo,hi]`")]
    BadInterval,
    #[error("inverted interval [{0}, {1}]")]
    InvertedInterval(f64, f64),
    #[error("invalid {0} `{1}`")]
    BadValue(&'static str, String),
    #[error("unterminated quoted keyword")]
    UnterminatedQuote,
    #[error("filter mode needs a concept, keyword, category or dimension clause")]
    EmptyFilter,
    #[error("rank mode needs a concept or keyword term")]
    MissingTerm,
}

/// Parse error located at a character column (0-based) of the query text.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("column {}: {kind}", .position + 1)]
pub struct QueryError {
    pub position: usize,
    pub kind: QueryErrorKind,
}

impl QueryError {
    /// The query followed by a caret line under the offending column.
    pub fn caret(&self, text: &str) -> String {
        format!("{text}\n{}^", " ".repeat(self.position))
    }
}

fn err(position: usize, kind: QueryErrorKind) -> QueryError {
    QueryError { position, kind }
}

// (start column, clause text)
fn split_clauses(text: &str) -> Result<Vec<(usize, String)>, QueryError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let mut clause = String::new();
        let mut quoted = false;
        while i < chars.len() && (quoted || !chars[i].is_whitespace()) {
            if chars[i] == '"' {
                quoted = !quoted;
            }
            clause.push(chars[i]);
            i += 1;
        }
        if quoted {
            return Err(err(start, QueryErrorKind::UnterminatedQuote));
        }
        out.push((start, clause));
    }
    Ok(out)
}

fn parse_interval(value: &str, at: usize) -> Result<(f64, f64), QueryError> {
    let inner = value
        .strip_prefix('[')
        .and_then(|v| v.strip_suffix(']'))
        .ok_or_else(|| err(at, QueryErrorKind::BadInterval))?;
    let (lo, hi) = inner
        .split_once(',')
        .ok_or_else(|| err(at, QueryErrorKind::BadInterval))?;
    let num = |s: &str| -> Result<f64, QueryError> {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| err(at, QueryErrorKind::BadValue("number", s.to_string())))
    };
    let (lo, hi) = (num(lo)?, num(hi)?);
    if lo > hi {
        return Err(err(at, QueryErrorKind::InvertedInterval(lo, hi)));
    }
    Ok((lo, hi))
}

/// Parses a query line and fills in defaults: rank mode, `wupalmer` for
/// concept terms or `levenshtein` for keywords, and a limit of
/// [`DEFAULT_LIMIT`] in rank mode.
pub fn parse_query(text: &str) -> Result<Query, QueryError> {
    let mut q = Query::default();
    let mut seen = BTreeSet::new();
    for (start, clause) in split_clauses(text)? {
        let Some((name, value)) = clause.split_once(':') else {
            return Err(err(start, QueryErrorKind::Syntax));
        };
        let name = name.to_ascii_lowercase();
        let at = start + name.chars().count() + 1;
        if value.is_empty() {
            return Err(err(at, QueryErrorKind::Syntax));
        }
        let slot = match name.as_str() {
            "concept" | "keyword" => "term",
            other => other,
        };
        if !seen.insert(slot.to_string()) {
            return Err(err(
                start,
                if slot == "term" {
                    QueryErrorKind::TwoTerms
                } else {
                    QueryErrorKind::DuplicateClause(name.clone())
                },
            ));
        }
        match name.as_str() {
            "concept" => {
                if !is_valid_concept_name(value) {
                    return Err(err(at, QueryErrorKind::BadValue("concept", value.into())));
                }
                q.term = Some(Term::Concept(value.to_string()));
            }
            "keyword" => {
                let kw = match value.strip_prefix('"') {
                    Some(rest) => rest
                        .strip_suffix('"')
                        .filter(|k| !k.contains('"'))
                        .ok_or_else(|| {
                            err(at, QueryErrorKind::BadValue("keyword", value.into()))
                        })?,
                    None if !value.contains('"') => value,
                    None => return Err(err(at, QueryErrorKind::BadValue("keyword", value.into()))),
                };
                if kw.trim().is_empty() {
                    return Err(err(at, QueryErrorKind::BadValue("keyword", value.into())));
                }
                q.term = Some(Term::Keyword(kw.to_string()));
            }
            "valence" | "arousal" | "dominance" => {
                let dim: Dimension = name.parse().expect("dimension clause names are valid");
                q.boxes.insert(dim, parse_interval(value, at)?);
            }
            "category" => {
                let term = value
                    .parse::<QualifiedTerm>()
                    .map_err(|_| err(at, QueryErrorKind::BadValue("category", value.into())))?;
                q.category = Some(term);
            }
            "db" => {
                if value.contains('/') {
                    return Err(err(at, QueryErrorKind::BadValue("database", value.into())));
                }
                q.db = Some(value.to_string());
            }
            "measure" => {
                q.measure = Some(
                    value
                        .parse::<Measure>()
                        .map_err(|_| err(at, QueryErrorKind::BadValue("measure", value.into())))?,
                );
            }
            "mode" => {
                q.mode = match value.to_ascii_lowercase().as_str() {
                    "filter" => Mode::Filter,
                    "rank" => Mode::Rank,
                    _ => return Err(err(at, QueryErrorKind::BadValue("mode", value.into()))),
                };
            }
            "limit" => {
                let limit = value
                    .parse::<usize>()
                    .ok()
                    .filter(|&l| l > 0)
                    .ok_or_else(|| err(at, QueryErrorKind::BadValue("limit", value.into())))?;
                q.limit = Some(limit);
            }
            _ => return Err(err(start, QueryErrorKind::UnknownClause(name))),
        }
    }
    q.validate().map_err(|kind| err(0, kind))?;
    if q.mode == Mode::Rank {
        if q.measure.is_none() {
            q.measure = match q.term {
                Some(Term::Concept(_)) => Some(Measure::WuPalmer),
                Some(Term::Keyword(_)) => Some(Measure::Levenshtein),
                None => None,
            };
        }
        q.limit.get_or_insert(DEFAULT_LIMIT);
    }
    Ok(q)
}

impl Query {
    /// Checks the clause requirements of the query's mode.
    pub fn validate(&self) -> Result<(), QueryErrorKind> {
        for (&_, &(lo, hi)) in &self.boxes {
            if lo > hi {
                return Err(QueryErrorKind::InvertedInterval(lo, hi));
            }
        }
        match self.mode {
            Mode::Filter => {
                if self.term.is_none() && self.category.is_none() && self.boxes.is_empty() {
                    return Err(QueryErrorKind::EmptyFilter);
                }
            }
            Mode::Rank => {
                if self.term.is_none() {
                    return Err(QueryErrorKind::MissingTerm);
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        match &self.term {
            Some(Term::Concept(c)) => parts.push(format!("concept:{c}")),
            Some(Term::Keyword(k)) => parts.push(format!("keyword:\"{k}\"")),
            None => {}
        }
        for (dim, (lo, hi)) in &self.boxes {
            parts.push(format!("{dim}:[{lo},{hi}]"));
        }
        if let Some(c) = &self.category {
            parts.push(format!("category:{c}"));
        }
        if let Some(db) = &self.db {
            parts.push(format!("db:{db}"));
        }
        if let Some(m) = self.measure {
            parts.push(format!("measure:{m}"));
        }
        parts.push(
            match self.mode {
                Mode::Filter => "mode:filter",
                Mode::Rank => "mode:rank",
            }
            .to_string(),
        );
        if let Some(l) = self.limit {
            parts.push(format!("limit:{l}"));
        }
        f.write_str(&parts.join(" "))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RetrievalError {
    #[error("invalid query: {0}")]
    Precondition(QueryErrorKind),
    #[error("query is not in {0} mode")]
    WrongMode(&'static str),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
}

/// Record-level clauses other than the term: dimension boxes, database and
/// category (through the equivalence closure).
fn passes_constraints(rec: &StimulusRecord, q: &Query, closure: &EquivalenceClosure) -> bool {
    if let Some(db) = &q.db {
        if rec.key.db() != db {
            return false;
        }
    }
    for (&dim, &(lo, hi)) in &q.boxes {
        let value = rec.dimensions.as_ref().and_then(|d| d.get(dim));
        match value {
            Some(v) if lo <= v && v <= hi => {}
            _ => return false,
        }
    }
    if let Some(wanted) = &q.category {
        let hit = rec
            .categories
            .iter()
            .any(|c| closure.are_equivalent(&c.qualified(), wanted));
        if !hit {
            return false;
        }
    }
    true
}

/// Stimuli satisfying every clause. A concept clause matches records with
/// some annotated concept subsumed by it; a keyword clause matches equal
/// keywords after case folding.
pub fn filter_query(
    corpus: &Corpus,
    g: &Taxonomy,
    closure: &EquivalenceClosure,
    q: &Query,
) -> Result<BTreeSet<StimulusId>, RetrievalError> {
    if q.mode != Mode::Filter {
        return Err(RetrievalError::WrongMode("filter"));
    }
    q.validate().map_err(RetrievalError::Precondition)?;
    if let Some(Term::Concept(c)) = &q.term {
        if !g.contains(c) {
            return Err(TaxonomyError::UnknownConcept(c.clone()).into());
        }
    }
    let mut out = BTreeSet::new();
    for rec in corpus.records() {
        let term_ok = match &q.term {
            None => true,
            Some(Term::Concept(wanted)) => {
                let mut hit = false;
                for c in rec.concepts() {
                    if g.is_subclass_of(c, wanted)? {
                        hit = true;
                        break;
                    }
                }
                hit
            }
            Some(Term::Keyword(wanted)) => {
                let wanted = fold_keyword(wanted);
                rec.keywords().any(|k| fold_keyword(k) == wanted)
            }
        };
        if term_ok && passes_constraints(rec, q, closure) {
            out.insert(rec.key.clone());
        }
    }
    if let Some(limit) = q.limit {
        out = out.into_iter().take(limit).collect();
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedEntry {
    pub stimulus: StimulusId,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedResult {
    pub query: String,
    pub measure: Measure,
    pub entries: Vec<RankedEntry>,
}

impl RankedResult {
    pub fn ids(&self) -> impl Iterator<Item = &StimulusId> {
        self.entries.iter().map(|e| &e.stimulus)
    }
}

/// Best relatedness between `term` and any applicable annotation of `rec`;
/// 0 when the record has no annotation of the term's kind.
pub fn score_record(
    rec: &StimulusRecord,
    g: &Taxonomy,
    params: &MeasureParams,
    measure: Measure,
    term: &Term,
) -> Result<f64, SimilarityError> {
    let mut best: f64 = 0.0;
    for sem in &rec.semantics {
        let operand = if measure.is_lexical() {
            sem.keyword.as_deref().map(Operand::Keyword)
        } else {
            sem.concept.as_deref().map(Operand::Concept)
        };
        if let Some(operand) = operand {
            best = best.max(relatedness(measure, g, params, term.operand(), operand)?);
        }
    }
    Ok(best)
}

/// Orders entries by descending score, ascending id on ties.
pub fn sort_entries(entries: &mut [RankedEntry]) {
    entries.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.stimulus.cmp(&b.stimulus))
    });
}

fn check_term_kind(measure: Measure, term: &Term) -> Result<(), SimilarityError> {
    let lexical_term = matches!(term, Term::Keyword(_));
    if measure.is_lexical() != lexical_term {
        return Err(SimilarityError::OperandMismatch {
            measure,
            operand: if lexical_term { "keyword" } else { "concept" },
        });
    }
    Ok(())
}

/// Scores and sorts the given records without truncation.
pub fn rank_records<'a>(
    records: impl IntoIterator<Item = &'a StimulusRecord>,
    g: &Taxonomy,
    params: &MeasureParams,
    measure: Measure,
    term: &Term,
) -> Result<Vec<RankedEntry>, SimilarityError> {
    check_term_kind(measure, term)?;
    if let Term::Concept(c) = term {
        if !g.contains(c) {
            return Err(TaxonomyError::UnknownConcept(c.clone()).into());
        }
    }
    let mut entries = Vec::new();
    for rec in records {
        entries.push(RankedEntry {
            stimulus: rec.key.clone(),
            score: score_record(rec, g, params, measure, term)?,
        });
    }
    sort_entries(&mut entries);
    Ok(entries)
}

/// Ranks every record that passes the box, database and category clauses,
/// then truncates to the query limit.
pub fn ranked_query(
    corpus: &Corpus,
    g: &Taxonomy,
    closure: &EquivalenceClosure,
    params: &MeasureParams,
    q: &Query,
) -> Result<RankedResult, RetrievalError> {
    if q.mode != Mode::Rank {
        return Err(RetrievalError::WrongMode("rank"));
    }
    q.validate().map_err(RetrievalError::Precondition)?;
    let term = q.term.as_ref().expect("validated rank query has a term");
    let measure = q.measure.unwrap_or(match term {
        Term::Concept(_) => Measure::WuPalmer,
        Term::Keyword(_) => Measure::Levenshtein,
    });
    let candidates = corpus
        .records()
        .filter(|rec| passes_constraints(rec, q, closure));
    let mut entries = rank_records(candidates, g, params, measure, term)?;
    entries.truncate(q.limit.unwrap_or(DEFAULT_LIMIT));
    Ok(RankedResult {
        query: q.to_string(),
        measure,
        entries,
    })
}
