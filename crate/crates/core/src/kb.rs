//! Workspace plumbing: a flat `key = value` manifest naming the input
//! files, the assembled [`KnowledgeBase`], and a single-file snapshot so
//! that querying does not repeat ingestion.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affect::{
    axioms_to_text, build_equivalence_closure, load_vocabularies, parse_axioms, AffectError,
    EquivalenceAxiom, EquivalenceClosure, VocabularySet,
};
use crate::corpus::{
    check_corpus_records, expand_keywords, parse_legacy_table, Corpus, CorpusError,
    ExpansionReport, StimulusRecord,
};
use crate::eval::{
    eval_queries_to_text, parse_eval_queries, parse_judgments, EvalQuery, RelevanceJudgments,
};
use crate::retrieval::DEFAULT_LIMIT;
use crate::similarity::Measure;
use crate::taxonomy::{parse_mapping, parse_taxonomy, KeywordMapping, Taxonomy, TaxonomyError};

pub const SNAPSHOT_FORMAT: &str = "stimkb-snapshot";
pub const SNAPSHOT_VERSION: u32 = 1;

/// Broad failure class, used to pick process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Missing file, bad syntax, bad arguments.
    Usage,
    /// Well-formed input that breaks a data constraint.
    Validation,
    Internal,
}

#[derive(Debug, Error)]
pub enum KbError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {reason}")]
    Manifest {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("{path}: {reason}")]
    Parse { path: PathBuf, reason: String },
    #[error("{path}: {}", errors.join("; "))]
    Invalid { path: PathBuf, errors: Vec<String> },
    #[error("snapshot {path}: {reason}")]
    Snapshot { path: PathBuf, reason: String },
}

impl KbError {
    pub fn class(&self) -> ErrorClass {
        match self {
            KbError::Invalid { .. } => ErrorClass::Validation,
            KbError::Snapshot { .. } => ErrorClass::Internal,
            _ => ErrorClass::Usage,
        }
    }

    fn parse(path: &Path, reason: impl fmt::Display) -> Self {
        KbError::Parse {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        }
    }

    fn invalid(path: &Path, reason: impl fmt::Display) -> Self {
        KbError::Invalid {
            path: path.to_path_buf(),
            errors: vec![reason.to_string()],
        }
    }

    fn from_taxonomy(path: &Path, e: TaxonomyError) -> Self {
        match e {
            TaxonomyError::Malformed { .. }
            | TaxonomyError::InvalidName(_)
            | TaxonomyError::Empty => KbError::parse(path, e),
            _ => KbError::invalid(path, e),
        }
    }

    fn from_affect(path: &Path, e: AffectError) -> Self {
        match e {
            AffectError::Malformed { .. } | AffectError::MalformedQualifiedTerm(_) => {
                KbError::parse(path, e)
            }
            _ => KbError::invalid(path, e),
        }
    }

    fn from_corpus(path: &Path, e: CorpusError) -> Self {
        match e {
            CorpusError::Syntax { .. } => KbError::parse(path, e),
            _ => KbError::invalid(path, e),
        }
    }
}

/// Parsed manifest. Relative paths resolve against the manifest's directory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub taxonomy: Option<PathBuf>,
    pub mapping: Option<PathBuf>,
    pub vocabularies: Option<PathBuf>,
    pub axioms: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub legacy: Option<PathBuf>,
    pub judgments: Option<PathBuf>,
    pub queries: Option<PathBuf>,
    pub seed: u64,
    pub measure: Option<Measure>,
    pub limit: usize,
    pub candidates: usize,
}

const PATH_KEYS: [&str; 8] = [
    "taxonomy",
    "mapping",
    "vocabularies",
    "axioms",
    "corpus",
    "legacy",
    "judgments",
    "queries",
];

pub fn parse_manifest(text: &str, path: &Path) -> Result<Manifest, KbError> {
    let base = path.parent().unwrap_or(Path::new(""));
    let mut m = Manifest {
        limit: DEFAULT_LIMIT,
        candidates: 100,
        ..Manifest::default()
    };
    let mut seen = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |reason: String| KbError::Manifest {
            path: path.to_path_buf(),
            line,
            reason,
        };
        let raw = raw.trim();
        if raw.is_empty() || raw.starts_with('#') {
            continue;
        }
        let Some((key, value)) = raw.split_once('=') else {
            return Err(err("expected `key = value`".into()));
        };
        let (key, value) = (key.trim(), value.trim());
        if seen.insert(key.to_string(), line).is_some() {
            return Err(err(format!("`{key}` given twice")));
        }
        if value.is_empty() {
            return Err(err(format!("`{key}` has no value")));
        }
        let resolved = || Some(base.join(value));
        match key {
            "taxonomy" => m.taxonomy = resolved(),
            "mapping" => m.mapping = resolved(),
            "vocabularies" => m.vocabularies = resolved(),
            "axioms" => m.axioms = resolved(),
            "corpus" => m.corpus = resolved(),
            "legacy" => m.legacy = resolved(),
            "judgments" => m.judgments = resolved(),
            "queries" => m.queries = resolved(),
            "seed" => {
                m.seed = value
                    .parse()
                    .map_err(|_| err(format!("bad seed `{value}`")))?
            }
            "limit" | "candidates" => {
                let n: usize = value
                    .parse()
                    .ok()
                    .filter(|&n| n > 0)
                    .ok_or_else(|| err(format!("`{key}` must be a positive integer")))?;
                if key == "limit" {
                    m.limit = n;
                } else {
                    m.candidates = n;
                }
            }
            "measure" => m.measure = Some(value.parse().map_err(|e| err(format!("{e}")))?),
            other => {
                return Err(err(format!(
                    "unknown key `{other}` (known: {}, seed, measure, limit, candidates)",
                    PATH_KEYS.join(", ")
                )))
            }
        }
    }
    if m.taxonomy.is_none() {
        return Err(KbError::Manifest {
            path: path.to_path_buf(),
            line: 0,
            reason: "`taxonomy` is required".into(),
        });
    }
    if m.corpus.is_none() && m.legacy.is_none() {
        return Err(KbError::Manifest {
            path: path.to_path_buf(),
            line: 0,
            reason: "one of `corpus` or `legacy` is required".into(),
        });
    }
    Ok(m)
}

pub fn read_file(path: &Path) -> Result<String, KbError> {
    std::fs::read_to_string(path).map_err(|source| KbError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_manifest(path: &Path) -> Result<Manifest, KbError> {
    parse_manifest(&read_file(path)?, path)
}

/// Counts reported after ingestion.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestSummary {
    pub concepts: usize,
    pub records: usize,
    pub invalid: usize,
    pub mapped_keywords: usize,
    pub unmapped_keywords: usize,
    pub concepts_added: usize,
}

/// Everything a query, evaluation or sequence run needs.
#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    pub taxonomy: Taxonomy,
    pub mapping: KeywordMapping,
    pub vocabularies: VocabularySet,
    pub axioms: Vec<EquivalenceAxiom>,
    pub closure: EquivalenceClosure,
    pub corpus: Corpus,
    pub judgments: Option<RelevanceJudgments>,
    pub queries: Option<Vec<EvalQuery>>,
    pub seed: u64,
    pub measure: Option<Measure>,
    pub limit: usize,
    pub candidates: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorpusStats {
    pub records: usize,
    pub concepts: usize,
    pub keywords: usize,
    pub taxonomy_concepts: usize,
    pub vocabularies: usize,
}

impl KnowledgeBase {
    /// Reads and validates every file the manifest names. Keyword-only
    /// annotations are expanded through the mapping before indexing.
    pub fn ingest(m: &Manifest) -> Result<(KnowledgeBase, IngestSummary), KbError> {
        let tax_path = m.taxonomy.as_deref().expect("manifest requires taxonomy");
        let taxonomy = parse_taxonomy(&read_file(tax_path)?)
            .map_err(|e| KbError::from_taxonomy(tax_path, e))?;

        let mapping = match &m.mapping {
            Some(p) => parse_mapping(&read_file(p)?, &taxonomy)
                .map_err(|e| KbError::from_taxonomy(p, e))?,
            None => KeywordMapping::new(),
        };
        let vocabularies = match &m.vocabularies {
            Some(p) => load_vocabularies(&read_file(p)?).map_err(|e| KbError::from_affect(p, e))?,
            None => VocabularySet::with_defaults(),
        };
        let axioms = match &m.axioms {
            Some(p) => {
                let axioms =
                    parse_axioms(&read_file(p)?).map_err(|e| KbError::from_affect(p, e))?;
                for (a, b) in &axioms {
                    for t in [a, b] {
                        if !vocabularies.contains_term(t) {
                            return Err(KbError::invalid(
                                p,
                                format!("axiom term {t} is not a declared vocabulary term"),
                            ));
                        }
                    }
                }
                axioms
            }
            None => Vec::new(),
        };

        let mut records: Vec<StimulusRecord> = Vec::new();
        let mut invalid = 0;
        if let Some(p) = &m.corpus {
            let check = check_corpus_records(&read_file(p)?, &taxonomy, &vocabularies);
            invalid += check.errors.len();
            if let Some(first) = check
                .errors
                .iter()
                .find(|e| matches!(e, CorpusError::Syntax { .. }))
            {
                return Err(KbError::parse(p, first));
            }
            if !check.errors.is_empty() {
                return Err(KbError::Invalid {
                    path: p.clone(),
                    errors: check.errors.iter().map(ToString::to_string).collect(),
                });
            }
            records.extend(check.records);
        }
        if let Some(p) = &m.legacy {
            let legacy =
                parse_legacy_table(&read_file(p)?).map_err(|e| KbError::from_corpus(p, e))?;
            records.extend(legacy);
        }
        let expansion: ExpansionReport = expand_keywords(&mut records, &mapping);
        let corpus_path = m
            .corpus
            .as_ref()
            .or(m.legacy.as_ref())
            .expect("manifest requires a corpus");
        let corpus =
            Corpus::from_records(records).map_err(|e| KbError::from_corpus(corpus_path, e))?;

        let judgments = match &m.judgments {
            Some(p) => Some(parse_judgments(&read_file(p)?).map_err(|e| KbError::parse(p, e))?),
            None => None,
        };
        let queries = match &m.queries {
            Some(p) => Some(parse_eval_queries(&read_file(p)?).map_err(|e| KbError::parse(p, e))?),
            None => None,
        };

        let summary = IngestSummary {
            concepts: taxonomy.len(),
            records: corpus.len(),
            invalid,
            mapped_keywords: expansion.mapped.len(),
            unmapped_keywords: expansion.unmapped.len(),
            concepts_added: expansion.added,
        };
        let closure = build_equivalence_closure(&axioms);
        Ok((
            KnowledgeBase {
                taxonomy,
                mapping,
                vocabularies,
                axioms,
                closure,
                corpus,
                judgments,
                queries,
                seed: m.seed,
                measure: m.measure,
                limit: m.limit,
                candidates: m.candidates,
            },
            summary,
        ))
    }

    pub fn stats(&self) -> CorpusStats {
        CorpusStats {
            records: self.corpus.len(),
            concepts: self.corpus.distinct_concepts(),
            keywords: self.corpus.distinct_keywords(),
            taxonomy_concepts: self.taxonomy.len(),
            vocabularies: self.vocabularies.len(),
        }
    }

    pub fn to_snapshot(&self) -> Snapshot {
        Snapshot {
            format: SNAPSHOT_FORMAT.into(),
            version: SNAPSHOT_VERSION,
            taxonomy: self.taxonomy.to_text(),
            mapping: self.mapping.to_text(),
            vocabularies: self.vocabularies.to_text(),
            axioms: axioms_to_text(&self.axioms),
            corpus: self.corpus.to_text(),
            judgments: self.judgments.as_ref().map(RelevanceJudgments::to_text),
            queries: self.queries.as_deref().map(eval_queries_to_text),
            seed: self.seed,
            measure: self.measure.map(|m| m.to_string()),
            limit: self.limit,
            candidates: self.candidates,
        }
    }

    /// Rebuilds from a snapshot. Components are stored as their canonical
    /// text forms and go through the same parsers as the input files.
    pub fn from_snapshot(s: &Snapshot, path: &Path) -> Result<KnowledgeBase, KbError> {
        let bad = |reason: String| KbError::Snapshot {
            path: path.to_path_buf(),
            reason,
        };
        if s.format != SNAPSHOT_FORMAT {
            return Err(bad(format!("not a snapshot (format `{}`)", s.format)));
        }
        if s.version != SNAPSHOT_VERSION {
            return Err(bad(format!(
                "unsupported version {} (expected {SNAPSHOT_VERSION})",
                s.version
            )));
        }
        let taxonomy = parse_taxonomy(&s.taxonomy).map_err(|e| bad(format!("taxonomy: {e}")))?;
        let mapping =
            parse_mapping(&s.mapping, &taxonomy).map_err(|e| bad(format!("mapping: {e}")))?;
        let vocabularies =
            load_vocabularies(&s.vocabularies).map_err(|e| bad(format!("vocabularies: {e}")))?;
        let axioms = parse_axioms(&s.axioms).map_err(|e| bad(format!("axioms: {e}")))?;
        let check = check_corpus_records(&s.corpus, &taxonomy, &vocabularies);
        if let Some(e) = check.errors.first() {
            return Err(bad(format!("corpus: {e}")));
        }
        let corpus =
            Corpus::from_records(check.records).map_err(|e| bad(format!("corpus: {e}")))?;
        let judgments = s
            .judgments
            .as_deref()
            .map(parse_judgments)
            .transpose()
            .map_err(|e| bad(format!("judgments: {e}")))?;
        let queries = s
            .queries
            .as_deref()
            .map(parse_eval_queries)
            .transpose()
            .map_err(|e| bad(format!("queries: {e}")))?;
        let measure = s
            .measure
            .as_deref()
            .map(str::parse)
            .transpose()
            .map_err(|e| bad(format!("measure: {e}")))?;
        let closure = build_equivalence_closure(&axioms);
        Ok(KnowledgeBase {
            taxonomy,
            mapping,
            vocabularies,
            axioms,
            closure,
            corpus,
            judgments,
            queries,
            seed: s.seed,
            measure,
            limit: s.limit,
            candidates: s.candidates,
        })
    }

    pub fn save_snapshot(&self, path: &Path) -> Result<(), KbError> {
        let json = serde_json::to_string_pretty(&self.to_snapshot()).expect("snapshot serializes");
        std::fs::write(path, json + "\n").map_err(|source| KbError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load_snapshot(path: &Path) -> Result<KnowledgeBase, KbError> {
        let text = read_file(path)?;
        let snapshot: Snapshot = serde_json::from_str(&text).map_err(|e| KbError::Snapshot {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        KnowledgeBase::from_snapshot(&snapshot, path)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub format: String,
    pub version: u32,
    pub taxonomy: String,
    pub mapping: String,
    pub vocabularies: String,
    pub axioms: String,
    pub corpus: String,
    pub judgments: Option<String>,
    pub queries: Option<String>,
    pub seed: u64,
    pub measure: Option<String>,
    pub limit: usize,
    pub candidates: usize,
}
