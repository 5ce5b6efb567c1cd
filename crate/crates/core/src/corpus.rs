//! Stimulus records and the indexed corpus that holds them.
//!
//! # Record file format
//!
//! One record per line. Blank lines and lines starting with `#` are ignored.
//! A record is a TAB-separated list of `name=value` fields, each name at most
//! once, `key` mandatory. List-valued fields hold `;`-separated elements
//! whose parts are separated by `|`. Trailing empty parts may be omitted.
//!
//! | field | value |
//! |-------|-------|
//! | `key` | stimulus id `db/id` |
//! | `sem` | `kind\|concept\|keyword` with kind `object`, `scene` or `event` |
//! | `cat` | `vocab\|term\|confLevel\|confValue` |
//! | `dim.scale` | `min\|max` (required when any `dim.*` field is present) |
//! | `dim.valence` … `dim.intensity` | number on the declared scale |
//! | `dim.valenceSD`, `dim.arousalSD`, `dim.dominanceSD` | non-negative number |
//! | `dim.confLevel`, `dim.confValue` | confidence of the dimensional annotation |
//! | `appraisal` | `name\|value` |
//! | `action` | `term\|confLevel\|confValue` |
//! | `sentiment` | `value\|confLevel\|confValue` |
//! | `ctx.db`, `ctx.id`, `ctx.format`, `ctx.author`, `ctx.owner`, `ctx.location` | text |
//! | `ctx.width`, `ctx.height`, `ctx.size`, `ctx.colorDepth` | non-negative integer |
//! | `ctx.length` | seconds, non-negative number |
//! | `ctx.created` | ISO-8601 date or date-time |
//! | `dc.type`, `dc.creator`, `dc.contributor`, `dc.date`, `dc.format` | text |
//! | `phys` | `path\|channel` |
//!
//! Inside text atoms the characters `%`, TAB, LF, CR, `;` and `|` are written
//! as `%25`, `%09`, `%0A`, `%0D`, `%3B` and `%7C`.
//!
//! A record has a context iff it carries at least one `ctx.*` or `dc.*`
//! field; its `ctx.db`/`ctx.id` must then agree with `key`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affect::{
    validate_appraisal, validate_category, ActionTendencyAnnotation, AffectError,
    AppraisalAnnotation, CategoryAnnotation, Confidence, ConfidenceLevel, Dimension,
    DimensionAnnotation, SentimentAnnotation, VocabularySet,
};
use crate::taxonomy::{fold_keyword, is_valid_concept_name, KeywordMapping, Taxonomy};

/// Internal stimulus key, `dbName/id`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct StimulusId(String);

impl StimulusId {
    pub fn new(db: &str, id: &str) -> Result<Self, String> {
        format!("{db}/{id}").parse()
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn db(&self) -> &str {
        self.0.split_once('/').map(|(db, _)| db).unwrap_or_default()
    }

    pub fn local_id(&self) -> &str {
        self.0.split_once('/').map(|(_, id)| id).unwrap_or_default()
    }
}

impl FromStr for StimulusId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.split_once('/') {
            Some((db, id))
                if !db.trim().is_empty()
                    && !id.trim().is_empty()
                    && !s.contains(['\t', '\n', '\r']) =>
            {
                Ok(StimulusId(s.to_string()))
            }
            _ => Err(format!("invalid stimulus id `{s}` (expected db/id)")),
        }
    }
}

impl TryFrom<String> for StimulusId {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<StimulusId> for String {
    fn from(id: StimulusId) -> String {
        id.0
    }
}

impl fmt::Display for StimulusId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SemanticKind {
    Object,
    Scene,
    Event,
}

impl SemanticKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SemanticKind::Object => "object",
            SemanticKind::Scene => "scene",
            SemanticKind::Event => "event",
        }
    }
}

impl FromStr for SemanticKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "object" => Ok(SemanticKind::Object),
            "scene" => Ok(SemanticKind::Scene),
            "event" => Ok(SemanticKind::Event),
            _ => Err(format!("unknown semantics kind `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticsAnnotation {
    pub kind: SemanticKind,
    pub concept: Option<String>,
    pub keyword: Option<String>,
}

impl SemanticsAnnotation {
    pub fn concept(kind: SemanticKind, concept: &str) -> Self {
        SemanticsAnnotation {
            kind,
            concept: Some(concept.to_string()),
            keyword: None,
        }
    }

    pub fn keyword(kind: SemanticKind, keyword: &str) -> Self {
        SemanticsAnnotation {
            kind,
            concept: None,
            keyword: Some(keyword.to_string()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ContextRecord {
    pub db_name: String,
    pub id: String,
    pub media_format: Option<String>,
    pub width_px: Option<u64>,
    pub height_px: Option<u64>,
    pub size_bytes: Option<u64>,
    pub color_depth_bits: Option<u64>,
    pub length_seconds: Option<f64>,
    pub author: Option<String>,
    pub owner: Option<String>,
    pub created_at: Option<String>,
    pub location: Option<String>,
    pub dc_type: Option<String>,
    pub dc_creator: Option<String>,
    pub dc_contributor: Option<String>,
    pub dc_date: Option<String>,
    pub dc_format: Option<String>,
}

impl ContextRecord {
    pub fn new(db_name: &str, id: &str) -> Self {
        ContextRecord {
            db_name: db_name.to_string(),
            id: id.to_string(),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhysiologyRef {
    pub path: String,
    pub channel: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusRecord {
    pub key: StimulusId,
    pub semantics: Vec<SemanticsAnnotation>,
    pub categories: Vec<CategoryAnnotation>,
    pub dimensions: Option<DimensionAnnotation>,
    pub appraisals: Option<AppraisalAnnotation>,
    pub action_tendencies: Vec<ActionTendencyAnnotation>,
    pub sentiments: Vec<SentimentAnnotation>,
    pub context: Option<ContextRecord>,
    pub physiology: Vec<PhysiologyRef>,
}

impl StimulusRecord {
    pub fn new(key: StimulusId) -> Self {
        StimulusRecord {
            key,
            semantics: Vec::new(),
            categories: Vec::new(),
            dimensions: None,
            appraisals: None,
            action_tendencies: Vec::new(),
            sentiments: Vec::new(),
            context: None,
            physiology: Vec::new(),
        }
    }

    pub fn has_emotion(&self) -> bool {
        !self.categories.is_empty()
            || self.dimensions.is_some()
            || self.appraisals.as_ref().is_some_and(|a| !a.is_empty())
            || !self.action_tendencies.is_empty()
            || !self.sentiments.is_empty()
    }

    pub fn concepts(&self) -> impl Iterator<Item = &str> {
        self.semantics.iter().filter_map(|s| s.concept.as_deref())
    }

    pub fn keywords(&self) -> impl Iterator<Item = &str> {
        self.semantics.iter().filter_map(|s| s.keyword.as_deref())
    }
}

/// One violated record invariant.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("no semantics, emotion, context or physiology component")]
    NoComponents,
    #[error("semantics entry {0} has neither concept nor keyword")]
    EmptySemantics(usize),
    #[error("semantics entry {0} has invalid concept name")]
    InvalidConceptName(usize),
    #[error("semantics entry {0} has an empty keyword")]
    EmptyKeyword(usize),
    #[error("category {index}: {source}")]
    Category { index: usize, source: AffectError },
    #[error("dimensions: {0}")]
    Dimensions(AffectError),
    #[error("appraisal: {0}")]
    Appraisal(AffectError),
    #[error("action tendency {index}: {source}")]
    ActionTendency { index: usize, source: AffectError },
    #[error("sentiment {index}: {source}")]
    Sentiment { index: usize, source: AffectError },
    #[error("context database name or id is empty")]
    EmptyContextKey,
    #[error("context {0} is negative or not finite")]
    NegativeContextValue(&'static str),
    #[error("context creation time `{0}` is not ISO-8601")]
    InvalidTimestamp(String),
    #[error("context {context} does not match key {key}")]
    KeyMismatch { key: String, context: String },
    #[error("physiology reference {0} has an empty path")]
    EmptyPhysiologyPath(usize),
    #[error("unknown concept `{0}`")]
    UnknownConcept(String),
}

fn is_iso8601(text: &str) -> bool {
    use chrono::{DateTime, NaiveDate, NaiveDateTime};
    DateTime::parse_from_rfc3339(text).is_ok()
        || NaiveDateTime::parse_from_str(text, "%Y-%m-%dT%H:%M:%S").is_ok()
        || NaiveDateTime::parse_from_str(text, "%Y-%m-%dT%H:%M").is_ok()
        || NaiveDate::parse_from_str(text, "%Y-%m-%d").is_ok()
}

/// Checks every intrinsic record invariant and returns all violations.
/// Concept names are only checked syntactically; see [`validate_against`].
pub fn validate_stimulus(rec: &StimulusRecord) -> Vec<Violation> {
    let mut out = Vec::new();
    let has_context = rec.context.is_some();
    if rec.semantics.is_empty() && !rec.has_emotion() && !has_context && rec.physiology.is_empty() {
        out.push(Violation::NoComponents);
    }
    for (i, sem) in rec.semantics.iter().enumerate() {
        if sem.concept.is_none() && sem.keyword.is_none() {
            out.push(Violation::EmptySemantics(i));
        }
        if sem
            .concept
            .as_deref()
            .is_some_and(|c| !is_valid_concept_name(c))
        {
            out.push(Violation::InvalidConceptName(i));
        }
        if sem.keyword.as_deref().is_some_and(|k| k.trim().is_empty()) {
            out.push(Violation::EmptyKeyword(i));
        }
    }
    for (index, cat) in rec.categories.iter().enumerate() {
        if let Err(source) = cat.confidence.validate() {
            out.push(Violation::Category { index, source });
        }
    }
    if let Some(dims) = &rec.dimensions {
        if let Err(e) = dims.validate() {
            out.push(Violation::Dimensions(e));
        }
    }
    if let Some(appraisal) = &rec.appraisals {
        if let Err(e) = validate_appraisal(appraisal) {
            out.push(Violation::Appraisal(e));
        }
    }
    for (index, at) in rec.action_tendencies.iter().enumerate() {
        if let Err(source) = at.validate() {
            out.push(Violation::ActionTendency { index, source });
        }
    }
    for (index, s) in rec.sentiments.iter().enumerate() {
        if let Err(source) = s.validate() {
            out.push(Violation::Sentiment { index, source });
        }
    }
    if let Some(ctx) = &rec.context {
        if ctx.db_name.trim().is_empty() || ctx.id.trim().is_empty() {
            out.push(Violation::EmptyContextKey);
        } else if ctx.db_name != rec.key.db() || ctx.id != rec.key.local_id() {
            out.push(Violation::KeyMismatch {
                key: rec.key.to_string(),
                context: format!("{}/{}", ctx.db_name, ctx.id),
            });
        }
        if ctx
            .length_seconds
            .is_some_and(|l| !(l >= 0.0 && l.is_finite()))
        {
            out.push(Violation::NegativeContextValue("length"));
        }
        if let Some(created) = &ctx.created_at {
            if !is_iso8601(created) {
                out.push(Violation::InvalidTimestamp(created.clone()));
            }
        }
    }
    for (i, phys) in rec.physiology.iter().enumerate() {
        if phys.path.trim().is_empty() {
            out.push(Violation::EmptyPhysiologyPath(i));
        }
    }
    out
}

/// Resolves concepts against the taxonomy and categories against the
/// vocabularies.
pub fn validate_against(
    rec: &StimulusRecord,
    taxonomy: &Taxonomy,
    vocabs: &VocabularySet,
) -> Vec<Violation> {
    let mut out = Vec::new();
    for concept in rec.concepts() {
        if !taxonomy.contains(concept) {
            out.push(Violation::UnknownConcept(concept.to_string()));
        }
    }
    for (index, cat) in rec.categories.iter().enumerate() {
        if let Err(source) = validate_category(cat, vocabs) {
            if !matches!(source, AffectError::ConfidenceOutOfRange(_)) {
                out.push(Violation::Category { index, source });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CorpusError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("line {line}: record {key}: {violation}")]
    Invalid {
        line: usize,
        key: String,
        violation: Violation,
    },
    #[error("duplicate stimulus {0}")]
    DuplicateKey(StimulusId),
    #[error("unknown stimulus {0}")]
    UnknownKey(String),
    #[error("record {key} is invalid: {violation}")]
    Rejected {
        key: StimulusId,
        violation: Violation,
    },
}

// ---------------------------------------------------------------------------
// record file serialization

const RESERVED: [(char, &str); 6] = [
    ('%', "%25"),
    ('\t', "%09"),
    ('\n', "%0A"),
    ('\r', "%0D"),
    (';', "%3B"),
    ('|', "%7C"),
];

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match RESERVED.iter().find(|(c, _)| *c == ch) {
            Some((_, code)) => out.push_str(code),
            None => out.push(ch),
        }
    }
    out
}

fn unescape(text: &str) -> Result<String, String> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(pos) = rest.find('%') {
        out.push_str(&rest[..pos]);
        let code = rest.get(pos..pos + 3).unwrap_or(&rest[pos..]);
        match RESERVED.iter().find(|(_, c)| c.eq_ignore_ascii_case(code)) {
            Some((ch, _)) => out.push(*ch),
            None => return Err(format!("bad escape `{code}`")),
        }
        rest = &rest[pos + code.len()..];
    }
    out.push_str(rest);
    Ok(out)
}

fn fmt_f64(v: f64) -> String {
    // shortest representation that round-trips
    format!("{v:?}")
        .strip_suffix(".0")
        .map(str::to_string)
        .unwrap_or_else(|| format!("{v:?}"))
}

fn opt_text(v: &Option<String>) -> String {
    v.as_deref().map(escape).unwrap_or_default()
}

fn confidence_parts(c: &Confidence) -> String {
    let level = c.level.map(|l| l.as_str().to_string()).unwrap_or_default();
    let value = c.value.map(fmt_f64).unwrap_or_default();
    format!("{level}|{value}")
}

fn trim_empty_parts(element: String) -> String {
    element.trim_end_matches('|').to_string()
}

/// Serializes one record on a single line.
pub fn record_to_line(rec: &StimulusRecord) -> String {
    let mut fields: Vec<String> = vec![format!("key={}", escape(rec.key.as_str()))];
    let mut list = |name: &str, items: Vec<String>| {
        if !items.is_empty() {
            fields.push(format!("{name}={}", items.join(";")));
        }
    };
    list(
        "sem",
        rec.semantics
            .iter()
            .map(|s| {
                trim_empty_parts(format!(
                    "{}|{}|{}",
                    s.kind.as_str(),
                    opt_text(&s.concept),
                    opt_text(&s.keyword)
                ))
            })
            .collect(),
    );
    list(
        "cat",
        rec.categories
            .iter()
            .map(|c| {
                trim_empty_parts(format!(
                    "{}|{}|{}",
                    escape(&c.vocabulary),
                    escape(&c.term),
                    confidence_parts(&c.confidence)
                ))
            })
            .collect(),
    );
    if let Some(d) = &rec.dimensions {
        fields.push(format!(
            "dim.scale={}|{}",
            fmt_f64(d.scale_min),
            fmt_f64(d.scale_max)
        ));
        for (dim, v) in &d.values {
            fields.push(format!("dim.{}={}", dim.as_str(), fmt_f64(*v)));
        }
        for (name, sd) in [
            ("valenceSD", d.valence_sd),
            ("arousalSD", d.arousal_sd),
            ("dominanceSD", d.dominance_sd),
        ] {
            if let Some(sd) = sd {
                fields.push(format!("dim.{name}={}", fmt_f64(sd)));
            }
        }
        if let Some(level) = d.confidence.level {
            fields.push(format!("dim.confLevel={level}"));
        }
        if let Some(value) = d.confidence.value {
            fields.push(format!("dim.confValue={}", fmt_f64(value)));
        }
    }
    let mut list = |name: &str, items: Vec<String>| {
        if !items.is_empty() {
            fields.push(format!("{name}={}", items.join(";")));
        }
    };
    if let Some(a) = &rec.appraisals {
        list(
            "appraisal",
            a.iter()
                .map(|(k, v)| format!("{}|{}", escape(k), fmt_f64(*v)))
                .collect(),
        );
    }
    list(
        "action",
        rec.action_tendencies
            .iter()
            .map(|a| {
                trim_empty_parts(format!(
                    "{}|{}",
                    escape(&a.term),
                    confidence_parts(&a.confidence)
                ))
            })
            .collect(),
    );
    list(
        "sentiment",
        rec.sentiments
            .iter()
            .map(|s| {
                trim_empty_parts(format!(
                    "{}|{}",
                    fmt_f64(s.value),
                    confidence_parts(&s.confidence)
                ))
            })
            .collect(),
    );
    if let Some(c) = &rec.context {
        fields.push(format!("ctx.db={}", escape(&c.db_name)));
        fields.push(format!("ctx.id={}", escape(&c.id)));
        if let Some(v) = &c.media_format {
            fields.push(format!("ctx.format={}", escape(v)));
        }
        for (name, v) in [
            ("ctx.width", c.width_px),
            ("ctx.height", c.height_px),
            ("ctx.size", c.size_bytes),
            ("ctx.colorDepth", c.color_depth_bits),
        ] {
            if let Some(v) = v {
                fields.push(format!("{name}={v}"));
            }
        }
        if let Some(v) = c.length_seconds {
            fields.push(format!("ctx.length={}", fmt_f64(v)));
        }
        for (name, v) in [
            ("ctx.author", &c.author),
            ("ctx.owner", &c.owner),
            ("ctx.created", &c.created_at),
            ("ctx.location", &c.location),
            ("dc.type", &c.dc_type),
            ("dc.creator", &c.dc_creator),
            ("dc.contributor", &c.dc_contributor),
            ("dc.date", &c.dc_date),
            ("dc.format", &c.dc_format),
        ] {
            if let Some(v) = v {
                fields.push(format!("{name}={}", escape(v)));
            }
        }
    }
    if !rec.physiology.is_empty() {
        let items: Vec<String> = rec
            .physiology
            .iter()
            .map(|p| trim_empty_parts(format!("{}|{}", escape(&p.path), opt_text(&p.channel))))
            .collect();
        fields.push(format!("phys={}", items.join(";")));
    }
    fields.join("\t")
}

pub fn records_to_text<'a>(records: impl IntoIterator<Item = &'a StimulusRecord>) -> String {
    records
        .into_iter()
        .map(|r| record_to_line(r) + "\n")
        .collect()
}

fn parts(element: &str, max: usize, what: &str) -> Result<Vec<Option<String>>, String> {
    let raw: Vec<&str> = element.split('|').collect();
    if raw.len() > max {
        return Err(format!("{what} element `{element}` has too many parts"));
    }
    let mut out = Vec::with_capacity(max);
    for i in 0..max {
        match raw.get(i) {
            Some(p) if !p.is_empty() => out.push(Some(unescape(p)?)),
            _ => out.push(None),
        }
    }
    Ok(out)
}

fn parse_f64(text: &str, what: &str) -> Result<f64, String> {
    let v: f64 = text
        .trim()
        .parse()
        .map_err(|_| format!("{what}: `{text}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{what}: `{text}` is not finite"))
    }
}

fn parse_confidence(level: Option<String>, value: Option<String>) -> Result<Confidence, String> {
    Ok(Confidence {
        level: level
            .map(|l| l.parse::<ConfidenceLevel>().map_err(|e| e.to_string()))
            .transpose()?,
        value: value
            .map(|v| parse_f64(&v, "confidence value"))
            .transpose()?,
    })
}

fn elements(value: &str) -> impl Iterator<Item = &str> {
    value.split(';').filter(|e| !e.is_empty())
}

/// Parses one record line without semantic validation.
pub fn parse_record_line(line: &str) -> Result<StimulusRecord, String> {
    let mut seen = BTreeSet::new();
    let mut key = None;
    let mut rec_fields: Vec<(&str, &str)> = Vec::new();
    for field in line.split('\t') {
        let (name, value) = field
            .split_once('=')
            .ok_or_else(|| format!("field `{field}` lacks `=`"))?;
        if !seen.insert(name) {
            return Err(format!("field `{name}` repeated"));
        }
        if name == "key" {
            key = Some(unescape(value)?.parse::<StimulusId>()?);
        } else {
            rec_fields.push((name, value));
        }
    }
    let key = key.ok_or("missing `key` field")?;
    let mut rec = StimulusRecord::new(key);
    let mut dims: Option<DimensionAnnotation> = None;
    let mut scale: Option<(f64, f64)> = None;
    let mut ctx: Option<ContextRecord> = None;

    for (name, value) in rec_fields {
        let text = || unescape(value);
        match name {
            "sem" => {
                for e in elements(value) {
                    let p = parts(e, 3, "sem")?;
                    let kind = p[0]
                        .as_deref()
                        .ok_or("sem element lacks a kind")?
                        .parse::<SemanticKind>()?;
                    rec.semantics.push(SemanticsAnnotation {
                        kind,
                        concept: p[1].clone(),
                        keyword: p[2].clone(),
                    });
                }
            }
            "cat" => {
                for e in elements(value) {
                    let mut p = parts(e, 4, "cat")?;
                    let confidence = parse_confidence(p[2].take(), p[3].take())?;
                    rec.categories.push(CategoryAnnotation {
                        vocabulary: p[0].take().ok_or("cat element lacks a vocabulary")?,
                        term: p[1].take().ok_or("cat element lacks a term")?,
                        confidence,
                    });
                }
            }
            "dim.scale" => {
                let p = parts(value, 2, "dim.scale")?;
                match (&p[0], &p[1]) {
                    (Some(lo), Some(hi)) => {
                        scale = Some((parse_f64(lo, "scale")?, parse_f64(hi, "scale")?))
                    }
                    _ => return Err("dim.scale needs `min|max`".into()),
                }
            }
            "appraisal" => {
                let mut map = AppraisalAnnotation::new();
                for e in elements(value) {
                    let mut p = parts(e, 2, "appraisal")?;
                    let name = p[0].take().ok_or("appraisal element lacks a name")?;
                    let v = p[1].take().ok_or("appraisal element lacks a value")?;
                    if map
                        .insert(name.clone(), parse_f64(&v, "appraisal")?)
                        .is_some()
                    {
                        return Err(format!("appraisal `{name}` repeated"));
                    }
                }
                rec.appraisals = Some(map);
            }
            "action" => {
                for e in elements(value) {
                    let mut p = parts(e, 3, "action")?;
                    let confidence = parse_confidence(p[1].take(), p[2].take())?;
                    rec.action_tendencies.push(ActionTendencyAnnotation {
                        term: p[0].take().ok_or("action element lacks a term")?,
                        confidence,
                    });
                }
            }
            "sentiment" => {
                for e in elements(value) {
                    let mut p = parts(e, 3, "sentiment")?;
                    let confidence = parse_confidence(p[1].take(), p[2].take())?;
                    let v = p[0].take().ok_or("sentiment element lacks a value")?;
                    rec.sentiments.push(SentimentAnnotation {
                        value: parse_f64(&v, "sentiment")?,
                        confidence,
                    });
                }
            }
            "phys" => {
                for e in elements(value) {
                    let mut p = parts(e, 2, "phys")?;
                    rec.physiology.push(PhysiologyRef {
                        path: p[0].take().ok_or("phys element lacks a path")?,
                        channel: p[1].take(),
                    });
                }
            }
            _ if name.starts_with("dim.") => {
                let d =
                    dims.get_or_insert_with(|| DimensionAnnotation::on_scale(f64::NAN, f64::NAN));
                let attr = &name[4..];
                match attr {
                    "valenceSD" => d.valence_sd = Some(parse_f64(value, name)?),
                    "arousalSD" => d.arousal_sd = Some(parse_f64(value, name)?),
                    "dominanceSD" => d.dominance_sd = Some(parse_f64(value, name)?),
                    "confLevel" => {
                        d.confidence.level = Some(
                            value
                                .parse::<ConfidenceLevel>()
                                .map_err(|e| e.to_string())?,
                        )
                    }
                    "confValue" => d.confidence.value = Some(parse_f64(value, name)?),
                    _ => {
                        let dim = attr
                            .parse::<Dimension>()
                            .ok()
                            .filter(|d| d.as_str() == attr)
                            .ok_or_else(|| format!("unknown field `{name}`"))?;
                        d.values.insert(dim, parse_f64(value, name)?);
                    }
                }
            }
            _ if name.starts_with("ctx.") || name.starts_with("dc.") => {
                let c = ctx.get_or_insert_with(ContextRecord::default);
                let uint = |v: &str| -> Result<u64, String> {
                    v.trim()
                        .parse::<u64>()
                        .map_err(|_| format!("{name}: `{v}` is not a non-negative integer"))
                };
                match name {
                    "ctx.db" => c.db_name = text()?,
                    "ctx.id" => c.id = text()?,
                    "ctx.format" => c.media_format = Some(text()?),
                    "ctx.width" => c.width_px = Some(uint(value)?),
                    "ctx.height" => c.height_px = Some(uint(value)?),
                    "ctx.size" => c.size_bytes = Some(uint(value)?),
                    "ctx.colorDepth" => c.color_depth_bits = Some(uint(value)?),
                    "ctx.length" => c.length_seconds = Some(parse_f64(value, name)?),
                    "ctx.author" => c.author = Some(text()?),
                    "ctx.owner" => c.owner = Some(text()?),
                    "ctx.created" => c.created_at = Some(text()?),
                    "ctx.location" => c.location = Some(text()?),
                    "dc.type" => c.dc_type = Some(text()?),
                    "dc.creator" => c.dc_creator = Some(text()?),
                    "dc.contributor" => c.dc_contributor = Some(text()?),
                    "dc.date" => c.dc_date = Some(text()?),
                    "dc.format" => c.dc_format = Some(text()?),
                    _ => return Err(format!("unknown field `{name}`")),
                }
            }
            _ => return Err(format!("unknown field `{name}`")),
        }
    }

    match (dims, scale) {
        (Some(mut d), Some((lo, hi))) => {
            d.scale_min = lo;
            d.scale_max = hi;
            rec.dimensions = Some(d);
        }
        (Some(_), None) => return Err("dimension values without `dim.scale`".into()),
        (None, Some((lo, hi))) => rec.dimensions = Some(DimensionAnnotation::on_scale(lo, hi)),
        (None, None) => {}
    }
    rec.context = ctx;
    Ok(rec)
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

/// Outcome of checking a whole record file: the records that passed and one
/// error per rejected line.
#[derive(Debug, Clone, Default)]
pub struct RecordCheck {
    pub records: Vec<StimulusRecord>,
    pub errors: Vec<CorpusError>,
}

/// Parses and validates every line, collecting all errors instead of
/// stopping at the first.
pub fn check_corpus_records(
    text: &str,
    taxonomy: &Taxonomy,
    vocabs: &VocabularySet,
) -> RecordCheck {
    let mut check = RecordCheck::default();
    let mut keys = BTreeSet::new();
    for (line, raw) in content_lines(text) {
        let rec = match parse_record_line(raw) {
            Ok(rec) => rec,
            Err(reason) => {
                check.errors.push(CorpusError::Syntax { line, reason });
                continue;
            }
        };
        let mut violations = validate_stimulus(&rec);
        violations.extend(validate_against(&rec, taxonomy, vocabs));
        if let Some(violation) = violations.into_iter().next() {
            check.errors.push(CorpusError::Invalid {
                line,
                key: rec.key.to_string(),
                violation,
            });
            continue;
        }
        if !keys.insert(rec.key.clone()) {
            check.errors.push(CorpusError::DuplicateKey(rec.key));
            continue;
        }
        check.records.push(rec);
    }
    check
}

/// Parses a record file; fails on the first invalid record.
pub fn parse_corpus_records(
    text: &str,
    taxonomy: &Taxonomy,
    vocabs: &VocabularySet,
) -> Result<Vec<StimulusRecord>, CorpusError> {
    let mut check = check_corpus_records(text, taxonomy, vocabs);
    if check.errors.is_empty() {
        Ok(check.records)
    } else {
        Err(check.errors.swap_remove(0))
    }
}

pub const LEGACY_HEADER: [&str; 9] = [
    "id",
    "db",
    "keyword",
    "valence",
    "valenceSD",
    "arousal",
    "arousalSD",
    "dominance",
    "dominanceSD",
];

/// Rating scale of legacy keyword/rating tables.
pub const LEGACY_SCALE: (f64, f64) = (1.0, 9.0);

/// Reads an IAPS-style table: one keyword and up to three mean/SD rating
/// pairs per stimulus, `NA` for missing values.
pub fn parse_legacy_table(text: &str) -> Result<Vec<StimulusRecord>, CorpusError> {
    let mut lines = content_lines(text);
    let Some((header_line, header)) = lines.next() else {
        return Ok(Vec::new());
    };
    let columns: Vec<&str> = header.split('\t').map(str::trim).collect();
    if columns != LEGACY_HEADER {
        return Err(CorpusError::Syntax {
            line: header_line,
            reason: format!("expected header `{}`", LEGACY_HEADER.join("\t")),
        });
    }
    let mut out = Vec::new();
    let mut keys = BTreeSet::new();
    for (line, raw) in lines {
        let cells: Vec<&str> = raw.split('\t').map(str::trim).collect();
        let syntax = |reason: String| CorpusError::Syntax { line, reason };
        if cells.len() != LEGACY_HEADER.len() {
            return Err(syntax(format!(
                "expected {} columns, found {}",
                LEGACY_HEADER.len(),
                cells.len()
            )));
        }
        let rating = |i: usize| -> Result<Option<f64>, CorpusError> {
            let cell = cells[i];
            if cell == "NA" || cell.is_empty() {
                return Ok(None);
            }
            parse_f64(cell, LEGACY_HEADER[i]).map(Some).map_err(syntax)
        };
        let (id, db, keyword) = (cells[0], cells[1], cells[2]);
        let key = StimulusId::new(db, id).map_err(syntax)?;
        if keyword.is_empty() || keyword == "NA" {
            return Err(syntax("missing keyword".into()));
        }
        let mut rec = StimulusRecord::new(key.clone());
        rec.semantics
            .push(SemanticsAnnotation::keyword(SemanticKind::Object, keyword));
        let mut dims = DimensionAnnotation::on_scale(LEGACY_SCALE.0, LEGACY_SCALE.1);
        for (dim, col) in [
            (Dimension::Valence, 3),
            (Dimension::Arousal, 5),
            (Dimension::Dominance, 7),
        ] {
            if let Some(v) = rating(col)? {
                dims.values.insert(dim, v);
            }
        }
        dims.valence_sd = rating(4)?;
        dims.arousal_sd = rating(6)?;
        dims.dominance_sd = rating(8)?;
        if !dims.values.is_empty() {
            rec.dimensions = Some(dims);
        }
        rec.context = Some(ContextRecord::new(db, id));
        if let Some(violation) = validate_stimulus(&rec).into_iter().next() {
            return Err(CorpusError::Invalid {
                line,
                key: key.to_string(),
                violation,
            });
        }
        if !keys.insert(key.clone()) {
            return Err(CorpusError::DuplicateKey(key));
        }
        out.push(rec);
    }
    Ok(out)
}

/// Summary of a keyword expansion pass.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExpansionReport {
    pub added: usize,
    pub mapped: BTreeSet<String>,
    pub unmapped: BTreeSet<String>,
}

/// Adds one concept annotation (same kind) per mapped concept for every
/// keyword-only annotation. Concepts a record already carries under the same
/// kind are not added again, so a second pass adds nothing.
pub fn expand_keywords(
    records: &mut [StimulusRecord],
    mapping: &KeywordMapping,
) -> ExpansionReport {
    let mut report = ExpansionReport::default();
    for rec in records.iter_mut() {
        let mut additions = Vec::new();
        for sem in &rec.semantics {
            let (None, Some(keyword)) = (&sem.concept, &sem.keyword) else {
                continue;
            };
            let Some(concepts) = mapping.lookup(keyword) else {
                report.unmapped.insert(fold_keyword(keyword));
                continue;
            };
            report.mapped.insert(fold_keyword(keyword));
            for concept in concepts {
                let present =
                    rec.semantics.iter().chain(additions.iter()).any(|s| {
                        s.kind == sem.kind && s.concept.as_deref() == Some(concept.as_str())
                    });
                if !present {
                    additions.push(SemanticsAnnotation::concept(sem.kind, concept));
                }
            }
        }
        report.added += additions.len();
        rec.semantics.extend(additions);
    }
    report
}

/// The indexed, append-only set of stimulus records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    records: BTreeMap<StimulusId, StimulusRecord>,
    concept_index: BTreeMap<String, BTreeSet<StimulusId>>,
    keyword_index: BTreeMap<String, BTreeSet<StimulusId>>,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records(
        records: impl IntoIterator<Item = StimulusRecord>,
    ) -> Result<Self, CorpusError> {
        let mut corpus = Corpus::new();
        for rec in records {
            corpus.add(rec)?;
        }
        Ok(corpus)
    }

    pub fn add(&mut self, rec: StimulusRecord) -> Result<(), CorpusError> {
        if let Some(violation) = validate_stimulus(&rec).into_iter().next() {
            return Err(CorpusError::Rejected {
                key: rec.key,
                violation,
            });
        }
        if self.records.contains_key(&rec.key) {
            return Err(CorpusError::DuplicateKey(rec.key));
        }
        Self::index_into(&mut self.concept_index, &mut self.keyword_index, &rec);
        self.records.insert(rec.key.clone(), rec);
        Ok(())
    }

    fn index_into(
        concepts: &mut BTreeMap<String, BTreeSet<StimulusId>>,
        keywords: &mut BTreeMap<String, BTreeSet<StimulusId>>,
        rec: &StimulusRecord,
    ) {
        for c in rec.concepts() {
            concepts
                .entry(c.to_string())
                .or_default()
                .insert(rec.key.clone());
        }
        for k in rec.keywords() {
            keywords
                .entry(fold_keyword(k))
                .or_default()
                .insert(rec.key.clone());
        }
    }

    pub fn get(&self, key: &str) -> Result<&StimulusRecord, CorpusError> {
        key.parse::<StimulusId>()
            .ok()
            .and_then(|k| self.records.get(&k))
            .ok_or_else(|| CorpusError::UnknownKey(key.to_string()))
    }

    pub fn stimuli_by_concept(&self, concept: &str) -> BTreeSet<StimulusId> {
        self.concept_index.get(concept).cloned().unwrap_or_default()
    }

    pub fn stimuli_by_keyword(&self, keyword: &str) -> BTreeSet<StimulusId> {
        self.keyword_index
            .get(&fold_keyword(keyword))
            .cloned()
            .unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records in ascending key order.
    pub fn records(&self) -> impl Iterator<Item = &StimulusRecord> {
        self.records.values()
    }

    pub fn distinct_concepts(&self) -> usize {
        self.concept_index.len()
    }

    pub fn distinct_keywords(&self) -> usize {
        self.keyword_index.len()
    }

    /// True when both indices equal a from-scratch rebuild.
    pub fn indices_consistent(&self) -> bool {
        let mut concepts = BTreeMap::new();
        let mut keywords = BTreeMap::new();
        for rec in self.records.values() {
            Self::index_into(&mut concepts, &mut keywords, rec);
        }
        concepts == self.concept_index && keywords == self.keyword_index
    }

    pub fn to_text(&self) -> String {
        records_to_text(self.records.values())
    }
}
