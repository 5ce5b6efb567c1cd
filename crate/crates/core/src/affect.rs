//! Emotion annotations: categorical vocabularies, dimensional values with
//! their source scale, appraisal / action tendency / sentiment annotations,
//! and the equivalence closure over vocabulary terms.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const BIG_SIX: &str = "BigSix";

/// Terms of the built-in BigSix vocabulary.
pub const BIG_SIX_TERMS: [&str; 6] = [
    "anger",
    "disgust",
    "fear",
    "happiness",
    "sadness",
    "surprise",
];

/// Primary emotions every BigSix vocabulary must contain.
const BIG_SIX_REQUIRED: [&str; 5] = ["anger", "disgust", "fear", "happiness", "sadness"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AffectError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("vocabulary `{0}` declared more than once")]
    DuplicateVocabulary(String),
    #[error("vocabulary `{0}` has no terms")]
    EmptyVocabulary(String),
    #[error("vocabulary `{vocabulary}` repeats term `{term}`")]
    DuplicateTerm { vocabulary: String, term: String },
    #[error("BigSix vocabulary lacks required term `{0}`")]
    MissingPrimaryEmotion(String),
    #[error("unknown vocabulary `{0}`")]
    UnknownVocabulary(String),
    #[error("term `{term}` is not in vocabulary `{vocabulary}`")]
    TermNotInVocabulary { vocabulary: String, term: String },
    #[error("confidence value {0} outside [0, 1]")]
    ConfidenceOutOfRange(f64),
    #[error("unknown confidence level `{0}`")]
    UnknownConfidenceLevel(String),
    #[error("{what} value {value} outside [0, 1]")]
    UnitIntervalViolation { what: String, value: f64 },
    #[error("invalid scale [{min}, {max}]")]
    InvalidScale { min: f64, max: f64 },
    #[error("{dimension} = {value} outside scale [{min}, {max}]")]
    DimensionOutOfScale {
        dimension: Dimension,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("{0} standard deviation is negative")]
    NegativeDeviation(Dimension),
    #[error("dimension annotation has no values")]
    NoDimensions,
    #[error("empty {0}")]
    EmptyField(&'static str),
    #[error("malformed qualified term `{0}` (expected vocab.term)")]
    MalformedQualifiedTerm(String),
}

pub type Result<T> = std::result::Result<T, AffectError>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    pub id: String,
    pub terms: BTreeSet<String>,
}

impl Vocabulary {
    pub fn new<I, S>(id: &str, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        if id.is_empty() {
            return Err(AffectError::EmptyField("vocabulary id"));
        }
        let mut set = BTreeSet::new();
        for term in terms {
            let term = term.into();
            if term.is_empty() {
                return Err(AffectError::EmptyField("term"));
            }
            if !set.insert(term.clone()) {
                return Err(AffectError::DuplicateTerm {
                    vocabulary: id.to_string(),
                    term,
                });
            }
        }
        if set.is_empty() {
            return Err(AffectError::EmptyVocabulary(id.to_string()));
        }
        if id == BIG_SIX {
            for required in BIG_SIX_REQUIRED {
                if !set.contains(required) {
                    return Err(AffectError::MissingPrimaryEmotion(required.to_string()));
                }
            }
        }
        Ok(Vocabulary {
            id: id.to_string(),
            terms: set,
        })
    }

    pub fn big_six() -> Self {
        Vocabulary::new(BIG_SIX, BIG_SIX_TERMS).expect("built-in vocabulary is valid")
    }

    pub fn contains(&self, term: &str) -> bool {
        self.terms.contains(term)
    }
}

/// Vocabularies keyed by id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabularySet {
    vocabularies: BTreeMap<String, Vocabulary>,
}

impl Default for VocabularySet {
    fn default() -> Self {
        let mut vocabularies = BTreeMap::new();
        vocabularies.insert(BIG_SIX.to_string(), Vocabulary::big_six());
        VocabularySet { vocabularies }
    }
}

impl VocabularySet {
    /// A set holding only the built-in BigSix.
    pub fn with_defaults() -> Self {
        Self::default()
    }

    pub fn get(&self, id: &str) -> Option<&Vocabulary> {
        self.vocabularies.get(id)
    }

    pub fn len(&self) -> usize {
        self.vocabularies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocabularies.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vocabulary> {
        self.vocabularies.values()
    }

    pub fn contains_term(&self, term: &QualifiedTerm) -> bool {
        self.get(&term.vocabulary)
            .is_some_and(|v| v.contains(&term.term))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for vocab in self.vocabularies.values() {
            for term in &vocab.terms {
                out.push_str(&vocab.id);
                out.push('\t');
                out.push_str(term);
                out.push('\n');
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

/// Reads `vocab<TAB>term` lines. Each vocabulary's lines must be contiguous;
/// an id that reappears after another vocabulary is a duplicate declaration.
/// The built-in BigSix is used unless the file declares its own.
pub fn load_vocabularies(text: &str) -> Result<VocabularySet> {
    let mut blocks: Vec<(String, Vec<String>)> = Vec::new();
    for (line_no, line) in content_lines(text) {
        let fields: Vec<&str> = line.split('\t').collect();
        let (id, term) = match fields.as_slice() {
            [id, term] => (id.trim(), term.trim()),
            [id] => (id.trim(), ""),
            _ => {
                return Err(AffectError::Malformed {
                    line: line_no,
                    reason: "expected `vocab<TAB>term`".into(),
                })
            }
        };
        if id.is_empty() {
            return Err(AffectError::Malformed {
                line: line_no,
                reason: "empty vocabulary id".into(),
            });
        }
        if term.is_empty() {
            return Err(AffectError::EmptyVocabulary(id.to_string()));
        }
        match blocks.last_mut() {
            Some((last, terms)) if last == id => terms.push(term.to_string()),
            _ => {
                if blocks.iter().any(|(b, _)| b == id) {
                    return Err(AffectError::DuplicateVocabulary(id.to_string()));
                }
                blocks.push((id.to_string(), vec![term.to_string()]));
            }
        }
    }
    let mut set = VocabularySet::with_defaults();
    for (id, terms) in blocks {
        let vocab = Vocabulary::new(&id, terms)?;
        set.vocabularies.insert(id, vocab);
    }
    Ok(set)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ConfidenceLevel {
    VeryHigh,
    High,
    Average,
    Low,
    VeryLow,
}

impl ConfidenceLevel {
    pub const ALL: [ConfidenceLevel; 5] = [
        ConfidenceLevel::VeryHigh,
        ConfidenceLevel::High,
        ConfidenceLevel::Average,
        ConfidenceLevel::Low,
        ConfidenceLevel::VeryLow,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ConfidenceLevel::VeryHigh => "VeryHigh",
            ConfidenceLevel::High => "High",
            ConfidenceLevel::Average => "Average",
            ConfidenceLevel::Low => "Low",
            ConfidenceLevel::VeryLow => "VeryLow",
        }
    }
}

impl fmt::Display for ConfidenceLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConfidenceLevel {
    type Err = AffectError;

    fn from_str(s: &str) -> Result<Self> {
        ConfidenceLevel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| AffectError::UnknownConfidenceLevel(s.to_string()))
    }
}

/// Expert confidence. Both parts are optional and independent; absence
/// means unknown.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Confidence {
    pub level: Option<ConfidenceLevel>,
    pub value: Option<f64>,
}

impl Confidence {
    pub fn validate(&self) -> Result<()> {
        match self.value {
            Some(v) if !(0.0..=1.0).contains(&v) => Err(AffectError::ConfidenceOutOfRange(v)),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryAnnotation {
    pub vocabulary: String,
    pub term: String,
    pub confidence: Confidence,
}

impl CategoryAnnotation {
    pub fn new(vocabulary: &str, term: &str) -> Self {
        CategoryAnnotation {
            vocabulary: vocabulary.to_string(),
            term: term.to_string(),
            confidence: Confidence::default(),
        }
    }

    pub fn qualified(&self) -> QualifiedTerm {
        QualifiedTerm::new(&self.vocabulary, &self.term)
    }
}

/// Checks vocabulary membership and confidence ranges.
pub fn validate_category(ann: &CategoryAnnotation, vocabs: &VocabularySet) -> Result<()> {
    let vocab = vocabs
        .get(&ann.vocabulary)
        .ok_or_else(|| AffectError::UnknownVocabulary(ann.vocabulary.clone()))?;
    if !vocab.contains(&ann.term) {
        return Err(AffectError::TermNotInVocabulary {
            vocabulary: ann.vocabulary.clone(),
            term: ann.term.clone(),
        });
    }
    ann.confidence.validate()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Dimension {
    Valence,
    Arousal,
    Dominance,
    Potency,
    Unpredictability,
    Intensity,
}

impl Dimension {
    pub const ALL: [Dimension; 6] = [
        Dimension::Valence,
        Dimension::Arousal,
        Dimension::Dominance,
        Dimension::Potency,
        Dimension::Unpredictability,
        Dimension::Intensity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Valence => "valence",
            Dimension::Arousal => "arousal",
            Dimension::Dominance => "dominance",
            Dimension::Potency => "potency",
            Dimension::Unpredictability => "unpredictability",
            Dimension::Intensity => "intensity",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dimension {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Dimension::ALL
            .into_iter()
            .find(|d| d.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown dimension `{s}`"))
    }
}

/// Dimensional affect on the source database's scale (e.g. 1..9 for IAPS).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionAnnotation {
    pub values: BTreeMap<Dimension, f64>,
    pub valence_sd: Option<f64>,
    pub arousal_sd: Option<f64>,
    pub dominance_sd: Option<f64>,
    pub scale_min: f64,
    pub scale_max: f64,
    pub confidence: Confidence,
}

impl DimensionAnnotation {
    pub fn on_scale(scale_min: f64, scale_max: f64) -> Self {
        DimensionAnnotation {
            values: BTreeMap::new(),
            valence_sd: None,
            arousal_sd: None,
            dominance_sd: None,
            scale_min,
            scale_max,
            confidence: Confidence::default(),
        }
    }

    pub fn with(mut self, dimension: Dimension, value: f64) -> Self {
        self.values.insert(dimension, value);
        self
    }

    pub fn get(&self, dimension: Dimension) -> Option<f64> {
        self.values.get(&dimension).copied()
    }

    pub fn validate(&self) -> Result<()> {
        let (min, max) = (self.scale_min, self.scale_max);
        if !(min.is_finite() && max.is_finite() && min < max) {
            return Err(AffectError::InvalidScale { min, max });
        }
        if self.values.is_empty() {
            return Err(AffectError::NoDimensions);
        }
        for (&dimension, &value) in &self.values {
            if !(min..=max).contains(&value) {
                return Err(AffectError::DimensionOutOfScale {
                    dimension,
                    value,
                    min,
                    max,
                });
            }
        }
        for (dimension, sd) in [
            (Dimension::Valence, self.valence_sd),
            (Dimension::Arousal, self.arousal_sd),
            (Dimension::Dominance, self.dominance_sd),
        ] {
            if let Some(sd) = sd {
                if !(sd >= 0.0 && sd.is_finite()) {
                    return Err(AffectError::NegativeDeviation(dimension));
                }
            }
        }
        self.confidence.validate()
    }
}

/// Maps every present value onto [0, 1] with `(v - min) / (max - min)`.
pub fn normalize_dimension(ann: &DimensionAnnotation) -> Result<BTreeMap<Dimension, f64>> {
    let span = ann.scale_max - ann.scale_min;
    if !(span > 0.0 && span.is_finite()) {
        return Err(AffectError::InvalidScale {
            min: ann.scale_min,
            max: ann.scale_max,
        });
    }
    Ok(ann
        .values
        .iter()
        .map(|(&d, &v)| (d, (v - ann.scale_min) / span))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionTendencyAnnotation {
    pub term: String,
    pub confidence: Confidence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentAnnotation {
    pub value: f64,
    pub confidence: Confidence,
}

/// Named appraisal checks, each valued in [0, 1].
pub type AppraisalAnnotation = BTreeMap<String, f64>;

pub fn validate_appraisal(appraisal: &AppraisalAnnotation) -> Result<()> {
    for (name, &value) in appraisal {
        if name.is_empty() {
            return Err(AffectError::EmptyField("appraisal name"));
        }
        if !(0.0..=1.0).contains(&value) {
            return Err(AffectError::UnitIntervalViolation {
                what: format!("appraisal `{name}`"),
                value,
            });
        }
    }
    Ok(())
}

impl ActionTendencyAnnotation {
    pub fn validate(&self) -> Result<()> {
        if self.term.is_empty() {
            return Err(AffectError::EmptyField("action tendency"));
        }
        self.confidence.validate()
    }
}

impl SentimentAnnotation {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.value) {
            return Err(AffectError::UnitIntervalViolation {
                what: "sentiment".into(),
                value: self.value,
            });
        }
        self.confidence.validate()
    }
}

/// A vocabulary term qualified by its vocabulary, written `vocab.term`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct QualifiedTerm {
    pub vocabulary: String,
    pub term: String,
}

impl QualifiedTerm {
    pub fn new(vocabulary: &str, term: &str) -> Self {
        QualifiedTerm {
            vocabulary: vocabulary.to_string(),
            term: term.to_string(),
        }
    }
}

impl fmt::Display for QualifiedTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.vocabulary, self.term)
    }
}

impl FromStr for QualifiedTerm {
    type Err = AffectError;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once('.') {
            Some((v, t)) if !v.is_empty() && !t.is_empty() && !t.contains('.') => {
                Ok(QualifiedTerm::new(v, t))
            }
            _ => Err(AffectError::MalformedQualifiedTerm(s.to_string())),
        }
    }
}

/// `a ≡ b` between two vocabulary terms.
pub type EquivalenceAxiom = (QualifiedTerm, QualifiedTerm);

/// Reads `vocabA<TAB>termA<TAB>vocabB<TAB>termB` lines.
pub fn parse_axioms(text: &str) -> Result<Vec<EquivalenceAxiom>> {
    let mut out = Vec::new();
    for (line_no, line) in content_lines(text) {
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        match fields.as_slice() {
            [va, ta, vb, tb] if fields.iter().all(|f| !f.is_empty()) => {
                out.push((QualifiedTerm::new(va, ta), QualifiedTerm::new(vb, tb)));
            }
            _ => {
                return Err(AffectError::Malformed {
                    line: line_no,
                    reason: "expected `vocabA<TAB>termA<TAB>vocabB<TAB>termB`".into(),
                })
            }
        }
    }
    Ok(out)
}

pub fn axioms_to_text(axioms: &[EquivalenceAxiom]) -> String {
    axioms
        .iter()
        .map(|(a, b)| {
            format!(
                "{}\t{}\t{}\t{}\n",
                a.vocabulary, a.term, b.vocabulary, b.term
            )
        })
        .collect()
}

/// The smallest equivalence relation containing a set of axioms. Terms that
/// never appear in an axiom are singleton classes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EquivalenceClosure {
    class_of: BTreeMap<QualifiedTerm, usize>,
    classes: Vec<BTreeSet<QualifiedTerm>>,
}

struct DisjointSets {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// Unions the two sides of every axiom.
pub fn build_equivalence_closure(axioms: &[EquivalenceAxiom]) -> EquivalenceClosure {
    let terms: BTreeSet<&QualifiedTerm> = axioms.iter().flat_map(|(a, b)| [a, b]).collect();
    let ids: BTreeMap<&QualifiedTerm, usize> =
        terms.iter().enumerate().map(|(i, &t)| (t, i)).collect();
    let mut sets = DisjointSets::new(ids.len());
    for (a, b) in axioms {
        sets.union(ids[a], ids[b]);
    }

    // classes numbered by their smallest member so the layout is order independent
    let mut root_to_class: BTreeMap<usize, usize> = BTreeMap::new();
    let mut closure = EquivalenceClosure::default();
    for (&term, &id) in &ids {
        let root = sets.find(id);
        let class = *root_to_class.entry(root).or_insert_with(|| {
            closure.classes.push(BTreeSet::new());
            closure.classes.len() - 1
        });
        closure.classes[class].insert(term.clone());
        closure.class_of.insert(term.clone(), class);
    }
    closure
}

impl EquivalenceClosure {
    pub fn are_equivalent(&self, a: &QualifiedTerm, b: &QualifiedTerm) -> bool {
        if a == b {
            return true;
        }
        match (self.class_of.get(a), self.class_of.get(b)) {
            (Some(x), Some(y)) => x == y,
            _ => false,
        }
    }

    /// Every member of `term`'s class, including `term`.
    pub fn class_of(&self, term: &QualifiedTerm) -> BTreeSet<QualifiedTerm> {
        match self.class_of.get(term) {
            Some(&c) => self.classes[c].clone(),
            None => BTreeSet::from([term.clone()]),
        }
    }

    /// Non-singleton classes in a canonical order.
    pub fn classes(&self) -> &[BTreeSet<QualifiedTerm>] {
        &self.classes
    }
}
