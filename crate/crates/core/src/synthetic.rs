//! Seeded generator for evaluation workspaces with planted relevance.
//!
//! Concept names are built from a small syllable set, so unrelated names
//! often look alike. Each stimulus gets one concept and one keyword that is
//! the concept name, an unrelated alias, or the name with a typo. A
//! stimulus is relevant to a query concept when its own concept lies within
//! `relevance_radius` edges of it.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::affect::{Dimension, DimensionAnnotation};
use crate::corpus::{
    records_to_text, Corpus, SemanticKind, SemanticsAnnotation, StimulusId, StimulusRecord,
};
use crate::eval::{eval_queries_to_text, EvalQuery, RelevanceJudgments};
use crate::taxonomy::Taxonomy;

const SYLLABLES: [&str; 12] = [
    "ka", "lo", "mi", "ra", "te", "su", "na", "ve", "do", "ri", "pa", "zo",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub concepts: usize,
    pub stimuli: usize,
    pub queries: usize,
    /// Probability that a keyword is the concept name itself.
    pub exact_rate: f64,
    /// Probability that a keyword is an unrelated alias; the rest are typos.
    pub alias_rate: f64,
    pub relevance_radius: u32,
    pub candidates: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            seed: 2024,
            concepts: 50,
            stimuli: 100,
            queries: 24,
            exact_rate: 0.4,
            alias_rate: 0.3,
            relevance_radius: 1,
            candidates: 60,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticWorkspace {
    pub taxonomy: Taxonomy,
    pub corpus: Corpus,
    pub queries: Vec<EvalQuery>,
    pub judgments: RelevanceJudgments,
}

fn syllable_word(rng: &mut ChaCha8Rng, min: usize, max: usize) -> String {
    let n = rng.gen_range(min..=max);
    (0..n).map(|_| *SYLLABLES.choose(rng).unwrap()).collect()
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(first) => first.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn typo(rng: &mut ChaCha8Rng, word: &str) -> String {
    let mut chars: Vec<char> = word.chars().collect();
    let i = rng.gen_range(0..chars.len());
    let replacement = loop {
        let c = (b'a' + rng.gen_range(0..26u8)) as char;
        if c != chars[i] {
            break c;
        }
    };
    chars[i] = replacement;
    chars.into_iter().collect()
}

pub fn generate(config: &SyntheticConfig) -> SyntheticWorkspace {
    assert!(
        config.concepts >= 2 && config.stimuli >= 1,
        "degenerate configuration"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut names: Vec<String> = Vec::with_capacity(config.concepts);
    let mut used = BTreeSet::new();
    while names.len() < config.concepts {
        let name = capitalize(&syllable_word(&mut rng, 2, 3));
        if used.insert(name.clone()) {
            names.push(name);
        }
    }
    // random recursive tree rooted at names[0]
    let edges: Vec<(String, String)> = (1..names.len())
        .map(|i| (names[i].clone(), names[rng.gen_range(0..i)].clone()))
        .collect();
    let taxonomy = Taxonomy::from_edges(edges.iter().map(|(c, p)| (c.as_str(), p.as_str())))
        .expect("generated tree is acyclic");

    let mut records = Vec::with_capacity(config.stimuli);
    let mut concept_of = Vec::with_capacity(config.stimuli);
    for i in 0..config.stimuli {
        let concept = names[rng.gen_range(0..names.len())].clone();
        let lower = concept.to_lowercase();
        let roll: f64 = rng.gen();
        let keyword = if roll < config.exact_rate {
            lower
        } else if roll < config.exact_rate + config.alias_rate {
            syllable_word(&mut rng, 2, 3)
        } else {
            typo(&mut rng, &lower)
        };
        let key = StimulusId::new("SYN", &format!("{:04}", i + 1)).expect("valid key");
        let mut rec = StimulusRecord::new(key);
        rec.semantics.push(SemanticsAnnotation {
            kind: SemanticKind::Object,
            concept: Some(concept.clone()),
            keyword: Some(keyword),
        });
        let valence = (rng.gen_range(100..=900) as f64) / 100.0;
        let arousal = (rng.gen_range(100..=900) as f64) / 100.0;
        rec.dimensions = Some(
            DimensionAnnotation::on_scale(1.0, 9.0)
                .with(Dimension::Valence, valence)
                .with(Dimension::Arousal, arousal),
        );
        concept_of.push(concept);
        records.push(rec);
    }

    let annotated: BTreeSet<&String> = concept_of.iter().collect();
    let mut pool: Vec<&String> = annotated.into_iter().collect();
    pool.shuffle(&mut rng);
    pool.truncate(config.queries);
    pool.sort();

    let mut queries = Vec::new();
    let mut judgments = RelevanceJudgments::new();
    for (qi, concept) in pool.iter().enumerate() {
        let id = format!("q{:02}", qi + 1);
        for (rec, c) in records.iter().zip(&concept_of) {
            let d = taxonomy.shortest_path(c, concept).expect("known concepts");
            judgments.insert(&id, rec.key.clone(), d <= config.relevance_radius);
        }
        queries.push(EvalQuery {
            id,
            keyword: Some(concept.to_lowercase()),
            concept: Some((*concept).clone()),
        });
    }

    SyntheticWorkspace {
        taxonomy,
        corpus: Corpus::from_records(records).expect("generated keys are unique"),
        queries,
        judgments,
    }
}

impl SyntheticWorkspace {
    /// Writes the workspace files plus a manifest into `dir` and returns the
    /// manifest path.
    pub fn write_to(&self, dir: &Path, seed: u64, candidates: usize) -> std::io::Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("taxonomy.tsv"), self.taxonomy.to_text())?;
        std::fs::write(
            dir.join("corpus.rec"),
            records_to_text(self.corpus.records()),
        )?;
        std::fs::write(dir.join("queries.tsv"), eval_queries_to_text(&self.queries))?;
        std::fs::write(dir.join("judgments.tsv"), self.judgments.to_text())?;
        let manifest = dir.join("manifest.kv");
        std::fs::write(
            &manifest,
            format!(
                "taxonomy = taxonomy.tsv\ncorpus = corpus.rec\nqueries = queries.tsv\n\
                 judgments = judgments.tsv\nseed = {seed}\ncandidates = {candidates}\n"
            ),
        )?;
        Ok(manifest)
    }
}
