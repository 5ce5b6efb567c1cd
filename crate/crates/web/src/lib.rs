//! WebAssembly bindings behind `www/index.html`. Every export takes plain
//! text and returns a JSON string, so the same functions are exercised by
//! native tests.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use stimkb::affect::{Dimension, VocabularySet};
use stimkb::corpus::parse_corpus_records;
use stimkb::eval::{lift_curve_from_flags, select_threshold};
use stimkb::similarity::{relatedness, Measure, MeasureParams, Operand};
use stimkb::taxonomy::{parse_taxonomy, Taxonomy};

const DEMO_TAXONOMY: &str = include_str!("../../../fixtures/taxonomy.tsv");
const DEMO_CORPUS: &str = include_str!("../../../fixtures/corpus.rec");

fn error(message: impl std::fmt::Display) -> String {
    json!({ "error": message.to_string() }).to_string()
}

fn taxonomy(text: &str) -> Result<Taxonomy, String> {
    parse_taxonomy(text).map_err(|e| format!("taxonomy: {e}"))
}

/// Sample inputs for the page: `{taxonomy, corpus, concepts}`.
#[wasm_bindgen]
pub fn demo_workspace() -> String {
    let concepts = parse_taxonomy(DEMO_TAXONOMY)
        .map(|g| {
            g.concepts()
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
        })
        .unwrap_or_default();
    json!({ "taxonomy": DEMO_TAXONOMY, "corpus": DEMO_CORPUS, "concepts": concepts }).to_string()
}

/// Scores a concept pair under every measure. Lexical measures compare the
/// lower-cased concept names.
#[wasm_bindgen]
pub fn compare_measures(taxonomy_text: &str, a: &str, b: &str) -> String {
    let g = match taxonomy(taxonomy_text) {
        Ok(g) => g,
        Err(e) => return error(e),
    };
    let params = MeasureParams::default();
    let (ka, kb) = (a.to_lowercase(), b.to_lowercase());
    let mut rows = Vec::new();
    for m in Measure::ALL {
        let (x, y) = if m.is_lexical() {
            (Operand::Keyword(&ka), Operand::Keyword(&kb))
        } else {
            (Operand::Concept(a), Operand::Concept(b))
        };
        match relatedness(m, &g, &params, x, y) {
            Ok(score) => rows.push(json!({ "measure": m.name(), "score": score })),
            Err(e) => return error(e),
        }
    }
    let structure = (|| -> Result<Value, String> {
        Ok(json!({
            "lcs": g.lcs(a, b).map_err(|e| e.to_string())?,
            "path": g.shortest_path(a, b).map_err(|e| e.to_string())?,
            "depthA": g.depth(a).map_err(|e| e.to_string())?,
            "depthB": g.depth(b).map_err(|e| e.to_string())?,
            "maxDepth": g.max_depth(),
        }))
    })();
    match structure {
        Ok(s) => json!({ "scores": rows, "structure": s }).to_string(),
        Err(e) => error(e),
    }
}

/// Valence/arousal points of every rated record, each flagged by whether it
/// falls inside the box.
#[wasm_bindgen]
pub fn box_filter(
    taxonomy_text: &str,
    corpus_text: &str,
    valence_lo: f64,
    valence_hi: f64,
    arousal_lo: f64,
    arousal_hi: f64,
) -> String {
    let g = match taxonomy(taxonomy_text) {
        Ok(g) => g,
        Err(e) => return error(e),
    };
    let records = match parse_corpus_records(corpus_text, &g, &VocabularySet::with_defaults()) {
        Ok(r) => r,
        Err(e) => return error(format!("corpus: {e}")),
    };
    let mut points = Vec::new();
    for rec in &records {
        let Some(dims) = &rec.dimensions else {
            continue;
        };
        let (Some(v), Some(a)) = (dims.get(Dimension::Valence), dims.get(Dimension::Arousal))
        else {
            continue;
        };
        let inside =
            (valence_lo..=valence_hi).contains(&v) && (arousal_lo..=arousal_hi).contains(&a);
        points.push(json!({
            "stimulus": rec.key.as_str(),
            "valence": v,
            "arousal": a,
            "scale": [dims.scale_min, dims.scale_max],
            "inside": inside,
        }));
    }
    let matched = points.iter().filter(|p| p["inside"] == true).count();
    json!({ "points": points, "matched": matched, "unrated": records.len() - points.len() })
        .to_string()
}

/// Lift curve of a relevance pattern such as `"TFTF"` (also `1`/`0`,
/// whitespace ignored), with the selected threshold and its precision.
#[wasm_bindgen]
pub fn lift_curve(pattern: &str) -> String {
    let mut flags = Vec::new();
    for c in pattern.chars().filter(|c| !c.is_whitespace() && *c != ',') {
        match c {
            'T' | 't' | '1' => flags.push(true),
            'F' | 'f' | '0' => flags.push(false),
            other => return error(format!("unexpected `{other}`; use T/F or 1/0")),
        }
    }
    let curve = match lift_curve_from_flags(&flags) {
        Ok(c) => c,
        Err(e) => return error(e),
    };
    let t = select_threshold(&curve).expect("non-empty curve");
    let hits = flags[..t].iter().filter(|&&r| r).count();
    json!({
        "curve": curve,
        "threshold": t,
        "precision": hits as f64 / t as f64,
        "relevant": flags.iter().filter(|&&r| r).count(),
    })
    .to_string()
}
