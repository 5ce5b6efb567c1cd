//! Relatedness measures. Every measure returns a score in [0, 1] that is 1
//! exactly when both operands are equal.
//!
//! Lexical measures (inclusion, Levenshtein) compare case-folded keyword
//! strings. Taxonomy measures (path length, Wu-Palmer, Leacock-Chodorow, Li)
//! compare concepts of one [`Taxonomy`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::{fold_keyword, Taxonomy, TaxonomyError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimilarityError {
    #[error("empty string operand")]
    EmptyOperand,
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error("measure {measure} cannot compare {operand} operands")]
    OperandMismatch {
        measure: Measure,
        operand: &'static str,
    },
    #[error(
        "unknown measure `{0}` (expected inclusion, levenshtein, pathlen, wupalmer, lch or li)"
    )]
    UnknownMeasure(String),
}

pub type Result<T> = std::result::Result<T, SimilarityError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Measure {
    #[serde(rename = "inclusion")]
    Inclusion,
    #[serde(rename = "levenshtein")]
    Levenshtein,
    #[serde(rename = "pathlen")]
    PathLength,
    #[serde(rename = "wupalmer")]
    WuPalmer,
    #[serde(rename = "lch")]
    LeacockChodorow,
    #[serde(rename = "li")]
    Li,
}

impl Measure {
    pub const ALL: [Measure; 6] = [
        Measure::Inclusion,
        Measure::Levenshtein,
        Measure::PathLength,
        Measure::WuPalmer,
        Measure::LeacockChodorow,
        Measure::Li,
    ];

    /// Name accepted on the command line and in queries.
    pub fn name(self) -> &'static str {
        match self {
            Measure::Inclusion => "inclusion",
            Measure::Levenshtein => "levenshtein",
            Measure::PathLength => "pathlen",
            Measure::WuPalmer => "wupalmer",
            Measure::LeacockChodorow => "lch",
            Measure::Li => "li",
        }
    }

    pub fn is_lexical(self) -> bool {
        matches!(self, Measure::Inclusion | Measure::Levenshtein)
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Measure {
    type Err = SimilarityError;

    fn from_str(s: &str) -> Result<Self> {
        Measure::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| SimilarityError::UnknownMeasure(s.to_string()))
    }
}

/// Tunable constants of the taxonomy measures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureParams {
    /// Li path-length decay.
    pub li_alpha: f64,
    /// Li depth scaling.
    pub li_beta: f64,
    /// Path length substituted for zero in Leacock-Chodorow.
    pub lch_zero_distance: f64,
}

impl Default for MeasureParams {
    fn default() -> Self {
        MeasureParams {
            li_alpha: 0.2,
            li_beta: 0.6,
            lch_zero_distance: 0.5,
        }
    }
}

fn folded_chars(s: &str) -> Result<Vec<char>> {
    if s.is_empty() {
        return Err(SimilarityError::EmptyOperand);
    }
    Ok(fold_keyword(s).chars().collect())
}

/// 1 for equal strings, `len(shorter) / len(longer)` when one contains the
/// other, 0 otherwise. Lengths count characters after case folding.
pub fn inclusion_rel(a: &str, b: &str) -> Result<f64> {
    let (a, b) = (folded_chars(a)?, folded_chars(b)?);
    let (short, long) = if a.len() <= b.len() {
        (&a, &b)
    } else {
        (&b, &a)
    };
    if short == long {
        return Ok(1.0);
    }
    let contained = long.windows(short.len()).any(|w| w == short.as_slice());
    Ok(if contained {
        short.len() as f64 / long.len() as f64
    } else {
        0.0
    })
}

/// Unit-cost edit distance over characters.
pub fn edit_distance(a: &[char], b: &[char]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let substitute = prev[j] + usize::from(ca != cb);
            cur[j + 1] = substitute.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `1 - distance / max(len)` on case-folded strings.
pub fn levenshtein_rel(a: &str, b: &str) -> Result<f64> {
    let (a, b) = (folded_chars(a)?, folded_chars(b)?);
    let longest = a.len().max(b.len());
    Ok(1.0 - edit_distance(&a, &b) as f64 / longest as f64)
}

/// `1 / (1 + shortest path)`.
pub fn path_length_rel(g: &Taxonomy, a: &str, b: &str) -> Result<f64> {
    let d = g.shortest_path(a, b)?;
    Ok(1.0 / (1.0 + f64::from(d)))
}

/// `2·h / (n_a + n_b + 2·h)` with `h = depth(lcs)` and `n_x` the shortest
/// upward distance from `x` to the lcs. On trees this equals
/// `2·depth(lcs) / (depth(a) + depth(b))`.
pub fn wu_palmer_rel(g: &Taxonomy, a: &str, b: &str) -> Result<f64> {
    let lcs = g.lcs(a, b)?;
    let h = f64::from(g.depth(lcs)?);
    let up = |x: &str| -> Result<f64> {
        let d = g
            .upward_distance(x, lcs)?
            .expect("lcs subsumes both operands");
        Ok(f64::from(d))
    };
    let (na, nb) = (up(a)?, up(b)?);
    Ok(2.0 * h / (na + nb + 2.0 * h))
}

/// `-ln(max(d, ε) / 2D)` divided by its value at `d = 0`, where `D` is the
/// taxonomy's maximum depth.
pub fn leacock_chodorow_rel(g: &Taxonomy, a: &str, b: &str, params: &MeasureParams) -> Result<f64> {
    let d = f64::from(g.shortest_path(a, b)?);
    let two_d = 2.0 * f64::from(g.max_depth());
    let eps = params.lch_zero_distance;
    let raw = -(d.max(eps) / two_d).ln();
    let norm = -(eps / two_d).ln();
    Ok((raw / norm).clamp(0.0, 1.0))
}

/// `e^(-α·d) · tanh(β·h)` divided by `tanh(β·m)`, with `d` the shortest path,
/// `h` the lcs depth and `m = max(depth(a), depth(b), h)`.
pub fn li_rel(g: &Taxonomy, a: &str, b: &str, params: &MeasureParams) -> Result<f64> {
    let d = f64::from(g.shortest_path(a, b)?);
    let h = f64::from(g.depth(g.lcs(a, b)?)?);
    let m = f64::from(g.depth(a)?.max(g.depth(b)?)).max(h);
    let beta = params.li_beta;
    let raw = (-params.li_alpha * d).exp() * (beta * h).tanh();
    Ok((raw / (beta * m).tanh()).clamp(0.0, 1.0))
}

/// Operand of [`relatedness`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operand<'a> {
    Keyword(&'a str),
    Concept(&'a str),
}

impl Operand<'_> {
    fn kind(&self) -> &'static str {
        match self {
            Operand::Keyword(_) => "keyword",
            Operand::Concept(_) => "concept",
        }
    }
}

/// Dispatches to the selected measure. Lexical measures need two keywords,
/// taxonomy measures two concepts.
pub fn relatedness(
    measure: Measure,
    g: &Taxonomy,
    params: &MeasureParams,
    x: Operand<'_>,
    y: Operand<'_>,
) -> Result<f64> {
    let mismatch = |op: &Operand<'_>| SimilarityError::OperandMismatch {
        measure,
        operand: op.kind(),
    };
    if measure.is_lexical() {
        let (Operand::Keyword(a), Operand::Keyword(b)) = (x, y) else {
            return Err(mismatch(if matches!(x, Operand::Keyword(_)) {
                &y
            } else {
                &x
            }));
        };
        return match measure {
            Measure::Inclusion => inclusion_rel(a, b),
            _ => levenshtein_rel(a, b),
        };
    }
    let (Operand::Concept(a), Operand::Concept(b)) = (x, y) else {
        return Err(mismatch(if matches!(x, Operand::Concept(_)) {
            &y
        } else {
            &x
        }));
    };
    match measure {
        Measure::PathLength => path_length_rel(g, a, b),
        Measure::WuPalmer => wu_palmer_rel(g, a, b),
        Measure::LeacockChodorow => leacock_chodorow_rel(g, a, b, params),
        Measure::Li => li_rel(g, a, b, params),
        Measure::Inclusion | Measure::Levenshtein => unreachable!(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::parse_taxonomy;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    fn animals() -> Taxonomy {
        parse_taxonomy("Animal\tEntity\nPlant\tEntity\nDog\tAnimal\nCat\tAnimal\n").unwrap()
    }

    #[test]
    fn measure_names() {
        for m in Measure::ALL {
            assert_eq!(m.name().to_uppercase().parse::<Measure>().unwrap(), m);
        }
        assert!("cosine".parse::<Measure>().is_err());
    }

    #[test]
    fn inclusion_examples() {
        assert_eq!(inclusion_rel("Train", "train").unwrap(), 1.0);
        assert!(close(inclusion_rel("dog", "attackdog").unwrap(), 3.0 / 9.0));
        assert_eq!(inclusion_rel("dog", "cat").unwrap(), 0.0);
        assert_eq!(inclusion_rel("", "cat"), Err(SimilarityError::EmptyOperand));
    }

    #[test]
    fn levenshtein_examples() {
        assert_eq!(levenshtein_rel("Train", "Train").unwrap(), 1.0);
        assert_eq!(levenshtein_rel("dog", "dogs").unwrap(), 0.75);
        assert_eq!(levenshtein_rel("abc", "xyz").unwrap(), 0.0);
        assert_eq!(
            levenshtein_rel("dog", ""),
            Err(SimilarityError::EmptyOperand)
        );
    }

    #[test]
    fn path_length_examples() {
        let g = animals();
        assert_eq!(path_length_rel(&g, "Dog", "Dog").unwrap(), 1.0);
        assert_eq!(path_length_rel(&g, "Dog", "Animal").unwrap(), 0.5);
        assert!(close(path_length_rel(&g, "Dog", "Cat").unwrap(), 1.0 / 3.0));
    }

    #[test]
    fn wu_palmer_examples() {
        let g = animals();
        assert_eq!(wu_palmer_rel(&g, "Dog", "Dog").unwrap(), 1.0);
        assert!(close(wu_palmer_rel(&g, "Dog", "Animal").unwrap(), 0.8));
        assert!(close(wu_palmer_rel(&g, "Animal", "Plant").unwrap(), 0.5));
    }

    #[test]
    fn wu_palmer_stays_below_one_on_shortcut_dags() {
        // D hangs under deep C and directly under R, so depth(D) < depth(C)
        let g = parse_taxonomy("A\tR\nB\tA\nC\tB\nD\tC\nD\tR\n").unwrap();
        let rel = wu_palmer_rel(&g, "D", "C").unwrap();
        assert!(rel < 1.0 && rel > 0.0, "{rel}");
        assert!(close(rel, 2.0 * 4.0 / (1.0 + 0.0 + 8.0)));
    }

    #[test]
    fn leacock_chodorow_examples() {
        let p = MeasureParams::default();
        let g = animals();
        assert_eq!(leacock_chodorow_rel(&g, "Cat", "Cat", &p).unwrap(), 1.0);
        // maxDepth 4, d = 2
        let g = parse_taxonomy("B\tA\nC\tB\nD\tC\nE\tC\n").unwrap();
        assert_eq!(g.max_depth(), 4);
        assert!(close(leacock_chodorow_rel(&g, "D", "E", &p).unwrap(), 0.5));
    }

    #[test]
    fn li_examples() {
        let p = MeasureParams::default();
        let g = animals();
        assert_eq!(li_rel(&g, "Dog", "Dog", &p).unwrap(), 1.0);
        // siblings at depth 3 under a depth-2 parent: d = 2, h = 2, m = 3
        let expected = 0.5902110748856692;
        assert!(close(li_rel(&g, "Dog", "Cat", &p).unwrap(), expected));
    }

    #[test]
    fn li_decays_with_distance() {
        let p = MeasureParams::default();
        let edges: Vec<(String, String)> = (1..40)
            .map(|i| (format!("N{i}"), format!("N{}", i - 1)))
            .collect();
        let g = Taxonomy::from_edges(edges).unwrap();
        let far = li_rel(&g, "N39", "N0", &p).unwrap();
        assert!(far < 1e-3, "{far}");
    }

    #[test]
    fn dispatch() {
        let g = animals();
        let p = MeasureParams::default();
        assert_eq!(
            relatedness(
                Measure::Levenshtein,
                &g,
                &p,
                Operand::Keyword("a"),
                Operand::Keyword("a")
            )
            .unwrap(),
            1.0
        );
        assert_eq!(
            relatedness(
                Measure::PathLength,
                &g,
                &p,
                Operand::Concept("Dog"),
                Operand::Concept("Dog")
            )
            .unwrap(),
            1.0
        );
        assert!(matches!(
            relatedness(
                Measure::WuPalmer,
                &g,
                &p,
                Operand::Keyword("dog"),
                Operand::Keyword("dog")
            ),
            Err(SimilarityError::OperandMismatch {
                operand: "keyword",
                ..
            })
        ));
        assert!(matches!(
            relatedness(
                Measure::Inclusion,
                &g,
                &p,
                Operand::Keyword("dog"),
                Operand::Concept("Dog")
            ),
            Err(SimilarityError::OperandMismatch {
                operand: "concept",
                ..
            })
        ));
        assert!(matches!(
            relatedness(
                Measure::Li,
                &g,
                &p,
                Operand::Concept("Dog"),
                Operand::Concept("Wolf")
            ),
            Err(SimilarityError::Taxonomy(TaxonomyError::UnknownConcept(_)))
        ));
    }
}
