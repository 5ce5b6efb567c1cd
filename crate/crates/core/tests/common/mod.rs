//! Random graph generators and brute-force reference implementations,
//! written without reusing any library internals.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;

use stimkb::corpus::StimulusRecord;
use stimkb::retrieval::Term;
use stimkb::similarity::{relatedness, Measure, MeasureParams};
use stimkb::taxonomy::Taxonomy;

/// Node names plus `(child, parent)` index pairs. Node 0 is the only
/// parentless node; every other node gets 1 to 3 parents of smaller index.
pub struct Dag {
    pub names: Vec<String>,
    pub edges: Vec<(usize, usize)>,
}

pub fn random_dag<R: Rng>(rng: &mut R, n: usize) -> Dag {
    let mut names: Vec<String> = (0..n).map(|i| format!("C{i:03}")).collect();
    // scramble names so index order and name order disagree
    names[1..].shuffle(rng);
    let mut edges = Vec::new();
    for child in 1..n {
        let k = rng.gen_range(1..=child.min(3));
        let mut parents: Vec<usize> = (0..child).collect();
        parents.shuffle(rng);
        for &p in &parents[..k] {
            edges.push((child, p));
        }
    }
    Dag { names, edges }
}

impl Dag {
    pub fn edge_names(&self) -> Vec<(&str, &str)> {
        self.edges
            .iter()
            .map(|&(c, p)| (self.names[c].as_str(), self.names[p].as_str()))
            .collect()
    }

    pub fn parent_lists(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.names.len()];
        for &(c, p) in &self.edges {
            out[c].push(p);
        }
        out
    }

    pub fn oracle(&self) -> Oracle {
        Oracle::new(self)
    }
}

/// Reference answers for one DAG, computed by DFS and BFS.
pub struct Oracle {
    pub names: Vec<String>,
    pub ancestors: Vec<BTreeSet<usize>>,
    pub depths: Vec<u32>,
    pub dist: Vec<Vec<u32>>,
}

impl Oracle {
    fn new(dag: &Dag) -> Oracle {
        let n = dag.names.len();
        let parents = dag.parent_lists();

        fn visit(parents: &[Vec<usize>], u: usize, out: &mut BTreeSet<usize>) {
            for &p in &parents[u] {
                if out.insert(p) {
                    visit(parents, p, out);
                }
            }
        }
        let ancestors: Vec<BTreeSet<usize>> = (0..n)
            .map(|u| {
                let mut out = BTreeSet::new();
                visit(&parents, u, &mut out);
                out
            })
            .collect();

        // 1 + min over parents, memoized recursion
        fn depth(parents: &[Vec<usize>], u: usize, memo: &mut Vec<Option<u32>>) -> u32 {
            if let Some(v) = memo[u] {
                return v;
            }
            let v = parents[u]
                .iter()
                .map(|&p| depth(parents, p, memo))
                .min()
                .map_or(1, |x| x + 1);
            memo[u] = Some(v);
            v
        }
        let mut memo = vec![None; n];
        let depths = (0..n).map(|u| depth(&parents, u, &mut memo)).collect();

        let mut adj = vec![Vec::new(); n];
        for &(c, p) in &dag.edges {
            adj[c].push(p);
            adj[p].push(c);
        }
        let dist = (0..n)
            .map(|a| {
                let mut d = vec![u32::MAX; n];
                d[a] = 0;
                let mut q = VecDeque::from([a]);
                while let Some(u) = q.pop_front() {
                    for &v in &adj[u] {
                        if d[v] == u32::MAX {
                            d[v] = d[u] + 1;
                            q.push_back(v);
                        }
                    }
                }
                d
            })
            .collect();

        Oracle {
            names: dag.names.clone(),
            ancestors,
            depths,
            dist,
        }
    }

    pub fn reaches(&self, a: usize, b: usize) -> bool {
        a == b || self.ancestors[a].contains(&b)
    }

    /// Common reflexive ancestors that subsume no other common ancestor,
    /// then argmax depth, smallest name on ties.
    pub fn lcs(&self, a: usize, b: usize) -> usize {
        let common: Vec<usize> = (0..self.names.len())
            .filter(|&c| self.reaches(a, c) && self.reaches(b, c))
            .collect();
        common
            .iter()
            .copied()
            .filter(|&c| {
                !common
                    .iter()
                    .any(|&o| o != c && self.ancestors[o].contains(&c))
            })
            .max_by(|&x, &y| {
                self.depths[x]
                    .cmp(&self.depths[y])
                    .then_with(|| self.names[y].cmp(&self.names[x]))
            })
            .expect("root is a common ancestor")
    }
}

/// Edit distance straight from the recursive definition, memoized on
/// suffix positions.
pub fn levenshtein_recursive(a: &[char], b: &[char]) -> usize {
    fn go(
        a: &[char],
        b: &[char],
        i: usize,
        j: usize,
        memo: &mut HashMap<(usize, usize), usize>,
    ) -> usize {
        if i == a.len() {
            return b.len() - j;
        }
        if j == b.len() {
            return a.len() - i;
        }
        if let Some(&v) = memo.get(&(i, j)) {
            return v;
        }
        let substitute = go(a, b, i + 1, j + 1, memo) + usize::from(a[i] != b[j]);
        let v = substitute
            .min(go(a, b, i + 1, j, memo) + 1)
            .min(go(a, b, i, j + 1, memo) + 1);
        memo.insert((i, j), v);
        v
    }
    go(a, b, 0, 0, &mut HashMap::new())
}

pub fn random_word<R: Rng>(rng: &mut R, alphabet: &[u8], max_len: usize) -> String {
    let len = rng.gen_range(1..=max_len);
    (0..len)
        .map(|_| alphabet[rng.gen_range(0..alphabet.len())] as char)
        .collect()
}

/// Scores every record against every applicable annotation, sorts by id,
/// then stable-sorts by descending score and truncates.
pub fn rank_oracle<'a>(
    records: impl Iterator<Item = &'a StimulusRecord>,
    g: &Taxonomy,
    term: &Term,
    measure: Measure,
    limit: usize,
) -> Vec<(String, f64)> {
    let params = MeasureParams::default();
    let mut all: Vec<(String, f64)> = records
        .map(|rec| {
            let mut scores = vec![0.0];
            for sem in &rec.semantics {
                let other = if measure.is_lexical() {
                    &sem.keyword
                } else {
                    &sem.concept
                };
                let Some(other) = other.as_deref() else {
                    continue;
                };
                let operand = match term {
                    Term::Keyword(_) => stimkb::similarity::Operand::Keyword(other),
                    Term::Concept(_) => stimkb::similarity::Operand::Concept(other),
                };
                scores.push(relatedness(measure, g, &params, term.operand(), operand).unwrap());
            }
            (
                rec.key.to_string(),
                scores.into_iter().fold(f64::MIN, f64::max),
            )
        })
        .collect();
    all.sort_by(|a, b| a.0.cmp(&b.0));
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    all.truncate(limit);
    all
}
