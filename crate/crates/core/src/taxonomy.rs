//! Concept hierarchy (IS-A edges) with eagerly materialized closure.
//!
//! A [`Taxonomy`] is a rooted DAG. Concepts may have several parents; the
//! depth of a concept is its minimum distance to the root, counting the root
//! as depth 1. Everything derived from the edge set (depths, ancestor sets)
//! is computed once at build time and the graph is immutable afterwards.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use thiserror::Error;

/// Name used for the root inserted above several parentless concepts.
pub const VIRTUAL_ROOT: &str = "Entity";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaxonomyError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("cycle detected through edge {child} -> {parent}")]
    Cycle { child: String, parent: String },
    #[error("unknown concept `{0}`")]
    UnknownConcept(String),
    #[error("taxonomy has no concepts")]
    Empty,
    #[error("invalid concept name `{0}`")]
    InvalidName(String),
    #[error("mapping line {line}: keyword `{keyword}` refers to unknown concept `{concept}`")]
    UnmappedConcept {
        line: usize,
        keyword: String,
        concept: String,
    },
}

pub type Result<T> = std::result::Result<T, TaxonomyError>;

/// Concept identifiers are `[A-Za-z0-9_-]+`.
pub fn is_valid_concept_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
}

/// Keywords are compared after simple case folding.
pub fn fold_keyword(keyword: &str) -> String {
    keyword.to_lowercase()
}

#[derive(Debug, Clone)]
pub struct Taxonomy {
    names: Vec<String>,
    index: HashMap<String, usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    root: usize,
    depth: Vec<u32>,
    // sorted concept indices, excluding the concept itself
    ancestors: Vec<Vec<usize>>,
    max_depth: u32,
}

impl Taxonomy {
    /// Builds a taxonomy from `(child, parent)` edges plus optional isolated
    /// concepts. Parent-only names are created implicitly and duplicate edges
    /// are dropped. When more than one concept lacks a parent a virtual
    /// [`VIRTUAL_ROOT`] is placed above all of them.
    pub fn from_edges<I, S>(edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, S)>,
        S: AsRef<str>,
    {
        Self::build(edges, std::iter::empty::<&str>())
    }

    pub fn build<I, S, C, T>(edges: I, isolated: C) -> Result<Self>
    where
        I: IntoIterator<Item = (S, S)>,
        S: AsRef<str>,
        C: IntoIterator<Item = T>,
        T: AsRef<str>,
    {
        let mut names: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut intern = |name: &str, names: &mut Vec<String>| -> Result<usize> {
            if !is_valid_concept_name(name) {
                return Err(TaxonomyError::InvalidName(name.to_string()));
            }
            if let Some(&i) = index.get(name) {
                return Ok(i);
            }
            names.push(name.to_string());
            index.insert(name.to_string(), names.len() - 1);
            Ok(names.len() - 1)
        };

        let mut edge_set: BTreeSet<(usize, usize)> = BTreeSet::new();
        for (child, parent) in edges {
            let c = intern(child.as_ref(), &mut names)?;
            let p = intern(parent.as_ref(), &mut names)?;
            if c == p {
                return Err(TaxonomyError::Cycle {
                    child: names[c].clone(),
                    parent: names[p].clone(),
                });
            }
            edge_set.insert((c, p));
        }
        for name in isolated {
            intern(name.as_ref(), &mut names)?;
        }
        if names.is_empty() {
            return Err(TaxonomyError::Empty);
        }

        let mut parents = vec![Vec::new(); names.len()];
        for &(c, p) in &edge_set {
            parents[c].push(p);
        }

        let mut roots: Vec<usize> = (0..names.len())
            .filter(|&i| parents[i].is_empty())
            .collect();
        if roots.is_empty() {
            // every node has a parent, so there must be a cycle
            let (c, p) = find_cycle_edge(&parents).expect("parentless-free graph has a cycle");
            return Err(TaxonomyError::Cycle {
                child: names[c].clone(),
                parent: names[p].clone(),
            });
        }
        let root = if roots.len() == 1 {
            roots[0]
        } else {
            let existing = index.get(VIRTUAL_ROOT).copied();
            let root = match existing {
                Some(r) if parents[r].is_empty() => r,
                Some(_) => {
                    return Err(TaxonomyError::InvalidName(format!(
                        "{VIRTUAL_ROOT} (needed as virtual root but already has a parent)"
                    )))
                }
                None => {
                    names.push(VIRTUAL_ROOT.to_string());
                    index.insert(VIRTUAL_ROOT.to_string(), names.len() - 1);
                    parents.push(Vec::new());
                    names.len() - 1
                }
            };
            roots.retain(|&r| r != root);
            for r in roots {
                parents[r].push(root);
            }
            root
        };

        if let Some((c, p)) = find_cycle_edge(&parents) {
            return Err(TaxonomyError::Cycle {
                child: names[c].clone(),
                parent: names[p].clone(),
            });
        }

        let n = names.len();
        let mut children = vec![Vec::new(); n];
        for (c, ps) in parents.iter().enumerate() {
            for &p in ps {
                children[p].push(c);
            }
        }
        for list in children.iter_mut() {
            list.sort_unstable();
        }

        // min root distance by BFS along child edges
        let mut depth = vec![0u32; n];
        depth[root] = 1;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &v in &children[u] {
                if depth[v] == 0 {
                    depth[v] = depth[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        debug_assert!(depth.iter().all(|&d| d > 0));
        let max_depth = depth.iter().copied().max().unwrap_or(1);

        // ancestors in topological order (parents before children)
        let order = topological_order(&parents, &children, root);
        let mut ancestors: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &u in &order {
            let mut acc: BTreeSet<usize> = BTreeSet::new();
            for &p in &parents[u] {
                acc.insert(p);
                acc.extend(ancestors[p].iter().copied());
            }
            ancestors[u] = acc.into_iter().collect();
        }

        Ok(Taxonomy {
            names,
            index,
            parents,
            children,
            root,
            depth,
            ancestors,
            max_depth,
        })
    }

    fn id(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| TaxonomyError::UnknownConcept(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn root(&self) -> &str {
        &self.names[self.root]
    }

    /// All concept names in lexicographic order.
    pub fn concepts(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.names.iter().map(String::as_str).collect();
        out.sort_unstable();
        out
    }

    pub fn parents(&self, name: &str) -> Result<BTreeSet<&str>> {
        let i = self.id(name)?;
        Ok(self.parents[i]
            .iter()
            .map(|&p| self.names[p].as_str())
            .collect())
    }

    pub fn children(&self, name: &str) -> Result<BTreeSet<&str>> {
        let i = self.id(name)?;
        Ok(self.children[i]
            .iter()
            .map(|&c| self.names[c].as_str())
            .collect())
    }

    /// Every `(child, parent)` edge, sorted.
    pub fn edges(&self) -> Vec<(&str, &str)> {
        let mut out: Vec<(&str, &str)> = self
            .parents
            .iter()
            .enumerate()
            .flat_map(|(c, ps)| {
                ps.iter()
                    .map(move |&p| (self.names[c].as_str(), self.names[p].as_str()))
            })
            .collect();
        out.sort_unstable();
        out
    }

    pub fn depth(&self, name: &str) -> Result<u32> {
        Ok(self.depth[self.id(name)?])
    }

    pub fn max_depth(&self) -> u32 {
        self.max_depth
    }

    /// Transitive closure of the parent relation, excluding `name`.
    pub fn ancestors(&self, name: &str) -> Result<BTreeSet<&str>> {
        let i = self.id(name)?;
        Ok(self.ancestors[i]
            .iter()
            .map(|&a| self.names[a].as_str())
            .collect())
    }

    fn is_ancestor_idx(&self, descendant: usize, ancestor: usize) -> bool {
        self.ancestors[descendant].binary_search(&ancestor).is_ok()
    }

    /// Reflexive-transitive subsumption: `sub ⊑ sup`.
    pub fn is_subclass_of(&self, sub: &str, sup: &str) -> Result<bool> {
        let a = self.id(sub)?;
        let b = self.id(sup)?;
        Ok(a == b || self.is_ancestor_idx(a, b))
    }

    fn lcs_idx(&self, a: usize, b: usize) -> usize {
        if a == b || self.is_ancestor_idx(a, b) {
            return b;
        }
        if self.is_ancestor_idx(b, a) {
            return a;
        }
        // both ancestor lists are sorted, so intersect by merge
        let (xs, ys) = (&self.ancestors[a], &self.ancestors[b]);
        let mut common = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < xs.len() && j < ys.len() {
            match xs[i].cmp(&ys[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    common.push(xs[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        // Only minimal common subsumers compete. With shortcut edges a
        // subsumer of another common subsumer can have the larger min-depth.
        let mut best = self.root;
        for &c in &common {
            if common.iter().any(|&o| o != c && self.is_ancestor_idx(o, c)) {
                continue;
            }
            let better = self.depth[c] > self.depth[best]
                || (self.depth[c] == self.depth[best] && self.names[c] < self.names[best]);
            if better {
                best = c;
            }
        }
        best
    }

    /// Least common subsumer: the operand itself when one subsumes the
    /// other, otherwise the deepest minimal common ancestor. Ties go to the
    /// lexicographically smallest name.
    pub fn lcs(&self, a: &str, b: &str) -> Result<&str> {
        let (a, b) = (self.id(a)?, self.id(b)?);
        Ok(&self.names[self.lcs_idx(a, b)])
    }

    /// Edge count of the shortest path with IS-A edges taken as undirected.
    pub fn shortest_path(&self, a: &str, b: &str) -> Result<u32> {
        let (a, b) = (self.id(a)?, self.id(b)?);
        Ok(self
            .bfs(a, |v| v == b, true)
            .expect("taxonomy is connected"))
    }

    /// Shortest upward distance from `from` to its subsumer `to`, following
    /// parent edges only. `None` when `to` does not subsume `from`.
    pub fn upward_distance(&self, from: &str, to: &str) -> Result<Option<u32>> {
        let (a, b) = (self.id(from)?, self.id(to)?);
        Ok(self.bfs(a, |v| v == b, false))
    }

    fn bfs(&self, start: usize, is_goal: impl Fn(usize) -> bool, undirected: bool) -> Option<u32> {
        if is_goal(start) {
            return Some(0);
        }
        let mut seen = vec![false; self.names.len()];
        seen[start] = true;
        let mut queue = VecDeque::from([(start, 0u32)]);
        while let Some((u, d)) = queue.pop_front() {
            let down: &[usize] = if undirected { &self.children[u] } else { &[] };
            for &v in self.parents[u].iter().chain(down) {
                if seen[v] {
                    continue;
                }
                if is_goal(v) {
                    return Some(d + 1);
                }
                seen[v] = true;
                queue.push_back((v, d + 1));
            }
        }
        None
    }

    /// Serializes the edge set in the line format read by [`parse_taxonomy`].
    /// A single-concept taxonomy is written as a bare concept line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if self.names.len() == 1 {
            out.push_str(&self.names[0]);
            out.push('\n');
        }
        for (c, p) in self.edges() {
            out.push_str(c);
            out.push('\t');
            out.push_str(p);
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for Taxonomy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "taxonomy(root={}, concepts={}, max_depth={})",
            self.root(),
            self.len(),
            self.max_depth
        )
    }
}

fn find_cycle_edge(parents: &[Vec<usize>]) -> Option<(usize, usize)> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let n = parents.len();
    let mut mark = vec![Mark::New; n];
    for start in 0..n {
        if mark[start] != Mark::New {
            continue;
        }
        let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
        mark[start] = Mark::Active;
        while let Some(&mut (u, ref mut next)) = stack.last_mut() {
            if *next < parents[u].len() {
                let p = parents[u][*next];
                *next += 1;
                match mark[p] {
                    Mark::Active => return Some((u, p)),
                    Mark::New => {
                        mark[p] = Mark::Active;
                        stack.push((p, 0));
                    }
                    Mark::Done => {}
                }
            } else {
                mark[u] = Mark::Done;
                stack.pop();
            }
        }
    }
    None
}

fn topological_order(parents: &[Vec<usize>], children: &[Vec<usize>], root: usize) -> Vec<usize> {
    let mut pending: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut order = Vec::with_capacity(parents.len());
    let mut queue = VecDeque::from([root]);
    while let Some(u) = queue.pop_front() {
        order.push(u);
        for &c in &children[u] {
            pending[c] -= 1;
            if pending[c] == 0 {
                queue.push_back(c);
            }
        }
    }
    order
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

/// Parses the `child<TAB>parent` taxonomy format. A line holding a single
/// identifier declares a concept without edges.
pub fn parse_taxonomy(text: &str) -> Result<Taxonomy> {
    let mut edges = Vec::new();
    let mut isolated = Vec::new();
    for (line_no, line) in content_lines(text) {
        let fields: Vec<&str> = line.split('\t').collect();
        let malformed = |reason: String| TaxonomyError::Malformed {
            line: line_no,
            reason,
        };
        match fields.as_slice() {
            [single] => {
                if !is_valid_concept_name(single) {
                    return Err(malformed(format!("invalid concept name `{single}`")));
                }
                isolated.push(*single);
            }
            [child, parent] => {
                for name in [child, parent] {
                    if !is_valid_concept_name(name) {
                        return Err(malformed(format!("invalid concept name `{name}`")));
                    }
                }
                edges.push((*child, *parent));
            }
            _ => {
                return Err(malformed(format!(
                    "expected `child<TAB>parent`, found {} fields",
                    fields.len()
                )))
            }
        }
    }
    Taxonomy::build(edges, isolated)
}

/// Keyword → concept table. Keys are case-folded keywords.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeywordMapping {
    entries: BTreeMap<String, BTreeSet<String>>,
}

impl KeywordMapping {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an entry after checking the concept against `taxonomy`.
    pub fn insert(&mut self, taxonomy: &Taxonomy, keyword: &str, concept: &str) -> Result<bool> {
        if !taxonomy.contains(concept) {
            return Err(TaxonomyError::UnknownConcept(concept.to_string()));
        }
        Ok(self
            .entries
            .entry(fold_keyword(keyword))
            .or_default()
            .insert(concept.to_string()))
    }

    pub fn lookup(&self, keyword: &str) -> Option<&BTreeSet<String>> {
        self.entries.get(&fold_keyword(keyword))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &BTreeSet<String>)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (keyword, concepts) in &self.entries {
            for concept in concepts {
                out.push_str(keyword);
                out.push('\t');
                out.push_str(concept);
                out.push('\n');
            }
        }
        out
    }
}

/// Parses `keyword<TAB>concept` lines, resolving every concept in `taxonomy`.
pub fn parse_mapping(text: &str, taxonomy: &Taxonomy) -> Result<KeywordMapping> {
    let mut mapping = KeywordMapping::new();
    for (line_no, line) in content_lines(text) {
        let Some((keyword, concept)) = line.split_once('\t') else {
            return Err(TaxonomyError::Malformed {
                line: line_no,
                reason: "expected `keyword<TAB>concept`".into(),
            });
        };
        let keyword = keyword.trim();
        if keyword.is_empty() || concept.contains('\t') || !is_valid_concept_name(concept) {
            return Err(TaxonomyError::Malformed {
                line: line_no,
                reason: format!("bad mapping entry `{line}`"),
            });
        }
        if !taxonomy.contains(concept) {
            return Err(TaxonomyError::UnmappedConcept {
                line: line_no,
                keyword: keyword.to_string(),
                concept: concept.to_string(),
            });
        }
        mapping.insert(taxonomy, keyword, concept)?;
    }
    Ok(mapping)
}
