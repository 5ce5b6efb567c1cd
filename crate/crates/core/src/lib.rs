//! Knowledge base for affectively annotated multimedia stimuli.
//!
//! Stimuli carry semantic descriptors (free keywords and concepts from a
//! taxonomy) and affect annotations (emotion categories from several
//! vocabularies, dimensional valence/arousal/dominance ratings). The crate
//! answers filter and relatedness-ranked queries, evaluates ranking
//! quality against relevance judgments and turns query results into
//! timed presentation sequences.

pub mod affect;
pub mod corpus;
pub mod eval;
pub mod kb;
pub mod retrieval;
pub mod sequence;
pub mod similarity;
pub mod synthetic;
pub mod taxonomy;
