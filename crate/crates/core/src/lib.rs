//! Preference-based news headline ranking.
//!
//! A pairwise-ranking scorer is trained on cross-rank headline comparisons
//! and then deployed inside a day-stepped contextual-bandit simulation with
//! delayed click feedback. See the guide in `book/` for the concepts.

pub mod bandit;
pub mod corpus;
pub mod data;
pub mod eval;
pub mod experiment;
pub mod model;
pub mod pairs;
pub mod seed;

pub use corpus::{
    chronological_split, rank_of, BinningScheme, Corpus, CorpusError, EngagementRank, Headline,
    HeadlineId,
};
pub use pairs::{generate_pairs, PairDataset, PreferencePair};

/// The guide's chapters, compiled and run as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/corpus.md")]
    struct Corpus;
    #[doc = include_str!("../../../book/src/pairs.md")]
    struct Pairs;
    #[doc = include_str!("../../../book/src/model.md")]
    struct Model;
    #[doc = include_str!("../../../book/src/evaluation.md")]
    struct Evaluation;
    #[doc = include_str!("../../../book/src/synthetic.md")]
    struct Synthetic;
    #[doc = include_str!("../../../book/src/online.md")]
    struct Online;
    #[doc = include_str!("../../../book/src/experiments.md")]
    struct Experiments;
    #[doc = include_str!("../../../book/src/reproducibility.md")]
    struct Reproducibility;
}
