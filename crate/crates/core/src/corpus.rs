//! Headlines, engagement-rank binning and chronological splitting.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier of a headline, unique within a corpus.
pub type HeadlineId = u64;

/// Index of an engagement bin, `0..scheme.num_ranks()`.
pub type EngagementRank = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorpusError {
    #[error("corpus is empty")]
    Empty,
    #[error("headline {id}: embedding has dimension {found}, expected {expected}")]
    DimensionMismatch {
        id: HeadlineId,
        expected: usize,
        found: usize,
    },
    #[error("duplicate headline id {0}")]
    DuplicateId(HeadlineId),
    #[error("embedding dimension must be positive")]
    ZeroDimension,
    #[error("binning bounds must start at 0 and be strictly increasing, got {0:?}")]
    InvalidScheme(Vec<u64>),
    #[error("cannot split fewer than 2 headlines (got {0})")]
    TooFewToSplit(usize),
    #[error("train fraction must lie in (0, 1), got {0}")]
    InvalidFraction(f64),
}

/// A news headline with its embedding and 7-day cumulative click count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Headline {
    pub id: HeadlineId,
    pub embedding: Vec<f64>,
    pub clicks: u64,
    /// Publication day, counted from the start of the corpus.
    pub day: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

/// A validated set of headlines sharing one embedding dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    headlines: Vec<Headline>,
    index: HashMap<HeadlineId, usize>,
    dim: usize,
}

impl Corpus {
    pub fn new(headlines: Vec<Headline>) -> Result<Self, CorpusError> {
        let first = headlines.first().ok_or(CorpusError::Empty)?;
        let dim = first.embedding.len();
        if dim == 0 {
            return Err(CorpusError::ZeroDimension);
        }
        let mut index = HashMap::with_capacity(headlines.len());
        for (pos, h) in headlines.iter().enumerate() {
            if h.embedding.len() != dim {
                return Err(CorpusError::DimensionMismatch {
                    id: h.id,
                    expected: dim,
                    found: h.embedding.len(),
                });
            }
            if index.insert(h.id, pos).is_some() {
                return Err(CorpusError::DuplicateId(h.id));
            }
        }
        Ok(Self {
            headlines,
            index,
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.headlines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.headlines.is_empty()
    }

    pub fn headlines(&self) -> &[Headline] {
        &self.headlines
    }

    pub fn get(&self, id: HeadlineId) -> Option<&Headline> {
        self.index.get(&id).map(|&pos| &self.headlines[pos])
    }

    pub fn into_headlines(self) -> Vec<Headline> {
        self.headlines
    }
}

/// Discretization of the click space into ordered engagement ranks.
///
/// Each lower bound is inclusive, the next bound exclusive, and the last
/// bin is unbounded above.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<u64>", into = "Vec<u64>")]
pub struct BinningScheme {
    lower_bounds: Vec<u64>,
}

impl BinningScheme {
    /// Bounds agreed with the newsroom for the click data set.
    pub const NEWSROOM_BOUNDS: [u64; 7] = [0, 100, 1_000, 5_000, 10_000, 50_000, 100_000];

    pub fn new(lower_bounds: Vec<u64>) -> Result<Self, CorpusError> {
        let valid =
            lower_bounds.first() == Some(&0) && lower_bounds.windows(2).all(|w| w[0] < w[1]);
        if !valid {
            return Err(CorpusError::InvalidScheme(lower_bounds));
        }
        Ok(Self { lower_bounds })
    }

    pub fn lower_bounds(&self) -> &[u64] {
        &self.lower_bounds
    }

    /// Number of ranks `K`.
    pub fn num_ranks(&self) -> usize {
        self.lower_bounds.len()
    }

    /// Exclusive upper bound of rank `k`, `None` for the last rank.
    pub fn upper_bound(&self, k: EngagementRank) -> Option<u64> {
        self.lower_bounds.get(k + 1).copied()
    }

    /// The unique `k` with `lower_bounds[k] <= clicks < lower_bounds[k + 1]`.
    pub fn rank_of(&self, clicks: u64) -> EngagementRank {
        // lower_bounds[0] == 0, so the partition point is at least 1.
        self.lower_bounds.partition_point(|&b| b <= clicks) - 1
    }

    /// Number of headlines falling in each rank.
    pub fn histogram<'a>(&self, headlines: impl IntoIterator<Item = &'a Headline>) -> Vec<usize> {
        let mut counts = vec![0; self.num_ranks()];
        for h in headlines {
            counts[self.rank_of(h.clicks)] += 1;
        }
        counts
    }
}

impl Default for BinningScheme {
    fn default() -> Self {
        Self {
            lower_bounds: Self::NEWSROOM_BOUNDS.to_vec(),
        }
    }
}

impl TryFrom<Vec<u64>> for BinningScheme {
    type Error = CorpusError;

    fn try_from(bounds: Vec<u64>) -> Result<Self, Self::Error> {
        Self::new(bounds)
    }
}

impl From<BinningScheme> for Vec<u64> {
    fn from(scheme: BinningScheme) -> Self {
        scheme.lower_bounds
    }
}

/// Shorthand for [`BinningScheme::rank_of`].
pub fn rank_of(clicks: u64, scheme: &BinningScheme) -> EngagementRank {
    scheme.rank_of(clicks)
}

/// Number of headlines that go to the training side of a split.
///
/// `ceil(fraction * n)`, kept within `1..n` so neither side is empty.
pub fn train_count(n: usize, train_fraction: f64) -> usize {
    // The small slack absorbs representation error, e.g. 0.8 * 3305.
    let raw = (train_fraction * n as f64 - 1e-9).ceil() as usize;
    raw.clamp(1, n - 1)
}

/// Splits headlines chronologically by `(day, id)`.
///
/// The first `ceil(train_fraction * n)` headlines form the training part.
pub fn chronological_split(
    headlines: &[Headline],
    train_fraction: f64,
) -> Result<(Vec<Headline>, Vec<Headline>), CorpusError> {
    if headlines.len() < 2 {
        return Err(CorpusError::TooFewToSplit(headlines.len()));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(CorpusError::InvalidFraction(train_fraction));
    }
    let mut ordered = headlines.to_vec();
    ordered.sort_by_key(|h| (h.day, h.id));
    let n_train = train_count(ordered.len(), train_fraction);
    let test = ordered.split_off(n_train);
    Ok((ordered, test))
}

#[cfg(test)]
pub(crate) fn headline(id: HeadlineId, clicks: u64, day: u32, embedding: Vec<f64>) -> Headline {
    Headline {
        id,
        embedding,
        clicks,
        day,
        text: None,
    }
}
