//! Pair-ordering accuracy and its per-rank weighted variant.

use std::collections::{BTreeMap, HashMap};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{BinningScheme, Corpus, EngagementRank, Headline, HeadlineId};
use crate::model::{ModelError, PreferenceNet};
use crate::pairs::PairDataset;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cannot evaluate an empty pair dataset")]
    EmptyDataset,
    #[error("headline {0} is not in the corpus")]
    UnknownHeadline(HeadlineId),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Anything that assigns a preference score to a headline.
pub trait HeadlineScorer {
    fn score_all(&self, headlines: &[&Headline]) -> Result<Vec<f64>, EvalError>;
}

impl<F: Fn(&Headline) -> f64> HeadlineScorer for F {
    fn score_all(&self, headlines: &[&Headline]) -> Result<Vec<f64>, EvalError> {
        Ok(headlines.iter().map(|h| self(h)).collect())
    }
}

/// Scores in inference mode (running batch-norm statistics).
impl HeadlineScorer for PreferenceNet {
    fn score_all(&self, headlines: &[&Headline]) -> Result<Vec<f64>, EvalError> {
        let dim = self.shape().input_dim;
        let mut flat = Vec::with_capacity(headlines.len() * dim);
        for h in headlines {
            if h.embedding.len() != dim {
                return Err(ModelError::DimensionMismatch {
                    expected: dim,
                    found: h.embedding.len(),
                }
                .into());
            }
            flat.extend_from_slice(&h.embedding);
        }
        let x = Array2::from_shape_vec((headlines.len(), dim), flat).expect("rows of width dim");
        Ok(self.infer_batch(x.view())?.to_vec())
    }
}

fn scores_by_id(
    scorer: &impl HeadlineScorer,
    pairs: &PairDataset,
    corpus: &Corpus,
) -> Result<HashMap<HeadlineId, f64>, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let headlines = pairs
        .source_ids()
        .iter()
        .map(|&id| corpus.get(id).ok_or(EvalError::UnknownHeadline(id)))
        .collect::<Result<Vec<_>, _>>()?;
    let scores = scorer.score_all(&headlines)?;
    Ok(headlines.iter().map(|h| h.id).zip(scores).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub weighted_accuracy: f64,
    /// rank → (correct, total) over pairs touching that rank.
    pub per_rank_accuracy: BTreeMap<EngagementRank, (u64, u64)>,
    pub n_pairs: usize,
    /// Ranks of the scheme with no pairs, left out of the weighted mean.
    pub skipped_ranks: usize,
}

/// Flat form of [`EvalReport`] for CSV output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub accuracy: f64,
    pub weighted_accuracy: f64,
    pub n_pairs: usize,
    pub skipped_ranks: usize,
}

impl From<&EvalReport> for EvalRecord {
    fn from(r: &EvalReport) -> Self {
        Self {
            accuracy: r.accuracy,
            weighted_accuracy: r.weighted_accuracy,
            n_pairs: r.n_pairs,
            skipped_ranks: r.skipped_ranks,
        }
    }
}

/// Both metrics in one pass. A pair is correct only when
/// `f(high) > f(low)`; exact ties count as wrong.
pub fn evaluate(
    scorer: &impl HeadlineScorer,
    pairs: &PairDataset,
    corpus: &Corpus,
    scheme: &BinningScheme,
) -> Result<EvalReport, EvalError> {
    let scores = scores_by_id(scorer, pairs, corpus)?;
    let mut correct_total = 0u64;
    let mut per_rank: BTreeMap<EngagementRank, (u64, u64)> = BTreeMap::new();
    for p in pairs {
        let correct = scores[&p.high] > scores[&p.low];
        correct_total += correct as u64;
        let lo = scheme.rank_of(corpus.get(p.low).expect("scored above").clicks);
        let hi = scheme.rank_of(corpus.get(p.high).expect("scored above").clicks);
        let ranks: &[EngagementRank] = if lo == hi { &[lo] } else { &[lo, hi] };
        for &k in ranks {
            let e = per_rank.entry(k).or_default();
            e.0 += correct as u64;
            e.1 += 1;
        }
    }
    let weighted = per_rank
        .values()
        .map(|&(c, t)| c as f64 / t as f64)
        .sum::<f64>()
        / per_rank.len() as f64;
    Ok(EvalReport {
        accuracy: correct_total as f64 / pairs.len() as f64,
        weighted_accuracy: weighted,
        skipped_ranks: scheme.num_ranks().saturating_sub(per_rank.len()),
        per_rank_accuracy: per_rank,
        n_pairs: pairs.len(),
    })
}

/// Fraction of pairs ordered correctly.
pub fn pair_accuracy(
    scorer: &impl HeadlineScorer,
    pairs: &PairDataset,
    corpus: &Corpus,
) -> Result<f64, EvalError> {
    let scores = scores_by_id(scorer, pairs, corpus)?;
    let correct = pairs
        .iter()
        .filter(|p| scores[&p.high] > scores[&p.low])
        .count();
    Ok(correct as f64 / pairs.len() as f64)
}

/// Mean over non-empty ranks of the accuracy on pairs touching each rank.
pub fn weighted_pair_accuracy(
    scorer: &impl HeadlineScorer,
    pairs: &PairDataset,
    corpus: &Corpus,
    scheme: &BinningScheme,
) -> Result<f64, EvalError> {
    Ok(evaluate(scorer, pairs, corpus, scheme)?.weighted_accuracy)
}
