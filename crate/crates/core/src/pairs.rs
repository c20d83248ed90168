//! Cross-rank preference pairs.
//!
//! Every headline is paired with up to `M` headlines drawn from *each*
//! superior rank, so the comparison set spans the whole engagement range
//! and same-rank comparisons never occur.

use std::borrow::Borrow;
use std::collections::BTreeSet;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{BinningScheme, Headline, HeadlineId};

/// An ordered comparison: `high` is preferred to `low`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PreferencePair {
    pub low: HeadlineId,
    pub high: HeadlineId,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairDataset {
    pairs: Vec<PreferencePair>,
    source_ids: BTreeSet<HeadlineId>,
}

impl PairDataset {
    /// Builds a dataset, dropping repeated pairs while keeping first-seen order.
    pub fn from_pairs(pairs: impl IntoIterator<Item = PreferencePair>) -> Self {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        let mut source_ids = BTreeSet::new();
        for p in pairs {
            if seen.insert(p) {
                source_ids.insert(p.low);
                source_ids.insert(p.high);
                out.push(p);
            }
        }
        Self {
            pairs: out,
            source_ids,
        }
    }

    pub fn pairs(&self) -> &[PreferencePair] {
        &self.pairs
    }

    pub fn source_ids(&self) -> &BTreeSet<HeadlineId> {
        &self.source_ids
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, PreferencePair> {
        self.pairs.iter()
    }

    /// Random partition into `(first, rest)` with `round(fraction * len)`
    /// pairs in `first`.
    pub fn split<R: Rng + ?Sized>(&self, fraction: f64, rng: &mut R) -> (PairDataset, PairDataset) {
        let n_first = ((fraction * self.len() as f64).round() as usize).min(self.len());
        let chosen: BTreeSet<usize> = index::sample(rng, self.len(), n_first)
            .into_iter()
            .collect();
        let (mut first, mut rest) = (Vec::new(), Vec::new());
        for (i, p) in self.pairs.iter().enumerate() {
            if chosen.contains(&i) {
                first.push(*p);
            } else {
                rest.push(*p);
            }
        }
        (Self::from_pairs(first), Self::from_pairs(rest))
    }
}

impl<'a> IntoIterator for &'a PairDataset {
    type Item = &'a PreferencePair;
    type IntoIter = std::slice::Iter<'a, PreferencePair>;

    fn into_iter(self) -> Self::IntoIter {
        self.pairs.iter()
    }
}

/// Pairs each headline with `min(m, |r|)` headlines drawn uniformly without
/// replacement from every non-empty rank `r` above its own.
///
/// Headlines are visited in input order and rank members in input order,
/// so the output is a pure function of the input and the random stream.
pub fn generate_pairs<H: Borrow<Headline>, R: Rng + ?Sized>(
    headlines: &[H],
    scheme: &BinningScheme,
    m: usize,
    rng: &mut R,
) -> PairDataset {
    let mut by_rank: Vec<Vec<HeadlineId>> = vec![Vec::new(); scheme.num_ranks()];
    for h in headlines {
        let h = h.borrow();
        by_rank[scheme.rank_of(h.clicks)].push(h.id);
    }
    let mut pairs = Vec::new();
    if m == 0 {
        return PairDataset::default();
    }
    for h in headlines {
        let h = h.borrow();
        let own = scheme.rank_of(h.clicks);
        for members in by_rank.iter().skip(own + 1).filter(|r| !r.is_empty()) {
            let k = m.min(members.len());
            for j in index::sample(rng, members.len(), k) {
                pairs.push(PreferencePair {
                    low: h.id,
                    high: members[j],
                });
            }
        }
    }
    PairDataset::from_pairs(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::headline;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy(clicks: &[u64]) -> Vec<Headline> {
        clicks
            .iter()
            .enumerate()
            .map(|(i, &c)| headline(i as u64 + 1, c, 0, vec![0.0]))
            .collect()
    }

    /// Counts pairs directly from rank sizes.
    fn brute_force_count(hs: &[Headline], scheme: &BinningScheme, m: usize) -> usize {
        let ranks: Vec<usize> = hs.iter().map(|h| scheme.rank_of(h.clicks)).collect();
        let mut total = 0;
        for &own in &ranks {
            for r in own + 1..scheme.num_ranks() {
                let size = ranks.iter().filter(|&&x| x == r).count();
                total += m.min(size);
            }
        }
        total
    }

    #[test]
    fn three_rank_worked_example() {
        let hs = toy(&[10, 500, 2000]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let d = generate_pairs(&hs, &BinningScheme::default(), 1, &mut rng);
        let got: BTreeSet<_> = d.iter().map(|p| (p.low, p.high)).collect();
        assert_eq!(got, BTreeSet::from([(1, 2), (1, 3), (2, 3)]));
        assert_eq!(d.len(), 3);
    }

    #[test]
    fn single_rank_gives_nothing() {
        let hs = toy(&[150, 200, 999, 100]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for m in 1..4 {
            assert!(generate_pairs(&hs, &BinningScheme::default(), m, &mut rng).is_empty());
        }
    }

    #[test]
    fn ten_headlines_three_ranks() {
        let hs = toy(&[1, 2, 3, 4, 150, 160, 170, 2000, 3000, 4000]);
        let scheme = BinningScheme::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = generate_pairs(&hs, &scheme, 2, &mut rng);
        // 4 rank-0 anchors: 2 + 2 each; 3 rank-1 anchors: 2 each.
        assert_eq!(brute_force_count(&hs, &scheme, 2), 22);
        assert_eq!(d.len(), 22);
    }

    #[test]
    fn split_is_a_partition() {
        let hs = toy(&[1, 2, 3, 150, 160, 2000, 3000, 20_000]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = generate_pairs(&hs, &BinningScheme::default(), 2, &mut rng);
        let (a, b) = d.split(0.9, &mut rng);
        assert_eq!(a.len() + b.len(), d.len());
        assert_eq!(b.len(), d.len() - (0.9 * d.len() as f64).round() as usize);
        let all: BTreeSet<_> = a.iter().chain(b.iter()).copied().collect();
        assert_eq!(all.len(), d.len());
    }

    proptest! {
        #[test]
        fn counts_and_ordering(clicks in proptest::collection::vec(0u64..200_000, 1..40), m in 1usize..4, seed: u64) {
            let hs = toy(&clicks);
            let scheme = BinningScheme::default();
            let d = generate_pairs(&hs, &scheme, m, &mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(d.len(), brute_force_count(&hs, &scheme, m));
            for p in &d {
                let lo = scheme.rank_of(hs[p.low as usize - 1].clicks);
                let hi = scheme.rank_of(hs[p.high as usize - 1].clicks);
                prop_assert!(lo < hi);
            }
            let again = generate_pairs(&hs, &scheme, m, &mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(d, again);
        }
    }
}
