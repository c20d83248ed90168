//! Synthetic corpora with a heavy-tailed click distribution.
//!
//! Each headline gets a standard normal embedding `x`. A hidden unit vector
//! `w` defines its latent quality `q = w·x`, which is blurred with Gaussian
//! noise into `u = (q + σ·η) / sqrt(1 + σ²)`. Clicks are then assigned by
//! quantile matching: headlines are sorted by `u`, the empirical quantile
//! picks the target rank (so rank counts follow the target histogram
//! exactly, up to rounding), and the position inside the rank is mapped
//! log-uniformly between the rank bounds. The open-ended top rank gets a
//! Pareto tail.
//!
//! Since the map from `u` to clicks is monotone, noise acts multiplicatively
//! on clicks, and with `noise_scale = 0` clicks are a non-decreasing function
//! of `w·x`.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::corpus::{BinningScheme, Corpus, Headline};

/// Headlines per rank in the newsroom data (ranks 0..=6, 3305 in total).
pub const NEWSROOM_RANK_COUNTS: [u64; 7] = [883, 1660, 583, 96, 60, 19, 4];

/// Restricts publication to a subset of days. Every day before
/// `warmup_days` is active; `active_after_warmup` further days are drawn
/// from the rest. Each active day receives at least one headline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveDays {
    pub warmup_days: u32,
    pub active_after_warmup: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_headlines: usize,
    pub n_days: u32,
    pub dim: usize,
    pub latent_weight_seed: u64,
    /// Standard deviation of the latent noise relative to the unit-variance
    /// quality signal.
    pub noise_scale: f64,
    /// Tail exponent of the open-ended top rank.
    pub pareto_alpha: f64,
    pub target_scheme: BinningScheme,
    /// Relative headline count per rank of `target_scheme`.
    pub target_counts: Vec<u64>,
    /// `None` spreads headlines uniformly over all `n_days`.
    pub active_days: Option<ActiveDays>,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_headlines: 3305,
            n_days: 692,
            dim: 64,
            latent_weight_seed: 0,
            noise_scale: 0.8,
            pareto_alpha: 1.5,
            target_scheme: BinningScheme::default(),
            target_counts: NEWSROOM_RANK_COUNTS.to_vec(),
            active_days: None,
        }
    }
}

impl SyntheticSpec {
    /// Calendar layout of the newsroom stream: 692 days, the first 90 all
    /// active, 485 active days after them.
    pub fn newsroom_shaped() -> Self {
        Self {
            active_days: Some(ActiveDays {
                warmup_days: 90,
                active_after_warmup: 485,
            }),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.n_headlines == 0 || self.n_days == 0 || self.dim == 0 {
            return Err("n_headlines, n_days and dim must be positive".into());
        }
        if self.pareto_alpha.is_nan() || self.pareto_alpha <= 1.0 {
            return Err(format!(
                "pareto_alpha must exceed 1, got {}",
                self.pareto_alpha
            ));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(format!(
                "noise_scale must be finite and non-negative, got {}",
                self.noise_scale
            ));
        }
        if self.target_counts.len() != self.target_scheme.num_ranks() {
            return Err(format!(
                "target_counts has {} entries, scheme has {} ranks",
                self.target_counts.len(),
                self.target_scheme.num_ranks()
            ));
        }
        if self.target_counts.iter().sum::<u64>() == 0 {
            return Err("target_counts must not all be zero".into());
        }
        if let Some(a) = self.active_days {
            let warm = a.warmup_days.min(self.n_days) as usize;
            let available = (self.n_days as usize).saturating_sub(warm);
            if a.active_after_warmup > available {
                return Err(format!(
                    "{} active days requested after warm-up, only {available} exist",
                    a.active_after_warmup
                ));
            }
            if warm + a.active_after_warmup > self.n_headlines {
                return Err("fewer headlines than active days".into());
            }
        }
        Ok(())
    }
}

/// Clicks for a headline at fraction `phi` in `[0, 1)` through rank `k`.
fn clicks_within(scheme: &BinningScheme, k: usize, phi: f64, alpha: f64) -> u64 {
    let lo = scheme.lower_bounds()[k];
    match scheme.upper_bound(k) {
        Some(hi) => {
            let v = if lo == 0 {
                (hi as f64).powf(phi).floor() - 1.0
            } else {
                (lo as f64 * (hi as f64 / lo as f64).powf(phi)).floor()
            };
            (v.max(0.0) as u64).clamp(lo, hi - 1)
        }
        None => {
            let v = (lo.max(1) as f64 * (1.0 - phi).powf(-1.0 / alpha)).floor();
            (v.min(u64::MAX as f64) as u64).max(lo)
        }
    }
}

fn assign_days<R: Rng + ?Sized>(spec: &SyntheticSpec, rng: &mut R) -> Vec<u32> {
    let n = spec.n_headlines;
    match spec.active_days {
        None => (0..n).map(|_| rng.random_range(0..spec.n_days)).collect(),
        Some(a) => {
            let warm = a.warmup_days.min(spec.n_days);
            let mut active: Vec<u32> = (0..warm).collect();
            let rest = (spec.n_days - warm) as usize;
            let mut later: Vec<u32> = index::sample(rng, rest, a.active_after_warmup)
                .into_iter()
                .map(|i| warm + i as u32)
                .collect();
            later.sort_unstable();
            active.extend(later);
            (0..n)
                .map(|i| {
                    if i < active.len() {
                        active[i]
                    } else {
                        active[rng.random_range(0..active.len())]
                    }
                })
                .collect()
        }
    }
}

/// Generates a corpus following `spec`. Ids are assigned in `(day, draw)`
/// order, so they are chronological.
///
/// # Panics
///
/// If `spec` fails [`SyntheticSpec::validate`].
pub fn generate_synthetic<R: Rng + ?Sized>(spec: &SyntheticSpec, rng: &mut R) -> Corpus {
    if let Err(e) = spec.validate() {
        panic!("invalid synthetic spec: {e}");
    }
    let w = latent_direction(spec);
    let n = spec.n_headlines;
    let sigma = spec.noise_scale;
    let mut embeddings = Vec::with_capacity(n);
    let mut signal = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..spec.dim).map(|_| rng.sample(StandardNormal)).collect();
        let q: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum();
        let eta: f64 = rng.sample(StandardNormal);
        signal.push((q + sigma * eta) / (1.0 + sigma * sigma).sqrt());
        embeddings.push(x);
    }
    let days = assign_days(spec, rng);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| signal[a].total_cmp(&signal[b]).then(a.cmp(&b)));
    let total: u64 = spec.target_counts.iter().sum();
    let cumulative: Vec<u64> = spec
        .target_counts
        .iter()
        .scan(0, |acc, &c| {
            *acc += c;
            Some(*acc)
        })
        .collect();
    let mut clicks = vec![0u64; n];
    let nn = n as u128;
    for (pos, &i) in order.iter().enumerate() {
        // Rank: first k with (pos + 0.5) / n < cumulative[k] / total.
        let lhs = (2 * pos as u128 + 1) * total as u128;
        let k = cumulative
            .iter()
            .position(|&c| lhs < 2 * c as u128 * nn)
            .expect("last cumulative equals total");
        let below = if k == 0 { 0 } else { cumulative[k - 1] };
        let quantile = (pos as f64 + 0.5) / n as f64;
        let lo = below as f64 / total as f64;
        let width = spec.target_counts[k] as f64 / total as f64;
        let phi = ((quantile - lo) / width).clamp(0.0, 1.0 - f64::EPSILON);
        clicks[i] = clicks_within(&spec.target_scheme, k, phi, spec.pareto_alpha);
    }

    let mut chronological: Vec<usize> = (0..n).collect();
    chronological.sort_by_key(|&i| (days[i], i));
    let mut embeddings: Vec<Option<Vec<f64>>> = embeddings.into_iter().map(Some).collect();
    let headlines = chronological
        .iter()
        .enumerate()
        .map(|(id, &i)| Headline {
            id: id as u64,
            embedding: embeddings[i].take().expect("each index once"),
            clicks: clicks[i],
            day: days[i],
            text: None,
        })
        .collect();
    Corpus::new(headlines).expect("synthetic corpus is consistent")
}

/// The hidden quality direction used by `spec`.
pub fn latent_direction(spec: &SyntheticSpec) -> Vec<f64> {
    let mut w_rng = ChaCha8Rng::seed_from_u64(spec.latent_weight_seed);
    let mut w: Vec<f64> = (0..spec.dim)
        .map(|_| w_rng.sample(StandardNormal))
        .collect();
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    w.iter_mut().for_each(|v| *v /= norm);
    w
}
