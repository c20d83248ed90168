use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::corpus::{Headline, HeadlineId};
use crate::eval::{EvalError, HeadlineScorer};
use crate::model::{ModelError, PreferenceNet};

/// Index of the first maximum, preferring the lowest id among exact ties.
fn argmax_lowest_id(candidates: &[&Headline], scores: &[f64]) -> HeadlineId {
    let mut best = 0;
    for i in 1..candidates.len() {
        let better = scores[i] > scores[best];
        let tie = scores[i] == scores[best] && candidates[i].id < candidates[best].id;
        if better || tie {
            best = i;
        }
    }
    candidates[best].id
}

fn scores(model: &PreferenceNet, candidates: &[&Headline]) -> Result<Vec<f64>, ModelError> {
    model.score_all(candidates).map_err(|e| match e {
        EvalError::Model(m) => m,
        other => unreachable!("scoring headlines directly: {other}"),
    })
}

/// Highest-scoring candidate under `model`.
///
/// # Panics
/// If `candidates` is empty.
pub fn select_greedy(
    model: &PreferenceNet,
    candidates: &[&Headline],
) -> Result<HeadlineId, ModelError> {
    assert!(!candidates.is_empty(), "no candidates");
    Ok(argmax_lowest_id(candidates, &scores(model, candidates)?))
}

/// Uniformly random candidate.
///
/// # Panics
/// If `candidates` is empty.
pub fn select_random<R: Rng + ?Sized>(candidates: &[&Headline], rng: &mut R) -> HeadlineId {
    assert!(!candidates.is_empty(), "no candidates");
    candidates[rng.random_range(0..candidates.len())].id
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleOrder {
    Best,
    SecondBest,
}

/// Candidate with the highest (or second-highest) true clicks.
///
/// Ties go to the lowest id. With a single candidate both orders return it.
///
/// # Panics
/// If `candidates` is empty.
pub fn select_oracle(candidates: &[&Headline], order: OracleOrder) -> HeadlineId {
    assert!(!candidates.is_empty(), "no candidates");
    let mut ranked: Vec<&Headline> = candidates.to_vec();
    ranked.sort_by(|a, b| b.clicks.cmp(&a.clicks).then(a.id.cmp(&b.id)));
    match order {
        OracleOrder::Best => ranked[0].id,
        OracleOrder::SecondBest => ranked.get(1).unwrap_or(&ranked[0]).id,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeuralTsConfig {
    /// Exploration scale.
    pub nu: f64,
    /// Prior precision per parameter.
    pub lambda: f64,
}

impl Default for NeuralTsConfig {
    fn default() -> Self {
        Self {
            nu: 1.0,
            lambda: 1.0,
        }
    }
}

/// Thompson sampling over network scores with a diagonal gradient
/// precision.
///
/// Each candidate's score is drawn from `N(f(x), nu² Σ_j g_j(x)² / Z_j)`,
/// where `g` is the score gradient over every parameter (batch-norm scale
/// and shift included) and `Z` starts at `lambda` and accumulates `g∘g` of
/// every chosen headline.
#[derive(Debug, Clone)]
pub struct NeuralTs {
    config: NeuralTsConfig,
    precision: Vec<f64>,
}

impl NeuralTs {
    pub fn new(config: NeuralTsConfig, num_params: usize) -> Self {
        Self {
            config,
            precision: vec![config.lambda; num_params],
        }
    }

    pub fn config(&self) -> NeuralTsConfig {
        self.config
    }

    pub fn precision(&self) -> &[f64] {
        &self.precision
    }

    /// Posterior mean, variance and flattened gradient for one input.
    pub fn posterior(
        &self,
        model: &PreferenceNet,
        x: &[f64],
    ) -> Result<(f64, f64, Vec<f64>), ModelError> {
        let (mean, grads) = model.score_gradient(x)?;
        let g = grads.flatten();
        assert_eq!(g.len(), self.precision.len(), "parameter count changed");
        let nu2 = self.config.nu * self.config.nu;
        let var = nu2
            * g.iter()
                .zip(&self.precision)
                .map(|(gj, zj)| gj * gj / zj)
                .sum::<f64>();
        Ok((mean, var, g))
    }

    /// Samples a score per candidate, returns the argmax and folds its
    /// gradient into the precision.
    ///
    /// # Panics
    /// If `candidates` is empty.
    pub fn select<R: Rng + ?Sized>(
        &mut self,
        model: &PreferenceNet,
        candidates: &[&Headline],
        rng: &mut R,
    ) -> Result<HeadlineId, ModelError> {
        assert!(!candidates.is_empty(), "no candidates");
        let mut sampled = Vec::with_capacity(candidates.len());
        let mut grads = Vec::with_capacity(candidates.len());
        for h in candidates {
            let (mean, var, g) = self.posterior(model, &h.embedding)?;
            let z: f64 = StandardNormal.sample(rng);
            sampled.push(mean + var.sqrt() * z);
            grads.push(g);
        }
        let chosen = argmax_lowest_id(candidates, &sampled);
        let idx = candidates
            .iter()
            .position(|h| h.id == chosen)
            .expect("chosen from candidates");
        for (zj, gj) in self.precision.iter_mut().zip(&grads[idx]) {
            *zj += gj * gj;
        }
        Ok(chosen)
    }
}
