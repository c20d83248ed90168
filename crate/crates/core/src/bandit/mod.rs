//! Day-stepped online recommendation with delayed click feedback.
//!
//! A run starts from a warm-up history of headlines whose clicks are known,
//! trains an initial model, then walks the remaining calendar one
//! non-empty day (a *step*) at a time: pick one headline from that day's
//! candidates, learn its clicks `feedback_delay_days` steps later, retrain
//! whenever something arrives.

mod metrics;
mod policy;
mod sim;

pub use metrics::{audit_trajectory, cumulative, normalized_clicks, normalized_step, total_clicks};
pub use policy::{
    select_greedy, select_oracle, select_random, NeuralTs, NeuralTsConfig, OracleOrder,
};
pub use sim::{
    candidate_steps, eval_cutoff, record_step, replay, run_simulation, supervised_equivalent,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{BinningScheme, CorpusError, HeadlineId};
use crate::eval::EvalError;
use crate::model::{ModelError, NetShape, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    Greedy,
    #[serde(rename = "neural-ts")]
    NeuralTs,
    Random,
    OracleBest,
    OracleSecond,
}

impl Policy {
    pub const ALL: [Policy; 5] = [
        Policy::Greedy,
        Policy::NeuralTs,
        Policy::Random,
        Policy::OracleBest,
        Policy::OracleSecond,
    ];

    /// Whether selection consults the preference model.
    pub fn uses_model(self) -> bool {
        matches!(self, Policy::Greedy | Policy::NeuralTs)
    }

    pub fn name(self) -> &'static str {
        match self {
            Policy::Greedy => "Greedy",
            Policy::NeuralTs => "NeuralTS",
            Policy::Random => "Random",
            Policy::OracleBest => "OracleBest",
            Policy::OracleSecond => "OracleSecond",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = String;

    /// Case-insensitive; `-` and `_` are ignored, so `neural-ts`,
    /// `NeuralTS` and `neural_ts` all parse.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| !matches!(c, '-' | '_'))
            .map(|c| c.to_ascii_lowercase())
            .collect();
        Policy::ALL
            .into_iter()
            .find(|p| p.name().to_ascii_lowercase() == key)
            .ok_or_else(|| {
                format!("unknown policy {s:?} (expected greedy, neural-ts, random, oracle-best or oracle-second)")
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub hidden: usize,
    pub blocks: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            hidden: 200,
            blocks: 1,
        }
    }
}

impl NetworkConfig {
    pub fn shape(self, input_dim: usize) -> NetShape {
        NetShape::new(input_dim)
            .with_hidden(self.hidden)
            .with_blocks(self.blocks)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    /// Headlines published before this day form the warm-up pool.
    pub warmup_window_days: u32,
    pub warmup_sample_size: usize,
    /// Steps between a selection and the arrival of its clicks.
    pub feedback_delay_days: usize,
    pub pairing_m: usize,
    /// Last step whose retrained model is scored on the test pairs; `None`
    /// means the first step that offers a test-period headline.
    pub eval_cutoff_day: Option<usize>,
    pub policy: Policy,
    pub neural_ts: NeuralTsConfig,
    pub network: NetworkConfig,
    /// Schedule for the warm-up model.
    pub train: TrainConfig,
    /// Schedule for every retrain after feedback arrives.
    pub retrain: TrainConfig,
    /// Re-initialise weights before each retrain instead of warm-starting.
    pub cold_restart: bool,
    /// Histories smaller than this train without a validation split.
    pub min_history_for_validation: usize,
    /// Chronological share of the corpus that precedes the test period.
    pub train_fraction: f64,
    /// Record test-pair accuracy of each model up to the cutoff.
    pub track_accuracy: bool,
    pub scheme: BinningScheme,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            warmup_window_days: 90,
            warmup_sample_size: 90,
            feedback_delay_days: 7,
            pairing_m: 2,
            eval_cutoff_day: None,
            policy: Policy::Greedy,
            neural_ts: NeuralTsConfig::default(),
            network: NetworkConfig::default(),
            train: TrainConfig::default(),
            retrain: TrainConfig::default(),
            cold_restart: false,
            min_history_for_validation: 50,
            train_fraction: 0.8,
            track_accuracy: true,
            scheme: BinningScheme::default(),
        }
    }
}

impl SimulationConfig {
    pub fn with_policy(self, policy: Policy) -> Self {
        Self { policy, ..self }
    }

    pub fn validate(&self) -> Result<(), SimulationError> {
        let bad = |m: &str| Err(SimulationError::InvalidConfig(m.to_string()));
        if self.warmup_window_days == 0 {
            return bad("warmup_window_days must be positive");
        }
        if self.warmup_sample_size == 0 {
            return bad("warmup_sample_size must be positive");
        }
        if self.pairing_m == 0 {
            return bad("pairing_m must be positive");
        }
        if !(self.neural_ts.nu > 0.0 && self.neural_ts.nu.is_finite()) {
            return bad("neural_ts.nu must be positive");
        }
        if !(self.neural_ts.lambda > 0.0 && self.neural_ts.lambda.is_finite()) {
            return bad("neural_ts.lambda must be positive");
        }
        if self.network.hidden == 0 {
            return bad("network.hidden must be positive");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad("train_fraction must lie strictly between 0 and 1");
        }
        self.train.validate()?;
        self.retrain.validate()?;
        Ok(())
    }
}

/// One step of a trajectory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayRecord {
    /// 1-based index among non-empty post-warm-up days.
    pub step: usize,
    /// Calendar day of the candidates.
    pub day: u32,
    pub chosen_id: HeadlineId,
    /// Clicks of the chosen headline.
    pub clicks: u64,
    /// Highest clicks among the candidates.
    pub best: u64,
    /// Lowest clicks among the candidates.
    pub worst: u64,
    pub n_candidates: usize,
    /// Number of retrains behind the model that made the selection.
    pub model_version: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyPoint {
    /// Step after which the model was trained; 0 for the warm-up model.
    pub step: usize,
    pub accuracy: f64,
    pub history_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutcome {
    pub policy: Policy,
    pub seed: u64,
    pub trajectory: Vec<DayRecord>,
    pub accuracy: Vec<AccuracyPoint>,
    pub warmup_ids: Vec<HeadlineId>,
    /// Headline ids in the order their clicks became known.
    pub history_ids: Vec<HeadlineId>,
    pub eval_cutoff: usize,
    /// Number of test pairs behind each accuracy point.
    pub n_test_pairs: usize,
}

impl SimulationOutcome {
    pub fn num_steps(&self) -> usize {
        self.trajectory.len()
    }

    pub fn total_clicks(&self) -> u64 {
        total_clicks(&self.trajectory)
    }

    pub fn normalized_clicks(&self) -> f64 {
        normalized_clicks(&self.trajectory)
    }
}

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("no headlines published before day {0} to draw the warm-up history from")]
    EmptyWarmupPool(u32),
    #[error("no headlines published on or after day {0}; nothing to simulate")]
    NoOnlineDays(u32),
    #[error("warm-up history yields no preference pairs (all headlines share one rank)")]
    NoWarmupPairs,
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}
