#![allow(dead_code)]

pub mod gradcheck;

use newsrank::bandit::{NetworkConfig, SimulationConfig};
use newsrank::data::{generate_synthetic, SyntheticSpec};
use newsrank::model::TrainConfig;
use newsrank::seed::{stream, Stream};
use newsrank::{Corpus, Headline};

/// A few hundred headlines over 100 days in 8 dimensions.
pub fn small_spec() -> SyntheticSpec {
    SyntheticSpec {
        n_headlines: 400,
        n_days: 100,
        dim: 8,
        ..SyntheticSpec::default()
    }
}

pub fn small_corpus(seed: u64) -> Corpus {
    generate_synthetic(&small_spec(), &mut stream(seed, Stream::Synthetic))
}

pub fn quick_train(max_epochs: usize) -> TrainConfig {
    TrainConfig {
        batch_size: 32,
        max_epochs,
        ..TrainConfig::default()
    }
}

/// Simulation settings scaled to [`small_corpus`].
pub fn small_sim() -> SimulationConfig {
    SimulationConfig {
        warmup_window_days: 30,
        warmup_sample_size: 30,
        feedback_delay_days: 3,
        network: NetworkConfig {
            hidden: 8,
            blocks: 1,
        },
        train: quick_train(8),
        retrain: quick_train(1),
        ..SimulationConfig::default()
    }
}

pub fn headline(id: u64, clicks: u64, day: u32, embedding: Vec<f64>) -> Headline {
    Headline {
        id,
        embedding,
        clicks,
        day,
        text: None,
    }
}
