use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mean_std, write_csv, CorpusSource, ExperimentConfig, ExperimentError};
use crate::bandit::{
    eval_cutoff, run_simulation, supervised_equivalent, AccuracyPoint, Policy, SimulationOutcome,
};

/// Policy label of the supervised-equivalent rows in `accuracy.csv`.
pub const BASELINE_NAME: &str = "SupervisedEquivalent";

pub(crate) const TRAJECTORY_HEADER: &[&str] = &[
    "seed",
    "policy",
    "day",
    "calendar_day",
    "chosen_id",
    "Y",
    "Y_star",
    "Y_minus",
    "n_candidates",
    "model_version",
];
pub(crate) const ACCURACY_HEADER: &[&str] = &["seed", "policy", "day", "accuracy", "history_size"];
const SEEDS_HEADER: &[&str] = &[
    "seed",
    "policy",
    "steps",
    "total_clicks",
    "normalized_clicks",
    "eval_cutoff",
];
const SUMMARY_HEADER: &[&str] = &[
    "policy",
    "n_seeds",
    "total_clicks_mean",
    "total_clicks_std",
    "normalized_clicks_mean",
    "normalized_clicks_std",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct TrajectoryRow {
    pub seed: u64,
    pub policy: String,
    pub day: usize,
    pub calendar_day: u32,
    pub chosen_id: u64,
    #[serde(rename = "Y")]
    pub y: u64,
    #[serde(rename = "Y_star")]
    pub y_star: u64,
    #[serde(rename = "Y_minus")]
    pub y_minus: u64,
    pub n_candidates: usize,
    pub model_version: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct AccuracyRow {
    pub seed: u64,
    pub policy: String,
    pub day: usize,
    pub accuracy: f64,
    pub history_size: usize,
}

/// One row of `online_seeds.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineRow {
    pub seed: u64,
    pub policy: String,
    pub steps: usize,
    pub total_clicks: u64,
    pub normalized_clicks: f64,
    pub eval_cutoff: usize,
}

/// One row of `online_summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineSummaryRow {
    pub policy: String,
    pub n_seeds: usize,
    pub total_clicks_mean: f64,
    pub total_clicks_std: f64,
    pub normalized_clicks_mean: f64,
    pub normalized_clicks_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnlineSummary {
    /// Ordered by seed, then by the configured policy order.
    pub outcomes: Vec<SimulationOutcome>,
    pub baselines: BTreeMap<u64, Vec<AccuracyPoint>>,
    pub rows: Vec<OnlineRow>,
    pub summary: Vec<OnlineSummaryRow>,
}

enum Job {
    Policy(u64, Policy),
    Baseline(u64),
}

enum Done {
    Policy(SimulationOutcome),
    Baseline(u64, Vec<AccuracyPoint>),
}

fn run_job(
    job: &Job,
    source: &CorpusSource,
    config: &ExperimentConfig,
) -> Result<Done, ExperimentError> {
    let sim_err = |seed: u64, policy: &str| {
        let policy = policy.to_string();
        move |source| ExperimentError::Simulation {
            seed,
            policy,
            source,
        }
    };
    match *job {
        Job::Policy(seed, policy) => {
            let corpus = source.corpus_for(seed);
            let sim = config.simulation.clone().with_policy(policy);
            let out = run_simulation(&corpus, &sim, seed).map_err(sim_err(seed, policy.name()))?;
            log::info!(
                "seed {seed} {policy}: {} steps, normalized clicks {:.2}",
                out.num_steps(),
                out.normalized_clicks()
            );
            Ok(Done::Policy(out))
        }
        Job::Baseline(seed) => {
            let corpus = source.corpus_for(seed);
            let sim = &config.simulation;
            let cutoff = eval_cutoff(&corpus, sim).map_err(sim_err(seed, BASELINE_NAME))?;
            let steps: Vec<usize> = (0..=cutoff).step_by(config.baseline_every).collect();
            let points = supervised_equivalent(&corpus, sim, seed, &steps)
                .map_err(sim_err(seed, BASELINE_NAME))?;
            Ok(Done::Baseline(seed, points))
        }
    }
}

fn summarize(rows: &[OnlineRow], policies: &[Policy]) -> Vec<OnlineSummaryRow> {
    policies
        .iter()
        .map(|p| {
            let mine: Vec<&OnlineRow> = rows.iter().filter(|r| r.policy == p.name()).collect();
            let clicks: Vec<f64> = mine.iter().map(|r| r.total_clicks as f64).collect();
            let norm: Vec<f64> = mine.iter().map(|r| r.normalized_clicks).collect();
            let (total_clicks_mean, total_clicks_std) = mean_std(&clicks);
            let (normalized_clicks_mean, normalized_clicks_std) = mean_std(&norm);
            OnlineSummaryRow {
                policy: p.name().to_string(),
                n_seeds: mine.len(),
                total_clicks_mean,
                total_clicks_std,
                normalized_clicks_mean,
                normalized_clicks_std,
            }
        })
        .collect()
}

/// Simulates every `(seed, policy)` pair, plus a supervised-equivalent
/// accuracy curve per seed, and writes `trajectories.csv`,
/// `accuracy.csv`, `online_seeds.csv` and `online_summary.csv`.
pub fn run_online(config: &ExperimentConfig) -> Result<OnlineSummary, ExperimentError> {
    config.validate()?;
    let source = config.source()?;
    config.prepare_out()?;
    let mut jobs = Vec::new();
    for &seed in config.seeds.as_slice() {
        jobs.extend(config.policies.iter().map(|&p| Job::Policy(seed, p)));
        if config.baseline_every > 0 && config.simulation.track_accuracy {
            jobs.push(Job::Baseline(seed));
        }
    }
    let done: Vec<Done> = if config.workers > 1 {
        config.pool()?.install(|| {
            jobs.par_iter()
                .map(|j| run_job(j, &source, config))
                .collect::<Result<_, _>>()
        })?
    } else {
        jobs.iter()
            .map(|j| run_job(j, &source, config))
            .collect::<Result<_, _>>()?
    };

    let mut outcomes = Vec::new();
    let mut baselines = BTreeMap::new();
    for d in done {
        match d {
            Done::Policy(o) => outcomes.push(o),
            Done::Baseline(seed, points) => {
                baselines.insert(seed, points);
            }
        }
    }

    let mut trajectories = Vec::new();
    let mut accuracy = Vec::new();
    let mut rows = Vec::new();
    for o in &outcomes {
        let policy = o.policy.name().to_string();
        trajectories.extend(o.trajectory.iter().map(|r| TrajectoryRow {
            seed: o.seed,
            policy: policy.clone(),
            day: r.step,
            calendar_day: r.day,
            chosen_id: r.chosen_id,
            y: r.clicks,
            y_star: r.best,
            y_minus: r.worst,
            n_candidates: r.n_candidates,
            model_version: r.model_version,
        }));
        accuracy.extend(o.accuracy.iter().map(|a| AccuracyRow {
            seed: o.seed,
            policy: policy.clone(),
            day: a.step,
            accuracy: a.accuracy,
            history_size: a.history_size,
        }));
        rows.push(OnlineRow {
            seed: o.seed,
            policy,
            steps: o.num_steps(),
            total_clicks: o.total_clicks(),
            normalized_clicks: o.normalized_clicks(),
            eval_cutoff: o.eval_cutoff,
        });
    }
    for (&seed, points) in &baselines {
        accuracy.extend(points.iter().map(|a| AccuracyRow {
            seed,
            policy: BASELINE_NAME.to_string(),
            day: a.step,
            accuracy: a.accuracy,
            history_size: a.history_size,
        }));
    }
    let summary = summarize(&rows, &config.policies);

    write_csv(
        &config.out.join("trajectories.csv"),
        TRAJECTORY_HEADER,
        &trajectories,
    )?;
    write_csv(&config.out.join("accuracy.csv"), ACCURACY_HEADER, &accuracy)?;
    write_csv(&config.out.join("online_seeds.csv"), SEEDS_HEADER, &rows)?;
    write_csv(
        &config.out.join("online_summary.csv"),
        SUMMARY_HEADER,
        &summary,
    )?;
    Ok(OnlineSummary {
        outcomes,
        baselines,
        rows,
        summary,
    })
}
