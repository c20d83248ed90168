use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mean_std, write_csv, ExperimentConfig, ExperimentError, SupervisedConfig};
use crate::corpus::{chronological_split, Corpus};
use crate::eval::evaluate;
use crate::model::{train, PreferenceNet};
use crate::pairs::generate_pairs;
use crate::seed::{stream, Stream};

const SEEDS_HEADER: &[&str] = &[
    "seed",
    "accuracy",
    "weighted_accuracy",
    "n_train_pairs",
    "n_val_pairs",
    "n_test_pairs",
    "skipped_ranks",
    "epochs",
    "best_epoch",
];
const SUMMARY_HEADER: &[&str] = &["metric", "n_seeds", "mean", "std"];

/// One row of `supervised_seeds.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupervisedRow {
    pub seed: u64,
    pub accuracy: f64,
    pub weighted_accuracy: f64,
    pub n_train_pairs: usize,
    pub n_val_pairs: usize,
    pub n_test_pairs: usize,
    pub skipped_ranks: usize,
    pub epochs: usize,
    pub best_epoch: usize,
}

/// One row of `supervised_summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub metric: String,
    pub n_seeds: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedSummary {
    pub rows: Vec<SupervisedRow>,
    pub summary: Vec<SummaryRow>,
}

/// Trains and evaluates one replicate: chronological split, cross-rank
/// pairs, random train/validation split of the training pairs.
pub fn supervised_replicate(
    corpus: &Corpus,
    config: &SupervisedConfig,
    seed: u64,
) -> Result<SupervisedRow, ExperimentError> {
    let (train_part, test_part) = chronological_split(corpus.headlines(), config.train_fraction)?;
    let mut pairing = stream(seed, Stream::Pairing);
    let all = generate_pairs(&train_part, &config.scheme, config.pairing_m, &mut pairing);
    let (val, fit_on) = all.split(config.train.validation_fraction, &mut pairing);
    let test = generate_pairs(
        &test_part,
        &config.scheme,
        config.pairing_m,
        &mut stream(seed, Stream::EvalPairs),
    );
    let mut net = PreferenceNet::new(
        config.network.shape(corpus.dim()),
        &mut stream(seed, Stream::Init),
    );
    let report = train(
        &mut net,
        &fit_on,
        &val,
        corpus,
        &config.train,
        &mut stream(seed, Stream::Shuffle),
    )?;
    let eval = evaluate(&net, &test, corpus, &config.scheme)?;
    Ok(SupervisedRow {
        seed,
        accuracy: eval.accuracy,
        weighted_accuracy: eval.weighted_accuracy,
        n_train_pairs: fit_on.len(),
        n_val_pairs: val.len(),
        n_test_pairs: test.len(),
        skipped_ranks: eval.skipped_ranks,
        epochs: report.history.len(),
        best_epoch: report.best_epoch,
    })
}

fn summarize(rows: &[SupervisedRow]) -> Vec<SummaryRow> {
    let metric = |name: &str, get: fn(&SupervisedRow) -> f64| {
        let values: Vec<f64> = rows.iter().map(get).collect();
        let (mean, std) = mean_std(&values);
        SummaryRow {
            metric: name.to_string(),
            n_seeds: values.len(),
            mean,
            std,
        }
    };
    vec![
        metric("accuracy", |r| r.accuracy),
        metric("weighted_accuracy", |r| r.weighted_accuracy),
    ]
}

/// Runs every seed and writes `supervised_seeds.csv` and
/// `supervised_summary.csv` into the output directory.
pub fn run_supervised(config: &ExperimentConfig) -> Result<SupervisedSummary, ExperimentError> {
    config.validate()?;
    let source = config.source()?;
    config.prepare_out()?;
    let run = |seed: u64| -> Result<SupervisedRow, ExperimentError> {
        let corpus = source.corpus_for(seed);
        let row = supervised_replicate(&corpus, &config.supervised, seed)?;
        log::info!("seed {seed}: accuracy {:.4}", row.accuracy);
        Ok(row)
    };
    let rows = if config.workers > 1 {
        config.pool()?.install(|| {
            config
                .seeds
                .as_slice()
                .par_iter()
                .map(|&s| run(s))
                .collect::<Result<Vec<_>, _>>()
        })?
    } else {
        config
            .seeds
            .as_slice()
            .iter()
            .map(|&s| run(s))
            .collect::<Result<Vec<_>, _>>()?
    };
    let summary = summarize(&rows);
    write_csv(
        &config.out.join("supervised_seeds.csv"),
        SEEDS_HEADER,
        &rows,
    )?;
    write_csv(
        &config.out.join("supervised_summary.csv"),
        SUMMARY_HEADER,
        &summary,
    )?;
    Ok(SupervisedSummary { rows, summary })
}
