use std::collections::HashMap;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::loss::mrl_loss;
use super::net::{Mode, PairBatch, PreferenceNet};
use super::ModelError;
use crate::corpus::{Corpus, HeadlineId};
use crate::pairs::{PairDataset, PreferencePair};

/// Optimization schedule. Defaults are the tuned configuration for the
/// newsroom data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Decoupled: applied as `θ ← θ − lr·wd·θ` ahead of each Adam step.
    pub weight_decay: f64,
    pub margin: f64,
    /// Non-improving epochs before the learning rate is cut.
    pub lr_patience: usize,
    pub lr_factor: f64,
    /// Non-improving epochs (since the best one) before training stops.
    pub early_stop_patience: usize,
    pub max_epochs: usize,
    pub adam: AdamConfig,
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.005,
            batch_size: 128,
            weight_decay: 0.001,
            margin: 1.0,
            lr_patience: 1,
            lr_factor: 0.1,
            early_stop_patience: 5,
            max_epochs: 100,
            adam: AdamConfig::default(),
            validation_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let ok = self.learning_rate > 0.0
            && self.batch_size > 0
            && self.weight_decay >= 0.0
            && self.margin >= 0.0
            && self.lr_factor > 0.0
            && self.lr_factor < 1.0
            && self.max_epochs > 0
            && (0.0..1.0).contains(&self.validation_fraction);
        if ok {
            Ok(())
        } else {
            Err(ModelError::InvalidConfig(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// `None` when there was no validation set.
    pub val_loss: Option<f64>,
    /// Learning rate used during this epoch.
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub history: Vec<EpochRecord>,
    /// Index into `history` of the epoch whose parameters were kept.
    pub best_epoch: usize,
}

/// Embeddings gathered into one matrix with an id lookup.
pub(crate) struct EmbeddingTable {
    rows: HashMap<HeadlineId, usize>,
    matrix: Array2<f64>,
}

impl EmbeddingTable {
    pub(crate) fn new<'a>(
        corpus: &Corpus,
        ids: impl IntoIterator<Item = &'a HeadlineId>,
    ) -> Result<Self, ModelError> {
        let mut rows = HashMap::new();
        let mut flat = Vec::new();
        for &id in ids {
            if rows.contains_key(&id) {
                continue;
            }
            let h = corpus.get(id).ok_or(ModelError::UnknownHeadline(id))?;
            rows.insert(id, rows.len());
            flat.extend_from_slice(&h.embedding);
        }
        let matrix =
            Array2::from_shape_vec((rows.len(), corpus.dim()), flat).expect("rows of width dim");
        Ok(Self { rows, matrix })
    }

    fn batch(&self, pairs: &[PreferencePair]) -> PairBatch {
        let low: Vec<usize> = pairs.iter().map(|p| self.rows[&p.low]).collect();
        let high: Vec<usize> = pairs.iter().map(|p| self.rows[&p.high]).collect();
        PairBatch {
            low: self.matrix.select(Axis(0), &low),
            high: self.matrix.select(Axis(0), &high),
        }
    }

    pub(crate) fn scores(
        &self,
        net: &PreferenceNet,
    ) -> Result<HashMap<HeadlineId, f64>, ModelError> {
        let s = net.infer_batch(self.matrix.view())?;
        Ok(self.rows.iter().map(|(&id, &row)| (id, s[row])).collect())
    }
}

/// Mean margin loss over `pairs` with running batch-norm statistics.
pub fn inference_loss(
    net: &PreferenceNet,
    pairs: &PairDataset,
    corpus: &Corpus,
    margin: f64,
) -> Result<f64, ModelError> {
    if pairs.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let table = EmbeddingTable::new(corpus, pairs.source_ids())?;
    let scores = table.scores(net)?;
    let total: f64 = pairs
        .iter()
        .map(|p| mrl_loss(scores[&p.low], scores[&p.high], margin))
        .sum();
    Ok(total / pairs.len() as f64)
}

/// Minibatch training with plateau learning-rate cuts and early stopping.
///
/// Monitors validation loss (training loss when `val_pairs` is empty) and
/// leaves `net` holding the parameters of the best monitored epoch, in
/// inference mode.
pub fn train<R: Rng + ?Sized>(
    net: &mut PreferenceNet,
    train_pairs: &PairDataset,
    val_pairs: &PairDataset,
    corpus: &Corpus,
    config: &TrainConfig,
    rng: &mut R,
) -> Result<TrainReport, ModelError> {
    config.validate()?;
    if train_pairs.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    if val_pairs.is_empty() {
        log::warn!("no validation pairs; scheduling on training loss");
    }
    let table = EmbeddingTable::new(
        corpus,
        train_pairs
            .source_ids()
            .iter()
            .chain(val_pairs.source_ids()),
    )?;
    let mut order: Vec<PreferencePair> = train_pairs.pairs().to_vec();
    let mut adam = Adam::new(net.params(), config.adam);
    let mut lr = config.learning_rate;
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, PreferenceNet)> = None;
    let mut since_best = 0;
    let mut since_cut = 0;

    for epoch in 0..config.max_epochs {
        net.set_mode(Mode::Training);
        order.shuffle(rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch = table.batch(chunk);
            let (loss, grads, stats) = net.loss_and_gradients(&batch, config.margin)?;
            adam.step(net.params_mut(), &grads, lr, config.weight_decay)?;
            net.update_running_stats(&stats);
            loss_sum += loss * chunk.len() as f64;
        }
        net.set_mode(Mode::Inference);
        let train_loss = loss_sum / order.len() as f64;
        let val_loss = if val_pairs.is_empty() {
            None
        } else {
            let scores = table.scores(net)?;
            let total: f64 = val_pairs
                .iter()
                .map(|p| mrl_loss(scores[&p.low], scores[&p.high], config.margin))
                .sum();
            Some(total / val_pairs.len() as f64)
        };
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            lr,
        });

        let monitored = val_loss.unwrap_or(train_loss);
        let improved = best.as_ref().is_none_or(|(b, _, _)| monitored < *b);
        if improved {
            best = Some((monitored, epoch, net.clone()));
            since_best = 0;
            since_cut = 0;
        } else {
            since_best += 1;
            since_cut += 1;
            if since_best >= config.early_stop_patience {
                break;
            }
            if since_cut >= config.lr_patience.max(1) {
                lr *= config.lr_factor;
                since_cut = 0;
            }
        }
    }

    let (_, best_epoch, best_net) = best.expect("at least one epoch ran");
    *net = best_net;
    net.set_mode(Mode::Inference);
    Ok(TrainReport {
        history,
        best_epoch,
    })
}
