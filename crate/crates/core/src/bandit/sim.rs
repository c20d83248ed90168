use std::collections::{BTreeMap, HashSet, VecDeque};

use rand::seq::index;
use rand_chacha::ChaCha8Rng;

use super::policy::{select_greedy, select_oracle, select_random, NeuralTs, OracleOrder};
use super::{
    AccuracyPoint, DayRecord, Policy, SimulationConfig, SimulationError, SimulationOutcome,
};
use crate::corpus::{chronological_split, Corpus, Headline, HeadlineId};
use crate::eval::pair_accuracy;
use crate::model::{train, NetShape, PreferenceNet, TrainConfig};
use crate::pairs::{generate_pairs, PairDataset};
use crate::seed::{stream, Stream};

/// Post-warm-up calendar days that have at least one headline, in order,
/// each with its candidates sorted by id. Step `t` is entry `t − 1`.
pub fn candidate_steps(corpus: &Corpus, warmup_window_days: u32) -> Vec<(u32, Vec<&Headline>)> {
    let mut by_day: BTreeMap<u32, Vec<&Headline>> = BTreeMap::new();
    for h in corpus
        .headlines()
        .iter()
        .filter(|h| h.day >= warmup_window_days)
    {
        by_day.entry(h.day).or_default().push(h);
    }
    by_day
        .into_iter()
        .map(|(day, mut hs)| {
            hs.sort_by_key(|h| h.id);
            (day, hs)
        })
        .collect()
}

/// Builds the trajectory entry for choosing `chosen` among `candidates`.
///
/// # Panics
/// If `chosen` is not among `candidates`.
pub fn record_step(
    step: usize,
    day: u32,
    candidates: &[&Headline],
    chosen: HeadlineId,
    model_version: u64,
) -> DayRecord {
    let pick = candidates
        .iter()
        .find(|h| h.id == chosen)
        .unwrap_or_else(|| panic!("headline {chosen} is not a candidate on day {day}"));
    DayRecord {
        step,
        day,
        chosen_id: chosen,
        clicks: pick.clicks,
        best: candidates
            .iter()
            .map(|h| h.clicks)
            .max()
            .expect("non-empty"),
        worst: candidates
            .iter()
            .map(|h| h.clicks)
            .min()
            .expect("non-empty"),
        n_candidates: candidates.len(),
        model_version,
    }
}

/// Rebuilds a trajectory from its recorded choices alone.
pub fn replay(
    corpus: &Corpus,
    warmup_window_days: u32,
    trajectory: &[DayRecord],
) -> Result<Vec<DayRecord>, String> {
    let steps = candidate_steps(corpus, warmup_window_days);
    trajectory
        .iter()
        .map(|r| {
            let (day, candidates) = steps
                .get(r.step.wrapping_sub(1))
                .ok_or_else(|| format!("step {} is outside the calendar", r.step))?;
            if !candidates.iter().any(|h| h.id == r.chosen_id) {
                return Err(format!(
                    "step {}: headline {} was not offered",
                    r.step, r.chosen_id
                ));
            }
            Ok(record_step(
                r.step,
                *day,
                candidates,
                r.chosen_id,
                r.model_version,
            ))
        })
        .collect()
}

/// Model fitting with its own random streams.
struct Learner<'a> {
    corpus: &'a Corpus,
    config: &'a SimulationConfig,
    shape: NetShape,
    init: ChaCha8Rng,
    pairing: ChaCha8Rng,
    shuffle: ChaCha8Rng,
}

impl<'a> Learner<'a> {
    fn new(corpus: &'a Corpus, config: &'a SimulationConfig, seed: u64) -> Self {
        Self {
            corpus,
            config,
            shape: config.network.shape(corpus.dim()),
            init: stream(seed, Stream::Init),
            pairing: stream(seed, Stream::Pairing),
            shuffle: stream(seed, Stream::Shuffle),
        }
    }

    fn fresh_net(&mut self) -> PreferenceNet {
        PreferenceNet::new(self.shape, &mut self.init)
    }

    /// Trains `net` on pairs from `history`. Returns `false`, leaving `net`
    /// untouched, when the history has no cross-rank pairs.
    fn fit(
        &mut self,
        net: &mut PreferenceNet,
        history: &[&Headline],
        schedule: &TrainConfig,
        restart: bool,
    ) -> Result<bool, SimulationError> {
        let pairs = generate_pairs(
            history,
            &self.config.scheme,
            self.config.pairing_m,
            &mut self.pairing,
        );
        let (val, fit_on) = if history.len() >= self.config.min_history_for_validation {
            pairs.split(schedule.validation_fraction, &mut self.pairing)
        } else {
            (PairDataset::default(), pairs)
        };
        if fit_on.is_empty() {
            return Ok(false);
        }
        if restart {
            *net = self.fresh_net();
        }
        train(net, &fit_on, &val, self.corpus, schedule, &mut self.shuffle)?;
        Ok(true)
    }
}

struct TestSet {
    pairs: PairDataset,
    ids: HashSet<HeadlineId>,
    train_part: Vec<Headline>,
}

fn test_set(
    corpus: &Corpus,
    config: &SimulationConfig,
    seed: u64,
) -> Result<TestSet, SimulationError> {
    let (train_part, test_part) = chronological_split(corpus.headlines(), config.train_fraction)?;
    let pairs = generate_pairs(
        &test_part,
        &config.scheme,
        config.pairing_m,
        &mut stream(seed, Stream::EvalPairs),
    );
    Ok(TestSet {
        pairs,
        ids: test_part.iter().map(|h| h.id).collect(),
        train_part,
    })
}

fn first_test_step(steps: &[(u32, Vec<&Headline>)], test_ids: &HashSet<HeadlineId>) -> usize {
    steps
        .iter()
        .position(|(_, c)| c.iter().any(|h| test_ids.contains(&h.id)))
        .map_or(steps.len(), |i| i + 1)
}

/// Last step whose models are scored on the test pairs: the configured
/// cutoff, or else the first step offering a test-period headline.
pub fn eval_cutoff(corpus: &Corpus, config: &SimulationConfig) -> Result<usize, SimulationError> {
    if let Some(day) = config.eval_cutoff_day {
        return Ok(day);
    }
    let (_, test_part) = chronological_split(corpus.headlines(), config.train_fraction)?;
    let ids = test_part.iter().map(|h| h.id).collect();
    Ok(first_test_step(
        &candidate_steps(corpus, config.warmup_window_days),
        &ids,
    ))
}

/// Runs one seeded simulation of `config.policy` over `corpus`.
///
/// Each step selects with the model trained on feedback delivered before
/// it, enqueues the choice, delivers every choice now due, and retrains
/// once if anything arrived. With zero delay a choice is therefore in the
/// history by the end of its own step.
///
/// Policies that never consult the model skip training, except while
/// accuracy is being tracked.
pub fn run_simulation(
    corpus: &Corpus,
    config: &SimulationConfig,
    seed: u64,
) -> Result<SimulationOutcome, SimulationError> {
    config.validate()?;
    let test = test_set(corpus, config, seed)?;
    let track = config.track_accuracy && !test.pairs.is_empty();

    let mut pool: Vec<&Headline> = corpus
        .headlines()
        .iter()
        .filter(|h| h.day < config.warmup_window_days)
        .collect();
    if pool.is_empty() {
        return Err(SimulationError::EmptyWarmupPool(config.warmup_window_days));
    }
    pool.sort_by_key(|h| (h.day, h.id));
    let k = config.warmup_sample_size.min(pool.len());
    let mut picks = index::sample(&mut stream(seed, Stream::Warmup), pool.len(), k).into_vec();
    picks.sort_unstable();
    let mut history: Vec<&Headline> = picks.iter().map(|&i| pool[i]).collect();
    let warmup_ids: Vec<HeadlineId> = history.iter().map(|h| h.id).collect();

    let steps = candidate_steps(corpus, config.warmup_window_days);
    if steps.is_empty() {
        return Err(SimulationError::NoOnlineDays(config.warmup_window_days));
    }
    let eval_cutoff = config
        .eval_cutoff_day
        .unwrap_or_else(|| first_test_step(&steps, &test.ids));

    let mut learner = Learner::new(corpus, config, seed);
    let mut net = learner.fresh_net();
    let needs_model = config.policy.uses_model();
    let mut accuracy = Vec::new();
    let score = |net: &PreferenceNet,
                 step: usize,
                 history_size: usize|
     -> Result<AccuracyPoint, SimulationError> {
        Ok(AccuracyPoint {
            step,
            accuracy: pair_accuracy(net, &test.pairs, corpus)?,
            history_size,
        })
    };
    if needs_model || track {
        if !learner.fit(&mut net, &history, &config.train, false)? {
            return Err(SimulationError::NoWarmupPairs);
        }
        if track {
            accuracy.push(score(&net, 0, history.len())?);
        }
    }

    let mut policy_rng = stream(seed, Stream::Policy);
    let mut sampler = (config.policy == Policy::NeuralTs)
        .then(|| NeuralTs::new(config.neural_ts, net.params().num_params()));
    let mut pending: VecDeque<(usize, HeadlineId)> = VecDeque::new();
    let mut version = 0u64;
    let mut trajectory = Vec::with_capacity(steps.len());

    for (i, (day, candidates)) in steps.iter().enumerate() {
        let t = i + 1;
        let chosen = match config.policy {
            Policy::Greedy => select_greedy(&net, candidates)?,
            Policy::NeuralTs => sampler
                .as_mut()
                .expect("sampler exists for NeuralTS")
                .select(&net, candidates, &mut policy_rng)?,
            Policy::Random => select_random(candidates, &mut policy_rng),
            Policy::OracleBest => select_oracle(candidates, OracleOrder::Best),
            Policy::OracleSecond => select_oracle(candidates, OracleOrder::SecondBest),
        };
        trajectory.push(record_step(t, *day, candidates, chosen, version));
        pending.push_back((t + config.feedback_delay_days, chosen));

        let mut arrived = false;
        while let Some(&(due, id)) = pending.front() {
            if due > t {
                break;
            }
            pending.pop_front();
            history.push(corpus.get(id).expect("candidates come from the corpus"));
            arrived = true;
        }
        if !arrived {
            continue;
        }
        version += 1;
        let evaluate = track && t <= eval_cutoff;
        if needs_model || evaluate {
            let trained = learner.fit(&mut net, &history, &config.retrain, config.cold_restart)?;
            if trained && evaluate {
                accuracy.push(score(&net, t, history.len())?);
            }
        }
    }

    Ok(SimulationOutcome {
        policy: config.policy,
        seed,
        trajectory,
        accuracy,
        warmup_ids,
        history_ids: history.iter().map(|h| h.id).collect(),
        eval_cutoff,
        n_test_pairs: test.pairs.len(),
    })
}

/// Comparison curve: at each requested step, a fresh model trained with
/// the warm-up schedule on as many headlines as an online run holds by
/// then, sampled uniformly from the pre-test headlines published before
/// that step's day. Scored on the same test pairs as [`run_simulation`].
pub fn supervised_equivalent(
    corpus: &Corpus,
    config: &SimulationConfig,
    seed: u64,
    at_steps: &[usize],
) -> Result<Vec<AccuracyPoint>, SimulationError> {
    config.validate()?;
    let test = test_set(corpus, config, seed)?;
    if test.pairs.is_empty() {
        return Ok(Vec::new());
    }
    let steps = candidate_steps(corpus, config.warmup_window_days);
    let mut rng = stream(seed, Stream::Baseline);
    let shape = config.network.shape(corpus.dim());
    let mut out = Vec::new();
    for &t in at_steps {
        let before_day = match t {
            0 => config.warmup_window_days,
            t => match steps.get(t - 1) {
                Some((day, _)) => *day,
                None => continue,
            },
        };
        let pool: Vec<&Headline> = test
            .train_part
            .iter()
            .filter(|h| h.day < before_day)
            .collect();
        let size = config.warmup_sample_size + t.saturating_sub(config.feedback_delay_days);
        let k = size.min(pool.len());
        let mut picks = index::sample(&mut rng, pool.len(), k).into_vec();
        picks.sort_unstable();
        let sample: Vec<&Headline> = picks.iter().map(|&i| pool[i]).collect();
        let pairs = generate_pairs(&sample, &config.scheme, config.pairing_m, &mut rng);
        let (val, fit_on) = if sample.len() >= config.min_history_for_validation {
            pairs.split(config.train.validation_fraction, &mut rng)
        } else {
            (PairDataset::default(), pairs)
        };
        if fit_on.is_empty() {
            continue;
        }
        let mut net = PreferenceNet::new(shape, &mut rng);
        train(&mut net, &fit_on, &val, corpus, &config.train, &mut rng)?;
        out.push(AccuracyPoint {
            step: t,
            accuracy: pair_accuracy(&net, &test.pairs, corpus)?,
            history_size: sample.len(),
        });
    }
    Ok(out)
}
