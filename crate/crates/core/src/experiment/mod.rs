//! Seed sweeps, CSV export and plots.
//!
//! Every output file is a pure function of the configuration: replicates
//! may run on several workers, but results are merged in `(seed, policy)`
//! order and floats are written in shortest round-trip form.

mod online;
mod plot;
mod supervised;

pub use online::{run_online, OnlineRow, OnlineSummary, OnlineSummaryRow, BASELINE_NAME};
pub use plot::{
    accuracy_series, cumulative_series, emit_plots, AccuracyBand, CurveSeries, PLOT_FILES,
};
pub use supervised::{
    run_supervised, supervised_replicate, SummaryRow, SupervisedRow, SupervisedSummary,
};

use std::fmt;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bandit::{NetworkConfig, Policy, SimulationConfig, SimulationError};
use crate::corpus::{BinningScheme, Corpus, CorpusError};
use crate::data::{generate_synthetic, load_corpus, DataError, SyntheticSpec};
use crate::eval::EvalError;
use crate::model::{ModelError, TrainConfig};
use crate::seed::{stream, Stream};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("seed {seed}, {policy}: {source}")]
    Simulation {
        seed: u64,
        policy: String,
        #[source]
        source: SimulationError,
    },
    #[error("plot: {0}")]
    Plot(String),
}

impl ExperimentError {
    /// Process exit code for the error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => 2,
            ExperimentError::Io { .. } | ExperimentError::Csv { .. } => 3,
            ExperimentError::Data(_) | ExperimentError::Corpus(_) => 4,
            ExperimentError::Model(_)
            | ExperimentError::Eval(_)
            | ExperimentError::Simulation { .. } => 5,
            ExperimentError::Plot(_) => 6,
        }
    }
}

pub(crate) fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes rows under an explicit header, so empty tables keep their schema.
pub(crate) fn write_csv<T: Serialize>(
    path: &Path,
    header: &[&str],
    rows: &[T],
) -> Result<(), ExperimentError> {
    let file = File::create(path).map_err(io_error(path))?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(BufWriter::new(file));
    let csv_err = |e: csv::Error| ExperimentError::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(io_error(path))
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Supervised,
    Online,
    SynthGen,
    Plot,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "supervised" => Ok(Mode::Supervised),
            "online" => Ok(Mode::Online),
            "synth-gen" => Ok(Mode::SynthGen),
            "plot" => Ok(Mode::Plot),
            other => Err(format!(
                "unknown mode {other:?} (expected supervised, online, synth-gen or plot)"
            )),
        }
    }
}

/// A list of replicate seeds, written `a..b` (exclusive), `a..=b`
/// (inclusive) or as a comma-separated list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SeedsRepr", into = "String")]
pub struct Seeds(Vec<u64>);

#[derive(Deserialize)]
#[serde(untagged)]
enum SeedsRepr {
    Text(String),
    List(Vec<u64>),
}

impl TryFrom<SeedsRepr> for Seeds {
    type Error = String;

    fn try_from(r: SeedsRepr) -> Result<Self, Self::Error> {
        match r {
            SeedsRepr::Text(s) => s.parse(),
            SeedsRepr::List(v) => Seeds::new(v),
        }
    }
}

impl From<Seeds> for String {
    fn from(s: Seeds) -> String {
        s.to_string()
    }
}

impl Seeds {
    pub fn new(seeds: Vec<u64>) -> Result<Self, String> {
        if seeds.is_empty() {
            return Err("at least one seed is required".into());
        }
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != seeds.len() {
            return Err("seeds must be distinct".into());
        }
        Ok(Self(seeds))
    }

    /// Seeds `0..n`.
    pub fn first(n: u64) -> Self {
        Self::new((0..n).collect()).expect("n > 0")
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromStr for Seeds {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let num = |t: &str| {
            t.trim()
                .parse::<u64>()
                .map_err(|e| format!("bad seed {t:?}: {e}"))
        };
        let s = s.trim();
        if let Some((a, b)) = s.split_once("..=") {
            let (a, b) = (num(a)?, num(b)?);
            if b < a {
                return Err(format!("empty seed range {s:?}"));
            }
            return Seeds::new((a..=b).collect());
        }
        if let Some((a, b)) = s.split_once("..") {
            return Seeds::new((num(a)?..num(b)?).collect())
                .map_err(|_| format!("empty seed range {s:?}"));
        }
        Seeds::new(s.split(',').map(num).collect::<Result<_, _>>()?)
    }
}

impl fmt::Display for Seeds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let contiguous = self.0.windows(2).all(|w| w[1] == w[0] + 1);
        if contiguous && self.0.len() > 1 {
            write!(f, "{}..={}", self.0[0], self.0[self.0.len() - 1])
        } else {
            let parts: Vec<String> = self.0.iter().map(u64::to_string).collect();
            f.write_str(&parts.join(","))
        }
    }
}

/// Supervised protocol settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SupervisedConfig {
    pub train_fraction: f64,
    pub pairing_m: usize,
    pub network: NetworkConfig,
    pub train: TrainConfig,
    pub scheme: BinningScheme,
}

impl Default for SupervisedConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            pairing_m: 2,
            network: NetworkConfig::default(),
            train: TrainConfig::default(),
            scheme: BinningScheme::default(),
        }
    }
}

/// Where replicate corpora come from.
#[derive(Debug, Clone, PartialEq)]
pub enum CorpusSource {
    /// One corpus shared by every seed.
    Loaded(Corpus),
    /// A fresh corpus per seed from that seed's synthetic stream.
    Synthetic(SyntheticSpec),
}

impl CorpusSource {
    pub fn resolve(
        corpus: Option<&Path>,
        synthetic: Option<&SyntheticSpec>,
    ) -> Result<Self, ExperimentError> {
        match (corpus, synthetic) {
            (Some(_), Some(_)) => Err(ExperimentError::Config(
                "give either a corpus file or a synthetic spec, not both".into(),
            )),
            (Some(path), None) => Ok(CorpusSource::Loaded(load_corpus(path)?)),
            (None, Some(spec)) => {
                spec.validate().map_err(ExperimentError::Config)?;
                Ok(CorpusSource::Synthetic(spec.clone()))
            }
            (None, None) => Err(ExperimentError::Config(
                "no data: pass a corpus file or a synthetic spec".into(),
            )),
        }
    }

    pub fn corpus_for(&self, seed: u64) -> std::borrow::Cow<'_, Corpus> {
        match self {
            CorpusSource::Loaded(c) => std::borrow::Cow::Borrowed(c),
            CorpusSource::Synthetic(spec) => std::borrow::Cow::Owned(generate_synthetic(
                spec,
                &mut stream(seed, Stream::Synthetic),
            )),
        }
    }
}

/// Everything one invocation needs. Deserializable from TOML; all fields
/// have defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub corpus: Option<PathBuf>,
    pub synthetic: Option<SyntheticSpec>,
    pub seeds: Seeds,
    pub policies: Vec<Policy>,
    pub out: PathBuf,
    /// Worker threads for independent replicates.
    pub workers: usize,
    /// Emit plots after an online run.
    pub plot: bool,
    pub supervised: SupervisedConfig,
    pub simulation: SimulationConfig,
    /// Steps between points of the supervised-equivalent accuracy curve;
    /// 0 disables it.
    pub baseline_every: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Supervised,
            corpus: None,
            synthetic: None,
            seeds: Seeds::first(100),
            policies: Policy::ALL.to_vec(),
            out: PathBuf::from("results"),
            workers: 1,
            plot: false,
            supervised: SupervisedConfig::default(),
            simulation: SimulationConfig::default(),
            baseline_every: 50,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if self.mode == Mode::Online && self.policies.is_empty() {
            return bad("online mode needs at least one policy".into());
        }
        if self.corpus.is_some() && self.synthetic.is_some() {
            return bad("give either a corpus file or a synthetic spec, not both".into());
        }
        let s = &self.supervised;
        if s.pairing_m == 0 || !(s.train_fraction > 0.0 && s.train_fraction < 1.0) {
            return bad(format!("invalid supervised settings: {s:?}"));
        }
        s.train.validate()?;
        self.simulation
            .validate()
            .map_err(|e| ExperimentError::Config(e.to_string()))?;
        Ok(())
    }

    pub(crate) fn source(&self) -> Result<CorpusSource, ExperimentError> {
        CorpusSource::resolve(self.corpus.as_deref(), self.synthetic.as_ref())
    }

    pub(crate) fn prepare_out(&self) -> Result<(), ExperimentError> {
        std::fs::create_dir_all(&self.out).map_err(io_error(&self.out))
    }

    pub(crate) fn pool(&self) -> Result<rayon::ThreadPool, ExperimentError> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| ExperimentError::Config(format!("worker pool: {e}")))
    }
}
