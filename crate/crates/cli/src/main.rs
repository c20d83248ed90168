use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use newsrank::bandit::Policy;
use newsrank::data::{generate_synthetic, save_corpus, SyntheticSpec};
use newsrank::experiment::{
    emit_plots, run_online, run_supervised, ExperimentConfig, ExperimentError, Mode, Seeds,
};
use newsrank::seed::{stream, Stream};

/// Preference-model experiments on headline corpora.
///
/// Settings are layered: built-in defaults, then the `--config` TOML file,
/// then command-line flags.
#[derive(Debug, Parser)]
#[command(name = "newsrank", version)]
struct Cli {
    /// What to run.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,

    /// Corpus file (JSON lines).
    #[arg(long, conflicts_with = "synthetic")]
    corpus: Option<PathBuf>,

    /// Synthetic data: `default`, `newsroom-shaped`, `noiseless`, or a TOML
    /// file with a synthetic spec.
    #[arg(long, num_args = 0..=1, default_missing_value = "default")]
    synthetic: Option<String>,

    /// Seeds: `a..b`, `a..=b` or a comma list. Defaults to 0..=99, or 0..20
    /// in online mode, or 0 in synth-gen mode.
    #[arg(long, value_parser = parse_seeds)]
    seeds: Option<Seeds>,

    /// Comma-separated online policies.
    #[arg(long, value_delimiter = ',', value_parser = parse_policy)]
    policies: Option<Vec<Policy>>,

    /// Output directory.
    #[arg(long, env = "NEWSRANK_OUT")]
    out: Option<PathBuf>,

    /// Worker threads for independent replicates.
    #[arg(long)]
    workers: Option<usize>,

    /// Emit figures after an online run.
    #[arg(long)]
    plot: bool,

    /// TOML file with configuration overrides.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Use 100 online seeds instead of 20.
    #[arg(long)]
    full: bool,

    /// More log output (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
}

fn parse_seeds(s: &str) -> Result<Seeds, String> {
    s.parse()
}

fn parse_policy(s: &str) -> Result<Policy, String> {
    s.parse()
}

fn config_error(message: String) -> ExperimentError {
    ExperimentError::Config(message)
}

fn synthetic_spec(arg: &str) -> Result<SyntheticSpec, ExperimentError> {
    match arg {
        "default" => Ok(SyntheticSpec::default()),
        "newsroom-shaped" => Ok(SyntheticSpec::newsroom_shaped()),
        "noiseless" => Ok(SyntheticSpec {
            noise_scale: 0.0,
            ..SyntheticSpec::default()
        }),
        path => {
            let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
                path: PathBuf::from(path),
                source,
            })?;
            toml::from_str(&text).map_err(|e| config_error(format!("{path}: {e}")))
        }
    }
}

fn load_config_file(path: &Path) -> Result<(ExperimentConfig, bool), ExperimentError> {
    let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    let has_seeds = table.contains_key("seeds");
    let cfg: ExperimentConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    Ok((cfg, has_seeds))
}

fn build_config(cli: Cli) -> Result<ExperimentConfig, ExperimentError> {
    let (mut cfg, file_seeds) = match &cli.config {
        Some(path) => load_config_file(path)?,
        None => (ExperimentConfig::default(), false),
    };
    if let Some(mode) = cli.mode {
        cfg.mode = mode;
    }
    if let Some(corpus) = cli.corpus {
        cfg.corpus = Some(corpus);
        cfg.synthetic = None;
    }
    if let Some(spec) = &cli.synthetic {
        cfg.synthetic = Some(synthetic_spec(spec)?);
        cfg.corpus = None;
    }
    match cli.seeds {
        Some(seeds) => cfg.seeds = seeds,
        None if !file_seeds => {
            cfg.seeds = match cfg.mode {
                Mode::Online if cli.full => Seeds::first(100),
                Mode::Online => Seeds::first(20),
                Mode::SynthGen => Seeds::first(1),
                _ => Seeds::first(100),
            }
        }
        None => {}
    }
    if let Some(policies) = cli.policies {
        cfg.policies = policies;
    }
    if let Some(out) = cli.out {
        cfg.out = out;
    }
    if let Some(workers) = cli.workers {
        cfg.workers = workers;
    }
    cfg.plot |= cli.plot;
    Ok(cfg)
}

fn synth_gen(cfg: &ExperimentConfig) -> Result<(), ExperimentError> {
    let spec = cfg
        .synthetic
        .clone()
        .ok_or_else(|| config_error("synth-gen needs --synthetic".into()))?;
    spec.validate().map_err(config_error)?;
    std::fs::create_dir_all(&cfg.out).map_err(|source| ExperimentError::Io {
        path: cfg.out.clone(),
        source,
    })?;
    for &seed in cfg.seeds.as_slice() {
        let corpus = generate_synthetic(&spec, &mut stream(seed, Stream::Synthetic));
        let path = cfg.out.join(format!("synthetic_{seed}.jsonl"));
        save_corpus(&path, &format!("synthetic-{seed}"), &corpus)?;
        println!("{}: {} headlines", path.display(), corpus.len());
    }
    Ok(())
}

fn run(cfg: &ExperimentConfig) -> Result<(), ExperimentError> {
    match cfg.mode {
        Mode::Supervised => {
            let s = run_supervised(cfg)?;
            for row in &s.summary {
                println!(
                    "{:<18} mean {:.4}  std {:.4}  ({} seeds)",
                    row.metric, row.mean, row.std, row.n_seeds
                );
            }
        }
        Mode::Online => {
            let s = run_online(cfg)?;
            for row in &s.summary {
                println!(
                    "{:<13} normalized clicks {:8.2} ± {:6.2}   total clicks {:12.0} ± {:10.0}  ({} seeds)",
                    row.policy,
                    row.normalized_clicks_mean,
                    row.normalized_clicks_std,
                    row.total_clicks_mean,
                    row.total_clicks_std,
                    row.n_seeds
                );
            }
            if cfg.plot {
                for path in emit_plots(&cfg.out)? {
                    println!("wrote {}", path.display());
                }
            }
        }
        Mode::SynthGen => synth_gen(cfg)?,
        Mode::Plot => {
            for path in emit_plots(&cfg.out)? {
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = build_config(cli).and_then(|cfg| run(&cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
