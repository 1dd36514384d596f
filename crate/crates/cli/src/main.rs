mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hintclust::HintError;

/// Mutual clustering of a short-post collection and an article collection.
#[derive(Parser, Debug)]
#[command(name = "hintclust", version)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Cluster both collections and write result.json, trace.csv and confidence CSVs.
    Cluster(RunArgs),
    /// Generate a planted-partition corpus with ground truth.
    Synth(SynthArgs),
    /// Score a result against truth.csv, or sweep one setting.
    Eval(EvalArgs),
    /// Dump similarity and transition matrices.
    Inspect(RunArgs),
}

/// Settings shared by the pipeline subcommands. Anything without a flag can
/// be given as `--set key=value` or in the config file.
#[derive(Args, Debug, Default)]
pub struct RunArgs {
    /// `key = value` file applied before flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    t1: Option<String>,
    #[arg(long)]
    t2: Option<String>,
    #[arg(long)]
    k1: Option<String>,
    #[arg(long)]
    k2: Option<String>,
    #[arg(long)]
    theta: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    min_common: Option<String>,
    #[arg(long)]
    link_threshold: Option<String>,
    /// Comma-separated post meta-path weights.
    #[arg(long)]
    weights1: Option<String>,
    /// Comma-separated article meta-path weights.
    #[arg(long)]
    weights2: Option<String>,
    /// Keep direct and shared retweets as separate meta-paths.
    #[arg(long)]
    split_retweet: bool,
    #[arg(long)]
    out: Option<String>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    n1: Option<String>,
    #[arg(long)]
    n2: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    anchor_rate: Option<String>,
    #[arg(long)]
    noise_rate: Option<String>,
    #[arg(long)]
    p_in: Option<String>,
    #[arg(long)]
    p_out: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// result.json written by `cluster`.
    #[arg(long, required_unless_present = "sweep")]
    result: Option<PathBuf>,
    /// truth.csv written by `synth`.
    #[arg(long)]
    truth: PathBuf,
    /// Re-run clustering for every value, e.g. `theta=0:0.25:2`; prints CSV.
    #[arg(long)]
    sweep: Option<String>,
    #[command(flatten)]
    run: RunArgs,
}

fn pairs_from(named: &[(&str, &Option<String>)], set: &[String]) -> anyhow::Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = named
        .iter()
        .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
        .collect();
    for item in set {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| anyhow::anyhow!("--set expects KEY=VALUE, got {item:?}"))?;
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

impl RunArgs {
    fn resolve(&self) -> anyhow::Result<config::RunConfig> {
        let mut pairs = pairs_from(
            &[
                ("t1", &self.t1),
                ("t2", &self.t2),
                ("k1", &self.k1),
                ("k2", &self.k2),
                ("theta", &self.theta),
                ("alpha", &self.alpha),
                ("beta", &self.beta),
                ("seed", &self.seed),
                ("min_common", &self.min_common),
                ("link_threshold", &self.link_threshold),
                ("weights1", &self.weights1),
                ("weights2", &self.weights2),
                ("out", &self.out),
            ],
            &self.set,
        )?;
        if self.split_retweet {
            pairs.push(("split_retweet".into(), "true".into()));
        }
        config::RunConfig::resolve(self.config.as_deref(), &pairs)
    }
}

impl SynthArgs {
    fn resolve(&self) -> anyhow::Result<config::RunConfig> {
        let pairs = pairs_from(
            &[
                ("k", &self.k),
                ("n1", &self.n1),
                ("n2", &self.n2),
                ("seed", &self.seed),
                ("anchor_rate", &self.anchor_rate),
                ("noise_rate", &self.noise_rate),
                ("p_in", &self.p_in),
                ("p_out", &self.p_out),
                ("out", &self.out),
            ],
            &self.set,
        )?;
        config::RunConfig::resolve(self.config.as_deref(), &pairs)
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err
        .chain()
        .filter_map(|e| e.downcast_ref::<HintError>())
        .any(HintError::is_numerical);
    if numerical {
        3
    } else {
        2
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Cluster(a) => commands::cluster(&a.resolve()?),
        Command::Synth(a) => commands::synth(&a.resolve()?),
        Command::Eval(a) => {
            let cfg = a.run.resolve()?;
            match &a.sweep {
                Some(arg) => commands::sweep(&cfg, &a.truth, arg),
                None => commands::eval(a.result.as_deref().expect("clap enforces --result"), &a.truth),
            }
        }
        Command::Inspect(a) => commands::inspect(&a.resolve()?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
