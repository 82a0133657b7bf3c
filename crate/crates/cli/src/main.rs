mod config;
mod run;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use ability_vi::goals::ModelKind;
use clap::{Parser, Subcommand, ValueEnum};

use run::{CliError, CliResult, Context, Flags};

#[derive(Parser)]
#[command(name = "ability-vi", version, about = "Player abilities and over/under goal prediction from event data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration with one section per module.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Restrict to blocks 0..=BLOCK (abilities) or predict block BLOCK (goals).
    #[arg(long, global = true)]
    block: Option<usize>,
    #[arg(long, global = true)]
    model: Option<ModelArg>,
    /// Interacting event types, e.g. Shots,ShotStop.
    #[arg(long, global = true, value_parser = parse_pair)]
    event_pair: Option<Pair>,
    #[arg(long, global = true)]
    top_n: Option<usize>,
    /// Run directory; every stage writes into its own subdirectory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Clone, Copy, Subcommand)]
enum Command {
    /// Aggregate the event log into per-appearance counts and match results.
    Ingest,
    /// Fit the variational factors of one event pair.
    FitAbility,
    /// Rank players by the 2.5% quantile of their factors.
    Rank,
    /// Posterior predictive team totals against the observed ones.
    Simulate,
    /// Sample the hierarchical goal model.
    FitGoals,
    /// Over/under probabilities for prediction blocks.
    Predict,
    /// ROC curves and AUC of stored predictions.
    Evaluate,
    /// Generate a synthetic league with known parameters.
    Synth,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::FitAbility => "fit-ability",
            Command::Rank => "rank",
            Command::Simulate => "simulate",
            Command::FitGoals => "fit-goals",
            Command::Predict => "predict",
            Command::Evaluate => "evaluate",
            Command::Synth => "synth",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Baseline,
    Extended,
}

#[derive(Clone)]
struct Pair([String; 2]);

fn parse_pair(s: &str) -> Result<Pair, String> {
    match s.split(',').map(str::trim).collect::<Vec<_>>().as_slice() {
        [a, b] if !a.is_empty() && !b.is_empty() && a != b => Ok(Pair([a.to_string(), b.to_string()])),
        _ => Err(format!("expected two distinct event types as A,B, got {s:?}")),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let threads = run::thread_cap()?;
    let (mut config, bytes) = config::load(cli.config.as_deref())?;
    if let Some(out) = &cli.out {
        config.cli.out = Some(out.clone());
    }
    if let Some(seed) = cli.seed {
        config.cli.seed = Some(seed);
    }
    if let Some(n) = cli.top_n {
        config.analytics.top_n = n;
    }
    if let Some(m) = cli.model {
        config.goals.model = match m {
            ModelArg::Baseline => ModelKind::Baseline,
            ModelArg::Extended => ModelKind::Extended,
        };
    }
    if let Some(p) = &cli.event_pair {
        config.ability_model.pair = Some(p.0.clone());
    }
    let out = config
        .cli
        .out
        .clone()
        .ok_or_else(|| CliError::Validation("no run directory: pass --out or set [cli] out".into()))?;
    let flags = Flags {
        block: cli.block,
        model: cli.model.map(|m| match m {
            ModelArg::Baseline => "baseline".to_string(),
            ModelArg::Extended => "extended".to_string(),
        }),
        event_pair: cli.event_pair.map(|p| p.0),
        top_n: cli.top_n,
        force: cli.force,
    };
    let seed = config.cli.seed;
    let stage = cli.command.name();
    let mut ctx = Context::new(stage, config, cli.config, bytes, out, seed, flags, threads);
    tracing::info!(stage, "starting");
    let tag = match cli.command {
        Command::Ingest => stages::ingest(&mut ctx)?,
        Command::FitAbility => stages::fit_ability(&mut ctx)?,
        Command::Rank => stages::rank(&mut ctx)?,
        Command::Simulate => stages::simulate(&mut ctx)?,
        Command::FitGoals => stages::fit_goals(&mut ctx)?,
        Command::Predict => stages::predict(&mut ctx)?,
        Command::Evaluate => stages::evaluate(&mut ctx)?,
        Command::Synth => stages::synth(&mut ctx)?,
    };
    ctx.finish(&tag)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_max_level(tracing::Level::INFO)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
