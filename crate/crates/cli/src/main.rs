mod commands;
mod report;
mod run;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use feddrive::bn_strategy::BnStrategy;
use feddrive::fed::ServerOptKind;
use feddrive::style::StyleMethod;
use feddrive::Error;

#[derive(Parser)]
#[command(name = "feddrive", version, about = "Federated semantic segmentation on synthetic driving scenes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset (PPM images, PGM masks, manifest CSV).
    Gen {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run one federated experiment.
    Run(RunArgs),
    /// Compare finished runs: text and CSV table plus learning curves.
    Report {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Style-transfer utilities.
    Style {
        #[command(subcommand)]
        command: StyleCommand,
    },
}

#[derive(Subcommand)]
enum StyleCommand {
    /// Write one training image translated toward another client's style.
    Preview(PreviewArgs),
}

#[derive(Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub clients_per_round: Option<usize>,
    #[arg(long)]
    pub eval_every: Option<usize>,
    #[arg(long, value_parser = parse_strategy)]
    pub method: Option<BnStrategy>,
    #[arg(long, value_parser = parse_server_opt)]
    pub server_opt: Option<ServerOptKind>,
    #[arg(long, value_parser = parse_style)]
    pub style: Option<StyleMethod>,
    /// Load the dataset from a `gen` output directory.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Train the clients of a round one after another.
    #[arg(long)]
    pub sequential: bool,
    /// Replace an existing run made with a different configuration.
    #[arg(long)]
    pub force: bool,
}

#[derive(Args)]
pub struct PreviewArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub client: usize,
    #[arg(long, default_value_t = 1)]
    pub target: usize,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn parse_strategy(s: &str) -> Result<BnStrategy, String> {
    match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
        "fedavg" | "shareall" => Ok(BnStrategy::ShareAll),
        "fedbn" => Ok(BnStrategy::FedBn),
        "silobn" => Ok(BnStrategy::SiloBn),
        _ => Err(format!("unknown method {s:?} (fedavg, fedbn, silobn)")),
    }
}

fn parse_server_opt(s: &str) -> Result<ServerOptKind, String> {
    ServerOptKind::ALL
        .into_iter()
        .find(|k| k.label().eq_ignore_ascii_case(s))
        .ok_or_else(|| format!("unknown server optimizer {s:?} (sgd, fedavgm, adam, adagrad)"))
}

fn parse_style(s: &str) -> Result<StyleMethod, String> {
    [StyleMethod::None, StyleMethod::Cfsi, StyleMethod::Lab]
        .into_iter()
        .find(|m| m.label().eq_ignore_ascii_case(s))
        .ok_or_else(|| format!("unknown style method {s:?} (none, cfsi, lab)"))
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 2,
        Error::Io { .. } | Error::Format { .. } => 3,
        Error::Numeric(_) => 4,
        _ => 1,
    }
}

fn init_threads() -> Result<(), Error> {
    if let Ok(v) = std::env::var("FEDDRIVE_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Config(format!("FEDDRIVE_THREADS={v:?} is not a positive integer")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| match cli.command {
        Command::Gen { config, out, seed } => commands::gen(config.as_deref(), &out, seed),
        Command::Run(args) => run::run(&args),
        Command::Report { runs, out } => report::report(&runs, out.as_deref()),
        Command::Style {
            command: StyleCommand::Preview(args),
        } => commands::style_preview(&args),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
