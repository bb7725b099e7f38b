mod commands;
mod output;

use std::io::{ErrorKind, Write};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "mdk",
    version,
    about = "Divergences, ergodicity coefficients, mixing times and hypothesis tests for finite Markov chains"
)]
struct Cli {
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
    /// Worker threads; falls back to MDK_THREADS, then to the number of cores.
    #[arg(long, env = "MDK_THREADS", global = true)]
    threads: Option<usize>,
    #[arg(long, default_value_t = 0, global = true)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Divergence between two chains under a common pi.
    Div(commands::DivArgs),
    /// Mixing time to stationarity with spectral bounds.
    Mix(commands::MixArgs),
    /// Contraction coefficient estimate.
    Eta(commands::EtaArgs),
    /// Projection of a chain onto the pi-reversible chains.
    Project(commands::ProjectArgs),
    /// Chernoff information between two chains.
    Chernoff(commands::ChernoffArgs),
    /// Monte-Carlo Bayes error of the likelihood-ratio test.
    Httest(commands::HttestArgs),
    /// Spectrum, spectral gap and structural predicates.
    Spectrum(commands::SpectrumArgs),
    /// Builds a named chain.
    MakeChain(commands::MakeChainArgs),
}

fn run(cli: &Cli) -> mdk::Result<String> {
    let seed = cli.seed;
    let (name, config, result) = match &cli.command {
        Command::Div(a) => ("div", output::value(a)?, commands::div(a)?),
        Command::Mix(a) => ("mix", output::value(a)?, commands::mix(a)?),
        Command::Eta(a) => ("eta", output::value(a)?, commands::eta(a, seed)?),
        Command::Project(a) => ("project", output::value(a)?, commands::project(a, seed)?),
        Command::Chernoff(a) => ("chernoff", output::value(a)?, commands::chernoff(a)?),
        Command::Httest(a) => ("httest", output::value(a)?, commands::httest(a, seed)?),
        Command::Spectrum(a) => ("spectrum", output::value(a)?, commands::spectrum(a)?),
        Command::MakeChain(a) => (
            "make-chain",
            output::value(a)?,
            commands::make_chain(a, seed)?,
        ),
    };
    let doc = output::envelope(name, config, cli.format, seed, result);
    Ok(match cli.format {
        Format::Json => output::json(&doc),
        Format::Csv => output::csv(&doc),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("mdk: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
        {
            eprintln!("mdk: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(text) => match writeln!(std::io::stdout().lock(), "{text}") {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) if e.kind() == ErrorKind::BrokenPipe => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("mdk: {e}");
                ExitCode::from(1)
            }
        },
        Err(e) => {
            eprintln!("mdk: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
