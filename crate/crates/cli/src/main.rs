use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hypersep_core::{Endgame, EngineConfig, TauMode};

mod audit;
mod error;
mod input;
mod plot;
mod retrieval;
mod separate;
mod seq;

use error::{CliError, Result};

/// Separate points with hyperplanes and index them by quadrant code.
#[derive(Parser)]
#[command(name = "hypersep", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Separate the points of a CSV file and write the state.
    Separate {
        points: PathBuf,
        #[command(flatten)]
        run: RunOpts,
        #[arg(long)]
        out: PathBuf,
    },
    /// Add points to a solved state, keeping its planes.
    Append {
        state: PathBuf,
        points: PathBuf,
        /// Defaults to rewriting the input state.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Add `r` zero coordinates to every point and plane.
    Lift {
        state: PathBuf,
        r: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a quadrant-code index from a solved state.
    Index {
        state: PathBuf,
        /// JSON lines `{"id": .., "payload": ..}`; records default to empty payloads.
        #[arg(long)]
        records: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Look up probes in an index; prints one JSON line per match.
    Query {
        index: PathBuf,
        /// A probe as `[x1, ...]` or `{"coords": [...]}`.
        #[arg(long, conflicts_with = "probes", required_unless_present = "probes")]
        probe: Option<String>,
        /// One probe per line.
        #[arg(long)]
        probes: Option<PathBuf>,
    },
    /// Re-check a state independently; exits 3 on any failure.
    Audit { state: PathBuf },
    /// Draw a 2-D state as SVG.
    Plot {
        state: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Separate and index the prefixes of historical sequences.
    SeqIndex {
        /// JSON lines `{"id": .., "values": [...]}`.
        sequences: PathBuf,
        #[arg(long)]
        horizon: usize,
        /// Scalars per observation.
        #[arg(long, default_value_t = 1)]
        block: usize,
        #[command(flatten)]
        run: RunOpts,
        #[arg(long)]
        out: PathBuf,
    },
    /// Stored histories sharing the quadrant of a live prefix, with their tails.
    SeqPredict {
        bundle: PathBuf,
        /// Live observations as a JSON array.
        #[arg(long)]
        values: String,
        /// Prefix length to match; defaults to every given step.
        #[arg(long)]
        steps: Option<usize>,
    },
}

#[derive(Args, Clone)]
struct RunOpts {
    #[arg(long, env = "HYPERSEP_SEED", default_value_t = 0)]
    seed: u64,
    /// Minimum Manhattan distance between quadrant-mates.
    #[arg(long)]
    delta_th: Option<f64>,
    #[arg(long, value_enum, default_value_t = TauArg::Off)]
    tau: TauArg,
    #[arg(long, value_enum, default_value_t = EndgameArg::Step7)]
    endgame: EndgameArg,
    /// Pairs admitted while the midpoints are rank deficient (default 2n).
    #[arg(long)]
    pair_cap: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TauArg {
    Off,
    PiRatio,
}

#[derive(Clone, Copy, ValueEnum)]
enum EndgameArg {
    Step7,
    Synthetic,
}

impl RunOpts {
    fn config(&self) -> Result<EngineConfig> {
        let mut c = EngineConfig::default();
        if let Some(d) = self.delta_th {
            c.delta_th = d;
        }
        c.tau = match self.tau {
            TauArg::Off => TauMode::Off,
            TauArg::PiRatio => TauMode::PiRatio,
        };
        c.endgame = match self.endgame {
            EndgameArg::Step7 => Endgame::Step7,
            EndgameArg::Synthetic => Endgame::Synthetic,
        };
        c.pair_cap = self.pair_cap;
        c.validate().map_err(CliError::usage)?;
        Ok(c)
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Separate { points, run, out } => separate::separate(&points, run.seed, run.config()?, &out),
        Command::Append { state, points, out } => separate::append(&state, &points, out.as_deref().unwrap_or(&state)),
        Command::Lift { state, r, out } => separate::lift(&state, r, out.as_deref().unwrap_or(&state)),
        Command::Index { state, records, out } => retrieval::index(&state, records.as_deref(), &out),
        Command::Query { index, probe, probes } => retrieval::query(&index, probe.as_deref(), probes.as_deref()),
        Command::Audit { state } => audit::audit(&state),
        Command::Plot { state, out } => plot::plot(&state, out.as_deref()),
        Command::SeqIndex { sequences, horizon, block, run, out } => seq::index(&sequences, horizon, block, run.seed, run.config()?, &out),
        Command::SeqPredict { bundle, values, steps } => seq::predict(&bundle, &values, steps),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hypersep: {e}");
            e.exit_code()
        }
    }
}
