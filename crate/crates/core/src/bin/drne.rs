use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use drne::cli::{execute, Algorithm, Command, Format, Invocation};

#[derive(Parser)]
#[command(name = "drne", version, about = "Wasserstein distributionally robust Nash equilibrium experiments")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Write the first instance of a scenario as gamespec.json
    Generate(Common),
    /// Solve a scenario or game file
    Solve(Common),
    /// Solve every instance of every radius/sample-range cell
    Sweep(Common),
    /// Run the oracle gates on the first instance of a scenario
    Verify(Common),
}

#[derive(Args)]
struct Common {
    /// JSON scenario config (or, for solve, a game file)
    #[arg(short, long)]
    config: PathBuf,
    /// Output directory [default: $DRNE_OUT_DIR or ./out]
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Alg::Both)]
    algorithm: Alg,
    /// Trace file format
    #[arg(long, value_enum, default_value_t = Fmt::Csv)]
    format: Fmt,
}

#[derive(Clone, Copy, ValueEnum)]
enum Alg {
    Agraal,
    Hybrid,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fmt {
    Csv,
    Json,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, c) = match cli.command {
        Sub::Generate(c) => (Command::Generate, c),
        Sub::Solve(c) => (Command::Solve, c),
        Sub::Sweep(c) => (Command::Sweep, c),
        Sub::Verify(c) => (Command::Verify, c),
    };
    let inv = Invocation {
        command,
        config: c.config,
        out_dir: c.out,
        seed: c.seed,
        algorithm: match c.algorithm {
            Alg::Agraal => Algorithm::Agraal,
            Alg::Hybrid => Algorithm::Hybrid,
            Alg::Both => Algorithm::Both,
        },
        format: match c.format {
            Fmt::Csv => Format::Csv,
            Fmt::Json => Format::Json,
        },
    };
    let outcome = execute(&inv);
    // Write errors (e.g. a closed pipe) must not mask the exit status.
    let mut stdout = std::io::stdout().lock();
    if outcome.code() == 0 {
        let _ = writeln!(stdout, "{}", outcome.message);
    } else {
        let _ = writeln!(std::io::stderr(), "drne: {}", outcome.message);
    }
    for f in &outcome.files {
        let _ = writeln!(stdout, "wrote {}", f.display());
    }
    ExitCode::from(outcome.code() as u8)
}
