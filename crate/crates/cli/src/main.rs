use boxcast_cli::commands::CheckKind;
use boxcast_cli::{execute, Command, Options, Scope};
use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "boxcast", version, about = "Nonlocality and steering toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Membership / acceptance tolerance (command specific).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Iteration budget (command specific).
    #[arg(long, global = true)]
    iters: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Record wall time in the report.
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Cmd {
    /// Classify a behavior or assemblage.
    Check {
        path: PathBuf,
        #[arg(long, value_enum)]
        kind: CheckKind,
    },
    /// Relative entropy of nonlocality of a behavior.
    Elr {
        path: PathBuf,
        #[arg(long)]
        witness: Option<PathBuf>,
    },
    /// Upper bound on the relative entropy of steering of an assemblage.
    Steering {
        path: PathBuf,
        #[arg(long)]
        witness: Option<PathBuf>,
    },
    /// Run the verification suite.
    VerifySuite {
        #[arg(long, value_enum, default_value_t = Scope::All)]
        scope: Scope,
        /// Tenth of the instance counts.
        #[arg(long)]
        quick: bool,
        /// Tamper with a check to exercise the failure path (`chain-rule`).
        #[arg(long)]
        inject: Option<String>,
    },
    /// Regenerate the fixture files.
    GenFixtures {
        #[arg(default_value = "fixtures")]
        dir: PathBuf,
    },
}

fn configure_threads() {
    let Ok(v) = std::env::var("BOXCAST_THREADS") else { return };
    match v.parse::<usize>() {
        Ok(n) if n > 0 => {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        _ => eprintln!("ignoring BOXCAST_THREADS={v}"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let cmd = match cli.cmd {
        Cmd::Check { path, kind } => Command::Check { path, kind },
        Cmd::Elr { path, witness } => Command::Elr { path, witness },
        Cmd::Steering { path, witness } => Command::Steering { path, witness },
        Cmd::VerifySuite { scope, quick, inject } => Command::VerifySuite { scope, quick, inject },
        Cmd::GenFixtures { dir } => Command::GenFixtures { dir },
    };
    let opts = Options { seed: cli.seed, tol: cli.tol, iters: cli.iters, timing: cli.timing };
    let outcome = match execute(&cmd, &opts) {
        Ok(o) => o,
        Err(f) => {
            eprintln!("boxcast: {f}");
            return ExitCode::from(f.exit_code() as u8);
        }
    };
    let text = match cli.format {
        Format::Json => outcome.report.to_json(),
        Format::Text => outcome.report.to_text(),
    };
    match cli.out {
        Some(p) => {
            if let Err(e) = std::fs::write(&p, text) {
                eprintln!("boxcast: {}: {e}", p.display());
                return ExitCode::from(2);
            }
        }
        None => print!("{text}"),
    }
    ExitCode::from(outcome.exit_code as u8)
}
