use clap::{Parser, Subcommand, ValueEnum};
use qflock::config::{Mode, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

#[derive(Parser)]
#[command(name = "qflock", version, about = "Active quantum flock simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a run configuration and write its result tables.
    Run { config: PathBuf },
    /// Check a run configuration without computing anything.
    Validate { config: PathBuf },
    /// Print a complete configuration with every default filled in.
    PrintDefaults {
        #[arg(long, value_enum, default_value = "trajectory")]
        mode: ModeArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Trajectory,
    OracleCompare,
    PhaseScan,
    Hydro,
    Classical,
    Kolmogorov,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Trajectory => Mode::Trajectory,
            ModeArg::OracleCompare => Mode::OracleCompare,
            ModeArg::PhaseScan => Mode::PhaseScan,
            ModeArg::Hydro => Mode::Hydro,
            ModeArg::Classical => Mode::Classical,
            ModeArg::Kolmogorov => Mode::Kolmogorov,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::PrintDefaults { mode } => {
            print!("{}", RunConfig::defaults(mode.into()).to_toml());
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match qflock::load_config(&config) {
            Ok(c) => {
                println!("ok: mode {:?}, config_hash={}", c.mode, c.hash());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_CONFIG)
            }
        },
        Command::Run { config } => {
            let c = match qflock::load_config(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            match qflock::run(&c) {
                Ok(report) => {
                    for f in &report.files {
                        println!("{}", f.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(EXIT_RUNTIME)
                }
            }
        }
    }
}
