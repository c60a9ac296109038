use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mwstab_cli::config::Preset;
use mwstab_cli::{commands, CliError, Context};

#[derive(Parser)]
#[command(name = "mwstab", version, about = "Max-Weight stability experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and report a stability verdict.
    Simulate(Common),
    /// Search for the largest stable load constants.
    Probe(Common),
    /// Run a witness-backed adversary and audit every packet.
    Audit(Common),
    /// Evaluate the queue bound ladder.
    Bounds(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in experiment: exp1, exp2 or exp-exponential.
    #[arg(long)]
    preset: Option<String>,
    /// Edge count for exp-exponential.
    #[arg(long, default_value_t = 6)]
    n: usize,
    /// Slack for exp-exponential.
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    horizon: Option<u64>,
    /// Use the long horizon from the config.
    #[arg(long)]
    full: bool,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl Common {
    fn context(self) -> Result<Context, CliError> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => commands::load_config(path)?,
            (None, Some(name)) => Preset::parse(name)
                .ok_or_else(|| CliError::Config(format!("unknown preset '{name}' (exp1, exp2, exp-exponential)")))?
                .config(self.n, self.eps),
            (None, None) => return Err(CliError::Config("give --config PATH or --preset NAME".into())),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(h) = self.horizon {
            cfg.horizon = h;
            cfg.full_horizon = h;
        }
        cfg.check().map_err(CliError::Config)?;
        Ok(Context {
            cfg,
            full: self.full,
            out: self.out,
        })
    }
}

type Handler = fn(&Context) -> Result<i32, CliError>;

fn dispatch(cmd: Command) -> Result<i32, CliError> {
    let (f, common): (Handler, Common) = match cmd {
        Command::Simulate(c) => (commands::simulate, c),
        Command::Probe(c) => (commands::probe, c),
        Command::Audit(c) => (commands::audit, c),
        Command::Bounds(c) => (commands::bounds, c),
    };
    f(&common.context()?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code() as u8)
        }
    }
}

