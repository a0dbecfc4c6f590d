mod commands;
mod config;
mod error;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Ctx;
use config::RunConfig;
use error::CliError;

#[derive(Parser)]
#[command(name = "sgmf", version, about = "Concentrating solutions of the sinh-Gordon mean field equation")]
struct Cli {
    /// TOML run configuration; defaults apply to every missing key.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output` in the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps and grids (0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Random seed (overrides `seed` in the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cross-check the numerical Green function against closed forms and symmetry.
    GreensValidate,
    /// Radial bubble identities and the symmetric kernel dimension.
    Identities,
    /// Approximate solutions along a lambda sweep: residuals, masses, corrections.
    Construct,
    /// Reduced energy on a grid of configurations.
    Landscape,
    /// Projected linear and nonlinear problems and the reduced energy along a sweep.
    Reduce,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = RunConfig::load(cli.config.as_deref())?;
    let threads = cli.threads.or(cfg.threads).unwrap_or(0);
    let out = cli.out.clone().or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("sgmf-out"));
    let out = report::output_dir(&out)?;
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    let ctx = Ctx { cfg, out, seed };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::GreensValidate => commands::greens::run(&ctx),
        Command::Identities => commands::identities::run(&ctx),
        Command::Construct => commands::construct::run(&ctx),
        Command::Landscape => commands::landscape::run(&ctx),
        Command::Reduce => commands::reduce::run(&ctx),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
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
