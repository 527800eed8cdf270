use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use morphofilter_cli::commands::{self, RenderTarget, CONFIG_FILE};
use morphofilter_cli::error::exit;
use morphofilter_cli::{CliError, CliResult, RunConfig, RunDir};

#[derive(Parser)]
#[command(name = "morphofilter", version, about = "Thermostatted sampling of compliance-minimization designs")]
struct Cli {
    /// Run configuration (JSON). Defaults to `config.json` in the output directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for independent temperatures.
    #[arg(long, global = true, env = "MORPHOFILTER_JOBS")]
    jobs: Option<usize>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run directory; overrides the config.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Print per-temperature progress to stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimality-criteria reference optimum.
    Optimize,
    /// Temperature sweep.
    Sweep,
    /// Zero-force maximum-entropy reference.
    ReferenceEntropy,
    /// Entropy, condensation and regime analysis from persisted results.
    Analyze,
    /// Raster of a persisted result.
    Render {
        /// x_star, mean_density[@T], entropy[@T], condensation or importance.
        target: String,
    },
}

fn resolve(cli: &Cli) -> CliResult<(RunConfig, RunDir)> {
    let mut cfg = match (&cli.config, &cli.output) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(out)) if out.join(CONFIG_FILE).is_file() => RunConfig::load(&out.join(CONFIG_FILE))?,
        _ => {
            return Err(CliError::Config(
                "no configuration: pass --config, or --output pointing at an existing run".into(),
            ))
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.output {
        cfg.output_dir = Some(out.clone());
    }
    let out = cfg
        .output_dir
        .clone()
        .ok_or_else(|| CliError::Config("no output directory: pass --output or set output_dir".into()))?;
    let dir = match cli.command {
        Command::Analyze | Command::Render { .. } => RunDir::open(out)?,
        _ => RunDir::new(out)?,
    };
    Ok((cfg, dir))
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let (cfg, dir) = resolve(&cli)?;
    match &cli.command {
        Command::Optimize => {
            let r = commands::cmd_optimize(&cfg, &dir)?;
            println!(
                "c_min = {} after {} iterations (converged: {})",
                r.c_min, r.iterations, r.converged
            );
        }
        Command::Sweep => {
            let s = commands::cmd_sweep(&cfg, &dir, cli.verbose)?;
            println!("{} temperatures sampled, {} failed", s.entries.len(), s.failures.len());
        }
        Command::ReferenceEntropy => {
            let r = commands::cmd_reference(&cfg, &dir)?;
            println!("S_max spread {:.4} over {} sites", r.spread(), r.s_max.len());
        }
        Command::Analyze => {
            let a = commands::cmd_analyze(&cfg, &dir)?;
            println!(
                "{} regimes, slopes {:?}, T_c max {}",
                a.regimes.segments.len(),
                a.regimes.slopes(),
                a.condensation.t_c_max
            );
        }
        Command::Render { target } => {
            let target: RenderTarget = target.parse()?;
            let stem = commands::cmd_render(&cfg, &dir, &target)?;
            println!("wrote {stem}.ppm and {stem}.png");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
