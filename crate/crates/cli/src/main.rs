mod args;
mod calibrate;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fmm2d::io::read_particles;
use fmm2d::registry::distribution;
use fmm2d::{Error, Quadtree, Result};

use args::{ConfigArgs, List, ModeArg};
use commands::{emit, RunOptions, SweepInput};

#[derive(Debug, Parser)]
#[command(
    name = "fmm2d",
    version,
    about = "2D fast multipole engine and load-balancing simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a particle CSV (`x,y,q`).
    Generate {
        /// uniform or cluster
        dist: String,
        #[arg(short, long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Evaluate potentials or fields and write a JSON report.
    Run {
        particles: PathBuf,
        #[arg(long, value_enum, default_value = "potential")]
        mode: ModeArg,
        /// Also run direct summation and report the error.
        #[arg(long)]
        check_direct: bool,
        /// Include wall-clock timings in the report.
        #[arg(long)]
        timings: bool,
        #[arg(short, long, value_name = "PATH")]
        out: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Initial SFC cut and refined partition with their statistics (JSON).
    Partition {
        particles: PathBuf,
        #[arg(short, long, value_name = "PATH")]
        out: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Simulated scaling study over several rank counts (CSV).
    Sweep {
        /// Particle CSV; omit when `--synthetic` is given.
        #[arg(required_unless_present = "synthetic")]
        particles: Option<PathBuf>,
        /// Rank counts, e.g. 1,2,4,8.
        #[arg(long, value_name = "LIST")]
        sweep_ranks: List<usize>,
        /// Independent units with these works and no communication.
        #[arg(long, value_name = "WORKS", conflicts_with = "particles")]
        synthetic: Option<List<f64>>,
        #[arg(short, long, value_name = "PATH")]
        out: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Forward Euler point-vortex run; writes `step,id,x,y,u,v` rows.
    Vortex {
        vortices: PathBuf,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        dt: f64,
        #[arg(short, long, value_name = "PATH")]
        out: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Fit the cost constants to measured operator times (JSON).
    Calibrate {
        /// Particle CSV; a uniform sample is generated when omitted.
        particles: Option<PathBuf>,
        #[arg(short, long, default_value_t = 20_000)]
        n: usize,
        #[arg(short, long, value_name = "PATH")]
        out: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
}

fn calibrate(
    particles: Option<PathBuf>,
    n: usize,
    config: &ConfigArgs,
    out: Option<PathBuf>,
) -> Result<()> {
    let cfg = config.resolve()?;
    let charges = match particles {
        Some(path) => read_particles(path)?,
        None => distribution("uniform")?.generate(n, cfg.seed)?,
    };
    let tree = Quadtree::build(&charges, cfg.depth, cfg.s_target)?;
    let counts = calibrate::unit_counts(&tree, cfg.p);
    let seconds = calibrate::measure(&tree, cfg.p)?;
    let report = calibrate::CalibrationReport {
        n: charges.len(),
        depth: tree.depth(),
        p: cfg.p.get(),
        flop_rate: cfg.machine.flop_rate,
        params: calibrate::fit(&seconds, &counts, cfg.machine.flop_rate),
        seconds,
        counts,
    };
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    emit(out.as_deref(), &text)
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Generate { dist, n, seed, out } => {
            commands::generate(&dist, n, seed, out.as_deref())
        }
        Command::Run {
            particles,
            mode,
            check_direct,
            timings,
            out,
            config,
        } => {
            let opts = RunOptions {
                mode: mode.into(),
                check_direct,
                timings,
            };
            commands::run(&particles, config.resolve()?, opts, out.as_deref())
        }
        Command::Partition {
            particles,
            out,
            config,
        } => commands::partition(&particles, config.resolve()?, out.as_deref()),
        Command::Sweep {
            particles,
            sweep_ranks,
            synthetic,
            out,
            config,
        } => {
            let input = match (synthetic, particles) {
                (Some(List(works)), _) => SweepInput::Synthetic(works),
                (None, Some(path)) => SweepInput::Particles(path),
                (None, None) => {
                    return Err(Error::domain("sweep needs a particle file or --synthetic"))
                }
            };
            commands::sweep_cmd(input, &sweep_ranks.0, config.resolve()?, out.as_deref())
        }
        Command::Vortex {
            vortices,
            steps,
            dt,
            out,
            config,
        } => commands::vortex(&vortices, steps, dt, config.resolve()?, out.as_deref()),
        Command::Calibrate {
            particles,
            n,
            out,
            config,
        } => calibrate(particles, n, &config, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}
