use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use fmm2d::config::RunConfig;
use fmm2d::costmodel::{estimate_memory, estimate_work, MemoryEstimate};
use fmm2d::evaluator::{compare, direct_solve, ErrorReport};
use fmm2d::io::{particles_csv, read_particles, read_vortices};
use fmm2d::parsim::{sweep, sweep_csv};
use fmm2d::partition::{initial_partition, Partition, UnitProblem};
use fmm2d::registry::{distribution, partitioner_with, solver};
use fmm2d::vortex::{advance, invariants, velocities, Invariants, Vortex};
use fmm2d::{Error, Mode, Quadtree, Result};
use serde::Serialize;

/// Writes `text` to `out`, or to stdout when no path is given.
pub fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn json(value: &impl Serialize) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

pub fn generate(dist: &str, n: usize, seed: u64, out: Option<&Path>) -> Result<()> {
    let charges = distribution(dist)?.generate(n, seed)?;
    emit(out, &particles_csv(&charges))
}

#[derive(Debug, Serialize)]
struct Timings {
    build_s: f64,
    solve_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    direct_s: Option<f64>,
}

#[derive(Debug, Serialize)]
struct RunReport {
    config: RunConfig,
    n: usize,
    depth: u8,
    p: usize,
    mode: Mode,
    solver: String,
    work_total: f64,
    memory: MemoryEstimate,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<ErrorReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    timings: Option<Timings>,
}

pub struct RunOptions {
    pub mode: Mode,
    pub check_direct: bool,
    pub timings: bool,
}

pub fn run(particles: &Path, cfg: RunConfig, opts: RunOptions, out: Option<&Path>) -> Result<()> {
    let charges = read_particles(particles)?;
    let clock = Instant::now();
    let tree = Quadtree::build(&charges, cfg.depth, cfg.s_target)?;
    let build_s = clock.elapsed().as_secs_f64();

    let backend = solver(&cfg.solver, &cfg.solver_settings())?;
    let clock = Instant::now();
    let values = backend.solve(&charges, opts.mode)?;
    let solve_s = clock.elapsed().as_secs_f64();

    let (error, direct_s) = if opts.check_direct {
        let clock = Instant::now();
        let reference = direct_solve(&charges, opts.mode);
        let elapsed = clock.elapsed().as_secs_f64();
        (
            Some(compare(&values, &reference, opts.mode)?),
            Some(elapsed),
        )
    } else {
        (None, None)
    };
    eprintln!(
        "build {build_s:.3}s, solve {solve_s:.3}s{}",
        direct_s
            .map(|d| format!(", direct {d:.3}s"))
            .unwrap_or_default()
    );

    let report = RunReport {
        n: charges.len(),
        depth: tree.depth(),
        p: cfg.p.get(),
        mode: opts.mode,
        solver: backend.name().to_string(),
        work_total: estimate_work(&tree, cfg.p, &cfg.cost).total,
        memory: estimate_memory(&tree, cfg.p),
        error,
        timings: opts.timings.then_some(Timings {
            build_s,
            solve_s,
            direct_s,
        }),
        config: cfg,
    };
    emit(out, &json(&report)?)
}

#[derive(Debug, Serialize)]
struct PartitionStats {
    partition: Partition,
    objective: f64,
    max_load: f64,
    imbalance: f64,
    comm_bytes: f64,
    messages: u64,
}

impl PartitionStats {
    fn new(problem: &UnitProblem, partition: Partition, cfg: &RunConfig) -> Result<Self> {
        let objective = problem.objective(&partition, cfg.weights()?)?;
        let max_load = problem.loads(&partition).into_iter().fold(0.0, f64::max);
        let comm = problem.comm(&partition);
        Ok(PartitionStats {
            objective,
            max_load,
            imbalance: problem.work_imbalance(&partition),
            comm_bytes: comm.total_bytes(),
            messages: comm.total_messages,
            partition,
        })
    }
}

#[derive(Debug, Serialize)]
struct PartitionReport {
    config: RunConfig,
    n: usize,
    depth: u8,
    units: usize,
    total_work: f64,
    coarse_work: f64,
    initial: PartitionStats,
    refined: PartitionStats,
}

fn load_problem(particles: &Path, cfg: &RunConfig) -> Result<(usize, u8, UnitProblem)> {
    let charges = read_particles(particles)?;
    let tree = Quadtree::build(&charges, cfg.depth, cfg.s_target)?;
    let problem = UnitProblem::from_tree(&tree, cfg.p, &cfg.cost, cfg.k)?;
    Ok((charges.len(), tree.depth(), problem))
}

pub fn partition(particles: &Path, cfg: RunConfig, out: Option<&Path>) -> Result<()> {
    let (n, depth, problem) = load_problem(particles, &cfg)?;
    let start = initial_partition(&problem.works, cfg.ranks, problem.k)?;
    let chosen = partitioner_with(&cfg.partitioner, &cfg.partitioner_settings())?.partition(
        &problem,
        cfg.ranks,
        cfg.weights()?,
    )?;
    let report = PartitionReport {
        n,
        depth,
        units: problem.len(),
        total_work: problem.total_work(),
        coarse_work: problem.coarse_work,
        initial: PartitionStats::new(&problem, start, &cfg)?,
        refined: PartitionStats::new(&problem, chosen, &cfg)?,
        config: cfg,
    };
    emit(out, &json(&report)?)
}

/// Where the sweep's units come from.
pub enum SweepInput {
    Particles(PathBuf),
    /// Independent units with these works and no communication.
    Synthetic(Vec<f64>),
}

pub fn sweep_cmd(
    input: SweepInput,
    ranks: &[usize],
    cfg: RunConfig,
    out: Option<&Path>,
) -> Result<()> {
    let problem = match input {
        SweepInput::Particles(path) => load_problem(&path, &cfg)?.2,
        SweepInput::Synthetic(works) => {
            let n = works.len();
            UnitProblem::new(0, works, 0.0, vec![Vec::new(); n], Vec::new())?
        }
    };
    let chosen = partitioner_with(&cfg.partitioner, &cfg.partitioner_settings())?;
    let records = sweep(
        &problem,
        chosen.as_ref(),
        cfg.weights()?,
        &cfg.machine,
        ranks,
    )?;
    emit(out, &sweep_csv(&records))
}

#[derive(Debug, Serialize)]
struct VortexFooter {
    config: RunConfig,
    steps: usize,
    dt: f64,
    vortices: usize,
    initial: Invariants,
    r#final: Invariants,
    circulation_drift: f64,
}

pub const TRAJECTORY_HEADER: &str = "step,id,x,y,u,v";

pub fn vortex(
    input: &Path,
    steps: usize,
    dt: f64,
    cfg: RunConfig,
    out: Option<&Path>,
) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::domain(format!(
            "time step must be positive, got {dt}"
        )));
    }
    let mut state: Vec<Vortex> = read_vortices(input)?;
    let backend = solver(&cfg.solver, &cfg.solver_settings())?;
    let initial = invariants(&state);
    let mut text = String::from(TRAJECTORY_HEADER);
    text.push('\n');
    for s in 0..=steps {
        let vel = velocities(&state, backend.as_ref())?;
        for (id, (v, [u, w])) in state.iter().zip(&vel).enumerate() {
            text.push_str(&format!("{s},{id},{},{},{u},{w}\n", v.x, v.y));
        }
        if s < steps {
            state = advance(&state, &vel, dt);
        }
    }
    let last = invariants(&state);
    let footer = VortexFooter {
        steps,
        dt,
        vortices: state.len(),
        circulation_drift: last.total_circulation - initial.total_circulation,
        initial,
        r#final: last,
        config: cfg,
    };
    text.push_str("# ");
    text.push_str(&serde_json::to_string(&footer)?);
    text.push('\n');
    emit(out, &text)
}
