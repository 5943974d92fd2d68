//! Name-keyed registries of the interchangeable algorithms: field solvers,
//! partitioners and particle distributions. The CLI selects entries by name.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::evaluator::{direct_solve, fmm_solve_with, FmmOptions};
use crate::expansions::{Charge, Mode, Order};
use crate::generate::{ClusterDistribution, Distribution, UniformDistribution};
use crate::partition::{
    brute_force_partition, initial_partition, refine_partition, ObjectiveWeights, Partition,
    UnitProblem, DEFAULT_MAX_ITERS,
};
use crate::quadtree::{Depth, Quadtree, DEFAULT_S_TARGET};

/// Evaluates all pairwise interactions of a particle set.
pub trait Solver: Send + Sync {
    fn name(&self) -> &'static str;

    /// One value per particle, in input order.
    fn solve(&self, charges: &[Charge], mode: Mode) -> Result<Vec<Complex64>>;
}

/// Assigns the units of a problem to ranks.
pub trait Partitioner: Send + Sync {
    fn name(&self) -> &'static str;

    fn partition(
        &self,
        problem: &UnitProblem,
        ranks: usize,
        weights: ObjectiveWeights,
    ) -> Result<Partition>;
}

/// A registered constructor.
pub struct Entry<T: ?Sized, S> {
    pub name: &'static str,
    pub summary: &'static str,
    pub build: fn(&S) -> Box<T>,
}

fn lookup<'a, T: ?Sized, S>(
    family: &str,
    entries: &'a [Entry<T, S>],
    name: &str,
) -> Result<&'a Entry<T, S>> {
    entries.iter().find(|e| e.name == name).ok_or_else(|| {
        let known: Vec<&str> = entries.iter().map(|e| e.name).collect();
        Error::domain(format!(
            "unknown {family} {name:?} (known: {})",
            known.join(", ")
        ))
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub order: Order,
    pub depth: Depth,
    pub s_target: f64,
    pub reproducible: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            order: Order::default(),
            depth: Depth::Auto,
            s_target: DEFAULT_S_TARGET,
            reproducible: true,
        }
    }
}

pub struct DirectSolver;

impl Solver for DirectSolver {
    fn name(&self) -> &'static str {
        "direct"
    }

    fn solve(&self, charges: &[Charge], mode: Mode) -> Result<Vec<Complex64>> {
        Ok(direct_solve(charges, mode))
    }
}

pub struct FmmSolver {
    pub settings: SolverSettings,
}

impl Solver for FmmSolver {
    fn name(&self) -> &'static str {
        "fmm"
    }

    fn solve(&self, charges: &[Charge], mode: Mode) -> Result<Vec<Complex64>> {
        let s = &self.settings;
        let tree = Quadtree::build(charges, s.depth, s.s_target)?;
        fmm_solve_with(
            &tree,
            FmmOptions {
                order: s.order,
                mode,
                reproducible: s.reproducible,
            },
        )
    }
}

pub static SOLVERS: &[Entry<dyn Solver, SolverSettings>] = &[
    Entry {
        name: "fmm",
        summary: "fast multipole method over a uniform quadtree",
        build: |s| Box::new(FmmSolver { settings: *s }),
    },
    Entry {
        name: "direct",
        summary: "O(N^2) direct summation",
        build: |_| Box::new(DirectSolver),
    },
];

pub fn solver(name: &str, settings: &SolverSettings) -> Result<Box<dyn Solver>> {
    Ok((lookup("solver", SOLVERS, name)?.build)(settings))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartitionerSettings {
    pub max_iters: usize,
}

impl Default for PartitionerSettings {
    fn default() -> Self {
        PartitionerSettings {
            max_iters: DEFAULT_MAX_ITERS,
        }
    }
}

/// Contiguous cut of the Morton-ordered units.
pub struct SfcCut;

impl Partitioner for SfcCut {
    fn name(&self) -> &'static str {
        "sfc"
    }

    fn partition(
        &self,
        problem: &UnitProblem,
        ranks: usize,
        _: ObjectiveWeights,
    ) -> Result<Partition> {
        initial_partition(&problem.works, ranks, problem.k)
    }
}

/// SFC cut followed by first-improvement local search.
pub struct LocalSearch {
    pub max_iters: usize,
}

impl Partitioner for LocalSearch {
    fn name(&self) -> &'static str {
        "refine"
    }

    fn partition(
        &self,
        problem: &UnitProblem,
        ranks: usize,
        weights: ObjectiveWeights,
    ) -> Result<Partition> {
        let start = initial_partition(&problem.works, ranks, problem.k)?;
        Ok(refine_partition(problem, &start, weights, self.max_iters)?.partition)
    }
}

/// Exact optimum by enumeration; small instances only.
pub struct Exhaustive;

impl Partitioner for Exhaustive {
    fn name(&self) -> &'static str {
        "exhaustive"
    }

    fn partition(
        &self,
        problem: &UnitProblem,
        ranks: usize,
        weights: ObjectiveWeights,
    ) -> Result<Partition> {
        brute_force_partition(problem, ranks, weights)
    }
}

pub static PARTITIONERS: &[Entry<dyn Partitioner, PartitionerSettings>] = &[
    Entry {
        name: "refine",
        summary: "SFC cut refined by boundary-unit local search",
        build: |s| {
            Box::new(LocalSearch {
                max_iters: s.max_iters,
            })
        },
    },
    Entry {
        name: "sfc",
        summary: "contiguous space-filling-curve cut",
        build: |_| Box::new(SfcCut),
    },
    Entry {
        name: "exhaustive",
        summary: "exact optimum by enumeration (at most 1e7 assignments)",
        build: |_| Box::new(Exhaustive),
    },
];

pub fn partitioner(name: &str) -> Result<Box<dyn Partitioner>> {
    partitioner_with(name, &PartitionerSettings::default())
}

pub fn partitioner_with(
    name: &str,
    settings: &PartitionerSettings,
) -> Result<Box<dyn Partitioner>> {
    Ok((lookup("partitioner", PARTITIONERS, name)?.build)(settings))
}

pub static DISTRIBUTIONS: &[Entry<dyn Distribution, ()>] = &[
    Entry {
        name: "uniform",
        summary: "i.i.d. points in the unit square",
        build: |_| Box::new(UniformDistribution),
    },
    Entry {
        name: "cluster",
        summary: "eight Gaussian blobs (sigma 0.02) with centers in [0.1, 0.9]^2",
        build: |_| Box::new(ClusterDistribution::default()),
    },
];

pub fn distribution(name: &str) -> Result<Box<dyn Distribution>> {
    Ok((lookup("distribution", DISTRIBUTIONS, name)?.build)(&()))
}

pub fn names<T: ?Sized, S>(entries: &[Entry<T, S>]) -> Vec<&'static str> {
    entries.iter().map(|e| e.name).collect()
}
