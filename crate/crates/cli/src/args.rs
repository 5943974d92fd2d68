use std::path::PathBuf;

use clap::{ArgAction, Args, ValueEnum};
use fmm2d::config::RunConfig;
use fmm2d::{Depth, Mode, Order, Result};

/// Overrides applied on top of the defaults and the `--config` file.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// JSON file with a (partial) run configuration.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Expansion order.
    #[arg(long)]
    pub p: Option<u8>,
    /// Tree depth, or `auto`.
    #[arg(long)]
    pub depth: Option<Depth>,
    /// Target particles per leaf for automatic depth.
    #[arg(long)]
    pub s_target: Option<f64>,
    /// Simulated rank count.
    #[arg(long)]
    pub ranks: Option<usize>,
    /// Communication weight in the partition objective (flops per byte).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Partition granularity level.
    #[arg(long)]
    pub k: Option<u8>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, action = ArgAction::Set, value_name = "BOOL")]
    pub reproducible: Option<bool>,
    /// Accepted-move limit for the local search.
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Field solver: fmm or direct.
    #[arg(long, alias = "backend")]
    pub solver: Option<String>,
    /// Partitioner: refine, sfc or exhaustive.
    #[arg(long)]
    pub partitioner: Option<String>,
    #[arg(long)]
    pub c_p2m: Option<f64>,
    #[arg(long)]
    pub c_m2m: Option<f64>,
    #[arg(long)]
    pub c_m2l: Option<f64>,
    #[arg(long)]
    pub c_l2l: Option<f64>,
    #[arg(long)]
    pub c_l2p: Option<f64>,
    #[arg(long)]
    pub c_p2p: Option<f64>,
    #[arg(long)]
    pub flop_rate: Option<f64>,
    #[arg(long)]
    pub latency: Option<f64>,
    #[arg(long)]
    pub bandwidth: Option<f64>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl ConfigArgs {
    /// Defaults, then the config file, then the flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_json(&std::fs::read_to_string(path)?)?,
            None => RunConfig::default(),
        };
        if let Some(p) = self.p {
            cfg.p = Order::new(p)?;
        }
        set(&mut cfg.depth, self.depth);
        set(&mut cfg.s_target, self.s_target);
        set(&mut cfg.ranks, self.ranks);
        set(&mut cfg.lambda, self.lambda);
        set(&mut cfg.k, self.k);
        set(&mut cfg.seed, self.seed);
        set(&mut cfg.reproducible, self.reproducible);
        set(&mut cfg.max_iters, self.max_iters);
        set(&mut cfg.solver, self.solver.clone());
        set(&mut cfg.partitioner, self.partitioner.clone());
        set(&mut cfg.cost.c_p2m, self.c_p2m);
        set(&mut cfg.cost.c_m2m, self.c_m2m);
        set(&mut cfg.cost.c_m2l, self.c_m2l);
        set(&mut cfg.cost.c_l2l, self.c_l2l);
        set(&mut cfg.cost.c_l2p, self.c_l2p);
        set(&mut cfg.cost.c_p2p, self.c_p2p);
        set(&mut cfg.machine.flop_rate, self.flop_rate);
        set(&mut cfg.machine.latency, self.latency);
        set(&mut cfg.machine.bandwidth, self.bandwidth);
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Potential,
    Field,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Potential => Mode::Potential,
            ModeArg::Field => Mode::Field,
        }
    }
}

/// Comma-separated list, e.g. `1,2,4,8`.
#[derive(Debug, Clone, PartialEq)]
pub struct List<T>(pub Vec<T>);

impl<T: std::str::FromStr> std::str::FromStr for List<T> {
    type Err = String;

    fn from_str(text: &str) -> std::result::Result<Self, String> {
        text.split(',')
            .map(|s| {
                s.trim()
                    .parse::<T>()
                    .map_err(|_| format!("bad list entry `{s}`"))
            })
            .collect::<std::result::Result<Vec<T>, String>>()
            .map(List)
    }
}
