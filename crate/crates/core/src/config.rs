use serde::{Deserialize, Serialize};

use crate::costmodel::CostParams;
use crate::error::{Error, Result};
use crate::expansions::Order;
use crate::parsim::MachineModel;
use crate::partition::{ObjectiveWeights, DEFAULT_MAX_ITERS};
use crate::quadtree::{Depth, DEFAULT_S_TARGET, MAX_DEPTH};
use crate::registry::{PartitionerSettings, SolverSettings};

/// Fully resolved settings of one CLI invocation. Cost constants sit at the
/// top level of the JSON (`"c_p2m"` ... `"c_p2p"`); the machine model is the
/// nested `"machine"` object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub p: Order,
    pub depth: Depth,
    pub s_target: f64,
    pub ranks: usize,
    pub lambda: f64,
    pub k: u8,
    pub seed: u64,
    pub reproducible: bool,
    pub max_iters: usize,
    pub solver: String,
    pub partitioner: String,
    #[serde(flatten)]
    pub cost: CostParams,
    pub machine: MachineModel,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            p: Order::default(),
            depth: Depth::Auto,
            s_target: DEFAULT_S_TARGET,
            ranks: 1,
            lambda: 0.01,
            k: 3,
            seed: 0,
            reproducible: true,
            max_iters: DEFAULT_MAX_ITERS,
            solver: "fmm".into(),
            partitioner: "refine".into(),
            cost: CostParams::default(),
            machine: MachineModel::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s_target > 0.0) || !self.s_target.is_finite() {
            return Err(Error::domain("s_target must be positive"));
        }
        if let Depth::Fixed(d) = self.depth {
            if !(1..=MAX_DEPTH).contains(&d) {
                return Err(Error::domain(format!("depth {d} outside [1, {MAX_DEPTH}]")));
            }
        }
        if self.ranks < 1 {
            return Err(Error::domain("ranks must be >= 1"));
        }
        if self.k < 2 {
            return Err(Error::domain("granularity level k must be >= 2"));
        }
        self.weights()?;
        self.cost.validate()?;
        self.machine.validate()
    }

    pub fn weights(&self) -> Result<ObjectiveWeights> {
        ObjectiveWeights::new(self.lambda)
    }

    pub fn solver_settings(&self) -> SolverSettings {
        SolverSettings {
            order: self.p,
            depth: self.depth,
            s_target: self.s_target,
            reproducible: self.reproducible,
        }
    }

    pub fn partitioner_settings(&self) -> PartitionerSettings {
        PartitionerSettings {
            max_iters: self.max_iters,
        }
    }
}
