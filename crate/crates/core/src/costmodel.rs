//! Analytic work, communication and memory estimates.
//!
//! Work is counted in flop units: operator translations cost `c * (p+1)^2`,
//! particle/expansion operations `c * n * (p+1)`, and direct interactions
//! `c_p2p * n_target * n_source`. M2L and P2P work is charged to the target
//! cell.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expansions::Order;
use crate::partition::{Partition, RankMap};
use crate::quadtree::{MortonKey, Quadtree};

/// Bytes per complex coefficient on the wire.
pub const BYTES_PER_COEFF: f64 = 16.0;
/// Bytes per particle on the wire (x, y, strength).
pub const BYTES_PER_PARTICLE: f64 = 24.0;
/// Bytes per stored result value.
pub const BYTES_PER_RESULT: f64 = 16.0;

/// Per-operator cost constants. Keys match the run config JSON.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostParams {
    pub c_p2m: f64,
    pub c_m2m: f64,
    pub c_m2l: f64,
    pub c_l2l: f64,
    pub c_l2p: f64,
    pub c_p2p: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        CostParams {
            c_p2m: 1.0,
            c_m2m: 1.0,
            c_m2l: 1.0,
            c_l2l: 1.0,
            c_l2p: 1.0,
            c_p2p: 1.0,
        }
    }
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.c_p2m, self.c_m2m, self.c_m2l, self.c_l2l, self.c_l2p, self.c_p2p,
        ];
        if all.iter().all(|c| c.is_finite() && *c > 0.0) {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "cost constants must be positive: {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CellWork {
    pub w_p2m: f64,
    pub w_m2m: f64,
    pub w_m2l: f64,
    pub w_l2l: f64,
    pub w_l2p: f64,
    pub w_p2p: f64,
    pub w_total: f64,
}

impl CellWork {
    fn finish(mut self) -> Self {
        self.w_total = self.w_p2m + self.w_m2m + self.w_m2l + self.w_l2l + self.w_l2p + self.w_p2p;
        self
    }
}

/// Work of every cell, stored level by level in Morton order.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkEstimate {
    levels: Vec<Vec<CellWork>>,
    pub total: f64,
}

impl WorkEstimate {
    pub fn cell(&self, key: MortonKey) -> &CellWork {
        &self.levels[usize::from(key.level)][key.index as usize]
    }

    pub fn level(&self, level: u8) -> &[CellWork] {
        &self.levels[usize::from(level)]
    }

    /// Total work of all cells at levels `< k`.
    pub fn coarse_total(&self, k: u8) -> f64 {
        self.levels[..usize::from(k)]
            .iter()
            .flatten()
            .map(|w| w.w_total)
            .sum()
    }

    /// Total work of `root` and all its descendants.
    pub fn subtree_total(&self, root: MortonKey) -> f64 {
        let mut sum = 0.0;
        for (depth_below, level) in self.levels[usize::from(root.level)..].iter().enumerate() {
            let span = 1usize << (2 * depth_below);
            let start = root.index as usize * span;
            sum += level[start..start + span]
                .iter()
                .map(|w| w.w_total)
                .sum::<f64>();
        }
        sum
    }
}

pub fn estimate_work(tree: &Quadtree, p: Order, params: &CostParams) -> WorkEstimate {
    let terms = p.terms() as f64;
    let op = terms * terms;
    let depth = tree.depth();
    let mut levels = Vec::with_capacity(usize::from(depth) + 1);
    let mut total = 0.0;
    for level in 0..=depth {
        let cells: Vec<CellWork> = tree
            .level(level)
            .iter()
            .map(|cell| {
                if cell.is_empty() {
                    return CellWork::default();
                }
                let key = cell.key;
                let n = cell.count() as f64;
                let mut w = CellWork::default();
                if tree.is_leaf(key) {
                    w.w_p2m = params.c_p2m * n * terms;
                    w.w_l2p = params.c_l2p * n * terms;
                    let near: usize = key.neighbors().iter().map(|&d| tree.count(d)).sum();
                    w.w_p2p = params.c_p2p * n * (n + near as f64);
                } else {
                    let kids = key
                        .children()
                        .iter()
                        .filter(|&&c| tree.count(c) > 0)
                        .count() as f64;
                    w.w_m2m = params.c_m2m * op * kids;
                    w.w_l2l = params.c_l2l * op * kids;
                }
                let far = key
                    .interaction_list()
                    .iter()
                    .filter(|&&d| tree.count(d) > 0)
                    .count() as f64;
                w.w_m2l = params.c_m2l * op * far;
                w.finish()
            })
            .collect();
        total += cells.iter().map(|w| w.w_total).sum::<f64>();
        levels.push(cells);
    }
    WorkEstimate { levels, total }
}

/// Traffic between ranks, indexed `[sender][receiver]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommEstimate {
    pub ranks: usize,
    pub bytes_multipole: Vec<Vec<f64>>,
    pub bytes_particles: Vec<Vec<f64>>,
    pub message_count: Vec<Vec<u64>>,
    pub total_bytes_multipole: f64,
    pub total_bytes_particles: f64,
    pub total_messages: u64,
}

impl CommEstimate {
    pub fn zero(ranks: usize) -> Self {
        CommEstimate {
            ranks,
            bytes_multipole: vec![vec![0.0; ranks]; ranks],
            bytes_particles: vec![vec![0.0; ranks]; ranks],
            message_count: vec![vec![0; ranks]; ranks],
            total_bytes_multipole: 0.0,
            total_bytes_particles: 0.0,
            total_messages: 0,
        }
    }

    pub fn total_bytes(&self) -> f64 {
        self.total_bytes_multipole + self.total_bytes_particles
    }

    /// Bytes sent from `s` to `r`.
    pub fn bytes(&self, s: usize, r: usize) -> f64 {
        self.bytes_multipole[s][r] + self.bytes_particles[s][r]
    }
}

/// Communication implied by `partition`, computed cell by cell.
///
/// A non-empty cell owned by `s` is shipped to `r` once if any non-empty cell
/// owned by `r` has it in its interaction list; a non-empty leaf's particles
/// are shipped if it neighbours a non-empty leaf on `r`. Cells above the
/// partition level are replicated and never shipped.
pub fn estimate_comm(tree: &Quadtree, p: Order, partition: &Partition) -> Result<CommEstimate> {
    let ranks = partition.ranks;
    let owners = RankMap::new(tree, partition)?;
    let k = partition.k;
    let depth = tree.depth();
    let mut est = CommEstimate::zero(ranks);
    let mut mp_cells = vec![vec![0u64; ranks]; ranks];
    let mut levels_used: Vec<Vec<BTreeSet<u8>>> = vec![vec![BTreeSet::new(); ranks]; ranks];

    for level in k..=depth {
        for cell in tree.level(level) {
            if cell.is_empty() {
                continue;
            }
            let src = owners.owner(cell.key);
            let receivers: BTreeSet<usize> = cell
                .key
                .interaction_list()
                .into_iter()
                .filter(|&c| tree.count(c) > 0)
                .map(|c| owners.owner(c))
                .filter(|&r| r != src)
                .collect();
            for r in receivers {
                mp_cells[src][r] += 1;
                levels_used[src][r].insert(level);
            }
        }
    }
    let mut particles = vec![vec![0u64; ranks]; ranks];
    for leaf in tree.leaves() {
        if leaf.is_empty() {
            continue;
        }
        let src = owners.owner(leaf.key);
        let receivers: BTreeSet<usize> = leaf
            .key
            .neighbors()
            .into_iter()
            .filter(|&c| tree.count(c) > 0)
            .map(|c| owners.owner(c))
            .filter(|&r| r != src)
            .collect();
        for r in receivers {
            particles[src][r] += leaf.count() as u64;
            levels_used[src][r].insert(depth);
        }
    }

    let coeff_bytes = BYTES_PER_COEFF * p.terms() as f64;
    for s in 0..ranks {
        for r in 0..ranks {
            est.bytes_multipole[s][r] = coeff_bytes * mp_cells[s][r] as f64;
            est.bytes_particles[s][r] = BYTES_PER_PARTICLE * particles[s][r] as f64;
            est.message_count[s][r] = levels_used[s][r].len() as u64;
            est.total_bytes_multipole += est.bytes_multipole[s][r];
            est.total_bytes_particles += est.bytes_particles[s][r];
            est.total_messages += est.message_count[s][r];
        }
    }
    Ok(est)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryEstimate {
    pub bytes_cells: f64,
    pub bytes_particles: f64,
    pub bytes_results: f64,
    pub bytes_total: f64,
}

/// Two expansions per non-empty cell plus particle and result storage.
pub fn estimate_memory(tree: &Quadtree, p: Order) -> MemoryEstimate {
    let n = tree.len() as f64;
    let bytes_cells = tree.non_empty_cells() as f64 * 2.0 * p.terms() as f64 * BYTES_PER_COEFF;
    let bytes_particles = n * BYTES_PER_PARTICLE;
    let bytes_results = n * BYTES_PER_RESULT;
    MemoryEstimate {
        bytes_cells,
        bytes_particles,
        bytes_results,
        bytes_total: bytes_cells + bytes_particles + bytes_results,
    }
}
