//! A-priori load balancing over the Morton-ordered subtrees at a granularity
//! level `k`.
//!
//! Cells below level `k` belong to the rank owning their level-`k` ancestor;
//! cells above it are replicated on every rank and excluded from the
//! objective `J = max_rank(work) + lambda * total_bytes`.

use serde::{Deserialize, Serialize};

use crate::costmodel::{
    estimate_work, CommEstimate, CostParams, WorkEstimate, BYTES_PER_COEFF, BYTES_PER_PARTICLE,
};
use crate::error::{Error, Result};
use crate::expansions::Order;
use crate::quadtree::{MortonKey, Quadtree};

/// Largest exhaustive search space accepted by [`brute_force_partition`].
pub const MAX_BRUTE_FORCE: f64 = 1e7;

/// Default number of accepted moves before local search gives up.
pub const DEFAULT_MAX_ITERS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubtreeUnit {
    pub root: MortonKey,
    pub work: f64,
    pub particle_count: usize,
}

/// Rank of every unit, in Morton order of the units.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub k: u8,
    pub ranks: usize,
    pub assignment: Vec<usize>,
}

impl Partition {
    pub fn validate(&self, units: usize) -> Result<()> {
        if self.ranks == 0 {
            return Err(Error::domain("partition has zero ranks"));
        }
        if self.assignment.len() != units {
            return Err(Error::domain(format!(
                "partition assigns {} units, expected {units}",
                self.assignment.len()
            )));
        }
        if let Some(r) = self.assignment.iter().find(|&&r| r >= self.ranks) {
            return Err(Error::domain(format!(
                "rank {r} out of range for {} ranks",
                self.ranks
            )));
        }
        Ok(())
    }
}

/// Owner lookup for cells at or below the partition level.
pub(crate) struct RankMap<'a> {
    k: u8,
    assignment: &'a [usize],
}

impl<'a> RankMap<'a> {
    pub(crate) fn new(tree: &Quadtree, partition: &'a Partition) -> Result<Self> {
        if partition.k > tree.depth() {
            return Err(Error::domain(format!(
                "partition level {} below tree depth {}",
                partition.k,
                tree.depth()
            )));
        }
        partition.validate(1usize << (2 * u32::from(partition.k)))?;
        Ok(RankMap {
            k: partition.k,
            assignment: &partition.assignment,
        })
    }

    pub(crate) fn owner(&self, key: MortonKey) -> usize {
        self.assignment[key.ancestor(self.k).index as usize]
    }
}

/// Objective weighting: flops charged per communicated byte.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveWeights {
    pub lambda: f64,
}

impl ObjectiveWeights {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::domain(format!("lambda must be >= 0, got {lambda}")));
        }
        Ok(ObjectiveWeights { lambda })
    }
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        ObjectiveWeights { lambda: 0.01 }
    }
}

/// The subtrees rooted at level `k`, in Morton order, with their aggregated
/// work. Empty units are included with zero work.
pub fn sfc_units(tree: &Quadtree, work: &WorkEstimate, k: u8) -> Result<Vec<SubtreeUnit>> {
    if k < 2 || k > tree.depth() {
        return Err(Error::domain(format!(
            "granularity level {k} outside [2, {}]",
            tree.depth()
        )));
    }
    Ok(tree
        .level(k)
        .iter()
        .map(|cell| SubtreeUnit {
            root: cell.key,
            work: work.subtree_total(cell.key),
            particle_count: cell.count(),
        })
        .collect())
}

/// Contiguous SFC chunks: each rank takes the shortest prefix of the
/// remaining units whose work reaches `remaining / remaining_ranks`; the
/// last rank takes the rest.
pub fn initial_partition(works: &[f64], ranks: usize, k: u8) -> Result<Partition> {
    if ranks < 1 {
        return Err(Error::domain("need at least one rank"));
    }
    let n = works.len();
    let mut assignment = vec![0; n];
    let mut start = 0;
    for r in 0..ranks {
        if r + 1 == ranks {
            assignment[start..].fill(r);
            break;
        }
        let remaining: f64 = works[start..].iter().sum();
        let target = remaining / (ranks - r) as f64;
        let mut acc = 0.0;
        let mut end = start;
        while end < n && acc < target {
            acc += works[end];
            end += 1;
        }
        assignment[start..end].fill(r);
        start = end;
    }
    Ok(Partition {
        k,
        ranks,
        assignment,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ItemKind {
    Multipole,
    Particles,
}

/// Data owned by one unit and needed by others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommItem {
    pub kind: ItemKind,
    pub owner: usize,
    pub bytes: f64,
    /// Tree level the message belongs to.
    pub level: u8,
    /// Units that read this item; sorted, deduplicated, never `owner`.
    pub needers: Vec<usize>,
}

/// Unit-level view of a partitioning instance: per-unit work, spatial
/// adjacency and the communication items. Built from a tree, or by hand for
/// synthetic instances.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitProblem {
    pub k: u8,
    pub works: Vec<f64>,
    /// Work replicated on every rank (cells above level `k`).
    pub coarse_work: f64,
    /// Same-level spatial neighbours of each unit.
    pub adjacency: Vec<Vec<usize>>,
    pub items: Vec<CommItem>,
    /// Items touching each unit, as owner or reader.
    involved: Vec<Vec<usize>>,
}

impl UnitProblem {
    pub fn new(
        k: u8,
        works: Vec<f64>,
        coarse_work: f64,
        adjacency: Vec<Vec<usize>>,
        items: Vec<CommItem>,
    ) -> Result<Self> {
        let n = works.len();
        if adjacency.len() != n {
            return Err(Error::domain("adjacency must list every unit"));
        }
        if works.iter().any(|w| !(*w >= 0.0)) || !(coarse_work >= 0.0) {
            return Err(Error::domain("unit work must be non-negative"));
        }
        let mut involved = vec![Vec::new(); n];
        for (i, item) in items.iter().enumerate() {
            if item.owner >= n || item.needers.iter().any(|&u| u >= n || u == item.owner) {
                return Err(Error::domain(format!(
                    "communication item {i} references bad units"
                )));
            }
            involved[item.owner].push(i);
            for &u in &item.needers {
                involved[u].push(i);
            }
        }
        for list in &mut involved {
            list.dedup();
        }
        Ok(UnitProblem {
            k,
            works,
            coarse_work,
            adjacency,
            items,
            involved,
        })
    }

    /// Independent units with the given works and no communication.
    pub fn synthetic(works: Vec<f64>) -> Self {
        let n = works.len();
        UnitProblem::new(0, works, 0.0, vec![Vec::new(); n], Vec::new())
            .expect("synthetic instance is well formed")
    }

    pub fn from_tree(tree: &Quadtree, p: Order, params: &CostParams, k: u8) -> Result<Self> {
        let work = estimate_work(tree, p, params);
        Self::from_work(tree, &work, p, k)
    }

    pub fn from_work(tree: &Quadtree, work: &WorkEstimate, p: Order, k: u8) -> Result<Self> {
        let units = sfc_units(tree, work, k)?;
        let unit_of = |key: MortonKey| key.ancestor(k).index as usize;
        let adjacency = units
            .iter()
            .map(|u| {
                u.root
                    .neighbors()
                    .iter()
                    .map(|n| n.index as usize)
                    .collect()
            })
            .collect();

        let mut items = Vec::new();
        let needers_of = |owner: usize, keys: Vec<MortonKey>| -> Vec<usize> {
            let mut v: Vec<usize> = keys
                .into_iter()
                .filter(|&c| tree.count(c) > 0)
                .map(unit_of)
                .filter(|&u| u != owner)
                .collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        let coeff_bytes = BYTES_PER_COEFF * p.terms() as f64;
        for level in k..=tree.depth() {
            for cell in tree.level(level) {
                if cell.is_empty() {
                    continue;
                }
                let owner = unit_of(cell.key);
                let needers = needers_of(owner, cell.key.interaction_list());
                if !needers.is_empty() {
                    items.push(CommItem {
                        kind: ItemKind::Multipole,
                        owner,
                        bytes: coeff_bytes,
                        level,
                        needers,
                    });
                }
            }
        }
        for leaf in tree.leaves() {
            if leaf.is_empty() {
                continue;
            }
            let owner = unit_of(leaf.key);
            let needers = needers_of(owner, leaf.key.neighbors());
            if !needers.is_empty() {
                items.push(CommItem {
                    kind: ItemKind::Particles,
                    owner,
                    bytes: BYTES_PER_PARTICLE * leaf.count() as f64,
                    level: tree.depth(),
                    needers,
                });
            }
        }
        UnitProblem::new(
            k,
            units.iter().map(|u| u.work).collect(),
            work.coarse_total(k),
            adjacency,
            items,
        )
    }

    pub fn len(&self) -> usize {
        self.works.len()
    }

    pub fn is_empty(&self) -> bool {
        self.works.is_empty()
    }

    pub fn total_work(&self) -> f64 {
        self.works.iter().sum()
    }

    /// Balanced work per rank (coarse work excluded).
    pub fn loads(&self, partition: &Partition) -> Vec<f64> {
        let mut loads = vec![0.0; partition.ranks];
        for (w, &r) in self.works.iter().zip(&partition.assignment) {
            loads[r] += w;
        }
        loads
    }

    /// `max(load) / mean(load)`; 1 when there is no work.
    pub fn work_imbalance(&self, partition: &Partition) -> f64 {
        let loads = self.loads(partition);
        let max = loads.iter().cloned().fold(0.0, f64::max);
        let mean = loads.iter().sum::<f64>() / loads.len() as f64;
        if mean > 0.0 {
            max / mean
        } else {
            1.0
        }
    }

    fn item_receivers(&self, item: &CommItem, assignment: &[usize], out: &mut Vec<usize>) {
        let src = assignment[item.owner];
        out.clear();
        out.extend(
            item.needers
                .iter()
                .map(|&u| assignment[u])
                .filter(|&r| r != src),
        );
        out.sort_unstable();
        out.dedup();
    }

    fn item_bytes(&self, item: &CommItem, assignment: &[usize], scratch: &mut Vec<usize>) -> f64 {
        self.item_receivers(item, assignment, scratch);
        item.bytes * scratch.len() as f64
    }

    pub fn total_bytes(&self, assignment: &[usize]) -> f64 {
        let mut scratch = Vec::new();
        self.items
            .iter()
            .map(|it| self.item_bytes(it, assignment, &mut scratch))
            .sum()
    }

    /// Full pairwise communication for `partition`.
    pub fn comm(&self, partition: &Partition) -> CommEstimate {
        let ranks = partition.ranks;
        let mut est = CommEstimate::zero(ranks);
        let mut level_mask = vec![vec![0u64; ranks]; ranks];
        let mut receivers = Vec::new();
        for item in &self.items {
            let src = partition.assignment[item.owner];
            self.item_receivers(item, &partition.assignment, &mut receivers);
            for &r in &receivers {
                match item.kind {
                    ItemKind::Multipole => est.bytes_multipole[src][r] += item.bytes,
                    ItemKind::Particles => est.bytes_particles[src][r] += item.bytes,
                }
                level_mask[src][r] |= 1 << item.level;
            }
        }
        for s in 0..ranks {
            for r in 0..ranks {
                est.message_count[s][r] = u64::from(level_mask[s][r].count_ones());
                est.total_bytes_multipole += est.bytes_multipole[s][r];
                est.total_bytes_particles += est.bytes_particles[s][r];
                est.total_messages += est.message_count[s][r];
            }
        }
        est
    }

    pub fn objective(&self, partition: &Partition, weights: ObjectiveWeights) -> Result<f64> {
        partition.validate(self.len())?;
        Ok(self.objective_unchecked(&partition.assignment, partition.ranks, weights))
    }

    fn objective_unchecked(
        &self,
        assignment: &[usize],
        ranks: usize,
        weights: ObjectiveWeights,
    ) -> f64 {
        let mut loads = vec![0.0; ranks];
        for (w, &r) in self.works.iter().zip(assignment) {
            loads[r] += w;
        }
        let bottleneck = loads.iter().cloned().fold(0.0, f64::max);
        if weights.lambda == 0.0 {
            bottleneck
        } else {
            bottleneck + weights.lambda * self.total_bytes(assignment)
        }
    }

    /// Destination ranks for `unit`: ranks holding one of its Morton-order or
    /// spatial neighbours, plus any rank that owns no unit at all.
    fn candidate_moves(
        &self,
        assignment: &[usize],
        idle: &[usize],
        unit: usize,
        out: &mut Vec<usize>,
    ) {
        let own = assignment[unit];
        out.clear();
        out.extend_from_slice(idle);
        if unit > 0 {
            out.push(assignment[unit - 1]);
        }
        if unit + 1 < assignment.len() {
            out.push(assignment[unit + 1]);
        }
        out.extend(self.adjacency[unit].iter().map(|&u| assignment[u]));
        out.retain(|&r| r != own);
        out.sort_unstable();
        out.dedup();
    }

    /// Change in total bytes if `unit` moves to `dest`.
    fn bytes_delta(&self, assignment: &mut [usize], unit: usize, dest: usize) -> f64 {
        let mut scratch = Vec::new();
        let before: f64 = self.involved[unit]
            .iter()
            .map(|&i| self.item_bytes(&self.items[i], assignment, &mut scratch))
            .sum();
        let own = std::mem::replace(&mut assignment[unit], dest);
        let after: f64 = self.involved[unit]
            .iter()
            .map(|&i| self.item_bytes(&self.items[i], assignment, &mut scratch))
            .sum();
        assignment[unit] = own;
        after - before
    }
}

/// Outcome of a local search run.
#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub partition: Partition,
    pub objective: f64,
    pub accepted_moves: usize,
}

/// Greedy first-improvement local search over single-unit moves of boundary
/// units (or moves onto a rank that owns nothing). Candidates are scanned by
/// unit index, then destination rank; the scan restarts after every accepted
/// move.
pub fn refine_partition(
    problem: &UnitProblem,
    start: &Partition,
    weights: ObjectiveWeights,
    max_iters: usize,
) -> Result<Refinement> {
    let mut current = problem.objective(start, weights)?;
    let ranks = start.ranks;
    let mut assignment = start.assignment.clone();
    let mut loads = problem.loads(start);
    let mut bytes = if weights.lambda == 0.0 {
        0.0
    } else {
        problem.total_bytes(&assignment)
    };
    let mut dests = Vec::new();
    let mut accepted = 0;

    'search: while accepted < max_iters {
        let mut used = vec![false; ranks];
        for &r in &assignment {
            used[r] = true;
        }
        let idle: Vec<usize> = (0..ranks).filter(|&r| !used[r]).collect();
        for unit in 0..assignment.len() {
            problem.candidate_moves(&assignment, &idle, unit, &mut dests);
            for &dest in &dests {
                let own = assignment[unit];
                let w = problem.works[unit];
                loads[own] -= w;
                loads[dest] += w;
                let delta = if weights.lambda == 0.0 {
                    0.0
                } else {
                    problem.bytes_delta(&mut assignment, unit, dest)
                };
                let screened =
                    loads.iter().cloned().fold(0.0, f64::max) + weights.lambda * (bytes + delta);
                loads[own] += w;
                loads[dest] -= w;
                if screened >= current {
                    continue;
                }
                // confirm with a from-scratch evaluation so J never creeps up
                assignment[unit] = dest;
                let exact = problem.objective_unchecked(&assignment, ranks, weights);
                if exact < current {
                    current = exact;
                    loads = problem.loads(&Partition {
                        k: start.k,
                        ranks,
                        assignment: assignment.clone(),
                    });
                    bytes = if weights.lambda == 0.0 {
                        0.0
                    } else {
                        problem.total_bytes(&assignment)
                    };
                    accepted += 1;
                    continue 'search;
                }
                assignment[unit] = own;
            }
        }
        break;
    }

    Ok(Refinement {
        partition: Partition {
            k: start.k,
            ranks,
            assignment,
        },
        objective: current,
        accepted_moves: accepted,
    })
}

/// Exact minimizer of `J` by enumerating every assignment in lexicographic
/// order; the first minimum found wins ties.
pub fn brute_force_partition(
    problem: &UnitProblem,
    ranks: usize,
    weights: ObjectiveWeights,
) -> Result<Partition> {
    if ranks < 1 {
        return Err(Error::domain("need at least one rank"));
    }
    let n = problem.len();
    let space = (ranks as f64).powi(n as i32);
    if space > MAX_BRUTE_FORCE {
        return Err(Error::domain(format!(
            "exhaustive search over {ranks}^{n} assignments exceeds {MAX_BRUTE_FORCE}"
        )));
    }
    let mut assignment = vec![0usize; n];
    let mut best = assignment.clone();
    let mut best_j = problem.objective_unchecked(&assignment, ranks, weights);
    loop {
        // odometer increment, last position fastest
        let mut i = n;
        loop {
            if i == 0 {
                return Ok(Partition {
                    k: problem.k,
                    ranks,
                    assignment: best,
                });
            }
            i -= 1;
            assignment[i] += 1;
            if assignment[i] < ranks {
                break;
            }
            assignment[i] = 0;
        }
        let j = problem.objective_unchecked(&assignment, ranks, weights);
        if j < best_j {
            best_j = j;
            best.copy_from_slice(&assignment);
        }
    }
}

/// `J` for a partition of `tree`, computed from the cell-level estimates.
pub fn objective(
    tree: &Quadtree,
    p: Order,
    params: &CostParams,
    partition: &Partition,
    weights: ObjectiveWeights,
) -> Result<f64> {
    UnitProblem::from_tree(tree, p, params, partition.k)?.objective(partition, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_comm() -> ObjectiveWeights {
        ObjectiveWeights::new(0.0).unwrap()
    }

    #[test]
    fn initial_single_rank() {
        let p = initial_partition(&[1.0, 2.0, 3.0], 1, 2).unwrap();
        assert_eq!(p.assignment, vec![0, 0, 0]);
        assert!(initial_partition(&[1.0], 0, 2).is_err());
    }

    #[test]
    fn initial_equal_works() {
        let p = initial_partition(&[1.0; 4], 2, 2).unwrap();
        assert_eq!(p.assignment, vec![0, 0, 1, 1]);
    }

    #[test]
    fn initial_scan_rule_3113() {
        // rank 0 must reach 8/2 = 4: 3 falls short, 3+1 reaches it
        let p = initial_partition(&[3.0, 1.0, 1.0, 3.0], 2, 2).unwrap();
        assert_eq!(p.assignment, vec![0, 0, 1, 1]);
    }

    #[test]
    fn initial_more_ranks_than_units() {
        let p = initial_partition(&[1.0, 1.0], 4, 2).unwrap();
        assert_eq!(p.assignment, vec![0, 1]);
        p.validate(2).unwrap();
    }

    #[test]
    fn refine_moves_unit_two() {
        let prob = UnitProblem::synthetic(vec![1.0, 1.0, 1.0, 5.0]);
        let start = Partition {
            k: 0,
            ranks: 2,
            assignment: vec![0, 0, 1, 1],
        };
        assert_eq!(prob.objective(&start, zero_comm()).unwrap(), 6.0);
        let r = refine_partition(&prob, &start, zero_comm(), 100).unwrap();
        assert_eq!(r.partition.assignment, vec![0, 0, 0, 1]);
        assert_eq!(r.objective, 5.0);
        assert_eq!(r.accepted_moves, 1);
    }

    #[test]
    fn refine_keeps_optimal() {
        let prob = UnitProblem::synthetic(vec![2.0; 4]);
        let start = initial_partition(&prob.works, 2, 0).unwrap();
        let r = refine_partition(&prob, &start, zero_comm(), 100).unwrap();
        assert_eq!(r.accepted_moves, 0);
        assert_eq!(r.partition, start);
    }

    #[test]
    fn refine_respects_max_iters() {
        let prob = UnitProblem::synthetic(vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        let start = Partition {
            k: 0,
            ranks: 2,
            assignment: vec![0; 8],
        };
        let r = refine_partition(&prob, &start, zero_comm(), 0).unwrap();
        assert_eq!(r.partition, start);
        let r = refine_partition(&prob, &start, zero_comm(), 2).unwrap();
        assert_eq!(r.accepted_moves, 2);
    }

    #[test]
    fn brute_force_small_cases() {
        let prob = UnitProblem::synthetic(vec![1.0, 1.0]);
        let b = brute_force_partition(&prob, 2, zero_comm()).unwrap();
        assert_eq!(b.assignment, vec![0, 1]);
        let b = brute_force_partition(&prob, 1, zero_comm()).unwrap();
        assert_eq!(b.assignment, vec![0, 0]);
        let big = UnitProblem::synthetic(vec![1.0; 30]);
        assert!(brute_force_partition(&big, 2, zero_comm()).is_err());
    }

    #[test]
    fn objective_adds_weighted_bytes() {
        let item = CommItem {
            kind: ItemKind::Particles,
            owner: 0,
            bytes: 24.0,
            level: 2,
            needers: vec![1, 2],
        };
        let prob =
            UnitProblem::new(2, vec![1.0, 2.0, 3.0], 0.0, vec![vec![]; 3], vec![item]).unwrap();
        let part = Partition {
            k: 2,
            ranks: 3,
            assignment: vec![0, 1, 2],
        };
        // the item goes to two distinct ranks
        let j = prob
            .objective(&part, ObjectiveWeights::new(0.5).unwrap())
            .unwrap();
        assert_eq!(j, 3.0 + 0.5 * 48.0);
        let same = Partition {
            assignment: vec![0, 1, 1],
            ..part.clone()
        };
        assert_eq!(prob.total_bytes(&same.assignment), 24.0);
        let comm = prob.comm(&part);
        assert_eq!(comm.message_count[0][1], 1);
        assert_eq!(comm.total_bytes(), 48.0);
    }

    #[test]
    fn weights_reject_negative() {
        assert!(ObjectiveWeights::new(-1.0).is_err());
        assert!(ObjectiveWeights::new(f64::NAN).is_err());
    }

    #[test]
    fn partition_json_shape() {
        let p = Partition {
            k: 3,
            ranks: 2,
            assignment: vec![0, 1],
        };
        assert_eq!(
            serde_json::to_string(&p).unwrap(),
            r#"{"k":3,"ranks":2,"assignment":[0,1]}"#
        );
    }
}
