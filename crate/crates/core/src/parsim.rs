//! Bulk-synchronous timeline model: every rank computes its balanced work
//! plus the replicated coarse work, then exchanges its messages; there is no
//! overlap between the two phases.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::{ObjectiveWeights, Partition, UnitProblem};
use crate::registry::Partitioner;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MachineModel {
    /// flops per second
    pub flop_rate: f64,
    /// seconds per message
    pub latency: f64,
    /// bytes per second
    pub bandwidth: f64,
}

impl Default for MachineModel {
    fn default() -> Self {
        MachineModel {
            flop_rate: 1e9,
            latency: 1e-6,
            bandwidth: 1e9,
        }
    }
}

impl MachineModel {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.flop_rate, self.latency, self.bandwidth]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "machine parameters must be positive: {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timeline {
    pub ranks: usize,
    pub compute_time: Vec<f64>,
    pub comm_time: Vec<f64>,
    pub total_time: Vec<f64>,
    pub makespan: f64,
    /// Single-rank time of the same problem divided by `makespan`.
    pub speedup: f64,
    pub efficiency: f64,
    /// `makespan / mean(total_time)`.
    pub imbalance: f64,
    pub comm_bytes_total: f64,
}

impl Timeline {
    pub fn compute_max(&self) -> f64 {
        self.compute_time.iter().cloned().fold(0.0, f64::max)
    }

    pub fn comm_max(&self) -> f64 {
        self.comm_time.iter().cloned().fold(0.0, f64::max)
    }
}

pub fn simulate(
    problem: &UnitProblem,
    partition: &Partition,
    machine: &MachineModel,
) -> Result<Timeline> {
    machine.validate()?;
    partition.validate(problem.len())?;
    let ranks = partition.ranks;
    let loads = problem.loads(partition);
    let comm = problem.comm(partition);

    let compute_time: Vec<f64> = loads
        .iter()
        .map(|w| (w + problem.coarse_work) / machine.flop_rate)
        .collect();
    let comm_time: Vec<f64> = (0..ranks)
        .map(|r| {
            (0..ranks)
                .filter(|&q| q != r)
                .map(|q| {
                    let msgs = (comm.message_count[r][q] + comm.message_count[q][r]) as f64;
                    let bytes = comm.bytes(r, q) + comm.bytes(q, r);
                    machine.latency * msgs + bytes / machine.bandwidth
                })
                .fold(0.0, |acc, t| acc + t)
        })
        .collect();
    let total_time: Vec<f64> = compute_time
        .iter()
        .zip(&comm_time)
        .map(|(a, b)| a + b)
        .collect();
    let makespan = total_time.iter().cloned().fold(0.0, f64::max);
    let serial = (problem.total_work() + problem.coarse_work) / machine.flop_rate;
    let (speedup, imbalance) = if makespan > 0.0 {
        let mean = total_time.iter().sum::<f64>() / ranks as f64;
        (serial / makespan, makespan / mean)
    } else {
        (1.0, 1.0)
    };
    Ok(Timeline {
        ranks,
        compute_time,
        comm_time,
        total_time,
        makespan,
        speedup,
        efficiency: speedup / ranks as f64,
        imbalance,
        comm_bytes_total: comm.total_bytes(),
    })
}

/// One row of a scaling study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub ranks: usize,
    pub partition: Partition,
    pub timeline: Timeline,
}

/// Partitions and simulates the problem for each rank count. Speedups are
/// relative to the single-rank time of the same model.
pub fn sweep(
    problem: &UnitProblem,
    partitioner: &dyn Partitioner,
    weights: ObjectiveWeights,
    machine: &MachineModel,
    ranks: &[usize],
) -> Result<Vec<SweepRecord>> {
    if ranks.is_empty() {
        return Err(Error::domain("rank list is empty"));
    }
    if let Some(bad) = ranks.iter().find(|&&p| p < 1) {
        return Err(Error::domain(format!("rank count {bad} must be >= 1")));
    }
    ranks
        .iter()
        .map(|&p| {
            let partition = partitioner.partition(problem, p, weights)?;
            let timeline = simulate(problem, &partition, machine)?;
            Ok(SweepRecord {
                ranks: p,
                partition,
                timeline,
            })
        })
        .collect()
}

pub const SWEEP_CSV_HEADER: &str =
    "P,makespan_s,compute_max_s,comm_max_s,speedup,efficiency,imbalance,comm_bytes_total";

/// Renders sweep records with the header [`SWEEP_CSV_HEADER`].
pub fn sweep_csv(records: &[SweepRecord]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for rec in records {
        let t = &rec.timeline;
        out.push_str(&format!(
            "{},{:e},{:e},{:e},{},{},{},{}\n",
            rec.ranks,
            t.makespan,
            t.compute_max(),
            t.comm_max(),
            t.speedup,
            t.efficiency,
            t.imbalance,
            t.comm_bytes_total
        ));
    }
    out
}
