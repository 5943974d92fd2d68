//! FMM driver and the direct-summation oracle.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expansions::{
    evaluate_local, p2p_accumulate, p2p_direct, Charge, Expansion, ExpansionKind, Mode, Operators,
    Order,
};
use crate::quadtree::{Cell, MortonKey, Quadtree};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Evaluation settings for [`fmm_solve_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FmmOptions {
    pub order: Order,
    pub mode: Mode,
    /// Process cells sequentially in Morton order. When off, cells of one
    /// level are processed on the rayon pool.
    pub reproducible: bool,
}

impl FmmOptions {
    pub fn new(order: Order, mode: Mode) -> Self {
        FmmOptions {
            order,
            mode,
            reproducible: true,
        }
    }
}

/// Per-level expansion storage; `None` marks empty cells.
type LevelExpansions = Vec<Option<Expansion>>;

fn map_cells<F>(cells: &[Cell], reproducible: bool, f: F) -> Result<LevelExpansions>
where
    F: Fn(&Cell) -> Result<Option<Expansion>> + Sync + Send,
{
    if reproducible {
        cells.iter().map(f).collect()
    } else {
        cells.par_iter().map(f).collect()
    }
}

/// Runs the FMM over `tree` with the default reproducible schedule.
/// Results are returned in the particles' input order.
pub fn fmm_solve(tree: &Quadtree, order: Order, mode: Mode) -> Result<Vec<Complex64>> {
    fmm_solve_with(tree, FmmOptions::new(order, mode))
}

pub fn fmm_solve_with(tree: &Quadtree, opts: FmmOptions) -> Result<Vec<Complex64>> {
    let ops = Operators::new(opts.order);
    let depth = tree.depth();
    let n_levels = usize::from(depth) + 1;

    let mut multipoles: Vec<LevelExpansions> = vec![Vec::new(); n_levels];
    let mut locals: Vec<LevelExpansions> = vec![Vec::new(); n_levels];

    if depth >= 2 {
        // upward pass
        multipoles[n_levels - 1] = map_cells(tree.leaves(), opts.reproducible, |cell| {
            Ok((!cell.is_empty())
                .then(|| ops.p2m(tree.cell_particles(cell.key), tree.cell_center(cell.key))))
        })?;
        for level in (2..depth).rev() {
            let below = &multipoles[usize::from(level) + 1];
            let here = map_cells(tree.level(level), opts.reproducible, |cell| {
                if cell.is_empty() {
                    return Ok(None);
                }
                let center = tree.cell_center(cell.key);
                let mut acc = Expansion::zero(ExpansionKind::Multipole, center, opts.order);
                for child in cell.key.children() {
                    if let Some(m) = &below[child.index as usize] {
                        acc.accumulate(&ops.m2m(m, center)?);
                    }
                }
                Ok(Some(acc))
            })?;
            multipoles[usize::from(level)] = here;
        }

        // translation pass
        for level in 2..=depth {
            let sources = &multipoles[usize::from(level)];
            locals[usize::from(level)] = map_cells(tree.level(level), opts.reproducible, |cell| {
                if cell.is_empty() {
                    return Ok(None);
                }
                let center = tree.cell_center(cell.key);
                let mut acc = Expansion::zero(ExpansionKind::Local, center, opts.order);
                for far in cell.key.interaction_list() {
                    if let Some(m) = &sources[far.index as usize] {
                        if !m.is_zero() {
                            acc.accumulate(&ops.m2l(m, center)?);
                        }
                    }
                }
                Ok(Some(acc))
            })?;
        }

        // downward pass
        for level in 3..=depth {
            let (upper, lower) = locals.split_at_mut(usize::from(level));
            let parents = &upper[usize::from(level) - 1];
            let shifted = map_cells(tree.level(level), opts.reproducible, |cell| {
                if cell.is_empty() {
                    return Ok(None);
                }
                let parent = cell.key.parent()?;
                match &parents[parent.index as usize] {
                    Some(l) => Ok(Some(ops.l2l(l, tree.cell_center(cell.key))?)),
                    None => Ok(None),
                }
            })?;
            for (slot, add) in lower[0].iter_mut().zip(shifted) {
                if let (Some(slot), Some(add)) = (slot.as_mut(), add) {
                    slot.accumulate(&add);
                }
            }
        }
    }

    // near field plus local evaluation, per leaf
    let leaf_locals = &locals[n_levels - 1];
    let near = |cell: &Cell| -> Result<Vec<Complex64>> {
        let targets = tree.cell_particles(cell.key);
        let mut out = vec![ZERO; targets.len()];
        if targets.is_empty() {
            return Ok(out);
        }
        if let Some(Some(local)) = leaf_locals.get(cell.key.index as usize) {
            for (slot, t) in out.iter_mut().zip(targets) {
                *slot += evaluate_local(local, t.z, opts.mode)?;
            }
        }
        let mut near_keys: Vec<MortonKey> = cell.key.neighbors();
        near_keys.push(cell.key);
        near_keys.sort_unstable();
        for key in near_keys {
            p2p_accumulate(targets, tree.cell_particles(key), opts.mode, &mut out);
        }
        Ok(out)
    };
    let per_leaf: Vec<Vec<Complex64>> = if opts.reproducible {
        tree.leaves().iter().map(near).collect::<Result<_>>()?
    } else {
        tree.leaves().par_iter().map(near).collect::<Result<_>>()?
    };

    let mut result = vec![ZERO; tree.len()];
    for (&input_idx, value) in tree.order().iter().zip(per_leaf.into_iter().flatten()) {
        result[input_idx] = value;
    }
    Ok(result)
}

/// O(N^2) double loop over all pairs, self pairs skipped.
pub fn direct_solve(particles: &[Charge], mode: Mode) -> Vec<Complex64> {
    // each target's sum runs in a fixed order, so parallel over targets is
    // bit-identical to the sequential loop
    particles
        .par_iter()
        .map(|t| p2p_direct(std::slice::from_ref(t), particles, mode)[0])
        .collect()
}

/// Error of an approximate result against a reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub max_abs: f64,
    /// `max_abs / max |reference|`.
    pub max_rel: f64,
    /// RMS of the pointwise error, normalized by `max |reference|`.
    pub rms_rel: f64,
}

pub fn error_report(approx: &[Complex64], reference: &[Complex64]) -> Result<ErrorReport> {
    if approx.len() != reference.len() {
        return Err(Error::domain(format!(
            "result lengths differ: {} vs {}",
            approx.len(),
            reference.len()
        )));
    }
    let mut max_abs = 0.0f64;
    let mut sum_sq = 0.0f64;
    let mut scale = 0.0f64;
    for (a, r) in approx.iter().zip(reference) {
        let d = (a - r).norm();
        max_abs = max_abs.max(d);
        sum_sq += d * d;
        scale = scale.max(r.norm());
    }
    let rms = if approx.is_empty() {
        0.0
    } else {
        (sum_sq / approx.len() as f64).sqrt()
    };
    let rel = |x: f64| {
        if x == 0.0 {
            0.0
        } else {
            x / scale
        }
    };
    Ok(ErrorReport {
        max_abs,
        max_rel: rel(max_abs),
        rms_rel: rel(rms),
    })
}

/// Compares the branch-independent part of two results: the real part for
/// potentials, the full complex value for fields.
pub fn compare(approx: &[Complex64], reference: &[Complex64], mode: Mode) -> Result<ErrorReport> {
    match mode {
        Mode::Field => error_report(approx, reference),
        Mode::Potential => {
            let re = |v: &[Complex64]| -> Vec<Complex64> {
                v.iter().map(|z| Complex64::new(z.re, 0.0)).collect()
            };
            error_report(&re(approx), &re(reference))
        }
    }
}
