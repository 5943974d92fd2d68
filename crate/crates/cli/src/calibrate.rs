//! Wall-clock fit of the cost constants: each operator class is timed over a
//! whole tree and divided by its unit-constant operation count.

use std::hint::black_box;
use std::time::Instant;

use fmm2d::costmodel::{estimate_work, CostParams};
use fmm2d::expansions::{evaluate_local, p2p_direct, Expansion, ExpansionKind, Operators};
use fmm2d::{Charge, Mode, Order, Quadtree, Result};
use serde::Serialize;

/// Unit-constant operation counts or measured seconds, per operator class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PerClass {
    pub p2m: f64,
    pub m2m: f64,
    pub m2l: f64,
    pub l2l: f64,
    pub l2p: f64,
    pub p2p: f64,
}

pub fn unit_counts(tree: &Quadtree, p: Order) -> PerClass {
    let w = estimate_work(tree, p, &CostParams::default());
    let mut c = PerClass::default();
    for level in 0..=tree.depth() {
        for cell in w.level(level) {
            c.p2m += cell.w_p2m;
            c.m2m += cell.w_m2m;
            c.m2l += cell.w_m2l;
            c.l2l += cell.w_l2l;
            c.l2p += cell.w_l2p;
            c.p2p += cell.w_p2p;
        }
    }
    c
}

/// `c = seconds * flop_rate / count`; classes with no work keep 1.0.
pub fn fit(seconds: &PerClass, counts: &PerClass, flop_rate: f64) -> CostParams {
    let one = |t: f64, n: f64| {
        if n > 0.0 && t > 0.0 {
            t * flop_rate / n
        } else {
            1.0
        }
    };
    CostParams {
        c_p2m: one(seconds.p2m, counts.p2m),
        c_m2m: one(seconds.m2m, counts.m2m),
        c_m2l: one(seconds.m2l, counts.m2l),
        c_l2l: one(seconds.l2l, counts.l2l),
        c_l2p: one(seconds.l2p, counts.l2p),
        c_p2p: one(seconds.p2p, counts.p2p),
    }
}

/// Runs every operator the cost model counts once, timing each class.
pub fn measure(tree: &Quadtree, p: Order) -> Result<PerClass> {
    let ops = Operators::new(p);
    let depth = tree.depth();
    let mut t = PerClass::default();
    let n_levels = usize::from(depth) + 1;
    let mut multipoles: Vec<Vec<Option<Expansion>>> = vec![Vec::new(); n_levels];

    let clock = Instant::now();
    multipoles[n_levels - 1] = tree
        .leaves()
        .iter()
        .map(|c| {
            (!c.is_empty()).then(|| ops.p2m(tree.cell_particles(c.key), tree.cell_center(c.key)))
        })
        .collect();
    t.p2m = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    for level in (0..depth).rev() {
        let below = &multipoles[usize::from(level) + 1];
        let mut here = Vec::with_capacity(tree.level(level).len());
        for cell in tree.level(level) {
            if cell.is_empty() {
                here.push(None);
                continue;
            }
            let center = tree.cell_center(cell.key);
            let mut acc = Expansion::zero(ExpansionKind::Multipole, center, p);
            for child in cell.key.children() {
                if let Some(m) = &below[child.index as usize] {
                    acc.accumulate(&ops.m2m(m, center)?);
                }
            }
            here.push(Some(acc));
        }
        multipoles[usize::from(level)] = here;
    }
    t.m2m = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let mut locals: Vec<Vec<Option<Expansion>>> = vec![Vec::new(); n_levels];
    for level in 0..=depth {
        let sources = &multipoles[usize::from(level)];
        locals[usize::from(level)] = tree
            .level(level)
            .iter()
            .map(|cell| {
                if cell.is_empty() {
                    return Ok(None);
                }
                let center = tree.cell_center(cell.key);
                let mut acc = Expansion::zero(ExpansionKind::Local, center, p);
                for far in cell.key.interaction_list() {
                    if let Some(m) = &sources[far.index as usize] {
                        acc.accumulate(&ops.m2l(m, center)?);
                    }
                }
                Ok(Some(acc))
            })
            .collect::<Result<_>>()?;
    }
    t.m2l = clock.elapsed().as_secs_f64();

    // the model charges L2L to the parent, once per non-empty child
    let clock = Instant::now();
    for level in 0..depth {
        for cell in tree.level(level) {
            let Some(local) = &locals[usize::from(level)][cell.key.index as usize] else {
                continue;
            };
            for child in cell.key.children() {
                if tree.count(child) > 0 {
                    black_box(ops.l2l(local, tree.cell_center(child))?);
                }
            }
        }
    }
    t.l2l = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    for cell in tree.leaves() {
        if let Some(local) = &locals[n_levels - 1][cell.key.index as usize] {
            for c in tree.cell_particles(cell.key) {
                black_box(evaluate_local(local, c.z, Mode::Potential)?);
            }
        }
    }
    t.l2p = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    for cell in tree.leaves().iter().filter(|c| !c.is_empty()) {
        let targets = tree.cell_particles(cell.key);
        let mut sources: Vec<Charge> = targets.to_vec();
        for n in cell.key.neighbors() {
            sources.extend_from_slice(tree.cell_particles(n));
        }
        black_box(p2p_direct(targets, &sources, Mode::Potential));
    }
    t.p2p = clock.elapsed().as_secs_f64();
    Ok(t)
}

#[derive(Debug, Serialize)]
pub struct CalibrationReport {
    pub n: usize,
    pub depth: u8,
    pub p: usize,
    pub flop_rate: f64,
    pub seconds: PerClass,
    pub counts: PerClass,
    pub params: CostParams,
}
