//! Point-vortex velocities through the field solvers, and a forward Euler
//! convection step.
//!
//! With strengths `q_j = gamma_j / (2 pi i)` the field mode returns the
//! complex velocity `w = u - i v` induced by all other vortices.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expansions::{Charge, Mode};
use crate::registry::Solver;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vortex {
    pub x: f64,
    pub y: f64,
    /// Circulation.
    pub gamma: f64,
}

impl Vortex {
    pub fn new(x: f64, y: f64, gamma: f64) -> Self {
        Vortex { x, y, gamma }
    }

    pub fn as_charge(&self) -> Charge {
        Charge::new(
            Complex64::new(self.x, self.y),
            Complex64::new(self.gamma, 0.0) / Complex64::new(0.0, 2.0 * PI),
        )
    }
}

/// Velocity `(u, v)` at every vortex.
pub fn velocities(vortices: &[Vortex], backend: &dyn Solver) -> Result<Vec<[f64; 2]>> {
    if vortices.is_empty() {
        return Err(Error::domain("need at least one vortex"));
    }
    if let Some(v) = vortices
        .iter()
        .find(|v| !(v.x.is_finite() && v.y.is_finite() && v.gamma.is_finite()))
    {
        return Err(Error::domain(format!("non-finite vortex {v:?}")));
    }
    let charges: Vec<Charge> = vortices.iter().map(Vortex::as_charge).collect();
    let w = backend.solve(&charges, Mode::Field)?;
    Ok(w.iter().map(|w| [w.re, -w.im]).collect())
}

/// Moves every vortex by `dt * velocity`; circulations are untouched.
pub fn advance(vortices: &[Vortex], velocity: &[[f64; 2]], dt: f64) -> Vec<Vortex> {
    vortices
        .iter()
        .zip(velocity)
        .map(|(v, [u, w])| Vortex {
            x: v.x + dt * u,
            y: v.y + dt * w,
            gamma: v.gamma,
        })
        .collect()
}

/// One forward Euler step.
pub fn step(vortices: &[Vortex], dt: f64, backend: &dyn Solver) -> Result<Vec<Vortex>> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::domain(format!(
            "time step must be positive, got {dt}"
        )));
    }
    let vel = velocities(vortices, backend)?;
    Ok(advance(vortices, &vel, dt))
}

/// Conserved quantities of a vortex set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Invariants {
    pub total_circulation: f64,
    pub impulse_x: f64,
    pub impulse_y: f64,
}

pub fn invariants(vortices: &[Vortex]) -> Invariants {
    vortices.iter().fold(
        Invariants {
            total_circulation: 0.0,
            impulse_x: 0.0,
            impulse_y: 0.0,
        },
        |acc, v| Invariants {
            total_circulation: acc.total_circulation + v.gamma,
            impulse_x: acc.impulse_x + v.gamma * v.x,
            impulse_y: acc.impulse_y + v.gamma * v.y,
        },
    )
}
