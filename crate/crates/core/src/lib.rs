//! Two-dimensional fast multipole engine for the logarithmic kernel, with an
//! analytic cost model, space-filling-curve load balancing and a
//! bulk-synchronous timeline simulator.
//!
//! The pieces, bottom up:
//!
//! * [`quadtree`]: Morton-keyed uniform quadtree, neighbour and interaction lists
//! * [`expansions`]: multipole/local series and their translations
//! * [`evaluator`]: the FMM passes and the direct-summation oracle
//! * [`costmodel`]: per-cell work, communication and memory estimates
//! * [`partition`]: SFC cut, local-search refinement, exhaustive oracle
//! * [`parsim`]: predicted per-rank timelines and scaling sweeps
//! * [`vortex`]: point-vortex velocities and Euler convection
//! * [`registry`]: name-keyed solvers, partitioners and distributions

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod costmodel;
pub mod error;
pub mod evaluator;
pub mod expansions;
pub mod generate;
pub mod io;
pub mod parsim;
pub mod partition;
pub mod quadtree;
pub mod registry;
pub mod vortex;

pub use error::{Error, Result};
pub use expansions::{Charge, Mode, Order};
pub use num_complex::Complex64;
pub use quadtree::{Depth, MortonKey, Quadtree};
