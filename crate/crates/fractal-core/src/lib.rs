//! Simulation and measurement library for random fractal curves and sets.
//!
//! The crate is organized around four samplers and one measurement toolkit:
//!
//! * [`brownian`] — Brownian paths on dyadic grids, bridge loops, and the
//!   dyadic increment/excursion event scan used to certify unbounded turning.
//! * [`loewner`] — chordal/radial Loewner engines: driver generation
//!   (Brownian and SLE_kappa(rho)), trace extraction by inverse slit-map
//!   composition, and the forward hull map.
//! * [`percolation`] — fractal (Mandelbrot) percolation trees with
//!   survival/dimension/disconnection diagnostics.
//! * [`loopsoup`] — truncated Brownian loop soups, loop clusters, outermost
//!   cluster boundaries, and carpet diagnostics.
//! * [`geom`] — metric measurements on sampled curves and point sets:
//!   turning constants, quasisymmetric triple distortion, box-counting
//!   dimension fits, doubling counts.
//!
//! Everything is deterministic given a master seed: replicate streams are
//! derived by keyed hashing (see [`rng`]), so results do not depend on thread
//! count or traversal order.

pub mod brownian;
pub mod error;
pub mod geom;
pub mod io;
pub mod loewner;
pub mod loopsoup;
pub mod percolation;
pub mod rng;
pub mod stats;

pub use error::{CoreError, Result};
