//! Ribosome flow model (RFM) under jointly periodic transition rates.
//!
//! The crate integrates the n-site RFM, solves for the constant-rate
//! equilibrium, locates the attracting periodic orbit by iterating the
//! period map, and compares the period-averaged production rate on the orbit
//! with the steady production rate obtained from the averaged rates. The
//! `analysis` module ties this together into a gain-of-entrainment verdict
//! and checks the structural conditions under which constant rates are known
//! to be optimal.
//!
//! ```
//! use rfm_goe::equilibrium::solve_equilibrium;
//!
//! let eq = solve_equilibrium(&[3.0, 1.0, 4.0, 2.0]).unwrap();
//! assert!((eq.e[2] - 0.3085).abs() < 5e-4);
//! assert!((eq.r_c - 0.6171).abs() < 5e-4);
//! ```

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod equilibrium;
pub mod error;
pub mod export;
pub mod integrator;
pub mod model;
pub mod orbit;
pub mod reference;
pub mod scenario;
pub mod schedules;

pub use error::{Error, Result};
