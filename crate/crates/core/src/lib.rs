//! Simulation and bound-verification toolkit for the four-component
//! haptotaxis model of oncolytic virotherapy
//!
//! ```text
//! u_t = Δu − ∇·(u∇v) − ρuz
//! v_t = −(u + w)v
//! w_t = d_w Δw − w + uz
//! z_t = d_z Δz − z − uz + βw
//! ```
//!
//! with no-flux boundary conditions on a rectangle or interval.
//!
//! The crate is split into:
//! - [`grid`]: cell-centered finite-volume operators and field I/O,
//! - [`dynamics`]: the IMEX time stepper and run diagnostics,
//! - [`theory`]: the stability-constant chain, the Bernoulli envelope φ,
//!   supersolution envelopes and trajectory bound checks,
//! - [`experiments`]: stabilization, decay-rate, growth-probe and refinement studies,
//! - [`config`] and [`cli`]: the file formats and command-line surface.

pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod linsolve;
pub mod numfmt;
pub mod ode;
pub mod quad;
pub mod theory;

pub use error::{Error, Result};
