//! Constructive constants, the Bernoulli envelope φ, supersolution
//! envelopes and trajectory bound checks for stability near `(γ, 0, 0, 0)`.

pub mod constants;
pub mod envelope;
pub mod phi;
pub mod verify;

pub use constants::{eps_2star, eps_3star, eps_star, k1_delta, StabilityConstants};
pub use envelope::{build_envelope, lower_bound_lem21, Envelope};
pub use phi::{phi_bound, phi_bound_check, phi_closed, phi_ode};
pub use verify::{verify_bounds, BoundId, BoundReport};
