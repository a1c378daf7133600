//! The quadratically forced Bernoulli envelope
//!
//! ```text
//! φ'(t) = ε e^ε e^{−γt/2} φ² + A ε e^{−γt/2} φ,   φ(0) = γ + ε.
//! ```
//!
//! [`phi_closed`] evaluates the explicit solution for `1/φ` (inner integrals
//! analytic, outer integral by adaptive quadrature); [`phi_ode`] integrates
//! the ODE directly and serves as the independent cross-check.

use crate::error::{Error, Result};
use crate::ode::{self, Tolerance};
use crate::quad;

/// Absolute tolerance of the outer quadrature.
pub const QUAD_TOL: f64 = 1e-12;

/// Time after which `e^{−γt/2} < 1e−18`, i.e. φ has reached its limit to
/// working precision.
pub fn saturation_time(gamma: f64) -> f64 {
    2.0 * 41.5 / gamma
}

/// `∫ₛᵗ e^{−γσ/2} dσ`.
fn decay_integral(gamma: f64, s: f64, t: f64) -> f64 {
    2.0 / gamma * ((-0.5 * gamma * s).exp() - (-0.5 * gamma * t).exp())
}

/// `1/φ(t)` from the explicit solution.
pub fn phi_reciprocal(t: f64, gamma: f64, a: f64, eps: f64) -> Result<f64> {
    if t == 0.0 {
        return Ok(1.0 / (gamma + eps));
    }
    let k = a * eps;
    let head = (-k * decay_integral(gamma, 0.0, t)).exp() / (gamma + eps);
    let outer = quad::integrate(
        |s| (-k * decay_integral(gamma, s, t)).exp() * (-0.5 * gamma * s).exp(),
        0.0,
        t,
        QUAD_TOL,
    )?;
    Ok(head - eps * eps.exp() * outer)
}

/// φ(t) from the explicit solution. Fails when `1/φ ≤ 0`, which signals
/// that φ has blown up before `t`.
pub fn phi_closed(t: f64, gamma: f64, a: f64, eps: f64) -> Result<f64> {
    check_args(t, gamma, a, eps)?;
    if t == 0.0 {
        return Ok(gamma + eps);
    }
    let r = phi_reciprocal(t, gamma, a, eps)?;
    if r <= 0.0 {
        return Err(Error::EnvelopeBreakdown(format!(
            "1/phi = {r:e} <= 0 at t = {t} (gamma = {gamma}, A = {a}, eps = {eps})"
        )));
    }
    Ok(1.0 / r)
}

fn check_args(t: f64, gamma: f64, a: f64, eps: f64) -> Result<()> {
    if !(t >= 0.0 && gamma > 0.0 && a >= 0.0 && eps >= 0.0) || !(t.is_finite() && a.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "phi needs t >= 0, gamma > 0, A >= 0, eps >= 0 (t = {t}, gamma = {gamma}, A = {a}, eps = {eps})"
        )));
    }
    Ok(())
}

/// φ at each of the nondecreasing `times`, by adaptive Runge–Kutta.
pub fn phi_ode(times: &[f64], gamma: f64, a: f64, eps: f64) -> Result<Vec<f64>> {
    if let Some(&t) = times.first() {
        check_args(t, gamma, a, eps)?;
    }
    let growth = eps * eps.exp();
    let ys = ode::solve_at(
        |t, y, dy| {
            let damp = (-0.5 * gamma * t).exp();
            dy[0] = growth * damp * y[0] * y[0] + a * eps * damp * y[0];
        },
        0.0,
        &[gamma + eps],
        times,
        Tolerance { rtol: 1e-13, atol: 1e-15 },
    )?;
    Ok(ys.into_iter().map(|y| y[0]).collect())
}

/// `γ + (16γ + 72A + 1)·ε`.
pub fn phi_bound(gamma: f64, a: f64, eps: f64) -> f64 {
    gamma + (16.0 * gamma + 72.0 * a + 1.0) * eps
}

/// True iff φ stays below [`phi_bound`] at every sample and at the
/// saturation time (φ is nondecreasing, so that covers `t → ∞`).
pub fn phi_bound_check(gamma: f64, a: f64, eps: f64, t_samples: &[f64]) -> bool {
    let bound = phi_bound(gamma, a, eps);
    t_samples
        .iter()
        .copied()
        .chain(std::iter::once(saturation_time(gamma)))
        .all(|t| matches!(phi_closed(t, gamma, a, eps), Ok(p) if p <= bound))
}

/// `n` log-spaced sample times in `[t_min, t_max]`, preceded by 0.
pub fn log_samples(t_min: f64, t_max: f64, n: usize) -> Vec<f64> {
    let mut out = vec![0.0];
    let (l0, l1) = (t_min.ln(), t_max.ln());
    for i in 0..n {
        let f = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
        out.push((l0 + f * (l1 - l0)).exp());
    }
    out
}
