//! Spatially homogeneous supersolution triple `(φ(t), A e^{−δt}, B e^{−δt})`
//! and the lower barrier for `u`.

use crate::error::{Error, Result};
use crate::theory::constants::StabilityConstants;
use crate::theory::phi;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub eps: f64,
    /// Amplitude of the `w` envelope, `A = K₁B`.
    pub a: f64,
    /// Amplitude of the `z` envelope, `B = max{‖z₀‖, ‖w₀‖/K₁}`.
    pub b: f64,
    pub gamma: f64,
    pub delta: f64,
    pub k1: f64,
    pub k2: f64,
    /// `16γ + 72A + 1`.
    pub c1_env: f64,
    /// `w₀ ≡ 0` or `z₀ ≡ 0`; excluded by the standing assumptions on the data.
    pub degenerate: bool,
    /// Whether `‖w₀‖, ‖z₀‖ < min{ε/ρ, M}` held.
    pub hypotheses_hold: bool,
}

/// `min{ε/ρ, M}`, read as `M` when `ρ = 0`.
pub fn data_cap(eps: f64, rho: f64, m: f64) -> f64 {
    if rho > 0.0 {
        (eps / rho).min(m)
    } else {
        m
    }
}

pub fn build_envelope(
    constants: &StabilityConstants,
    w0_norm: f64,
    z0_norm: f64,
    eps: f64,
    rho: f64,
) -> Result<Envelope> {
    if !(eps > 0.0 && eps < constants.eps_3star) {
        return Err(Error::InvalidParameter(format!(
            "eps must lie in (0, eps_3star = {}), got {eps}",
            constants.eps_3star
        )));
    }
    if !(w0_norm >= 0.0 && z0_norm >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "data norms must be >= 0, got w0 = {w0_norm}, z0 = {z0_norm}"
        )));
    }
    let b = z0_norm.max(w0_norm / constants.k1);
    let a = constants.k1 * b;
    let cap = data_cap(eps, rho, constants.m);
    Ok(Envelope {
        eps,
        a,
        b,
        gamma: constants.gamma,
        delta: constants.delta,
        k1: constants.k1,
        k2: constants.k2,
        c1_env: 16.0 * constants.gamma + 72.0 * a + 1.0,
        degenerate: w0_norm == 0.0 || z0_norm == 0.0,
        hypotheses_hold: w0_norm < cap && z0_norm < cap,
    })
}

impl Envelope {
    pub fn phi(&self, t: f64) -> Result<f64> {
        phi::phi_closed(t, self.gamma, self.a, self.eps)
    }

    pub fn w_bar(&self, t: f64) -> f64 {
        self.a * (-self.delta * t).exp()
    }

    pub fn z_bar(&self, t: f64) -> f64 {
        self.b * (-self.delta * t).exp()
    }

    /// `γ + c₁ε`, the uniform cap on φ.
    pub fn phi_cap(&self) -> f64 {
        self.gamma + self.c1_env * self.eps
    }
}

/// `min a₀ · e^{−2K₂ε/δ}`, the uniform floor for `u`.
pub fn lower_bound_lem21(a0_min: f64, eps: f64, constants: &StabilityConstants) -> f64 {
    a0_min * (-2.0 * constants.k2 * eps / constants.delta).exp()
}

/// The barrier `ψ(t) = min a₀ · e^{−(2K₂ε/δ)(1 − e^{−δt})}` bounding `a` from below.
pub fn lower_barrier(t: f64, a0_min: f64, eps: f64, constants: &StabilityConstants) -> f64 {
    let rate = 2.0 * constants.k2 * eps / constants.delta;
    a0_min * (-rate * (1.0 - (-constants.delta * t).exp())).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn consts() -> StabilityConstants {
        StabilityConstants::compute(2.0, 0.5, 1.0).unwrap()
    }

    #[test]
    fn amplitudes_from_data() {
        let c = consts();
        let e = build_envelope(&c, 0.01, 0.01, 0.5 * c.eps_3star, 0.0).unwrap();
        assert!((e.b - 0.016).abs() < 1e-15);
        assert!((e.a - 0.01).abs() < 1e-15);
        assert!(e.w_bar(0.0) >= 0.01 && e.z_bar(0.0) >= 0.01);
        assert!(!e.degenerate && e.hypotheses_hold);
        assert!((e.phi(0.0).unwrap() - (0.5 + e.eps)).abs() < 1e-15);
    }

    #[test]
    fn degenerate_and_out_of_range() {
        let c = consts();
        let e = build_envelope(&c, 0.0, 0.02, 0.5 * c.eps_3star, 0.0).unwrap();
        assert!(e.degenerate);
        assert!(build_envelope(&c, 0.01, 0.01, c.eps_3star, 0.0).is_err());
        assert!(build_envelope(&c, 0.01, 0.01, 0.0, 0.0).is_err());
        let e = build_envelope(&c, 2.0, 0.01, 0.5 * c.eps_3star, 0.0).unwrap();
        assert!(!e.hypotheses_hold);
        // with infection loss the cap is eps/rho
        let e = build_envelope(&c, 0.01, 0.01, 0.5 * c.eps_3star, 1.0).unwrap();
        assert!(!e.hypotheses_hold);
    }

    #[test]
    fn floor_values() {
        let c = consts();
        assert_eq!(lower_bound_lem21(0.4, 0.0, &c), 0.4);
        let c = StabilityConstants { k2: 1.6, delta: 0.1, ..c };
        let f = lower_bound_lem21(1.0, 0.005, &c);
        assert!((f - 0.852_143_788_966_211_2).abs() < 1e-15);
        for t in [0.0, 0.1, 1.0, 10.0, 1e3] {
            assert!(lower_barrier(t, 1.0, 0.005, &c) >= f);
        }
    }
}
