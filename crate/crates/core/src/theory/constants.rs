//! The constant chain `(K₁, δ) → K₂ → c₂ → ε*, ε**, ε***`.

use crate::error::{Error, Result};

/// Points in the guard scan that precedes bisection in [`largest_admissible`].
const SCAN_POINTS: usize = 20_000;
/// Relative width at which threshold bisection stops.
const BISECT_RTOL: f64 = 1e-12;

/// Checks `β > 0` and `0 < γ < 1/(β − 1)₊`.
pub fn check_hypothesis(beta: f64, gamma: f64) -> Result<()> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Hypothesis(format!("beta > 0 fails (beta = {beta})")));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Hypothesis(format!("gamma > 0 fails (gamma = {gamma})")));
    }
    if beta > 1.0 && gamma * (beta - 1.0) >= 1.0 {
        return Err(Error::Hypothesis(format!(
            "gamma < 1/(beta-1) fails: gamma = {gamma}, 1/(beta-1) = {}",
            1.0 / (beta - 1.0)
        )));
    }
    Ok(())
}

/// `K₁ = ½(γ + (γ+1)/β)` and `δ = ½·min{1 − γ/K₁, γ + 1 − βK₁, 1}`.
///
/// Taking half of the admissible supremum makes both
/// `γ/(1−δ) < K₁ < (γ+1−δ)/β` strict.
pub fn k1_delta(beta: f64, gamma: f64) -> Result<(f64, f64)> {
    check_hypothesis(beta, gamma)?;
    let k1 = 0.5 * (gamma + (gamma + 1.0) / beta);
    let delta = 0.5 * (1.0 - gamma / k1).min(gamma + 1.0 - beta * k1).min(1.0);
    Ok((k1, delta))
}

/// Margins `(K₁ − γ/(1−δ), (γ+1−δ)/β − K₁)`; both positive when the
/// constants are admissible.
pub fn k1_margins(beta: f64, gamma: f64, k1: f64, delta: f64) -> (f64, f64) {
    (k1 - gamma / (1.0 - delta), (gamma + 1.0 - delta) / beta - k1)
}

pub fn k2(k1: f64) -> f64 {
    1.0f64.max(1.0 / k1)
}

/// `c₂ = (2K₂/δ)·γ + γ + 2`, the coefficient of the lower bound for `u`.
pub fn c2(gamma: f64, k2: f64, delta: f64) -> f64 {
    2.0 * k2 / delta * gamma + gamma + 2.0
}

/// Largest `x ∈ (0, hi]` with `pred` true on all of `(0, x]`, as far as a
/// uniform scan followed by bisection can tell. Returns `None` when
/// `pred` fails arbitrarily close to zero.
pub fn largest_admissible(pred: impl Fn(f64) -> bool, hi: f64) -> Option<f64> {
    let mut hi = hi;
    // the first scan point can already fail; shrink toward zero until it passes
    for _ in 0..60 {
        let h = hi / SCAN_POINTS as f64;
        if !pred(h) {
            hi = h;
            continue;
        }
        let mut lo = h;
        let mut fail = None;
        for k in 2..=SCAN_POINTS {
            let x = if k == SCAN_POINTS { hi } else { h * k as f64 };
            if pred(x) {
                lo = x;
            } else {
                fail = Some(x);
                break;
            }
        }
        let Some(mut bad) = fail else { return Some(hi) };
        while bad - lo > BISECT_RTOL * lo {
            let mid = 0.5 * (lo + bad);
            if pred(mid) {
                lo = mid;
            } else {
                bad = mid;
            }
        }
        return Some(lo);
    }
    None
}

/// The two smallness conditions behind `ε*`, with `c₁ = 2K₂/δ + 1`:
/// `(γ−ε)e^{−c₁ε} ≥ γ − (c₁γ+2)ε` and `(γ−ε)e^{−c₁ε} ≥ γ/2`.
pub fn eps_star_conditions(gamma: f64, k2: f64, delta: f64, eps: f64) -> (bool, bool) {
    let c1 = 2.0 * k2 / delta + 1.0;
    let lhs = (gamma - eps) * (-c1 * eps).exp();
    (lhs >= gamma - (c1 * gamma + 2.0) * eps, lhs >= 0.5 * gamma)
}

/// Threshold for the lower bound on `u` and the decay bound on `v`.
pub fn eps_star(beta: f64, gamma: f64) -> Result<f64> {
    let (k1, delta) = k1_delta(beta, gamma)?;
    let k2 = k2(k1);
    largest_admissible(
        |e| {
            let (a, b) = eps_star_conditions(gamma, k2, delta, e);
            a && b
        },
        gamma,
    )
    .ok_or_else(|| Error::Infeasible(format!("no eps_star for beta = {beta}, gamma = {gamma}")))
}

/// `ε** = min{ln 2, γ/c₁, γ ln 2/(2A)}` with `c₁ = 16γ + 72A + 1`; the last
/// branch is absent when `A = 0`.
pub fn eps_2star(gamma: f64, a: f64) -> f64 {
    let c1 = 16.0 * gamma + 72.0 * a + 1.0;
    let ln2 = std::f64::consts::LN_2;
    let mut e = ln2.min(gamma / c1);
    if a > 0.0 {
        e = e.min(gamma * ln2 / (2.0 * a));
    }
    e
}

/// Left and right sides of the `ε₁` condition for the supersolution,
/// `(γ + c₁ε)e^ε/(1−δ) ≤ K₁ ≤ (γ + 1 − c₂ε − δ)/β` with `c₁ = 16γ + 72K₁K₂M + 1`.
pub fn supersolution_condition(beta: f64, gamma: f64, m: f64, eps: f64) -> Result<(f64, f64, f64)> {
    let (k1, delta) = k1_delta(beta, gamma)?;
    let k2 = k2(k1);
    let c1 = 16.0 * gamma + 72.0 * k1 * k2 * m + 1.0;
    let c2 = c2(gamma, k2, delta);
    let left = (gamma + c1 * eps) * eps.exp() / (1.0 - delta);
    let right = (gamma + 1.0 - c2 * eps - delta) / beta;
    Ok((left, k1, right))
}

/// Largest `ε₁ ∈ (0, 1]` satisfying [`supersolution_condition`].
pub fn eps1_supersolution(beta: f64, gamma: f64, m: f64) -> Result<f64> {
    check_m(m)?;
    let pred = |e: f64| {
        let (l, k1, r) = supersolution_condition(beta, gamma, m, e).expect("checked hypothesis");
        l <= k1 && k1 <= r
    };
    k1_delta(beta, gamma)?;
    if !pred(1e-300) {
        return Err(Error::Infeasible(format!(
            "supersolution condition fails at eps -> 0 for beta = {beta}, gamma = {gamma}, M = {m}"
        )));
    }
    if pred(1.0) {
        return Ok(1.0);
    }
    // both sides are monotone in eps, so plain bisection suffices
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > BISECT_RTOL * lo.max(f64::MIN_POSITIVE) {
        let mid = 0.5 * (lo + hi);
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

fn check_m(m: f64) -> Result<()> {
    if m > 0.0 && m.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("M must be positive, got {m}")))
    }
}

/// `ε*** = min{ε₁, ε*, ε**(γ, K₁K₂M)}`.
pub fn eps_3star(beta: f64, gamma: f64, m: f64) -> Result<f64> {
    Ok(StabilityConstants::compute(beta, gamma, m)?.eps_3star)
}

/// The full constant chain for `(β, γ, M)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityConstants {
    pub beta: f64,
    pub gamma: f64,
    pub m: f64,
    pub k1: f64,
    pub delta: f64,
    pub k2: f64,
    pub c2: f64,
    pub eps_star: f64,
    /// `ε**` at `A = K₁K₂M`.
    pub eps_2star: f64,
    /// `ε₁` of the supersolution condition.
    pub eps1: f64,
    pub eps_3star: f64,
}

impl StabilityConstants {
    pub fn compute(beta: f64, gamma: f64, m: f64) -> Result<Self> {
        check_m(m)?;
        let (k1, delta) = k1_delta(beta, gamma)?;
        let k2 = k2(k1);
        let eps_star = eps_star(beta, gamma)?;
        let eps_2star = eps_2star(gamma, k1 * k2 * m);
        let eps1 = eps1_supersolution(beta, gamma, m)?;
        Ok(Self {
            beta,
            gamma,
            m,
            k1,
            delta,
            k2,
            c2: c2(gamma, k2, delta),
            eps_star,
            eps_2star,
            eps1,
            eps_3star: eps1.min(eps_star).min(eps_2star),
        })
    }

    /// `(name, value)` pairs in output order.
    pub fn entries(&self) -> [(&'static str, f64); 7] {
        [
            ("K1", self.k1),
            ("delta", self.delta),
            ("K2", self.k2),
            ("c2", self.c2),
            ("eps_star", self.eps_star),
            ("eps_2star", self.eps_2star),
            ("eps_3star", self.eps_3star),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn k1_delta_reference_values() {
        let (k1, d) = k1_delta(2.0, 0.5).unwrap();
        assert_eq!(k1, 0.625);
        assert!((d - 0.1).abs() < 1e-15);
        assert_eq!(k2(k1), 1.6);
        let (k1, d) = k1_delta(0.5, 1.0).unwrap();
        assert!((k1 - 2.5).abs() < 1e-15);
        assert!((d - 0.3).abs() < 1e-15);
    }

    #[test]
    fn hypothesis_boundary_rejected() {
        assert!(matches!(k1_delta(2.0, 1.0), Err(Error::Hypothesis(_))));
        assert!(k1_delta(2.0, 0.0).is_err());
        assert!(k1_delta(0.0, 0.5).is_err());
        // for beta <= 1 any positive gamma is admissible
        assert!(k1_delta(1.0, 100.0).is_ok());
    }

    #[test]
    fn eps_2star_reference() {
        let e = eps_2star(0.5, 1.0);
        assert!((e - 0.5 / 81.0).abs() <= 1e-15 * e);
        assert!(eps_2star(0.5, 2.0) < eps_2star(0.5, 1.0));
        // γ/c₁ < 1/16 < ln 2 and γ/c₁ ≤ γ/(72A) < γ ln 2/(2A), so the middle
        // branch is always the smallest and is returned exactly
        for (g, a) in [(std::f64::consts::LN_2, 1e-9), (1e6, 0.0), (0.25, 5.0), (3.0, 0.1)] {
            assert_eq!(eps_2star(g, a), g / (16.0 * g + 72.0 * a + 1.0));
        }
    }

    #[test]
    fn eps_star_limits_and_membership() {
        let (k1, d) = k1_delta(2.0, 0.5).unwrap();
        assert_eq!(eps_star_conditions(0.5, k2(k1), d, 1e-12), (true, true));
        let e = eps_star(2.0, 0.5).unwrap();
        for x in [e * (1.0 - 1e-9), e / 2.0] {
            assert_eq!(eps_star_conditions(0.5, k2(k1), d, x), (true, true));
        }
        assert!(e < 0.5);
    }

    #[test]
    fn eps_3star_limit_and_ordering() {
        let (l, k1, r) = supersolution_condition(2.0, 0.5, 1.0, 1e-12).unwrap();
        assert!(l <= k1 && k1 <= r);
        let c = StabilityConstants::compute(2.0, 0.5, 1.0).unwrap();
        assert!(c.eps_3star <= c.eps_star);
        assert!(c.eps_3star <= eps_2star(0.5, c.k1 * c.k2 * 1.0));
        assert!(c.eps_3star > 0.0);
    }

    #[test]
    fn largest_admissible_finds_threshold() {
        let x = largest_admissible(|e| e <= 0.3, 1.0).unwrap();
        assert!((x - 0.3).abs() < 1e-11);
        assert_eq!(largest_admissible(|_| true, 2.0), Some(2.0));
        // threshold below the first scan point
        let x = largest_admissible(|e| e <= 1e-7, 1.0).unwrap();
        assert!((x - 1e-7).abs() < 1e-18);
        assert_eq!(largest_admissible(|_| false, 1.0), None);
    }

    fn admissible() -> impl Strategy<Value = (f64, f64)> {
        (0.05f64..5.0, 0.01f64..0.99).prop_map(|(beta, frac)| {
            let cap = if beta > 1.0 { 1.0 / (beta - 1.0) } else { 10.0 };
            (beta, frac * cap)
        })
    }

    proptest! {
        #[test]
        fn k1_strictness((beta, gamma) in admissible()) {
            let (k1, d) = k1_delta(beta, gamma).unwrap();
            let (lo, hi) = k1_margins(beta, gamma, k1, d);
            prop_assert!(lo >= 1e-12, "lower margin {lo}");
            prop_assert!(hi >= 1e-12, "upper margin {hi}");
            prop_assert!(d > 0.0 && d < 1.0);
        }

        #[test]
        fn threshold_ordering((beta, gamma) in admissible(), m in 0.01f64..10.0) {
            let c = StabilityConstants::compute(beta, gamma, m).unwrap();
            prop_assert!(c.eps_3star <= c.eps_star);
            prop_assert!(c.eps_3star <= eps_2star(gamma, c.k1 * c.k2 * m));
            prop_assert!(c.eps_3star > 0.0);
        }
    }
}
