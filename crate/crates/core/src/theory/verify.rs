//! Checks a recorded trajectory against the proved pointwise bounds.
//!
//! Each bound is evaluated at every recorded time with an additive
//! discretization allowance `tol_disc`. A bound counts as violated when
//! `margin + tol_disc < 0` (upper bounds: `margin = bound − observed`;
//! lower bounds: `margin = observed − bound`).

use std::io::Write;

use crate::dynamics::DiagRow;
use crate::error::Result;
use crate::numfmt::g17;
use crate::theory::constants::StabilityConstants;
use crate::theory::envelope::{data_cap, lower_bound_lem21, Envelope};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundId {
    /// `u ≥ γ − c₂ε`
    ULower,
    /// `v ≤ ε e^{−γt/2}`
    VUpper,
    /// `w ≤ K₁K₂·min{ε/ρ, M}·e^{−δt}`
    WUpper,
    /// `z ≤ K₂·min{ε/ρ, M}·e^{−δt}`
    ZUpper,
    /// `ρ‖z‖ < 2K₂ε e^{−δt}`
    SCondition,
    /// `a = u e^{−v} ≤ φ(t)`
    APhi,
    /// `w ≤ A e^{−δt}`
    WEnvelope,
    /// `z ≤ B e^{−δt}`
    ZEnvelope,
    /// `u ≥ min a₀ · e^{−2K₂ε/δ}`
    UFloor,
}

impl BoundId {
    pub const ALL: [BoundId; 9] = [
        BoundId::ULower,
        BoundId::VUpper,
        BoundId::WUpper,
        BoundId::ZUpper,
        BoundId::SCondition,
        BoundId::APhi,
        BoundId::WEnvelope,
        BoundId::ZEnvelope,
        BoundId::UFloor,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            BoundId::ULower => "u_lower",
            BoundId::VUpper => "v_upper",
            BoundId::WUpper => "w_upper",
            BoundId::ZUpper => "z_upper",
            BoundId::SCondition => "s_condition",
            BoundId::APhi => "a_phi",
            BoundId::WEnvelope => "w_envelope",
            BoundId::ZEnvelope => "z_envelope",
            BoundId::UFloor => "u_floor",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundEntry {
    pub t: f64,
    pub id: BoundId,
    pub observed: f64,
    pub bound: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub id: BoundId,
    pub t: f64,
    /// How far past the slackened bound the observation lies (> 0).
    pub deficit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    /// Last recorded time up to which every bound held; `None` if the
    /// first row already violates.
    pub horizon_verified: Option<f64>,
    pub t_end: f64,
    pub tol_disc: f64,
    pub entries: Vec<BoundEntry>,
    pub violations: Vec<Violation>,
}

impl BoundReport {
    pub fn first_violation(&self) -> Option<&Violation> {
        self.violations.first()
    }

    pub fn verified_to_end(&self) -> bool {
        self.violations.is_empty() && self.horizon_verified == Some(self.t_end)
    }

    /// Margin time series for one bound.
    pub fn margins(&self, id: BoundId) -> Vec<(f64, f64)> {
        self.entries.iter().filter(|e| e.id == id).map(|e| (e.t, e.margin)).collect()
    }

    /// Smallest margin per bound.
    pub fn min_margin(&self, id: BoundId) -> f64 {
        self.margins(id).iter().map(|m| m.1).fold(f64::INFINITY, f64::min)
    }

    /// CSV with columns `t, bound_id, observed, bound, margin`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut buf = String::from("t,bound_id,observed,bound,margin\n");
        for e in &self.entries {
            buf.push_str(&format!(
                "{},{},{},{},{}\n",
                g17(e.t),
                e.id.as_str(),
                g17(e.observed),
                g17(e.bound),
                g17(e.margin)
            ));
        }
        w.write_all(buf.as_bytes())?;
        Ok(())
    }
}

/// `C_tol·(h² + dt)` with `h` the largest grid spacing.
pub fn discretization_slack(c_tol: f64, h: f64, dt: f64) -> f64 {
    c_tol * (h * h + dt)
}

/// Evaluates all bounds on `rows`. `a0_min` enables the floor check.
pub fn verify_bounds(
    rows: &[DiagRow],
    constants: &StabilityConstants,
    envelope: &Envelope,
    rho: f64,
    a0_min: Option<f64>,
    tol_disc: f64,
) -> BoundReport {
    let eps = envelope.eps;
    let gamma = constants.gamma;
    let delta = constants.delta;
    let cap = data_cap(eps, rho, constants.m);
    let u_lower = gamma - constants.c2 * eps;
    let u_floor = a0_min.map(|a| lower_bound_lem21(a, eps, constants));

    let mut entries = Vec::with_capacity(rows.len() * BoundId::ALL.len());
    let mut violations = Vec::new();
    let mut horizon: Option<f64> = None;
    let mut clean = true;

    for r in rows {
        let t = r.t;
        let decay = (-delta * t).exp();
        let mut row: Vec<(BoundId, f64, f64, bool)> = vec![
            (BoundId::ULower, r.min_u, u_lower, false),
            (BoundId::VUpper, r.sup_v, eps * (-0.5 * gamma * t).exp(), true),
            (BoundId::WUpper, r.sup_w, constants.k1 * constants.k2 * cap * decay, true),
            (BoundId::ZUpper, r.sup_z, constants.k2 * cap * decay, true),
            (BoundId::SCondition, rho * r.sup_z, 2.0 * constants.k2 * eps * decay, true),
            // envelope breakdown leaves no finite bound to compare against
            (BoundId::APhi, r.sup_a, envelope.phi(t).unwrap_or(f64::NEG_INFINITY), true),
            (BoundId::WEnvelope, r.sup_w, envelope.w_bar(t), true),
            (BoundId::ZEnvelope, r.sup_z, envelope.z_bar(t), true),
        ];
        if let Some(f) = u_floor {
            row.push((BoundId::UFloor, r.min_u, f, false));
        }
        let mut row_ok = true;
        for (id, observed, bound, upper) in row {
            let margin = if upper { bound - observed } else { observed - bound };
            let bad = if id == BoundId::SCondition {
                // strict inequality
                margin + tol_disc <= 0.0
            } else {
                margin + tol_disc < 0.0
            } || margin.is_nan();
            if bad {
                row_ok = false;
                let deficit = -(margin + tol_disc);
                violations.push(Violation { id, t, deficit: if deficit.is_nan() { f64::INFINITY } else { deficit } });
            }
            entries.push(BoundEntry { t, id, observed, bound, margin });
        }
        if clean {
            if row_ok {
                horizon = Some(t);
            } else {
                clean = false;
            }
        }
    }

    BoundReport {
        horizon_verified: horizon,
        t_end: rows.last().map_or(0.0, |r| r.t),
        tol_disc,
        entries,
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::envelope::build_envelope;

    fn row(t: f64, u: f64, v: f64, w: f64, z: f64) -> DiagRow {
        DiagRow {
            t,
            min_u: u,
            max_u: u,
            sup_u: u,
            min_v: v,
            sup_v: v,
            min_w: w,
            sup_w: w,
            min_z: z,
            sup_z: z,
            int_u: u,
            int_w: w,
            int_z: z,
            gradv4: 0.0,
            sup_a: u * (-v).exp(),
        }
    }

    fn setup() -> (StabilityConstants, Envelope) {
        let c = StabilityConstants::compute(2.0, 0.5, 1.0).unwrap();
        let e = build_envelope(&c, 0.01, 0.01, 0.8 * c.eps_3star, 0.0).unwrap();
        (c, e)
    }

    #[test]
    fn equilibrium_rows_pass_with_positive_margins() {
        let (c, e) = setup();
        let rows: Vec<DiagRow> = (0..=50)
            .map(|k| {
                let t = k as f64;
                row(t, 0.5, 0.0, 1e-3 * (-0.5 * t).exp(), 1e-3 * (-0.5 * t).exp())
            })
            .collect();
        let rep = verify_bounds(&rows, &c, &e, 0.0, Some(0.5), 0.0);
        assert!(rep.violations.is_empty(), "{:?}", rep.first_violation());
        assert_eq!(rep.horizon_verified, Some(50.0));
        assert!(rep.verified_to_end());
        for id in BoundId::ALL {
            if id != BoundId::SCondition {
                assert!(rep.min_margin(id) > 0.0, "{}", id.as_str());
            }
        }
    }

    #[test]
    fn growing_virions_break_the_horizon() {
        let (c, e) = setup();
        let rows: Vec<DiagRow> = (0..=40)
            .map(|k| {
                let t = k as f64;
                row(t, 0.5, 0.0, 0.01 * (0.3 * t).exp(), 0.01 * (0.3 * t).exp())
            })
            .collect();
        let rep = verify_bounds(&rows, &c, &e, 0.0, None, 1e-3);
        let first = rep.first_violation().unwrap();
        assert!(first.t > 0.0);
        let h = rep.horizon_verified.unwrap();
        assert!(h < first.t && h < rep.t_end);
        assert!(!rep.verified_to_end());
    }

    #[test]
    fn slack_absorbs_small_overshoot() {
        let (c, e) = setup();
        let over = row(0.0, 0.5, e.eps + 1e-4, 0.01, 0.01);
        assert!(!verify_bounds(&[over], &c, &e, 0.0, None, 0.0).violations.is_empty());
        assert!(verify_bounds(&[over], &c, &e, 0.0, None, 2e-4).violations.is_empty());
    }

    #[test]
    fn csv_shape() {
        let (c, e) = setup();
        let rep = verify_bounds(&[row(0.0, 0.5, 0.0, 0.01, 0.01)], &c, &e, 0.0, Some(0.5), 0.1);
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,bound_id,observed,bound,margin"));
        assert_eq!(lines.count(), BoundId::ALL.len());
    }
}
