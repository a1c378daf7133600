//! Adaptive Dormand–Prince 5(4) integrator for small ODE systems.
//!
//! Used as the independent reference for the Bernoulli envelope and for
//! spatially homogeneous dynamics.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { rtol: 1e-12, atol: 1e-14 }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

const MAX_STEPS: usize = 10_000_000;

/// Integrates `y' = f(t, y)` from `(t0, y0)` and returns the state at each
/// of the nondecreasing `times` (all ≥ `t0`).
pub fn solve_at<F>(f: F, t0: f64, y0: &[f64], times: &[f64], tol: Tolerance) -> Result<Vec<Vec<f64>>>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut h = 1e-3;
    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut y5 = vec![0.0; n];
    let mut out = Vec::with_capacity(times.len());
    let mut steps = 0usize;

    for &target in times {
        if target < t {
            return Err(Error::InvalidParameter(format!(
                "output times must be nondecreasing and ≥ t0 (got {target} after {t})"
            )));
        }
        while t < target {
            steps += 1;
            if steps > MAX_STEPS {
                return Err(Error::InvalidParameter("ODE step budget exhausted".into()));
            }
            let last = t + h >= target;
            let hh = if last { target - t } else { h };
            f(t, &y, &mut k[0]);
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = y[i];
                    for (j, kj) in k.iter().enumerate().take(s) {
                        acc += hh * A[s][j] * kj[i];
                    }
                    tmp[i] = acc;
                }
                f(t + C[s] * hh, &tmp, &mut k[s]);
            }
            let mut err: f64 = 0.0;
            for i in 0..n {
                let mut s5 = 0.0;
                let mut s4 = 0.0;
                for s in 0..7 {
                    s5 += B5[s] * k[s][i];
                    s4 += B4[s] * k[s][i];
                }
                y5[i] = y[i] + hh * s5;
                let sc = tol.atol + tol.rtol * y[i].abs().max(y5[i].abs());
                err = err.max((hh * (s5 - s4)).abs() / sc);
            }
            if !err.is_finite() {
                return Err(Error::NonFinite { field: "ode", t });
            }
            if err <= 1.0 {
                t = if last { target } else { t + hh };
                y.copy_from_slice(&y5);
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            // only grow h from full steps; a clipped final step says little
            if !(last && err <= 1.0) || factor < 1.0 {
                h = hh * factor;
            }
            if h < 1e-14 * (1.0 + t.abs()) {
                return Err(Error::InvalidParameter(format!("ODE step size underflow at t = {t}")));
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}
