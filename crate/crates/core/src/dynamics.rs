//! IMEX time integration of the four-component system.
//!
//! One step, in order:
//! 1. `v ← v·exp(−(u + w)·dt)` pointwise (exact for frozen `u + w`);
//! 2. explicit upwind taxis and infection loss for `u`, then implicit diffusion;
//! 3. `w` with implicit decay and diffusion, explicit source `u z`;
//! 4. `z` with implicit decay, absorption and diffusion, source `β w` from the new `w`.
//!
//! The step size obeys an advective CFL bound on the face gradient of `v` only;
//! diffusion and linear decay are implicit.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{
    field_norms, grad_quartic_norm, haptotaxis_divergence, integrate, max_face_velocity,
    save_snapshot, Field, Grid,
};
use crate::linsolve::{self, HelmholtzOp};
use crate::numfmt::{g17, parse_f64};

/// Tolerance for tiny negative values; never clipped, only tolerated.
pub const TOL_POS: f64 = 1e-12;

/// Coefficients `(β, ρ, d_w, d_z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub beta: f64,
    pub rho: f64,
    pub d_w: f64,
    pub d_z: f64,
}

impl ModelParams {
    pub fn new(beta: f64, rho: f64, d_w: f64, d_z: f64) -> Result<Self> {
        let p = Self { beta, rho, d_w, d_z };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.beta > 0.0
            && self.d_w > 0.0
            && self.d_z > 0.0
            && self.rho >= 0.0
            && [self.beta, self.rho, self.d_w, self.d_z].iter().all(|x| x.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "need beta > 0, rho >= 0, d_w > 0, d_z > 0; got {self:?}"
            )))
        }
    }
}

/// Time-stamped `(u, v, w, z)` on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub u: Field,
    pub v: Field,
    pub w: Field,
    pub z: Field,
}

impl State {
    pub fn grid(&self) -> &Grid {
        self.u.grid()
    }

    /// `a = u·e^{−v}`.
    pub fn transformed_density(&self) -> Field {
        self.u.zip_map(&self.v, |u, v| u * (-v).exp())
    }

    /// Spatially homogeneous state on `grid`.
    pub fn homogeneous(grid: Grid, t: f64, u: f64, v: f64, w: f64, z: f64) -> Self {
        Self {
            t,
            u: Field::constant(grid, u),
            v: Field::constant(grid, v),
            w: Field::constant(grid, w),
            z: Field::constant(grid, z),
        }
    }

    fn fields(&self) -> [(&'static str, &Field); 4] {
        [("u", &self.u), ("v", &self.v), ("w", &self.w), ("z", &self.z)]
    }

    /// Writes `<dir>/<field>_<frame>.dat` for each component.
    pub fn save_snapshots(&self, dir: &Path, frame: usize) -> Result<()> {
        for (name, f) in self.fields() {
            save_snapshot(&dir.join(format!("{name}_{frame:05}.dat")), f, self.t, name)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub dt_max: f64,
    pub cfl: f64,
    pub lin_tol: f64,
    pub t_end: f64,
    pub output_every: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            dt_max: 0.01,
            cfl: 0.25,
            lin_tol: 1e-10,
            t_end: 1.0,
            output_every: 0.1,
        }
    }
}

impl StepControl {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::InvalidParameter(format!("cfl must lie in (0, 1], got {}", self.cfl)));
        }
        if !(self.lin_tol > 0.0 && self.lin_tol <= 1e-8) {
            return Err(Error::InvalidParameter(format!(
                "lin_tol must lie in (0, 1e-8], got {}",
                self.lin_tol
            )));
        }
        if !(self.dt_max > 0.0 && self.dt_max.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt_max must be positive, got {}", self.dt_max)));
        }
        if !(self.output_every > 0.0 && self.output_every.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "output_every must be positive, got {}",
                self.output_every
            )));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidParameter(format!("t_end must be >= 0, got {}", self.t_end)));
        }
        Ok(())
    }
}

/// Low-frequency cosine mode shared by all initial profiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub kx: u32,
    pub ky: u32,
    /// +1 or −1.
    pub sign: f64,
}

impl Default for Mode {
    fn default() -> Self {
        Self { kx: 1, ky: 1, sign: 1.0 }
    }
}

impl Mode {
    /// Draws wavenumbers in {1, 2} and a sign from `seed`.
    pub fn from_seed(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            kx: rng.gen_range(1..=2),
            ky: rng.gen_range(1..=2),
            sign: if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
        }
    }

    /// Values in [−1, 1]; zero normal derivative on the boundary.
    pub fn eval(&self, grid: &Grid, x: f64, y: f64) -> f64 {
        let mut m = (std::f64::consts::PI * self.kx as f64 * x / grid.lx()).cos();
        if grid.dim() == 2 {
            m *= (std::f64::consts::PI * self.ky as f64 * y / grid.ly()).cos();
        }
        self.sign * m
    }
}

/// Initial-data recipe.
///
/// `u₀ = u_mean + u_amp·m`, `v₀ = v_amp·(1 + m)/2`,
/// `w₀ = w_base + w_amp·(1 + m)/2`, `z₀ = z_base + z_amp·(1 + m)/2`
/// with `m` the cosine [`Mode`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitSpec {
    pub u_mean: f64,
    pub u_amp: f64,
    pub v_amp: f64,
    pub w_base: f64,
    pub w_amp: f64,
    pub z_base: f64,
    pub z_amp: f64,
    pub mode: Mode,
}

pub fn initial_state(grid: Grid, spec: &InitSpec) -> Result<State> {
    let amps = [spec.u_amp, spec.v_amp, spec.w_amp, spec.z_amp, spec.w_base, spec.z_base];
    if amps.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
        return Err(Error::InvalidParameter(format!("amplitudes must be finite and >= 0: {spec:?}")));
    }
    if !(spec.u_mean.is_finite() && spec.u_mean >= spec.u_amp) {
        return Err(Error::InvalidParameter(format!(
            "u0 would be negative: u_mean = {} < u_amp = {}",
            spec.u_mean, spec.u_amp
        )));
    }
    let m = spec.mode;
    let bump = |x: f64, y: f64| 0.5 * (1.0 + m.eval(&grid, x, y));
    Ok(State {
        t: 0.0,
        u: Field::from_fn(grid, |x, y| spec.u_mean + spec.u_amp * m.eval(&grid, x, y)),
        v: Field::from_fn(grid, |x, y| spec.v_amp * bump(x, y)),
        w: Field::from_fn(grid, |x, y| spec.w_base + spec.w_amp * bump(x, y)),
        z: Field::from_fn(grid, |x, y| spec.z_base + spec.z_amp * bump(x, y)),
    })
}

/// Advances `state` toward `ctl.t_end` by one step.
pub fn step(state: &State, params: &ModelParams, ctl: &StepControl) -> Result<State> {
    step_until(state, params, ctl, ctl.t_end)
}

/// One step that never passes `target`; lands exactly on it when the step
/// is limited by the remaining time.
pub fn step_until(state: &State, params: &ModelParams, ctl: &StepControl, target: f64) -> Result<State> {
    let remaining = target - state.t;
    if !(remaining > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "no time left to step: t = {}, target = {target}",
            state.t
        )));
    }
    let g = *state.grid();
    let h = g.min_spacing();
    let cfl_dt = |vel: f64| if vel > 0.0 { ctl.cfl * h / vel } else { f64::INFINITY };

    let mut dt = ctl.dt_max.min(remaining).min(cfl_dt(max_face_velocity(&state.v)));
    let decay = |dt: f64| -> Field {
        let rate = state.u.zip_map(&state.w, |u, w| u + w);
        state.v.zip_map(&rate, |v, r| v * (-r * dt).exp())
    };
    // taxis uses the updated v, so its velocity must satisfy the bound too
    let mut v_new = decay(dt);
    for _ in 0..32 {
        let lim = cfl_dt(max_face_velocity(&v_new));
        if dt <= lim {
            break;
        }
        dt = lim;
        v_new = decay(dt);
    }
    let t_new = if dt >= remaining { target } else { state.t + dt };

    let taxis = haptotaxis_divergence(&state.u, &v_new);
    let rho = params.rho;
    let u_star: Vec<f64> = state
        .u
        .values()
        .iter()
        .zip(taxis.values())
        .zip(state.z.values())
        .map(|((&u, &tx), &z)| u + dt * (tx - rho * u * z))
        .collect();
    let ones = vec![1.0; g.len()];
    let u_new = linsolve::solve(
        &HelmholtzOp { grid: g, diag: &ones, kappa: dt },
        &Field::new(g, u_star)?,
        ctl.lin_tol,
    )?;

    let w_rhs = state
        .w
        .zip_map(&state.u.zip_map(&state.z, |u, z| u * z), |w, uz| w + dt * uz);
    let w_diag = vec![1.0 + dt; g.len()];
    let w_new = linsolve::solve(
        &HelmholtzOp { grid: g, diag: &w_diag, kappa: dt * params.d_w },
        &w_rhs,
        ctl.lin_tol,
    )?;

    let z_rhs = state.z.zip_map(&w_new, |z, w| z + dt * params.beta * w);
    let z_diag: Vec<f64> = state.u.values().iter().map(|&u| 1.0 + dt * (1.0 + u)).collect();
    let z_new = linsolve::solve(
        &HelmholtzOp { grid: g, diag: &z_diag, kappa: dt * params.d_z },
        &z_rhs,
        ctl.lin_tol,
    )?;

    let next = State { t: t_new, u: u_new, v: v_new, w: w_new, z: z_new };
    for (name, f) in next.fields() {
        if !f.is_finite() {
            return Err(Error::NonFinite { field: name, t: t_new });
        }
    }
    Ok(next)
}

/// One recorded row of run diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagRow {
    pub t: f64,
    pub min_u: f64,
    pub max_u: f64,
    pub sup_u: f64,
    pub min_v: f64,
    pub sup_v: f64,
    pub min_w: f64,
    pub sup_w: f64,
    pub min_z: f64,
    pub sup_z: f64,
    pub int_u: f64,
    pub int_w: f64,
    pub int_z: f64,
    pub gradv4: f64,
    pub sup_a: f64,
}

pub const DIAG_COLUMNS: [&str; 15] = [
    "t", "min_u", "max_u", "sup_u", "min_v", "sup_v", "min_w", "sup_w", "min_z", "sup_z", "int_u",
    "int_w", "int_z", "gradv4", "sup_a",
];

pub fn diagnostics(state: &State, _params: &ModelParams) -> DiagRow {
    let nu = field_norms(&state.u);
    let nv = field_norms(&state.v);
    let nw = field_norms(&state.w);
    let nz = field_norms(&state.z);
    DiagRow {
        t: state.t,
        min_u: nu.min,
        max_u: nu.max,
        sup_u: nu.sup_norm,
        min_v: nv.min,
        sup_v: nv.sup_norm,
        min_w: nw.min,
        sup_w: nw.sup_norm,
        min_z: nz.min,
        sup_z: nz.sup_norm,
        int_u: integrate(&state.u),
        int_w: integrate(&state.w),
        int_z: integrate(&state.z),
        gradv4: grad_quartic_norm(&state.v),
        sup_a: field_norms(&state.transformed_density()).sup_norm,
    }
}

impl DiagRow {
    fn csv_values(&self) -> [f64; 15] {
        [
            self.t, self.min_u, self.max_u, self.sup_u, self.min_v, self.sup_v, self.min_w,
            self.sup_w, self.min_z, self.sup_z, self.int_u, self.int_w, self.int_z, self.gradv4,
            self.sup_a,
        ]
    }

    fn from_csv_values(v: [f64; 15]) -> Self {
        Self {
            t: v[0],
            min_u: v[1],
            max_u: v[2],
            sup_u: v[3],
            min_v: v[4],
            sup_v: v[5],
            min_w: v[6],
            sup_w: v[7],
            min_z: v[8],
            sup_z: v[9],
            int_u: v[10],
            int_w: v[11],
            int_z: v[12],
            gradv4: v[13],
            sup_a: v[14],
        }
    }
}

pub fn write_diagnostics_csv<W: Write>(mut w: W, rows: &[DiagRow]) -> Result<()> {
    let mut buf = DIAG_COLUMNS.join(",");
    buf.push('\n');
    for r in rows {
        let line: Vec<String> = r.csv_values().iter().map(|&x| g17(x)).collect();
        buf.push_str(&line.join(","));
        buf.push('\n');
    }
    w.write_all(buf.as_bytes())?;
    Ok(())
}

/// Parses a diagnostics CSV. Every row must be newline-terminated, so a
/// file cut off mid-row is rejected.
pub fn read_diagnostics_csv<R: BufRead>(mut r: R) -> Result<Vec<DiagRow>> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    if !text.ends_with('\n') {
        return Err(Error::Parse("diagnostics file is truncated (no final newline)".into()));
    }
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty diagnostics file".into()))?;
    if header.trim() != DIAG_COLUMNS.join(",") {
        return Err(Error::Parse(format!("unexpected diagnostics header: {header}")));
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != DIAG_COLUMNS.len() {
            return Err(Error::Parse(format!(
                "diagnostics row {} has {} columns, expected {}",
                lineno + 2,
                cells.len(),
                DIAG_COLUMNS.len()
            )));
        }
        let mut vals = [0.0; 15];
        for (slot, cell) in vals.iter_mut().zip(&cells) {
            *slot = parse_f64(cell)
                .ok_or_else(|| Error::Parse(format!("bad number `{cell}` on row {}", lineno + 2)))?;
        }
        rows.push(DiagRow::from_csv_values(vals));
    }
    Ok(rows)
}

/// Output of [`run`].
#[derive(Debug)]
pub struct Trajectory {
    pub initial: State,
    pub rows: Vec<DiagRow>,
    /// `(frame, state)` pairs, present when snapshots were requested.
    pub snapshots: Vec<(usize, State)>,
    pub final_state: State,
    pub steps: usize,
    pub max_dt: f64,
    /// Set when stepping aborted; `rows` then hold the partial record.
    pub abort: Option<Error>,
}

impl Trajectory {
    pub fn end_time(&self) -> f64 {
        self.rows.last().map_or(self.initial.t, |r| r.t)
    }

    /// `(t, f(row))` pairs.
    pub fn series(&self, f: impl Fn(&DiagRow) -> f64) -> Vec<(f64, f64)> {
        self.rows.iter().map(|r| (r.t, f(r))).collect()
    }
}

/// Steps from `state0` to `ctl.t_end`, recording diagnostics (and
/// optionally full states) at every multiple of `ctl.output_every` and at
/// `t_end`. Deterministic for fixed inputs.
pub fn run(state0: State, params: &ModelParams, ctl: &StepControl, keep_snapshots: bool) -> Result<Trajectory> {
    params.validate()?;
    ctl.validate()?;
    let mut rows = vec![diagnostics(&state0, params)];
    let mut snapshots = Vec::new();
    if keep_snapshots {
        snapshots.push((0, state0.clone()));
    }
    let mut state = state0.clone();
    let mut k = 1usize;
    let mut steps = 0usize;
    let mut max_dt: f64 = 0.0;
    let mut abort = None;
    while state.t < ctl.t_end {
        let next_out = (k as f64 * ctl.output_every).min(ctl.t_end);
        match step_until(&state, params, ctl, next_out) {
            Ok(next) => {
                max_dt = max_dt.max(next.t - state.t);
                state = next;
                steps += 1;
            }
            Err(e) => {
                abort = Some(e);
                break;
            }
        }
        if state.t >= next_out {
            rows.push(diagnostics(&state, params));
            if keep_snapshots {
                snapshots.push((k, state.clone()));
            }
            k += 1;
        }
    }
    Ok(Trajectory {
        initial: state0,
        rows,
        snapshots,
        final_state: state,
        steps,
        max_dt,
        abort,
    })
}

/// Discrete defect of `d/dt ∫u = −ρ∫uz` over one step.
pub fn mass_balance_residual(before: &State, after: &State, params: &ModelParams, dt: f64) -> f64 {
    let uz = integrate(&before.u.zip_map(&before.z, |u, z| u * z));
    (integrate(&after.u) - integrate(&before.u) + dt * params.rho * uz).abs()
}

/// Right-hand side of the spatially homogeneous system for `y = (u, v, w, z)`.
pub fn homogeneous_rhs(params: &ModelParams, y: &[f64], dy: &mut [f64]) {
    let (u, v, w, z) = (y[0], y[1], y[2], y[3]);
    dy[0] = -params.rho * u * z;
    dy[1] = -(u + w) * v;
    dy[2] = -w + u * z;
    dy[3] = -z - u * z + params.beta * w;
}
