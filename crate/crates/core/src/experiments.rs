//! End-to-end studies: basin stabilization, decay-rate fits, the growth
//! probe and grid refinement.

use rayon::prelude::*;

use crate::dynamics::{self, initial_state, run, DiagRow, InitSpec, Mode, ModelParams, State, StepControl, Trajectory};
use crate::error::{Error, Result};
use crate::grid::{field_norms, integrate, Field, Grid};
use crate::theory::constants::StabilityConstants;
use crate::theory::envelope::{build_envelope, data_cap, Envelope};
use crate::theory::verify::{discretization_slack, verify_bounds, BoundReport};

/// How initial data are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    /// Basin data scaled from `ε = eps_fraction·ε***`.
    Stability,
    /// Explicit data (the growth probe and its controls).
    Probe,
    /// Explicit data, no extra reporting.
    Raw,
}

impl RunMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunMode::Stability => "stability",
            RunMode::Probe => "probe",
            RunMode::Raw => "raw",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "stability" => Some(RunMode::Stability),
            "probe" => Some(RunMode::Probe),
            "raw" => Some(RunMode::Raw),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub dim: usize,
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        Grid::new(self.dim, self.nx, self.ny, self.lx, self.ly)
    }
}

/// Data for `probe` and `raw` runs; see [`InitSpec`] for the profile shapes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManualInit {
    pub u_mean: f64,
    pub u_amp: f64,
    pub v_amp: f64,
    pub w_base: f64,
    pub w_amp: f64,
    pub z_base: f64,
    pub z_amp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig {
    pub mode: RunMode,
    pub params: ModelParams,
    pub gamma: f64,
    pub m: f64,
    /// `ε = eps_fraction·ε***`.
    pub eps_fraction: f64,
    /// Basin amplitudes as a fraction of their thresholds.
    pub amp_fraction: f64,
    pub grid: GridSpec,
    pub ctl: StepControl,
    pub seed: u64,
    pub c_tol: f64,
    /// Decay fits use `[fit_fraction·t_end, t_end]`.
    pub fit_fraction: f64,
    pub init: ManualInit,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: RunMode::Stability,
            params: ModelParams { beta: 2.0, rho: 0.0, d_w: 1.0, d_z: 1.0 },
            gamma: 0.5,
            m: 1.0,
            eps_fraction: 0.8,
            amp_fraction: 0.9,
            grid: GridSpec { dim: 1, nx: 256, ny: 256, lx: 1.0, ly: 1.0 },
            ctl: StepControl { dt_max: 0.01, cfl: 0.25, lin_tol: 1e-10, t_end: 100.0, output_every: 0.1 },
            seed: 0,
            c_tol: 10.0,
            fit_fraction: 0.5,
            init: ManualInit {
                u_mean: 0.5,
                u_amp: 0.0,
                v_amp: 0.0,
                w_base: 0.01,
                w_amp: 0.0,
                z_base: 0.01,
                z_amp: 0.0,
            },
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.ctl.validate()?;
        self.grid.build()?;
        let open_unit = |x: f64| x > 0.0 && x < 1.0;
        if !open_unit(self.eps_fraction) {
            return Err(Error::Config(format!("eps_fraction must lie in (0, 1), got {}", self.eps_fraction)));
        }
        if !(self.amp_fraction >= 0.0 && self.amp_fraction < 1.0) {
            return Err(Error::Config(format!("amp_fraction must lie in [0, 1), got {}", self.amp_fraction)));
        }
        if !(self.fit_fraction >= 0.0 && self.fit_fraction < 1.0) {
            return Err(Error::Config(format!("fit_fraction must lie in [0, 1), got {}", self.fit_fraction)));
        }
        if !(self.c_tol >= 0.0 && self.c_tol.is_finite()) {
            return Err(Error::Config(format!("c_tol must be >= 0, got {}", self.c_tol)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite() && self.m > 0.0 && self.m.is_finite()) {
            return Err(Error::Config(format!("need gamma > 0 and M > 0, got {} and {}", self.gamma, self.m)));
        }
        Ok(())
    }

    pub fn constants(&self) -> Result<StabilityConstants> {
        StabilityConstants::compute(self.params.beta, self.gamma, self.m)
    }

    /// `ε = eps_fraction·ε***`.
    pub fn eps(&self) -> Result<f64> {
        Ok(self.eps_fraction * self.constants()?.eps_3star)
    }

    /// Basin data: `u₀ = γ ± aε`, `0 ≤ v₀ ≤ aε`, `0 ≤ w₀, z₀ ≤ a·min{ε/ρ, M}`
    /// with `a = amp_fraction`.
    pub fn basin_spec(&self) -> Result<InitSpec> {
        let eps = self.eps()?;
        let a = self.amp_fraction;
        let cap = data_cap(eps, self.params.rho, self.m);
        Ok(InitSpec {
            u_mean: self.gamma,
            u_amp: a * eps,
            v_amp: a * eps,
            w_base: 0.0,
            w_amp: a * cap,
            z_base: 0.0,
            z_amp: a * cap,
            mode: Mode::from_seed(self.seed),
        })
    }

    pub fn init_spec(&self) -> Result<InitSpec> {
        match self.mode {
            RunMode::Stability => self.basin_spec(),
            RunMode::Probe | RunMode::Raw => {
                let i = self.init;
                Ok(InitSpec {
                    u_mean: i.u_mean,
                    u_amp: i.u_amp,
                    v_amp: i.v_amp,
                    w_base: i.w_base,
                    w_amp: i.w_amp,
                    z_base: i.z_base,
                    z_amp: i.z_amp,
                    mode: Mode::from_seed(self.seed),
                })
            }
        }
    }

    pub fn initial_state(&self) -> Result<State> {
        initial_state(self.grid.build()?, &self.init_spec()?)
    }

    /// `C_tol·(h² + dt_max)`.
    pub fn tol_disc(&self) -> Result<f64> {
        Ok(discretization_slack(self.c_tol, self.grid.build()?.max_spacing(), self.ctl.dt_max))
    }

    /// Envelope built from the norms of `initial`.
    pub fn envelope(&self, initial: &State) -> Result<(StabilityConstants, Envelope)> {
        let c = self.constants()?;
        let eps = self.eps_fraction * c.eps_3star;
        let env = build_envelope(
            &c,
            field_norms(&initial.w).sup_norm,
            field_norms(&initial.z).sup_norm,
            eps,
            self.params.rho,
        )?;
        Ok((c, env))
    }

    /// Bound report for `rows` recorded from `initial`.
    pub fn verify(&self, initial: &State, rows: &[DiagRow]) -> Result<BoundReport> {
        let (c, env) = self.envelope(initial)?;
        let a0_min = field_norms(&initial.transformed_density()).min;
        Ok(verify_bounds(rows, &c, &env, self.params.rho, Some(a0_min), self.tol_disc()?))
    }

    fn fit_window(&self, t_end: f64) -> (f64, f64) {
        (self.fit_fraction * t_end, t_end)
    }
}

/// Least-squares decay rate `r` of `value ≈ C·e^{−rt}` over `window`
/// (inclusive).
pub fn fit_decay(series: &[(f64, f64)], window: (f64, f64)) -> Result<f64> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|&(t, _)| t >= window.0 && t <= window.1)
        .collect();
    if pts.len() < 10 {
        return Err(Error::DecayFit(format!(
            "{} points in [{}, {}], need at least 10",
            pts.len(),
            window.0,
            window.1
        )));
    }
    if let Some(&(t, v)) = pts.iter().find(|p| !(p.1 > 0.0 && p.1.is_finite())) {
        return Err(Error::DecayFit(format!("value {v} at t = {t} is not positive")));
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let lm = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(t, v) in &pts {
        sxy += (t - tm) * (v.ln() - lm);
        sxx += (t - tm) * (t - tm);
    }
    if sxx == 0.0 {
        return Err(Error::DecayFit("all sample times coincide".into()));
    }
    Ok(-sxy / sxx)
}

/// Mean of `u₀` when `ρ = 0`; no formula otherwise.
pub fn predict_u_infty(u0: &Field, rho: f64) -> Option<f64> {
    (rho == 0.0).then(|| integrate(u0) / u0.grid().volume())
}

#[derive(Debug)]
pub struct ConvergenceReport {
    /// Spatial mean of `u` at the last recorded time.
    pub u_infty_est: f64,
    pub u_infty_predicted: Option<f64>,
    /// Change of the mean of `u` across the fit window.
    pub u_infty_drift: f64,
    pub fit_window: (f64, f64),
    pub rate_v: Option<f64>,
    pub rate_w: Option<f64>,
    pub rate_z: Option<f64>,
    pub gradv4_max: f64,
    pub gradv4_final: f64,
    /// `None` when the stability constants are unavailable for the
    /// configured `(β, γ, M)`.
    pub bound_report: Option<BoundReport>,
    pub trajectory: Trajectory,
}

/// Post-processes a finished (or aborted) trajectory.
pub fn analyze(cfg: &ExperimentConfig, trajectory: Trajectory) -> ConvergenceReport {
    let vol = trajectory.initial.grid().volume();
    let rows = &trajectory.rows;
    let last = rows.last().expect("a trajectory records its initial row");
    let window = cfg.fit_window(last.t);
    let first_in_window = rows.iter().find(|r| r.t >= window.0).unwrap_or(last);
    let rate = |f: fn(&DiagRow) -> f64| fit_decay(&trajectory.series(f), window).ok();
    ConvergenceReport {
        u_infty_est: last.int_u / vol,
        u_infty_predicted: predict_u_infty(&trajectory.initial.u, cfg.params.rho),
        u_infty_drift: (last.int_u - first_in_window.int_u).abs() / vol,
        fit_window: window,
        rate_v: rate(|r| r.sup_v),
        rate_w: rate(|r| r.sup_w),
        rate_z: rate(|r| r.sup_z),
        gradv4_max: rows.iter().map(|r| r.gradv4).fold(f64::NEG_INFINITY, f64::max),
        gradv4_final: last.gradv4,
        bound_report: cfg.verify(&trajectory.initial, rows).ok(),
        trajectory,
    }
}

/// Runs from basin data and reports convergence. Fails if stepping aborts.
pub fn run_stability(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let state0 = initial_state(cfg.grid.build()?, &cfg.basin_spec()?)?;
    let mut tr = run(state0, &cfg.params, &cfg.ctl, false)?;
    if let Some(e) = tr.abort.take() {
        return Err(e);
    }
    Ok(analyze(cfg, tr))
}

/// Qualitative growth indicator over a window; says nothing about blow-up
/// itself.
#[derive(Debug)]
pub struct GrowthReport {
    /// `β > 1`, `ρ = 0`, `v₀ ≡ 0` and mean `u₀ > 1/(β − 1)`.
    pub supercritical: bool,
    pub window: (f64, f64),
    pub int_w: Vec<(f64, f64)>,
    pub int_z: Vec<(f64, f64)>,
    /// +1 if `∫w` and `∫z` both strictly increase on the window, −1 if both
    /// strictly decrease, 0 otherwise.
    pub growth_indicator: i32,
    pub trajectory: Trajectory,
}

/// +1, −1 or 0 as described on [`GrowthReport::growth_indicator`], over rows with `t ≥ t_from`.
pub fn growth_indicator(rows: &[DiagRow], t_from: f64) -> i32 {
    let tail: Vec<&DiagRow> = rows.iter().filter(|r| r.t >= t_from).collect();
    if tail.len() < 2 {
        return 0;
    }
    let mono = |f: fn(&DiagRow) -> f64, up: bool| {
        tail.windows(2).all(|p| if up { f(p[1]) > f(p[0]) } else { f(p[1]) < f(p[0]) })
    };
    if mono(|r| r.int_w, true) && mono(|r| r.int_z, true) {
        1
    } else if mono(|r| r.int_w, false) && mono(|r| r.int_z, false) {
        -1
    } else {
        0
    }
}

/// Runs the explicit data of `cfg` and reports growth of `∫w`, `∫z` on the
/// final half.
pub fn run_blowup_probe(cfg: &ExperimentConfig) -> Result<GrowthReport> {
    cfg.validate()?;
    let state0 = initial_state(cfg.grid.build()?, &ExperimentConfig { mode: RunMode::Probe, ..*cfg }.init_spec()?)?;
    let mut tr = run(state0, &cfg.params, &cfg.ctl, false)?;
    if let Some(e) = tr.abort.take() {
        return Err(e);
    }
    let window = (0.5 * tr.end_time(), tr.end_time());
    Ok(GrowthReport {
        supercritical: is_supercritical(cfg, &tr.initial),
        window,
        int_w: tr.series(|r| r.int_w),
        int_z: tr.series(|r| r.int_z),
        growth_indicator: growth_indicator(&tr.rows, window.0),
        trajectory: tr,
    })
}

pub fn is_supercritical(cfg: &ExperimentConfig, initial: &State) -> bool {
    let p = &cfg.params;
    let mean_u = integrate(&initial.u) / initial.grid().volume();
    p.beta > 1.0 && p.rho == 0.0 && field_norms(&initial.v).sup_norm == 0.0 && mean_u > 1.0 / (p.beta - 1.0)
}

/// Averages a field onto the grid with half the cells per axis.
fn restrict(fine: &Field, coarse: Grid) -> Field {
    let g = fine.grid();
    let f = fine.values();
    let mut out = vec![0.0; coarse.len()];
    for j in 0..coarse.ny() {
        for i in 0..coarse.nx() {
            out[coarse.idx(i, j)] = if g.dim() == 1 {
                0.5 * (f[2 * i] + f[2 * i + 1])
            } else {
                0.25 * (f[g.idx(2 * i, 2 * j)]
                    + f[g.idx(2 * i + 1, 2 * j)]
                    + f[g.idx(2 * i, 2 * j + 1)]
                    + f[g.idx(2 * i + 1, 2 * j + 1)])
            };
        }
    }
    Field::new(coarse, out).expect("coarse grid length")
}

/// Observed orders of `u` at `t_end` over the cell counts `levels`
/// (each twice the previous; `ny` scales with `nx` in 2D). `dt_max` shrinks
/// like `dx²` so the time error does not mask the spatial one. Returns one
/// order per consecutive triple of levels.
pub fn refinement_study(cfg: &ExperimentConfig, levels: &[usize]) -> Result<Vec<f64>> {
    cfg.validate()?;
    if levels.len() < 3 {
        return Err(Error::InvalidParameter(format!("need at least 3 levels, got {}", levels.len())));
    }
    if levels.windows(2).any(|p| p[1] != 2 * p[0]) {
        return Err(Error::InvalidParameter(format!("levels must double at each step, got {levels:?}")));
    }
    if !(cfg.ctl.t_end > 0.0) {
        return Err(Error::InvalidParameter("refinement needs t_end > 0".into()));
    }
    let n0 = levels[0];
    let finals: Vec<Result<Field>> = levels
        .par_iter()
        .map(|&n| {
            let grid = GridSpec { nx: n, ny: cfg.grid.ny * n / n0, ..cfg.grid }.build()?;
            let r = n0 as f64 / n as f64;
            let ctl = StepControl { dt_max: cfg.ctl.dt_max * r * r, output_every: cfg.ctl.t_end, ..cfg.ctl };
            let mut tr = dynamics::run(initial_state(grid, &cfg.init_spec()?)?, &cfg.params, &ctl, false)?;
            match tr.abort.take() {
                Some(e) => Err(e),
                None => Ok(tr.final_state.u),
            }
        })
        .collect();
    let finals = finals.into_iter().collect::<Result<Vec<Field>>>()?;
    let errors: Vec<f64> = finals
        .windows(2)
        .map(|p| {
            let r = restrict(&p[1], *p[0].grid());
            field_norms(&r.zip_map(&p[0], |a, b| a - b)).sup_norm
        })
        .collect();
    Ok(errors.windows(2).map(|e| (e[0] / e[1]).log2()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_decay_examples() {
        let exact: Vec<(f64, f64)> = (0..100).map(|k| (k as f64 * 0.1, (-0.3 * k as f64 * 0.1).exp())).collect();
        assert!((fit_decay(&exact, (0.0, 10.0)).unwrap() - 0.3).abs() < 1e-9);
        let noisy: Vec<(f64, f64)> = (0..100)
            .map(|k| {
                let t = k as f64 * 0.2;
                (t, 2.0 * (-0.3 * t).exp() * (1.0 + 0.01 * t.sin()))
            })
            .collect();
        assert!((fit_decay(&noisy, (0.0, 20.0)).unwrap() - 0.3).abs() < 5e-3);
        let flat: Vec<(f64, f64)> = (0..20).map(|k| (k as f64, 4.0)).collect();
        assert!(fit_decay(&flat, (0.0, 19.0)).unwrap().abs() < 1e-12);
    }

    #[test]
    fn fit_decay_errors() {
        let few: Vec<(f64, f64)> = (0..9).map(|k| (k as f64, 1.0)).collect();
        assert!(matches!(fit_decay(&few, (0.0, 10.0)), Err(Error::DecayFit(_))));
        let mut s: Vec<(f64, f64)> = (0..20).map(|k| (k as f64, 1.0)).collect();
        s[5].1 = 0.0;
        assert!(matches!(fit_decay(&s, (0.0, 20.0)), Err(Error::DecayFit(_))));
        // the offending point outside the window is ignored
        assert!(fit_decay(&s, (6.0, 19.0)).is_ok());
    }

    #[test]
    fn predict_u_infty_examples() {
        let g = Grid::line(128, 2.0).unwrap();
        assert_eq!(predict_u_infty(&Field::constant(g, 0.5), 0.0), Some(0.5));
        let u = Field::from_fn(g, |x, _| 0.5 + 0.004 * (std::f64::consts::PI * x / 2.0).cos());
        assert!((predict_u_infty(&u, 0.0).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(predict_u_infty(&u, 1.0), None);
    }

    #[test]
    fn growth_indicator_cases() {
        let mk = |t: f64, w: f64, z: f64| DiagRow {
            t,
            min_u: 0.0,
            max_u: 0.0,
            sup_u: 0.0,
            min_v: 0.0,
            sup_v: 0.0,
            min_w: 0.0,
            sup_w: 0.0,
            min_z: 0.0,
            sup_z: 0.0,
            int_u: 0.0,
            int_w: w,
            int_z: z,
            gradv4: 0.0,
            sup_a: 0.0,
        };
        let up: Vec<DiagRow> = (0..10).map(|k| mk(k as f64, k as f64, 2.0 * k as f64)).collect();
        assert_eq!(growth_indicator(&up, 5.0), 1);
        let down: Vec<DiagRow> = (0..10).map(|k| mk(k as f64, -(k as f64), 1.0 / (1.0 + k as f64))).collect();
        assert_eq!(growth_indicator(&down, 5.0), -1);
        let mixed: Vec<DiagRow> = (0..10).map(|k| mk(k as f64, k as f64, -(k as f64))).collect();
        assert_eq!(growth_indicator(&mixed, 0.0), 0);
    }

    fn small(mode: RunMode) -> ExperimentConfig {
        ExperimentConfig {
            mode,
            grid: GridSpec { nx: 32, ..ExperimentConfig::default().grid },
            ctl: StepControl { t_end: 2.0, output_every: 0.1, ..ExperimentConfig::default().ctl },
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn basin_data_respects_thresholds() {
        let cfg = small(RunMode::Stability);
        let eps = cfg.eps().unwrap();
        let s = cfg.initial_state().unwrap();
        let du = field_norms(&s.u.map(|u| u - cfg.gamma)).sup_norm;
        assert!(du < eps && field_norms(&s.v).sup_norm < eps);
        assert!(field_norms(&s.w).sup_norm < cfg.m && field_norms(&s.z).sup_norm < cfg.m);
        let (_, env) = cfg.envelope(&s).unwrap();
        assert!(env.hypotheses_hold && !env.degenerate);
    }

    #[test]
    fn zero_amplitude_run_stays_homogeneous() {
        let cfg = ExperimentConfig { amp_fraction: 0.0, ..small(RunMode::Stability) };
        let rep = run_stability(&cfg).unwrap();
        let fs = &rep.trajectory.final_state;
        // constant up to rounding in the implicit solves
        assert!(fs.u.values().iter().all(|&u| (u - cfg.gamma).abs() <= 1e-14));
        assert!(fs.w.values().iter().all(|&w| w == 0.0));
        assert!((rep.u_infty_est - cfg.gamma).abs() <= 1e-14);
        assert!(rep.rate_z.is_none());
    }

    #[test]
    fn short_stability_run_reports() {
        let rep = run_stability(&small(RunMode::Stability)).unwrap();
        let br = rep.bound_report.as_ref().unwrap();
        assert!(br.verified_to_end(), "{:?}", br.first_violation());
        assert!((rep.u_infty_est - rep.u_infty_predicted.unwrap()).abs() < 1e-12);
        assert!(rep.rate_v.unwrap() > 0.0);
    }

    #[test]
    fn refinement_rejects_bad_levels() {
        let cfg = small(RunMode::Raw);
        assert!(refinement_study(&cfg, &[32, 32, 32]).is_err());
        assert!(refinement_study(&cfg, &[32, 64]).is_err());
    }

    #[test]
    fn heat_equation_refinement_is_second_order() {
        let cfg = ExperimentConfig {
            mode: RunMode::Raw,
            params: ModelParams { rho: 0.0, ..ExperimentConfig::default().params },
            ctl: StepControl { t_end: 0.05, dt_max: 1e-3, ..ExperimentConfig::default().ctl },
            init: ManualInit {
                u_mean: 1.0,
                u_amp: 0.3,
                v_amp: 0.0,
                w_base: 0.0,
                w_amp: 0.0,
                z_base: 0.0,
                z_amp: 0.0,
            },
            ..ExperimentConfig::default()
        };
        let orders = refinement_study(&cfg, &[16, 32, 64, 128]).unwrap();
        for o in orders {
            assert!((1.7..=2.3).contains(&o), "{o}");
        }
    }
}
