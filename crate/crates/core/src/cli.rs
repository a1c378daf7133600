//! Subcommands `constants`, `phi`, `simulate`, `verify` and `sweep`.
//!
//! Exit codes: 0 success, 1 bad or missing input, 2 stability hypothesis
//! or threshold violated, 3 numerical abort (partial outputs kept),
//! 4 bounds not verified up to `t_end`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use crate::config::{is_numeric_key, RunConfig};
use crate::dynamics::{read_diagnostics_csv, run, write_diagnostics_csv};
use crate::error::{Error, Result};
use crate::experiments::{analyze, growth_indicator, is_supercritical};
use crate::numfmt::g17;
use crate::theory::constants::{eps_2star, StabilityConstants};
use crate::theory::phi::{phi_bound, phi_closed, phi_ode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_HYPOTHESIS: i32 = 2;
pub const EXIT_ABORT: i32 = 3;
pub const EXIT_UNVERIFIED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "virotaxis", version, about = "Haptotaxis virotherapy model: constants, envelopes, simulation and bound checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the stability constant chain for (beta, gamma, M).
    Constants {
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        gamma: f64,
        #[arg(long = "M")]
        m: f64,
    },
    /// Tabulate the envelope phi by closed form and by ODE integration.
    Phi {
        #[arg(long)]
        gamma: f64,
        #[arg(long = "A")]
        a: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 50.0)]
        t_end: f64,
        #[arg(long, default_value_t = 201)]
        n_samples: usize,
    },
    /// Run one configured simulation into a directory.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-check a finished run directory against the bounds.
    Verify {
        #[arg(long)]
        run_dir: PathBuf,
    },
    /// Run one simulation per value of a numeric config key.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        axis: String,
        /// Comma-separated values; may be empty.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Hypothesis(_) => EXIT_HYPOTHESIS,
        e if e.is_numerical_abort() => EXIT_ABORT,
        _ => EXIT_INPUT,
    }
}

/// Runs `cli`, writing results to `out` and messages to `err`; returns the
/// exit code.
pub fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let res = match cli.command {
        Command::Constants { beta, gamma, m } => cmd_constants(beta, gamma, m, out),
        Command::Phi { gamma, a, eps, t_end, n_samples } => cmd_phi(gamma, a, eps, t_end, n_samples, out),
        Command::Simulate { config, out: dir } => cmd_simulate(&config, &dir, err),
        Command::Verify { run_dir } => cmd_verify(&run_dir, out, err),
        Command::Sweep { config, axis, values, out: dir } => cmd_sweep(&config, &axis, &values, &dir),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn cmd_constants(beta: f64, gamma: f64, m: f64, out: &mut dyn Write) -> Result<i32> {
    let c = StabilityConstants::compute(beta, gamma, m)?;
    let mut text = String::new();
    for (name, v) in c.entries() {
        text.push_str(&format!("{name}={}\n", g17(v)));
    }
    out.write_all(text.as_bytes())?;
    Ok(EXIT_OK)
}

pub fn cmd_phi(gamma: f64, a: f64, eps: f64, t_end: f64, n: usize, out: &mut dyn Write) -> Result<i32> {
    if !(gamma > 0.0 && a >= 0.0 && eps > 0.0 && t_end >= 0.0 && n >= 2) || !(t_end.is_finite() && a.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "need gamma > 0, A >= 0, eps > 0, t_end >= 0, n_samples >= 2 (got {gamma}, {a}, {eps}, {t_end}, {n})"
        )));
    }
    let thr = eps_2star(gamma, a);
    if eps >= thr {
        return Err(Error::Hypothesis(format!("eps < eps_2star fails: eps = {eps}, eps_2star = {thr}")));
    }
    let times: Vec<f64> = (0..n).map(|k| t_end * k as f64 / (n - 1) as f64).collect();
    let ode = phi_ode(&times, gamma, a, eps)?;
    let bound = phi_bound(gamma, a, eps);
    let mut text = String::from("t,phi_closed,phi_ode,bound\n");
    for (&t, o) in times.iter().zip(ode) {
        let c = phi_closed(t, gamma, a, eps)?;
        text.push_str(&format!("{},{},{},{}\n", g17(t), g17(c), g17(o), g17(bound)));
    }
    out.write_all(text.as_bytes())?;
    Ok(EXIT_OK)
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "none".to_string(), g17)
}

/// Result of one simulation written to disk.
#[derive(Debug)]
pub struct RunOutcome {
    pub summary: Vec<(&'static str, String)>,
    pub aborted: bool,
}

impl RunOutcome {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.summary.iter().find(|(k, _)| *k == key).map(|(_, v)| v.as_str())
    }
}

/// Runs `cfg` and writes `config.txt`, `diagnostics.csv`, `summary.txt`,
/// `bounds.csv` (when the constants exist) and `snapshots/` into `dir`.
pub fn simulate_into(cfg: &RunConfig, dir: &Path) -> Result<RunOutcome> {
    let exp = &cfg.exp;
    exp.validate()?;
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.txt"), cfg.echo())?;
    let state0 = exp.initial_state()?;
    let mut tr = run(state0, &exp.params, &exp.ctl, cfg.snapshots)?;
    let abort = tr.abort.take();

    let mut csv = Vec::new();
    write_diagnostics_csv(&mut csv, &tr.rows)?;
    fs::write(dir.join("diagnostics.csv"), csv)?;
    if cfg.snapshots {
        let snap_dir = dir.join("snapshots");
        fs::create_dir_all(&snap_dir)?;
        for (frame, s) in &tr.snapshots {
            s.save_snapshots(&snap_dir, *frame)?;
        }
    }

    let supercritical = is_supercritical(exp, &tr.initial);
    let end = tr.end_time();
    let (steps, max_dt) = (tr.steps, tr.max_dt);
    let rep = analyze(exp, tr);
    let mut summary: Vec<(&'static str, String)> = vec![
        ("mode", exp.mode.as_str().to_string()),
        ("status", if abort.is_some() { "aborted" } else { "completed" }.to_string()),
        ("t_end", g17(end)),
        ("steps", steps.to_string()),
        ("max_dt", g17(max_dt)),
        ("eps", opt(exp.eps().ok())),
        ("tol_disc", g17(exp.tol_disc()?)),
        ("u_infty_est", g17(rep.u_infty_est)),
        ("u_infty_predicted", opt(rep.u_infty_predicted)),
        ("u_infty_drift", g17(rep.u_infty_drift)),
        ("rate_v", opt(rep.rate_v)),
        ("rate_w", opt(rep.rate_w)),
        ("rate_z", opt(rep.rate_z)),
        ("gradv4_max", g17(rep.gradv4_max)),
        ("gradv4_final", g17(rep.gradv4_final)),
    ];
    match &rep.bound_report {
        Some(br) => {
            let mut buf = Vec::new();
            br.write_csv(&mut buf)?;
            fs::write(dir.join("bounds.csv"), buf)?;
            summary.push(("horizon_verified", opt(br.horizon_verified)));
            summary.push((
                "first_violation",
                br.first_violation()
                    .map_or_else(|| "none".to_string(), |v| format!("{}@{}", v.id.as_str(), g17(v.t))),
            ));
        }
        None => {
            summary.push(("horizon_verified", "none".into()));
            summary.push(("first_violation", "none".into()));
        }
    }
    let window_start = 0.5 * end;
    summary.push(("growth_indicator", growth_indicator(&rep.trajectory.rows, window_start).to_string()));
    summary.push(("supercritical", supercritical.to_string()));
    if let Some(e) = &abort {
        summary.push(("abort_reason", e.to_string().replace('\n', " ")));
    }
    let text: String = summary.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    fs::write(dir.join("summary.txt"), text)?;
    Ok(RunOutcome { summary, aborted: abort.is_some() })
}

pub fn cmd_simulate(config: &Path, dir: &Path, err: &mut dyn Write) -> Result<i32> {
    let cfg = RunConfig::load(config)?;
    let outcome = simulate_into(&cfg, dir)?;
    if outcome.aborted {
        writeln!(err, "simulation aborted: {}", outcome.get("abort_reason").unwrap_or("unknown"))?;
        return Ok(EXIT_ABORT);
    }
    Ok(EXIT_OK)
}

pub fn cmd_verify(run_dir: &Path, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let cfg = RunConfig::load(&run_dir.join("config.txt"))?;
    let path = run_dir.join("diagnostics.csv");
    let file = fs::File::open(&path).map_err(|e| Error::Parse(format!("cannot open {}: {e}", path.display())))?;
    let rows = read_diagnostics_csv(std::io::BufReader::new(file))?;
    if rows.first().map(|r| r.t) != Some(0.0) {
        return Err(Error::Parse("diagnostics must start with a row at t = 0".into()));
    }
    let initial = cfg.exp.initial_state()?;
    let report = cfg.exp.verify(&initial, &rows)?;
    let mut buf = Vec::new();
    report.write_csv(&mut buf)?;
    out.write_all(&buf)?;
    writeln!(err, "horizon_verified={}", opt(report.horizon_verified))?;
    if let Some(v) = report.first_violation() {
        writeln!(err, "first_violation={} t={} deficit={}", v.id.as_str(), g17(v.t), g17(v.deficit))?;
    }
    let complete = report.t_end == cfg.exp.ctl.t_end;
    Ok(if report.verified_to_end() && complete { EXIT_OK } else { EXIT_UNVERIFIED })
}

const SWEEP_COLUMNS: [&str; 9] = [
    "status",
    "horizon_verified",
    "t_end",
    "u_infty_est",
    "u_infty_drift",
    "rate_v",
    "rate_w",
    "rate_z",
    "growth_indicator",
];

/// One job per entry of `values`, each in `<out>/<axis>_<index>`; rows of
/// `<out>/summary.csv` follow the order of `values`.
pub fn cmd_sweep(config: &Path, axis: &str, values: &str, out: &Path) -> Result<i32> {
    let base = RunConfig::load(config)?;
    if !is_numeric_key(axis) {
        return Err(Error::Config(format!("`{axis}` is not a numeric config key")));
    }
    let values: Vec<&str> = values.split(',').map(str::trim).filter(|v| !v.is_empty()).collect();
    fs::create_dir_all(out)?;
    let rows: Vec<String> = values
        .par_iter()
        .enumerate()
        .map(|(i, v)| {
            let job = || -> Result<RunOutcome> {
                let mut cfg = base;
                cfg.set(axis, v)?;
                simulate_into(&cfg, &out.join(format!("{axis}_{i:03}")))
            };
            let mut cells = vec![v.to_string()];
            match job() {
                Ok(o) => {
                    cells.extend(SWEEP_COLUMNS.iter().map(|c| o.get(c).unwrap_or("none").to_string()));
                    cells.push(String::new());
                }
                Err(e) => {
                    cells.push("failed".into());
                    cells.extend(std::iter::repeat("none".to_string()).take(SWEEP_COLUMNS.len() - 1));
                    cells.push(e.to_string().replace([',', '\n'], ";"));
                }
            }
            cells.join(",")
        })
        .collect();
    let mut text = format!("{axis},{},error\n", SWEEP_COLUMNS.join(","));
    for r in rows {
        text.push_str(&r);
        text.push('\n');
    }
    fs::write(out.join("summary.csv"), text)?;
    Ok(EXIT_OK)
}
