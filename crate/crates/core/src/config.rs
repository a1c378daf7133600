//! Flat `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Unknown or repeated keys are
//! errors; absent keys keep their defaults. [`RunConfig::echo`] writes every
//! key in a fixed order with 17 significant digits, so `parse(echo(c)) == c`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::experiments::{ExperimentConfig, RunMode};
use crate::numfmt::{g17, parse_f64};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunConfig {
    pub exp: ExperimentConfig,
    /// Write full field snapshots at every output time.
    pub snapshots: bool,
}

/// All keys, in echo order.
pub const KEYS: [&str; 30] = [
    "mode", "beta", "rho", "d_w", "d_z", "gamma", "M", "eps_fraction", "amp_fraction", "dim", "nx", "ny",
    "lx", "ly", "dt_max", "cfl", "lin_tol", "t_end", "output_every", "seed", "snapshots", "c_tol",
    "fit_fraction", "u_mean", "u_amp", "v_amp", "w_base", "w_amp", "z_base", "z_amp",
];

/// Keys that take a number and so can be swept.
pub fn is_numeric_key(key: &str) -> bool {
    KEYS.contains(&key) && key != "mode" && key != "snapshots"
}

fn parse_num(key: &str, value: &str) -> Result<f64> {
    parse_f64(value).ok_or_else(|| Error::Config(format!("`{key}`: `{value}` is not a number")))
}

fn parse_uint(key: &str, value: &str) -> Result<u64> {
    value
        .parse::<u64>()
        .map_err(|_| Error::Config(format!("`{key}`: `{value}` is not a nonnegative integer")))
}

impl RunConfig {
    /// Sets one key from its text form. Does not validate cross-key
    /// constraints.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let e = &mut self.exp;
        let num = || parse_num(key, value);
        match key {
            "mode" => {
                e.mode = RunMode::parse(value)
                    .ok_or_else(|| Error::Config(format!("`mode`: expected stability, probe or raw, got `{value}`")))?
            }
            "beta" => e.params.beta = num()?,
            "rho" => e.params.rho = num()?,
            "d_w" => e.params.d_w = num()?,
            "d_z" => e.params.d_z = num()?,
            "gamma" => e.gamma = num()?,
            "M" => e.m = num()?,
            "eps_fraction" => e.eps_fraction = num()?,
            "amp_fraction" => e.amp_fraction = num()?,
            "dim" => e.grid.dim = parse_uint(key, value)? as usize,
            "nx" => e.grid.nx = parse_uint(key, value)? as usize,
            "ny" => e.grid.ny = parse_uint(key, value)? as usize,
            "lx" => e.grid.lx = num()?,
            "ly" => e.grid.ly = num()?,
            "dt_max" => e.ctl.dt_max = num()?,
            "cfl" => e.ctl.cfl = num()?,
            "lin_tol" => e.ctl.lin_tol = num()?,
            "t_end" => e.ctl.t_end = num()?,
            "output_every" => e.ctl.output_every = num()?,
            "seed" => e.seed = parse_uint(key, value)?,
            "snapshots" => {
                self.snapshots = match value {
                    "true" => true,
                    "false" => false,
                    _ => return Err(Error::Config(format!("`snapshots`: expected true or false, got `{value}`"))),
                }
            }
            "c_tol" => e.c_tol = num()?,
            "fit_fraction" => e.fit_fraction = num()?,
            "u_mean" => e.init.u_mean = num()?,
            "u_amp" => e.init.u_amp = num()?,
            "v_amp" => e.init.v_amp = num()?,
            "w_base" => e.init.w_base = num()?,
            "w_amp" => e.init.w_amp = num()?,
            "z_base" => e.init.z_base = num()?,
            "z_amp" => e.init.z_amp = num()?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Text form of one key's value.
    pub fn get(&self, key: &str) -> Option<String> {
        let e = &self.exp;
        Some(match key {
            "mode" => e.mode.as_str().to_string(),
            "beta" => g17(e.params.beta),
            "rho" => g17(e.params.rho),
            "d_w" => g17(e.params.d_w),
            "d_z" => g17(e.params.d_z),
            "gamma" => g17(e.gamma),
            "M" => g17(e.m),
            "eps_fraction" => g17(e.eps_fraction),
            "amp_fraction" => g17(e.amp_fraction),
            "dim" => e.grid.dim.to_string(),
            "nx" => e.grid.nx.to_string(),
            "ny" => e.grid.ny.to_string(),
            "lx" => g17(e.grid.lx),
            "ly" => g17(e.grid.ly),
            "dt_max" => g17(e.ctl.dt_max),
            "cfl" => g17(e.ctl.cfl),
            "lin_tol" => g17(e.ctl.lin_tol),
            "t_end" => g17(e.ctl.t_end),
            "output_every" => g17(e.ctl.output_every),
            "seed" => e.seed.to_string(),
            "snapshots" => self.snapshots.to_string(),
            "c_tol" => g17(e.c_tol),
            "fit_fraction" => g17(e.fit_fraction),
            "u_mean" => g17(e.init.u_mean),
            "u_amp" => g17(e.init.u_amp),
            "v_amp" => g17(e.init.v_amp),
            "w_base" => g17(e.init.w_base),
            "w_amp" => g17(e.init.w_amp),
            "z_base" => g17(e.init.z_base),
            "z_amp" => g17(e.init.z_amp),
            _ => return None,
        })
    }

    /// Parses and validates a config text.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got `{raw}`", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !seen.insert(k.to_string()) {
                return Err(Error::Config(format!("line {}: key `{k}` given twice", n + 1)));
            }
            cfg.set(k, v).map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        cfg.exp.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Every key as `key = value`, one per line.
    pub fn echo(&self) -> String {
        KEYS.iter()
            .map(|k| format!("{k} = {}\n", self.get(k).expect("listed key")))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_and_overrides() {
        let c = RunConfig::parse("# basin\nbeta = 0.5\n\nnx=64  # coarse\nmode = probe\n").unwrap();
        assert_eq!(c.exp.params.beta, 0.5);
        assert_eq!(c.exp.grid.nx, 64);
        assert_eq!(c.exp.mode, RunMode::Probe);
        assert_eq!(c.exp.gamma, 0.5);
        assert!(!c.snapshots);
    }

    #[test]
    fn rejects_bad_input() {
        for bad in [
            "colour = red",
            "beta = two",
            "beta = 1\nbeta = 2",
            "just words",
            "nx = -3",
            "snapshots = yes",
            "mode = fast",
            "eps_fraction = 1",
            "cfl = 2",
            "dim = 3",
        ] {
            assert!(matches!(RunConfig::parse(bad), Err(Error::Config(_) | Error::InvalidParameter(_) | Error::InvalidGrid(_))), "{bad}");
        }
    }

    #[test]
    fn echo_lists_every_key() {
        let text = RunConfig::default().echo();
        assert_eq!(text.lines().count(), KEYS.len());
        assert!(text.contains("gamma = 0.5\n"));
        assert!(text.contains("mode = stability\n"));
    }

    #[test]
    fn numeric_keys() {
        assert!(is_numeric_key("eps_fraction") && is_numeric_key("nx"));
        assert!(!is_numeric_key("mode") && !is_numeric_key("snapshots") && !is_numeric_key("nope"));
    }

    proptest! {
        #[test]
        fn round_trip(
            beta in 0.1f64..5.0,
            rho in 0.0f64..3.0,
            gamma in 0.01f64..2.0,
            eps_fraction in 0.01f64..0.99,
            dt_max in 1e-4f64..0.1,
            nx in 4usize..512,
            seed in any::<u64>(),
            snapshots in any::<bool>(),
            u_amp in 0.0f64..0.4,
        ) {
            let mut c = RunConfig::default();
            c.exp.params.beta = beta;
            c.exp.params.rho = rho;
            c.exp.gamma = gamma;
            c.exp.eps_fraction = eps_fraction;
            c.exp.ctl.dt_max = dt_max;
            c.exp.grid.nx = nx;
            c.exp.seed = seed;
            c.exp.init.u_amp = u_amp;
            c.snapshots = snapshots;
            let back = RunConfig::parse(&c.echo()).unwrap();
            prop_assert_eq!(back, c);
            prop_assert_eq!(back.echo(), c.echo());
        }
    }
}
