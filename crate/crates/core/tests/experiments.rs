use virotaxis::dynamics::{ModelParams, StepControl};
use virotaxis::experiments::{
    refinement_study, run_blowup_probe, run_stability, ExperimentConfig, GridSpec, ManualInit, RunMode,
};

fn basin(beta: f64, rho: f64, gamma: f64, nx: usize, t_end: f64) -> ExperimentConfig {
    let d = ExperimentConfig::default();
    ExperimentConfig {
        params: ModelParams { beta, rho, ..d.params },
        gamma,
        grid: GridSpec { nx, ..d.grid },
        ctl: StepControl { t_end, output_every: 0.25, ..d.ctl },
        ..d
    }
}

#[test]
fn subcritical_with_infection_loss_converges() {
    let cfg = basin(0.5, 1.0, 1.0, 64, 60.0);
    let rep = run_stability(&cfg).unwrap();
    let br = rep.bound_report.as_ref().unwrap();
    assert!(br.verified_to_end(), "{:?}", br.first_violation());
    assert!(rep.u_infty_predicted.is_none());
    assert!(rep.u_infty_est > 0.0 && rep.u_infty_drift < 1e-6, "{} {}", rep.u_infty_est, rep.u_infty_drift);
    let c = cfg.constants().unwrap();
    assert!(rep.rate_v.unwrap() >= 0.9 * cfg.gamma / 2.0);
    assert!(rep.rate_w.unwrap() > 0.0);
    assert!(rep.rate_z.unwrap() >= 0.9 * c.delta);
    let last = rep.trajectory.rows.last().unwrap();
    let first = &rep.trajectory.rows[0];
    assert!(last.sup_v < 1e-6 * first.sup_v && last.sup_w < 1e-3 * first.sup_w && last.sup_z < 1e-3 * first.sup_z);
    assert!(last.max_u - last.min_u < 1e-6);
}

#[test]
fn basin_mass_limit_and_gradient_monitor() {
    let cfg = basin(2.0, 0.0, 0.5, 64, 101.0);
    let c = cfg.constants().unwrap();
    assert!(cfg.ctl.t_end >= 10.0 / c.delta);
    let rep = run_stability(&cfg).unwrap();
    let tol = cfg.tol_disc().unwrap();
    assert!((rep.u_infty_est - rep.u_infty_predicted.unwrap()).abs() <= 5.0 * tol);
    assert!(rep.rate_z.unwrap() >= 0.9 * c.delta);
    assert!(rep.rate_v.unwrap() >= 0.9 * cfg.gamma / 2.0);
    let rows = &rep.trajectory.rows;
    let early = rows.iter().filter(|r| r.t <= 1.0).map(|r| r.gradv4).fold(0.0, f64::max);
    assert!(early.is_finite() && early > 0.0);
    for r in rows.iter().filter(|r| r.t > 1.0) {
        assert!(r.gradv4 <= 2.0 * early, "t = {}: {} vs {early}", r.t, r.gradv4);
    }
}

fn probe(beta: f64, u_mean: f64) -> ExperimentConfig {
    let d = ExperimentConfig::default();
    ExperimentConfig {
        mode: RunMode::Probe,
        params: ModelParams { beta, ..d.params },
        grid: GridSpec { nx: 16, ..d.grid },
        ctl: StepControl { t_end: 40.0, output_every: 0.5, ..d.ctl },
        init: ManualInit { u_mean, ..d.init },
        ..d
    }
}

#[test]
fn growth_probe_and_controls() {
    let up = run_blowup_probe(&probe(2.0, 2.0)).unwrap();
    assert!(up.supercritical);
    assert_eq!(up.growth_indicator, 1);
    assert_eq!(up.window, (20.0, 40.0));
    for ctrl in [probe(0.5, 2.0), probe(2.0, 0.5)] {
        let r = run_blowup_probe(&ctrl).unwrap();
        assert!(!r.supercritical);
        assert_eq!(r.growth_indicator, -1);
    }
}

#[test]
fn full_system_refinement_order() {
    let d = ExperimentConfig::default();
    let cfg = ExperimentConfig {
        ctl: StepControl { t_end: 1.0, dt_max: 4e-3, ..d.ctl },
        ..d
    };
    let orders = refinement_study(&cfg, &[32, 64, 128, 256]).unwrap();
    assert_eq!(orders.len(), 2);
    for o in orders {
        assert!((0.8..=2.2).contains(&o), "{o}");
    }
}

#[test]
fn two_dimensional_refinement_of_heat_flow() {
    let d = ExperimentConfig::default();
    let cfg = ExperimentConfig {
        mode: RunMode::Raw,
        grid: GridSpec { dim: 2, nx: 8, ny: 8, ..d.grid },
        ctl: StepControl { t_end: 0.02, dt_max: 1e-3, ..d.ctl },
        init: ManualInit {
            u_mean: 1.0,
            u_amp: 0.3,
            v_amp: 0.0,
            w_base: 0.0,
            w_amp: 0.0,
            z_base: 0.0,
            z_amp: 0.0,
        },
        ..d
    };
    let orders = refinement_study(&cfg, &[8, 16, 32]).unwrap();
    assert!((1.7..=2.3).contains(&orders[0]), "{orders:?}");
}
