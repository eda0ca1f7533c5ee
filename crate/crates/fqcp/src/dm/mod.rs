//! Exact open-system density-matrix evolution of the quantum model.
//!
//! `simulate` drives a [`DensityWindow`] through the qubit-reuse schedule,
//! recording each site's occupation at the end of every period it
//! participates in and tracing it out after its final record. The result is
//! exact: retirement only ever happens after the last instruction touching a
//! site, and occupations are diagonal observables, so the partial trace
//! commutes with everything that still lies ahead.
//!
//! `simulate_bruteforce` keeps the whole causal cone in memory with no
//! retirement; it exists as the oracle the reuse engine is checked against.

mod schedule;
mod window;

pub use schedule::{build_reuse_schedule, ReuseSchedule, ScheduleOp};
pub use window::{DensityWindow, WindowError};

use crate::model::{build_circuit, ModelParams};
use crate::observables::ObservableSeries;
use thiserror::Error;

/// Default cap on simultaneously-live sites (2^13 x 2^13 complex matrix).
pub const DEFAULT_LIVE_CAP: usize = 13;

/// Trace must stay this close to one after every instruction; drifting
/// further is an engine bug, never something to renormalize away.
pub const TRACE_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum DmError {
    #[error(transparent)]
    Window(#[from] WindowError),
    #[error("model error: {0}")]
    Model(#[from] crate::model::ModelError),
}

/// Exact densities and N_R(t) via qubit-reuse windowing.
pub fn simulate(params: &ModelParams) -> Result<ObservableSeries, DmError> {
    simulate_with_cap(params, DEFAULT_LIVE_CAP)
}

pub fn simulate_with_cap(params: &ModelParams, cap: usize) -> Result<ObservableSeries, DmError> {
    let circuit = build_circuit(params)?;
    let schedule = build_reuse_schedule(&circuit);
    if schedule.max_live > cap {
        return Err(WindowError::WindowTooLarge { got: schedule.max_live, cap }.into());
    }
    let mut series = ObservableSeries::zeros(circuit.site_range, circuit.t_max(), 0);
    let mut window: Option<DensityWindow> = None;
    for op in &schedule.ops {
        match op {
            ScheduleOp::Admit { site } => match window.as_mut() {
                None => window = Some(DensityWindow::new_origin(*site)),
                Some(w) => w.admit(*site),
            },
            ScheduleOp::Gate { control, target } => {
                let w = window.as_mut().expect("gate before first admit");
                w.apply_crx(*control, *target, params.theta);
                w.check_trace(TRACE_TOL, &format!("gate {control}->{target}"))?;
            }
            ScheduleOp::Reset { pair, .. } => {
                let w = window.as_mut().expect("reset before first admit");
                w.apply_reset_pair(pair.0, pair.1, params.p);
                w.check_trace(TRACE_TOL, &format!("reset {pair:?}"))?;
            }
            ScheduleOp::Record { site, t } => {
                let w = window.as_ref().expect("record before first admit");
                series.set_density(*site, *t, w.expect_n(*site));
            }
            ScheduleOp::Retire { site } => {
                let w = window.as_mut().expect("retire before first admit");
                w.retire(*site);
                if w.live_count() > 0 {
                    w.check_trace(TRACE_TOL, &format!("retire {site}"))?;
                }
            }
        }
    }
    for t in 0..=series.t_max {
        series.n_right[t as usize] = series.n_right_from_density(t);
    }
    Ok(series)
}

/// The no-reuse oracle: the whole cone stays in one window.
pub fn simulate_bruteforce(params: &ModelParams) -> Result<ObservableSeries, DmError> {
    simulate_bruteforce_with_cap(params, DEFAULT_LIVE_CAP)
}

pub fn simulate_bruteforce_with_cap(
    params: &ModelParams,
    cap: usize,
) -> Result<ObservableSeries, DmError> {
    let circuit = build_circuit(params)?;
    let cone = circuit.cone;
    if cone.width() > cap {
        return Err(WindowError::WindowTooLarge { got: cone.width(), cap }.into());
    }
    let mut series = ObservableSeries::zeros(circuit.site_range, circuit.t_max(), 0);
    let sites: Vec<i32> = cone.iter().collect();
    let mut w = DensityWindow::new_product(sites.clone(), params.origin);
    series.set_density(params.origin, 0, 1.0);
    for (pi, period) in circuit.periods.iter().enumerate() {
        let t = pi as u32 + 1;
        for layer in &period.gate_layers {
            for g in layer {
                w.apply_crx(g.control, g.target, params.theta);
                w.check_trace(TRACE_TOL, &format!("gate {g:?}"))?;
            }
        }
        for r in &period.reset_layer {
            w.apply_reset_pair(r.pair.0, r.pair.1, params.p);
            w.check_trace(TRACE_TOL, &format!("reset {:?}", r.pair))?;
        }
        for &s in &sites {
            series.set_density(s, t, w.expect_n(s));
        }
    }
    for t in 0..=series.t_max {
        series.n_right[t as usize] = series.n_right_from_density(t);
    }
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dephased::exact_enumeration;

    const THETA: f64 = 3.0 * std::f64::consts::FRAC_PI_4;

    #[test]
    fn identity_angle_keeps_origin() {
        let s = simulate(&ModelParams::new(0.0, 0.0, 4)).unwrap();
        for t in 0..=4 {
            assert!((s.n_right[t as usize] - 1.0).abs() < 1e-12);
            assert!((s.density_at(0, t) - 1.0).abs() < 1e-12);
            for r in s.site_range.iter() {
                if r != 0 {
                    assert!(s.density_at(r, t).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn full_reset_gives_vacuum() {
        for engine in [simulate, simulate_bruteforce] {
            let s = engine(&ModelParams::new(THETA, 1.0, 3)).unwrap();
            for t in 1..=3 {
                assert!(s.n_right[t as usize].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn deterministic_walker_at_theta_pi() {
        let theta = std::f64::consts::PI;
        let s = simulate_bruteforce(&ModelParams::new(theta, 0.0, 1)).unwrap();
        for r in s.site_range.iter() {
            let expect = if r == 2 { 1.0 } else { 0.0 };
            assert!((s.density_at(r, 1) - expect).abs() < 1e-10, "site {}", r);
        }
    }

    #[test]
    fn reuse_equals_bruteforce_on_grid() {
        for &theta in &[0.9, THETA, 2.6] {
            for &p in &[0.0, 0.2, 0.7] {
                let params = ModelParams::new(theta, p, 2);
                let a = simulate(&params).unwrap();
                let b = simulate_bruteforce(&params).unwrap();
                for t in 0..=2 {
                    for r in a.site_range.iter() {
                        assert!(
                            (a.density_at(r, t) - b.density_at(r, t)).abs() < 1e-8,
                            "theta={} p={} r={} t={}",
                            theta,
                            p,
                            r,
                            t
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn reuse_equals_bruteforce_t3() {
        let params = ModelParams::new(THETA, 0.2, 3);
        let a = simulate(&params).unwrap();
        let b = simulate_bruteforce(&params).unwrap();
        for t in 0..=3 {
            for r in a.site_range.iter() {
                assert!((a.density_at(r, t) - b.density_at(r, t)).abs() < 1e-8);
            }
        }
    }

    /// Inserting full dephasing after every gate turns the quantum engine
    /// into the classical stochastic process, which the enumeration oracle
    /// computes independently.
    #[test]
    fn dephased_window_reproduces_classical_enumeration() {
        let p = 0.3;
        let t_max = 2u32;
        let circuit = build_circuit(&ModelParams::new(THETA, p, t_max)).unwrap();
        let classical = exact_enumeration(&circuit, THETA, p, 10_000_000).unwrap();

        let sites: Vec<i32> = circuit.cone.iter().collect();
        let mut w = DensityWindow::new_product(sites.clone(), 0);
        let mut got = Vec::new();
        for period in &circuit.periods {
            for layer in &period.gate_layers {
                for g in layer {
                    w.apply_crx(g.control, g.target, THETA);
                    w.dephase_site(g.control);
                    w.dephase_site(g.target);
                }
            }
            for r in &period.reset_layer {
                w.apply_reset_pair(r.pair.0, r.pair.1, p);
            }
            got.push(sites.iter().map(|&s| w.expect_n(s)).collect::<Vec<f64>>());
        }
        for t in 1..=t_max {
            for (i, &s) in sites.iter().enumerate() {
                let expect = classical.density_at(s, t);
                let have = got[t as usize - 1][i];
                assert!(
                    (have - expect).abs() < 1e-10,
                    "site {} t {}: dm {} enum {}",
                    s,
                    t,
                    have,
                    expect
                );
            }
        }
    }

    #[test]
    fn unitary_evolution_stays_pure() {
        let circuit = build_circuit(&ModelParams::new(THETA, 0.0, 2)).unwrap();
        let sites: Vec<i32> = circuit.cone.iter().collect();
        let mut w = DensityWindow::new_product(sites, 0);
        for period in &circuit.periods {
            for layer in &period.gate_layers {
                for g in layer {
                    w.apply_crx(g.control, g.target, THETA);
                }
            }
        }
        assert!((w.purity() - 1.0).abs() < 1e-8);
        assert!(w.hermiticity_defect() < 1e-10);
    }

    #[test]
    fn window_cap_enforced() {
        let err = simulate_with_cap(&ModelParams::new(THETA, 0.2, 8), 5).unwrap_err();
        assert!(matches!(err, DmError::Window(WindowError::WindowTooLarge { .. })));
        let err = simulate_bruteforce(&ModelParams::new(THETA, 0.2, 4)).unwrap_err();
        assert!(matches!(err, DmError::Window(WindowError::WindowTooLarge { .. })));
    }

    #[test]
    fn positivity_spot_check() {
        let circuit = build_circuit(&ModelParams::new(THETA, 0.25, 2)).unwrap();
        let sites: Vec<i32> = circuit.cone.iter().collect();
        assert!(sites.len() <= 10);
        let mut w = DensityWindow::new_product(sites, 0);
        for period in &circuit.periods {
            for layer in &period.gate_layers {
                for g in layer {
                    w.apply_crx(g.control, g.target, THETA);
                }
            }
            for r in &period.reset_layer {
                w.apply_reset_pair(r.pair.0, r.pair.1, 0.25);
            }
        }
        assert!(w.hermiticity_defect() < 1e-10);
        assert!(w.min_eigenvalue_estimate(150, 3) >= -1e-8);
    }
}
