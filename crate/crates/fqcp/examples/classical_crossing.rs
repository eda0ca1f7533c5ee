//! Locate the classical critical point: run the dephased ensemble on a
//! small reset-rate grid, form effective-exponent curves with a long lag,
//! and report where they cross.
//!
//!     cargo run --release --example classical_crossing [shots]

use fqcp::analysis::{crossing_estimate, effective_exponent};
use fqcp::dephased::run_ensemble;
use fqcp::model::{build_circuit, ModelParams};
use std::collections::BTreeMap;

fn main() {
    let shots: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200_000);
    let theta = 3.0 * std::f64::consts::FRAC_PI_4;
    let t_max = 300u32;
    let dt = 60u32;
    let ps = [0.185, 0.195, 0.205];
    let times = [120u32, 180, 240];

    let mut curves = Vec::new();
    for &p in &ps {
        let start = std::time::Instant::now();
        let circuit = build_circuit(&ModelParams::new(theta, p, t_max)).unwrap();
        let series = run_ensemble(&circuit, theta, p, shots, 20_240_817, false);
        let map: BTreeMap<u32, f64> = (1..=t_max)
            .map(|t| (t, series.n_right[t as usize]))
            .filter(|&(_, v)| v > 0.0)
            .collect();
        let curve = effective_exponent(&map, dt, p).unwrap();
        println!(
            "p = {:.3}: N_R(300) = {:.4} (se {:.4}), {} shots in {:.1?}",
            p,
            series.n_right[t_max as usize],
            series.n_right_se[t_max as usize],
            shots,
            start.elapsed()
        );
        for &t in &times {
            if let Some(d) = curve.at(t) {
                println!("    delta({}) = {:.4}", t, d);
            }
        }
        curves.push(curve);
    }

    match crossing_estimate(&curves, &times) {
        Ok(est) => println!(
            "crossing: p_c = {:.4} +- {:.4}, exponent = {:.4} +- {:.4}",
            est.p_c, est.p_c_scatter, est.exponent, est.exponent_scatter
        ),
        Err(e) => println!("crossing failed: {}", e),
    }
}
