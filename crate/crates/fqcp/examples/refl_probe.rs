use fqcp::dephased::run_ensemble;
use fqcp::model::{build_circuit, ModelParams};

fn main() {
    let theta = 3.0 * std::f64::consts::FRAC_PI_4;
    for p in [0.0f64, 0.2] {
        let t = 8u32;
        let shots = 400_000u64;
        let c = build_circuit(&ModelParams::new(theta, p, t)).unwrap();
        let s = run_ensemble(&c, theta, p, shots, 1, false);
        println!("p themes = {}", p);
        for tt in [4u32, 8] {
            let mut line = format!("t={tt}: ");
            for r in 0..=(2 * tt as i32) {
                let a = s.density_at(r, tt);
                let b = s.density_at(-r, tt);
                let sigma = ((a * (1.0 - a) + b * (1.0 - b)) / shots as f64).sqrt().max(1e-9);
                let z = (a - b) / sigma;
                line.push_str(&format!("r{:+}: {:.4}/{:.4} z={:+.1}  ", r, a, b, z));
            }
            println!("{line}");
        }
    }
}
