//! Ensemble statistics along a detuning cut at fixed coupling. Phase
//! fluctuations are smallest, and entropy fluctuations largest, at
//! resonance.
//!
//! Run: cargo run --release --example detuning_scan [trajectories]

use std::f64::consts::PI;

use vdpsync::ensemble::{sweep, EnsembleConfig, SweepGrid};
use vdpsync::hilbert::FockSpace;
use vdpsync::lindblad::{build_vdp_model, VdpParams};

fn main() -> vdpsync::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100);
    let g = 0.01;
    let base = VdpParams::quantum_limit(2.0 * PI, 0.0, g, 20.0 * g, 0.0);
    let model = build_vdp_model(&base, &FockSpace::qubit_pair())?;
    let mut cfg = EnsembleConfig::for_model(&model, n, 30.0);
    cfg.master_seed = 13;
    let grid = SweepGrid {
        delta_omegas: (-3..=3).map(|k| 10.0 * k as f64 * g).collect(),
        couplings: vec![base.coupling],
    };
    let result = sweep(&base, &grid, Some(&cfg))?;

    println!("{:>6} {:>8} {:>11} {:>11} {:>8}", "dw/g", "|C_pi|", "Var dphi", "Var S", "mean S");
    for pt in &result.points {
        match &pt.stats {
            Some(s) => println!(
                "{:>6.0} {:>8.4} {:>11.3e} {:>11.3e} {:>8.4}",
                pt.delta_omega / g,
                pt.correlator_abs_analytic,
                s.var_delta_phi,
                s.var_entropy,
                s.mean_entropy
            ),
            None => println!("{:>6.0} failed: {}", pt.delta_omega / g, pt.error.as_deref().unwrap_or("?")),
        }
    }
    Ok(())
}
