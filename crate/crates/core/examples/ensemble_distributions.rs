//! Distributions of the time-averaged indicators over an ensemble, drawn
//! as text histograms.
//!
//! Run: cargo run --release --example ensemble_distributions [V/gamma] [trajectories]

use std::f64::consts::PI;

use vdpsync::ensemble::{run_ensemble, EnsembleConfig, Histogram};
use vdpsync::hilbert::FockSpace;
use vdpsync::lindblad::{build_vdp_model, VdpParams};

fn bars(name: &str, h: &Histogram) {
    println!("{name}");
    let peak = h.counts.iter().copied().max().unwrap_or(1).max(1) as f64;
    for (c, n) in h.centers().iter().zip(&h.counts).step_by(2) {
        println!("{c:>8.3} | {}", "#".repeat((40.0 * *n as f64 / peak).round() as usize));
    }
}

fn main() -> vdpsync::Result<()> {
    let mut args = std::env::args().skip(1);
    let v: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(20.0);
    let n: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(200);
    let g = 0.01;
    let p = VdpParams::quantum_limit(2.0 * PI, g, g, v * g, 0.0);
    let model = build_vdp_model(&p, &FockSpace::qubit_pair())?;
    let mut cfg = EnsembleConfig::for_model(&model, n, 50.0);
    cfg.master_seed = 3;
    let r = run_ensemble(&model, &p, &cfg)?;

    bars("phase difference", &r.histograms.delta_phi);
    bars("|C|", &r.histograms.correlator_abs);
    bars("entropy", &r.histograms.entropy);
    let s = &r.stats;
    println!(
        "n_ok {} | Var dphi {:.3e} | Var |C| {:.3e} | mean r {:.3} | mean S {:.3}",
        r.n_ok(),
        s.delta_phi.variance,
        s.correlator_abs.variance,
        s.pearson.mean,
        s.entropy.mean
    );
    Ok(())
}
