//! Stronger coupling widens the upper tail of the trajectory-averaged
//! entanglement entropy over short windows. Compares P(S > 0.5) at two
//! couplings with a one-sided two-proportion test.
//!
//! Run: cargo run --release --example entanglement_tails [trajectories]

use std::f64::consts::PI;

use vdpsync::ensemble::{run_ensemble, two_proportion_z, EnsembleConfig, ENTROPY_TAIL};
use vdpsync::hilbert::FockSpace;
use vdpsync::lindblad::{build_vdp_model, VdpParams};

fn main() -> vdpsync::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(400);
    let g = 0.01;
    let mut tails = Vec::new();
    for v in [5.0, 50.0] {
        let p = VdpParams::quantum_limit(2.0 * PI, g, g, v * g, 0.0);
        let model = build_vdp_model(&p, &FockSpace::qubit_pair())?;
        // the tail only survives short averaging windows
        let mut cfg = EnsembleConfig::for_model(&model, n, 10.0);
        cfg.master_seed = 5;
        let r = run_ensemble(&model, &p, &cfg)?;
        let hits = r.entropy().iter().filter(|&&s| s > ENTROPY_TAIL).count() as u64;
        println!("V = {v:>4} g: P(S > {ENTROPY_TAIL}) = {hits}/{}, mean S {:.3}", r.n_ok(), r.stats.entropy.mean);
        tails.push((hits, r.n_ok() as u64));
    }
    let z = two_proportion_z(tails[1].0, tails[1].1, tails[0].0, tails[0].1);
    println!("z = {z:.2}");
    Ok(())
}
