//! One homodyne trajectory from the steady state: prints the indicators
//! along the way and round-trips the binary record.
//!
//! Run: cargo run --release --example single_trajectory [seed]

use std::f64::consts::PI;

use vdpsync::hilbert::FockSpace;
use vdpsync::lindblad::{build_vdp_model, steady_state_numeric, VdpParams};
use vdpsync::metrics::WindowSpec;
use vdpsync::noise::NoiseStream;
use vdpsync::sse::{run_trajectory, sample_initial, IntegratorConfig, TrajectoryRecord};

fn main() -> vdpsync::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let g = 0.01;
    let p = VdpParams::quantum_limit(2.0 * PI, 0.1 * g, g, 10.0 * g, 0.0);
    let model = build_vdp_model(&p, &FockSpace::qubit_pair())?;
    let cfg = IntegratorConfig::for_model(&model);

    let mut noise = NoiseStream::new(seed, 0);
    let psi0 = sample_initial(&steady_state_numeric(&model)?, &noise)?;
    let interval = (0.05 / cfg.dt).round() * cfg.dt;
    let record = run_trajectory(&model, &psi0, 40.0, interval, &cfg, &mut noise, &mut ())?;

    let window = WindowSpec::new(4.0, interval)?;
    let samples = record.indicator_samples(&window)?;
    println!("{:>7} {:>8} {:>9} {:>8} {:>7}", "t", "|C|", "dphi", "r", "S");
    for s in samples.iter().step_by(samples.len() / 16) {
        let show = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.4}"));
        println!(
            "{:>7.2} {:>8} {:>9} {:>8} {:>7.4}",
            s.t,
            show(s.correlator.map(|c| c.norm())),
            show(s.delta_phi),
            show(s.pearson),
            s.entropy
        );
    }

    let mut buf = Vec::new();
    record.write_binary(&mut buf)?;
    let back = TrajectoryRecord::read_binary(&mut buf.as_slice())?;
    // the dump keeps the sampled series, not the final state
    let same = back.times() == record.times() && back.entropy() == record.entropy() && back.correlator() == record.correlator();
    println!("{} samples, {} steps, {} bytes, series round trip: {same}", record.len(), record.steps(), buf.len());
    Ok(())
}
