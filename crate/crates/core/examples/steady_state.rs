//! Closed-form steady state of the quantum-limit oscillators checked
//! against the null vector of the Liouvillian, plus the derived phase,
//! correlator and marginal population.
//!
//! Run: cargo run --release --example steady_state

use std::f64::consts::PI;

use vdpsync::hilbert::FockSpace;
use vdpsync::lindblad::{
    analytic_steady_state, build_vdp_model, classical_tongue, correlator_steady, marginal_excitation,
    stationarity_residual, steady_phase, steady_state_numeric, VdpParams,
};

fn main() -> vdpsync::Result<()> {
    let gamma = 0.01;
    println!("{:>6} {:>6} {:>8} {:>10} {:>8} {:>9} {:>10} {:>10}", "V/g", "dw/g", "theta", "dphi", "|C|", "p", "|diff|", "resid");
    for (v, dw, theta) in [(10.0, 0.1, 0.0), (5.0, 1.0, 0.0), (50.0, 1.0, PI / 3.0), (100.0, 30.0, PI / 2.0)] {
        let p = VdpParams::quantum_limit(2.0 * PI, dw * gamma, gamma, v * gamma, theta);
        let model = build_vdp_model(&p, &FockSpace::qubit_pair())?;
        let exact = analytic_steady_state(&p)?;
        let numeric = steady_state_numeric(&model)?;
        println!(
            "{v:>6} {dw:>6} {theta:>8.4} {:>10.6} {:>8.4} {:>9.6} {:>10.2e} {:>10.2e}",
            steady_phase(&p)?,
            correlator_steady(&p)?.norm(),
            marginal_excitation(&p)?,
            (exact.matrix() - numeric.matrix()).camax(),
            stationarity_residual(&model, &exact)?,
        );
    }
    println!("classical locking needs V >= {} g at dw = 0.1 g", classical_tongue(0.1 * gamma) / gamma);
    Ok(())
}
