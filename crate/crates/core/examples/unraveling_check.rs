//! Averaging conditioned projectors over trajectories recovers the master
//! equation. Both unravelings are compared with exact propagation; the
//! distance should fall roughly as 1/sqrt(n).
//!
//! Run: cargo run --release --example unraveling_check

use std::f64::consts::PI;

use vdpsync::ensemble::{ensemble_mean_state, InitialCondition, MeanStateConfig};
use vdpsync::hilbert::{trace_distance, FockSpace};
use vdpsync::lindblad::{build_vdp_model, propagate, VdpParams};
use vdpsync::sse::{IntegratorConfig, Unraveling};

fn main() -> vdpsync::Result<()> {
    let g = 0.01;
    let p = VdpParams::quantum_limit(2.0 * PI, 0.1 * g, g, 10.0 * g, 0.0);
    let model = build_vdp_model(&p, &FockSpace::qubit_pair())?;
    let rho0 = InitialCondition::EqualSuperposition.density(&model)?;
    let t = 5.0;

    for unraveling in [Unraveling::Diffusive, Unraveling::Jump] {
        for n in [100u64, 400, 1600] {
            let cfg = MeanStateConfig {
                master_seed: 11,
                trajectories: 0..n,
                integrator: IntegratorConfig::for_model(&model),
                unraveling,
            };
            // compare at the step-grid time, not the requested one
            let exact = propagate(&model, &rho0, cfg.grid_time(t))?;
            let mean = &ensemble_mean_state(&model, &rho0, &[t], &cfg)?[0];
            println!("{unraveling:?} n={n:>5}: D = {:.4}", trace_distance(mean.matrix(), exact.matrix()));
        }
    }
    Ok(())
}
