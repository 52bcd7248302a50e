//! Steady-state Arnold tongue: |C| over detuning and coupling from the
//! closed form, with the classical boundary V = 2|dw| marked.
//!
//! Run: cargo run --release --example arnold_tongue

use std::f64::consts::PI;

use vdpsync::ensemble::{sweep, SweepGrid};
use vdpsync::lindblad::VdpParams;

const SHADES: &[char] = &[' ', '.', ':', '-', '=', '+', '*', '#', '%', '@'];

fn main() -> vdpsync::Result<()> {
    let g = 0.01;
    let base = VdpParams::quantum_limit(2.0 * PI, 0.0, g, 0.0, 0.0);
    let grid = SweepGrid {
        delta_omegas: (-30..=30).step_by(2).map(|d| d as f64 * g).collect(),
        couplings: (0..=20).map(|v| 5.0 * v as f64 * g).collect(),
    };
    let map = sweep(&base, &grid, None)?;

    // coupling on the vertical axis, strongest at the top
    for j in (0..grid.couplings.len()).rev() {
        let row: String = (0..grid.delta_omegas.len())
            .map(|i| {
                let pt = map.point(i, j);
                if (pt.coupling - pt.tongue_coupling).abs() < 2.5 * g {
                    '|'
                } else {
                    SHADES[((pt.correlator_abs_analytic * 9.999) as usize).min(9)]
                }
            })
            .collect();
        println!("{:>5.0} {row}", grid.couplings[j] / g);
    }
    println!("      dw/g from -30 to 30; '|' marks V = 2|dw|");
    Ok(())
}
