//! Randomized invariants across the library.

use std::f64::consts::PI;

use proptest::prelude::*;
use vdpsync::ensemble::{summarize, Histogram};
use vdpsync::hilbert::{annihilation, creation, FockSpace, StateVector, C64};
use vdpsync::lindblad::{
    analytic_steady_state, build_vdp_model, liouvillian, propagate, steady_state_numeric, Damping, VdpParams,
};
use vdpsync::metrics::{correlator, entanglement_entropy, phase_difference, wrap_angle, wrap_around};
use vdpsync::noise::NoiseStream;
use vdpsync::sse::{run_trajectory, IntegratorConfig, TrajectoryRecord};

fn qubit_params() -> impl Strategy<Value = VdpParams> {
    (0.001f64..0.1, -1.0f64..1.0, 0.0f64..2.0, -PI..PI)
        .prop_map(|(g, dw, v, theta)| VdpParams::quantum_limit(2.0 * PI, dw, g, v, theta))
}

fn amplitudes(n: usize) -> impl Strategy<Value = Vec<C64>> {
    proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n)
        .prop_filter("non-zero", |v| v.iter().any(|(a, b)| a.abs() + b.abs() > 1e-3))
        .prop_map(|v| v.into_iter().map(|(a, b)| C64::new(a, b)).collect())
}

fn is_state(m: &nalgebra::DMatrix<C64>, tol: f64) -> bool {
    let herm = (m - m.adjoint()).camax() <= tol;
    let trace = (m.trace() - C64::from(1.0)).norm() <= tol;
    let (values, _) = vdpsync::hilbert::hermitian_eigen(&(m + m.adjoint()).scale(0.5));
    herm && trace && values.iter().all(|&l| l >= -tol)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn canonical_commutator_below_cutoff(levels in 2usize..6, which in 1usize..3) {
        let s = FockSpace::new(vec![levels, 3]).unwrap();
        let a = annihilation(&s, which).unwrap();
        let ad = creation(&s, which).unwrap();
        let c = a.commutator(&ad).unwrap();
        let d = s.dims()[which - 1];
        for i in 0..s.total_dim() {
            // occupation of the chosen factor
            let occ = if which == 1 { i / 3 } else { i % 3 };
            let expected = if occ + 1 < d { 1.0 } else { 1.0 - d as f64 };
            prop_assert!((c.matrix()[(i, i)].re - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn liouvillian_preserves_trace(p in qubit_params()) {
        let m = build_vdp_model(&p, &FockSpace::qubit_pair()).unwrap();
        prop_assert!(liouvillian(&m).unwrap().trace_residual() < 1e-12);
    }

    #[test]
    fn analytic_steady_state_is_a_state(p in qubit_params()) {
        let pi = analytic_steady_state(&p).unwrap();
        prop_assert!(is_state(pi.matrix(), 1e-12));
    }

    #[test]
    fn propagation_keeps_states_physical(p in qubit_params(), amps in amplitudes(4), t in 0.0f64..20.0) {
        let s = FockSpace::qubit_pair();
        let m = build_vdp_model(&p, &s).unwrap();
        let psi = StateVector::from_slice(&s, &amps).unwrap();
        let rho = propagate(&m, &vdpsync::hilbert::DensityMatrix::pure(&psi), t).unwrap();
        prop_assert!(is_state(rho.matrix(), 1e-9));
    }

    #[test]
    fn finite_truncation_steady_state_is_physical(g in 0.01f64..0.1, ratio in 2.0f64..20.0, v in 0.0f64..0.5) {
        let mut p = VdpParams::quantum_limit(1.0, 0.01, g, v, 0.0);
        p.damping = Damping::Finite { gamma_down_1: ratio * g, gamma_down_2: ratio * g };
        let m = build_vdp_model(&p, &FockSpace::new(vec![3, 3]).unwrap()).unwrap();
        let pi = steady_state_numeric(&m).unwrap();
        prop_assert!(is_state(pi.matrix(), 1e-9));
    }

    #[test]
    fn wrapping_lands_in_range(x in -100.0f64..100.0, c in -10.0f64..10.0) {
        let w = wrap_angle(x);
        prop_assert!(w > -PI && w <= PI);
        let k = ((x - w) / (2.0 * PI)).round();
        prop_assert!((x - w - 2.0 * PI * k).abs() < 1e-9);
        let a = wrap_around(x, c);
        prop_assert!(a > c - PI - 1e-12 && a <= c + PI + 1e-12);
    }

    #[test]
    fn phase_of_correlator_matches_argument(amps in amplitudes(4)) {
        let s = FockSpace::qubit_pair();
        let psi = StateVector::from_slice(&s, &amps).unwrap();
        if let Ok(c) = correlator(&psi) {
            prop_assume!(c.norm() > 1e-9);
            prop_assert!((phase_difference(c).unwrap() - c.arg()).abs() < 1e-12);
        }
    }

    #[test]
    fn product_states_carry_no_entropy(a in amplitudes(3), b in amplitudes(3)) {
        let s = FockSpace::new(vec![3, 3]).unwrap();
        let prod: Vec<C64> = a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect();
        let psi = StateVector::from_slice(&s, &prod).unwrap();
        prop_assert!(entanglement_entropy(&psi).unwrap().abs() < 1e-10);
    }

    #[test]
    fn noise_is_random_access(seed in any::<u64>(), traj in 0u64..1000, steps in proptest::collection::vec(0u64..10_000, 1..20)) {
        // one stream serves one kind of draw; the block size is fixed on first use
        let mut gauss = NoiseStream::new(seed, traj);
        let mut jumps = NoiseStream::new(seed, traj);
        let mut a = [0.0; 5];
        let mut b = [0.0; 5];
        for &s in &steps {
            gauss.wiener_increments(s, 1e-3, &mut a);
            NoiseStream::new(seed, traj).wiener_increments(s, 1e-3, &mut b);
            prop_assert_eq!(a, b);
            prop_assert_eq!(jumps.uniform(s).to_bits(), NoiseStream::new(seed, traj).uniform(s).to_bits());
        }
    }

    #[test]
    fn histogram_counts_everything_in_range(xs in proptest::collection::vec(-5.0f64..5.0, 1..300), bins in 1usize..60) {
        let h = Histogram::new(&xs, bins, -5.0, 5.0).unwrap();
        prop_assert_eq!(h.counts.iter().sum::<u64>() + h.excluded, xs.len() as u64);
    }

    #[test]
    fn summary_variance_is_non_negative(xs in proptest::collection::vec(-1e3f64..1e3, 2..200)) {
        let s = summarize(&xs, 0.0).unwrap();
        prop_assert!(s.variance >= 0.0);
        prop_assert!(s.std_error >= 0.0);
        prop_assert!((0.0..=1.0).contains(&s.tail_mass));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn trajectory_record_round_trips(p in qubit_params(), amps in amplitudes(4), seed in any::<u64>()) {
        let s = FockSpace::qubit_pair();
        let m = build_vdp_model(&p, &s).unwrap();
        let psi = StateVector::from_slice(&s, &amps).unwrap();
        let cfg = IntegratorConfig::for_model(&m);
        let interval = 10.0 * cfg.dt;
        let rec = run_trajectory(&m, &psi, 50.0 * cfg.dt, interval, &cfg, &mut NoiseStream::new(seed, 0), &mut ()).unwrap();
        let mut buf = Vec::new();
        rec.write_binary(&mut buf).unwrap();
        let back = TrajectoryRecord::read_binary(&mut buf.as_slice()).unwrap();
        // the dump holds the sampled series only
        let bits = |xs: &[f64]| xs.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(back.times()), bits(rec.times()));
        prop_assert_eq!(bits(back.x1()), bits(rec.x1()));
        prop_assert_eq!(bits(back.x2()), bits(rec.x2()));
        prop_assert_eq!(bits(back.entropy()), bits(rec.entropy()));
        prop_assert_eq!(back.correlator(), rec.correlator());
        prop_assert_eq!(back.dt().to_bits(), rec.dt().to_bits());
    }
}
