//! Master equation for two dissipatively coupled Van der Pol oscillators:
//! model construction, Liouvillian, exact propagation and steady states.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    annihilation, creation, embed, lowering_matrix, number, CMatrix, DensityMatrix, FockSpace,
    Operator, C64,
};

mod analytic;

pub use analytic::{
    analytic_steady_state, classical_tongue, correlator_steady, marginal_excitation,
    steady_phase,
};

/// Largest Hilbert dimension for which a dense superoperator is built.
pub const MAX_LIOUVILLE_DIM: usize = 36;

/// Nonlinear damping regime.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Damping {
    /// `gamma_down / gamma_up -> infinity`: each oscillator keeps its two
    /// lowest Fock levels and nonlinear damping becomes linear decay at
    /// rate `2 gamma_up`.
    QuantumLimit,
    Finite { gamma_down_1: f64, gamma_down_2: f64 },
}

/// Physical parameters of the coupled oscillators. Rates are in inverse
/// time units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VdpParams {
    pub omega1: f64,
    pub omega2: f64,
    pub gamma_up_1: f64,
    pub gamma_up_2: f64,
    pub damping: Damping,
    /// Dissipative coupling rate `V`.
    pub coupling: f64,
    /// Phase-locking angle.
    pub theta: f64,
}

impl VdpParams {
    /// Symmetric quantum-limit parameters.
    pub fn quantum_limit(
        omega1: f64,
        delta_omega: f64,
        gamma_up: f64,
        coupling: f64,
        theta: f64,
    ) -> Self {
        Self {
            omega1,
            omega2: omega1 + delta_omega,
            gamma_up_1: gamma_up,
            gamma_up_2: gamma_up,
            damping: Damping::QuantumLimit,
            coupling,
            theta,
        }
    }

    /// `omega2 - omega1`.
    pub fn delta_omega(&self) -> f64 {
        self.omega2 - self.omega1
    }

    pub fn is_quantum_limit(&self) -> bool {
        matches!(self.damping, Damping::QuantumLimit)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |field: &'static str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    field,
                    reason: format!("{v} is not finite"),
                })
            }
        };
        let rate = |field: &'static str, v: f64| {
            finite(field, v)?;
            if v < 0.0 {
                return Err(Error::InvalidParameter {
                    field,
                    reason: format!("rate {v} is negative"),
                });
            }
            Ok(())
        };
        finite("omega1", self.omega1)?;
        finite("omega2", self.omega2)?;
        finite("theta", self.theta)?;
        rate("gamma_up_1", self.gamma_up_1)?;
        rate("gamma_up_2", self.gamma_up_2)?;
        rate("coupling", self.coupling)?;
        if let Damping::Finite {
            gamma_down_1,
            gamma_down_2,
        } = self.damping
        {
            rate("gamma_down_1", gamma_down_1)?;
            rate("gamma_down_2", gamma_down_2)?;
        }
        Ok(())
    }
}

/// Hamiltonian plus jump operators (rates absorbed).
#[derive(Clone, Debug, PartialEq)]
pub struct LindbladModel {
    hamiltonian: Operator,
    lindblad_ops: Vec<Operator>,
    space: FockSpace,
    truncated: bool,
}

impl LindbladModel {
    pub fn new(hamiltonian: Operator, lindblad_ops: Vec<Operator>) -> Result<Self> {
        if !hamiltonian.is_hermitian(1e-10) {
            return Err(Error::InvalidParameter {
                field: "hamiltonian",
                reason: "not Hermitian".into(),
            });
        }
        let space = hamiltonian.space().clone();
        for l in &lindblad_ops {
            if l.space() != &space {
                return Err(Error::DimensionMismatch {
                    expected: space.total_dim(),
                    found: l.dim(),
                });
            }
        }
        Ok(Self {
            hamiltonian,
            lindblad_ops,
            space,
            truncated: false,
        })
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.hamiltonian
    }

    pub fn lindblad_ops(&self) -> &[Operator] {
        &self.lindblad_ops
    }

    pub fn space(&self) -> &FockSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.total_dim()
    }

    /// `H - (i/2) sum_k L_k^dagger L_k`.
    pub fn effective_hamiltonian(&self) -> Operator {
        let mut m = self.hamiltonian.matrix().clone();
        for l in &self.lindblad_ops {
            m -= l.matrix().adjoint() * l.matrix() * C64::new(0.0, 0.5);
        }
        Operator::new(m, self.space.clone()).expect("same space")
    }

    /// `sum_k |L_k^dagger L_k|` in spectral norm.
    pub fn dissipation_scale(&self) -> f64 {
        self.lindblad_ops
            .iter()
            .map(|l| (&l.adjoint() * l).spectral_norm())
            .sum()
    }

    /// Largest single-quantum transition frequency of the diagonal
    /// Hamiltonian, `max_i |omega_i|` for the oscillator model.
    pub fn max_frequency(&self) -> f64 {
        let h = self.hamiltonian.matrix();
        let dims = self.space.dims();
        let mut best = 0.0f64;
        let mut stride = self.space.total_dim();
        for &d in dims {
            stride /= d;
            for idx in 0..self.space.total_dim() {
                if (idx / stride) % d + 1 < d {
                    let gap = (h[(idx + stride, idx + stride)] - h[(idx, idx)]).norm();
                    best = best.max(gap);
                }
            }
        }
        best
    }

    /// True when the model truncates a genuinely infinite Fock ladder, so
    /// the top level population must stay small.
    pub fn is_truncated(&self) -> bool {
        self.truncated
    }
}

/// Builds the coupled oscillator model on `space`.
///
/// Jump operators are ordered
/// `[sqrt(gd1) a1^2, sqrt(gu1) a1^+, sqrt(gd2) a2^2, sqrt(gu2) a2^+, sqrt(V)(a1 - e^{-i theta} a2)]`.
/// In the quantum limit `a_i -> sigma_i^-` and the nonlinear damping
/// becomes `sqrt(2 gu_i) sigma_i^-`.
///
/// The collective operator uses `e^{-i theta}` so that the steady-state
/// phase of `<a1^+ a2>` locks at `+theta`.
pub fn build_vdp_model(params: &VdpParams, space: &FockSpace) -> Result<LindbladModel> {
    params.validate()?;
    if space.n_factors() != 2 {
        return Err(Error::InvalidSpace(format!(
            "model needs two oscillators, got {} factor(s)",
            space.n_factors()
        )));
    }
    let a1 = annihilation(space, 1)?;
    let a2 = annihilation(space, 2)?;
    let ad1 = creation(space, 1)?;
    let ad2 = creation(space, 2)?;
    let sqrt = |x: f64| C64::from(x.sqrt());

    let hamiltonian = &number(space, 1)?.scale(C64::from(params.omega1))
        + &number(space, 2)?.scale(C64::from(params.omega2));

    let (l1, l3) = match params.damping {
        Damping::QuantumLimit => {
            if space.dims() != [2, 2] {
                return Err(Error::InvalidSpace(format!(
                    "quantum limit requires dims [2, 2], got {:?}",
                    space.dims()
                )));
            }
            (
                a1.scale(sqrt(2.0 * params.gamma_up_1)),
                a2.scale(sqrt(2.0 * params.gamma_up_2)),
            )
        }
        Damping::Finite {
            gamma_down_1,
            gamma_down_2,
        } => (
            (&a1 * &a1).scale(sqrt(gamma_down_1)),
            (&a2 * &a2).scale(sqrt(gamma_down_2)),
        ),
    };
    let l2 = ad1.scale(sqrt(params.gamma_up_1));
    let l4 = ad2.scale(sqrt(params.gamma_up_2));
    let phase = C64::from_polar(1.0, -params.theta);
    let l5 = (&a1 - &a2.scale(phase)).scale(sqrt(params.coupling));

    let mut model = LindbladModel::new(hamiltonian, vec![l1, l2, l3, l4, l5])?;
    model.truncated = !params.is_quantum_limit();
    Ok(model)
}

/// Uncoupled single-oscillator pieces used by tests and examples: a
/// two-level system decaying at rate `gamma`.
pub fn two_level_decay(gamma: f64) -> Result<LindbladModel> {
    let space = FockSpace::new(vec![2])?;
    let sm = embed(&space, 1, &lowering_matrix(2))?;
    LindbladModel::new(
        Operator::zeros(&space),
        vec![sm.scale(C64::from(gamma.sqrt()))],
    )
}

/// Matrix acting on column-stacked density matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct Superoperator {
    matrix: CMatrix,
    space: FockSpace,
}

impl Superoperator {
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn space(&self) -> &FockSpace {
        &self.space
    }

    /// `vec(rho)` with column stacking.
    pub fn vectorize(rho: &CMatrix) -> nalgebra::DVector<C64> {
        nalgebra::DVector::from_column_slice(rho.as_slice())
    }

    pub fn unvectorize(v: &nalgebra::DVector<C64>, d: usize) -> CMatrix {
        CMatrix::from_column_slice(d, d, v.as_slice())
    }

    /// `L(rho)`.
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let d = self.space.total_dim();
        Self::unvectorize(&(&self.matrix * Self::vectorize(rho)), d)
    }

    /// Max entry of `vec(1)^T M`; zero for trace-preserving generators.
    pub fn trace_residual(&self) -> f64 {
        let d = self.space.total_dim();
        let mut worst = 0.0f64;
        for col in 0..d * d {
            let s: C64 = (0..d).map(|i| self.matrix[(i * d + i, col)]).sum();
            worst = worst.max(s.norm());
        }
        worst
    }
}

/// Dense Liouvillian: `vec(L rho) = M vec(rho)` with column stacking, so
/// `vec(A X B) = (B^T kron A) vec(X)`.
pub fn liouvillian(model: &LindbladModel) -> Result<Superoperator> {
    let d = model.dim();
    if d > MAX_LIOUVILLE_DIM {
        return Err(Error::DimensionOverflow {
            total: d * d,
            max: MAX_LIOUVILLE_DIM * MAX_LIOUVILLE_DIM,
        });
    }
    let id = CMatrix::identity(d, d);
    let h = model.hamiltonian().matrix();
    let minus_i = C64::new(0.0, -1.0);
    let mut m = (id.kronecker(h) - h.transpose().kronecker(&id)) * minus_i;
    let half = C64::from(0.5);
    for l in model.lindblad_ops() {
        let l = l.matrix();
        let ldl = l.adjoint() * l;
        m += l.conjugate().kronecker(l);
        m -= id.kronecker(&ldl) * half;
        m -= ldl.transpose().kronecker(&id) * half;
    }
    Ok(Superoperator {
        matrix: m,
        space: model.space().clone(),
    })
}

/// Exact evolution `rho(t) = exp(L t) rho0`.
pub fn propagate(model: &LindbladModel, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    if rho0.space() != model.space() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: rho0.dim(),
        });
    }
    if t == 0.0 {
        return Ok(rho0.clone());
    }
    let sup = liouvillian(model)?;
    let prop = propagator(&sup, t);
    let v = &prop * Superoperator::vectorize(rho0.matrix());
    DensityMatrix::unchecked(
        Superoperator::unvectorize(&v, model.dim()),
        model.space().clone(),
    )
}

/// `exp(M t)`; long times are split into unit-norm chunks combined by
/// repeated squaring.
pub(crate) fn propagator(sup: &Superoperator, t: f64) -> CMatrix {
    let scaled = sup.matrix() * C64::from(t);
    let norm = scaled.norm();
    if norm <= 64.0 {
        return scaled.exp();
    }
    let halvings = (norm / 64.0).log2().ceil() as u32;
    let mut p = (scaled / C64::from(2f64.powi(halvings as i32))).exp();
    for _ in 0..halvings {
        p = &p * &p;
    }
    p
}

/// Unique stationary state from the smallest singular vector of the
/// Liouvillian.
pub fn steady_state_numeric(model: &LindbladModel) -> Result<DensityMatrix> {
    let sup = liouvillian(model)?;
    let d = model.dim();
    let svd = sup.matrix().clone().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let sv = &svd.singular_values;
    let n = sv.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| sv[a].total_cmp(&sv[b]));
    let largest = sv[order[n - 1]];
    let second = sv[order[1]];
    let threshold = 1e-8 * largest;
    if second <= threshold {
        return Err(Error::DegenerateNullSpace { second, threshold });
    }
    let null = v_t.row(order[0]).adjoint();
    let mut rho = Superoperator::unvectorize(&null, d);
    let tr = rho.trace();
    rho /= tr;
    let rho = (&rho + rho.adjoint()) * C64::from(0.5);
    DensityMatrix::with_tolerance(rho, model.space().clone(), 1e-9)
}

/// `|| L(rho) ||_F`.
pub fn stationarity_residual(model: &LindbladModel, rho: &DensityMatrix) -> Result<f64> {
    Ok(liouvillian(model)?.apply(rho.matrix()).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{StateVector, Tensor};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn fig1() -> VdpParams {
        VdpParams::quantum_limit(2.0 * PI, 0.001, 0.01, 0.1, 0.0)
    }

    #[test]
    fn uncoupled_model_has_zero_collective_operator() {
        let p = VdpParams::quantum_limit(1.0, 0.0, 0.01, 0.0, 0.0);
        let m = build_vdp_model(&p, &FockSpace::qubit_pair()).unwrap();
        assert!(m.lindblad_ops()[4].is_zero());
    }

    #[test]
    fn collective_operator_matches_hand_matrix() {
        let p = VdpParams::quantum_limit(1.0, 0.01, 0.01, 0.5, 0.0);
        let m = build_vdp_model(&p, &FockSpace::qubit_pair()).unwrap();
        // basis |00>,|01>,|10>,|11>; s1- = |0x><1x|, s2- = |x0><x1|
        let r = 0.5f64.sqrt();
        let mut expected = CMatrix::zeros(4, 4);
        expected[(0, 2)] = C64::from(r); // s1-: |10> -> |00>
        expected[(1, 3)] = C64::from(r); // s1-: |11> -> |01>
        expected[(0, 1)] = C64::from(-r); // -s2-: |01> -> |00>
        expected[(2, 3)] = C64::from(-r); // -s2-: |11> -> |10>
        assert!((m.lindblad_ops()[4].matrix() - expected).norm() < 1e-15);
        // local decay at 2 gamma_up
        assert_abs_diff_eq!(m.lindblad_ops()[0].matrix()[(0, 2)].re, 0.02f64.sqrt());
    }

    #[test]
    fn finite_damping_two_photon_loss() {
        let p = VdpParams {
            damping: Damping::Finite {
                gamma_down_1: 10.0,
                gamma_down_2: 10.0,
            },
            ..VdpParams::quantum_limit(1.0, 0.0, 0.01, 0.1, 0.0)
        };
        let s = FockSpace::new(vec![4, 4]).unwrap();
        let m = build_vdp_model(&p, &s).unwrap();
        let l1 = m.lindblad_ops()[0].matrix();
        for row in 0..16 {
            for col in 0..16 {
                let (r1, r2, c1, c2) = (row / 4, row % 4, col / 4, col % 4);
                let expected = if r2 == c2 && c1 >= 2 && r1 == c1 - 2 {
                    ((c1 * (c1 - 1)) as f64).sqrt() * 10f64.sqrt()
                } else {
                    0.0
                };
                assert_abs_diff_eq!(l1[(row, col)].re, expected, epsilon = 1e-13);
                assert_eq!(l1[(row, col)].im, 0.0);
            }
        }
    }

    #[test]
    fn build_errors() {
        let mut p = fig1();
        let big = FockSpace::new(vec![3, 3]).unwrap();
        assert!(build_vdp_model(&p, &big).is_err());
        p.coupling = -1.0;
        let err = build_vdp_model(&p, &FockSpace::qubit_pair()).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { field: "coupling", .. }));
    }

    #[test]
    fn hamiltonian_only_liouvillian() {
        let s = FockSpace::qubit_pair();
        let h = &number(&s, 1).unwrap() + &number(&s, 2).unwrap().scale(C64::from(2.0));
        let model = LindbladModel::new(h.clone(), vec![]).unwrap();
        let sup = liouvillian(&model).unwrap();
        let psi = StateVector::basis(&s, &[0, 0]).unwrap();
        let out = sup.apply(&psi.projector());
        assert!(out.norm() < 1e-15);
        // generic rho: -i[H, rho]
        let rho = CMatrix::from_fn(4, 4, |i, j| C64::new((i + 2 * j) as f64, (i as f64) - (j as f64)));
        let expected = (h.matrix() * &rho - &rho * h.matrix()) * C64::new(0.0, -1.0);
        assert!((sup.apply(&rho) - expected).norm() < 1e-12);
        assert!(matches!(
            steady_state_numeric(&model),
            Err(Error::DegenerateNullSpace { .. })
        ));
    }

    #[test]
    fn dissipator_matches_direct_formula() {
        let model = build_vdp_model(&fig1(), &FockSpace::qubit_pair()).unwrap();
        let sup = liouvillian(&model).unwrap();
        let rho = CMatrix::from_fn(4, 4, |i, j| C64::new(1.0 / (1 + i + j) as f64, 0.1 * (i as f64 - j as f64)));
        let h = model.hamiltonian().matrix();
        let mut expected = (h * &rho - &rho * h) * C64::new(0.0, -1.0);
        for l in model.lindblad_ops() {
            let l = l.matrix();
            let ldl = l.adjoint() * l;
            expected += l * &rho * l.adjoint() - (&ldl * &rho + &rho * &ldl) * C64::from(0.5);
        }
        assert!((sup.apply(&rho) - expected).norm() < 1e-14);
        assert!(sup.trace_residual() < 1e-12);
    }

    #[test]
    fn two_level_decay_closed_form() {
        let gamma = 0.7;
        let model = two_level_decay(gamma).unwrap();
        let s = model.space().clone();
        let rho0 = DensityMatrix::pure(&StateVector::basis(&s, &[1]).unwrap());
        for t in [0.0, 0.3, 1.0 / gamma, 4.0] {
            let rho = propagate(&model, &rho0, t).unwrap();
            assert_abs_diff_eq!(rho.matrix()[(1, 1)].re, (-gamma * t).exp(), epsilon = 1e-12);
        }
        let rho = propagate(&model, &rho0, 1.0 / gamma).unwrap();
        assert_abs_diff_eq!(rho.matrix()[(1, 1)].re, 0.36787944117144233, epsilon = 1e-12);
    }

    #[test]
    fn propagate_zero_and_negative_time() {
        let model = build_vdp_model(&fig1(), &FockSpace::qubit_pair()).unwrap();
        let rho0 = DensityMatrix::maximally_mixed(model.space());
        assert_eq!(propagate(&model, &rho0, 0.0).unwrap(), rho0);
        assert!(matches!(propagate(&model, &rho0, -1.0), Err(Error::NegativeTime(_))));
    }

    #[test]
    fn long_time_propagation_reaches_steady_state() {
        let p = VdpParams::quantum_limit(2.0 * PI, 0.01, 0.01, 0.5, 0.0);
        let model = build_vdp_model(&p, &FockSpace::qubit_pair()).unwrap();
        let s = model.space().clone();
        let psi = StateVector::basis(&s, &[0, 0]).unwrap();
        let rho = propagate(&model, &DensityMatrix::pure(&psi), 50.0 / 0.01).unwrap();
        let pi = steady_state_numeric(&model).unwrap();
        assert!(rho.trace_distance(&pi).unwrap() < 1e-8);
    }

    #[test]
    fn uncoupled_steady_state_is_product_of_two_to_one_marginals() {
        let p = VdpParams::quantum_limit(1.0, 0.3, 0.01, 0.0, 0.0);
        let model = build_vdp_model(&p, &FockSpace::qubit_pair()).unwrap();
        let pi = steady_state_numeric(&model).unwrap();
        let q = FockSpace::new(vec![2]).unwrap();
        let local = DensityMatrix::new(
            CMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&[
                C64::from(2.0 / 3.0),
                C64::from(1.0 / 3.0),
            ])),
            q.clone(),
        )
        .unwrap();
        let to_op = |r: &DensityMatrix| Operator::new(r.matrix().clone(), q.clone()).unwrap();
        let product = to_op(&local).tensor(&to_op(&local)).unwrap();
        assert!((pi.matrix() - product.matrix()).camax() < 1e-10);
    }

    #[test]
    fn frequency_and_dissipation_scales() {
        let model = build_vdp_model(&fig1(), &FockSpace::qubit_pair()).unwrap();
        assert_abs_diff_eq!(model.max_frequency(), 2.0 * PI + 0.001, epsilon = 1e-12);
        // 2g + g per oscillator plus |L5^+ L5| = 2V
        assert_abs_diff_eq!(model.dissipation_scale(), 6.0 * 0.01 + 2.0 * 0.1, epsilon = 1e-12);
        assert!(!model.is_truncated());
    }
}
