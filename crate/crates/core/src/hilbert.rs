//! Dense complex linear algebra on truncated tensor-product Fock spaces.
//!
//! Composite indices are row-major: oscillator 1 is the slowest-varying
//! factor, so `|n1 n2>` sits at index `n1 * d2 + n2`.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Default absolute tolerance for structural checks.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Default ceiling on the composite Hilbert-space dimension.
pub const MAX_TOTAL_DIM: usize = 1024;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Ordered list of per-oscillator Fock truncations.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FockSpace {
    dims: Vec<usize>,
}

impl FockSpace {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        Self::with_max(dims, MAX_TOTAL_DIM)
    }

    pub fn with_max(dims: Vec<usize>, max_total: usize) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidSpace("no factors".into()));
        }
        if let Some(d) = dims.iter().find(|&&d| d < 2) {
            return Err(Error::InvalidSpace(format!("factor dimension {d} < 2")));
        }
        let total = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .unwrap_or(usize::MAX);
        if total > max_total {
            return Err(Error::DimensionOverflow {
                total,
                max: max_total,
            });
        }
        Ok(Self { dims })
    }

    /// Two two-level factors: the quantum-limit spin pair.
    pub fn qubit_pair() -> Self {
        Self { dims: vec![2, 2] }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn n_factors(&self) -> usize {
        self.dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    /// Dimension of one factor, 1-based.
    pub fn factor_dim(&self, which: usize) -> Result<usize> {
        self.check_factor(which)?;
        Ok(self.dims[which - 1])
    }

    pub(crate) fn check_factor(&self, which: usize) -> Result<()> {
        if which == 0 || which > self.dims.len() {
            return Err(Error::InvalidOscillator {
                index: which,
                factors: self.dims.len(),
            });
        }
        Ok(())
    }

    fn concat(&self, other: &FockSpace) -> Result<FockSpace> {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        FockSpace::new(dims)
    }

    /// Composite index for a list of per-factor occupations.
    pub fn index_of(&self, occupations: &[usize]) -> Result<usize> {
        if occupations.len() != self.dims.len() {
            return Err(Error::DimensionMismatch {
                expected: self.dims.len(),
                found: occupations.len(),
            });
        }
        let mut idx = 0;
        for (&n, &d) in occupations.iter().zip(&self.dims) {
            if n >= d {
                return Err(Error::InvalidSpace(format!("occupation {n} >= dimension {d}")));
            }
            idx = idx * d + n;
        }
        Ok(idx)
    }
}

/// Dense operator on a [`FockSpace`].
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    matrix: CMatrix,
    space: FockSpace,
}

impl Operator {
    pub fn new(matrix: CMatrix, space: FockSpace) -> Result<Self> {
        let d = space.total_dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(Self { matrix, space })
    }

    pub fn identity(space: &FockSpace) -> Self {
        let d = space.total_dim();
        Self {
            matrix: CMatrix::identity(d, d),
            space: space.clone(),
        }
    }

    pub fn zeros(space: &FockSpace) -> Self {
        let d = space.total_dim();
        Self {
            matrix: CMatrix::zeros(d, d),
            space: space.clone(),
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn space(&self) -> &FockSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint(),
            space: self.space.clone(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            matrix: &self.matrix * s,
            space: self.space.clone(),
        }
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (&self.matrix - self.matrix.adjoint()).norm() <= tol
    }

    pub fn is_zero(&self) -> bool {
        self.matrix.iter().all(|z| *z == ZERO)
    }

    /// `A|psi>` without renormalization.
    pub fn apply(&self, psi: &StateVector) -> Result<CVector> {
        check_same(&self.space, &psi.space)?;
        Ok(&self.matrix * &psi.amplitudes)
    }

    pub fn commutator(&self, other: &Operator) -> Result<Operator> {
        check_same(&self.space, &other.space)?;
        Ok(Self {
            matrix: &self.matrix * &other.matrix - &other.matrix * &self.matrix,
            space: self.space.clone(),
        })
    }

    /// Spectral (2-)norm.
    pub fn spectral_norm(&self) -> f64 {
        self.matrix.clone().singular_values().max()
    }
}

fn check_same(a: &FockSpace, b: &FockSpace) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected: a.total_dim(),
            found: b.total_dim(),
        });
    }
    Ok(())
}

impl<'a> Mul<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn mul(self, rhs: &'a Operator) -> Operator {
        assert_eq!(self.space, rhs.space, "operator spaces differ");
        Operator {
            matrix: &self.matrix * &rhs.matrix,
            space: self.space.clone(),
        }
    }
}

impl<'a> Add<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn add(self, rhs: &'a Operator) -> Operator {
        assert_eq!(self.space, rhs.space, "operator spaces differ");
        Operator {
            matrix: &self.matrix + &rhs.matrix,
            space: self.space.clone(),
        }
    }
}

impl<'a> Sub<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn sub(self, rhs: &'a Operator) -> Operator {
        assert_eq!(self.space, rhs.space, "operator spaces differ");
        Operator {
            matrix: &self.matrix - &rhs.matrix,
            space: self.space.clone(),
        }
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        self.scale(-ONE)
    }
}

/// Unit-norm pure state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amplitudes: CVector,
    space: FockSpace,
}

impl StateVector {
    /// Builds a state from raw amplitudes, normalizing them.
    pub fn from_amplitudes(space: &FockSpace, amplitudes: CVector) -> Result<Self> {
        if amplitudes.len() != space.total_dim() {
            return Err(Error::DimensionMismatch {
                expected: space.total_dim(),
                found: amplitudes.len(),
            });
        }
        let norm = amplitudes.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::ZeroNorm);
        }
        Ok(Self {
            amplitudes: amplitudes / C64::from(norm),
            space: space.clone(),
        })
    }

    pub fn from_slice(space: &FockSpace, amplitudes: &[C64]) -> Result<Self> {
        Self::from_amplitudes(space, CVector::from_column_slice(amplitudes))
    }

    /// Fock basis state `|n1 n2 ...>`.
    pub fn basis(space: &FockSpace, occupations: &[usize]) -> Result<Self> {
        let idx = space.index_of(occupations)?;
        let mut amps = CVector::zeros(space.total_dim());
        amps[idx] = ONE;
        Ok(Self {
            amplitudes: amps,
            space: space.clone(),
        })
    }

    pub(crate) fn from_normalized(space: FockSpace, amplitudes: CVector) -> Self {
        debug_assert!((amplitudes.norm() - 1.0).abs() < 1e-9);
        Self { amplitudes, space }
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn space(&self) -> &FockSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        check_same(&self.space, &other.space)?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// `|psi><psi|`.
    pub fn projector(&self) -> CMatrix {
        &self.amplitudes * self.amplitudes.adjoint()
    }
}

/// Kronecker product; factor lists are concatenated.
pub trait Tensor: Sized {
    fn tensor(&self, other: &Self) -> Result<Self>;
}

impl Tensor for Operator {
    fn tensor(&self, other: &Self) -> Result<Self> {
        let space = self.space.concat(&other.space)?;
        Ok(Operator {
            matrix: self.matrix.kronecker(&other.matrix),
            space,
        })
    }
}

impl Tensor for StateVector {
    fn tensor(&self, other: &Self) -> Result<Self> {
        let space = self.space.concat(&other.space)?;
        Ok(StateVector {
            amplitudes: self.amplitudes.kronecker(&other.amplitudes),
            space,
        })
    }
}

pub fn tensor<T: Tensor>(a: &T, b: &T) -> Result<T> {
    a.tensor(b)
}

/// Single-mode lowering matrix of dimension `d`: `<n-1|a|n> = sqrt(n)`.
pub fn lowering_matrix(d: usize) -> CMatrix {
    let mut m = CMatrix::zeros(d, d);
    for n in 1..d {
        m[(n - 1, n)] = C64::from((n as f64).sqrt());
    }
    m
}

/// Embeds a single-factor matrix at position `which` (1-based).
pub fn embed(space: &FockSpace, which: usize, local: &CMatrix) -> Result<Operator> {
    let d = space.factor_dim(which)?;
    if local.nrows() != d || local.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: local.nrows(),
        });
    }
    let mut m = CMatrix::identity(1, 1);
    for (i, &di) in space.dims().iter().enumerate() {
        if i + 1 == which {
            m = m.kronecker(local);
        } else {
            m = m.kronecker(&CMatrix::identity(di, di));
        }
    }
    Operator::new(m, space.clone())
}

/// Lowering operator `a_which` embedded in the full space.
pub fn annihilation(space: &FockSpace, which: usize) -> Result<Operator> {
    let d = space.factor_dim(which)?;
    embed(space, which, &lowering_matrix(d))
}

pub fn creation(space: &FockSpace, which: usize) -> Result<Operator> {
    Ok(annihilation(space, which)?.adjoint())
}

pub fn number(space: &FockSpace, which: usize) -> Result<Operator> {
    let a = annihilation(space, which)?;
    Ok(&a.adjoint() * &a)
}

/// Position quadrature `x = (a + a^dagger)/sqrt(2)`.
pub fn position(space: &FockSpace, which: usize) -> Result<Operator> {
    let a = annihilation(space, which)?;
    Ok((&a + &a.adjoint()).scale(C64::from(std::f64::consts::FRAC_1_SQRT_2)))
}

/// `<psi|A|psi>`.
pub fn expectation(a: &Operator, psi: &StateVector) -> Result<C64> {
    check_same(&a.space, &psi.space)?;
    Ok(psi.amplitudes.dotc(&(&a.matrix * &psi.amplitudes)))
}

/// Density matrix on a (sub)space.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
    space: FockSpace,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity at `DEFAULT_TOL`.
    pub fn new(matrix: CMatrix, space: FockSpace) -> Result<Self> {
        Self::with_tolerance(matrix, space, DEFAULT_TOL)
    }

    pub fn with_tolerance(matrix: CMatrix, space: FockSpace, tol: f64) -> Result<Self> {
        let rho = Self::unchecked(matrix, space)?;
        rho.validate(tol)?;
        Ok(rho)
    }

    /// Shape-checked but not validated. Used for intermediate results
    /// such as Monte Carlo estimates.
    pub fn unchecked(matrix: CMatrix, space: FockSpace) -> Result<Self> {
        let d = space.total_dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: matrix.nrows(),
            });
        }
        Ok(Self { matrix, space })
    }

    pub fn pure(psi: &StateVector) -> Self {
        Self {
            matrix: psi.projector(),
            space: psi.space.clone(),
        }
    }

    pub fn maximally_mixed(space: &FockSpace) -> Self {
        let d = space.total_dim();
        Self {
            matrix: CMatrix::identity(d, d) / C64::from(d as f64),
            space: space.clone(),
        }
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        let herm = (&self.matrix - self.matrix.adjoint()).norm();
        if herm > tol {
            return Err(Error::NotDensityMatrix(format!("non-Hermitian by {herm:e}")));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > tol {
            return Err(Error::NotDensityMatrix(format!("trace {tr}")));
        }
        let min = self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
        if min < -tol {
            return Err(Error::NotDensityMatrix(format!("eigenvalue {min:e}")));
        }
        Ok(())
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn space(&self) -> &FockSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn expectation(&self, a: &Operator) -> Result<C64> {
        check_same(&self.space, a.space())?;
        Ok((&a.matrix * &self.matrix).trace())
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigen(&self.matrix).0
    }

    /// Eigenvalues (ascending) and matching orthonormal eigenvectors.
    pub fn eigen(&self) -> (Vec<f64>, Vec<CVector>) {
        hermitian_eigen(&self.matrix)
    }

    /// Half the trace norm of the difference.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        check_same(&self.space, &other.space)?;
        Ok(trace_distance(&self.matrix, &other.matrix))
    }

    /// Partial trace keeping factor `keep` (1-based).
    pub fn reduce(&self, keep: usize) -> Result<DensityMatrix> {
        let (dk, blocks) = split_indices(&self.space, keep)?;
        let mut out = CMatrix::zeros(dk, dk);
        for rest in &blocks {
            for i in 0..dk {
                for j in 0..dk {
                    out[(i, j)] += self.matrix[(rest[i], rest[j])];
                }
            }
        }
        let space = FockSpace::new(vec![dk])?;
        Ok(DensityMatrix { matrix: out, space })
    }
}

/// Ascending eigenpairs of the Hermitian part of `m`.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, Vec<CVector>) {
    let h = (m + m.adjoint()) * C64::from(0.5);
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order
        .iter()
        .map(|&i| eig.eigenvectors.column(i).into_owned())
        .collect();
    (values, vectors)
}

pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    let diff = a - b;
    0.5 * hermitian_eigen(&diff).0.iter().map(|l| l.abs()).sum::<f64>()
}

/// For factor `keep`, returns its dimension and, for every assignment of
/// the other factors, the composite indices of the `keep` values in order.
fn split_indices(space: &FockSpace, keep: usize) -> Result<(usize, Vec<Vec<usize>>)> {
    space.check_factor(keep)?;
    if space.n_factors() < 2 {
        return Err(Error::InvalidSpace("partial trace needs at least two factors".into()));
    }
    let dims = space.dims();
    let dk = dims[keep - 1];
    let stride: usize = dims[keep..].iter().product();
    let total = space.total_dim();
    let mut blocks = Vec::with_capacity(total / dk);
    for idx in 0..total {
        if (idx / stride).is_multiple_of(dk) {
            blocks.push((0..dk).map(|k| idx + k * stride).collect());
        }
    }
    Ok((dk, blocks))
}

/// `Tr_others |psi><psi|`, keeping factor `keep` (1-based).
pub fn reduced_density(psi: &StateVector, keep: usize) -> Result<DensityMatrix> {
    let (dk, blocks) = split_indices(&psi.space, keep)?;
    let amps = &psi.amplitudes;
    let mut out = CMatrix::zeros(dk, dk);
    for rest in &blocks {
        for i in 0..dk {
            let ai = amps[rest[i]];
            for j in 0..dk {
                out[(i, j)] += ai * amps[rest[j]].conj();
            }
        }
    }
    Ok(DensityMatrix {
        matrix: out,
        space: FockSpace::new(vec![dk])?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn lowering_on_qubit_pair() {
        let s = FockSpace::qubit_pair();
        let a1 = annihilation(&s, 1).unwrap();
        // <0x|a1|1x> = 1
        for x in 0..2 {
            let bra = s.index_of(&[0, x]).unwrap();
            let ket = s.index_of(&[1, x]).unwrap();
            assert_eq!(a1.matrix()[(bra, ket)], ONE);
        }
        assert_eq!(a1.matrix().iter().filter(|z| **z != ZERO).count(), 2);
    }

    #[test]
    fn ladder_entry() {
        let s = FockSpace::new(vec![3]).unwrap();
        let a = annihilation(&s, 1).unwrap();
        assert_abs_diff_eq!(a.matrix()[(1, 2)].re, 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn second_factor_matches_index_oracle() {
        let s = FockSpace::new(vec![4, 4]).unwrap();
        let a2 = annihilation(&s, 2).unwrap();
        for row in 0..16 {
            for col in 0..16 {
                let (r1, r2) = (row / 4, row % 4);
                let (c1, c2) = (col / 4, col % 4);
                let expected = if r1 == c1 && c2 >= 1 && r2 == c2 - 1 {
                    (c2 as f64).sqrt()
                } else {
                    0.0
                };
                assert_eq!(a2.matrix()[(row, col)], c(expected));
            }
        }
    }

    #[test]
    fn bad_oscillator_index() {
        let s = FockSpace::qubit_pair();
        assert!(matches!(annihilation(&s, 0), Err(Error::InvalidOscillator { .. })));
        assert!(matches!(annihilation(&s, 3), Err(Error::InvalidOscillator { .. })));
    }

    #[test]
    fn space_validation() {
        assert!(FockSpace::new(vec![1, 2]).is_err());
        assert!(FockSpace::new(vec![]).is_err());
        assert!(matches!(
            FockSpace::new(vec![40, 40]),
            Err(Error::DimensionOverflow { total: 1600, .. })
        ));
    }

    #[test]
    fn tensor_basics() {
        let q = FockSpace::new(vec![2]).unwrap();
        let s0 = StateVector::basis(&q, &[0]).unwrap();
        let s1 = StateVector::basis(&q, &[1]).unwrap();
        let p = s0.tensor(&s1).unwrap();
        assert_eq!(p.amplitudes()[1], ONE);
        assert_eq!(p.space().dims(), &[2, 2]);

        let id = Operator::identity(&q);
        let id4 = id.tensor(&id).unwrap();
        assert_eq!(id4, Operator::identity(&FockSpace::qubit_pair()));

        let sm = annihilation(&q, 1).unwrap();
        let smsm = sm.tensor(&sm).unwrap();
        let s11 = s1.tensor(&s1).unwrap();
        let out = smsm.apply(&s11).unwrap();
        let s00 = s0.tensor(&s0).unwrap();
        assert_eq!(&out, s00.amplitudes());
    }

    #[test]
    fn tensor_overflow() {
        let big = Operator::identity(&FockSpace::new(vec![32]).unwrap());
        let huge = Operator::identity(&FockSpace::new(vec![33]).unwrap());
        assert!(matches!(big.tensor(&huge), Err(Error::DimensionOverflow { .. })));
    }

    #[test]
    fn expectation_examples() {
        let q = FockSpace::new(vec![2]).unwrap();
        let one = StateVector::basis(&q, &[1]).unwrap();
        let n = number(&q, 1).unwrap();
        assert_abs_diff_eq!(expectation(&n, &one).unwrap().re, 1.0);

        let plus = StateVector::from_slice(&q, &[ONE, ONE]).unwrap();
        let x = position(&q, 1).unwrap();
        // x = [[0, 1/sqrt2],[1/sqrt2, 0]]; <+|x|+> = 2 * (1/2)(1/sqrt2)
        let e = expectation(&x, &plus).unwrap();
        assert_abs_diff_eq!(e.re, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(e.im, 0.0, epsilon = 1e-15);

        let id = Operator::identity(&q);
        assert_abs_diff_eq!(expectation(&id, &plus).unwrap().re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn expectation_dimension_mismatch() {
        let q = FockSpace::new(vec![2]).unwrap();
        let psi = StateVector::basis(&FockSpace::qubit_pair(), &[0, 0]).unwrap();
        assert!(expectation(&Operator::identity(&q), &psi).is_err());
    }

    #[test]
    fn reduced_density_examples() {
        let s = FockSpace::qubit_pair();
        let prod = StateVector::basis(&s, &[0, 1]).unwrap();
        let r = reduced_density(&prod, 1).unwrap();
        assert_eq!(r.matrix()[(0, 0)], ONE);
        assert_eq!(r.matrix()[(1, 1)], ZERO);

        let bell = StateVector::from_slice(&s, &[ZERO, ONE, ONE, ZERO]).unwrap();
        let r = reduced_density(&bell, 1).unwrap();
        let half = CMatrix::identity(2, 2) * c(0.5);
        assert!((r.matrix() - half).norm() < 1e-15);
        assert!(reduced_density(&bell, 3).is_err());
    }

    #[test]
    fn reduced_density_of_one_factor_space_fails() {
        let q = FockSpace::new(vec![3]).unwrap();
        let psi = StateVector::basis(&q, &[1]).unwrap();
        assert!(reduced_density(&psi, 1).is_err());
    }

    #[test]
    fn commutator_identity_on_lower_block() {
        for d in [2, 3, 5, 8] {
            let s = FockSpace::new(vec![d]).unwrap();
            let a = annihilation(&s, 1).unwrap();
            let comm = a.commutator(&a.adjoint()).unwrap();
            for i in 0..d - 1 {
                for j in 0..d - 1 {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    // sqrt(n)^2 is exact only up to rounding
                    assert_abs_diff_eq!(comm.matrix()[(i, j)].re, expected, epsilon = 4.0 * f64::EPSILON * d as f64);
                    assert_eq!(comm.matrix()[(i, j)].im, 0.0);
                }
            }
        }
    }

    #[test]
    fn density_matrix_partial_trace_matches_pure() {
        let s = FockSpace::new(vec![2, 3]).unwrap();
        let amps: Vec<C64> = (0..6).map(|k| C64::new(k as f64 + 1.0, 0.5 - k as f64)).collect();
        let psi = StateVector::from_slice(&s, &amps).unwrap();
        let rho = DensityMatrix::pure(&psi);
        for keep in [1, 2] {
            let a = rho.reduce(keep).unwrap();
            let b = reduced_density(&psi, keep).unwrap();
            assert!((a.matrix() - b.matrix()).norm() < 1e-14);
        }
    }

    #[test]
    fn density_validation() {
        let q = FockSpace::new(vec![2]).unwrap();
        let bad = CMatrix::from_diagonal(&CVector::from_column_slice(&[c(1.5), c(-0.5)]));
        assert!(DensityMatrix::new(bad, q.clone()).is_err());
        let ok = DensityMatrix::maximally_mixed(&q);
        assert!(ok.validate(DEFAULT_TOL).is_ok());
    }
}
