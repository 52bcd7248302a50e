//! Closed-form quantum-limit steady state for symmetric pumping.

use crate::error::{Error, Result};
use crate::hilbert::{CMatrix, DensityMatrix, FockSpace, C64};

use super::VdpParams;

struct Symmetric {
    g: f64,
    v: f64,
    dw: f64,
    theta: f64,
}

impl Symmetric {
    fn from_params(p: &VdpParams) -> Result<Self> {
        p.validate()?;
        if !p.is_quantum_limit() {
            return Err(Error::InvalidParameter {
                field: "damping",
                reason: "closed form exists only in the quantum limit".into(),
            });
        }
        if p.gamma_up_1 != p.gamma_up_2 {
            return Err(Error::InvalidParameter {
                field: "gamma_up_2",
                reason: format!(
                    "closed form needs symmetric pumping, got {} and {}",
                    p.gamma_up_1, p.gamma_up_2
                ),
            });
        }
        if !(p.gamma_up_1 > 0.0) {
            return Err(Error::InvalidParameter {
                field: "gamma_up_1",
                reason: "closed form needs a positive pumping rate".into(),
            });
        }
        Ok(Self {
            g: p.gamma_up_1,
            v: p.coupling,
            dw: p.delta_omega(),
            theta: p.theta,
        })
    }

    /// `3 gamma_up + V`.
    fn collective(&self) -> f64 {
        3.0 * self.g + self.v
    }

    /// `dw^2 + (3 gamma_up + V)^2`.
    fn lorentz(&self) -> f64 {
        self.dw * self.dw + self.collective().powi(2)
    }

    fn normalization(&self) -> f64 {
        let (g, v, dw2) = (self.g, self.v, self.dw * self.dw);
        self.collective()
            * (3.0 * g * (dw2 + 9.0 * g * g) + (dw2 + 27.0 * g * g) * v + 8.0 * g * v * v)
    }
}

/// Steady state of the quantum-limit model in the basis
/// `|00>, |01>, |10>, |11>`.
pub fn analytic_steady_state(params: &VdpParams) -> Result<DensityMatrix> {
    let s = Symmetric::from_params(params)?;
    let (g, v) = (s.g, s.v);
    let n = s.normalization();
    let lor = s.lorentz();

    let p00 = 1.0 - g * (5.0 * g + 2.0 * v) * lor / n;
    let p01 = g * (2.0 * g + v) * lor / n;
    let p11 = g * g * lor / n;
    let coherence = C64::new(s.collective(), -s.dw) * C64::from_polar(1.0, s.theta)
        * (g * v * (g + v) / n);

    let mut m = CMatrix::zeros(4, 4);
    m[(0, 0)] = C64::from(p00);
    m[(1, 1)] = C64::from(p01);
    m[(2, 2)] = C64::from(p01);
    m[(3, 3)] = C64::from(p11);
    m[(1, 2)] = coherence;
    m[(2, 1)] = coherence.conj();
    DensityMatrix::with_tolerance(m, FockSpace::qubit_pair(), 1e-9)
}

/// Steady-state mean phase difference `theta - atan(dw / (3 gamma_up + V))`.
///
/// Not wrapped, so that it shifts rigidly with `theta`.
pub fn steady_phase(params: &VdpParams) -> Result<f64> {
    let s = Symmetric::from_params(params)?;
    Ok(s.theta - (s.dw / s.collective()).atan())
}

/// Steady-state correlator
/// `V (gamma_up + V) e^{i dphi} / ((3 gamma_up + V) sqrt(dw^2 + (3 gamma_up + V)^2))`.
pub fn correlator_steady(params: &VdpParams) -> Result<C64> {
    let s = Symmetric::from_params(params)?;
    let modulus = s.v * (s.g + s.v) / (s.collective() * s.lorentz().sqrt());
    Ok(C64::from_polar(modulus, steady_phase(params)?))
}

/// Excited-state population of either marginal.
pub fn marginal_excitation(params: &VdpParams) -> Result<f64> {
    let s = Symmetric::from_params(params)?;
    Ok(s.g * s.collective() * s.lorentz() / s.normalization())
}

/// Classical Arnold-tongue boundary `V = 2 |dw|`.
pub fn classical_tongue(delta_omega: f64) -> f64 {
    2.0 * delta_omega.abs()
}
