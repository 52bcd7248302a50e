//! Per-trajectory synchronization and entanglement indicators.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    annihilation, expectation, hermitian_eigen, number, position, reduced_density, CMatrix,
    FockSpace, StateVector, C64,
};

/// Joint occupations below this make the correlator undefined.
pub const CORRELATOR_EPS: f64 = 1e-12;

/// Reduced-state eigenvalues below this contribute nothing to the entropy.
pub const ENTROPY_EIGEN_FLOOR: f64 = 1e-14;

/// Windowed variances below this make the Pearson indicator undefined.
pub const PEARSON_VAR_FLOOR: f64 = 1e-15;

/// `<a1^+ a2> / sqrt(<n1><n2>)`.
pub fn correlator(psi: &StateVector) -> Result<C64> {
    let space = psi.space();
    check_bipartite(space)?;
    let a1 = annihilation(space, 1)?;
    let a2 = annihilation(space, 2)?;
    let num = expectation(&(&a1.adjoint() * &a2), psi)?;
    let n1 = expectation(&number(space, 1)?, psi)?.re;
    let n2 = expectation(&number(space, 2)?, psi)?.re;
    correlator_from_moments(num, n1, n2).ok_or(Error::Undefined("correlator: vacuum-dominated state"))
}

fn correlator_from_moments(cross: C64, n1: f64, n2: f64) -> Option<C64> {
    let denom = n1 * n2;
    (denom > CORRELATOR_EPS).then(|| cross / denom.sqrt())
}

/// Maps an angle into `(-pi, pi]`.
pub fn wrap_angle(x: f64) -> f64 {
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    y
}

/// Wraps into `(center - pi, center + pi]`.
pub fn wrap_around(x: f64, center: f64) -> f64 {
    center + wrap_angle(x - center)
}

/// Principal argument in `(-pi, pi]`.
pub fn phase_difference(c: C64) -> Result<f64> {
    if c.norm() == 0.0 || !c.is_finite() {
        return Err(Error::Undefined("phase of a vanishing correlator"));
    }
    let a = c.im.atan2(c.re);
    Ok(if a == -PI { PI } else { a })
}

/// Von Neumann entropy (nats) of the first oscillator's reduced state.
pub fn entanglement_entropy(psi: &StateVector) -> Result<f64> {
    check_bipartite(psi.space())?;
    let rho = reduced_density(psi, 1)?;
    Ok(entropy_of(rho.matrix()))
}

pub(crate) fn entropy_of(rho: &CMatrix) -> f64 {
    if rho.nrows() == 2 {
        return binary_entropy_2x2(rho[(0, 0)].re, rho[(1, 1)].re, rho[(0, 1)]);
    }
    shannon(hermitian_eigen(rho).0)
}

fn shannon(eigs: impl IntoIterator<Item = f64>) -> f64 {
    eigs.into_iter()
        .filter(|&l| l > ENTROPY_EIGEN_FLOOR)
        .map(|l| -l * l.ln())
        .sum::<f64>()
        .max(0.0)
}

fn binary_entropy_2x2(a: f64, d: f64, b: C64) -> f64 {
    let tr = a + d;
    let disc = ((a - d).powi(2) + 4.0 * b.norm_sqr()).sqrt();
    let hi = 0.5 * (tr + disc);
    let lo = (a * d - b.norm_sqr()) / hi;
    shannon([hi, lo])
}

fn check_bipartite(space: &FockSpace) -> Result<()> {
    if space.n_factors() != 2 {
        return Err(Error::InvalidSpace(format!(
            "indicator needs two oscillators, got {} factor(s)",
            space.n_factors()
        )));
    }
    Ok(())
}

/// Pearson window: total width and the series' sampling stride.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub width: f64,
    pub stride: f64,
}

impl WindowSpec {
    pub fn new(width: f64, stride: f64) -> Result<Self> {
        if !(width > 0.0) || !(stride > 0.0) || stride > width {
            return Err(Error::InvalidParameter {
                field: "window",
                reason: format!("need 0 < stride <= width, got width {width}, stride {stride}"),
            });
        }
        Ok(Self { width, stride })
    }

    /// Samples on either side of the window centre.
    pub fn half_samples(&self) -> usize {
        (0.5 * self.width / self.stride).round() as usize
    }
}

/// Windowed Pearson coefficient of two series sampled at `k * stride`,
/// evaluated at time `t`. Window averages use trapezoidal weights.
///
/// `None` when the window leaves the series or either signal is flat.
pub fn pearson(x1: &[f64], x2: &[f64], window: &WindowSpec, t: f64) -> Option<f64> {
    if x1.len() != x2.len() {
        return None;
    }
    let centre = (t / window.stride).round();
    if centre < 0.0 {
        return None;
    }
    let centre = centre as usize;
    let h = window.half_samples();
    if h == 0 || centre < h || centre + h >= x1.len() {
        return None;
    }
    pearson_slice(&x1[centre - h..=centre + h], &x2[centre - h..=centre + h])
}

/// Trapezoid-weighted Pearson coefficient of two equal-length slices.
pub(crate) fn pearson_slice(x1: &[f64], x2: &[f64]) -> Option<f64> {
    let n = x1.len();
    if n < 2 {
        return None;
    }
    let w = |i: usize| if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
    let wsum = (n - 1) as f64;
    let (mut m1, mut m2) = (0.0, 0.0);
    for i in 0..n {
        m1 += w(i) * x1[i];
        m2 += w(i) * x2[i];
    }
    m1 /= wsum;
    m2 /= wsum;
    let (mut v1, mut v2) = (0.0, 0.0);
    for i in 0..n {
        v1 += w(i) * (x1[i] - m1).powi(2);
        v2 += w(i) * (x2[i] - m2).powi(2);
    }
    if v1 / wsum <= PEARSON_VAR_FLOOR || v2 / wsum <= PEARSON_VAR_FLOOR {
        return None;
    }
    // r = (|u+v|^2 - |u-v|^2) / (|u+v|^2 + |u-v|^2) for the normalized
    // fluctuations u, v; bounded by 1 in magnitude without clamping.
    let (s1, s2) = (v1.sqrt(), v2.sqrt());
    let (mut plus, mut minus) = (0.0, 0.0);
    for i in 0..n {
        let u = (x1[i] - m1) / s1;
        let v = (x2[i] - m2) / s2;
        plus += w(i) * (u + v).powi(2);
        minus += w(i) * (u - v).powi(2);
    }
    Some((plus - minus) / (plus + minus))
}

/// One sampled set of indicators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndicatorSample {
    pub t: f64,
    pub correlator: Option<C64>,
    pub delta_phi: Option<f64>,
    pub pearson: Option<f64>,
    pub entropy: f64,
}

/// Time-averaged indicators of one trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AveragedIndicators {
    /// Mean of the complex correlator.
    pub correlator: Option<C64>,
    pub correlator_abs: Option<f64>,
    /// Circular mean of the phase difference.
    pub delta_phi: Option<f64>,
    pub pearson: Option<f64>,
    pub entropy: f64,
    pub samples: usize,
    pub correlator_excluded: usize,
    pub pearson_excluded: usize,
}

/// Averages every indicator over samples with `t > burn_in`; undefined
/// samples are skipped and counted. The entropy is always defined, so the
/// only failure is an empty window.
pub fn time_average(samples: &[IndicatorSample], burn_in: f64) -> Result<AveragedIndicators> {
    let window: Vec<&IndicatorSample> = samples.iter().filter(|s| s.t > burn_in).collect();
    if window.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, have: 0 });
    }
    let mut c_sum = C64::new(0.0, 0.0);
    let mut abs_sum = 0.0;
    let mut phasor = C64::new(0.0, 0.0);
    let (mut c_n, mut phi_n) = (0usize, 0usize);
    let (mut r_sum, mut r_n) = (0.0, 0usize);
    let mut s_sum = 0.0;
    for s in &window {
        if let Some(c) = s.correlator {
            c_sum += c;
            abs_sum += c.norm();
            c_n += 1;
        }
        if let Some(phi) = s.delta_phi {
            phasor += C64::from_polar(1.0, phi);
            phi_n += 1;
        }
        if let Some(r) = s.pearson {
            r_sum += r;
            r_n += 1;
        }
        s_sum += s.entropy;
    }
    let n = window.len();
    let delta_phi = if phi_n > 0 {
        phase_difference(phasor).ok()
    } else {
        None
    };
    Ok(AveragedIndicators {
        correlator: (c_n > 0).then(|| c_sum / c_n as f64),
        correlator_abs: (c_n > 0).then(|| abs_sum / c_n as f64),
        delta_phi,
        pearson: (r_n > 0).then(|| r_sum / r_n as f64),
        entropy: s_sum / n as f64,
        samples: n,
        correlator_excluded: n - c_n,
        pearson_excluded: n - r_n,
    })
}

/// Sparse matrix used on the hot path.
#[derive(Clone, Debug)]
pub(crate) struct Sparse {
    entries: Vec<(u32, u32, C64)>,
}

impl Sparse {
    pub(crate) fn from_dense(m: &CMatrix) -> Self {
        let mut entries = Vec::new();
        for c in 0..m.ncols() {
            for r in 0..m.nrows() {
                let v = m[(r, c)];
                if v.re != 0.0 || v.im != 0.0 {
                    entries.push((r as u32, c as u32, v));
                }
            }
        }
        Self { entries }
    }

    /// `out = M psi`.
    #[inline]
    pub(crate) fn apply(&self, psi: &[C64], out: &mut [C64]) {
        out.fill(C64::new(0.0, 0.0));
        for &(r, c, v) in &self.entries {
            out[r as usize] += v * psi[c as usize];
        }
    }

    /// `<psi|M|psi>`.
    #[inline]
    pub(crate) fn expect(&self, psi: &[C64]) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for &(r, c, v) in &self.entries {
            acc += psi[r as usize].conj() * v * psi[c as usize];
        }
        acc
    }
}

/// Precompiled observables for a two-oscillator space.
#[derive(Clone, Debug)]
pub struct Observables {
    cross: Sparse,
    n1: Sparse,
    n2: Sparse,
    x1: Sparse,
    x2: Sparse,
    d1: usize,
    d2: usize,
}

/// Observables evaluated on one state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Snapshot {
    pub x1: f64,
    pub x2: f64,
    pub correlator: Option<C64>,
    pub entropy: f64,
    /// Largest top-Fock-level population over the two oscillators.
    pub top_level: f64,
}

impl Observables {
    pub fn new(space: &FockSpace) -> Result<Self> {
        check_bipartite(space)?;
        let a1 = annihilation(space, 1)?;
        let a2 = annihilation(space, 2)?;
        Ok(Self {
            cross: Sparse::from_dense((&a1.adjoint() * &a2).matrix()),
            n1: Sparse::from_dense(number(space, 1)?.matrix()),
            n2: Sparse::from_dense(number(space, 2)?.matrix()),
            x1: Sparse::from_dense(position(space, 1)?.matrix()),
            x2: Sparse::from_dense(position(space, 2)?.matrix()),
            d1: space.dims()[0],
            d2: space.dims()[1],
        })
    }

    pub fn snapshot(&self, psi: &[C64]) -> Snapshot {
        let n1 = self.n1.expect(psi).re;
        let n2 = self.n2.expect(psi).re;
        let cross = self.cross.expect(psi);
        Snapshot {
            x1: self.x1.expect(psi).re,
            x2: self.x2.expect(psi).re,
            correlator: correlator_from_moments(cross, n1, n2),
            entropy: self.entropy(psi),
            top_level: self.top_level(psi),
        }
    }

    fn entropy(&self, psi: &[C64]) -> f64 {
        let (d1, d2) = (self.d1, self.d2);
        let mut rho = CMatrix::zeros(d1, d1);
        for i in 0..d1 {
            for j in i..d1 {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..d2 {
                    acc += psi[i * d2 + k] * psi[j * d2 + k].conj();
                }
                rho[(i, j)] = acc;
                rho[(j, i)] = acc.conj();
            }
        }
        entropy_of(&rho)
    }

    fn top_level(&self, psi: &[C64]) -> f64 {
        let (d1, d2) = (self.d1, self.d2);
        let mut p1 = 0.0;
        for k in 0..d2 {
            p1 += psi[(d1 - 1) * d2 + k].norm_sqr();
        }
        let mut p2 = 0.0;
        for i in 0..d1 {
            p2 += psi[i * d2 + d2 - 1].norm_sqr();
        }
        f64::max(p1, p2)
    }
}
