//! Stochastic unravelings of the master equation.
//!
//! The diffusive unraveling (homodyne-type monitoring of the quadratures
//! `X_k = L_k + L_k^dagger`) integrates
//!
//! ```text
//! d|psi> = [ -i H dt - dt/2 sum_k (L_k^+ L_k - <X_k> L_k + <X_k>^2 / 4) ] |psi>
//!          + sum_k dW_k (L_k - <X_k>/2) |psi>
//! ```
//!
//! by splitting each step into the exact Hamiltonian flow `exp(-i H dt)`
//! followed by an Euler-Maruyama step of the dissipative and stochastic
//! terms, with explicit renormalization. An explicit Euler treatment of `H`
//! inflates high-energy amplitudes by `|1 - i E dt|` per step and biases
//! the populations at `O(E^2 dt)`. The measured
//! currents are `J_k = <X_k> + dW_k/dt`. A direct-detection jump unraveling
//! is provided for cross-validation of ensemble averages only.

// the stepping loops walk several parallel buffers by index
#![allow(clippy::needless_range_loop)]

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{hermitian_eigen, CMatrix, DensityMatrix, StateVector, C64};
use crate::lindblad::{LindbladModel, VdpParams};
use crate::metrics::{Observables, Sparse};
use crate::noise::{unit_open_closed, NoiseStream};

mod record;

pub use record::{CurrentSample, TrajectoryRecord, RECORD_MAGIC};

/// Pre-normalization norms below this abort the trajectory.
pub const NORM_COLLAPSE: f64 = 1e-6;

/// Largest total jump probability per step.
pub const MAX_JUMP_PROBABILITY: f64 = 0.1;

/// Eigenvalues of the sampled density matrix below `-EIGEN_CLIP` are an
/// error; those in `[-EIGEN_CLIP, 0)` are clipped to zero.
pub const EIGEN_CLIP: f64 = 1e-10;

/// Target for `dt * max(omega_1, omega_2, sum_k |L_k^+ L_k|)`.
pub const DEFAULT_STIFFNESS: f64 = 1e-2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    EulerMaruyama,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Unraveling {
    Diffusive,
    Jump,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub scheme: Scheme,
    /// When off, the state is renormalized only at sample instants.
    pub renormalize_every_step: bool,
    pub truncation_leak_tol: f64,
    pub record_currents: bool,
}

impl IntegratorConfig {
    pub fn with_dt(dt: f64) -> Self {
        Self {
            dt,
            scheme: Scheme::EulerMaruyama,
            renormalize_every_step: true,
            truncation_leak_tol: 1e-3,
            record_currents: false,
        }
    }

    /// `dt = DEFAULT_STIFFNESS / max(omega_1, omega_2, sum_k |L_k^+ L_k|)`.
    pub fn for_model(model: &LindbladModel) -> Self {
        Self::with_dt(default_dt(model))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter {
                field: "dt",
                reason: format!("must be positive, got {}", self.dt),
            });
        }
        if !(self.truncation_leak_tol > 0.0) {
            return Err(Error::InvalidParameter {
                field: "truncation_leak_tol",
                reason: format!("must be positive, got {}", self.truncation_leak_tol),
            });
        }
        Ok(())
    }
}

pub fn default_dt(model: &LindbladModel) -> f64 {
    let scale = model.max_frequency().max(model.dissipation_scale());
    if scale > 0.0 {
        DEFAULT_STIFFNESS / scale
    } else {
        DEFAULT_STIFFNESS
    }
}

/// Same as [`default_dt`] but from the physical parameters directly.
pub fn default_dt_for(params: &VdpParams, model: &LindbladModel) -> f64 {
    let scale = params
        .omega1
        .abs()
        .max(params.omega2.abs())
        .max(model.dissipation_scale());
    DEFAULT_STIFFNESS / scale.max(f64::MIN_POSITIVE)
}

/// Draws eigenvectors of a density matrix with their eigenvalue weights.
#[derive(Clone, Debug)]
pub struct InitialStateSampler {
    cumulative: Vec<f64>,
    states: Vec<StateVector>,
}

impl InitialStateSampler {
    pub fn new(rho: &DensityMatrix) -> Result<Self> {
        let (values, vectors) = rho.eigen();
        if let Some(&min) = values.iter().find(|&&l| l < -EIGEN_CLIP) {
            return Err(Error::NotDensityMatrix(format!("eigenvalue {min:e} below clip")));
        }
        let clipped: Vec<f64> = values.iter().map(|&l| l.max(0.0)).collect();
        let total: f64 = clipped.iter().sum();
        if !(total > 0.0) {
            return Err(Error::NotDensityMatrix("vanishing spectrum".into()));
        }
        let mut acc = 0.0;
        let mut cumulative = Vec::with_capacity(clipped.len());
        let mut states = Vec::with_capacity(clipped.len());
        for (l, v) in clipped.iter().zip(vectors) {
            acc += l / total;
            cumulative.push(acc);
            states.push(StateVector::from_amplitudes(rho.space(), v)?);
        }
        Ok(Self { cumulative, states })
    }

    /// Eigenvalue weights (after clipping), in the order of [`Self::states`].
    pub fn weights(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.cumulative
            .iter()
            .map(|&c| {
                let w = c - prev;
                prev = c;
                w
            })
            .collect()
    }

    pub fn states(&self) -> &[StateVector] {
        &self.states
    }

    /// Index of the drawn eigenvector.
    pub fn draw_index(&self, rng: &mut impl RngCore) -> usize {
        let u = unit_open_closed(rng.next_u64());
        self.cumulative
            .iter()
            .position(|&c| u <= c)
            .unwrap_or_else(|| {
                // rounding left the last cumulative weight just below 1
                self.cumulative
                    .iter()
                    .rposition(|&c| c > 0.0)
                    .unwrap_or(self.cumulative.len() - 1)
            })
    }

    pub fn draw(&self, rng: &mut impl RngCore) -> StateVector {
        self.states[self.draw_index(rng)].clone()
    }
}

/// `|pi_n>` with probability `pi_n`, using the stream's initial-state key.
pub fn sample_initial(rho: &DensityMatrix, noise: &NoiseStream) -> Result<StateVector> {
    let sampler = InitialStateSampler::new(rho)?;
    Ok(sampler.draw(&mut noise.initial_state_rng()))
}

/// Model compiled to sparse form with scratch buffers for stepping.
#[derive(Clone, Debug)]
pub struct Stepper {
    dim: usize,
    /// `exp(-i H dt)`
    unitary: Sparse,
    /// `-1/2 sum_k L_k^+ L_k`
    drift: Sparse,
    jumps: Vec<Sparse>,
    cfg: IntegratorConfig,
    kpsi: Vec<C64>,
    lpsi: Vec<C64>,
    next: Vec<C64>,
    quadratures: Vec<f64>,
    increments: Vec<f64>,
    currents: Vec<f64>,
    last_prenorm_sq: f64,
}

impl Stepper {
    pub fn new(model: &LindbladModel, cfg: &IntegratorConfig) -> Result<Self> {
        cfg.validate()?;
        let dim = model.dim();
        let mut k = CMatrix::zeros(dim, dim);
        for l in model.lindblad_ops() {
            k -= l.matrix().adjoint() * l.matrix() * C64::from(0.5);
        }
        let n = model.lindblad_ops().len();
        Ok(Self {
            dim,
            unitary: Sparse::from_dense(&hamiltonian_flow(model.hamiltonian().matrix(), cfg.dt)),
            drift: Sparse::from_dense(&k),
            jumps: model
                .lindblad_ops()
                .iter()
                .map(|l| Sparse::from_dense(l.matrix()))
                .collect(),
            cfg: *cfg,
            kpsi: vec![C64::new(0.0, 0.0); dim],
            lpsi: vec![C64::new(0.0, 0.0); dim * n],
            next: vec![C64::new(0.0, 0.0); dim],
            quadratures: vec![0.0; n],
            increments: vec![0.0; n],
            currents: vec![0.0; n],
            last_prenorm_sq: 1.0,
        })
    }

    pub fn channels(&self) -> usize {
        self.jumps.len()
    }

    pub fn dt(&self) -> f64 {
        self.cfg.dt
    }

    /// `||psi~||^2` of the last step before renormalization.
    pub fn last_prenorm_sq(&self) -> f64 {
        self.last_prenorm_sq
    }

    /// `<X_k>` at the start of the last diffusive step.
    pub fn last_quadratures(&self) -> &[f64] {
        &self.quadratures
    }

    /// Measured currents of the last diffusive step.
    pub fn last_currents(&self) -> &[f64] {
        &self.currents
    }

    /// Exact Hamiltonian part of the split step.
    fn rotate(&mut self, psi: &mut [C64]) {
        self.unitary.apply(psi, &mut self.next);
        psi.copy_from_slice(&self.next);
    }

    fn apply_jumps(&mut self, psi: &[C64]) {
        let d = self.dim;
        for (k, l) in self.jumps.iter().enumerate() {
            l.apply(psi, &mut self.lpsi[k * d..(k + 1) * d]);
        }
    }

    /// One diffusive step driven by the given Wiener increments.
    pub fn diffusive_with_increments(
        &mut self,
        psi: &mut [C64],
        increments: &[f64],
        step: u64,
    ) -> Result<()> {
        let d = self.dim;
        let dt = self.cfg.dt;
        self.rotate(psi);
        self.drift.apply(psi, &mut self.kpsi);
        self.apply_jumps(psi);
        let mut psi_coeff = 1.0;
        for k in 0..self.jumps.len() {
            let lk = &self.lpsi[k * d..(k + 1) * d];
            let overlap: C64 = psi.iter().zip(lk).map(|(a, b)| a.conj() * b).sum();
            let x = 2.0 * overlap.re;
            let dw = increments[k];
            self.quadratures[k] = x;
            self.currents[k] = x + dw / dt;
            psi_coeff -= dt * x * x / 8.0 + 0.5 * dw * x;
        }
        for i in 0..d {
            self.next[i] = psi[i] * psi_coeff + self.kpsi[i] * dt;
        }
        for k in 0..self.jumps.len() {
            let c = 0.5 * dt * self.quadratures[k] + increments[k];
            if c == 0.0 {
                continue;
            }
            let lk = &self.lpsi[k * d..(k + 1) * d];
            for i in 0..d {
                self.next[i] += lk[i] * c;
            }
        }
        self.finish(psi, step, self.cfg.renormalize_every_step)
    }

    /// One diffusive step with increments from `noise`.
    pub fn diffusive(&mut self, psi: &mut [C64], noise: &mut NoiseStream, step: u64) -> Result<()> {
        let mut inc = std::mem::take(&mut self.increments);
        noise.wiener_increments(step, self.cfg.dt, &mut inc);
        let out = self.diffusive_with_increments(psi, &inc, step);
        self.increments = inc;
        out
    }

    /// One jump-unraveling step.
    pub fn jump(&mut self, psi: &mut [C64], noise: &mut NoiseStream, step: u64) -> Result<Option<usize>> {
        let d = self.dim;
        let dt = self.cfg.dt;
        self.rotate(psi);
        self.apply_jumps(psi);
        let mut probs = std::mem::take(&mut self.quadratures);
        let mut total = 0.0;
        for k in 0..self.jumps.len() {
            let p = dt * self.lpsi[k * d..(k + 1) * d].iter().map(|z| z.norm_sqr()).sum::<f64>();
            probs[k] = p;
            total += p;
        }
        self.quadratures = probs;
        if total > MAX_JUMP_PROBABILITY {
            return Err(Error::StepTooLarge(total));
        }
        let u = noise.uniform(step);
        let mut fired = None;
        if u <= total {
            let mut acc = 0.0;
            for k in 0..self.jumps.len() {
                acc += self.quadratures[k];
                if u <= acc {
                    fired = Some(k);
                    break;
                }
            }
            // rounding in the running sum
            let k = fired.unwrap_or_else(|| {
                self.quadratures.iter().rposition(|&p| p > 0.0).unwrap_or(0)
            });
            fired = Some(k);
            self.next.copy_from_slice(&self.lpsi[k * d..(k + 1) * d]);
        } else {
            self.drift.apply(psi, &mut self.kpsi);
            for i in 0..d {
                self.next[i] = psi[i] + self.kpsi[i] * dt;
            }
        }
        self.finish(psi, step, true)?;
        Ok(fired)
    }

    fn finish(&mut self, psi: &mut [C64], step: u64, normalize: bool) -> Result<()> {
        let norm_sq: f64 = self.next.iter().map(|z| z.norm_sqr()).sum();
        let norm = norm_sq.sqrt();
        if !(norm >= NORM_COLLAPSE) {
            return Err(Error::NormCollapse { step, norm });
        }
        self.last_prenorm_sq = norm_sq;
        if normalize {
            let inv = 1.0 / norm;
            for (p, n) in psi.iter_mut().zip(&self.next) {
                *p = n * inv;
            }
        } else {
            psi.copy_from_slice(&self.next);
        }
        Ok(())
    }
}

/// `exp(-i H dt)` from the spectral decomposition of `H`.
fn hamiltonian_flow(h: &CMatrix, dt: f64) -> CMatrix {
    let (values, vectors) = hermitian_eigen(h);
    let d = h.nrows();
    let mut u = CMatrix::zeros(d, d);
    for (l, v) in values.iter().zip(&vectors) {
        u += v * v.adjoint() * C64::from_polar(1.0, -l * dt);
    }
    // drop rounding fill-in so the sparse form stays sparse
    u.apply(|z| {
        if z.norm() < 1e-15 {
            *z = C64::new(0.0, 0.0);
        }
    });
    u
}

fn normalize_in_place(psi: &mut [C64]) {
    let n = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in psi.iter_mut() {
        *z /= n;
    }
}

/// One diffusive step of `psi`; returns the new state and the five (or
/// however many channels) measured currents.
pub fn step_diffusive(
    psi: &StateVector,
    model: &LindbladModel,
    cfg: &IntegratorConfig,
    noise: &mut NoiseStream,
    step: u64,
) -> Result<(StateVector, Vec<f64>)> {
    let mut stepper = Stepper::new(model, cfg)?;
    let mut amps = psi.amplitudes().as_slice().to_vec();
    stepper.diffusive(&mut amps, noise, step)?;
    if !cfg.renormalize_every_step {
        normalize_in_place(&mut amps);
    }
    let state = StateVector::from_slice(psi.space(), &amps)?;
    Ok((state, stepper.last_currents().to_vec()))
}

/// One jump-unraveling step of `psi`.
pub fn step_jump(
    psi: &StateVector,
    model: &LindbladModel,
    cfg: &IntegratorConfig,
    noise: &mut NoiseStream,
    step: u64,
) -> Result<StateVector> {
    let mut stepper = Stepper::new(model, cfg)?;
    let mut amps = psi.amplitudes().as_slice().to_vec();
    stepper.jump(&mut amps, noise, step)?;
    StateVector::from_slice(psi.space(), &amps)
}

/// Callback invoked at every sample instant.
pub trait SampleHook {
    fn on_sample(&mut self, t: f64, psi: &StateVector);
}

impl SampleHook for () {
    fn on_sample(&mut self, _t: f64, _psi: &StateVector) {}
}

impl<F: FnMut(f64, &StateVector)> SampleHook for F {
    fn on_sample(&mut self, t: f64, psi: &StateVector) {
        self(t, psi)
    }
}

/// Number of steps of size `dt` that best matches `interval`, at least 1.
pub(crate) fn steps_for(interval: f64, dt: f64) -> u64 {
    ((interval / dt).round() as u64).max(1)
}

/// Integrates the diffusive unraveling for `total_time`, recording the
/// indicator observables every `sample_interval`.
pub fn run_trajectory(
    model: &LindbladModel,
    psi0: &StateVector,
    total_time: f64,
    sample_interval: f64,
    cfg: &IntegratorConfig,
    noise: &mut NoiseStream,
    hook: &mut dyn SampleHook,
) -> Result<TrajectoryRecord> {
    run_unraveling(
        model,
        psi0,
        total_time,
        sample_interval,
        cfg,
        noise,
        Unraveling::Diffusive,
        hook,
    )
}

#[allow(clippy::too_many_arguments)]
pub fn run_unraveling(
    model: &LindbladModel,
    psi0: &StateVector,
    total_time: f64,
    sample_interval: f64,
    cfg: &IntegratorConfig,
    noise: &mut NoiseStream,
    unraveling: Unraveling,
    hook: &mut dyn SampleHook,
) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    if !(total_time >= 0.0) {
        return Err(Error::NegativeTime(total_time));
    }
    if !(sample_interval >= cfg.dt) {
        return Err(Error::InvalidParameter {
            field: "sample_interval",
            reason: format!("{sample_interval} is shorter than dt = {}", cfg.dt),
        });
    }
    if psi0.space() != model.space() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: psi0.dim(),
        });
    }
    let space = model.space().clone();
    let obs = Observables::new(&space)?;
    let mut stepper = Stepper::new(model, cfg)?;
    let dt = cfg.dt;
    let total_steps = (total_time / dt).round() as u64;
    let stride = steps_for(sample_interval, dt);
    let n_samples = (total_steps / stride + 1) as usize;

    let mut rec = TrajectoryRecord::with_capacity(
        dt,
        stride as f64 * dt,
        n_samples,
        stepper.channels(),
        cfg.record_currents,
    );
    let mut psi = psi0.amplitudes().as_slice().to_vec();
    let check_leak = model.is_truncated();

    let sample = |psi: &mut Vec<C64>, step: u64, rec: &mut TrajectoryRecord, hook: &mut dyn SampleHook| -> Result<()> {
        if !cfg.renormalize_every_step {
            normalize_in_place(psi);
        }
        let t = step as f64 * dt;
        let snap = obs.snapshot(psi);
        if check_leak && snap.top_level > cfg.truncation_leak_tol {
            return Err(Error::TruncationLeak {
                time: t,
                population: snap.top_level,
                tolerance: cfg.truncation_leak_tol,
            });
        }
        rec.push(t, &snap);
        let state = StateVector::from_normalized(space.clone(), nalgebra::DVector::from_column_slice(psi));
        hook.on_sample(t, &state);
        Ok(())
    };

    sample(&mut psi, 0, &mut rec, hook)?;
    for step in 0..total_steps {
        match unraveling {
            Unraveling::Diffusive => stepper.diffusive(&mut psi, noise, step)?,
            Unraveling::Jump => {
                stepper.jump(&mut psi, noise, step)?;
            }
        }
        let done = step + 1;
        if cfg.record_currents && unraveling == Unraveling::Diffusive && step % stride == 0 {
            rec.push_currents(CurrentSample {
                t: step as f64 * dt,
                currents: stepper.last_currents().to_vec(),
                quadratures: stepper.last_quadratures().to_vec(),
            });
        }
        if done % stride == 0 {
            sample(&mut psi, done, &mut rec, hook)?;
        }
    }
    if !cfg.renormalize_every_step {
        normalize_in_place(&mut psi);
    }
    rec.set_final(StateVector::from_slice(&space, &psi)?, total_steps);
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{annihilation, FockSpace, Operator, ONE, ZERO};
    use crate::lindblad::{build_vdp_model, propagate, two_level_decay, VdpParams};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn fig1_model() -> LindbladModel {
        let p = VdpParams::quantum_limit(2.0 * PI, 0.001, 0.01, 0.1, 0.0);
        build_vdp_model(&p, &FockSpace::qubit_pair()).unwrap()
    }

    fn null_model() -> LindbladModel {
        let s = FockSpace::qubit_pair();
        let zero = Operator::zeros(&s);
        LindbladModel::new(zero.clone(), vec![zero.clone(); 5]).unwrap()
    }

    #[test]
    fn null_model_leaves_state_and_emits_pure_noise() {
        let model = null_model();
        let cfg = IntegratorConfig::with_dt(1e-3);
        let s = model.space().clone();
        let psi = StateVector::from_slice(&s, &[ONE, ZERO, C64::new(0.0, 1.0), ZERO]).unwrap();
        let mut noise = NoiseStream::new(3, 0);
        let (next, currents) = step_diffusive(&psi, &model, &cfg, &mut noise, 0).unwrap();
        assert!((next.amplitudes() - psi.amplitudes()).norm() < 1e-15);
        let mut dw = [0.0; 5];
        NoiseStream::new(3, 0).wiener_increments(0, 1e-3, &mut dw);
        for k in 0..5 {
            assert_abs_diff_eq!(currents[k], dw[k] / 1e-3, epsilon = 1e-12);
        }
    }

    #[test]
    fn excited_state_is_a_fixed_direction_without_noise() {
        // L = sqrt(g) sigma^-, psi = |1>: <X> = 0 and L^+L|1> = g|1>, so the
        // drift only rescales the state.
        let model = two_level_decay(0.5).unwrap();
        let cfg = IntegratorConfig::with_dt(1e-3);
        let mut st = Stepper::new(&model, &cfg).unwrap();
        let mut psi = vec![ZERO, ONE];
        st.diffusive_with_increments(&mut psi, &[0.0], 0).unwrap();
        assert_eq!(psi[0], ZERO);
        assert_abs_diff_eq!(psi[1].re, 1.0, epsilon = 1e-15);
        // unnormalized norm shrinks by g dt / 2 in amplitude
        assert_abs_diff_eq!(st.last_prenorm_sq(), (1.0 - 0.25e-3f64).powi(2), epsilon = 1e-15);
    }

    #[test]
    fn norm_is_restored_every_step() {
        let model = fig1_model();
        let cfg = IntegratorConfig::with_dt(2e-3);
        let mut st = Stepper::new(&model, &cfg).unwrap();
        let mut noise = NoiseStream::new(1, 0);
        let mut psi = vec![C64::new(0.5, 0.0); 4];
        for step in 0..5000 {
            st.diffusive(&mut psi, &mut noise, step).unwrap();
            let n: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn prenorm_drift_scales_with_dt() {
        let model = fig1_model();
        let mut ratios = Vec::new();
        for dt in [4e-3, 1e-3] {
            let cfg = IntegratorConfig::with_dt(dt);
            let mut st = Stepper::new(&model, &cfg).unwrap();
            let mut noise = NoiseStream::new(5, 0);
            let mut psi = vec![C64::new(0.5, 0.0); 4];
            let mut mean = 0.0;
            let n = 10_000;
            for step in 0..n {
                st.diffusive(&mut psi, &mut noise, step).unwrap();
                mean += (st.last_prenorm_sq() - 1.0).abs();
            }
            ratios.push(mean / n as f64 / dt);
        }
        // |norm^2 - 1| / dt stays O(1) as dt shrinks
        for r in &ratios {
            assert!(r.is_finite() && *r < 50.0, "{ratios:?}");
        }
    }

    #[test]
    fn jump_from_vacuum_under_pumping() {
        let s = FockSpace::qubit_pair();
        let ad1 = annihilation(&s, 1).unwrap().adjoint();
        let model = LindbladModel::new(Operator::zeros(&s), vec![ad1.scale(C64::from(10.0))]).unwrap();
        let cfg = IntegratorConfig::with_dt(1e-3);
        let vac = StateVector::basis(&s, &[0, 0]).unwrap();
        // p = dt * 100 = 0.1: find a step whose uniform fires
        let mut noise = NoiseStream::new(9, 0);
        let mut st = Stepper::new(&model, &cfg).unwrap();
        let mut fired = None;
        for step in 0..200 {
            let mut psi = vac.amplitudes().as_slice().to_vec();
            if let Some(k) = st.jump(&mut psi, &mut noise, step).unwrap() {
                fired = Some((k, psi));
                break;
            }
        }
        let (k, psi) = fired.expect("a jump within 200 steps");
        assert_eq!(k, 0);
        let expected = StateVector::basis(&s, &[1, 0]).unwrap();
        assert!((nalgebra::DVector::from_column_slice(&psi) - expected.amplitudes()).norm() < 1e-15);
    }

    #[test]
    fn jump_step_too_large() {
        let model = two_level_decay(200.0).unwrap();
        let cfg = IntegratorConfig::with_dt(1e-3);
        let psi = StateVector::basis(model.space(), &[1]).unwrap();
        let err = step_jump(&psi, &model, &cfg, &mut NoiseStream::new(0, 0), 0).unwrap_err();
        assert!(matches!(err, Error::StepTooLarge(_)));
    }

    #[test]
    fn zero_rate_jump_step_is_unitary_to_first_order() {
        let s = FockSpace::qubit_pair();
        let h = crate::hilbert::number(&s, 1).unwrap().scale(C64::from(3.0));
        let model = LindbladModel::new(h, vec![]).unwrap();
        let cfg = IntegratorConfig::with_dt(1e-4);
        let psi = StateVector::from_slice(&s, &[ONE, ZERO, ONE, ZERO]).unwrap();
        let next = step_jump(&psi, &model, &cfg, &mut NoiseStream::new(0, 0), 0).unwrap();
        let phase = C64::from_polar(1.0, -3.0 * 1e-4);
        let r = 0.5f64.sqrt();
        // one Euler step agrees with the exact evolution to O(dt^2)
        assert!((next.amplitudes()[0] - C64::from(r)).norm() < 1e-7);
        assert!((next.amplitudes()[2] - phase * r).norm() < 1e-7);
    }

    #[test]
    fn sampling_pure_and_mixed() {
        let q = FockSpace::new(vec![2]).unwrap();
        let pure = DensityMatrix::pure(&StateVector::basis(&q, &[0]).unwrap());
        for i in 0..20 {
            let psi = sample_initial(&pure, &NoiseStream::new(i, 0)).unwrap();
            assert_abs_diff_eq!(psi.amplitudes()[0].norm(), 1.0, epsilon = 1e-12);
        }
        let mixed = DensityMatrix::maximally_mixed(&q);
        let sampler = InitialStateSampler::new(&mixed).unwrap();
        let mut rng = NoiseStream::new(1, 0).initial_state_rng();
        let mut counts = [0usize; 2];
        for _ in 0..1000 {
            counts[sampler.draw_index(&mut rng)] += 1;
        }
        let f = counts[0] as f64 / 1000.0;
        assert!((f - 0.5).abs() <= 0.05, "{counts:?}");
    }

    #[test]
    fn sampling_rejects_non_psd() {
        let q = FockSpace::new(vec![2]).unwrap();
        let m = crate::hilbert::CMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&[
            C64::from(1.1),
            C64::from(-0.1),
        ]));
        let rho = DensityMatrix::unchecked(m, q).unwrap();
        assert!(InitialStateSampler::new(&rho).is_err());
    }

    #[test]
    fn trajectory_zero_time_and_determinism() {
        let model = fig1_model();
        let cfg = IntegratorConfig::for_model(&model);
        let psi0 = StateVector::from_slice(model.space(), &[ONE, ONE, ONE, ZERO]).unwrap();
        let rec = run_trajectory(&model, &psi0, 0.0, 0.05, &cfg, &mut NoiseStream::new(1, 0), &mut ()).unwrap();
        assert_eq!(rec.len(), 1);
        assert_eq!(rec.times()[0], 0.0);

        let run = || {
            run_trajectory(&model, &psi0, 20.0, 0.05, &cfg, &mut NoiseStream::new(42, 7), &mut ()).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn hook_sees_every_sample() {
        let model = fig1_model();
        let cfg = IntegratorConfig::with_dt(1e-3);
        let psi0 = StateVector::basis(model.space(), &[1, 0]).unwrap();
        let mut seen = Vec::new();
        let mut hook = |t: f64, psi: &StateVector| seen.push((t, psi.norm()));
        let rec = run_trajectory(&model, &psi0, 1.0, 0.1, &cfg, &mut NoiseStream::new(0, 0), &mut hook).unwrap();
        assert_eq!(seen.len(), rec.len());
        assert_eq!(seen.len(), 11);
        for (_, n) in seen {
            assert_abs_diff_eq!(n, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn sample_interval_shorter_than_dt_is_rejected() {
        let model = fig1_model();
        let cfg = IntegratorConfig::with_dt(1e-2);
        let psi0 = StateVector::basis(model.space(), &[1, 0]).unwrap();
        assert!(run_trajectory(&model, &psi0, 1.0, 1e-3, &cfg, &mut NoiseStream::new(0, 0), &mut ()).is_err());
    }

    #[test]
    fn truncation_leak_detected() {
        let p = VdpParams {
            damping: crate::lindblad::Damping::Finite { gamma_down_1: 0.01, gamma_down_2: 0.01 },
            ..VdpParams::quantum_limit(1.0, 0.0, 1.0, 0.0, 0.0)
        };
        let model = build_vdp_model(&p, &FockSpace::new(vec![3, 3]).unwrap()).unwrap();
        let cfg = IntegratorConfig::with_dt(1e-3);
        let psi0 = StateVector::basis(model.space(), &[0, 0]).unwrap();
        let err = run_trajectory(&model, &psi0, 20.0, 0.1, &cfg, &mut NoiseStream::new(0, 0), &mut ()).unwrap_err();
        assert!(matches!(err, Error::TruncationLeak { .. }));
    }

    #[test]
    fn currents_are_quadrature_plus_white_noise() {
        let model = fig1_model();
        let mut cfg = IntegratorConfig::with_dt(1e-3);
        cfg.record_currents = true;
        let psi0 = StateVector::from_slice(model.space(), &[ONE, ONE, ONE, ZERO]).unwrap();
        let rec = run_trajectory(&model, &psi0, 200.0, 0.01, &cfg, &mut NoiseStream::new(2, 0), &mut ()).unwrap();
        let cur = rec.currents().unwrap();
        assert!(cur.len() > 10_000);
        for k in 0..5 {
            let xi: Vec<f64> = cur.iter().map(|c| c.currents[k] - c.quadratures[k]).collect();
            let n = xi.len() as f64;
            let mean = xi.iter().sum::<f64>() / n;
            let var = xi.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let sd = (var / n).sqrt();
            assert!(mean.abs() < 4.0 * sd, "channel {k}: mean {mean}, sd {sd}");
            assert!((var * cfg.dt - 1.0).abs() < 0.1, "channel {k}: var*dt {}", var * cfg.dt);
        }
    }

    #[test]
    fn diffusive_mean_matches_master_equation_short_time() {
        let model = fig1_model();
        let cfg = IntegratorConfig::with_dt(2e-3);
        let s = model.space().clone();
        let psi0 = StateVector::from_slice(&s, &[ONE, ONE, ONE, ONE]).unwrap();
        let t = 2.0;
        let n = 800;
        let elems = [(0, 0), (1, 1), (2, 2), (3, 3), (1, 2), (0, 3)];
        let mut sum = [C64::new(0.0, 0.0); 6];
        let mut sq = [0.0f64; 6];
        for i in 0..n {
            let rec = run_trajectory(&model, &psi0, t, t, &cfg, &mut NoiseStream::new(17, i), &mut ()).unwrap();
            let p = rec.final_state().projector();
            for (k, &(a, b)) in elems.iter().enumerate() {
                sum[k] += p[(a, b)];
                sq[k] += p[(a, b)].norm_sqr();
            }
        }
        let exact = propagate(&model, &DensityMatrix::pure(&psi0), t).unwrap();
        let nf = n as f64;
        for (k, &(a, b)) in elems.iter().enumerate() {
            let mean = sum[k] / nf;
            let var = (sq[k] / nf - mean.norm_sqr()).max(0.0);
            let se = (var / (nf - 1.0)).sqrt();
            let err = (mean - exact.matrix()[(a, b)]).norm();
            assert!(err < 4.0 * se + 2e-3, "element ({a},{b}): err {err}, se {se}");
        }
    }
}
