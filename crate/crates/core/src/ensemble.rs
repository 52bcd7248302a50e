//! Monte Carlo over independent trajectories: per-trajectory time averages,
//! their distributions, and parameter sweeps.
//!
//! Trajectories run on the current rayon pool. Results are merged in
//! trajectory-index order, so the output depends only on the master seed and
//! the configuration, never on the number of worker threads.

use std::f64::consts::PI;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{CMatrix, DensityMatrix, StateVector, C64};
use crate::lindblad::{
    build_vdp_model, classical_tongue, correlator_steady, steady_phase, steady_state_numeric,
    LindbladModel, VdpParams,
};
use crate::metrics::{time_average, wrap_around, AveragedIndicators, WindowSpec};
use crate::noise::NoiseStream;
use crate::sse::{run_trajectory, InitialStateSampler, IntegratorConfig, Stepper, Unraveling};

mod stats;

pub use stats::{
    bootstrap_ci, ks_distance, ks_threshold_95, log_log_slope, summarize, two_proportion_z,
    variance, Histogram, Summary, Z_99_ONE_SIDED,
};

/// Largest fraction of aborted trajectories a run tolerates.
pub const FAILURE_BUDGET: f64 = 0.01;
pub const DEFAULT_BINS: usize = 40;
/// Threshold for the entanglement tail mass.
pub const ENTROPY_TAIL: f64 = 0.5;

/// Starting state of every trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialCondition {
    /// Eigenvectors of the numerical steady state, drawn with their weights.
    SteadyState,
    /// Fock basis state with the given occupation per oscillator.
    Fock { levels: Vec<usize> },
    /// Product of `(|0> + |1>)/sqrt(2)` on every oscillator.
    EqualSuperposition,
}

impl InitialCondition {
    pub fn density(&self, model: &LindbladModel) -> Result<DensityMatrix> {
        let space = model.space();
        match self {
            Self::SteadyState => steady_state_numeric(model),
            Self::Fock { levels } => Ok(DensityMatrix::pure(&StateVector::basis(space, levels)?)),
            Self::EqualSuperposition => {
                let mut amps = vec![C64::new(0.0, 0.0); space.total_dim()];
                let n = space.n_factors();
                for bits in 0..(1usize << n) {
                    let levels: Vec<usize> = (0..n).map(|k| (bits >> (n - 1 - k)) & 1).collect();
                    amps[space.index_of(&levels)?] = C64::new(1.0, 0.0);
                }
                Ok(DensityMatrix::pure(&StateVector::from_slice(space, &amps)?))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub n_trajectories: usize,
    pub master_seed: u64,
    /// Length of the time average after the burn-in.
    pub averaging_time: f64,
    /// Defaults to `10 / (3 gamma_up + V)`.
    pub burn_in: Option<f64>,
    pub sample_interval: f64,
    /// Pearson window; defaults to `8 pi / omega_1`.
    pub window: Option<f64>,
    pub integrator: IntegratorConfig,
    pub initial: InitialCondition,
    pub bins: usize,
}

impl EnsembleConfig {
    /// Defaults for `model`: steady-state start, stiffness-limited `dt`,
    /// twenty samples per period of the fastest oscillator.
    pub fn for_model(model: &LindbladModel, n_trajectories: usize, averaging_time: f64) -> Self {
        let integrator = IntegratorConfig::for_model(model);
        let period = 2.0 * PI / model.max_frequency().max(1e-300);
        let interval = (period / 20.0).max(integrator.dt);
        let stride = (interval / integrator.dt).round().max(1.0);
        Self {
            n_trajectories,
            master_seed: 0,
            averaging_time,
            burn_in: None,
            sample_interval: stride * integrator.dt,
            window: None,
            integrator,
            initial: InitialCondition::SteadyState,
            bins: DEFAULT_BINS,
        }
    }

    pub fn burn_in_for(&self, params: &VdpParams) -> f64 {
        self.burn_in.unwrap_or_else(|| default_burn_in(params))
    }

    pub fn total_time_for(&self, params: &VdpParams) -> f64 {
        self.burn_in_for(params) + self.averaging_time
    }

    pub fn window_for(&self, params: &VdpParams) -> f64 {
        self.window.unwrap_or(8.0 * PI / params.omega1)
    }

    pub fn validate(&self, params: &VdpParams) -> Result<()> {
        self.integrator.validate()?;
        if self.n_trajectories == 0 {
            return Err(Error::InvalidParameter {
                field: "n_trajectories",
                reason: "need at least one trajectory".into(),
            });
        }
        let burn = self.burn_in_for(params);
        if !(burn >= 0.0) || !burn.is_finite() {
            return Err(Error::InvalidParameter {
                field: "burn_in",
                reason: format!("must be non-negative, got {burn}"),
            });
        }
        if !(self.averaging_time > 0.0) || !self.averaging_time.is_finite() {
            return Err(Error::InvalidParameter {
                field: "averaging_time",
                reason: format!("must be positive, got {}", self.averaging_time),
            });
        }
        if self.bins == 0 {
            return Err(Error::InvalidParameter {
                field: "bins",
                reason: "need at least one bin".into(),
            });
        }
        WindowSpec::new(self.window_for(params), self.sample_interval)?;
        Ok(())
    }
}

/// Several relaxation times of the slowest collective decay.
pub fn default_burn_in(params: &VdpParams) -> f64 {
    10.0 / (3.0 * params.gamma_up_1 + params.coupling)
}

/// Time-averaged indicators of one trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryIndicators {
    pub index: u64,
    pub averages: AveragedIndicators,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFailure {
    pub index: u64,
    pub error: String,
}

/// Distributions of the four time-averaged indicators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndicatorHistograms {
    /// Over `(theta - pi, theta + pi]`.
    pub delta_phi: Histogram,
    pub correlator_abs: Histogram,
    pub pearson: Histogram,
    pub entropy: Histogram,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndicatorStats {
    /// Phases re-wrapped into `(theta - pi, theta + pi]` before the linear
    /// moments are taken.
    pub delta_phi: Summary,
    pub correlator_abs: Summary,
    pub pearson: Summary,
    pub entropy: Summary,
    /// Mean of the complex correlator over trajectories.
    pub correlator_mean: C64,
    /// `sqrt((Var Re + Var Im) / n)`.
    pub correlator_std_error: f64,
}

/// Steady-state values for comparison; absent outside the symmetric
/// quantum limit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticReference {
    pub correlator: C64,
    pub delta_phi: f64,
    pub tongue_coupling: f64,
}

impl AnalyticReference {
    pub fn for_params(params: &VdpParams) -> Option<Self> {
        Some(Self {
            correlator: correlator_steady(params).ok()?,
            delta_phi: steady_phase(params).ok()?,
            tongue_coupling: classical_tongue(params.delta_omega()),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub params: VdpParams,
    pub config: EnsembleConfig,
    pub burn_in: f64,
    pub window: f64,
    pub trajectories: Vec<TrajectoryIndicators>,
    pub failures: Vec<TrajectoryFailure>,
    pub histograms: IndicatorHistograms,
    pub stats: IndicatorStats,
    /// `(delta_phi, S)` per trajectory with a defined phase.
    pub scatter: Vec<(f64, f64)>,
    pub reference: Option<AnalyticReference>,
    /// How the phase variance is taken; carried into every output.
    pub phase_variance_convention: String,
}

pub const PHASE_VARIANCE_CONVENTION: &str =
    "linear variance of per-trajectory circular-mean phases re-wrapped into (theta - pi, theta + pi]";

impl EnsembleResult {
    fn column(&self, f: impl Fn(&AveragedIndicators) -> Option<f64>) -> Vec<f64> {
        self.trajectories.iter().filter_map(|t| f(&t.averages)).collect()
    }

    /// Per-trajectory phases, re-wrapped around `theta`.
    pub fn delta_phi(&self) -> Vec<f64> {
        let theta = self.params.theta;
        self.column(|a| a.delta_phi.map(|p| wrap_around(p, theta)))
    }

    pub fn correlator_abs(&self) -> Vec<f64> {
        self.column(|a| a.correlator_abs)
    }

    pub fn pearson(&self) -> Vec<f64> {
        self.column(|a| a.pearson)
    }

    pub fn entropy(&self) -> Vec<f64> {
        self.column(|a| Some(a.entropy))
    }

    pub fn correlators(&self) -> Vec<C64> {
        self.trajectories.iter().filter_map(|t| t.averages.correlator).collect()
    }

    pub fn n_ok(&self) -> usize {
        self.trajectories.len()
    }
}

/// Runs `f` on a dedicated pool with `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn check_failures(failures: &[TrajectoryFailure], total: usize) -> Result<()> {
    if failures.len() as f64 > FAILURE_BUDGET * total as f64 {
        return Err(Error::TooManyFailures {
            failed: failures.len(),
            total,
            first: failures.first().map(|f| f.error.clone()).unwrap_or_default(),
        });
    }
    Ok(())
}

/// Integrates `cfg.n_trajectories` diffusive trajectories and reduces them
/// to time-averaged indicator statistics.
pub fn run_ensemble(model: &LindbladModel, params: &VdpParams, cfg: &EnsembleConfig) -> Result<EnsembleResult> {
    cfg.validate(params)?;
    let burn_in = cfg.burn_in_for(params);
    let width = cfg.window_for(params);
    let window = WindowSpec::new(width, cfg.sample_interval)?;
    let rho0 = cfg.initial.density(model)?;
    let sampler = InitialStateSampler::new(&rho0)?;

    let outcomes: Vec<Result<AveragedIndicators>> = (0..cfg.n_trajectories as u64)
        .into_par_iter()
        .map(|index| {
            let mut noise = NoiseStream::new(cfg.master_seed, index);
            let psi0 = sampler.draw(&mut noise.initial_state_rng());
            let rec = run_trajectory(
                model,
                &psi0,
                cfg.total_time_for(params),
                cfg.sample_interval,
                &cfg.integrator,
                &mut noise,
                &mut (),
            )?;
            time_average(&rec.indicator_samples(&window)?, burn_in)
        })
        .collect();

    let mut trajectories = Vec::with_capacity(outcomes.len());
    let mut failures = Vec::new();
    for (index, out) in outcomes.into_iter().enumerate() {
        match out {
            Ok(averages) => trajectories.push(TrajectoryIndicators {
                index: index as u64,
                averages,
            }),
            Err(e) => failures.push(TrajectoryFailure {
                index: index as u64,
                error: e.to_string(),
            }),
        }
    }
    check_failures(&failures, cfg.n_trajectories)?;
    reduce(*params, cfg.clone(), burn_in, width, trajectories, failures)
}

fn reduce(
    params: VdpParams,
    config: EnsembleConfig,
    burn_in: f64,
    window: f64,
    trajectories: Vec<TrajectoryIndicators>,
    failures: Vec<TrajectoryFailure>,
) -> Result<EnsembleResult> {
    let mut result = EnsembleResult {
        reference: AnalyticReference::for_params(&params),
        params,
        config,
        burn_in,
        window,
        trajectories,
        failures,
        histograms: IndicatorHistograms {
            delta_phi: empty_histogram(),
            correlator_abs: empty_histogram(),
            pearson: empty_histogram(),
            entropy: empty_histogram(),
        },
        stats: IndicatorStats {
            delta_phi: stats::summary_unchecked(&[f64::NAN], f64::INFINITY),
            correlator_abs: stats::summary_unchecked(&[f64::NAN], f64::INFINITY),
            pearson: stats::summary_unchecked(&[f64::NAN], f64::INFINITY),
            entropy: stats::summary_unchecked(&[f64::NAN], f64::INFINITY),
            correlator_mean: C64::new(f64::NAN, f64::NAN),
            correlator_std_error: f64::NAN,
        },
        scatter: Vec::new(),
        phase_variance_convention: PHASE_VARIANCE_CONVENTION.into(),
    };
    let bins = result.config.bins;
    let theta = result.params.theta;
    let phi = result.delta_phi();
    let cabs = result.correlator_abs();
    let r = result.pearson();
    let s = result.entropy();
    // quantum limit: each oscillator is a qubit, so S <= ln 2
    let s_max = if result.params.is_quantum_limit() { 2f64.ln() } else { s.iter().cloned().fold(2f64.ln(), f64::max) };

    let hist = |xs: &[f64], lo: f64, hi: f64| -> Result<Histogram> {
        if xs.is_empty() {
            Ok(empty_histogram())
        } else {
            Histogram::new(xs, bins, lo, hi)
        }
    };
    result.histograms = IndicatorHistograms {
        delta_phi: if phi.is_empty() { empty_histogram() } else { Histogram::phases(&phi, bins, theta)? },
        correlator_abs: hist(&cabs, 0.0, 1.0)?,
        pearson: hist(&r, -1.0, 1.0)?,
        entropy: hist(&s, 0.0, s_max)?,
    };
    let summary = |xs: &[f64], tail: f64| {
        if xs.is_empty() {
            stats::summary_unchecked(&[f64::NAN], tail)
        } else {
            stats::summary_unchecked(xs, tail)
        }
    };
    let cs = result.correlators();
    let (cmean, cse) = complex_mean(&cs);
    result.stats = IndicatorStats {
        delta_phi: summary(&phi, f64::INFINITY),
        correlator_abs: summary(&cabs, f64::INFINITY),
        pearson: summary(&r, f64::INFINITY),
        entropy: summary(&s, ENTROPY_TAIL),
        correlator_mean: cmean,
        correlator_std_error: cse,
    };
    result.scatter = result
        .trajectories
        .iter()
        .filter_map(|t| t.averages.delta_phi.map(|p| (wrap_around(p, theta), t.averages.entropy)))
        .collect();
    Ok(result)
}

fn empty_histogram() -> Histogram {
    Histogram {
        edges: Vec::new(),
        counts: Vec::new(),
        total: 0,
        excluded: 0,
    }
}

/// Mean and standard error of a complex sample.
pub fn complex_mean(xs: &[C64]) -> (C64, f64) {
    if xs.is_empty() {
        return (C64::new(f64::NAN, f64::NAN), f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<C64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Settings for [`ensemble_mean_state`].
#[derive(Clone, Debug, PartialEq)]
pub struct MeanStateConfig {
    pub master_seed: u64,
    /// Trajectory indices; disjoint ranges give independent batches.
    pub trajectories: Range<u64>,
    pub integrator: IntegratorConfig,
    pub unraveling: Unraveling,
}

impl MeanStateConfig {
    /// Step count reaching `t`; requested times snap to the step grid.
    pub fn steps_to(&self, t: f64) -> u64 {
        (t / self.integrator.dt).round() as u64
    }

    /// The time actually reached for a requested `t`. Exact references
    /// must be propagated to this time: a coherence rotating at `w` picks
    /// up an error of order `w dt` otherwise.
    pub fn grid_time(&self, t: f64) -> f64 {
        self.steps_to(t) as f64 * self.integrator.dt
    }
}

/// Mean conditioned projector at each of `times` (snapped to the step
/// grid, see [`MeanStateConfig::grid_time`]), starting from states drawn
/// from `rho0`.
pub fn ensemble_mean_state(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    times: &[f64],
    cfg: &MeanStateConfig,
) -> Result<Vec<DensityMatrix>> {
    cfg.integrator.validate()?;
    if let Some(&t) = times.iter().find(|&&t| !(t >= 0.0)) {
        return Err(Error::NegativeTime(t));
    }
    let n = (cfg.trajectories.end.saturating_sub(cfg.trajectories.start)) as usize;
    if n == 0 {
        return Err(Error::InvalidParameter {
            field: "trajectories",
            reason: "empty range".into(),
        });
    }
    let targets: Vec<u64> = times.iter().map(|&t| cfg.steps_to(t)).collect();
    let last = targets.iter().copied().max().unwrap_or(0);
    let sampler = InitialStateSampler::new(rho0)?;
    let d = model.dim();

    let outcomes: Vec<Result<Vec<CMatrix>>> = cfg
        .trajectories
        .clone()
        .into_par_iter()
        .map(|index| {
            let mut noise = NoiseStream::new(cfg.master_seed, index);
            let psi0 = sampler.draw(&mut noise.initial_state_rng());
            let mut psi = psi0.amplitudes().as_slice().to_vec();
            let mut stepper = Stepper::new(model, &cfg.integrator)?;
            let mut out = vec![CMatrix::zeros(d, d); targets.len()];
            let record = |psi: &[C64], step: u64, out: &mut [CMatrix]| {
                for (k, &target) in targets.iter().enumerate() {
                    if target == step {
                        let v = nalgebra::DVector::from_column_slice(psi);
                        out[k] = &v * v.adjoint();
                    }
                }
            };
            record(&psi, 0, &mut out);
            for step in 0..last {
                match cfg.unraveling {
                    Unraveling::Diffusive => stepper.diffusive(&mut psi, &mut noise, step)?,
                    Unraveling::Jump => {
                        stepper.jump(&mut psi, &mut noise, step)?;
                    }
                }
                record(&psi, step + 1, &mut out);
            }
            Ok(out)
        })
        .collect();

    let mut sums = vec![CMatrix::zeros(d, d); targets.len()];
    let mut failures = Vec::new();
    let mut ok = 0usize;
    for (i, out) in outcomes.into_iter().enumerate() {
        match out {
            Ok(ms) => {
                ok += 1;
                for (s, m) in sums.iter_mut().zip(ms) {
                    *s += m;
                }
            }
            Err(e) => failures.push(TrajectoryFailure {
                index: cfg.trajectories.start + i as u64,
                error: e.to_string(),
            }),
        }
    }
    check_failures(&failures, n)?;
    sums.into_iter()
        .map(|s| DensityMatrix::unchecked(s / C64::from(ok as f64), model.space().clone()))
        .collect()
}

/// Rectangular grid of detunings and couplings (absolute rates).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub delta_omegas: Vec<f64>,
    pub couplings: Vec<f64>,
}

impl SweepGrid {
    pub fn len(&self) -> usize {
        self.delta_omegas.len() * self.couplings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Ensemble statistics at one grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointStats {
    pub var_delta_phi: f64,
    pub var_correlator_abs: f64,
    pub var_entropy: f64,
    pub mean_entropy: f64,
    pub entropy_tail_mass: f64,
    pub correlator_mean: C64,
    pub correlator_std_error: f64,
    pub n_ok: usize,
    pub n_failed: usize,
}

impl PointStats {
    fn of(r: &EnsembleResult) -> Self {
        Self {
            var_delta_phi: r.stats.delta_phi.variance,
            var_correlator_abs: r.stats.correlator_abs.variance,
            var_entropy: r.stats.entropy.variance,
            mean_entropy: r.stats.entropy.mean,
            entropy_tail_mass: r.stats.entropy.tail_mass,
            correlator_mean: r.stats.correlator_mean,
            correlator_std_error: r.stats.correlator_std_error,
            n_ok: r.n_ok(),
            n_failed: r.failures.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub delta_omega: f64,
    pub coupling: f64,
    pub correlator_abs_analytic: f64,
    pub delta_phi_analytic: f64,
    pub tongue_coupling: f64,
    pub stats: Option<PointStats>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub base: VdpParams,
    pub grid: SweepGrid,
    /// Row-major: detuning outer, coupling inner.
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn point(&self, i_delta: usize, i_coupling: usize) -> &SweepPoint {
        &self.points[i_delta * self.grid.couplings.len() + i_coupling]
    }
}

/// Parameters at one grid point: `omega_2 = omega_1 + delta_omega`.
pub fn point_params(base: &VdpParams, delta_omega: f64, coupling: f64) -> VdpParams {
    VdpParams {
        omega2: base.omega1 + delta_omega,
        coupling,
        ..*base
    }
}

/// Evaluates the analytic overlays at every grid point and, when `ensemble`
/// is given, runs an ensemble there. Point failures are recorded and the
/// sweep continues.
pub fn sweep(base: &VdpParams, grid: &SweepGrid, ensemble: Option<&EnsembleConfig>) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter {
            field: "grid",
            reason: "empty sweep grid".into(),
        });
    }
    base.validate()?;
    let space = crate::hilbert::FockSpace::qubit_pair();
    let mut points = Vec::with_capacity(grid.len());
    for &dw in &grid.delta_omegas {
        for &v in &grid.couplings {
            let p = point_params(base, dw, v);
            let mut point = SweepPoint {
                delta_omega: dw,
                coupling: v,
                correlator_abs_analytic: correlator_steady(&p)?.norm(),
                delta_phi_analytic: steady_phase(&p)?,
                tongue_coupling: classical_tongue(dw),
                stats: None,
                error: None,
            };
            if let Some(cfg) = ensemble {
                let outcome = build_vdp_model(&p, &space).and_then(|m| run_ensemble(&m, &p, cfg));
                match outcome {
                    Ok(r) => point.stats = Some(PointStats::of(&r)),
                    Err(e) => point.error = Some(e.to_string()),
                }
            }
            points.push(point);
        }
    }
    Ok(SweepResult {
        base: *base,
        grid: grid.clone(),
        points,
    })
}
