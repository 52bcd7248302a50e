//! Run configuration: presets, file loading, merging and validation.
//!
//! A configuration is assembled as preset, then file, then command-line
//! flags, each layer overriding individual keys of the one before. Files may
//! be TOML, JSON, or any output file written by this tool (the resolved
//! configuration embedded in its metadata is read back).

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ensemble::{EnsembleConfig, InitialCondition, SweepGrid, DEFAULT_BINS};
use crate::error::{Error, Result};
use crate::hilbert::FockSpace;
use crate::lindblad::{build_vdp_model, Damping, LindbladModel, VdpParams};
use crate::sse::IntegratorConfig;

/// Prefix of the metadata line carrying the resolved configuration.
pub const CONFIG_MARKER: &str = "# config: ";

pub const PRESETS: [&str; 8] = ["fig1", "fig2a", "fig2b", "fig2c", "fig3", "figS1", "figS2a", "figS2b"];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Units {
    /// Detuning, coupling and decay rates in multiples of `gamma_up`.
    #[default]
    GammaUp,
    Absolute,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Mode {
    #[default]
    QuantumLimit,
    /// Finite nonlinear damping on `levels` Fock states per oscillator.
    FiniteTruncation { gamma_down: f64, levels: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Physics {
    pub units: Units,
    /// Always absolute.
    pub gamma_up: f64,
    /// Always absolute.
    pub omega1: f64,
    pub delta_omega: f64,
    pub coupling: f64,
    pub theta: f64,
    pub mode: Mode,
}

impl Default for Physics {
    fn default() -> Self {
        Self {
            units: Units::GammaUp,
            gamma_up: 0.01,
            omega1: 2.0 * PI,
            delta_omega: 0.0,
            coupling: 0.0,
            theta: 0.0,
            mode: Mode::QuantumLimit,
        }
    }
}

impl Physics {
    /// Factor turning configured rates into absolute ones.
    pub fn rate_unit(&self) -> f64 {
        match self.units {
            Units::GammaUp => self.gamma_up,
            Units::Absolute => 1.0,
        }
    }

    pub fn params(&self) -> Result<VdpParams> {
        let u = self.rate_unit();
        let mut p = VdpParams::quantum_limit(self.omega1, self.delta_omega * u, self.gamma_up, self.coupling * u, self.theta);
        if let Mode::FiniteTruncation { gamma_down, .. } = self.mode {
            p.damping = Damping::Finite {
                gamma_down_1: gamma_down * u,
                gamma_down_2: gamma_down * u,
            };
        }
        p.validate()?;
        Ok(p)
    }

    pub fn space(&self) -> Result<FockSpace> {
        match self.mode {
            Mode::QuantumLimit => Ok(FockSpace::qubit_pair()),
            Mode::FiniteTruncation { levels, .. } => FockSpace::new(vec![levels, levels]),
        }
    }

    pub fn model(&self) -> Result<(VdpParams, LindbladModel)> {
        let p = self.params()?;
        let m = build_vdp_model(&p, &self.space()?)?;
        Ok((p, m))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Integrator {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub renormalize_every_step: bool,
    pub truncation_leak_tol: f64,
    pub record_currents: bool,
}

impl Default for Integrator {
    fn default() -> Self {
        Self {
            dt: None,
            renormalize_every_step: true,
            truncation_leak_tol: 1e-3,
            record_currents: false,
        }
    }
}

/// Times are absolute.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ensemble {
    pub n_trajectories: usize,
    pub averaging_time: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_interval: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<f64>,
    pub bins: usize,
    pub initial: InitialCondition,
}

impl Default for Ensemble {
    fn default() -> Self {
        Self {
            n_trajectories: 1000,
            averaging_time: 100.0,
            burn_in: None,
            sample_interval: None,
            window: None,
            bins: DEFAULT_BINS,
            initial: InitialCondition::SteadyState,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Trajectory {
    pub total_time: f64,
    pub index: u64,
    /// Also write the raw binary record.
    pub binary_dump: bool,
}

impl Default for Trajectory {
    fn default() -> Self {
        Self {
            total_time: 500.0,
            index: 0,
            binary_dump: false,
        }
    }
}

/// Grid in the configured rate units.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sweep {
    pub delta_omegas: Vec<f64>,
    pub couplings: Vec<f64>,
    pub analytic_only: bool,
}

/// Parameter override for one member of a multi-ensemble run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Output {
    pub dir: PathBuf,
    pub format: OutputFormat,
}

impl Default for Output {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            format: OutputFormat::Csv,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub seed: u64,
    pub physics: Physics,
    pub integrator: Integrator,
    pub ensemble: Ensemble,
    pub trajectory: Trajectory,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub variants: Vec<Variant>,
    pub output: Output,
}

/// Command-line overrides, applied last.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub preset: Option<String>,
    pub seed: Option<u64>,
    pub traj: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<OutputFormat>,
}

fn variant(label: &str, delta_omega: Option<f64>, coupling: Option<f64>, theta: Option<f64>) -> Variant {
    Variant {
        label: label.into(),
        delta_omega,
        coupling,
        theta,
    }
}

/// Built-in configuration for one of [`PRESETS`].
pub fn preset(name: &str) -> Result<RunConfig> {
    let mut c = RunConfig {
        preset: Some(name.into()),
        ..RunConfig::default()
    };
    let ph = &mut c.physics;
    match name {
        "fig1" => {
            ph.delta_omega = 0.1;
            ph.coupling = 10.0;
            c.ensemble.window = Some(8.0 * PI / ph.omega1);
        }
        "fig2a" => {
            ph.delta_omega = 1.0;
            c.variants = [5.0, 20.0, 50.0, 100.0]
                .iter()
                .map(|&v| variant(&format!("V{v}"), None, Some(v), None))
                .collect();
        }
        "fig2b" => {
            c.sweep = Some(Sweep {
                delta_omegas: (0..=60).map(|i| -30.0 + i as f64).collect(),
                couplings: (0..=50).map(|i| 2.0 * i as f64).collect(),
                analytic_only: true,
            });
        }
        "fig2c" => {
            c.sweep = Some(Sweep {
                delta_omegas: vec![1.0],
                couplings: vec![5.0, 20.0, 50.0, 100.0],
                analytic_only: false,
            });
        }
        "fig3" => {
            ph.delta_omega = 1.0;
            c.variants = vec![variant("V5", None, Some(5.0), None), variant("V50", None, Some(50.0), None)];
        }
        "figS1" => {
            ph.delta_omega = 1.0;
            ph.coupling = 100.0;
        }
        "figS2a" => {
            ph.coupling = 20.0;
            c.sweep = Some(Sweep {
                delta_omegas: (0..11).map(|i| -30.0 + 6.0 * i as f64).collect(),
                couplings: vec![20.0],
                analytic_only: false,
            });
        }
        "figS2b" => {
            ph.delta_omega = 1.0;
            ph.coupling = 100.0;
            c.variants = vec![
                variant("theta0", None, None, Some(0.0)),
                variant("theta_pi3", None, None, Some(PI / 3.0)),
                variant("theta_pi2", None, None, Some(PI / 2.0)),
            ];
        }
        other => {
            return Err(Error::Config(format!(
                "unknown preset `{other}` (available: {})",
                PRESETS.join(", ")
            )))
        }
    }
    Ok(c)
}

/// Reads a layer from TOML, JSON, or the metadata of an output file.
pub fn read_layer(path: &Path) -> Result<toml::Value> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_layer(&text, path.extension().and_then(|e| e.to_str()).unwrap_or(""))
}

pub fn parse_layer(text: &str, extension: &str) -> Result<toml::Value> {
    if let Some(line) = text.lines().find(|l| l.starts_with(CONFIG_MARKER)) {
        return json_layer(&line[CONFIG_MARKER.len()..]);
    }
    match extension {
        "json" => {
            let v: serde_json::Value =
                serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?;
            // output files keep the configuration under "config"
            match v.get("config") {
                Some(inner) if v.get("command").is_some() => json_layer(&inner.to_string()),
                _ => json_layer(text),
            }
        }
        _ => toml::from_str(text).map_err(|e| Error::Config(format!("invalid TOML: {e}"))),
    }
}

fn json_layer(text: &str) -> Result<toml::Value> {
    serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid configuration JSON: {e}")))
}

/// Recursively overlays `top` onto `base`; tables merge, everything else
/// is replaced.
fn merge(base: &mut toml::Value, top: toml::Value) {
    match (base, top) {
        (toml::Value::Table(b), toml::Value::Table(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn to_value(c: &RunConfig) -> Result<toml::Value> {
    toml::Value::try_from(c).map_err(|e| Error::Config(format!("cannot encode configuration: {e}")))
}

fn from_value(v: toml::Value) -> Result<RunConfig> {
    v.try_into().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))
}

/// Preset, then file, then flags; the result is validated.
pub fn parse_config(file: Option<&Path>, overrides: &Overrides) -> Result<RunConfig> {
    let layer = file.map(read_layer).transpose()?;
    resolve(layer, overrides)
}

pub fn resolve(layer: Option<toml::Value>, overrides: &Overrides) -> Result<RunConfig> {
    let file_preset = layer
        .as_ref()
        .and_then(|v| v.get("preset"))
        .and_then(|p| p.as_str())
        .map(str::to_owned);
    let preset_name = overrides.preset.clone().or(file_preset);
    let mut value = match &preset_name {
        Some(name) => to_value(&preset(name)?)?,
        None => to_value(&RunConfig::default())?,
    };
    if let Some(layer) = layer {
        // the file must parse on its own so unknown keys are reported
        from_value(layer.clone())?;
        merge(&mut value, layer);
    }
    let mut c = from_value(value)?;
    c.preset = preset_name;
    if let Some(s) = overrides.seed {
        c.seed = s;
    }
    if let Some(n) = overrides.traj {
        c.ensemble.n_trajectories = n as usize;
        c.trajectory.index = n;
    }
    if let Some(d) = &overrides.out {
        c.output.dir = d.clone();
    }
    if let Some(f) = overrides.format {
        c.output.format = f;
    }
    c.validate()?;
    Ok(c)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let (params, model) = self.physics.model()?;
        if let Some(dt) = self.integrator.dt {
            if !(dt > 0.0) {
                return Err(Error::InvalidParameter {
                    field: "integrator.dt",
                    reason: format!("must be positive, got {dt}"),
                });
            }
        }
        if !(self.trajectory.total_time > 0.0) {
            return Err(Error::InvalidParameter {
                field: "trajectory.total_time",
                reason: format!("must be positive, got {}", self.trajectory.total_time),
            });
        }
        if let Some(sw) = &self.sweep {
            if sw.delta_omegas.is_empty() || sw.couplings.is_empty() {
                return Err(Error::Config("sweep grid is empty".into()));
            }
        }
        for v in &self.variants {
            self.variant_params(v)?;
        }
        self.ensemble_config(&model)?.validate(&params)
    }

    pub fn integrator_config(&self, model: &LindbladModel) -> IntegratorConfig {
        let mut cfg = IntegratorConfig::for_model(model);
        if let Some(dt) = self.integrator.dt {
            cfg.dt = dt;
        }
        cfg.renormalize_every_step = self.integrator.renormalize_every_step;
        cfg.truncation_leak_tol = self.integrator.truncation_leak_tol;
        cfg.record_currents = self.integrator.record_currents;
        cfg
    }

    pub fn ensemble_config(&self, model: &LindbladModel) -> Result<EnsembleConfig> {
        let e = &self.ensemble;
        let mut cfg = EnsembleConfig::for_model(model, e.n_trajectories, e.averaging_time);
        cfg.integrator = self.integrator_config(model);
        let dt = cfg.integrator.dt;
        let interval = e.sample_interval.unwrap_or(cfg.sample_interval);
        cfg.sample_interval = (interval / dt).round().max(1.0) * dt;
        cfg.master_seed = self.seed;
        cfg.burn_in = e.burn_in;
        cfg.window = e.window;
        cfg.bins = e.bins;
        cfg.initial = e.initial.clone();
        Ok(cfg)
    }

    /// Physics with a variant's overrides applied (rates in config units).
    pub fn variant_physics(&self, v: &Variant) -> Physics {
        let mut ph = self.physics;
        if let Some(d) = v.delta_omega {
            ph.delta_omega = d;
        }
        if let Some(c) = v.coupling {
            ph.coupling = c;
        }
        if let Some(t) = v.theta {
            ph.theta = t;
        }
        ph
    }

    pub fn variant_params(&self, v: &Variant) -> Result<VdpParams> {
        self.variant_physics(v).params()
    }

    /// Absolute grid for [`crate::ensemble::sweep`].
    pub fn sweep_grid(&self) -> Result<SweepGrid> {
        let sw = self
            .sweep
            .as_ref()
            .ok_or_else(|| Error::Config("no [sweep] grid configured".into()))?;
        let u = self.physics.rate_unit();
        Ok(SweepGrid {
            delta_omegas: sw.delta_omegas.iter().map(|d| d * u).collect(),
            couplings: sw.couplings.iter().map(|v| v * u).collect(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("configuration serializes")
    }
}
