//! Command-line front end: steady-state analysis, single trajectories,
//! ensembles and sweeps, written as CSV or JSON.
//!
//! Every output file carries the resolved configuration and master seed.
//! CSV files hold them in `# key: value` comment lines above the header;
//! JSON files under `"config"` and `"seed"`. Passing an output file back
//! through `--config` reproduces it.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::ensemble::{run_ensemble, sweep, EnsembleResult, Histogram, SweepResult};
use crate::error::{Error, Result};
use crate::hilbert::DensityMatrix;
use crate::lindblad::{
    analytic_steady_state, classical_tongue, correlator_steady, marginal_excitation, steady_phase,
    steady_state_numeric,
};
use crate::metrics::WindowSpec;
use crate::noise::NoiseStream;
use crate::sse::{run_trajectory, InitialStateSampler};

mod config;

pub use config::{
    parse_config, parse_layer, preset, read_layer, resolve, Ensemble, Integrator, Mode, Output, OutputFormat,
    Overrides, Physics, RunConfig, Sweep, Trajectory, Units, Variant, CONFIG_MARKER, PRESETS,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "vdpsync", version, about = "Synchronization statistics of two quantum Van der Pol oscillators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Steady state, correlator, locking phase and tongue boundary.
    Steady(CommonArgs),
    /// One monitored trajectory as a time series.
    Trajectory(CommonArgs),
    /// Distributions of time-averaged indicators over many trajectories.
    Ensemble(CommonArgs),
    /// Indicator statistics over a (detuning, coupling) grid.
    Sweep(CommonArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML or JSON configuration, or an earlier output file.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "NAME")]
    pub preset: Option<String>,
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Trajectory count (ensemble, sweep) or trajectory index (trajectory).
    #[arg(long, value_name = "N")]
    pub traj: Option<u64>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Worker threads; results do not depend on it.
    #[arg(long, value_name = "N")]
    pub threads: Option<usize>,
}

impl CommonArgs {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            preset: self.preset.clone(),
            seed: self.seed,
            traj: self.traj,
            out: self.out.clone(),
            format: self.format.map(|f| match f {
                FormatArg::Csv => OutputFormat::Csv,
                FormatArg::Json => OutputFormat::Json,
            }),
        }
    }
}

pub fn exit_code(err: &Error) -> i32 {
    if err.is_config_error() || matches!(err, Error::Io(_)) {
        EXIT_CONFIG
    } else {
        EXIT_NUMERICAL
    }
}

/// Parses, runs and maps the outcome to an exit code.
pub fn run(cli: Cli) -> i32 {
    match execute(&cli.command) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Runs a subcommand and returns the files written.
pub fn execute(command: &Command) -> Result<Vec<PathBuf>> {
    let args = match command {
        Command::Steady(a) | Command::Trajectory(a) | Command::Ensemble(a) | Command::Sweep(a) => a,
    };
    let cfg = parse_config(args.config.as_deref(), &args.overrides())?;
    let go = || match command {
        Command::Steady(_) => cmd_steady(&cfg),
        Command::Trajectory(_) => cmd_trajectory(&cfg),
        Command::Ensemble(_) => cmd_ensemble(&cfg),
        Command::Sweep(_) => cmd_sweep(&cfg),
    };
    match args.threads {
        Some(0) => Err(Error::Config("--threads must be at least 1".into())),
        Some(n) => crate::ensemble::with_threads(n, go)?,
        None => go(),
    }
}

/// Output file with metadata header.
struct Sink<'a> {
    cfg: &'a RunConfig,
    command: &'static str,
    written: Vec<PathBuf>,
}

impl<'a> Sink<'a> {
    fn new(cfg: &'a RunConfig, command: &'static str) -> Result<Self> {
        fs::create_dir_all(&cfg.output.dir)
            .map_err(|e| Error::Io(format!("cannot create {}: {e}", cfg.output.dir.display())))?;
        Ok(Self {
            cfg,
            command,
            written: Vec::new(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.cfg.output.dir.join(name)
    }

    fn write(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.path(name);
        fs::write(&path, body).map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))?;
        self.written.push(path);
        Ok(())
    }

    /// CSV with `# key: value` metadata lines, then header and rows.
    fn csv(&mut self, name: &str, meta: &[(&str, String)], header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
        let mut s = String::new();
        writeln!(s, "# vdpsync {}", self.command).ok();
        writeln!(s, "# seed: {}", self.cfg.seed).ok();
        writeln!(s, "{CONFIG_MARKER}{}", self.cfg.to_json()).ok();
        writeln!(s, "# units: {}", units_label(self.cfg.physics.units)).ok();
        for (k, v) in meta {
            writeln!(s, "# {k}: {v}").ok();
        }
        writeln!(s, "{}", header.join(",")).ok();
        for row in rows {
            let cells: Vec<String> = row.iter().map(|v| fmt_num(*v)).collect();
            writeln!(s, "{}", cells.join(",")).ok();
        }
        self.write(name, &s)
    }

    fn json(&mut self, name: &str, data: Value) -> Result<()> {
        let doc = json!({
            "command": self.command,
            "seed": self.cfg.seed,
            "units": units_label(self.cfg.physics.units),
            "config": serde_json::to_value(self.cfg).expect("configuration serializes"),
            "data": data,
        });
        let body = serde_json::to_string_pretty(&doc).expect("output serializes");
        self.write(name, &body)
    }
}

fn units_label(u: Units) -> &'static str {
    match u {
        Units::GammaUp => "rates in multiples of gamma_up; times absolute",
        Units::Absolute => "absolute",
    }
}

/// Shortest round-trip representation; NaN marks undefined values.
fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v}")
    }
}

fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

fn matrix_rows(rho: &DensityMatrix) -> Vec<Vec<f64>> {
    let m = rho.matrix();
    let mut rows = Vec::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            rows.push(vec![i as f64, j as f64, m[(i, j)].re, m[(i, j)].im]);
        }
    }
    rows
}

/// Steady state and its indicators; with a `[sweep]` grid also the
/// analytic `|C_pi|` map.
pub fn cmd_steady(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let (params, model) = cfg.physics.model()?;
    let mut sink = Sink::new(cfg, "steady")?;
    let u = cfg.physics.rate_unit();
    let quantum_limit = params.is_quantum_limit();
    let rho = if quantum_limit {
        analytic_steady_state(&params)?
    } else {
        steady_state_numeric(&model)?
    };
    let mut summary: Vec<(&str, f64)> = Vec::new();
    if quantum_limit {
        let c = correlator_steady(&params)?;
        summary.extend([
            ("c_pi_re", c.re),
            ("c_pi_im", c.im),
            ("c_pi_abs", c.norm()),
            ("delta_phi_pi", steady_phase(&params)?),
            ("p", marginal_excitation(&params)?),
            ("tongue_v", classical_tongue(params.delta_omega()) / u),
        ]);
    }
    match cfg.output.format {
        OutputFormat::Csv => {
            sink.csv("steady_state.csv", &[], &["row", "col", "re", "im"], &matrix_rows(&rho))?;
            let meta: Vec<(&str, String)> = summary.iter().map(|(k, v)| (*k, fmt_num(*v))).collect();
            let (keys, vals): (Vec<&str>, Vec<f64>) = summary.iter().cloned().unzip();
            sink.csv("steady_summary.csv", &meta, &keys, &[vals])?;
        }
        OutputFormat::Json => {
            let m: Vec<Value> = matrix_rows(&rho)
                .into_iter()
                .map(|r| json!({"row": r[0], "col": r[1], "re": r[2], "im": r[3]}))
                .collect();
            let mut data = serde_json::Map::new();
            data.insert("steady_state".into(), Value::Array(m));
            for (k, v) in &summary {
                data.insert((*k).into(), num(*v));
            }
            sink.json("steady.json", Value::Object(data))?;
        }
    }
    if cfg.sweep.is_some() {
        let grid = cfg.sweep_grid()?;
        let r = sweep(&params, &grid, None)?;
        let rows: Vec<Vec<f64>> = r
            .points
            .iter()
            .map(|p| {
                vec![
                    p.delta_omega / u,
                    p.coupling / u,
                    p.correlator_abs_analytic,
                    p.delta_phi_analytic,
                    p.tongue_coupling / u,
                ]
            })
            .collect();
        let header = ["delta_omega", "coupling", "c_pi_abs", "delta_phi_pi", "tongue_v"];
        write_table(&mut sink, "steady_grid", &header, &rows)?;
    }
    Ok(sink.written)
}

fn write_table(sink: &mut Sink, stem: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    match sink.cfg.output.format {
        OutputFormat::Csv => sink.csv(&format!("{stem}.csv"), &[], header, rows),
        OutputFormat::Json => {
            let table: Vec<Value> = rows
                .iter()
                .map(|r| Value::Object(header.iter().zip(r).map(|(k, v)| ((*k).to_string(), num(*v))).collect()))
                .collect();
            sink.json(&format!("{stem}.json"), Value::Array(table))
        }
    }
}

/// Time series of one trajectory.
pub fn cmd_trajectory(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let (params, model) = cfg.physics.model()?;
    let ens = cfg.ensemble_config(&model)?;
    let rho0 = ens.initial.density(&model)?;
    let index = cfg.trajectory.index;
    let mut noise = NoiseStream::new(cfg.seed, index);
    let psi0 = InitialStateSampler::new(&rho0)?.draw(&mut noise.initial_state_rng());
    let rec = run_trajectory(
        &model,
        &psi0,
        cfg.trajectory.total_time,
        ens.sample_interval,
        &ens.integrator,
        &mut noise,
        &mut (),
    )?;
    let window = WindowSpec::new(ens.window_for(&params), rec.sample_interval())?;
    let samples = rec.indicator_samples(&window)?;
    let rows: Vec<Vec<f64>> = samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            vec![
                s.t,
                s.correlator.map_or(f64::NAN, |c| c.norm()),
                s.delta_phi.unwrap_or(f64::NAN),
                s.pearson.unwrap_or(f64::NAN),
                rec.x1()[i],
                rec.x2()[i],
                s.entropy,
            ]
        })
        .collect();
    let mut sink = Sink::new(cfg, "trajectory")?;
    let mut meta = vec![
        ("trajectory_index", index.to_string()),
        ("dt", fmt_num(rec.dt())),
        ("pearson_window", fmt_num(window.width)),
    ];
    if let (Ok(c), Ok(phi)) = (correlator_steady(&params), steady_phase(&params)) {
        meta.push(("c_pi_abs", fmt_num(c.norm())));
        meta.push(("delta_phi_pi", fmt_num(phi)));
    }
    let header = ["t", "c_abs", "delta_phi", "pearson", "x1", "x2", "entropy"];
    match cfg.output.format {
        OutputFormat::Csv => sink.csv("trajectory.csv", &meta, &header, &rows)?,
        OutputFormat::Json => {
            let mut data = serde_json::Map::new();
            for (k, v) in &meta {
                data.insert((*k).into(), json!(v));
            }
            for (c, name) in header.iter().enumerate() {
                data.insert((*name).into(), Value::Array(rows.iter().map(|r| num(r[c])).collect()));
            }
            sink.json("trajectory.json", Value::Object(data))?;
        }
    }
    if cfg.trajectory.binary_dump {
        let mut buf = Vec::new();
        rec.write_binary(&mut buf)?;
        let path = sink.path("trajectory.bin");
        fs::write(&path, buf).map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))?;
        sink.written.push(path);
    }
    Ok(sink.written)
}

fn histogram_rows(h: &Histogram) -> Vec<Vec<f64>> {
    h.centers().into_iter().zip(h.densities()).map(|(c, d)| vec![c, d]).collect()
}

fn summary_json(r: &EnsembleResult) -> Value {
    json!({
        "n_trajectories": r.config.n_trajectories,
        "n_ok": r.n_ok(),
        "failures": r.failures,
        "params": r.params,
        "burn_in": r.burn_in,
        "total_time": r.burn_in + r.config.averaging_time,
        "pearson_window": r.window,
        "stats": r.stats,
        "histogram_exclusions": {
            "delta_phi": r.histograms.delta_phi.excluded,
            "correlator_abs": r.histograms.correlator_abs.excluded,
            "pearson": r.histograms.pearson.excluded,
            "entropy": r.histograms.entropy.excluded,
        },
        "sample_exclusions": {
            "correlator": r.trajectories.iter().map(|t| t.averages.correlator_excluded).sum::<usize>(),
            "pearson": r.trajectories.iter().map(|t| t.averages.pearson_excluded).sum::<usize>(),
        },
        "reference": r.reference,
        "phase_variance_convention": r.phase_variance_convention,
    })
}

/// Ensembles for the base parameters or for each configured variant.
pub fn cmd_ensemble(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let mut runs = Vec::new();
    if cfg.variants.is_empty() {
        runs.push((cfg.preset.clone().unwrap_or_else(|| "ensemble".into()), cfg.physics));
    } else {
        for v in &cfg.variants {
            runs.push((v.label.clone(), cfg.variant_physics(v)));
        }
    }
    let mut sink = Sink::new(cfg, "ensemble")?;
    for (label, physics) in runs {
        let (params, model) = physics.model()?;
        let ens = cfg.ensemble_config(&model)?;
        let r = run_ensemble(&model, &params, &ens)?;
        let h = &r.histograms;
        match cfg.output.format {
            OutputFormat::Csv => {
                let meta = [("label", label.clone())];
                for (name, hist) in [
                    ("delta_phi", &h.delta_phi),
                    ("c_abs", &h.correlator_abs),
                    ("pearson", &h.pearson),
                    ("entropy", &h.entropy),
                ] {
                    sink.csv(
                        &format!("{label}_hist_{name}.csv"),
                        &meta,
                        &["bin_center", "density"],
                        &histogram_rows(hist),
                    )?;
                }
                let scatter: Vec<Vec<f64>> = r.scatter.iter().map(|&(p, s)| vec![p, s]).collect();
                sink.csv(&format!("{label}_scatter.csv"), &meta, &["delta_phi", "entropy"], &scatter)?;
                sink.json(&format!("{label}_summary.json"), summary_json(&r))?;
            }
            OutputFormat::Json => {
                let mut data = summary_json(&r);
                let hist = |h: &Histogram| json!({"bin_center": h.centers(), "density": h.densities(), "counts": h.counts});
                data["histograms"] = json!({
                    "delta_phi": hist(&h.delta_phi),
                    "c_abs": hist(&h.correlator_abs),
                    "pearson": hist(&h.pearson),
                    "entropy": hist(&h.entropy),
                });
                data["scatter"] = json!(r.scatter);
                sink.json(&format!("{label}_ensemble.json"), data)?;
            }
        }
    }
    Ok(sink.written)
}

fn sweep_rows(r: &SweepResult, unit: f64) -> Vec<Vec<f64>> {
    r.points
        .iter()
        .map(|p| {
            let s = p.stats.as_ref();
            let f = |g: fn(&crate::ensemble::PointStats) -> f64| s.map_or(f64::NAN, g);
            vec![
                p.delta_omega / unit,
                p.coupling / unit,
                p.correlator_abs_analytic,
                p.delta_phi_analytic,
                p.tongue_coupling / unit,
                f(|s| s.var_delta_phi),
                f(|s| s.var_correlator_abs),
                f(|s| s.var_entropy),
                f(|s| s.mean_entropy),
                f(|s| s.entropy_tail_mass),
                f(|s| s.n_ok as f64),
                f(|s| s.n_failed as f64),
            ]
        })
        .collect()
}

pub const SWEEP_COLUMNS: [&str; 12] = [
    "delta_omega",
    "coupling",
    "c_pi_abs",
    "delta_phi_pi",
    "tongue_v",
    "var_delta_phi",
    "var_c_abs",
    "var_entropy",
    "mean_entropy",
    "entropy_tail_mass",
    "n_ok",
    "n_failed",
];

/// Statistics over the configured grid; failed points keep NaN statistics
/// and their error is listed in the metadata.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let params = cfg.physics.params()?;
    let grid = cfg.sweep_grid()?;
    let analytic_only = cfg.sweep.as_ref().is_some_and(|s| s.analytic_only);
    let ens = if analytic_only {
        None
    } else {
        let (_, model) = cfg.physics.model()?;
        Some(cfg.ensemble_config(&model)?)
    };
    let r = sweep(&params, &grid, ens.as_ref())?;
    let rows = sweep_rows(&r, cfg.physics.rate_unit());
    let mut sink = Sink::new(cfg, "sweep")?;
    let errors: Vec<(String, String)> = r
        .points
        .iter()
        .filter_map(|p| p.error.as_ref().map(|e| (format!("{},{}", p.delta_omega, p.coupling), e.clone())))
        .collect();
    match cfg.output.format {
        OutputFormat::Csv => {
            let meta: Vec<(&str, String)> = errors.iter().map(|(k, e)| ("point_error", format!("{k}: {e}"))).collect();
            let mut meta = meta;
            meta.push(("phase_variance", crate::ensemble::PHASE_VARIANCE_CONVENTION.into()));
            sink.csv("sweep.csv", &meta, &SWEEP_COLUMNS, &rows)?;
        }
        OutputFormat::Json => {
            let table: Vec<Value> = rows
                .iter()
                .map(|row| Value::Object(SWEEP_COLUMNS.iter().zip(row).map(|(k, v)| ((*k).to_string(), num(*v))).collect()))
                .collect();
            sink.json(
                "sweep.json",
                json!({"points": table, "errors": errors, "phase_variance": crate::ensemble::PHASE_VARIANCE_CONVENTION}),
            )?;
        }
    }
    Ok(sink.written)
}

/// Reads the resolved configuration back from an output file.
pub fn config_of_output(path: &Path) -> Result<RunConfig> {
    resolve(Some(read_layer(path)?), &Overrides::default())
}
