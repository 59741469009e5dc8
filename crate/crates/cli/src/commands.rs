//! The four experiment commands.

use std::fs;
use std::path::{Path, PathBuf};

use fuzzymon_core::figure::{figure_data, figure_measurement, FigureOptions, ENVELOPE_WIDTHS};
use fuzzymon_core::oracles::{most_probable_readout, MostProbableMethod};
use fuzzymon_core::readout_space::{resolution, sample_ensemble};
use fuzzymon_core::regime::classify_scales;
use fuzzymon_core::{
    evolve_selective_with, time_scales, MeasurementSpec, Readout, ReadoutBand, SelectiveOptions, SystemSpec,
};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::config::{BandCenter, ConfigError, ExperimentConfig, ReadoutSource};
use crate::output::{json_f64, Cell, Sink, Table};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Input(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => 3,
            _ => 2,
        }
    }
}

impl From<fuzzymon_core::Error> for CliError {
    fn from(e: fuzzymon_core::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Evolve,
    Sample,
    Figure,
    Regime,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Evolve => "evolve",
            Command::Sample => "sample",
            Command::Figure => "figure",
            Command::Regime => "regime",
        }
    }
}

/// Files written by a command and text meant for stdout.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub stdout: String,
}

/// Runs `command`. Relative readout files are resolved against `base_dir`.
pub fn run(command: Command, cfg: &ExperimentConfig, base_dir: &Path, sink: &Sink) -> Result<Outcome, CliError> {
    let system = cfg.system().map_err(CliError::Input)?;
    match command {
        Command::Evolve => evolve(cfg, &system, base_dir, sink),
        Command::Sample => sample(cfg, &system, sink),
        Command::Figure => figure(cfg, &system, sink),
        Command::Regime => regime(cfg, &system, sink),
    }
}

fn require_measurement(cfg: &ExperimentConfig) -> Result<MeasurementSpec, CliError> {
    cfg.measurement()?.ok_or_else(|| {
        CliError::Config(ConfigError {
            line: 0,
            field: "measurement".into(),
            message: "measurement.kappa, measurement.duration and measurement.dt are required".into(),
        })
    })
}

/// One readout value per non-comment line; with several comma-separated
/// columns the last one is taken.
pub fn read_readout_file(path: &Path, meas: &MeasurementSpec) -> Result<Readout, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read readout file {}: {e}", path.display())))?;
    let mut values = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let field = line.rsplit(',').next().unwrap_or("").trim();
        match field.parse::<f64>() {
            Ok(v) => values.push(v),
            // a column header
            Err(_) if values.is_empty() && field.chars().any(|c| c.is_alphabetic()) => continue,
            Err(_) => {
                return Err(CliError::Input(format!("{}:{}: `{field}` is not a number", path.display(), idx + 1)));
            }
        }
    }
    let readout = Readout::new(values, meas.dt()).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    readout.check_grid(meas).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(readout)
}

fn evolve(cfg: &ExperimentConfig, system: &SystemSpec, base_dir: &Path, sink: &Sink) -> Result<Outcome, CliError> {
    let meas = require_measurement(cfg)?;
    let c0 = cfg.initial_state();
    let readout = match &cfg.readout {
        ReadoutSource::Constant(e) => Readout::constant(*e, &meas),
        ReadoutSource::File(p) => read_readout_file(&base_dir.join(p), &meas)?,
        ReadoutSource::MostProbable(m) => most_probable_readout(&c0, system, &meas, *m)?.curve,
    };
    let opts = SelectiveOptions { record_stride: cfg.record_stride };
    let traj = evolve_selective_with(&c0, &readout, system, &meas, opts)?;
    let n = system.dim();

    let mut columns = vec!["t".to_string()];
    for k in 1..=n {
        columns.push(format!("re_c{k}"));
        columns.push(format!("im_c{k}"));
    }
    columns.push("p".into());
    columns.push("e".into());
    let mut table = Table::new(columns);
    let values = readout.values();
    for s in &traj.states {
        let k = (s.time / meas.dt()).round() as usize;
        let mut row = vec![s.time];
        for c in s.coeffs.iter() {
            row.push(c.re);
            row.push(c.im);
        }
        row.push(traj.prob_density_history[k]);
        // value on [t, t + dt); at t = T the last step's value
        row.push(values[k.min(values.len() - 1)]);
        table.push_nums(row);
    }
    let fin = traj.final_state();
    let mut report = Map::new();
    report.insert("t".into(), json!(fin.time));
    report.insert("steps".into(), json!(meas.steps()));
    report.insert("p".into(), json!(fin.norm_sqr()));
    report.insert("final_state".into(), json!(fin.coeffs.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>()));
    let (summary, _) = sink.report("evolve_summary", report)?;
    Ok(Outcome { files: vec![sink.table("trajectory", &table)?, summary], stdout: String::new() })
}

fn sample(cfg: &ExperimentConfig, system: &SystemSpec, sink: &Sink) -> Result<Outcome, CliError> {
    let meas = require_measurement(cfg)?;
    let c0 = cfg.initial_state();
    let center = match cfg.band_center {
        BandCenter::Constant(e) => Readout::constant(e, &meas),
        BandCenter::MostProbable => {
            most_probable_readout(&c0, system, &meas, MostProbableMethod::SelfConsistent)?.curve
        }
    };
    let delta_e_t = resolution(system, &meas);
    let ens = sample_ensemble(&c0, system, &meas, cfg.n_samples, cfg.seed, true)?;
    let band = ReadoutBand::new(center, f64::INFINITY).with_resolution(cfg.bin_steps);

    let mut columns = vec!["index".to_string(), "p".into(), "ln_p".into()];
    columns.extend(cfg.widths.iter().map(|w| format!("in_w_{w}")));
    columns.push("readout_file".into());
    let mut table = Table::new(columns);
    let mut hits = vec![0usize; cfg.widths.len()];
    let mut files = Vec::new();
    for (i, (readout, &ln_p)) in ens.readouts.iter().zip(&ens.ln_probabilities).enumerate() {
        let d = band.scaled_deflection(readout, delta_e_t)?;
        let mut row = vec![Cell::Int(i as u64), Cell::Num(ln_p.exp()), Cell::Num(ln_p)];
        for (w, h) in cfg.widths.iter().zip(hits.iter_mut()) {
            let inside = w.is_infinite() || d <= w * w;
            *h += inside as usize;
            row.push(Cell::Int(inside as u64));
        }
        let dump = if cfg.dump_readouts {
            let mut t = Table::new(["t", "e"]);
            for (k, e) in readout.values().iter().enumerate() {
                t.push_nums([(k as f64 + 0.5) * meas.dt(), *e]);
            }
            let path = sink.table(&format!("readouts/member_{i:06}"), &t)?;
            let rel = sink.relative(&path);
            files.push(path);
            rel
        } else {
            String::new()
        };
        row.push(Cell::Text(dump));
        table.push(row);
    }
    let n = cfg.n_samples as f64;
    let fractions: Vec<Value> = cfg
        .widths
        .iter()
        .zip(&hits)
        .map(|(&w, &h)| {
            let p = h as f64 / n;
            json!({ "w": json_f64(w), "fraction": p, "std_error": (p * (1.0 - p) / n).sqrt() })
        })
        .collect();
    let mut report = Map::new();
    report.insert("n_samples".into(), json!(cfg.n_samples));
    report.insert("seed".into(), json!(cfg.seed));
    report.insert("delta_e_t".into(), json!(delta_e_t));
    report.insert("bin_steps".into(), json!(cfg.bin_steps));
    report.insert("bands".into(), Value::Array(fractions));
    let (summary, _) = sink.report("sample_summary", report)?;
    files.insert(0, sink.table("ensemble", &table)?);
    files.push(summary);
    Ok(Outcome { files, stdout: String::new() })
}

fn figure(cfg: &ExperimentConfig, system: &SystemSpec, sink: &Sink) -> Result<Outcome, CliError> {
    let meas = figure_measurement(system, cfg.figure_ratio, cfg.figure_periods, cfg.figure_steps_per_period)?;
    let opts = FigureOptions {
        widths: cfg.figure_widths.clone(),
        n_samples: cfg.figure_samples,
        seed: cfg.seed,
        bin_steps: None,
    };
    let c0 = cfg.initial_state();
    let fig = figure_data(&c0, system, &meas, &opts)?;
    let scales = time_scales(system, &meas, 0)?;

    let mut a = Table::new(["t", "p1", "p2", "p1_raw", "p2_raw"]);
    for k in 0..fig.times.len() {
        a.push_nums([
            fig.times[k],
            fig.populations[0][k],
            fig.populations[1][k],
            fig.raw_populations[0][k],
            fig.raw_populations[1][k],
        ]);
    }
    let mut b_cols = vec!["t".to_string(), "e_prob".into(), "mean".into()];
    for w in ENVELOPE_WIDTHS {
        b_cols.push(format!("lower_w{w}"));
        b_cols.push(format!("upper_w{w}"));
    }
    let mut b = Table::new(b_cols);
    let envelopes: Vec<(Vec<f64>, Vec<f64>)> = ENVELOPE_WIDTHS.iter().map(|&w| fig.envelope(w)).collect();
    for (k, &e) in fig.e_prob.values().iter().enumerate() {
        let mut row = vec![(k as f64 + 0.5) * meas.dt(), e, fig.mean_line];
        for (lo, hi) in &envelopes {
            row.push(lo[k]);
            row.push(hi[k]);
        }
        b.push_nums(row);
    }
    let mut c = Table::new(["w", "p", "std_error"]);
    for (w, est) in fig.widths.iter().zip(&fig.band_probabilities) {
        c.push_nums([*w, est.value, est.std_error]);
    }
    let omega = fig.state_frequency()?;
    let v = system.rabi_coupling().unwrap_or(0.0);
    let mut report = Map::new();
    report.insert("ratio".into(), json!(cfg.figure_ratio));
    report.insert("kappa".into(), json!(meas.kappa()));
    report.insert("duration".into(), json!(meas.duration()));
    report.insert("dt".into(), json!(meas.dt()));
    report.insert("t_lr".into(), json!(scales.t_lr));
    report.insert("t_r".into(), json!(scales.t_r));
    report.insert("delta_e_t".into(), json!(fig.delta_e_t));
    report.insert("state_frequency".into(), json!(omega));
    report.insert("rabi_frequency".into(), json!(2.0 * v));
    report.insert("omega_estimate".into(), json_f64((4.0 * v * v - 1.0 / (4.0 * scales.t_lr * scales.t_lr)).sqrt()));
    report.insert("readout_amplitude".into(), json!(fig.readout_amplitude()));
    report.insert("predicted_amplitude".into(), json!(fig.amplitude));
    report.insert("readout_midline".into(), json!(fig.readout_midline()));
    report.insert("mean_line".into(), json!(fig.mean_line));
    report.insert("bin_steps".into(), json!(fig.bin_steps));
    report.insert("n_samples".into(), json!(cfg.figure_samples));
    let (summary, _) = sink.report("figure", report)?;
    let files = vec![sink.table("figure_a", &a)?, sink.table("figure_b", &b)?, sink.table("figure_c", &c)?, summary];
    Ok(Outcome { files, stdout: String::new() })
}

fn regime(cfg: &ExperimentConfig, system: &SystemSpec, sink: &Sink) -> Result<Outcome, CliError> {
    let meas = require_measurement(cfg)?;
    let scales = time_scales(system, &meas, cfg.gap_index)?;
    let t = meas.duration();
    let label = classify_scales(&scales, t, cfg.thresholds());
    let mut report = Map::new();
    report.insert("t".into(), json!(t));
    report.insert("t_lr".into(), json!(scales.t_lr));
    report.insert("t_r".into(), json!(scales.t_r));
    report.insert("delta_e_t".into(), json!(scales.delta_e_t));
    report.insert("nu".into(), json!(scales.nu));
    report.insert("regime".into(), json!(label.label()));
    report.insert("much".into(), json!(cfg.regime_much));
    report.insert("same_order".into(), json!(cfg.regime_same_order));
    let (path, text) = sink.report("regime", report)?;
    Ok(Outcome { files: vec![path], stdout: text })
}
