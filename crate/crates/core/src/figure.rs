//! Data behind the three-panel picture of a resonantly driven two-level
//! system near the Zeno boundary: (a) the state oscillation under the most
//! probable readout, (b) that readout with bands around it and (c) the
//! probability of a readout falling inside a band of width `W`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::oracles::{most_probable_amplitude, most_probable_readout, MostProbableMethod};
use crate::readout_space::{band_fractions, rabi_window_steps, sample_deflections, Estimate};
use crate::selective::evolve_selective;
use crate::system::{kappa_for_resolution_time, time_scales, AmplitudeState, MeasurementSpec, Readout, SystemSpec};

/// Default `T_R / (2 pi T_lr)`.
pub const DEFAULT_RATIO: f64 = 0.8;

/// Band half widths of panel (b).
pub const ENVELOPE_WIDTHS: [f64; 2] = [2.0, 3.0];

#[derive(Debug, Clone, PartialEq)]
pub struct FigureOptions {
    /// Half widths for panel (c).
    pub widths: Vec<f64>,
    pub n_samples: usize,
    pub seed: u64,
    /// Bin size for band membership; `None` uses `T_R / 8`.
    pub bin_steps: Option<usize>,
}

impl Default for FigureOptions {
    fn default() -> Self {
        Self {
            widths: vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 5.0, 6.0, f64::INFINITY],
            n_samples: 10_000,
            seed: 0,
            bin_steps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureData {
    /// Grid points `t_k`, `k = 0..=N`.
    pub times: Vec<f64>,
    /// `|C_n(t_k)|^2` as evolved (unnormalized).
    pub raw_populations: [Vec<f64>; 2],
    /// `|C_n|^2 / sum_m |C_m|^2`.
    pub populations: [Vec<f64>; 2],
    /// Most probable readout (values at step midpoints).
    pub e_prob: Readout,
    pub mean_line: f64,
    pub delta_e_t: f64,
    /// Predicted oscillation amplitude of `e_prob`.
    pub amplitude: f64,
    pub bin_steps: usize,
    pub widths: Vec<f64>,
    pub band_probabilities: Vec<Estimate>,
}

impl FigureData {
    /// `e_prob +- w dE_T` at step midpoints.
    pub fn envelope(&self, w: f64) -> (Vec<f64>, Vec<f64>) {
        let d = w * self.delta_e_t;
        let v = self.e_prob.values();
        (v.iter().map(|e| e - d).collect(), v.iter().map(|e| e + d).collect())
    }

    /// Angular frequency of the normalized population difference.
    pub fn state_frequency(&self) -> Result<f64> {
        let diff: Vec<f64> = self.populations[0].iter().zip(&self.populations[1]).map(|(a, b)| a - b).collect();
        oscillation_frequency(&diff, self.e_prob.dt())
    }

    /// Half the peak-to-peak swing of the most probable readout.
    pub fn readout_amplitude(&self) -> f64 {
        let (lo, hi) = extremes(self.e_prob.values());
        0.5 * (hi - lo)
    }

    /// Midpoint between the extremes of the most probable readout.
    pub fn readout_midline(&self) -> f64 {
        let (lo, hi) = extremes(self.e_prob.values());
        0.5 * (lo + hi)
    }
}

/// Measurement with `kappa` chosen so that `T_R / (2 pi T_lr) = ratio`, run
/// for `periods` Rabi periods at `steps_per_period` steps each.
pub fn figure_measurement(
    system: &SystemSpec,
    ratio: f64,
    periods: f64,
    steps_per_period: usize,
) -> Result<MeasurementSpec> {
    let (t_r, gap) = resonant_scales(system)?;
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(Error::InvalidArgument(format!("ratio must be positive, got {ratio}")));
    }
    if !(periods > 0.0 && periods.is_finite()) || steps_per_period == 0 {
        return Err(Error::InvalidArgument("periods and steps per period must be positive".into()));
    }
    let t_lr = t_r / (2.0 * PI * ratio);
    let steps = (periods * steps_per_period as f64).round().max(1.0) as usize;
    MeasurementSpec::with_steps(kappa_for_resolution_time(t_lr, gap), periods * t_r, steps)
}

fn resonant_scales(system: &SystemSpec) -> Result<(f64, f64)> {
    if system.dim() != 2 {
        return Err(Error::Dimension { expected: 2, got: system.dim() });
    }
    let v = system
        .rabi_coupling()
        .filter(|v| *v > 0.0)
        .ok_or_else(|| Error::InvalidSystem("figure needs a driven two-level system".into()))?;
    Ok((PI / v, system.gap(0)?))
}

/// All three panels. Panels (a) and (b) use the self-consistent most
/// probable readout; panel (c) samples `n_samples` readouts and bins them
/// before measuring their deflection from it.
pub fn figure_data(
    initial: &AmplitudeState,
    system: &SystemSpec,
    meas: &MeasurementSpec,
    opts: &FigureOptions,
) -> Result<FigureData> {
    let (t_r, _) = resonant_scales(system)?;
    let scales = time_scales(system, meas, 0)?;
    let mp = most_probable_readout(initial, system, meas, MostProbableMethod::SelfConsistent)?;
    let traj = evolve_selective(initial, &mp.curve, system, meas)?;
    let raw = [traj.population(0), traj.population(1)];
    let norms: Vec<f64> = raw[0].iter().zip(&raw[1]).map(|(a, b)| a + b).collect();
    let populations = [
        raw[0].iter().zip(&norms).map(|(p, n)| p / n).collect(),
        raw[1].iter().zip(&norms).map(|(p, n)| p / n).collect(),
    ];
    let bin_steps = opts.bin_steps.unwrap_or_else(|| rabi_window_steps(t_r, meas.dt()));
    let deflections = sample_deflections(initial, &mp.curve, bin_steps, system, meas, opts.n_samples, opts.seed)?;
    Ok(FigureData {
        times: (0..=meas.steps()).map(|k| meas.time(k)).collect(),
        raw_populations: raw,
        populations,
        e_prob: mp.curve,
        mean_line: mp.mean_line,
        delta_e_t: scales.delta_e_t,
        amplitude: most_probable_amplitude(&initial.normalized(), scales.gap),
        bin_steps,
        widths: opts.widths.clone(),
        band_probabilities: band_fractions(&deflections, &opts.widths),
    })
}

/// Angular frequency from the mean spacing of crossings of the midpoint
/// between the extremes of `series` (sampled every `dt`).
pub fn oscillation_frequency(series: &[f64], dt: f64) -> Result<f64> {
    let (lo, hi) = extremes(series);
    let mid = 0.5 * (lo + hi);
    let mut crossings = Vec::new();
    for (k, w) in series.windows(2).enumerate() {
        let (a, b) = (w[0] - mid, w[1] - mid);
        if a != b && (a < 0.0) != (b < 0.0) {
            crossings.push((k as f64 + a / (a - b)) * dt);
        }
    }
    if crossings.len() < 2 {
        return Err(Error::FitFailed(format!("found {} crossings, need at least 2", crossings.len())));
    }
    let span = crossings[crossings.len() - 1] - crossings[0];
    Ok(PI * (crossings.len() - 1) as f64 / span)
}

fn extremes(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}
