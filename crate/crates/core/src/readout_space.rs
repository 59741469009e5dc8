//! The probability measure on readouts.
//!
//! On the grid the functional measure factorizes per step,
//! `d[E] = prod_k sqrt(2 kappa dt / pi) dE_k`, and given the state at the
//! start of step `k` the readout value `E_k` is distributed as a Gaussian
//! mixture with means `E_n`, common variance `1/(4 kappa dt)` and weights
//! given by the populations after the first half rotation of the split step.
//! Sampling each step from that mixture draws whole readouts exactly from
//! `P[E] d[E]` for the split-step propagator.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::propagator::SplitStep;
use crate::selective::NORM_TOL;
use crate::system::{time_scales, AmplitudeState, MeasurementSpec, Readout, SystemSpec};

/// Minimum ensemble size accepted by the Monte Carlo estimators.
pub const MIN_SAMPLES: usize = 100;

/// Per-step density of the functional measure times the diagonal weight,
/// `sqrt(2 kappa dt / pi) exp(-2 kappa dt (e - level)^2)`.
pub fn step_measure_weight(e: f64, level: f64, kappa: f64, dt: f64) -> f64 {
    let d = e - level;
    (2.0 * kappa * dt / std::f64::consts::PI).sqrt() * (-2.0 * kappa * dt * d * d).exp()
}

/// The readouts whose time-mean squared deflection from `center` is at most
/// `(W dE_T)^2`.
///
/// Deflections are evaluated after averaging both curves over bins of
/// `resolution_steps` grid steps. White readout noise has a mean square of
/// order `1/(kappa dt)` on the raw grid, so a bin width much larger than `dt`
/// is needed for bands of a few `dE_T` to be populated.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutBand {
    pub center: Readout,
    /// Half width in units of the resolution `dE_T`; `f64::INFINITY` admits
    /// every readout.
    pub half_width: f64,
    pub resolution_steps: usize,
}

impl ReadoutBand {
    pub fn new(center: Readout, half_width: f64) -> Self {
        Self { center, half_width, resolution_steps: 1 }
    }

    pub fn with_resolution(mut self, steps: usize) -> Self {
        self.resolution_steps = steps.max(1);
        self
    }

    /// Mean squared deflection of `readout` from the center in units of
    /// `delta_e_t^2`.
    pub fn scaled_deflection(&self, readout: &Readout, delta_e_t: f64) -> Result<f64> {
        let a = readout.binned(self.resolution_steps);
        let b = self.center.binned(self.resolution_steps);
        Ok(a.mean_square_deflection(&b)? / (delta_e_t * delta_e_t))
    }

    pub fn contains(&self, readout: &Readout, delta_e_t: f64) -> Result<bool> {
        if self.half_width.is_infinite() {
            return Ok(true);
        }
        Ok(self.scaled_deflection(readout, delta_e_t)? <= self.half_width * self.half_width)
    }
}

/// Independently sampled readouts with their final states.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledEnsemble {
    /// Empty unless readouts were requested.
    pub readouts: Vec<Readout>,
    /// Normalized conditional states at `T`.
    pub final_states: Vec<AmplitudeState>,
    /// `ln P(T)` of each member, the log squared norm of the unnormalized
    /// state. Kept in log form since `P(T)` underflows under strong
    /// monitoring.
    pub ln_probabilities: Vec<f64>,
    /// Probability weight of each member; uniform for the mixture sampler.
    pub weights: Vec<f64>,
}

impl SampledEnsemble {
    pub fn len(&self) -> usize {
        self.final_states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.final_states.is_empty()
    }
}

/// Generator for ensemble member `index`: one ChaCha stream per member.
pub fn member_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws one value from the equal-variance Gaussian mixture with the given
/// (unnormalized) component weights.
pub fn sample_mixture<R: Rng + ?Sized>(rng: &mut R, weights: &[f64], means: &[f64], sd: f64) -> f64 {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    let mut pick = weights.len() - 1;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            pick = i;
            break;
        }
        u -= w;
    }
    let z: f64 = rng.sample(StandardNormal);
    means[pick] + sd * z
}

fn check_sampling(initial: &AmplitudeState, system: &SystemSpec, meas: &MeasurementSpec) -> Result<()> {
    initial.check_dim(system)?;
    initial.check_normalized(NORM_TOL)?;
    if meas.kappa() <= 0.0 {
        return Err(Error::InvalidMeasurement("readout sampling requires kappa > 0".into()));
    }
    Ok(())
}

/// Rescales `coeffs` to unit norm and returns the log of the squared norm
/// that was removed.
fn renormalize(coeffs: &mut DVector<C64>) -> f64 {
    let n2: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
    *coeffs /= C64::new(n2.sqrt(), 0.0);
    n2.ln()
}

/// Sequentially samples a readout and propagates the state along it. Calls
/// `visit(k, e_k)` for every drawn value. Returns the normalized final state
/// and `ln P(T)`.
fn sample_path<R: Rng + ?Sized>(
    initial: &AmplitudeState,
    stepper: &SplitStep,
    steps: usize,
    rng: &mut R,
    mut visit: impl FnMut(usize, f64),
) -> (DVector<C64>, f64) {
    let sd = 1.0 / (2.0 * (stepper.kappa() * stepper.dt()).sqrt());
    let levels = stepper.levels();
    let mut coeffs = initial.coeffs.clone();
    let mut ln_p = renormalize(&mut coeffs);
    let mut weights = vec![0.0; levels.len()];
    for k in 0..steps {
        stepper.rotate_half(&mut coeffs);
        for (w, c) in weights.iter_mut().zip(coeffs.iter()) {
            *w = c.norm_sqr();
        }
        let e = sample_mixture(rng, &weights, levels, sd);
        visit(k, e);
        stepper.damp(&mut coeffs, e);
        stepper.rotate_half(&mut coeffs);
        ln_p += renormalize(&mut coeffs);
    }
    (coeffs, ln_p)
}

/// `ln ||U[E] C0||^2` along a fixed readout, without underflow.
fn ln_norm_along(initial: &AmplitudeState, stepper: &SplitStep, values: &[f64]) -> f64 {
    let mut c = initial.coeffs.clone();
    let mut ln_p = renormalize(&mut c);
    for &e in values {
        stepper.step(&mut c, e);
        ln_p += renormalize(&mut c);
    }
    ln_p
}

/// One readout drawn from `P[E] d[E]` and the final unnormalized state it
/// leaves behind. Under strong monitoring that state can underflow to zero;
/// [`sample_ensemble`] keeps normalized states and log norms instead.
pub fn sample_readout(
    initial: &AmplitudeState,
    system: &SystemSpec,
    meas: &MeasurementSpec,
    rng_seed: u64,
) -> Result<(Readout, AmplitudeState)> {
    check_sampling(initial, system, meas)?;
    let stepper = SplitStep::new(system, meas);
    let mut rng = member_rng(rng_seed, 0);
    let mut values = Vec::with_capacity(meas.steps());
    let (coeffs, ln_p) = sample_path(initial, &stepper, meas.steps(), &mut rng, |_, e| values.push(e));
    let state = AmplitudeState { coeffs: coeffs * C64::new((ln_p / 2.0).exp(), 0.0), time: meas.duration() };
    Ok((Readout::new(values, meas.dt())?, state))
}

/// `n_samples` independent readouts; member `i` uses stream `i` of `rng_seed`
/// so the result does not depend on thread scheduling.
pub fn sample_ensemble(
    initial: &AmplitudeState,
    system: &SystemSpec,
    meas: &MeasurementSpec,
    n_samples: usize,
    rng_seed: u64,
    keep_readouts: bool,
) -> Result<SampledEnsemble> {
    check_sampling(initial, system, meas)?;
    if n_samples == 0 {
        return Err(Error::InvalidArgument("ensemble must have at least one member".into()));
    }
    let stepper = SplitStep::new(system, meas);
    let members: Vec<_> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = member_rng(rng_seed, i as u64);
            let mut values = keep_readouts.then(|| Vec::with_capacity(meas.steps()));
            let (coeffs, ln_p) = sample_path(initial, &stepper, meas.steps(), &mut rng, |_, e| {
                if let Some(v) = values.as_mut() {
                    v.push(e);
                }
            });
            (values, coeffs, ln_p)
        })
        .collect();
    let mut readouts = Vec::new();
    let mut final_states = Vec::with_capacity(n_samples);
    let mut ln_probabilities = Vec::with_capacity(n_samples);
    for (values, coeffs, ln_p) in members {
        if let Some(v) = values {
            readouts.push(Readout::new(v, meas.dt())?);
        }
        final_states.push(AmplitudeState { coeffs, time: meas.duration() });
        ln_probabilities.push(ln_p);
    }
    Ok(SampledEnsemble { readouts, final_states, ln_probabilities, weights: vec![1.0 / n_samples as f64; n_samples] })
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

fn fraction_estimate(hits: usize, n: usize) -> Estimate {
    let p = hits as f64 / n as f64;
    Estimate { value: p, std_error: (p * (1.0 - p) / n as f64).sqrt() }
}

/// Scaled deflections (units of `dE_T^2`) of `n_samples` sampled readouts
/// from the band center. One pass serves any number of band widths.
pub fn sample_deflections(
    initial: &AmplitudeState,
    center: &Readout,
    resolution_steps: usize,
    system: &SystemSpec,
    meas: &MeasurementSpec,
    n_samples: usize,
    rng_seed: u64,
) -> Result<Vec<f64>> {
    check_sampling(initial, system, meas)?;
    center.check_grid(meas)?;
    let delta_e_t = 1.0 / (meas.kappa() * meas.duration()).sqrt();
    let stepper = SplitStep::new(system, meas);
    let band = ReadoutBand::new(center.clone(), f64::INFINITY).with_resolution(resolution_steps);
    (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = member_rng(rng_seed, i as u64);
            let mut values = Vec::with_capacity(meas.steps());
            sample_path(initial, &stepper, meas.steps(), &mut rng, |_, e| values.push(e));
            band.scaled_deflection(&Readout::new(values, meas.dt())?, delta_e_t)
        })
        .collect()
}

/// Fraction of deflections inside each band half width `W` (deflection
/// `<= W^2`), with binomial standard errors.
pub fn band_fractions(deflections: &[f64], widths: &[f64]) -> Vec<Estimate> {
    widths
        .iter()
        .map(|&w| {
            let hits = deflections.iter().filter(|&&d| w.is_infinite() || d <= w * w).count();
            fraction_estimate(hits, deflections.len())
        })
        .collect()
}

/// `Prob([E] in band)` estimated as the fraction of exactly sampled readouts
/// inside the band.
pub fn band_probability(
    initial: &AmplitudeState,
    band: &ReadoutBand,
    system: &SystemSpec,
    meas: &MeasurementSpec,
    n_samples: usize,
    rng_seed: u64,
) -> Result<Estimate> {
    if n_samples < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!("need at least {MIN_SAMPLES} samples, got {n_samples}")));
    }
    let d = sample_deflections(initial, &band.center, band.resolution_steps, system, meas, n_samples, rng_seed)?;
    Ok(band_fractions(&d, &[band.half_width])[0])
}

/// Proposal independent of the state: every step draws from the
/// equal-weight mixture over all levels. Returns `ln(d[E]/q(E))` for the path.
fn proposal_path<R: Rng + ?Sized>(
    stepper: &SplitStep,
    steps: usize,
    rng: &mut R,
    mut visit: impl FnMut(usize, f64),
) -> f64 {
    let kappa_dt = stepper.kappa() * stepper.dt();
    let sd = 1.0 / (2.0 * kappa_dt.sqrt());
    let levels = stepper.levels();
    let uniform = vec![1.0; levels.len()];
    let n = levels.len() as f64;
    let mut log_ratio = 0.0;
    for k in 0..steps {
        let e = sample_mixture(rng, &uniform, levels, sd);
        let mix: f64 = levels.iter().map(|l| (-2.0 * kappa_dt * (e - l).powi(2)).exp()).sum::<f64>() / n;
        log_ratio -= mix.ln();
        visit(k, e);
    }
    log_ratio
}

/// Importance-sampling estimate of `Prob([E] in band)`: readouts drawn from
/// the state-independent proposal, weighted by `P[E] d[E] / q(E)`. Serves as
/// a second estimator next to [`band_probability`].
pub fn band_probability_weighted(
    initial: &AmplitudeState,
    band: &ReadoutBand,
    system: &SystemSpec,
    meas: &MeasurementSpec,
    n_samples: usize,
    rng_seed: u64,
) -> Result<Estimate> {
    check_sampling(initial, system, meas)?;
    band.center.check_grid(meas)?;
    if n_samples < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!("need at least {MIN_SAMPLES} samples, got {n_samples}")));
    }
    let delta_e_t = 1.0 / (meas.kappa() * meas.duration()).sqrt();
    let stepper = SplitStep::new(system, meas);
    let terms: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = member_rng(rng_seed, i as u64);
            let mut values = Vec::with_capacity(meas.steps());
            let ln_ratio = proposal_path(&stepper, meas.steps(), &mut rng, |_, e| values.push(e));
            let readout = Readout::new(values, meas.dt())?;
            if !band.contains(&readout, delta_e_t)? {
                return Ok(0.0);
            }
            Ok((ln_ratio + ln_norm_along(initial, &stepper, readout.values())).exp())
        })
        .collect::<Result<_>>()?;
    Ok(mean_estimate(&terms))
}

fn mean_estimate(terms: &[f64]) -> Estimate {
    let n = terms.len() as f64;
    let mean = terms.iter().sum::<f64>() / n;
    let var = terms.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Estimate { value: mean, std_error: (var / n).sqrt() }
}

/// Result of the generalized unitarity check `int d[E] U^dagger U = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitarityEstimate {
    /// Estimate of `int d[E] U^dagger U`.
    pub operator: DMatrix<C64>,
    /// Standard error of each element (zero for the analytic route).
    pub std_error: DMatrix<f64>,
    /// `max |operator - 1|` over elements.
    pub deviation: f64,
    /// Largest `|operator - 1| / std_error` over elements with a nonzero
    /// error bar.
    pub max_z: f64,
}

/// For `V = 0` the integral factorizes into per-step Gaussian integrals that
/// are evaluated analytically; otherwise it is estimated by importance
/// sampling from the state-independent proposal.
pub fn unitarity_check(
    system: &SystemSpec,
    meas: &MeasurementSpec,
    n_samples: usize,
    rng_seed: u64,
) -> Result<UnitarityEstimate> {
    let n = system.dim();
    let kappa_dt = meas.kappa() * meas.dt();
    if meas.kappa() <= 0.0 {
        return Err(Error::InvalidMeasurement("unitarity check requires kappa > 0".into()));
    }
    if system.is_free() {
        // int sqrt(2 k dt / pi) exp(-2 k dt (e - E_n)^2) de = sqrt(2 k dt / pi) * sqrt(pi / (2 k dt))
        let per_step =
            (2.0 * kappa_dt / std::f64::consts::PI).sqrt() * (std::f64::consts::PI / (2.0 * kappa_dt)).sqrt();
        let total = (0..meas.steps()).fold(1.0, |acc, _| acc * per_step);
        let operator = DMatrix::from_diagonal_element(n, n, C64::new(total, 0.0));
        let deviation = (total - 1.0).abs();
        return Ok(UnitarityEstimate { operator, std_error: DMatrix::zeros(n, n), deviation, max_z: 0.0 });
    }
    if n_samples < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!("need at least {MIN_SAMPLES} samples, got {n_samples}")));
    }
    let stepper = SplitStep::new(system, meas);
    let samples: Vec<DMatrix<C64>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = member_rng(rng_seed, i as u64);
            let mut values = Vec::with_capacity(meas.steps());
            let ln_ratio = proposal_path(&stepper, meas.steps(), &mut rng, |_, e| values.push(e));
            // columns share one scale factor, pulled out each step
            let eye = DMatrix::<C64>::identity(n, n);
            let mut cols: Vec<DVector<C64>> = eye.column_iter().map(|c| c.into_owned()).collect();
            let mut ln_scale = 0.0;
            for &e in &values {
                let mut largest: f64 = 0.0;
                for col in cols.iter_mut() {
                    stepper.step(col, e);
                    largest = largest.max(col.iter().map(|c| c.norm_sqr()).sum());
                }
                for col in cols.iter_mut() {
                    *col /= C64::new(largest.sqrt(), 0.0);
                }
                ln_scale += largest.ln();
            }
            let u = DMatrix::from_columns(&cols);
            u.adjoint() * u * C64::new((ln_ratio + ln_scale).exp(), 0.0)
        })
        .collect();
    let count = n_samples as f64;
    let mean = samples.iter().fold(DMatrix::zeros(n, n), |acc, m| acc + m) / C64::new(count, 0.0);
    let mut std_error = DMatrix::zeros(n, n);
    let mut deviation: f64 = 0.0;
    let mut max_z: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let var = samples.iter().map(|m| (m[(i, j)] - mean[(i, j)]).norm_sqr()).sum::<f64>() / (count - 1.0);
            let se = (var / count).sqrt();
            std_error[(i, j)] = se;
            let target = if i == j { 1.0 } else { 0.0 };
            let dev = (mean[(i, j)] - C64::new(target, 0.0)).norm();
            deviation = deviation.max(dev);
            if se > 0.0 {
                max_z = max_z.max(dev / se);
            }
        }
    }
    Ok(UnitarityEstimate { operator: mean, std_error, deviation, max_z })
}

/// Centered moving average with the window truncated at the ends.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let half = window.max(1) / 2;
    let mut prefix = Vec::with_capacity(values.len() + 1);
    prefix.push(0.0);
    for v in values {
        prefix.push(prefix.last().unwrap() + v);
    }
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(values.len());
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Smoothing window of `T_R / 8` in grid steps.
pub fn rabi_window_steps(t_r: f64, dt: f64) -> usize {
    ((t_r / 8.0 / dt).round() as usize).max(1)
}

/// Pearson correlation between the smoothed readout deviation `E(t) - Ebar`
/// and `(|C_1|^2 - 1/2)(E_1 - E_2)`, the deviation of the readout expected if
/// it followed the populations. `+1` means the readout tracks the state.
pub fn correlation_score(
    readout: &Readout,
    state_curve: &[f64],
    levels: (f64, f64),
    window_steps: usize,
) -> Result<f64> {
    if state_curve.len() != readout.len() {
        return Err(Error::GridMismatch(format!(
            "state curve has {} points, readout has {}",
            state_curve.len(),
            readout.len()
        )));
    }
    let (e1, e2) = levels;
    let mid = 0.5 * (e1 + e2);
    let dev: Vec<f64> = readout.values().iter().map(|e| e - mid).collect();
    let x = moving_average(&dev, window_steps);
    let y: Vec<f64> = state_curve.iter().map(|p| (p - 0.5) * (e1 - e2)).collect();
    Ok(pearson(&x, &y))
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    // a constant series has no covariance with anything
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// `dE_T` of the measurement, as used for band membership.
pub fn resolution(system: &SystemSpec, meas: &MeasurementSpec) -> f64 {
    time_scales(system, meas, 0).map_or(1.0 / (meas.kappa() * meas.duration()).sqrt(), |s| s.delta_e_t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::{most_probable_readout, rabi_solution, MostProbableMethod};
    use std::f64::consts::PI;

    /// Composite Simpson quadrature on [a, b].
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let x = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    #[test]
    fn step_weight_is_normalized() {
        for level in [-3.0, 0.0, 2.5] {
            let total = simpson(|e| step_measure_weight(e, level, 1.0, 0.1), level - 20.0, level + 20.0, 4000);
            assert!((total - 1.0).abs() < 1e-12, "{total}");
        }
        assert_eq!(step_measure_weight(0.3, 0.3, 1.0, 0.1), (0.2 / PI).sqrt());
        let w = step_measure_weight(1.0, 0.0, 1.0, 0.5);
        assert!((w - (1.0 / PI).sqrt() * (-1.0f64).exp()).abs() < 1e-16);
    }

    #[test]
    fn mixture_with_equal_means_is_one_gaussian() {
        let mut rng = member_rng(7, 0);
        let n = 20000;
        let xs: Vec<f64> = (0..n).map(|_| sample_mixture(&mut rng, &[0.9, 0.1], &[1.0, 1.0], 0.5)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 4.0 * 0.5 / (n as f64).sqrt());
        assert!((var - 0.25).abs() < 0.01);
    }

    #[test]
    fn single_level_readouts_center_on_the_level() {
        let sys = SystemSpec::free(vec![0.0, 1.0]).unwrap();
        let meas = MeasurementSpec::with_steps(1.0, 4.0, 400).unwrap();
        let (readout, state) = sample_readout(&AmplitudeState::basis(2, 0), &sys, &meas, 11).unwrap();
        let mean = readout.values().iter().sum::<f64>() / readout.len() as f64;
        // per-step variance 1/(4 kappa dt) = 25, so the mean has sd 0.25
        assert!(mean.abs() < 1.0, "{mean}");
        assert!(state.coeffs[1].norm() == 0.0);
    }

    #[test]
    fn identical_seeds_are_bit_identical() {
        let sys = SystemSpec::two_level(0.0, 1.0, C64::new(1.0, 0.0)).unwrap();
        let meas = MeasurementSpec::with_steps(2.0, 1.0, 50).unwrap();
        let c0 = AmplitudeState::basis(2, 0);
        let a = sample_ensemble(&c0, &sys, &meas, 64, 5, true).unwrap();
        let b = sample_ensemble(&c0, &sys, &meas, 64, 5, true).unwrap();
        assert_eq!(a, b);
        let c = sample_ensemble(&c0, &sys, &meas, 64, 6, true).unwrap();
        assert_ne!(a.readouts, c.readouts);
        assert!((a.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let (r0, s0) = sample_readout(&c0, &sys, &meas, 5).unwrap();
        assert_eq!(r0, a.readouts[0]);
        assert!((s0.normalized().coeffs - &a.final_states[0].coeffs).norm() < 1e-15);
        assert!((s0.norm_sqr().ln() - a.ln_probabilities[0]).abs() < 1e-12);
    }

    #[test]
    fn infinite_band_holds_everything() {
        let sys = SystemSpec::two_level(0.0, 1.0, C64::new(1.0, 0.0)).unwrap();
        let meas = MeasurementSpec::with_steps(2.0, 1.0, 20).unwrap();
        let band = ReadoutBand::new(Readout::constant(0.0, &meas), f64::INFINITY);
        let est = band_probability(&AmplitudeState::basis(2, 0), &band, &sys, &meas, 200, 1).unwrap();
        assert_eq!(est, Estimate { value: 1.0, std_error: 0.0 });
        assert!(band_probability(&AmplitudeState::basis(2, 0), &band, &sys, &meas, 99, 1).is_err());
    }

    #[test]
    fn band_nesting_on_shared_samples() {
        let sys = SystemSpec::two_level(0.0, 1.0, C64::new(1.0, 0.0)).unwrap();
        let meas = MeasurementSpec::with_steps(2.0, PI, 200).unwrap();
        let d =
            sample_deflections(&AmplitudeState::basis(2, 0), &Readout::constant(0.0, &meas), 25, &sys, &meas, 500, 3)
                .unwrap();
        let fr = band_fractions(&d, &[0.5, 1.0, 2.0, 3.0, 5.0, f64::INFINITY]);
        for w in fr.windows(2) {
            assert!(w[0].value <= w[1].value);
        }
        assert_eq!(fr.last().unwrap().value, 1.0);
    }

    #[test]
    fn free_unitarity_is_exact() {
        let sys = SystemSpec::free(vec![0.0, 0.7, 2.0]).unwrap();
        for (kappa, dt) in [(1.0, 0.1), (30.0, 1e-3), (1e-3, 0.5)] {
            let meas = MeasurementSpec::with_steps(kappa, dt * 200.0, 200).unwrap();
            let u = unitarity_check(&sys, &meas, 0, 0).unwrap();
            assert!(u.deviation < 1e-12, "{}", u.deviation);
        }
        let single = SystemSpec::free(vec![1.0]).unwrap();
        let meas = MeasurementSpec::with_steps(1.0, 1.0, 1).unwrap();
        assert!(unitarity_check(&single, &meas, 0, 0).unwrap().deviation <= f64::EPSILON);
    }

    #[test]
    fn two_estimators_agree() {
        let sys = SystemSpec::two_level(0.0, 1.0, C64::new(1.0, 0.0)).unwrap();
        let meas = MeasurementSpec::with_steps(1.5, PI, 64).unwrap();
        let c0 = AmplitudeState::from_real(&[0.8, 0.6]);
        let band = ReadoutBand::new(Readout::constant(0.2, &meas), 2.0).with_resolution(16);
        let a = band_probability(&c0, &band, &sys, &meas, 20000, 9).unwrap();
        let b = band_probability_weighted(&c0, &band, &sys, &meas, 20000, 10).unwrap();
        let z = (a.value - b.value).abs() / (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
        assert!(a.value > 0.05 && a.value < 0.95, "{a:?}");
        assert!(z < 3.5, "{a:?} {b:?}");
    }

    #[test]
    fn correlation_of_most_probable_curve() {
        let sys = SystemSpec::two_level(0.0, 1.0, C64::new(1.0, 0.0)).unwrap();
        let kappa = 1.6;
        let meas = MeasurementSpec::with_steps(kappa, 2.0 * PI, 2000).unwrap();
        let c0 = AmplitudeState::from_real(&[0.9, 0.435_889_894_354_067_4]);
        let mp = most_probable_readout(&c0, &sys, &meas, MostProbableMethod::ZerothOrder).unwrap();
        let pop: Vec<f64> = (0..meas.steps())
            .map(|k| rabi_solution(&c0, 1.0, (k as f64 + 0.5) * meas.dt()).unwrap().coeffs[0].norm_sqr())
            .collect();
        let w = rabi_window_steps(PI, meas.dt());
        let score = correlation_score(&mp.curve, &pop, (0.0, 1.0), w).unwrap();
        assert!(score > 0.99, "{score}");
        let flat = Readout::constant(0.5, &meas);
        assert_eq!(correlation_score(&flat, &pop, (0.0, 1.0), w).unwrap(), 0.0);
        assert!(correlation_score(&flat, &pop[1..], (0.0, 1.0), w).is_err());
    }

    #[test]
    fn white_noise_is_uncorrelated() {
        let n = 200_000;
        let meas = MeasurementSpec::with_steps(1.0, 1.0, n).unwrap();
        let mut rng = member_rng(4, 0);
        let noise = Readout::from_fn(&meas, |_| rng.sample::<f64, _>(StandardNormal));
        let pop: Vec<f64> = (0..n).map(|k| (k as f64 * 1e-3).sin().powi(2)).collect();
        let score = correlation_score(&noise, &pop, (0.0, 1.0), 1).unwrap();
        assert!(score.abs() < 0.01, "{score}");
    }

    #[test]
    fn moving_average_edges() {
        assert_eq!(moving_average(&[1.0, 2.0, 3.0, 4.0], 3), vec![1.5, 2.0, 3.0, 3.5]);
        assert_eq!(moving_average(&[1.0, 2.0], 1), vec![1.0, 2.0]);
    }
}
