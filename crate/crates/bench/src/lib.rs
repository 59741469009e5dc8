//! Fixed scenarios shared by the benchmarks.

use fuzzymon_core::system::kappa_for_resolution_time;
use fuzzymon_core::{AmplitudeState, Complex64, MeasurementSpec, SystemSpec};

/// Resonant two-level system with `v = 1`, `T_R / (2 pi T_lr) = 0.8`, run for
/// two Rabi periods in `steps` steps.
pub fn correlated_two_level(steps: usize) -> (SystemSpec, MeasurementSpec, AmplitudeState) {
    let system = SystemSpec::two_level(0.0, 1.0, Complex64::new(1.0, 0.0)).expect("valid system");
    let t_r = std::f64::consts::PI;
    let t_lr = t_r / (2.0 * std::f64::consts::PI * 0.8);
    let meas = MeasurementSpec::with_steps(kappa_for_resolution_time(t_lr, 1.0), 2.0 * t_r, steps).expect("valid grid");
    (system, meas, AmplitudeState::basis(2, 0))
}

/// Free system with `n` equally spaced levels in a uniform superposition.
pub fn free_levels(n: usize, steps: usize) -> (SystemSpec, MeasurementSpec, AmplitudeState) {
    let system = SystemSpec::free((0..n).map(|k| k as f64).collect()).expect("valid system");
    let meas = MeasurementSpec::with_steps(1.0, 1.0, steps).expect("valid grid");
    let amp = 1.0 / (n as f64).sqrt();
    (system, meas, AmplitudeState::from_real(&vec![amp; n]))
}
