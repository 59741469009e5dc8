//! Selective evolution: the readout-conditioned non-Hermitian Schrödinger
//! equation
//!
//! ```text
//! dC_n/dt = -kappa (E_n - E(t))^2 C_n - i sum_m V_nm C_m
//! ```
//!
//! integrated with Strang splitting on the readout grid. The state is never
//! renormalized: its squared norm is the probability density of the readout.

use crate::error::{Error, Result};
use crate::propagator::SplitStep;
use crate::system::{AmplitudeState, MeasurementSpec, Readout, SystemSpec};

/// Tolerance on the squared norm of an initial state.
pub const NORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelectiveOptions {
    /// Keep every `record_stride`-th state (the final state is always kept).
    pub record_stride: usize,
}

impl Default for SelectiveOptions {
    fn default() -> Self {
        Self { record_stride: 1 }
    }
}

/// Recorded selective evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// States at `t = 0, s dt, 2 s dt, ...` plus the final state.
    pub states: Vec<AmplitudeState>,
    /// `P(t_k) = sum_n |C_n(t_k)|^2` at every grid point `k = 0..=N`.
    pub prob_density_history: Vec<f64>,
    pub record_stride: usize,
    pub dt: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> &AmplitudeState {
        self.states.last().expect("trajectory always holds the initial state")
    }

    pub fn is_dense(&self) -> bool {
        self.record_stride == 1
    }

    /// Population of level `n` at each recorded time.
    pub fn population(&self, n: usize) -> Vec<f64> {
        self.states.iter().map(|s| s.coeffs[n].norm_sqr()).collect()
    }
}

pub fn evolve_selective(
    initial: &AmplitudeState,
    readout: &Readout,
    system: &SystemSpec,
    meas: &MeasurementSpec,
) -> Result<Trajectory> {
    evolve_selective_with(initial, readout, system, meas, SelectiveOptions::default())
}

pub fn evolve_selective_with(
    initial: &AmplitudeState,
    readout: &Readout,
    system: &SystemSpec,
    meas: &MeasurementSpec,
    opts: SelectiveOptions,
) -> Result<Trajectory> {
    initial.check_dim(system)?;
    initial.check_normalized(NORM_TOL)?;
    readout.check_grid(meas)?;
    if let Some(step) = readout.values().iter().position(|e| !e.is_finite()) {
        return Err(Error::NonFiniteReadout { step });
    }
    if opts.record_stride == 0 {
        return Err(Error::InvalidArgument("record_stride must be at least 1".into()));
    }

    let stepper = SplitStep::new(system, meas);
    let steps = meas.steps();
    let mut coeffs = initial.coeffs.clone();
    let mut states = Vec::with_capacity(steps / opts.record_stride + 2);
    let mut history = Vec::with_capacity(steps + 1);
    states.push(AmplitudeState { coeffs: coeffs.clone(), time: 0.0 });
    history.push(initial.norm_sqr());

    for (k, &e) in readout.values().iter().enumerate() {
        stepper.step(&mut coeffs, e);
        let done = k + 1;
        history.push(coeffs.iter().map(|c| c.norm_sqr()).sum());
        if done % opts.record_stride == 0 || done == steps {
            states.push(AmplitudeState { coeffs: coeffs.clone(), time: meas.time(done) });
        }
    }
    Ok(Trajectory { states, prob_density_history: history, record_stride: opts.record_stride, dt: meas.dt() })
}

/// Probability density `P[E] = sum_n |C_n(T)|^2` of the readout that
/// produced `final_state`.
pub fn probability_density(final_state: &AmplitudeState) -> f64 {
    final_state.norm_sqr()
}

/// Instantaneous `dP/dt = -2 kappa sum_n (E_n - e)^2 |C_n|^2` if the readout
/// currently takes the value `e`.
pub fn prob_decay_rate(state: &AmplitudeState, e_value: f64, system: &SystemSpec, meas: &MeasurementSpec) -> f64 {
    let sum: f64 =
        state.coeffs.iter().zip(system.levels()).map(|(c, &level)| (level - e_value).powi(2) * c.norm_sqr()).sum();
    -2.0 * meas.kappa() * sum
}
