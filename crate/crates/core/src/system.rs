//! Domain types shared by every part of the library: the monitored system,
//! the measurement parameters, readouts and amplitude states.
//!
//! Units are dimensionless with ħ = 1, so energies and angular frequencies
//! share a unit and times are measured in its inverse.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Absolute tolerance for Hermiticity of the coupling matrix and for
/// deciding that a coupling vanishes.
pub const COUPLING_TOL: f64 = 1e-12;

/// Energy levels of the free Hamiltonian together with the constant
/// interaction-picture coupling matrix `V[n][m] = <phi_n|V|phi_m>`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    levels: Vec<f64>,
    coupling: DMatrix<C64>,
}

impl SystemSpec {
    pub fn new(levels: Vec<f64>, coupling: DMatrix<C64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidSystem("at least one level is required".into()));
        }
        if levels.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidSystem("levels must be finite".into()));
        }
        if let Some(w) = levels.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSystem(format!(
                "levels must be strictly increasing (E[{}] = {} >= E[{}] = {})",
                w,
                levels[w],
                w + 1,
                levels[w + 1]
            )));
        }
        let n = levels.len();
        if coupling.nrows() != n || coupling.ncols() != n {
            return Err(Error::InvalidSystem(format!(
                "coupling is {}x{} but there are {} levels",
                coupling.nrows(),
                coupling.ncols(),
                n
            )));
        }
        for i in 0..n {
            for j in 0..n {
                let a = coupling[(i, j)];
                if !(a.re.is_finite() && a.im.is_finite()) {
                    return Err(Error::InvalidSystem(format!("coupling[{i}][{j}] is not finite")));
                }
                if (a - coupling[(j, i)].conj()).norm() > COUPLING_TOL {
                    return Err(Error::InvalidSystem(format!("coupling is not Hermitian at ({i}, {j})")));
                }
            }
        }
        Ok(Self { levels, coupling })
    }

    /// A multilevel system without coupling.
    pub fn free(levels: Vec<f64>) -> Result<Self> {
        let n = levels.len();
        Self::new(levels, DMatrix::zeros(n, n))
    }

    /// The resonantly driven two-level system with `<phi_1|V|phi_2> = v0`.
    pub fn two_level(e1: f64, e2: f64, v0: C64) -> Result<Self> {
        let coupling = DMatrix::from_row_slice(2, 2, &[C64::new(0.0, 0.0), v0, v0.conj(), C64::new(0.0, 0.0)]);
        Self::new(vec![e1, e2], coupling)
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn coupling(&self) -> &DMatrix<C64> {
        &self.coupling
    }

    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    /// True when every coupling element vanishes within [`COUPLING_TOL`].
    pub fn is_free(&self) -> bool {
        self.coupling.iter().all(|a| a.norm() <= COUPLING_TOL)
    }

    /// Half the Rabi frequency, `v = |V_12|`, for a two-level system.
    pub fn rabi_coupling(&self) -> Option<f64> {
        (self.dim() == 2).then(|| self.coupling[(0, 1)].norm())
    }

    /// Gap `E[index + 1] - E[index]`.
    pub fn gap(&self, index: usize) -> Result<f64> {
        if self.dim() < 2 {
            return Err(Error::NoLevelGap);
        }
        if index + 1 >= self.dim() {
            return Err(Error::InvalidArgument(format!("gap index {index} out of range for {} levels", self.dim())));
        }
        Ok(self.levels[index + 1] - self.levels[index])
    }
}

/// Fuzziness `kappa`, duration `T` and grid step `dt` of the continuous
/// energy measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementSpec {
    kappa: f64,
    duration: f64,
    dt: f64,
    steps: usize,
}

impl MeasurementSpec {
    /// Builds the spec from a step size that must divide the duration.
    pub fn new(kappa: f64, duration: f64, dt: f64) -> Result<Self> {
        check_kappa(kappa)?;
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::InvalidMeasurement(format!("duration must be positive, got {duration}")));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidMeasurement(format!("dt must be positive, got {dt}")));
        }
        if dt > duration * (1.0 + 4.0 * f64::EPSILON) {
            return Err(Error::InvalidMeasurement(format!("dt = {dt} exceeds duration = {duration}")));
        }
        let ratio = duration / dt;
        let steps = ratio.round();
        let tol = 4.0 * f64::EPSILON * steps.max(1.0);
        if (ratio - steps).abs() > tol {
            return Err(Error::InvalidMeasurement(format!(
                "dt = {dt} does not divide duration = {duration} ({ratio} steps)"
            )));
        }
        Ok(Self { kappa, duration, dt, steps: steps as usize })
    }

    /// Builds the spec from a step count; `dt = duration / steps`.
    pub fn with_steps(kappa: f64, duration: f64, steps: usize) -> Result<Self> {
        check_kappa(kappa)?;
        if steps == 0 {
            return Err(Error::InvalidMeasurement("at least one step is required".into()));
        }
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::InvalidMeasurement(format!("duration must be positive, got {duration}")));
        }
        Ok(Self { kappa, duration, dt: duration / steps as f64, steps })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Start time of step `k`.
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    /// Same grid with a different fuzziness.
    pub fn with_kappa(&self, kappa: f64) -> Result<Self> {
        check_kappa(kappa)?;
        Ok(Self { kappa, ..*self })
    }
}

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa.is_finite() && kappa >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidMeasurement(format!("kappa must be finite and >= 0, got {kappa}")))
    }
}

/// Characteristic scales of a measurement on a given system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeScales {
    /// Energy resolution `1/sqrt(kappa T)`.
    pub delta_e_t: f64,
    /// Level resolution time `1/(kappa dE^2)`.
    pub t_lr: f64,
    /// Rabi period `pi/v`; present only for a driven two-level system.
    pub t_r: Option<f64>,
    /// `pi T_lr / T_R`.
    pub nu: Option<f64>,
    /// Reference level gap used for `t_lr`.
    pub gap: f64,
}

/// Resolution, level resolution time and Rabi period for the gap
/// `E[gap_index + 1] - E[gap_index]`.
pub fn time_scales(system: &SystemSpec, meas: &MeasurementSpec, gap_index: usize) -> Result<TimeScales> {
    let gap = system.gap(gap_index)?;
    let kappa = meas.kappa();
    let delta_e_t = 1.0 / (kappa * meas.duration()).sqrt();
    let t_lr = 1.0 / (kappa * gap * gap);
    let t_r = system.rabi_coupling().filter(|&v| v > COUPLING_TOL).map(|v| PI / v);
    let nu = t_r.map(|t_r| PI * t_lr / t_r);
    Ok(TimeScales { delta_e_t, t_lr, t_r, nu, gap })
}

/// `kappa` that yields the level resolution time `t_lr` for the gap `gap`.
pub fn kappa_for_resolution_time(t_lr: f64, gap: f64) -> f64 {
    1.0 / (t_lr * gap * gap)
}

/// A piecewise-constant energy record: `E(t) = values[k]` on
/// `[k dt, (k + 1) dt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Readout {
    values: Vec<f64>,
    dt: f64,
}

impl Readout {
    pub fn new(values: Vec<f64>, dt: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::GridMismatch("readout has no values".into()));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::GridMismatch(format!("readout dt must be positive, got {dt}")));
        }
        Ok(Self { values, dt })
    }

    /// Constant readout on the grid of `meas`.
    pub fn constant(value: f64, meas: &MeasurementSpec) -> Self {
        Self { values: vec![value; meas.steps()], dt: meas.dt() }
    }

    /// Samples `f` at the midpoint of every step of `meas`.
    pub fn from_fn(meas: &MeasurementSpec, mut f: impl FnMut(f64) -> f64) -> Self {
        let dt = meas.dt();
        let values = (0..meas.steps()).map(|k| f((k as f64 + 0.5) * dt)).collect();
        Self { values, dt }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.values.len() as f64 * self.dt
    }

    /// Value of the record at time `t`; the last value extends to `t = T`.
    pub fn value_at(&self, t: f64) -> f64 {
        let k = ((t / self.dt).floor().max(0.0) as usize).min(self.values.len() - 1);
        self.values[k]
    }

    /// Checks that this record lives on the grid of `meas`.
    pub fn check_grid(&self, meas: &MeasurementSpec) -> Result<()> {
        if self.values.len() != meas.steps() {
            return Err(Error::GridMismatch(format!(
                "readout has {} values, measurement has {} steps",
                self.values.len(),
                meas.steps()
            )));
        }
        if (self.dt - meas.dt()).abs() > 1e-12 * meas.dt() {
            return Err(Error::GridMismatch(format!(
                "readout dt = {} differs from measurement dt = {}",
                self.dt,
                meas.dt()
            )));
        }
        Ok(())
    }

    /// Temporal mean of `(E(t) - other(t))^2` over the record.
    pub fn mean_square_deflection(&self, other: &Readout) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::GridMismatch(format!(
                "cannot compare readouts of length {} and {}",
                self.len(),
                other.len()
            )));
        }
        let sum: f64 = self.values.iter().zip(&other.values).map(|(a, b)| (a - b) * (a - b)).sum();
        Ok(sum / self.len() as f64)
    }

    /// Averages consecutive blocks of `bin` steps; a trailing partial block
    /// is averaged over its own length.
    pub fn binned(&self, bin: usize) -> Readout {
        let bin = bin.max(1);
        let values = self.values.chunks(bin).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
        Readout { values, dt: self.dt * bin as f64 }
    }
}

/// Unnormalized expansion coefficients `C_n(t)` in the time-dependent
/// eigenbasis of the free Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeState {
    pub coeffs: DVector<C64>,
    pub time: f64,
}

impl AmplitudeState {
    pub fn new(coeffs: DVector<C64>) -> Self {
        Self { coeffs, time: 0.0 }
    }

    pub fn from_slice(coeffs: &[C64]) -> Self {
        Self::new(DVector::from_column_slice(coeffs))
    }

    /// Real amplitudes; convenient for tests and examples.
    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(DVector::from_iterator(coeffs.len(), coeffs.iter().map(|&c| C64::new(c, 0.0))))
    }

    /// The eigenstate `|phi_n>`.
    pub fn basis(dim: usize, n: usize) -> Self {
        let mut coeffs = DVector::zeros(dim);
        coeffs[n] = C64::new(1.0, 0.0);
        Self::new(coeffs)
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    /// `sum_n |C_n|^2`, the probability density of the readout so far.
    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm_sqr().sqrt();
        Self { coeffs: self.coeffs.map(|c| c / n), time: self.time }
    }

    pub(crate) fn check_normalized(&self, tol: f64) -> Result<()> {
        let n = self.norm_sqr();
        if (n - 1.0).abs() > tol {
            return Err(Error::InvalidState(format!("initial state has norm^2 = {n}, expected 1")));
        }
        Ok(())
    }

    pub(crate) fn check_dim(&self, system: &SystemSpec) -> Result<()> {
        if self.dim() != system.dim() {
            return Err(Error::Dimension { expected: system.dim(), got: self.dim() });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_scales() {
        let sys = SystemSpec::free(vec![0.0, 1.0]).unwrap();
        let meas = MeasurementSpec::new(1.0, 1.0, 0.1).unwrap();
        let ts = time_scales(&sys, &meas, 0).unwrap();
        assert_eq!(ts.delta_e_t, 1.0);
        assert_eq!(ts.t_lr, 1.0);
        assert!(ts.t_r.is_none());
        assert!(ts.nu.is_none());
    }

    #[test]
    fn resolution_halves_when_duration_quadruples() {
        let sys = SystemSpec::free(vec![0.0, 1.0]).unwrap();
        let meas = MeasurementSpec::new(1.0, 4.0, 0.5).unwrap();
        assert_eq!(time_scales(&sys, &meas, 0).unwrap().delta_e_t, 0.5);
    }

    #[test]
    fn nu_at_figure_setting() {
        let sys = SystemSpec::two_level(0.0, 1.0, C64::new(1.0, 0.0)).unwrap();
        let t_r = PI;
        let t_lr = 0.8 / (2.0 * PI) * t_r;
        let meas = MeasurementSpec::with_steps(kappa_for_resolution_time(t_lr, 1.0), 1.0, 10).unwrap();
        let ts = time_scales(&sys, &meas, 0).unwrap();
        assert!((ts.t_r.unwrap() - PI).abs() < 1e-15);
        assert!((ts.nu.unwrap() - 0.4).abs() < 1e-14);
        assert!((ts.t_lr * meas.kappa() * ts.gap * ts.gap - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_level_has_no_gap() {
        let sys = SystemSpec::free(vec![0.3]).unwrap();
        let meas = MeasurementSpec::new(1.0, 1.0, 0.5).unwrap();
        assert_eq!(time_scales(&sys, &meas, 0), Err(Error::NoLevelGap));
    }

    #[test]
    fn band_local_gap() {
        let sys = SystemSpec::free(vec![0.0, 1.0, 3.0]).unwrap();
        let meas = MeasurementSpec::new(1.0, 1.0, 0.5).unwrap();
        assert_eq!(time_scales(&sys, &meas, 1).unwrap().t_lr, 0.25);
        assert!(time_scales(&sys, &meas, 2).is_err());
    }

    #[test]
    fn rejects_bad_systems() {
        assert!(SystemSpec::free(vec![]).is_err());
        assert!(SystemSpec::free(vec![1.0, 1.0]).is_err());
        assert!(SystemSpec::free(vec![1.0, 0.0]).is_err());
        let mut v = DMatrix::zeros(2, 2);
        v[(0, 1)] = C64::new(1.0, 0.0);
        assert!(SystemSpec::new(vec![0.0, 1.0], v.clone()).is_err());
        v[(1, 0)] = C64::new(1.0, 0.0);
        assert!(SystemSpec::new(vec![0.0, 1.0], v).is_ok());
        assert!(SystemSpec::new(vec![0.0, 1.0], DMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(MeasurementSpec::new(1.0, 1.0, 0.3).is_err());
        assert!(MeasurementSpec::new(1.0, 1.0, 2.0).is_err());
        assert!(MeasurementSpec::new(-1.0, 1.0, 0.5).is_err());
        assert!(MeasurementSpec::new(1.0, 0.0, 0.5).is_err());
        let m = MeasurementSpec::new(1.0, PI, PI / 1000.0).unwrap();
        assert_eq!(m.steps(), 1000);
    }

    #[test]
    fn readout_grid_checks() {
        let meas = MeasurementSpec::new(1.0, 1.0, 0.25).unwrap();
        let r = Readout::constant(0.5, &meas);
        assert!(r.check_grid(&meas).is_ok());
        let short = Readout::new(vec![0.0; 3], 0.25).unwrap();
        assert!(short.check_grid(&meas).is_err());
        assert_eq!(r.value_at(0.99), 0.5);
        assert_eq!(r.value_at(1.0), 0.5);
    }

    #[test]
    fn binning_averages_blocks() {
        let r = Readout::new(vec![1.0, 3.0, 5.0, 7.0, 9.0], 0.1).unwrap();
        let b = r.binned(2);
        assert_eq!(b.values(), &[2.0, 6.0, 9.0]);
        assert!((b.dt() - 0.2).abs() < 1e-15);
    }

    proptest::proptest! {
        #[test]
        fn resolution_decreases_with_duration(kappa in 1e-3f64..1e3, t in 1e-3f64..1e3, f in 1.001f64..10.0) {
            let sys = SystemSpec::free(vec![0.0, 1.0]).unwrap();
            let a = MeasurementSpec::with_steps(kappa, t, 4).unwrap();
            let b = MeasurementSpec::with_steps(kappa, t * f, 4).unwrap();
            let sa = time_scales(&sys, &a, 0).unwrap();
            let sb = time_scales(&sys, &b, 0).unwrap();
            proptest::prop_assert!(sb.delta_e_t < sa.delta_e_t);
            proptest::prop_assert_eq!(sa, time_scales(&sys, &a, 0).unwrap());
        }
    }
}
