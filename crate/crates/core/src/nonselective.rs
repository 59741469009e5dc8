//! Non-selective evolution: the readout-averaged density matrix obeys
//!
//! ```text
//! drho/dt = -i [V, rho] - (kappa/2) [H0, [H0, rho]]
//! ```
//!
//! in the interaction picture. The double commutator damps `rho_nm` at the
//! rate `(kappa/2)(E_n - E_m)^2`; integration uses the same Strang splitting
//! as the selective equation, with the dephasing applied exactly.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::propagator::SplitStep;
use crate::readout_space::SampledEnsemble;
use crate::system::{AmplitudeState, MeasurementSpec, SystemSpec};

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    elements: DMatrix<C64>,
    pub time: f64,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(elements: DMatrix<C64>) -> Result<Self> {
        let n = elements.nrows();
        if n == 0 || elements.ncols() != n {
            return Err(Error::InvalidState("density matrix must be square and non-empty".into()));
        }
        for i in 0..n {
            for j in 0..n {
                if (elements[(i, j)] - elements[(j, i)].conj()).norm() > HERMITIAN_TOL {
                    return Err(Error::InvalidState(format!("density matrix not Hermitian at ({i}, {j})")));
                }
            }
        }
        let tr = elements.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("density matrix trace is {}", tr.re)));
        }
        let min_eig = SymmetricEigen::new(elements.clone()).eigenvalues.min();
        if min_eig < -PSD_TOL {
            return Err(Error::InvalidState(format!("density matrix has eigenvalue {min_eig}")));
        }
        Ok(Self { elements, time: 0.0 })
    }

    /// Projector onto the normalized `state`.
    pub fn from_pure(state: &AmplitudeState) -> Self {
        let psi = state.normalized().coeffs;
        Self { elements: &psi * psi.adjoint(), time: state.time }
    }

    pub fn elements(&self) -> &DMatrix<C64> {
        &self.elements
    }

    pub fn dim(&self) -> usize {
        self.elements.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.elements.trace().re
    }

    pub fn purity(&self) -> f64 {
        (&self.elements * &self.elements).trace().re
    }

    pub fn populations(&self) -> Vec<f64> {
        self.elements.diagonal().iter().map(|z| z.re).collect()
    }

    /// `rho_11 - rho_22`.
    pub fn inversion(&self) -> f64 {
        self.elements[(0, 0)].re - self.elements[(1, 1)].re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.elements.clone()).eigenvalues.min()
    }
}

struct MasterStep {
    split: SplitStep,
    dephasing: DMatrix<f64>,
}

impl MasterStep {
    fn new(system: &SystemSpec, meas: &MeasurementSpec) -> Self {
        let levels = system.levels();
        let n = levels.len();
        let rate = 0.5 * meas.kappa() * meas.dt();
        let dephasing = DMatrix::from_fn(n, n, |i, j| (-rate * (levels[i] - levels[j]).powi(2)).exp());
        Self { split: SplitStep::new(system, meas), dephasing }
    }

    fn rotate(&self, rho: &mut DMatrix<C64>) {
        if let Some(r) = self.split.half_rotation() {
            *rho = r * &*rho * r.adjoint();
        }
    }

    fn step(&self, rho: &mut DMatrix<C64>) {
        self.rotate(rho);
        rho.zip_apply(&self.dephasing, |z, d| *z *= d);
        self.rotate(rho);
        // restore exact Hermiticity lost to rounding
        *rho = (&*rho + rho.adjoint()) * C64::new(0.5, 0.0);
    }
}

/// `rho(T)` under the master equation.
pub fn master_evolve(rho0: &DensityMatrix, system: &SystemSpec, meas: &MeasurementSpec) -> Result<DensityMatrix> {
    Ok(master_evolve_history(rho0, system, meas, meas.steps())?.pop().expect("history holds the final state"))
}

/// Density matrices at `t = 0, s dt, 2 s dt, ...` and at `t = T`.
pub fn master_evolve_history(
    rho0: &DensityMatrix,
    system: &SystemSpec,
    meas: &MeasurementSpec,
    stride: usize,
) -> Result<Vec<DensityMatrix>> {
    if rho0.dim() != system.dim() {
        return Err(Error::Dimension { expected: system.dim(), got: rho0.dim() });
    }
    DensityMatrix::new(rho0.elements.clone())?;
    let stride = stride.max(1);
    let step = MasterStep::new(system, meas);
    let mut rho = rho0.elements.clone();
    let mut out = vec![DensityMatrix { elements: rho.clone(), time: 0.0 }];
    for k in 1..=meas.steps() {
        step.step(&mut rho);
        if k % stride == 0 || k == meas.steps() {
            out.push(DensityMatrix { elements: rho.clone(), time: meas.time(k) });
        }
    }
    Ok(out)
}

/// Ensemble estimate of the non-selective density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleAverage {
    pub rho: DensityMatrix,
    /// Standard error of the real (`re`) and imaginary (`im`) part of each
    /// element.
    pub std_error: DMatrix<C64>,
}

/// `rho = sum_k w_k |psi_k><psi_k| / <psi_k|psi_k>`.
///
/// The mixture sampler already draws readouts with probability `P[E] d[E]`,
/// so each member enters as its normalized final state with its weight.
pub fn ensemble_average(ensemble: &SampledEnsemble) -> Result<DensityMatrix> {
    Ok(ensemble_average_with_error(ensemble)?.rho)
}

pub fn ensemble_average_with_error(ensemble: &SampledEnsemble) -> Result<EnsembleAverage> {
    let first = ensemble.final_states.first().ok_or_else(|| Error::InvalidArgument("ensemble is empty".into()))?;
    if ensemble.weights.len() != ensemble.final_states.len() {
        return Err(Error::InvalidArgument("weights and states differ in length".into()));
    }
    let n = first.dim();
    let total: f64 = ensemble.weights.iter().sum();
    if !(total > 0.0) || ensemble.weights.iter().any(|&w| w < 0.0) {
        return Err(Error::InvalidArgument("weights must be non-negative with positive sum".into()));
    }
    let projectors: Vec<DMatrix<C64>> = ensemble
        .final_states
        .iter()
        .map(|s| {
            let psi = s.normalized().coeffs;
            &psi * psi.adjoint()
        })
        .collect();
    let mut mean = DMatrix::<C64>::zeros(n, n);
    for (p, &w) in projectors.iter().zip(&ensemble.weights) {
        mean += p * C64::new(w / total, 0.0);
    }
    let std_error = DMatrix::from_fn(n, n, |i, j| {
        let (mut vr, mut vi) = (0.0, 0.0);
        for (p, &w) in projectors.iter().zip(&ensemble.weights) {
            let d = p[(i, j)] - mean[(i, j)];
            let w = w / total;
            vr += w * w * d.re * d.re;
            vi += w * w * d.im * d.im;
        }
        C64::new(vr.sqrt(), vi.sqrt())
    });
    let time = first.time;
    Ok(EnsembleAverage { rho: DensityMatrix { elements: mean, time }, std_error })
}
