//! Exact factors of the split-step propagator.
//!
//! One step of length `dt` with readout value `E` is
//! `R(dt/2) D(E, dt) R(dt/2)` where `R(tau) = exp(-i V tau)` is the unitary
//! coupling rotation and `D` is the diagonal measurement damping
//! `exp(-kappa (E_n - E)^2 dt)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::system::{MeasurementSpec, SystemSpec};

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// `exp(-i V tau)` for a Hermitian `V`. Two-level systems use the closed
/// form; larger systems diagonalize `V` once.
pub fn coupling_exponential(coupling: &DMatrix<C64>, tau: f64) -> DMatrix<C64> {
    let n = coupling.nrows();
    if n == 2 {
        let a = coupling[(0, 0)].re;
        let d = coupling[(1, 1)].re;
        let b = coupling[(0, 1)];
        let mean = 0.5 * (a + d);
        let h = 0.5 * (a - d);
        let omega = (h * h + b.norm_sqr()).sqrt();
        let phase = (-I * mean * tau).exp();
        let c = (omega * tau).cos();
        // sin(omega tau) / omega, continuous at omega = 0
        let s = if omega * tau == 0.0 { tau } else { (omega * tau).sin() / omega };
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[C64::new(c, 0.0) - I * s * h, -I * s * b, -I * s * b.conj(), C64::new(c, 0.0) + I * s * h],
        );
        return m * phase;
    }
    let eig = SymmetricEigen::new(coupling.clone());
    let w = &eig.eigenvectors;
    let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| (-I * l * tau).exp()));
    w * phases * w.adjoint()
}

/// Precomputed split-step factors for one system and grid.
#[derive(Debug, Clone)]
pub struct SplitStep {
    levels: Vec<f64>,
    kappa: f64,
    dt: f64,
    /// `R(dt/2)`; `None` when the system is free, so that V = 0 propagation
    /// is exactly the product of damping factors.
    half: Option<DMatrix<C64>>,
}

impl SplitStep {
    pub fn new(system: &SystemSpec, meas: &MeasurementSpec) -> Self {
        let half = (!system.is_free()).then(|| coupling_exponential(system.coupling(), 0.5 * meas.dt()));
        Self { levels: system.levels().to_vec(), kappa: meas.kappa(), dt: meas.dt(), half }
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn half_rotation(&self) -> Option<&DMatrix<C64>> {
        self.half.as_ref()
    }

    pub fn rotate_half(&self, coeffs: &mut DVector<C64>) {
        if let Some(r) = &self.half {
            *coeffs = r * &*coeffs;
        }
    }

    pub fn damp(&self, coeffs: &mut DVector<C64>, e: f64) {
        for (c, &level) in coeffs.iter_mut().zip(&self.levels) {
            let d = level - e;
            *c *= (-self.kappa * d * d * self.dt).exp();
        }
    }

    /// Advances `coeffs` by one step with readout value `e`.
    pub fn step(&self, coeffs: &mut DVector<C64>, e: f64) {
        self.rotate_half(coeffs);
        self.damp(coeffs, e);
        self.rotate_half(coeffs);
    }
}
