//! Continuous fuzzy measurement of energy.
//!
//! A measurement of strength `kappa` over a time `T` yields a readout curve
//! `[E] = E(t)`. Conditioned on the readout the system evolves under a
//! non-Hermitian Hamiltonian whose imaginary part grows with the distance of
//! `E(t)` from each level; the squared norm of the final state is the
//! probability density of the readout. Averaging over readouts gives a
//! dephasing master equation.
//!
//! Units have `hbar = 1`.

pub mod error;
pub mod figure;
pub mod fit;
pub mod nonselective;
pub mod oracles;
pub mod propagator;
pub mod readout_space;
pub mod regime;
pub mod selective;
pub mod system;

pub use error::{Error, Result};
pub use figure::{figure_data, figure_measurement, oscillation_frequency, FigureData, FigureOptions};
pub use fit::{fit_damped_oscillation, DampedFit};
pub use nonselective::{
    ensemble_average, ensemble_average_with_error, master_evolve, master_evolve_history, DensityMatrix, EnsembleAverage,
};
pub use oracles::{
    free_solution, most_probable_readout, rabi_solution, s_transform_check, zeno_solution, MostProbableMethod,
    MostProbableReadout, STransformResidual, ZenoSolution,
};
pub use readout_space::{
    band_probability, band_probability_weighted, correlation_score, sample_ensemble, sample_readout, unitarity_check,
    Estimate, ReadoutBand, SampledEnsemble, UnitarityEstimate,
};
pub use regime::{classify_regime, Regime, RegimeThresholds};
pub use selective::{evolve_selective, evolve_selective_with, probability_density, SelectiveOptions, Trajectory};
pub use system::{time_scales, AmplitudeState, MeasurementSpec, Readout, SystemSpec, TimeScales};

pub use nalgebra::{DMatrix, DVector};
pub use num_complex::Complex64;
