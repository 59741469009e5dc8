//! Closed-form solutions: Rabi flopping without measurement, exact damping of
//! a free multilevel system, the Zeno-branch solution for a readout frozen on
//! the lower level, the most probable readout, and a residual check of the
//! decoupled second-order equations for `S_n = exp(E(t)) C_n`.
//!
//! These serve as fast paths and as independent references for the split-step
//! integrator.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::propagator::SplitStep;
use crate::selective::Trajectory;
use crate::system::{time_scales, AmplitudeState, MeasurementSpec, Readout, SystemSpec};

const I: C64 = C64 { re: 0.0, im: 1.0 };

fn require_two_level(dim: usize) -> Result<()> {
    if dim != 2 {
        return Err(Error::Dimension { expected: 2, got: dim });
    }
    Ok(())
}

/// Rabi oscillation `C_1 = C_1(0) cos vt - i C_2(0) sin vt`,
/// `C_2 = C_2(0) cos vt - i C_1(0) sin vt`.
pub fn rabi_solution(c0: &AmplitudeState, v: f64, t: f64) -> Result<AmplitudeState> {
    require_two_level(c0.dim())?;
    let (c, s) = ((v * t).cos(), (v * t).sin());
    let (a, b) = (c0.coeffs[0], c0.coeffs[1]);
    let mut out = AmplitudeState::from_slice(&[a * c - I * b * s, b * c - I * a * s]);
    out.time = t;
    Ok(out)
}

/// Exact solution for `V = 0`: `C_n(T) = C_n(0) exp(-kappa int (E_n - E)^2 dt)`.
pub fn free_solution(
    c0: &AmplitudeState,
    readout: &Readout,
    system: &SystemSpec,
    meas: &MeasurementSpec,
) -> Result<AmplitudeState> {
    if !system.is_free() {
        return Err(Error::NonZeroCoupling);
    }
    c0.check_dim(system)?;
    readout.check_grid(meas)?;
    let dt = readout.dt();
    let coeffs = c0
        .coeffs
        .iter()
        .zip(system.levels())
        .map(|(&c, &level)| {
            let exponent: f64 = readout.values().iter().map(|e| (level - e).powi(2)).sum::<f64>() * dt;
            c * (-meas.kappa() * exponent).exp()
        })
        .collect::<Vec<_>>();
    let mut out = AmplitudeState::from_slice(&coeffs);
    out.time = readout.duration();
    Ok(out)
}

/// Two-exponential solution of the driven two-level system when the readout
/// sits on the lower level, `E(t) = E_1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZenoSolution {
    pub lambda1: f64,
    pub lambda2: f64,
    pub a: C64,
    pub b: C64,
    pub nu: f64,
    pub t_r: f64,
}

impl ZenoSolution {
    pub fn new(c0: &AmplitudeState, t_lr: f64, t_r: f64) -> Result<Self> {
        require_two_level(c0.dim())?;
        let bound = t_r / (2.0 * PI);
        if !(t_lr > 0.0 && t_r > 0.0) || t_lr >= bound {
            return Err(Error::OutsideZenoBranch { t_lr, bound });
        }
        let half_rate = 0.5 / t_lr;
        let root = (half_rate * half_rate - (PI / t_r).powi(2)).sqrt();
        let lambda1 = -half_rate - root;
        let lambda2 = -half_rate + root;
        // a + b = C_1(0);  lambda1 a + lambda2 b = -i (pi / T_R) C_2(0)
        let c1 = c0.coeffs[0];
        let rhs = -I * (PI / t_r) * c0.coeffs[1];
        let a = (rhs - lambda2 * c1) / (lambda1 - lambda2);
        let b = c1 - a;
        Ok(Self { lambda1, lambda2, a, b, nu: PI * t_lr / t_r, t_r })
    }

    pub fn at(&self, t: f64) -> AmplitudeState {
        let e1 = (self.lambda1 * t).exp();
        let e2 = (self.lambda2 * t).exp();
        let c1 = self.a * e1 + self.b * e2;
        let c2 = I * (self.t_r / PI) * (self.a * self.lambda1 * e1 + self.b * self.lambda2 * e2);
        let mut s = AmplitudeState::from_slice(&[c1, c2]);
        s.time = t;
        s
    }
}

/// State at time `t` for the readout `E(t) = E_1` in the Zeno branch
/// `T_lr < T_R / 2pi`.
pub fn zeno_solution(c0: &AmplitudeState, t_lr: f64, t_r: f64, t: f64) -> Result<AmplitudeState> {
    Ok(ZenoSolution::new(c0, t_lr, t_r)?.at(t))
}

/// How the amplitudes entering the most probable readout are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MostProbableMethod {
    /// Undamped Rabi amplitudes `R_n(t)`.
    #[default]
    ZerothOrder,
    /// Amplitudes evolved under the curve itself, step by step.
    SelfConsistent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MostProbableReadout {
    pub curve: Readout,
    /// Oscillation amplitude predicted from the initial amplitudes.
    pub amplitude: f64,
    /// Middle line `(E_1 + E_2) / 2`.
    pub mean_line: f64,
}

/// Population-weighted level energy `sum E_n |C_n|^2 / sum |C_n|^2`, the
/// readout value that minimizes `|dP/dt|`.
pub fn weighted_energy(coeffs: &[C64], levels: &[f64]) -> f64 {
    let (num, den) =
        coeffs.iter().zip(levels).fold((0.0, 0.0), |(n, d), (c, &e)| (n + e * c.norm_sqr(), d + c.norm_sqr()));
    num / den
}

/// Oscillation amplitude `dE/2 sqrt((|C1|^2 - |C2|^2)^2 + 4 Im(C1 C2*)^2)`.
pub fn most_probable_amplitude(c0: &AmplitudeState, gap: f64) -> f64 {
    let (c1, c2) = (c0.coeffs[0], c0.coeffs[1]);
    let d = c1.norm_sqr() - c2.norm_sqr();
    let im = (c1 * c2.conj()).im;
    0.5 * gap * (d * d + 4.0 * im * im).sqrt()
}

/// Most probable readout on the grid of `meas` (values at step midpoints).
pub fn most_probable_readout(
    c0: &AmplitudeState,
    system: &SystemSpec,
    meas: &MeasurementSpec,
    method: MostProbableMethod,
) -> Result<MostProbableReadout> {
    require_two_level(system.dim())?;
    c0.check_dim(system)?;
    let scales = time_scales(system, meas, 0)?;
    if let Some(t_r) = scales.t_r {
        let bound = 2.0 * PI * scales.t_lr;
        if !(t_r < bound) {
            return Err(Error::ZerothApproximationInvalid { t_r, bound });
        }
    }
    let levels = system.levels();
    let v = system.rabi_coupling().unwrap_or(0.0);
    let curve = match method {
        MostProbableMethod::ZerothOrder => Readout::from_fn(meas, |t| {
            let r = rabi_solution(c0, v, t).expect("two-level state");
            weighted_energy(r.coeffs.as_slice(), levels)
        }),
        MostProbableMethod::SelfConsistent => self_consistent_curve(c0, system, meas),
    };
    Ok(MostProbableReadout {
        curve,
        amplitude: most_probable_amplitude(c0, scales.gap),
        mean_line: 0.5 * (levels[0] + levels[1]),
    })
}

/// Readout that at every step equals the weighted energy of the state it is
/// driving, evaluated at the step midpoint by a half-step predictor.
fn self_consistent_curve(c0: &AmplitudeState, system: &SystemSpec, meas: &MeasurementSpec) -> Readout {
    let levels = system.levels();
    let full = SplitStep::new(system, meas);
    let half_meas = MeasurementSpec::with_steps(meas.kappa(), 0.5 * meas.dt(), 1).expect("valid half step");
    let half = SplitStep::new(system, &half_meas);
    let mut coeffs = c0.coeffs.clone();
    let mut values = Vec::with_capacity(meas.steps());
    for _ in 0..meas.steps() {
        let mut mid = coeffs.clone();
        half.step(&mut mid, weighted_energy(coeffs.as_slice(), levels));
        let e = weighted_energy(mid.as_slice(), levels);
        full.step(&mut coeffs, e);
        values.push(e);
    }
    Readout::new(values, meas.dt()).expect("non-empty grid")
}

/// Residuals of the `S_n` equations along a dense two-level trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct STransformResidual {
    /// `max |S_n'' + v^2 S_n|`: deviation from pure Rabi oscillation of `S_n`,
    /// i.e. the size of the terms dropped in the zeroth approximation.
    pub harmonic: f64,
    /// `max |S_n'' + (v^2 -+ sigma'/2 - sigma^2/4) S_n|`: finite-difference
    /// residual of the exact decoupled equations.
    pub full: f64,
    pub max_s: f64,
    pub max_sigma: f64,
}

/// Transforms the trajectory to `S_n = exp(E(t)) C_n` with
/// `E(t) = 1/2 int (eps_1 + eps_2)` and evaluates the second-order equations
/// by central differences at interior grid points.
pub fn s_transform_check(
    trajectory: &Trajectory,
    readout: &Readout,
    system: &SystemSpec,
    meas: &MeasurementSpec,
) -> Result<STransformResidual> {
    require_two_level(system.dim())?;
    if !trajectory.is_dense() {
        return Err(Error::NeedDenseTrajectory(trajectory.record_stride));
    }
    readout.check_grid(meas)?;
    let n = meas.steps();
    if trajectory.states.len() != n + 1 {
        return Err(Error::GridMismatch(format!(
            "trajectory has {} states, expected {}",
            trajectory.states.len(),
            n + 1
        )));
    }
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two steps".into()));
    }
    let v2 = system.coupling()[(0, 1)].norm_sqr();
    let dt = meas.dt();
    let (e1, e2) = (system.levels()[0], system.levels()[1]);
    let eps: Vec<(f64, f64)> =
        readout.values().iter().map(|e| (meas.kappa() * (e1 - e).powi(2), meas.kappa() * (e2 - e).powi(2))).collect();
    let sigma: Vec<f64> = eps.iter().map(|(a, b)| a - b).collect();

    // exact integral of the piecewise-constant mean damping rate
    let mut cum: f64 = 0.0;
    let mut s = Vec::with_capacity(n + 1);
    for (k, state) in trajectory.states.iter().enumerate() {
        let f = cum.exp();
        s.push([state.coeffs[0] * f, state.coeffs[1] * f]);
        if k < n {
            cum += 0.5 * (eps[k].0 + eps[k].1) * dt;
        }
    }

    let mut harmonic: f64 = 0.0;
    let mut full: f64 = 0.0;
    for k in 1..n {
        let sig = 0.5 * (sigma[k - 1] + sigma[k]);
        let sig_dot = (sigma[k] - sigma[k - 1]) / dt;
        for (idx, sign) in [(0usize, 1.0), (1usize, -1.0)] {
            let acc = (s[k + 1][idx] - 2.0 * s[k][idx] + s[k - 1][idx]) / (dt * dt);
            harmonic = harmonic.max((acc + v2 * s[k][idx]).norm());
            let omega2 = v2 + sign * 0.5 * sig_dot - 0.25 * sig * sig;
            full = full.max((acc + omega2 * s[k][idx]).norm());
        }
    }
    let max_s = s.iter().flat_map(|p| p.iter().map(|z| z.norm())).fold(0.0, f64::max);
    let max_sigma = sigma.iter().map(|x| x.abs()).fold(0.0, f64::max);
    Ok(STransformResidual { harmonic, full, max_s, max_sigma })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selective::evolve_selective;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn rabi_identity_inversion_and_return() {
        let c0 = AmplitudeState::from_slice(&[C64::new(0.6, 0.1), C64::new(0.0, 0.8)]);
        assert_eq!(rabi_solution(&c0, 1.3, 0.0).unwrap().coeffs, c0.coeffs);
        let up = AmplitudeState::basis(2, 0);
        let half = rabi_solution(&up, 2.0, PI / 4.0).unwrap();
        assert!(close(half.coeffs[0], C64::new(0.0, 0.0), 1e-15));
        assert!(close(half.coeffs[1], C64::new(0.0, -1.0), 1e-15));
        let full = rabi_solution(&up, 2.0, PI / 2.0).unwrap();
        assert!(close(full.coeffs[0], C64::new(-1.0, 0.0), 1e-15));
        assert!(rabi_solution(&AmplitudeState::basis(3, 0), 1.0, 1.0).is_err());
    }

    #[test]
    fn free_solution_cases() {
        let sys = SystemSpec::free(vec![0.0, 1.0]).unwrap();
        let meas = MeasurementSpec::new(1.0, 1.0, 0.125).unwrap();
        let c0 = AmplitudeState::from_real(&[0.6, 0.8]);
        let on_first = free_solution(&c0, &Readout::constant(0.0, &meas), &sys, &meas).unwrap();
        assert_eq!(on_first.coeffs[0], c0.coeffs[0]);
        let on_second = free_solution(&c0, &Readout::constant(1.0, &meas), &sys, &meas).unwrap();
        assert!((on_second.coeffs[0].re - 0.6 * (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(on_second.coeffs[1], c0.coeffs[1]);
        let driven = SystemSpec::two_level(0.0, 1.0, C64::new(0.1, 0.0)).unwrap();
        assert_eq!(free_solution(&c0, &Readout::constant(1.0, &meas), &driven, &meas), Err(Error::NonZeroCoupling));
    }

    #[test]
    fn zeno_reproduces_initial_state() {
        let c0 = AmplitudeState::from_slice(&[C64::new(0.6, 0.0), C64::new(0.3, 0.74)]);
        let sol = ZenoSolution::new(&c0, 0.05, 2.0).unwrap();
        let at0 = sol.at(0.0);
        assert!(close(at0.coeffs[0], c0.coeffs[0], 1e-12));
        assert!(close(at0.coeffs[1], c0.coeffs[1], 1e-12));
        assert!(sol.lambda1 < 0.0 && sol.lambda2 < 0.0);
    }

    #[test]
    fn zeno_small_nu_limits() {
        let t_r = PI;
        let t_lr = 1e-4 * t_r;
        let up = AmplitudeState::basis(2, 0);
        let sol = ZenoSolution::new(&up, t_lr, t_r).unwrap();
        // asymptotic exponents, checked to 10 %
        assert!((sol.lambda1 * t_lr + 1.0).abs() < 0.1);
        let slow = -sol.nu * sol.nu / t_lr;
        assert!((sol.lambda2 / slow - 1.0).abs() < 0.1);
        let c = sol.at(t_r);
        assert!((c.coeffs[0].norm() - 1.0).abs() < 1e-2);
        let ratio = c.coeffs[1] / c.coeffs[0];
        assert!(close(ratio, C64::new(0.0, -sol.nu), 0.1 * sol.nu));

        let c0 = AmplitudeState::from_real(&[0.6, 0.8]);
        let sol = ZenoSolution::new(&c0, 0.01 * t_r, t_r).unwrap();
        for t in [0.5 * t_r, 2.0 * t_r, 10.0 * t_r] {
            let p = sol.at(t).norm_sqr();
            let nu2 = sol.nu * sol.nu;
            let approx = (0.36 + nu2 * 0.64) * (-2.0 * nu2 * t / (0.01 * t_r)).exp();
            assert!((p / approx - 1.0).abs() < 0.1, "t = {t}: {p} vs {approx}");
        }
    }

    #[test]
    fn zeno_branch_is_enforced() {
        let up = AmplitudeState::basis(2, 0);
        assert!(matches!(zeno_solution(&up, 0.5, PI, 1.0), Err(Error::OutsideZenoBranch { .. })));
        assert!(zeno_solution(&up, 0.5 - 1e-9, PI, 1.0).is_ok());
    }

    #[test]
    fn zeno_density_is_monotone() {
        let c0 = AmplitudeState::from_slice(&[C64::new(0.2, 0.3), C64::new(-0.5, 0.787_400_787_401_181_1)]);
        let sol = ZenoSolution::new(&c0.normalized(), 0.1, 1.0).unwrap();
        let mut last = f64::INFINITY;
        for k in 0..200 {
            let p = sol.at(k as f64 * 0.01).norm_sqr();
            assert!(p <= last + 1e-15);
            last = p;
        }
    }

    fn figure_system(ratio: f64) -> (SystemSpec, f64) {
        let sys = SystemSpec::two_level(0.0, 1.0, C64::new(1.0, 0.0)).unwrap();
        let t_lr = PI / (2.0 * PI * ratio);
        (sys, 1.0 / t_lr)
    }

    #[test]
    fn most_probable_full_swing() {
        let (sys, kappa) = figure_system(0.8);
        let meas = MeasurementSpec::with_steps(kappa, 2.0 * PI, 2000).unwrap();
        let mp =
            most_probable_readout(&AmplitudeState::basis(2, 0), &sys, &meas, MostProbableMethod::ZerothOrder).unwrap();
        assert_eq!(mp.mean_line, 0.5);
        assert!((mp.amplitude - 0.5).abs() < 1e-15);
        let (lo, hi) = mp.curve.values().iter().fold((f64::MAX, f64::MIN), |(l, h), &x| (l.min(x), h.max(x)));
        assert!(lo >= 0.0 && hi <= 1.0);
        assert!(lo < 1e-5 && hi > 1.0 - 1e-5);
    }

    #[test]
    fn most_probable_balanced_state_is_flat() {
        let (sys, kappa) = figure_system(0.8);
        let meas = MeasurementSpec::with_steps(kappa, PI, 500).unwrap();
        let c0 = AmplitudeState::from_real(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2]);
        let mp = most_probable_readout(&c0, &sys, &meas, MostProbableMethod::ZerothOrder).unwrap();
        assert!(mp.amplitude.abs() < 1e-15);
        assert!(mp.curve.values().iter().all(|&e| (e - 0.5).abs() < 1e-12));
    }

    #[test]
    fn most_probable_undriven_eigenstate() {
        let sys = SystemSpec::free(vec![0.0, 1.0]).unwrap();
        let meas = MeasurementSpec::with_steps(1.0, 1.0, 10).unwrap();
        let mp = most_probable_readout(&AmplitudeState::basis(2, 0), &sys, &meas, MostProbableMethod::SelfConsistent)
            .unwrap();
        assert!(mp.curve.values().iter().all(|&e| e == 0.0));
    }

    #[test]
    fn most_probable_validity() {
        let (sys, kappa) = figure_system(1.2);
        let meas = MeasurementSpec::with_steps(kappa, PI, 100).unwrap();
        assert!(matches!(
            most_probable_readout(&AmplitudeState::basis(2, 0), &sys, &meas, MostProbableMethod::ZerothOrder),
            Err(Error::ZerothApproximationInvalid { .. })
        ));
    }

    /// The curve value minimizes |dP/dt| pointwise.
    #[test]
    fn most_probable_minimizes_decay() {
        let (sys, kappa) = figure_system(0.8);
        let meas = MeasurementSpec::with_steps(kappa, PI, 64).unwrap();
        let c0 = AmplitudeState::from_slice(&[C64::new(0.8, 0.0), C64::new(0.0, 0.6)]);
        let v = 1.0;
        let mp = most_probable_readout(&c0, &sys, &meas, MostProbableMethod::ZerothOrder).unwrap();
        for (k, &e) in mp.curve.values().iter().enumerate() {
            let t = (k as f64 + 0.5) * meas.dt();
            let state = rabi_solution(&c0, v, t).unwrap();
            let best = crate::selective::prob_decay_rate(&state, e, &sys, &meas);
            for de in [-0.3, -1e-3, 1e-3, 0.2] {
                assert!(crate::selective::prob_decay_rate(&state, e + de, &sys, &meas) < best);
            }
        }
    }

    #[test]
    fn s_transform_without_measurement() {
        let sys = SystemSpec::two_level(0.0, 1.0, C64::new(1.0, 0.0)).unwrap();
        let meas = MeasurementSpec::with_steps(0.0, 2.0 * PI, 2000).unwrap();
        let readout = Readout::from_fn(&meas, |t| t.sin());
        let traj = evolve_selective(&AmplitudeState::basis(2, 0), &readout, &sys, &meas).unwrap();
        let r = s_transform_check(&traj, &readout, &sys, &meas).unwrap();
        assert_eq!(r.max_sigma, 0.0);
        assert!(r.harmonic < 1e-5, "{r:?}");
    }

    #[test]
    fn s_transform_midline_readout() {
        let sys = SystemSpec::two_level(0.0, 1.0, C64::new(1.0, 0.0)).unwrap();
        let check = |n: usize| {
            let meas = MeasurementSpec::with_steps(2.0, 2.0 * PI, n).unwrap();
            let readout = Readout::constant(0.5, &meas);
            let traj = evolve_selective(&AmplitudeState::from_real(&[0.6, 0.8]), &readout, &sys, &meas).unwrap();
            s_transform_check(&traj, &readout, &sys, &meas).unwrap().harmonic
        };
        let (a, b) = (check(1000), check(2000));
        assert!(a < 1e-4);
        assert!((3.5..4.5).contains(&(a / b)), "{a} {b}");
    }

    #[test]
    fn s_transform_needs_dense_trajectory() {
        let sys = SystemSpec::two_level(0.0, 1.0, C64::new(1.0, 0.0)).unwrap();
        let meas = MeasurementSpec::with_steps(1.0, 1.0, 10).unwrap();
        let readout = Readout::constant(0.5, &meas);
        let traj = crate::selective::evolve_selective_with(
            &AmplitudeState::basis(2, 0),
            &readout,
            &sys,
            &meas,
            crate::selective::SelectiveOptions { record_stride: 2 },
        )
        .unwrap();
        assert_eq!(s_transform_check(&traj, &readout, &sys, &meas), Err(Error::NeedDenseTrajectory(2)));
    }

    #[test]
    fn s_transform_near_boundary_is_bounded() {
        let ratio = 0.8;
        let (sys, kappa) = figure_system(ratio);
        let meas = MeasurementSpec::with_steps(kappa, 2.0 * PI, 4000).unwrap();
        let c0 = AmplitudeState::basis(2, 0);
        let mp = most_probable_readout(&c0, &sys, &meas, MostProbableMethod::ZerothOrder).unwrap();
        let traj = evolve_selective(&c0, &mp.curve, &sys, &meas).unwrap();
        let r = s_transform_check(&traj, &mp.curve, &sys, &meas).unwrap();
        // exact equations hold to discretization error
        assert!(r.full < 1e-2 * r.harmonic, "{r:?}");
        // dropped terms are of order ratio * v^2 * |S|
        assert!(r.harmonic <= 4.0 * ratio * r.max_s, "{r:?}");
        assert!(r.harmonic > 0.1 * ratio * r.max_s, "{r:?}");
    }
}
