//! Least-squares fit of `s(t) = exp(-r t) (a cos(w t) + b sin(w t))` to a
//! uniformly sampled series.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4, Vector2, Vector4};

use crate::error::{Error, Result};

/// A fit is rejected if its RMS residual exceeds this fraction of `max |s|`.
pub const FIT_RMS_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampedFit {
    pub rate: f64,
    pub omega: f64,
    pub a: f64,
    pub b: f64,
    pub rms: f64,
}

impl DampedFit {
    pub fn eval(&self, t: f64) -> f64 {
        (-self.rate * t).exp() * (self.a * (self.omega * t).cos() + self.b * (self.omega * t).sin())
    }
}

/// Sample `k` of `series` is taken at `t = k dt`.
pub fn fit_damped_oscillation(series: &[f64], dt: f64) -> Result<DampedFit> {
    if series.len() < 8 {
        return Err(Error::InvalidArgument("need at least 8 samples to fit".into()));
    }
    if !(dt > 0.0) || series.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidArgument("series and dt must be finite, dt > 0".into()));
    }
    let scale = series.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if scale == 0.0 {
        return Err(Error::FitFailed("series is identically zero".into()));
    }
    let (rate, omega) = prony(series, dt)?;
    let (a, b) = linear_amplitudes(series, dt, rate, omega);
    let p = levenberg_marquardt(series, dt, Vector4::new(rate, omega, a, b));
    let mut fit = DampedFit { rate: p[0], omega: p[1], a: p[2], b: p[3], rms: 0.0 };
    if fit.omega < 0.0 {
        fit.omega = -fit.omega;
        fit.b = -fit.b;
    }
    fit.rms = rms(series, dt, &fit);
    if !fit.rms.is_finite() || fit.rms > FIT_RMS_FRACTION * scale {
        return Err(Error::FitFailed(format!("rms residual {:.3e} exceeds {:.3e}", fit.rms, FIT_RMS_FRACTION * scale)));
    }
    Ok(fit)
}

/// Two-term linear prediction `s_{k+1} = p1 s_k + p2 s_{k-1}`.
fn prony(s: &[f64], dt: f64) -> Result<(f64, f64)> {
    let mut m = Matrix2::zeros();
    let mut rhs = Vector2::zeros();
    for k in 1..s.len() - 1 {
        let x = Vector2::new(s[k], s[k - 1]);
        m += x * x.transpose();
        rhs += x * s[k + 1];
    }
    let p = m.lu().solve(&rhs).ok_or_else(|| Error::FitFailed("linear prediction is singular".into()))?;
    let (p1, p2) = (p[0], p[1]);
    if !(p2 < 0.0) {
        return Err(Error::FitFailed("series is not a damped oscillation".into()));
    }
    let damp = (-p2).sqrt();
    let cos = (p1 / (2.0 * damp)).clamp(-1.0, 1.0);
    Ok((-damp.ln() / dt, cos.acos() / dt))
}

fn linear_amplitudes(s: &[f64], dt: f64, rate: f64, omega: f64) -> (f64, f64) {
    let basis = DMatrix::from_fn(s.len(), 2, |k, j| {
        let t = k as f64 * dt;
        let env = (-rate * t).exp();
        if j == 0 {
            env * (omega * t).cos()
        } else {
            env * (omega * t).sin()
        }
    });
    let y = DVector::from_column_slice(s);
    let sol = (basis.transpose() * &basis).lu().solve(&(basis.transpose() * y));
    sol.map_or((s[0], 0.0), |v| (v[0], v[1]))
}

fn residuals(s: &[f64], dt: f64, p: &Vector4<f64>) -> (Vec<f64>, Vec<Vector4<f64>>) {
    let (r, w, a, b) = (p[0], p[1], p[2], p[3]);
    let mut res = Vec::with_capacity(s.len());
    let mut jac = Vec::with_capacity(s.len());
    for (k, &sk) in s.iter().enumerate() {
        let t = k as f64 * dt;
        let env = (-r * t).exp();
        let (sin, cos) = (w * t).sin_cos();
        let model = env * (a * cos + b * sin);
        res.push(model - sk);
        jac.push(Vector4::new(-t * model, env * t * (b * cos - a * sin), env * cos, env * sin));
    }
    (res, jac)
}

fn cost(res: &[f64]) -> f64 {
    res.iter().map(|r| r * r).sum()
}

fn levenberg_marquardt(s: &[f64], dt: f64, mut p: Vector4<f64>) -> Vector4<f64> {
    let mut lambda = 1e-3;
    let (mut res, mut jac) = residuals(s, dt, &p);
    let mut c = cost(&res);
    for _ in 0..500 {
        let mut jtj = Matrix4::zeros();
        let mut jtr = Vector4::zeros();
        for (r, j) in res.iter().zip(&jac) {
            jtj += j * j.transpose();
            jtr += j * *r;
        }
        let mut improved = false;
        while lambda < 1e12 {
            let mut damped = jtj;
            for i in 0..4 {
                damped[(i, i)] += lambda * jtj[(i, i)].max(1e-300);
            }
            let Some(step) = damped.lu().solve(&(-jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = p + step;
            let (tres, tjac) = residuals(s, dt, &trial);
            let tc = cost(&tres);
            if tc.is_finite() && tc < c {
                let rel = (c - tc) / c.max(f64::MIN_POSITIVE);
                p = trial;
                res = tres;
                jac = tjac;
                c = tc;
                lambda = (lambda * 0.1).max(1e-15);
                improved = true;
                if rel < 1e-14 || step.norm() < 1e-14 * (1.0 + p.norm()) {
                    return p;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    p
}

fn rms(s: &[f64], dt: f64, fit: &DampedFit) -> f64 {
    let sum: f64 = s.iter().enumerate().map(|(k, &v)| (fit.eval(k as f64 * dt) - v).powi(2)).sum();
    (sum / s.len() as f64).sqrt()
}
