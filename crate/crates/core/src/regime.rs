//! Measurement regimes from the three time scales `T`, `T_lr` and `T_R`.

use std::f64::consts::PI;
use std::fmt;

use crate::system::TimeScales;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// `T << T_lr`, `T << T_R`: too short to resolve the levels.
    FreeUnresolved,
    /// `T >> T_lr`, `T << T_R`: off-diagonal products die out.
    Decoherence,
    /// `T_lr << T_R <~ T`: transitions are frozen.
    Zeno,
    /// `T_R << T << T_lr`: Rabi oscillations barely disturbed.
    StrongRabi,
    /// `T_R < 2 pi T_lr` with all three scales of the same order.
    CorrelatedRabi,
    /// `T_R << T_lr << T`: many oscillations, eventually resolved.
    Mixing,
    /// None of the above.
    Intermediate,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::FreeUnresolved => "FREE_UNRESOLVED",
            Regime::Decoherence => "DECOHERENCE",
            Regime::Zeno => "ZENO",
            Regime::StrongRabi => "STRONG_RABI",
            Regime::CorrelatedRabi => "CORRELATED_RABI",
            Regime::Mixing => "MIXING",
            Regime::Intermediate => "INTERMEDIATE",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeThresholds {
    /// `a << b` means `b >= much * a`.
    pub much: f64,
    /// "Same order" means within this factor.
    pub same_order: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        Self { much: 10.0, same_order: 3.0 }
    }
}

/// Classifies a run of duration `t`. A missing `T_R` (undriven system) is
/// treated as infinite.
pub fn classify_regime(t: f64, t_lr: f64, t_r: Option<f64>, th: RegimeThresholds) -> Regime {
    let t_r = t_r.unwrap_or(f64::INFINITY);
    let ll = |a: f64, b: f64| b >= th.much * a;
    if ll(t, t_lr) && ll(t, t_r) {
        return Regime::FreeUnresolved;
    }
    if ll(t_lr, t) && ll(t, t_r) {
        return Regime::Decoherence;
    }
    if ll(t_lr, t_r) && t * th.same_order >= t_r {
        return Regime::Zeno;
    }
    if ll(t_r, t) && ll(t, t_lr) {
        return Regime::StrongRabi;
    }
    if ll(t_r, t_lr) && ll(t_lr, t) {
        return Regime::Mixing;
    }
    let scales = [t_r, 2.0 * PI * t_lr, t];
    let hi = scales.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = scales.iter().cloned().fold(f64::INFINITY, f64::min);
    if t_r < 2.0 * PI * t_lr && hi <= th.same_order * lo {
        return Regime::CorrelatedRabi;
    }
    Regime::Intermediate
}

pub fn classify_scales(scales: &TimeScales, t: f64, th: RegimeThresholds) -> Regime {
    classify_regime(t, scales.t_lr, scales.t_r, th)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn classify(t: f64, t_lr: f64, t_r: f64) -> Regime {
        classify_regime(t, t_lr, Some(t_r), RegimeThresholds::default())
    }

    #[test]
    fn examples() {
        let t_r = PI;
        assert_eq!(classify(10.0 * t_r, 0.01 * t_r, t_r), Regime::Zeno);
        assert_eq!(classify(20.0 * t_r, 400.0 * t_r, t_r), Regime::StrongRabi);
        assert_eq!(classify(t_r, t_r / (2.0 * PI * 0.8), t_r), Regime::CorrelatedRabi);
        assert_eq!(classify(0.01, 1.0, t_r), Regime::FreeUnresolved);
        assert_eq!(classify(0.2, 0.01, 100.0), Regime::Decoherence);
        assert_eq!(classify(1e4, 100.0, 1.0), Regime::Mixing);
        assert_eq!(classify(3.0, 0.1, 0.5), Regime::Intermediate);
    }

    #[test]
    fn undriven() {
        let th = RegimeThresholds::default();
        assert_eq!(classify_regime(0.01, 1.0, None, th), Regime::FreeUnresolved);
        assert_eq!(classify_regime(10.0, 0.1, None, th), Regime::Decoherence);
    }

    #[test]
    fn thresholds_are_overridable() {
        let t_r = PI;
        let loose = RegimeThresholds { much: 4.0, same_order: 3.0 };
        assert_eq!(classify(t_r, 0.15 * t_r, t_r), Regime::Intermediate);
        assert_eq!(classify_regime(t_r, 0.15 * t_r, Some(t_r), loose), Regime::Zeno);
    }

    proptest! {
        #[test]
        fn scale_invariant(t in 1e-3f64..1e3, t_lr in 1e-3f64..1e3, t_r in 1e-3f64..1e3, s in 1e-2f64..1e2) {
            let a = classify(t, t_lr, t_r);
            let b = classify(t * s, t_lr * s, t_r * s);
            // classification depends only on ratios, up to rounding at boundaries
            let near = |x: f64| [10.0, 0.1, 3.0, 1.0 / 3.0].iter().any(|b| (x / b - 1.0).abs() < 1e-9);
            let ratios = [t / t_lr, t / t_r, t_lr / t_r, t_r / (2.0 * PI * t_lr), t / (2.0 * PI * t_lr)];
            prop_assume!(!ratios.iter().any(|&r| near(r)));
            prop_assert_eq!(a, b);
        }
    }
}
