//! Contract scheduling with a predicted interruption time.
//!
//! A schedule `X = (λ·2^i)` runs contracts of doubling length back to back;
//! contract `i` completes at `T_i = λ·2^{i+1}`. Interrupted at time `T`, the
//! best completed contract has length `ℓ(X, T)` and the schedule pays the
//! acceleration ratio `T/ℓ(X, T)`, which always lies in `[2, 4)`. Given a
//! prediction `τ` of the interruption, [`fit`] picks `λ` so the ratio stays
//! under the V-shaped profile `F(T) = f + |T − τ|/tan φ` with `f` as small as
//! possible.

use core::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::math::{floor_log2, pow2, powf, split_pow2, sqrt, tan};
use crate::{Error, Result};

/// Ratio of the plain doubling schedule, and the ceiling of every profile.
pub const ROBUST_RATIO: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractProfile {
    pub prediction: f64,
    /// `τ/tan φ`, the profile's slope measured in units of `τ`.
    pub rho: f64,
}

impl ContractProfile {
    /// Profile with slope `1/tan φ` on both sides of `τ`.
    pub fn new(prediction: f64, slope_angle: f64) -> Result<Self> {
        if !(slope_angle > 0.0 && slope_angle < FRAC_PI_2) {
            return Err(Error::Domain {
                what: "slope angle",
                value: slope_angle,
            });
        }
        Self::from_rho(prediction, prediction / tan(slope_angle))
    }

    /// Profile given `ρ = τ/tan φ` directly; `ρ = 0` is the flat limit
    /// `φ → π/2`.
    pub fn from_rho(prediction: f64, rho: f64) -> Result<Self> {
        if !(prediction > 0.0 && prediction.is_finite()) {
            return Err(Error::Domain {
                what: "predicted interruption",
                value: prediction,
            });
        }
        if !(rho >= 0.0 && rho.is_finite()) {
            return Err(Error::Domain {
                what: "profile slope",
                value: rho,
            });
        }
        Ok(Self { prediction, rho })
    }

    /// `F(T) = f + |T − τ|/tan φ` for consistency `f`.
    pub fn value(&self, consistency: f64, t: f64) -> f64 {
        consistency + (t - self.prediction).abs() * self.rho / self.prediction
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitCase {
    /// Steep profile: the ratio touches `F` at `τ` and just before `T_k`.
    Tangent,
    /// Shallow profile: `τ` sits at `1.5·T_k` and the ratio touches `F` just
    /// before `T_k` and `T_{k+1}`.
    Chord,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractFit {
    #[serde(rename = "case")]
    pub case_tag: FitCase,
    /// `τ/T_k`, where `T_k` is the last completion time up to `τ`.
    pub alpha: f64,
    pub lambda: f64,
    /// The smallest `f` for which the schedule stays under `F`.
    pub consistency: f64,
    /// Index of the contract running at `τ` minus one: `ℓ(X, τ) = λ·2^k`.
    pub k: i32,
}

impl ContractFit {
    /// `T_i = λ·2^{i+1}`.
    pub fn completion_time(&self, i: i32) -> f64 {
        self.lambda * pow2(i + 1)
    }

    pub fn length_at(&self, t: f64) -> f64 {
        contract_length(self.lambda, t)
    }

    /// `T/ℓ(X, T)`.
    pub fn ratio(&self, t: f64) -> f64 {
        t / self.length_at(t)
    }
}

/// Fits the schedule to `profile`.
pub fn fit(profile: &ContractProfile) -> ContractFit {
    let rho = profile.rho;
    let (case_tag, alpha, consistency) = if rho >= 3.0 {
        let alpha = (sqrt(rho * rho + 16.0) - rho + 4.0) / 4.0;
        (FitCase::Tangent, alpha, 2.0 * alpha)
    } else {
        // Both touching points are τ/3 away from τ.
        (FitCase::Chord, 1.5, ROBUST_RATIO - rho / 3.0)
    };
    // τ = α·T_k = α·λ·2^{k+1} with λ in (1, 2].
    let (lambda, e) = split_pow2(profile.prediction / alpha);
    ContractFit {
        case_tag,
        alpha,
        lambda,
        consistency,
        k: e - 1,
    }
}

/// `ℓ(X, T)` for `X = (λ·2^i)`: the longest contract completed by time `T`.
pub fn contract_length(lambda: f64, t: f64) -> f64 {
    lambda * pow2(floor_log2(t / (2.0 * lambda)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RespectReport {
    pub samples: usize,
    pub max_ratio: f64,
    /// Smallest `min(4, F(T)) − T/ℓ(X, T)` over the samples.
    pub min_slack: f64,
    pub violations: usize,
    pub first_violation: Option<f64>,
}

impl RespectReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Checks `T/ℓ(X, T) ≤ min(4, F(T))` at `samples` log-spaced times in
/// `[τ/8, 8τ]`, plus `τ` itself.
pub fn verify_respects(
    fit: &ContractFit,
    profile: &ContractProfile,
    samples: usize,
) -> RespectReport {
    let tau = profile.prediction;
    let span = 64.0f64;
    let mut report = RespectReport {
        samples: 0,
        max_ratio: 0.0,
        min_slack: f64::INFINITY,
        violations: 0,
        first_violation: None,
    };
    let n = samples.max(2);
    let times = (0..n)
        .map(|i| tau / 8.0 * powf(span, i as f64 / (n - 1) as f64))
        .chain(core::iter::once(tau));
    for t in times {
        let ratio = fit.ratio(t);
        let bound = profile.value(fit.consistency, t).min(ROBUST_RATIO);
        let slack = bound - ratio;
        report.samples += 1;
        report.max_ratio = report.max_ratio.max(ratio);
        report.min_slack = report.min_slack.min(slack);
        if slack < -1e-9 {
            report.violations += 1;
            report.first_violation.get_or_insert(t);
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn at(rho: f64) -> (ContractProfile, ContractFit) {
        let p = ContractProfile::from_rho(100.0, rho).unwrap();
        (p, fit(&p))
    }

    #[test]
    fn branch_formulas_meet_at_three() {
        let tangent = (sqrt(25.0) - 3.0 + 4.0) / 4.0;
        assert_eq!(tangent, 1.5);
        let (_, f) = at(3.0);
        assert_eq!(f.case_tag, FitCase::Tangent);
        assert!((f.consistency - 3.0).abs() < 1e-12);
        let (_, below) = at(3.0 - 1e-12);
        assert_eq!(below.case_tag, FitCase::Chord);
        assert!((below.consistency - 3.0).abs() < 1e-9);
    }

    #[test]
    fn limits() {
        let (_, flat) = at(0.0);
        assert_eq!((flat.alpha, flat.consistency), (1.5, 4.0));
        let (_, steep) = at(1e9);
        assert!((steep.alpha - 1.0).abs() < 1e-6);
        assert!((steep.consistency - 2.0).abs() < 1e-6);
    }

    #[test]
    fn angle_is_validated() {
        assert!(ContractProfile::new(100.0, 0.0).is_err());
        assert!(ContractProfile::new(100.0, FRAC_PI_2).is_err());
        assert!(ContractProfile::new(-1.0, 1.0).is_err());
        let p = ContractProfile::new(100.0, core::f64::consts::FRAC_PI_4).unwrap();
        assert!((p.rho - 100.0).abs() < 1e-9);
    }

    #[test]
    fn length_at_completion_times() {
        let lambda = 1.3;
        for i in -3..5 {
            let t = lambda * pow2(i + 1);
            assert_eq!(contract_length(lambda, t), lambda * pow2(i));
            let just_before = t * (1.0 - 1e-12);
            assert!((just_before / contract_length(lambda, just_before) - 4.0).abs() < 1e-9);
        }
    }

    #[test]
    fn prediction_lands_at_alpha() {
        for rho in [0.0, 1.0, 3.0, 7.5, 40.0] {
            let (p, f) = at(rho);
            assert!(f.lambda > 1.0 && f.lambda <= 2.0);
            assert_eq!(f.length_at(p.prediction), f.lambda * pow2(f.k));
            assert!((f.ratio(p.prediction) - 2.0 * f.alpha).abs() < 1e-9);
            assert!((f.completion_time(f.k) * f.alpha - p.prediction).abs() < 1e-9);
        }
    }

    #[test]
    fn tangent_fit_touches_before_tk() {
        let (p, f) = at(10.0);
        assert!((f.ratio(p.prediction) - f.consistency).abs() <= 1e-9);
        let t = f.completion_time(f.k) * (1.0 - 1e-10);
        assert!((p.value(f.consistency, t) - f.ratio(t)).abs() < 1e-6);
    }

    #[test]
    fn chord_fit_touches_at_both_ends() {
        let (p, f) = at(1.2);
        for i in [f.k, f.k + 1] {
            let t = f.completion_time(i) * (1.0 - 1e-10);
            assert!(
                (p.value(f.consistency, t) - f.ratio(t)).abs() < 1e-6,
                "i = {i}"
            );
        }
        assert!(f.ratio(p.prediction) <= f.consistency);
    }

    proptest! {
        #[test]
        fn fits_respect_their_profile(tau in 0.01f64..1e6, phi in 0.01f64..1.56) {
            let p = ContractProfile::new(tau, phi).unwrap();
            let f = fit(&p);
            prop_assert!(f.consistency > 2.0 && f.consistency <= 4.0);
            let report = verify_respects(&f, &p, 500);
            prop_assert!(report.passed(), "{report:?}");
            prop_assert!(report.max_ratio <= 4.0 + 1e-9);
        }
    }
}
