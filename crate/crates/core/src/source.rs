//! Coherent-state ensemble of the source and the two-state unambiguous
//! discrimination figures of merit.
//!
//! Alice's signal and decoy pulses are coherent states `|√μ e^{iθ_s}⟩` and
//! `|√ν e^{iθ_d}⟩`. The phase-encoding setup splits each into two time bins of
//! half intensity; the discrimination acts on the first bin only, so the states
//! to be told apart are `|√(μ/2) e^{iθ_s}⟩` and `|√(ν/2) e^{iθ_d}⟩`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SourceError {
    #[error("signal intensity mu must be finite and > 0 (got {0})")]
    SignalIntensity(f64),
    #[error("decoy intensity nu must be finite and >= 0 (got {0})")]
    DecoyIntensity(f64),
    #[error("signal intensity mu ({mu}) must exceed decoy intensity nu ({nu})")]
    Ordering { mu: f64, nu: f64 },
    #[error("phase must be finite (got {0})")]
    Phase(f64),
}

/// Signal/decoy intensities and phases.
///
/// Phases are stored reduced to `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    mu: f64,
    nu: f64,
    theta_s: f64,
    theta_d: f64,
}

impl SourceConfig {
    pub fn new(mu: f64, nu: f64, theta_s: f64, theta_d: f64) -> Result<Self, SourceError> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(SourceError::SignalIntensity(mu));
        }
        if !(nu.is_finite() && nu >= 0.0) {
            return Err(SourceError::DecoyIntensity(nu));
        }
        if mu <= nu {
            return Err(SourceError::Ordering { mu, nu });
        }
        for th in [theta_s, theta_d] {
            if !th.is_finite() {
                return Err(SourceError::Phase(th));
            }
        }
        Ok(Self {
            mu,
            nu,
            theta_s: reduce_phase(theta_s),
            theta_d: reduce_phase(theta_d),
        })
    }

    /// Signal and decoy in phase, the situation of a shared phase reference.
    pub fn in_phase(mu: f64, nu: f64) -> Result<Self, SourceError> {
        Self::new(mu, nu, 0.0, 0.0)
    }

    /// `μ = 0.5`, `ν = 0.1`, zero relative phase.
    pub fn reference() -> Self {
        Self::in_phase(0.5, 0.1).expect("reference intensities are valid")
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn theta_s(&self) -> f64 {
        self.theta_s
    }

    pub fn theta_d(&self) -> f64 {
        self.theta_d
    }

    /// `θ_s − θ_d`, reduced to `[0, 2π)`.
    pub fn relative_phase(&self) -> f64 {
        reduce_phase(self.theta_s - self.theta_d)
    }

    /// Amplitude of the first time bin of the signal pulse, `√(μ/2) e^{iθ_s}`.
    pub fn signal_amplitude(&self) -> Complex64 {
        Complex64::from_polar((self.mu / 2.0).sqrt(), self.theta_s)
    }

    /// Amplitude of the first time bin of the decoy pulse, `√(ν/2) e^{iθ_d}`.
    pub fn decoy_amplitude(&self) -> Complex64 {
        Complex64::from_polar((self.nu / 2.0).sqrt(), self.theta_d)
    }
}

pub(crate) fn reduce_phase(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    // rem_euclid can round up to TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Half the squared distance between the two first-bin amplitudes:
/// `(μ+ν)/4 − √(μν)·cos(Δθ)/2`.
fn half_distance_sq(mu: f64, nu: f64, relative_phase: f64) -> f64 {
    // clamp guards the mu == nu, dtheta == 0 case against rounding below zero
    ((mu + nu) / 4.0 - (mu * nu).sqrt() * relative_phase.cos() / 2.0).max(0.0)
}

/// Overlap `|⟨√(ν/2)e^{iθ_d}|√(μ/2)e^{iθ_s}⟩|` for raw intensities.
///
/// Accepts any nonnegative intensities, including `μ == ν`, where it returns 1.
pub fn overlap(mu: f64, nu: f64, relative_phase: f64) -> f64 {
    (-half_distance_sq(mu, nu, relative_phase)).exp()
}

/// Failure probability `p_f` of the optimal equal-prior USD between the
/// signal and decoy first bins.
pub fn failure_probability(cfg: &SourceConfig) -> f64 {
    overlap(cfg.mu, cfg.nu, cfg.relative_phase())
}

/// `q_opt = 1 − p_f` for raw intensities.
pub fn optimal_success(mu: f64, nu: f64, relative_phase: f64) -> f64 {
    -(-half_distance_sq(mu, nu, relative_phase)).exp_m1()
}

/// Success probability of the optimal USD, `q_opt = 1 − p_f`.
pub fn usd_success_optimal(cfg: &SourceConfig) -> f64 {
    optimal_success(cfg.mu, cfg.nu, cfg.relative_phase())
}

/// Ceiling of the interferometric (linear-optics) USD with ideal detectors.
///
/// Equal to `q_opt / 2` at every relative phase.
pub fn linear_optics_success(mu: f64, nu: f64, relative_phase: f64) -> f64 {
    optimal_success(mu, nu, relative_phase) / 2.0
}

pub fn usd_success_linear_optics(cfg: &SourceConfig) -> f64 {
    linear_optics_success(cfg.mu, cfg.nu, cfg.relative_phase())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn constructor_rejects_invalid_ordering() {
        assert!(matches!(
            SourceConfig::in_phase(0.1, 0.5),
            Err(SourceError::Ordering { .. })
        ));
        assert!(SourceConfig::in_phase(0.3, 0.3).is_err());
        assert!(SourceConfig::in_phase(0.0, 0.0).is_err());
        assert!(SourceConfig::in_phase(0.5, -0.1).is_err());
        assert!(SourceConfig::new(0.5, 0.1, f64::NAN, 0.0).is_err());
        assert!(SourceConfig::in_phase(0.5, 0.0).is_ok());
    }

    #[test]
    fn phases_are_reduced() {
        let cfg = SourceConfig::new(0.5, 0.1, -PI / 2.0, 5.0 * PI).unwrap();
        assert!((cfg.theta_s() - 1.5 * PI).abs() < 1e-12);
        assert!((cfg.theta_d() - PI).abs() < 1e-12);
        assert!((cfg.relative_phase() - 0.5 * PI).abs() < 1e-12);
        let tiny = SourceConfig::new(0.5, 0.1, -1e-300, 0.0).unwrap();
        assert!(tiny.theta_s() < TAU);
    }

    #[test]
    fn reference_point_values() {
        let cfg = SourceConfig::reference();
        // 1 - exp(-(sqrt(.5)-sqrt(.1))^2/4), high-precision evaluation
        let q_opt = usd_success_optimal(&cfg);
        assert!((q_opt - 0.037_476_310_951_869_65).abs() < 1e-15);
        assert!((1.0 - failure_probability(&cfg) - 0.0375).abs() < 5e-5);
        assert!((usd_success_linear_optics(&cfg) - 0.0187).abs() < 5e-5);
        assert_eq!(usd_success_linear_optics(&cfg), q_opt / 2.0);

        let pi_cfg = SourceConfig::new(0.5, 0.1, PI, 0.0).unwrap();
        let q_pi = usd_success_optimal(&pi_cfg);
        assert!((q_pi - 0.230).abs() < 5e-4);
        assert!((q_pi - 0.230_337_674_686_909_7).abs() < 1e-14);
    }

    #[test]
    fn identical_states_are_indistinguishable() {
        assert_eq!(optimal_success(0.3, 0.3, 0.0), 0.0);
        assert_eq!(overlap(0.3, 0.3, 0.0), 1.0);
        assert_eq!(linear_optics_success(0.3, 0.3, 0.0), 0.0);
        // vacuum against vacuum carries no phase
        for dtheta in [0.0, 1.0, PI] {
            assert_eq!(optimal_success(0.0, 0.0, dtheta), 0.0);
        }
        // equal intensity with opposite phase is distinguishable
        assert!(optimal_success(0.3, 0.3, PI) > 0.0);
    }

    proptest! {
        #[test]
        fn optimal_success_monotone_in_distance(
            mu in 0.01f64..2.0, nu in 0.0f64..1.0,
            d1 in 0.0f64..TAU, d2 in 0.0f64..TAU,
        ) {
            let dist = |d: f64| (Complex64::new(mu.sqrt(), 0.0) - Complex64::from_polar(nu.sqrt(), d)).norm();
            let (a, b) = (dist(d1), dist(d2));
            let (qa, qb) = (optimal_success(mu, nu, d1), optimal_success(mu, nu, d2));
            if a < b - 1e-9 {
                prop_assert!(qa <= qb);
            }
        }

        #[test]
        fn linear_optics_never_beats_optimal(
            mu in 0.01f64..2.0, frac in 0.0f64..0.999, th_s in -10.0f64..10.0, th_d in -10.0f64..10.0,
        ) {
            let cfg = SourceConfig::new(mu, mu * frac, th_s, th_d).unwrap();
            let lo = usd_success_linear_optics(&cfg);
            let opt = usd_success_optimal(&cfg);
            prop_assert!(lo <= opt);
            if opt > 0.0 {
                prop_assert!(lo < opt);
            }
        }

        #[test]
        fn phase_extremes(mu in 0.05f64..2.0, frac in 0.01f64..0.99, dtheta in 0.0f64..TAU) {
            let nu = mu * frac;
            let q = optimal_success(mu, nu, dtheta);
            prop_assert!(q >= optimal_success(mu, nu, 0.0) - 1e-15);
            prop_assert!(q <= optimal_success(mu, nu, PI) + 1e-15);
        }
    }
}
