//! Normal-channel detection statistics and the conventional one-decoy
//! post-processing Alice and Bob run when they believe the source is phase
//! randomised.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::source::SourceConfig;

/// Error rate of a background count.
pub const BACKGROUND_ERROR_RATE: f64 = 0.5;

/// Superconducting-detector figures used as the default receiver.
pub const DEFAULT_DARK_COUNT: f64 = 1e-7;
pub const DEFAULT_MISALIGNMENT: f64 = 0.02;
pub const DEFAULT_DETECTOR_EFFICIENCY: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("overall efficiency eta must lie in (0, 1] (got {0})")]
    Efficiency(f64),
    #[error("background count rate y0 must lie in [0, 1) (got {0})")]
    Background(f64),
    #[error("misalignment error e_d must lie in [0, 1/2] (got {0})")]
    Misalignment(f64),
    #[error("loss must be a finite, nonnegative number of dB (got {0})")]
    Loss(f64),
    #[error("binary entropy argument {0} lies outside [0, 1]")]
    EntropyDomain(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecoyError {
    #[error("one-decoy estimate needs mu > nu > 0 (got mu = {mu}, nu = {nu})")]
    DegenerateDecoy { mu: f64, nu: f64 },
}

/// Whether the background count rate enters the modelled gains.
///
/// The error term always carries `e_0 Y_0`. With `WithBackground` the gains
/// are `Y_0 + 1 − e^{−ηα}`; with `SignalOnly` they are `1 − e^{−ηα}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainModel {
    #[default]
    WithBackground,
    SignalOnly,
}

/// Normal channel seen by Alice and Bob.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    eta: f64,
    y0: f64,
    e_d: f64,
    gain_model: GainModel,
}

impl ChannelParams {
    pub fn new(eta: f64, y0: f64, e_d: f64) -> Result<Self, ChannelError> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(ChannelError::Efficiency(eta));
        }
        if !(0.0..1.0).contains(&y0) {
            return Err(ChannelError::Background(y0));
        }
        if !(0.0..=0.5).contains(&e_d) {
            return Err(ChannelError::Misalignment(e_d));
        }
        Ok(Self {
            eta,
            y0,
            e_d,
            gain_model: GainModel::default(),
        })
    }

    /// `loss_db` is the overall loss, detector efficiency included.
    pub fn from_loss_db(loss_db: f64, y0: f64, e_d: f64) -> Result<Self, ChannelError> {
        Self::new(eta_from_loss_db(loss_db)?, y0, e_d)
    }

    /// Default receiver (`Y_0 = 1e−7`, `e_d = 0.02`) at the given overall loss.
    pub fn reference(loss_db: f64) -> Result<Self, ChannelError> {
        Self::from_loss_db(loss_db, DEFAULT_DARK_COUNT, DEFAULT_MISALIGNMENT)
    }

    pub fn with_gain_model(mut self, gain_model: GainModel) -> Self {
        self.gain_model = gain_model;
        self
    }

    pub fn with_eta(&self, eta: f64) -> Result<Self, ChannelError> {
        Self::new(eta, self.y0, self.e_d).map(|c| c.with_gain_model(self.gain_model))
    }

    pub fn at_loss_db(&self, loss_db: f64) -> Result<Self, ChannelError> {
        self.with_eta(eta_from_loss_db(loss_db)?)
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn y0(&self) -> f64 {
        self.y0
    }

    pub fn e_d(&self) -> f64 {
        self.e_d
    }

    pub fn e0(&self) -> f64 {
        BACKGROUND_ERROR_RATE
    }

    pub fn gain_model(&self) -> GainModel {
        self.gain_model
    }

    pub fn loss_db(&self) -> f64 {
        loss_db_from_eta(self.eta)
    }
}

pub fn eta_from_loss_db(loss_db: f64) -> Result<f64, ChannelError> {
    if !(loss_db.is_finite() && loss_db >= 0.0) {
        return Err(ChannelError::Loss(loss_db));
    }
    Ok(10f64.powf(-loss_db / 10.0))
}

pub fn loss_db_from_eta(eta: f64) -> f64 {
    -10.0 * eta.log10()
}

/// Overall efficiency of a fibre link of `channel_loss_db` followed by a
/// detector of efficiency `detector_efficiency`.
pub fn overall_efficiency(channel_loss_db: f64, detector_efficiency: f64) -> Result<f64, ChannelError> {
    let eta = eta_from_loss_db(channel_loss_db)? * detector_efficiency;
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(ChannelError::Efficiency(eta));
    }
    Ok(eta)
}

/// Observed gains and error-weighted gains for signal and decoy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainStats {
    pub q_mu_gain: f64,
    pub q_nu_gain: f64,
    pub emu_qmu: f64,
    pub enu_qnu: f64,
}

impl GainStats {
    pub const ZERO: GainStats = GainStats {
        q_mu_gain: 0.0,
        q_nu_gain: 0.0,
        emu_qmu: 0.0,
        enu_qnu: 0.0,
    };

    /// `0 ≤ E_α Q_α ≤ Q_α ≤ 1` for both intensities.
    pub fn is_consistent(&self) -> bool {
        [(self.q_mu_gain, self.emu_qmu), (self.q_nu_gain, self.enu_qnu)]
            .iter()
            .all(|&(q, eq)| 0.0 <= eq && eq <= q && q <= 1.0)
    }

    /// Signal QBER `E_μ`, or `None` when nothing is detected.
    pub fn qber_mu(&self) -> Option<f64> {
        (self.q_mu_gain > 0.0).then(|| self.emu_qmu / self.q_mu_gain)
    }
}

/// Gains `Q_α` and error terms `E_α Q_α = e_0 Y_0 + e_d (1 − e^{−ηα})`.
pub fn normal_gains(cfg: &SourceConfig, ch: &ChannelParams) -> GainStats {
    let detect = |intensity: f64| -(-ch.eta * intensity).exp_m1();
    let background = match ch.gain_model {
        GainModel::WithBackground => ch.y0,
        GainModel::SignalOnly => 0.0,
    };
    let (d_mu, d_nu) = (detect(cfg.mu()), detect(cfg.nu()));
    GainStats {
        q_mu_gain: background + d_mu,
        q_nu_gain: background + d_nu,
        emu_qmu: BACKGROUND_ERROR_RATE * ch.y0 + ch.e_d * d_mu,
        enu_qnu: BACKGROUND_ERROR_RATE * ch.y0 + ch.e_d * d_nu,
    }
}

/// Binary Shannon entropy in bits.
pub fn binary_entropy(e: f64) -> Result<f64, ChannelError> {
    if !(0.0..=1.0).contains(&e) {
        return Err(ChannelError::EntropyDomain(e));
    }
    if e == 0.0 || e == 1.0 {
        return Ok(0.0);
    }
    Ok(-e * e.log2() - (1.0 - e) * (1.0 - e).log2())
}

fn entropy_clamped(e: f64) -> f64 {
    binary_entropy(e.clamp(0.0, 1.0)).expect("argument clamped into domain")
}

/// Lower bound on the single-photon yield from one weak decoy, clamped to `[0, 1]`.
pub fn one_decoy_y1_lower(cfg: &SourceConfig, g: &GainStats) -> Result<f64, DecoyError> {
    let (mu, nu) = (cfg.mu(), cfg.nu());
    if nu <= 0.0 || nu >= mu {
        return Err(DecoyError::DegenerateDecoy { mu, nu });
    }
    let mu2 = mu * mu;
    let bound = mu / (mu * nu - nu * nu)
        * (g.q_nu_gain * nu.exp()
            - g.q_mu_gain * mu.exp() * nu * nu / mu2
            - g.emu_qmu * mu.exp() * (mu2 - nu * nu) / (BACKGROUND_ERROR_RATE * mu2));
    Ok(bound.clamp(0.0, 1.0))
}

/// Upper bound on the single-photon error rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct E1Bound {
    /// Value of the bound before any clamping.
    pub raw: f64,
    /// `raw` clamped to `[0, 1/2]`, the range used for entropy evaluation.
    pub clamped: f64,
}

/// `e_1 ≤ E_μQ_μ e^μ / (Y_1 μ)`; `None` when `y1_lower` is zero and the
/// bound is undefined.
pub fn one_decoy_e1_upper(cfg: &SourceConfig, g: &GainStats, y1_lower: f64) -> Option<E1Bound> {
    if !(y1_lower > 0.0) {
        return None;
    }
    let mu = cfg.mu();
    let raw = g.emu_qmu * mu.exp() / (y1_lower * mu);
    Some(E1Bound {
        raw,
        clamped: raw.clamp(0.0, 0.5),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoyEstimates {
    pub y1_lower: f64,
    /// `None` when `y1_lower == 0`.
    pub e1_upper: Option<E1Bound>,
}

pub fn decoy_estimates(cfg: &SourceConfig, g: &GainStats) -> Result<DecoyEstimates, DecoyError> {
    let y1_lower = one_decoy_y1_lower(cfg, g)?;
    Ok(DecoyEstimates {
        y1_lower,
        e1_upper: one_decoy_e1_upper(cfg, g, y1_lower),
    })
}

/// Believed key rate `−Q_μ H(E_μ) + Y_1 μ e^{−μ} [1 − H(e_1)]`, sift factor 1.
///
/// Returned unclamped; it goes negative once the error-correction cost
/// exceeds the single-photon contribution. `E_μ` enters the entropy clamped
/// to `[0, 1/2]`.
pub fn key_rate_lower(cfg: &SourceConfig, g: &GainStats, d: &DecoyEstimates) -> f64 {
    let mu = cfg.mu();
    let cost = match g.qber_mu() {
        Some(e_mu) => g.q_mu_gain * entropy_clamped(e_mu.min(0.5)),
        None => 0.0,
    };
    let single_photon = match d.e1_upper {
        Some(e1) => d.y1_lower * mu * (-mu).exp() * (1.0 - entropy_clamped(e1.clamped)),
        None => 0.0,
    };
    single_photon - cost
}

/// Everything Alice and Bob compute for one channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BelievedRate {
    pub gains: GainStats,
    pub estimates: DecoyEstimates,
    pub rate: f64,
}

pub fn believed_rate(cfg: &SourceConfig, ch: &ChannelParams) -> Result<BelievedRate, DecoyError> {
    let gains = normal_gains(cfg, ch);
    let estimates = decoy_estimates(cfg, &gains)?;
    Ok(BelievedRate {
        gains,
        estimates,
        rate: key_rate_lower(cfg, &gains, &estimates),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reference_cfg() -> SourceConfig {
        SourceConfig::reference()
    }

    #[test]
    fn channel_validation() {
        assert!(ChannelParams::new(0.0, 1e-7, 0.02).is_err());
        assert!(ChannelParams::new(1.5, 1e-7, 0.02).is_err());
        assert!(ChannelParams::new(0.5, 1.0, 0.02).is_err());
        assert!(ChannelParams::new(0.5, 0.0, 0.6).is_err());
        assert!(ChannelParams::from_loss_db(-1.0, 0.0, 0.0).is_err());
        let ch = ChannelParams::reference(30.0).unwrap();
        assert!((ch.eta() - 1e-3).abs() < 1e-18);
        assert!((ch.loss_db() - 30.0).abs() < 1e-12);
        assert_eq!(ch.e0(), 0.5);
    }

    #[test]
    fn detector_composition() {
        let eta = overall_efficiency(10.0, DEFAULT_DETECTOR_EFFICIENCY).unwrap();
        assert!((eta - 0.005).abs() < 1e-15);
        assert!((loss_db_from_eta(eta) - (10.0 + 13.010_299_956_639_812)).abs() < 1e-12);
    }

    #[test]
    fn gains_without_transmission() {
        let ch = ChannelParams::new(1e-300, 1e-7, 0.02)
            .unwrap()
            .with_gain_model(GainModel::SignalOnly);
        let g = normal_gains(&reference_cfg(), &ch);
        assert!(g.q_mu_gain < 1e-299);
        assert_eq!(g.emu_qmu, 0.5e-7);

        let with_bg = normal_gains(&reference_cfg(), &ch.with_gain_model(GainModel::WithBackground));
        assert_eq!(with_bg.q_mu_gain, 1e-7);
        assert!(with_bg.is_consistent());
    }

    #[test]
    fn gains_frozen_values() {
        let ch = ChannelParams::new(1.0, 0.0, 0.0).unwrap();
        let g = normal_gains(&reference_cfg(), &ch);
        assert!((g.q_mu_gain - 0.393_469_340_287_366_6).abs() < 1e-15);
        assert_eq!(g.emu_qmu, 0.0);

        // 1 - exp(-0.5 * 10^-3.63), high-precision evaluation
        let ch = ChannelParams::from_loss_db(36.3, 0.0, 0.02).unwrap();
        let g = normal_gains(&reference_cfg(), &ch);
        assert!((g.q_mu_gain - 1.172_045_717_734_503e-4).abs() < 1e-16);
    }

    #[test]
    fn entropy_values() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert!((binary_entropy(0.02).unwrap() - 0.141_440_542_541_820_65).abs() < 1e-15);
        assert!(binary_entropy(-0.1).is_err());
        assert!(binary_entropy(1.1).is_err());
    }

    #[test]
    fn degenerate_decoy_rejected() {
        let vacuum_decoy = SourceConfig::in_phase(0.5, 0.0).unwrap();
        assert!(matches!(
            one_decoy_y1_lower(&vacuum_decoy, &GainStats::ZERO),
            Err(DecoyError::DegenerateDecoy { .. })
        ));
    }

    #[test]
    fn zero_gains_give_zero_estimates() {
        let y1 = one_decoy_y1_lower(&reference_cfg(), &GainStats::ZERO).unwrap();
        assert_eq!(y1, 0.0);
        assert_eq!(one_decoy_e1_upper(&reference_cfg(), &GainStats::ZERO, y1), None);
        let d = decoy_estimates(&reference_cfg(), &GainStats::ZERO).unwrap();
        assert_eq!(key_rate_lower(&reference_cfg(), &GainStats::ZERO, &d), 0.0);
    }

    #[test]
    fn e1_bound_cases() {
        let cfg = reference_cfg();
        let mut g = GainStats {
            q_mu_gain: 1e-3,
            q_nu_gain: 2e-4,
            emu_qmu: 0.0,
            enu_qnu: 0.0,
        };
        let e1 = one_decoy_e1_upper(&cfg, &g, 1e-3).unwrap();
        assert_eq!(e1.raw, 0.0);
        assert_eq!(e1.clamped, 0.0);

        g.emu_qmu = 1e-4;
        let e1 = one_decoy_e1_upper(&cfg, &g, 1e-8).unwrap();
        assert!(e1.raw > 1.0);
        assert_eq!(e1.clamped, 0.5);
    }

    #[test]
    fn pure_cost_term() {
        let cfg = reference_cfg();
        let g = GainStats {
            q_mu_gain: 1e-4,
            q_nu_gain: 1e-5,
            emu_qmu: 0.5e-4,
            enu_qnu: 0.5e-5,
        };
        let d = DecoyEstimates {
            y1_lower: 0.0,
            e1_upper: None,
        };
        assert_eq!(key_rate_lower(&cfg, &g, &d), -1e-4);
    }

    #[test]
    fn frozen_pipeline_at_30_db() {
        // high-precision evaluations of the one-decoy pipeline at eta = 1e-3
        let cfg = reference_cfg();
        let ch = ChannelParams::reference(30.0).unwrap();
        let r = believed_rate(&cfg, &ch).unwrap();
        assert!((r.estimates.y1_lower / 5.730_436_508_291_937e-4 - 1.0).abs() < 1e-12);
        let e1 = r.estimates.e1_upper.unwrap();
        assert!((e1.raw / 5.781_593_646_581_92e-2 - 1.0).abs() < 1e-12);
        assert!((r.rate / 4.741_084_022_850_6e-5 - 1.0).abs() < 1e-11);

        let verbatim = ch.with_gain_model(GainModel::SignalOnly);
        let r = believed_rate(&cfg, &verbatim).unwrap();
        assert!((r.estimates.y1_lower / 5.717_446_232_451_341e-4 - 1.0).abs() < 1e-12);
        assert!((r.rate / 4.705_370_671_346_406e-5 - 1.0).abs() < 1e-11);
    }

    #[test]
    fn noiseless_channel_drops_entropy_terms() {
        let cfg = reference_cfg();
        for loss in [10.0, 25.0, 40.0] {
            let ch = ChannelParams::from_loss_db(loss, 0.0, 0.0).unwrap();
            let r = believed_rate(&cfg, &ch).unwrap();
            let e1 = r.estimates.e1_upper.unwrap();
            assert_eq!(e1.raw, 0.0);
            let expected = r.estimates.y1_lower * 0.5 * (-0.5f64).exp();
            assert!((r.rate - expected).abs() <= 1e-18);
        }
    }

    #[test]
    fn noiseless_y1_approaches_eta() {
        // exact single-photon yield of a lossy channel is eta
        let cfg = SourceConfig::in_phase(0.5, 0.01).unwrap();
        for loss in [30.0, 40.0, 50.0] {
            let ch = ChannelParams::from_loss_db(loss, 0.0, 0.0).unwrap();
            let y1 = one_decoy_y1_lower(&cfg, &normal_gains(&cfg, &ch)).unwrap();
            let eta = ch.eta();
            assert!(y1 <= eta * (1.0 + 1e-12));
            assert!(y1 > 0.97 * eta, "y1 {y1} eta {eta}");
        }
        let wide = SourceConfig::reference();
        let narrow = SourceConfig::in_phase(0.5, 0.01).unwrap();
        let ch = ChannelParams::from_loss_db(40.0, 0.0, 0.0).unwrap();
        let gap = |c: &SourceConfig| ch.eta() - one_decoy_y1_lower(c, &normal_gains(c, &ch)).unwrap();
        assert!(gap(&narrow) < gap(&wide));
    }

    #[test]
    fn rate_monotone_in_loss_on_reference_set() {
        let cfg = reference_cfg();
        // Past the abort point R^l is negative and drifts towards -Y0; only
        // the extractable part max(R^l, 0) has to be monotone.
        let mut prev = f64::INFINITY;
        let mut aborted = false;
        for k in 0..=1000 {
            let loss = k as f64 * 0.1;
            let r = believed_rate(&cfg, &ChannelParams::reference(loss).unwrap()).unwrap().rate;
            assert!(r.max(0.0) <= prev, "rate rose at {loss} dB");
            assert!(!aborted || r <= 0.0, "rate recovered at {loss} dB");
            aborted |= r <= 0.0;
            prev = r.max(0.0);
        }
        assert!(aborted);
    }

    proptest! {
        #[test]
        fn estimates_stay_in_range(
            q_mu in 0.0f64..1.0, q_nu in 0.0f64..1.0, e_mu in 0.0f64..1.0,
            mu in 0.05f64..1.0, frac in 0.01f64..0.99,
        ) {
            let cfg = SourceConfig::in_phase(mu, mu * frac).unwrap();
            let g = GainStats { q_mu_gain: q_mu, q_nu_gain: q_nu, emu_qmu: e_mu * q_mu, enu_qnu: 0.0 };
            let d = decoy_estimates(&cfg, &g).unwrap();
            prop_assert!((0.0..=1.0).contains(&d.y1_lower));
            if let Some(e1) = d.e1_upper {
                prop_assert!((0.0..=0.5).contains(&e1.clamped));
            }
        }

        #[test]
        fn decoy_gain_below_signal_gain(loss in 0.0f64..80.0, mu in 0.05f64..1.0, frac in 0.0f64..0.99) {
            let cfg = SourceConfig::in_phase(mu, mu * frac).unwrap();
            let ch = ChannelParams::reference(loss).unwrap();
            let g = normal_gains(&cfg, &ch);
            prop_assert!(g.q_nu_gain < g.q_mu_gain);
            prop_assert!(g.is_consistent());
        }
    }
}
