//! Eve's USD+PNS attack.
//!
//! After a conclusive USD outcome Eve measures the photon number and forwards
//! to Bob with a yield chosen per outcome and photon number: `Z_i^μ` after
//! concluding "signal", `Z_i^ν` after concluding "decoy". Inconclusive
//! outcomes and vacuum pulses are never forwarded. The yields are chosen by a
//! linear program that reproduces Bob's normal-channel gains (and optionally
//! keeps the error terms below their normal-channel values) while minimising
//! the single-photon signal yield, which caps the secure key rate.

pub mod simplex;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{normal_gains, ChannelParams, GainStats};
use crate::poisson::{poisson_pmf, poisson_tail};
use crate::source::{usd_success_linear_optics, usd_success_optimal, SourceConfig};
use simplex::{LinearProgram, LpOutcome};

/// Default photon-number truncation of the yield plan.
pub const DEFAULT_TRUNCATION: usize = 20;

/// Poisson mass above the truncation that triggers a warning.
pub const TAIL_WARNING: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AttackError {
    #[error("{field} must lie in [0, 1] (got {value})")]
    Probability { field: &'static str, value: f64 },
    #[error("{field} = {value} exceeds the {ceiling:?} ceiling {limit}")]
    ExceedsCeiling {
        field: &'static str,
        value: f64,
        ceiling: UsdCeiling,
        limit: f64,
    },
    #[error("photon-number truncation must be at least 1")]
    ZeroTruncation,
    #[error("yield plan columns differ in length ({mu} vs {nu})")]
    PlanShape { mu: usize, nu: usize },
    #[error("yield Z_{photons} = {value} lies outside [0, 1]")]
    YieldRange { photons: usize, value: f64 },
    #[error("linear program failed: {0}")]
    Solver(String),
}

/// Which theoretical success probability bounds a USD implementation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UsdCeiling {
    Optimal,
    LinearOptics,
}

impl UsdCeiling {
    pub fn limit(self, cfg: &SourceConfig) -> f64 {
        match self {
            UsdCeiling::Optimal => usd_success_optimal(cfg),
            UsdCeiling::LinearOptics => usd_success_linear_optics(cfg),
        }
    }
}

/// Success probabilities `q` and correct-identification probabilities `ξ`
/// of Eve's signal/decoy discrimination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UsdPerformance {
    q_mu: f64,
    q_nu: f64,
    xi_mu: f64,
    xi_nu: f64,
}

impl UsdPerformance {
    pub fn new(q_mu: f64, q_nu: f64, xi_mu: f64, xi_nu: f64) -> Result<Self, AttackError> {
        for (field, value) in [("q_mu", q_mu), ("q_nu", q_nu), ("xi_mu", xi_mu), ("xi_nu", xi_nu)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(AttackError::Probability { field, value });
            }
        }
        Ok(Self {
            q_mu,
            q_nu,
            xi_mu,
            xi_nu,
        })
    }

    /// Measured performance of the interferometric demonstration.
    pub fn experimental() -> Self {
        Self::new(1.18e-3, 1.16e-3, 0.9690, 0.9837).expect("valid constants")
    }

    /// Error-free discrimination succeeding with probability `q` on both states.
    pub fn ideal(q: f64) -> Result<Self, AttackError> {
        Self::new(q, q, 1.0, 1.0)
    }

    /// Ideal discrimination at the given ceiling for `cfg`.
    pub fn at_ceiling(cfg: &SourceConfig, ceiling: UsdCeiling) -> Self {
        Self::ideal(ceiling.limit(cfg)).expect("ceilings are probabilities")
    }

    pub fn q_mu(&self) -> f64 {
        self.q_mu
    }

    pub fn q_nu(&self) -> f64 {
        self.q_nu
    }

    pub fn xi_mu(&self) -> f64 {
        self.xi_mu
    }

    pub fn xi_nu(&self) -> f64 {
        self.xi_nu
    }

    /// Rejects success probabilities above what `ceiling` permits for `cfg`.
    pub fn check_ceiling(&self, cfg: &SourceConfig, ceiling: UsdCeiling) -> Result<(), AttackError> {
        let limit = ceiling.limit(cfg);
        for (field, value) in [("q_mu", self.q_mu), ("q_nu", self.q_nu)] {
            if value > limit {
                return Err(AttackError::ExceedsCeiling {
                    field,
                    value,
                    ceiling,
                    limit,
                });
            }
        }
        Ok(())
    }
}

/// Eve's conditional yields for photon numbers `1..=N`.
///
/// Vacuum yields and the yields after an inconclusive outcome are zero and
/// not stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YieldPlan {
    z_mu: Vec<f64>,
    z_nu: Vec<f64>,
}

impl YieldPlan {
    /// `z_mu[k]` and `z_nu[k]` are the yields for `k + 1` photons.
    pub fn new(z_mu: Vec<f64>, z_nu: Vec<f64>) -> Result<Self, AttackError> {
        if z_mu.len() != z_nu.len() {
            return Err(AttackError::PlanShape {
                mu: z_mu.len(),
                nu: z_nu.len(),
            });
        }
        if z_mu.is_empty() {
            return Err(AttackError::ZeroTruncation);
        }
        for (k, &value) in z_mu.iter().chain(&z_nu).enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(AttackError::YieldRange {
                    photons: k % z_mu.len() + 1,
                    value,
                });
            }
        }
        Ok(Self { z_mu, z_nu })
    }

    pub fn uniform(n_trunc: usize, value: f64) -> Result<Self, AttackError> {
        Self::new(vec![value; n_trunc], vec![value; n_trunc])
    }

    pub fn n_trunc(&self) -> usize {
        self.z_mu.len()
    }

    /// Yield after concluding "signal" for `photons` photons (zero outside `1..=N`).
    pub fn z_mu(&self, photons: usize) -> f64 {
        lookup(&self.z_mu, photons)
    }

    /// Yield after concluding "decoy" for `photons` photons (zero outside `1..=N`).
    pub fn z_nu(&self, photons: usize) -> f64 {
        lookup(&self.z_nu, photons)
    }

    pub fn z_mu_column(&self) -> &[f64] {
        &self.z_mu
    }

    pub fn z_nu_column(&self) -> &[f64] {
        &self.z_nu
    }
}

fn lookup(column: &[f64], photons: usize) -> f64 {
    if photons == 0 {
        0.0
    } else {
        column.get(photons - 1).copied().unwrap_or(0.0)
    }
}

/// Yields Bob observes for signal and decoy, indexed by photon number `0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonYields {
    pub signal: Vec<f64>,
    pub decoy: Vec<f64>,
}

/// `Y_i^s = q_μ[ξ_μ Z_i^μ + (1−ξ_μ) Z_i^ν]`, `Y_i^d = q_ν[ξ_ν Z_i^ν + (1−ξ_ν) Z_i^μ]`.
pub fn yields_from_plan(_cfg: &SourceConfig, usd: &UsdPerformance, plan: &YieldPlan) -> PhotonYields {
    let n = plan.n_trunc();
    let mut signal = vec![0.0; n + 1];
    let mut decoy = vec![0.0; n + 1];
    for i in 1..=n {
        let (zm, zn) = (plan.z_mu(i), plan.z_nu(i));
        signal[i] = usd.q_mu * (usd.xi_mu * zm + (1.0 - usd.xi_mu) * zn);
        decoy[i] = usd.q_nu * (usd.xi_nu * zn + (1.0 - usd.xi_nu) * zm);
    }
    PhotonYields { signal, decoy }
}

/// Gains and error terms Bob sees under the attack.
///
/// A pulse forwarded after misidentifying the state is counted as an error
/// with weight ½; correctly identified pulses carry no error.
pub fn attack_gains(cfg: &SourceConfig, usd: &UsdPerformance, plan: &YieldPlan) -> GainStats {
    let yields = yields_from_plan(cfg, usd, plan);
    let mut g = GainStats::ZERO;
    for i in 1..=plan.n_trunc() {
        let (ps, pd) = (poisson_pmf(cfg.mu(), i as u32), poisson_pmf(cfg.nu(), i as u32));
        g.q_mu_gain += yields.signal[i] * ps;
        g.q_nu_gain += yields.decoy[i] * pd;
        g.emu_qmu += 0.5 * usd.q_mu * (1.0 - usd.xi_mu) * plan.z_nu(i) * ps;
        g.enu_qnu += 0.5 * usd.q_nu * (1.0 - usd.xi_nu) * plan.z_mu(i) * pd;
    }
    g
}

/// Secure key rate cap `Y_1^s μ e^{−μ}` imposed by the attack.
pub fn key_rate_upper(cfg: &SourceConfig, y1_signal: f64) -> f64 {
    rate_from_yield(cfg.mu(), y1_signal)
}

fn rate_from_yield(mu: f64, y1_signal: f64) -> f64 {
    y1_signal * mu * (-mu).exp()
}

/// Statistics Eve must reproduce.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackTargets {
    pub gain_mu: f64,
    pub gain_nu: f64,
    /// Caps on the attack's error terms; `None` leaves errors unconstrained.
    pub error_cap_mu: Option<f64>,
    pub error_cap_nu: Option<f64>,
}

impl AttackTargets {
    pub fn from_gains(g: &GainStats, enforce_errors: bool) -> Self {
        Self {
            gain_mu: g.q_mu_gain,
            gain_nu: g.q_nu_gain,
            error_cap_mu: enforce_errors.then_some(g.emu_qmu),
            error_cap_nu: enforce_errors.then_some(g.enu_qnu),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackSettings {
    pub n_trunc: usize,
    pub enforce_errors: bool,
}

impl Default for AttackSettings {
    fn default() -> Self {
        Self {
            n_trunc: DEFAULT_TRUNCATION,
            enforce_errors: false,
        }
    }
}

/// Largest violation of each constraint class at the solver's raw output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintResiduals {
    /// `max |attack gain − target|`.
    pub gain_equality: f64,
    /// `max (attack error − cap)`; nonpositive when satisfied, `-inf` without caps.
    pub error_inequality: f64,
    /// Distance of the raw yields outside `[0, 1]`.
    pub bounds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSolution {
    pub plan: YieldPlan,
    pub y1_signal: f64,
    pub rate_upper: f64,
    pub residuals: ConstraintResiduals,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AttackOutcome {
    Feasible(AttackSolution),
    /// The attack cannot reproduce Bob's statistics.
    Infeasible { residual: f64 },
}

impl AttackOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self, AttackOutcome::Feasible(_))
    }

    pub fn solution(&self) -> Option<&AttackSolution> {
        match self {
            AttackOutcome::Feasible(s) => Some(s),
            AttackOutcome::Infeasible { .. } => None,
        }
    }

    pub fn rate_upper(&self) -> Option<f64> {
        self.solution().map(|s| s.rate_upper)
    }
}

/// The yield-selection linear program on raw intensities.
///
/// Unlike [`SourceConfig`] this accepts `mu == nu`, which makes relabelling
/// symmetries directly testable.
#[derive(Debug, Clone, PartialEq)]
pub struct YieldProgram {
    pub mu: f64,
    pub nu: f64,
    pub usd: UsdPerformance,
    pub targets: AttackTargets,
    pub n_trunc: usize,
}

struct Rows {
    objective: Vec<f64>,
    gain_mu: Vec<f64>,
    gain_nu: Vec<f64>,
    error_mu: Vec<f64>,
    error_nu: Vec<f64>,
}

impl YieldProgram {
    /// Coefficients over the variable vector `[Z_1^μ..Z_N^μ, Z_1^ν..Z_N^ν]`.
    fn rows(&self) -> Rows {
        let n = self.n_trunc;
        let u = &self.usd;
        let mut r = Rows {
            objective: vec![0.0; 2 * n],
            gain_mu: vec![0.0; 2 * n],
            gain_nu: vec![0.0; 2 * n],
            error_mu: vec![0.0; 2 * n],
            error_nu: vec![0.0; 2 * n],
        };
        r.objective[0] = u.q_mu * u.xi_mu;
        r.objective[n] = u.q_mu * (1.0 - u.xi_mu);
        for i in 1..=n {
            let (ps, pd) = (poisson_pmf(self.mu, i as u32), poisson_pmf(self.nu, i as u32));
            let (zm, zn) = (i - 1, n + i - 1);
            r.gain_mu[zm] = u.q_mu * u.xi_mu * ps;
            r.gain_mu[zn] = u.q_mu * (1.0 - u.xi_mu) * ps;
            r.gain_nu[zn] = u.q_nu * u.xi_nu * pd;
            r.gain_nu[zm] = u.q_nu * (1.0 - u.xi_nu) * pd;
            r.error_mu[zn] = 0.5 * u.q_mu * (1.0 - u.xi_mu) * ps;
            r.error_nu[zm] = 0.5 * u.q_nu * (1.0 - u.xi_nu) * pd;
        }
        r
    }

    pub fn solve(&self) -> Result<AttackOutcome, AttackError> {
        let n = self.n_trunc;
        if n == 0 {
            return Err(AttackError::ZeroTruncation);
        }
        let tail = poisson_tail(self.mu.max(self.nu), n as u32);
        if tail > TAIL_WARNING {
            warn!("Poisson tail {tail:.3e} beyond truncation {n} exceeds {TAIL_WARNING:e}");
        }
        let rows = self.rows();
        let t = &self.targets;
        let mut lp = LinearProgram::minimize(rows.objective.clone())
            .equality(rows.gain_mu.clone(), t.gain_mu)
            .equality(rows.gain_nu.clone(), t.gain_nu)
            .upper_bounds(vec![1.0; 2 * n]);
        if let Some(cap) = t.error_cap_mu {
            lp = lp.at_most(rows.error_mu.clone(), cap);
        }
        if let Some(cap) = t.error_cap_nu {
            lp = lp.at_most(rows.error_nu.clone(), cap);
        }

        let x = match lp.solve() {
            LpOutcome::Optimal { x, .. } => x,
            LpOutcome::Infeasible { residual } => return Ok(AttackOutcome::Infeasible { residual }),
            other => return Err(AttackError::Solver(format!("{other:?}"))),
        };

        let dot = |a: &[f64]| a.iter().zip(&x).map(|(a, x)| a * x).sum::<f64>();
        let gain_equality = (dot(&rows.gain_mu) - t.gain_mu)
            .abs()
            .max((dot(&rows.gain_nu) - t.gain_nu).abs());
        let error_inequality = [
            t.error_cap_mu.map(|c| dot(&rows.error_mu) - c),
            t.error_cap_nu.map(|c| dot(&rows.error_nu) - c),
        ]
        .into_iter()
        .flatten()
        .fold(f64::NEG_INFINITY, f64::max);
        let bounds = x
            .iter()
            .map(|&v| (-v).max(v - 1.0).max(0.0))
            .fold(0.0, f64::max);

        let clamped: Vec<f64> = x.iter().map(|v| v.clamp(0.0, 1.0)).collect();
        let plan = YieldPlan::new(clamped[..n].to_vec(), clamped[n..].to_vec())?;
        let u = &self.usd;
        let y1_signal = u.q_mu * (u.xi_mu * plan.z_mu(1) + (1.0 - u.xi_mu) * plan.z_nu(1));
        Ok(AttackOutcome::Feasible(AttackSolution {
            plan,
            y1_signal,
            rate_upper: rate_from_yield(self.mu, y1_signal),
            residuals: ConstraintResiduals {
                gain_equality,
                error_inequality,
                bounds,
            },
        }))
    }
}

/// Eve's best plan against the normal channel `ch`.
pub fn optimize_yields(
    cfg: &SourceConfig,
    usd: &UsdPerformance,
    ch: &ChannelParams,
    n_trunc: usize,
    enforce_errors: bool,
) -> Result<AttackOutcome, AttackError> {
    let targets = AttackTargets::from_gains(&normal_gains(cfg, ch), enforce_errors);
    YieldProgram {
        mu: cfg.mu(),
        nu: cfg.nu(),
        usd: *usd,
        targets,
        n_trunc,
    }
    .solve()
}
