//! Loss sweeps and threshold extraction.
//!
//! Every grid point is an independent evaluation of the believed rate `R^l`
//! and the attack cap `R^u`. Thresholds are located by scanning a grid and
//! bisecting the first bracketing pair, with no monotonicity assumed for
//! `R^l − R^u`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attack::{optimize_yields, AttackError, AttackSettings, UsdPerformance};
use crate::channel::{believed_rate, ChannelError, ChannelParams, DecoyError};
use crate::source::SourceConfig;

/// Bisection stops once the bracket is no wider than this many dB.
pub const RESOLUTION_DB: f64 = 0.01;

/// Grid losses are snapped to multiples of `1 / GRID_SCALE` dB so that grids
/// with commensurate steps share bit-identical points.
const GRID_SCALE: f64 = 1e9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("invalid sweep grid: start {start} dB, end {end} dB, step {step} dB")]
    InvalidGrid { start: f64, end: f64, step: f64 },
    #[error("no sign change of R^l - R^u between {lo_db} and {hi_db} dB")]
    NoBracket { lo_db: f64, hi_db: f64 },
    #[error("attack is infeasible at bracket endpoint {loss_db} dB")]
    InfeasibleEndpoint { loss_db: f64 },
    #[error("attack never succeeds in the swept range")]
    EmptyRegion,
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Decoy(#[from] DecoyError),
    #[error(transparent)]
    Attack(#[from] AttackError),
}

/// Evenly spaced losses `start, start + step, …` not exceeding `end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub start_db: f64,
    pub end_db: f64,
    pub step_db: f64,
}

impl SweepGrid {
    pub fn new(start_db: f64, end_db: f64, step_db: f64) -> Result<Self, AnalysisError> {
        let ok = start_db.is_finite()
            && end_db.is_finite()
            && step_db.is_finite()
            && start_db >= 0.0
            && start_db < end_db
            && step_db > 0.0;
        if !ok {
            return Err(AnalysisError::InvalidGrid {
                start: start_db,
                end: end_db,
                step: step_db,
            });
        }
        Ok(Self {
            start_db,
            end_db,
            step_db,
        })
    }

    /// A one-point grid.
    pub fn single(loss_db: f64) -> Self {
        Self {
            start_db: loss_db,
            end_db: loss_db,
            step_db: 1.0,
        }
    }

    pub fn points(&self) -> Vec<f64> {
        let n = ((self.end_db - self.start_db) / self.step_db + 1e-9).floor().max(0.0) as usize;
        (0..=n)
            .map(|k| snap(self.start_db + k as f64 * self.step_db))
            .collect()
    }
}

fn snap(loss_db: f64) -> f64 {
    (loss_db * GRID_SCALE).round() / GRID_SCALE
}

/// One evaluated loss point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub loss_db: f64,
    pub eta: f64,
    pub q_mu_gain: f64,
    pub r_lower: f64,
    /// `None` when the attack cannot reproduce the channel statistics.
    pub r_upper: Option<f64>,
    pub feasible: bool,
    pub attack_success: bool,
    /// Set when the point could not be evaluated; the rates are then NaN/absent.
    pub error: Option<String>,
}

impl SweepRow {
    fn failed(loss_db: f64, err: &AnalysisError) -> Self {
        Self {
            loss_db,
            eta: f64::NAN,
            q_mu_gain: f64::NAN,
            r_lower: f64::NAN,
            r_upper: None,
            feasible: false,
            attack_success: false,
            error: Some(err.to_string()),
        }
    }

    /// `R^l − R^u`, when both are known.
    pub fn gap(&self) -> Option<f64> {
        self.r_upper.map(|ru| self.r_lower - ru).filter(|g| !g.is_nan())
    }
}

/// Which condition ends the success region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionLimit {
    /// `R^l` falls to zero and Alice and Bob abort.
    BelievedRateAbort,
    /// `R^u` climbs back above `R^l`.
    BoundsRecross,
    /// The attack can no longer reproduce the channel statistics.
    AttackInfeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessRegion {
    pub lower_db: f64,
    /// `None` when the attack still succeeds at the end of the sweep.
    pub upper_db: Option<f64>,
    pub upper_limit: Option<RegionLimit>,
}

/// The fixed inputs of a loss scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub source: SourceConfig,
    pub usd: UsdPerformance,
    /// Receiver model; its efficiency is replaced at each loss.
    pub channel: ChannelParams,
    pub attack: AttackSettings,
}

impl Scenario {
    pub fn evaluate(&self, loss_db: f64) -> Result<SweepRow, AnalysisError> {
        let ch = self.channel.at_loss_db(loss_db)?;
        let believed = believed_rate(&self.source, &ch)?;
        let outcome = optimize_yields(
            &self.source,
            &self.usd,
            &ch,
            self.attack.n_trunc,
            self.attack.enforce_errors,
        )?;
        let r_lower = believed.rate;
        let r_upper = outcome.rate_upper();
        let attack_success = matches!(r_upper, Some(ru) if r_lower > ru && r_lower > 0.0);
        Ok(SweepRow {
            loss_db,
            eta: ch.eta(),
            q_mu_gain: believed.gains.q_mu_gain,
            r_lower,
            r_upper,
            feasible: outcome.is_feasible(),
            attack_success,
            error: None,
        })
    }

    /// Evaluates every grid point, in parallel, returning rows in loss order.
    /// A point that fails to evaluate is kept as a row with `error` set.
    pub fn sweep(&self, grid: &SweepGrid) -> Vec<SweepRow> {
        grid.points()
            .into_par_iter()
            .map(|loss| self.evaluate(loss).unwrap_or_else(|e| SweepRow::failed(loss, &e)))
            .collect()
    }

    /// Root of `R^l − R^u` inside `[lo_db, hi_db]` to [`RESOLUTION_DB`].
    pub fn find_crossover(&self, lo_db: f64, hi_db: f64) -> Result<f64, AnalysisError> {
        let gap = |loss: f64| -> Result<f64, AnalysisError> {
            let row = self.evaluate(loss)?;
            row.r_upper
                .map(|ru| row.r_lower - ru)
                .ok_or(AnalysisError::InfeasibleEndpoint { loss_db: loss })
        };
        let (mut lo, mut hi) = (lo_db.min(hi_db), lo_db.max(hi_db));
        let g_lo = gap(lo)?;
        let g_hi = gap(hi)?;
        if g_lo == 0.0 {
            return Ok(lo);
        }
        if g_hi == 0.0 {
            return Ok(hi);
        }
        if g_lo.signum() == g_hi.signum() {
            return Err(AnalysisError::NoBracket { lo_db: lo, hi_db: hi });
        }
        while hi - lo > RESOLUTION_DB {
            let mid = 0.5 * (lo + hi);
            let g_mid = gap(mid)?;
            if g_mid == 0.0 {
                return Ok(mid);
            }
            if g_mid.signum() == g_lo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Scans `grid` for the first adjacent pair of feasible points where
    /// `R^l − R^u` changes sign and bisects it.
    pub fn scan_crossover(&self, grid: &SweepGrid) -> Result<f64, AnalysisError> {
        let rows = self.sweep(grid);
        for pair in rows.windows(2) {
            if let (Some(a), Some(b)) = (pair[0].gap(), pair[1].gap()) {
                if a == 0.0 {
                    return Ok(pair[0].loss_db);
                }
                if a.signum() != b.signum() {
                    return self.find_crossover(pair[0].loss_db, pair[1].loss_db);
                }
            }
        }
        Err(AnalysisError::NoBracket {
            lo_db: grid.start_db,
            hi_db: grid.end_db,
        })
    }

    /// First contiguous stretch of the grid where the attack succeeds, with
    /// both edges refined by bisection on the success predicate.
    pub fn success_region(&self, grid: &SweepGrid) -> Result<SuccessRegion, AnalysisError> {
        let rows = self.sweep(grid);
        let first = rows
            .iter()
            .position(|r| r.attack_success)
            .ok_or(AnalysisError::EmptyRegion)?;
        let lower_db = if first == 0 {
            rows[0].loss_db
        } else {
            self.refine_edge(rows[first - 1].loss_db, rows[first].loss_db)?
        };
        let Some(end) = rows[first..].iter().position(|r| !r.attack_success) else {
            return Ok(SuccessRegion {
                lower_db,
                upper_db: None,
                upper_limit: None,
            });
        };
        let (inside, outside) = (rows[first + end - 1].loss_db, rows[first + end].loss_db);
        let upper_db = self.refine_edge(inside, outside)?;
        let beyond = self.evaluate(upper_db + RESOLUTION_DB)?;
        let upper_limit = match beyond.r_upper {
            None => RegionLimit::AttackInfeasible,
            Some(_) if beyond.r_lower <= 0.0 => RegionLimit::BelievedRateAbort,
            Some(_) => RegionLimit::BoundsRecross,
        };
        Ok(SuccessRegion {
            lower_db,
            upper_db: Some(upper_db),
            upper_limit: Some(upper_limit),
        })
    }

    /// Bisects between losses `a` and `b` where the success predicate differs.
    fn refine_edge(&self, a: f64, b: f64) -> Result<f64, AnalysisError> {
        let success_at_a = self.evaluate(a)?.attack_success;
        let (mut a, mut b) = (a, b);
        while (b - a).abs() > RESOLUTION_DB {
            let mid = 0.5 * (a + b);
            if self.evaluate(mid)?.attack_success == success_at_a {
                a = mid;
            } else {
                b = mid;
            }
        }
        Ok(0.5 * (a + b))
    }
}
