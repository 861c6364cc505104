//! Subcommand bodies. Each renders its whole output to a string so that
//! nothing is written when a command fails.

use std::fmt::Write as _;

use thiserror::Error;

use usdpns_core::analysis::{AnalysisError, RegionLimit, SweepRow};
use usdpns_core::attack::{attack_gains, optimize_yields};
use usdpns_core::channel::believed_rate;
use usdpns_core::sim::{run_trials, Estimate, TrialConfig};
use usdpns_core::source::{failure_probability, usd_success_linear_optics, usd_success_optimal};

use crate::config::{ConfigError, RunConfig};

pub const SWEEP_HEADER: &str = "loss_db,eta,q_mu_gain,r_lower,r_upper,feasible,attack_success";
pub const SIMULATE_HEADER: &str = "quantity,empirical,std_err,analytic,z_score";

#[derive(Debug, Error)]
pub enum CommandError {
    /// Bad input; exit status 1.
    #[error(transparent)]
    Config(#[from] ConfigError),
    /// The computation itself failed; exit status 2.
    #[error("{0}")]
    Computation(String),
}

impl From<AnalysisError> for CommandError {
    fn from(e: AnalysisError) -> Self {
        CommandError::Computation(e.to_string())
    }
}

impl CommandError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CommandError::Config(_) => 1,
            CommandError::Computation(_) => 2,
        }
    }
}

fn computation(e: impl std::fmt::Display) -> CommandError {
    CommandError::Computation(e.to_string())
}

pub fn usd(cfg: &RunConfig) -> Result<String, CommandError> {
    let s = &cfg.source;
    Ok(format!(
        "q_opt = {:.6}\nq_max = {:.6}\np_f = {:.6}\n",
        usd_success_optimal(s),
        usd_success_linear_optics(s),
        failure_probability(s)
    ))
}

pub fn bounds(cfg: &RunConfig) -> Result<String, CommandError> {
    let ch = &cfg.channel;
    let b = believed_rate(&cfg.source, ch).map_err(computation)?;
    let outcome = optimize_yields(
        &cfg.source,
        &cfg.usd,
        ch,
        cfg.attack.n_trunc,
        cfg.attack.enforce_errors,
    )
    .map_err(computation)?;
    let mut out = String::new();
    let _ = writeln!(out, "loss_db = {:.2}", cfg.loss_db());
    let _ = writeln!(out, "fiber_loss_db = {:.2}", cfg.fiber_loss_db());
    let _ = writeln!(out, "eta = {:.6e}", ch.eta());
    let _ = writeln!(out, "q_mu_gain = {:.6e}", b.gains.q_mu_gain);
    let _ = writeln!(out, "q_nu_gain = {:.6e}", b.gains.q_nu_gain);
    let _ = writeln!(out, "y1_lower = {:.6e}", b.estimates.y1_lower);
    match b.estimates.e1_upper {
        Some(e1) => writeln!(out, "e1_upper = {:.6}", e1.clamped),
        None => writeln!(out, "e1_upper = undefined"),
    }
    .ok();
    let _ = writeln!(out, "r_lower = {:.6e}", b.rate);
    match outcome.solution() {
        Some(sol) => {
            let _ = writeln!(out, "y1_signal = {:.6e}", sol.y1_signal);
            let _ = writeln!(out, "r_upper = {:.6e}", sol.rate_upper);
        }
        None => {
            let _ = writeln!(out, "r_upper = infeasible");
        }
    }
    let success = matches!(outcome.rate_upper(), Some(ru) if b.rate > ru && b.rate > 0.0);
    let _ = writeln!(out, "feasible = {}", outcome.is_feasible());
    let _ = writeln!(out, "attack_success = {success}");
    Ok(out)
}

fn sweep_line(r: &SweepRow) -> String {
    let ru = r.r_upper.map(|v| format!("{v:e}")).unwrap_or_default();
    format!(
        "{},{:e},{:e},{:e},{ru},{},{}",
        r.loss_db, r.eta, r.q_mu_gain, r.r_lower, r.feasible, r.attack_success
    )
}

/// Sweep CSV plus one diagnostic per row that failed to evaluate.
pub fn sweep(cfg: &RunConfig) -> Result<(String, Vec<String>), CommandError> {
    let grid = cfg.grid()?;
    let rows = cfg.scenario().sweep(&grid);
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    let mut diagnostics = Vec::new();
    for r in &rows {
        out.push_str(&sweep_line(r));
        out.push('\n');
        if let Some(e) = &r.error {
            diagnostics.push(format!("{} dB: {e}", r.loss_db));
        }
    }
    Ok((out, diagnostics))
}

pub fn crossover(cfg: &RunConfig, bracket: Option<(f64, f64)>) -> Result<String, CommandError> {
    let s = cfg.scenario();
    let root = match bracket {
        Some((lo, hi)) => s.find_crossover(lo, hi)?,
        None => s.scan_crossover(&cfg.grid()?)?,
    };
    Ok(format!("crossover_db = {root:.2}\n"))
}

pub fn region(cfg: &RunConfig) -> Result<String, CommandError> {
    let r = cfg.scenario().success_region(&cfg.grid()?)?;
    let mut out = format!("lower_db = {:.2}\n", r.lower_db);
    match (r.upper_db, r.upper_limit) {
        (Some(upper), Some(limit)) => {
            let limit = match limit {
                RegionLimit::BelievedRateAbort => "believed_rate_abort",
                RegionLimit::BoundsRecross => "bounds_recross",
                RegionLimit::AttackInfeasible => "attack_infeasible",
            };
            let _ = write!(out, "upper_db = {upper:.2}\nlimit = {limit}\n");
        }
        _ => out.push_str("upper_db = none\n"),
    }
    Ok(out)
}

/// Runs the Monte Carlo model against Eve's optimal plan at the configured
/// loss and compares with the analytic statistics.
pub fn simulate(cfg: &RunConfig) -> Result<String, CommandError> {
    let outcome = optimize_yields(
        &cfg.source,
        &cfg.usd,
        &cfg.channel,
        cfg.attack.n_trunc,
        cfg.attack.enforce_errors,
    )
    .map_err(computation)?;
    let plan = outcome
        .solution()
        .ok_or_else(|| {
            CommandError::Computation(format!(
                "attack is infeasible at {:.2} dB; nothing to simulate",
                cfg.loss_db()
            ))
        })?
        .plan
        .clone();
    let analytic = attack_gains(&cfg.source, &cfg.usd, &plan);
    let stats = run_trials(&TrialConfig {
        n_pulses: cfg.mc.n_pulses,
        seed: cfg.mc.seed,
        cfg: cfg.source,
        usd: cfg.usd,
        plan,
    })
    .map_err(computation)?;

    let u = &cfg.usd;
    let rows: [(&str, Estimate, f64); 8] = [
        ("q_mu", stats.q_mu_hat, u.q_mu()),
        ("q_nu", stats.q_nu_hat, u.q_nu()),
        ("xi_mu", stats.xi_mu_hat, u.xi_mu()),
        ("xi_nu", stats.xi_nu_hat, u.xi_nu()),
        ("gain_mu", stats.gain_mu_hat, analytic.q_mu_gain),
        ("gain_nu", stats.gain_nu_hat, analytic.q_nu_gain),
        ("error_gain_mu", stats.error_gain_mu_hat, analytic.emu_qmu),
        ("error_gain_nu", stats.error_gain_nu_hat, analytic.enu_qnu),
    ];
    let mut out = String::from(SIMULATE_HEADER);
    out.push('\n');
    for (name, est, p) in rows {
        let se = est.std_err_at(p);
        let z = if se > 0.0 { format!("{:.4}", (est.value - p) / se) } else { String::new() };
        let _ = writeln!(out, "{name},{:e},{:e},{:e},{z}", est.value, est.std_err, p);
    }
    Ok(out)
}
