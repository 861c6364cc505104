use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attack::{UsdPerformance, YieldPlan};
use crate::source::SourceConfig;

/// Pulses per independently seeded block. Block `b` draws from ChaCha stream
/// `b` of the trial seed, so the partition is fixed by the pulse index alone.
pub const BLOCK_SIZE: u64 = 1 << 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("trial needs at least one pulse")]
    NoPulses,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialConfig {
    pub n_pulses: u64,
    pub seed: u64,
    pub cfg: SourceConfig,
    pub usd: UsdPerformance,
    pub plan: YieldPlan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StateKind {
    Signal,
    Decoy,
}

impl StateKind {
    fn index(self) -> usize {
        match self {
            StateKind::Signal => 0,
            StateKind::Decoy => 1,
        }
    }
}

/// BB84 phase `φ = k·π/2`, stored as `k ∈ {0, 1, 2, 3}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bb84Phase(u8);

impl Bb84Phase {
    pub fn quarter_turns(self) -> u8 {
        self.0
    }

    pub fn radians(self) -> f64 {
        f64::from(self.0) * std::f64::consts::FRAC_PI_2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UsdOutcome {
    /// Concluded "signal".
    Mu,
    /// Concluded "decoy".
    Nu,
    Inconclusive,
}

impl UsdOutcome {
    fn index(self) -> usize {
        match self {
            UsdOutcome::Mu => 0,
            UsdOutcome::Nu => 1,
            UsdOutcome::Inconclusive => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseRecord {
    pub state_kind: StateKind,
    pub bb84_phase: Bb84Phase,
    pub photon_count: u64,
    pub usd_outcome: UsdOutcome,
    /// Eve forwarded the pulse and Bob registered it.
    pub forwarded: bool,
    /// The registered bit disagrees with Alice's.
    pub bit_error: bool,
}

struct PulseSampler<'a> {
    tc: &'a TrialConfig,
    signal_photons: Option<Poisson<f64>>,
    decoy_photons: Option<Poisson<f64>>,
}

impl<'a> PulseSampler<'a> {
    fn new(tc: &'a TrialConfig) -> Self {
        let dist = |mean: f64| (mean > 0.0).then(|| Poisson::new(mean).expect("positive finite mean"));
        Self {
            tc,
            signal_photons: dist(tc.cfg.mu()),
            decoy_photons: dist(tc.cfg.nu()),
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> PulseRecord {
        let usd = &self.tc.usd;
        let state_kind = if rng.random_bool(0.5) {
            StateKind::Signal
        } else {
            StateKind::Decoy
        };
        let bb84_phase = Bb84Phase(rng.random_range(0..4u8));
        let (photons, q, xi, correct, wrong) = match state_kind {
            StateKind::Signal => (&self.signal_photons, usd.q_mu(), usd.xi_mu(), UsdOutcome::Mu, UsdOutcome::Nu),
            StateKind::Decoy => (&self.decoy_photons, usd.q_nu(), usd.xi_nu(), UsdOutcome::Nu, UsdOutcome::Mu),
        };
        let photon_count = photons.as_ref().map_or(0, |d| d.sample(rng) as u64);

        let u: f64 = rng.random();
        let usd_outcome = if u < q * xi {
            correct
        } else if u < q {
            wrong
        } else {
            UsdOutcome::Inconclusive
        };

        let n = usize::try_from(photon_count).unwrap_or(usize::MAX);
        let yield_prob = match usd_outcome {
            UsdOutcome::Mu => self.tc.plan.z_mu(n),
            UsdOutcome::Nu => self.tc.plan.z_nu(n),
            UsdOutcome::Inconclusive => 0.0,
        };
        let forwarded = yield_prob > 0.0 && rng.random::<f64>() < yield_prob;
        let misidentified = usd_outcome == wrong;
        let bit_error = forwarded && misidentified && rng.random_bool(0.5);

        PulseRecord {
            state_kind,
            bb84_phase,
            photon_count,
            usd_outcome,
            forwarded,
            bit_error,
        }
    }
}

fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

fn block_len(n_pulses: u64, block: u64) -> u64 {
    (n_pulses - block * BLOCK_SIZE).min(BLOCK_SIZE)
}

/// Every simulated pulse of a trial, in pulse-index order.
pub fn pulse_records(tc: &TrialConfig) -> impl Iterator<Item = PulseRecord> + '_ {
    let n_blocks = tc.n_pulses.div_ceil(BLOCK_SIZE);
    (0..n_blocks).flat_map(move |b| {
        let sampler = PulseSampler::new(tc);
        let mut rng = block_rng(tc.seed, b);
        (0..block_len(tc.n_pulses, b)).map(move |_| sampler.sample(&mut rng))
    })
}

/// Integer event counts; merging is associative and commutative.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    /// Indexed by [`StateKind`] (signal, decoy).
    pub sent: [u64; 2],
    pub conclusive: [u64; 2],
    pub correct: [u64; 2],
    pub detected: [u64; 2],
    pub errors: [u64; 2],
    /// Rows: BB84 phase; columns: outcome (μ, ν, inconclusive).
    pub phase_outcome: [[u64; 3]; 4],
    pub forwarded_inconclusive: u64,
}

impl Tally {
    pub fn record(&mut self, p: &PulseRecord) {
        let s = p.state_kind.index();
        self.sent[s] += 1;
        if p.usd_outcome != UsdOutcome::Inconclusive {
            self.conclusive[s] += 1;
            let correct = matches!(
                (p.state_kind, p.usd_outcome),
                (StateKind::Signal, UsdOutcome::Mu) | (StateKind::Decoy, UsdOutcome::Nu)
            );
            if correct {
                self.correct[s] += 1;
            }
        } else if p.forwarded {
            self.forwarded_inconclusive += 1;
        }
        if p.forwarded {
            self.detected[s] += 1;
        }
        if p.bit_error {
            self.errors[s] += 1;
        }
        self.phase_outcome[p.bb84_phase.0 as usize][p.usd_outcome.index()] += 1;
    }

    pub fn merge(mut self, other: Tally) -> Tally {
        for s in 0..2 {
            self.sent[s] += other.sent[s];
            self.conclusive[s] += other.conclusive[s];
            self.correct[s] += other.correct[s];
            self.detected[s] += other.detected[s];
            self.errors[s] += other.errors[s];
        }
        for (row, orow) in self.phase_outcome.iter_mut().zip(other.phase_outcome) {
            for (c, oc) in row.iter_mut().zip(orow) {
                *c += oc;
            }
        }
        self.forwarded_inconclusive += other.forwarded_inconclusive;
        self
    }
}

/// A binomial proportion with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
    pub trials: u64,
}

impl Estimate {
    pub fn binomial(successes: u64, trials: u64) -> Self {
        if trials == 0 {
            return Self {
                value: 0.0,
                std_err: 0.0,
                trials,
            };
        }
        let p = successes as f64 / trials as f64;
        Self {
            value: p,
            std_err: (p * (1.0 - p) / trials as f64).sqrt(),
            trials,
        }
    }

    /// Standard error the estimate would have if `p` were the true proportion.
    pub fn std_err_at(&self, p: f64) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            (p * (1.0 - p) / self.trials as f64).sqrt()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalStats {
    pub q_mu_hat: Estimate,
    pub q_nu_hat: Estimate,
    pub xi_mu_hat: Estimate,
    pub xi_nu_hat: Estimate,
    pub gain_mu_hat: Estimate,
    pub gain_nu_hat: Estimate,
    pub error_gain_mu_hat: Estimate,
    pub error_gain_nu_hat: Estimate,
    pub tally: Tally,
}

impl From<Tally> for EmpiricalStats {
    fn from(t: Tally) -> Self {
        let [s, d] = [0, 1];
        Self {
            q_mu_hat: Estimate::binomial(t.conclusive[s], t.sent[s]),
            q_nu_hat: Estimate::binomial(t.conclusive[d], t.sent[d]),
            xi_mu_hat: Estimate::binomial(t.correct[s], t.conclusive[s]),
            xi_nu_hat: Estimate::binomial(t.correct[d], t.conclusive[d]),
            gain_mu_hat: Estimate::binomial(t.detected[s], t.sent[s]),
            gain_nu_hat: Estimate::binomial(t.detected[d], t.sent[d]),
            error_gain_mu_hat: Estimate::binomial(t.errors[s], t.sent[s]),
            error_gain_nu_hat: Estimate::binomial(t.errors[d], t.sent[d]),
            tally: t,
        }
    }
}

/// Simulates `tc.n_pulses` pulses through the attack.
///
/// Blocks run in parallel; the result is identical to a serial pass over
/// [`pulse_records`].
pub fn run_trials(tc: &TrialConfig) -> Result<EmpiricalStats, SimError> {
    if tc.n_pulses == 0 {
        return Err(SimError::NoPulses);
    }
    let n_blocks = tc.n_pulses.div_ceil(BLOCK_SIZE);
    let tally = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let sampler = PulseSampler::new(tc);
            let mut rng = block_rng(tc.seed, b);
            let mut t = Tally::default();
            for _ in 0..block_len(tc.n_pulses, b) {
                t.record(&sampler.sample(&mut rng));
            }
            t
        })
        .reduce(Tally::default, Tally::merge);
    Ok(tally.into())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial(usd: UsdPerformance, plan: YieldPlan, n: u64, seed: u64) -> TrialConfig {
        TrialConfig {
            n_pulses: n,
            seed,
            cfg: SourceConfig::reference(),
            usd,
            plan,
        }
    }

    #[test]
    fn rejects_empty_trial() {
        let tc = trial(UsdPerformance::experimental(), YieldPlan::uniform(3, 1.0).unwrap(), 0, 1);
        assert_eq!(run_trials(&tc), Err(SimError::NoPulses));
    }

    #[test]
    fn blind_attacker_forwards_nothing() {
        let tc = trial(
            UsdPerformance::ideal(0.0).unwrap(),
            YieldPlan::uniform(5, 1.0).unwrap(),
            50_000,
            3,
        );
        let s = run_trials(&tc).unwrap();
        assert_eq!(s.tally.conclusive, [0, 0]);
        assert_eq!(s.tally.detected, [0, 0]);
        assert_eq!(s.gain_mu_hat.value, 0.0);
    }

    #[test]
    fn parallel_matches_serial_stream() {
        let tc = trial(
            UsdPerformance::ideal(0.3).unwrap(),
            YieldPlan::uniform(6, 0.7).unwrap(),
            3 * BLOCK_SIZE + 123,
            11,
        );
        let serial = pulse_records(&tc).fold(Tally::default(), |mut t, p| {
            t.record(&p);
            t
        });
        assert_eq!(run_trials(&tc).unwrap().tally, serial);
        assert_eq!(pulse_records(&tc).count() as u64, tc.n_pulses);
    }

    #[test]
    fn inconclusive_pulses_are_never_forwarded() {
        let tc = trial(
            UsdPerformance::new(0.4, 0.3, 0.8, 0.7).unwrap(),
            YieldPlan::uniform(8, 1.0).unwrap(),
            100_000,
            5,
        );
        for p in pulse_records(&tc) {
            if p.forwarded {
                assert_ne!(p.usd_outcome, UsdOutcome::Inconclusive);
                assert!(p.photon_count >= 1);
            }
            if p.bit_error {
                assert!(p.forwarded);
            }
        }
    }

    #[test]
    fn merge_is_order_independent() {
        let tc = trial(
            UsdPerformance::ideal(0.5).unwrap(),
            YieldPlan::uniform(4, 0.5).unwrap(),
            30_000,
            8,
        );
        let parts: Vec<Tally> = pulse_records(&tc)
            .collect::<Vec<_>>()
            .chunks(7_000)
            .map(|c| {
                c.iter().fold(Tally::default(), |mut t, p| {
                    t.record(p);
                    t
                })
            })
            .collect();
        let fwd = parts.iter().cloned().fold(Tally::default(), Tally::merge);
        let rev = parts.iter().rev().cloned().fold(Tally::default(), Tally::merge);
        assert_eq!(fwd, rev);
    }
}
