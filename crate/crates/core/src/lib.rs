//! Security analysis of decoy-state BB84 with a coherent source whose phase
//! is not randomised.
//!
//! Without phase randomisation an eavesdropper who knows the pulse phases can
//! tell signal from decoy pulses by unambiguous state discrimination (USD) and
//! combine that with a photon-number-splitting attack. The crate computes
//!
//! * the key rate `R^l` Alice and Bob believe they can extract with
//!   conventional one-decoy post-processing ([`channel`]),
//! * the cap `R^u` the USD+PNS attack places on the secure key rate
//!   ([`attack`]),
//! * the loss ranges where `R^l > R^u > …` and the key leaks ([`analysis`]),
//!
//! together with the coherent-state mathematics behind the discrimination
//! ([`source`], [`fock`]) and a Monte Carlo model of the attack ([`sim`]).

pub mod analysis;
pub mod attack;
pub mod channel;
pub mod fock;
pub mod poisson;
pub mod sim;
pub mod source;

pub use analysis::{AnalysisError, RegionLimit, Scenario, SuccessRegion, SweepGrid, SweepRow};
pub use attack::{
    attack_gains, key_rate_upper, optimize_yields, yields_from_plan, AttackError, AttackOutcome, AttackSettings,
    AttackSolution, UsdCeiling, UsdPerformance, YieldPlan, YieldProgram,
};
pub use channel::{
    believed_rate, binary_entropy, key_rate_lower, normal_gains, one_decoy_e1_upper, one_decoy_y1_lower,
    ChannelParams, DecoyEstimates, GainModel, GainStats,
};
pub use fock::{build_usd_povm, coherent_vector, CoherentVector, FockOperator, UsdPovm};
pub use poisson::poisson_pmf;
pub use source::{
    failure_probability, usd_success_linear_optics, usd_success_optimal, SourceConfig, SourceError,
};
