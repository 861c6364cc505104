//! Monte Carlo realisation of the attack pipeline and ingestion of measured
//! USD stability series.

mod monte_carlo;
mod stability;

pub use monte_carlo::{
    pulse_records, run_trials, Bb84Phase, EmpiricalStats, Estimate, PulseRecord, SimError, StateKind, Tally,
    TrialConfig, UsdOutcome, BLOCK_SIZE,
};
pub use stability::{
    ingest_stability_series, read_stability_csv, ColumnSummary, IngestError, StabilityRow, StabilitySummary,
    STABILITY_HEADER,
};
