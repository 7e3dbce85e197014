//! Correctness sweeps, scaling benchmarks, the deterministic lower-bound
//! adversary and size-estimator calibration.

pub mod adversary;
pub mod bench;
pub mod estimate;
pub mod ground_truth;
pub mod sweep;

pub use adversary::{adversary_demo, AdversaryOracle, AdversaryReport, Commitment, Strategy};
pub use bench::{bench_scaling, Family, ScalingReport};
pub use estimate::{estimate_size_report, EstimateReport};
pub use ground_truth::{all_groups_up_to, canonical_invariant_factors};
pub use sweep::{read_csv, run_sweep, write_csv, Outcome, TrialRecord};
