//! Experiment runners: drop test, collision, perturbation sweep and walking.

pub mod claims;
pub mod collision;
pub mod drop;
pub mod gait;
pub mod jam;
pub mod perturb;
pub mod record;
pub mod rig;
pub mod walk;

pub use claims::{checks_csv, Check};
pub use collision::{collision_configs, run_collision, CollisionSpec};
pub use drop::{run_drop_test, DropSpec};
pub use gait::{bezier_point, jamming_schedule, leg_fk, leg_ik, GaitCase, GaitSpec, JamWindows};
pub use jam::{contribution_analysis, contributions_csv, ForceTable, JamConfig, PerturbMode, PerturbationTable};
pub use perturb::{
    run_perturbation, run_perturbation_sweep, sweep_trials, PeakNoise, PerturbSpec, SweepRow, SweepTable, SweepTrial,
};
pub use record::{Channel, TrialRecord};
pub use rig::{height_for_clearance, leg_tendon_params, sole_clearance, sole_segment, RunSettings};
pub use walk::{
    filtered_grf, grf_peaks, grf_summary_csv, impulse_ratio, onset_spike, run_walking, swing_peak, WalkSpec,
};
