//! Fibre-jammed tendon: material laws, the reduced-order hysteretic model,
//! tensile cycling, calibration and polynomial surrogates.

pub mod calibrate;
pub mod cycles;
pub mod iwan;
pub mod jamming;
pub mod material;
pub mod surrogate;

pub use calibrate::{
    calibrate_leg_tendon, calibrate_tendon, Calibration, CalibrationTargets, StateTarget, TENSILE_TABLE,
};
pub use cycles::{damping_capacity, run_tension_cycles, Branch, DampingReport, HysteresisLoop, LoopSample};
pub use iwan::{SlipElement, TendonModel, TendonParams};
pub use jamming::{JammingState, JAMMED_KPA};
pub use material::{fibre_count, yeoh_uniaxial_stress, FibreBundleSpec, MaterialSegment};
pub use surrogate::{eval_surrogate, fit_poly_surrogate, LoopBranch, PolySurrogate, StateTag};
