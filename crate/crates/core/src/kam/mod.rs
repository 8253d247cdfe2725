//! Iterative reduction to block-diagonal normal form.

mod config;
mod homological;
mod iterate;
mod melnikov;
mod normal_form;
mod step;

pub use config::KamConfig;
pub use homological::{homological_residual, solve_homological};
pub use iterate::{convergence_slope, kam_iterate, Excision, KamHistory, KamOutcome, KamResult};
pub use melnikov::{
    in_diophantine_g0, in_melnikov_set, localization_constant, localized, melnikov_threshold,
    DiophantineScan, MelnikovParams, MelnikovScan, Resonance, ScanMode,
};
pub use normal_form::NormalForm;
pub use step::{kam_step, melnikov_params, unitarity_defect, StepOutput, StepRecord};
