//! Spectrally negative Lévy processes drifting to -∞.

pub mod model;
pub mod simulate;

pub use model::{laplace_rho_xrho, JumpSpec, Jumps, LevyModel, LevySpec, TiltedModel};
pub use simulate::{
    bm_last_exit_construct, direct_p_maximum, simulate_q_to_level, two_step_maximum, BmLastExitRecord,
    DirectRecord, HitRecord, JumpSampler, TwoStepRecord,
};
