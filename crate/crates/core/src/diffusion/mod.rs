//! One-dimensional diffusions that drift to their lower boundary.

pub mod construct;
pub mod local_time;
pub mod model;
pub mod scale;

pub use construct::{
    direct_p_maximum, hit_level_under_q, recurrence_check, run_to_local_time, two_step_last_exit,
    two_step_maximum, DirectMaxRecord, LastExitRecord, MaxRecord, RecurrenceReport, Tilt,
    TiltedDiffusion,
};
pub use local_time::{local_time_band, local_time_tanaka, CrossingMonitor, LocalTimeEstimator};
pub use model::{Builtin, DiffusionModel, DiffusionSpec};
pub use scale::{ScaleFunction, ScaleReport};
