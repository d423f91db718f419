//! Brownian motion with drift observed on a finite horizon [0, T).

pub mod functions;
pub mod pair;
pub mod simulate;

use serde::{Deserialize, Serialize};

use crate::error::{config, Result};

pub use functions::{
    big_f, big_f_integral, dfdz, f_mu, g_mu, h_mu, probe_g_monotonicity, tau_g_min,
    GMonotonicityProbe,
};
pub use pair::{canonical_pair_last, canonical_pair_max, FinitePair};
pub use simulate::{simulate_p, simulate_q_last, simulate_q_max, PPath, QPath};

/// `{mu, T, level}`; `level` is the last-passage level x*.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteHorizonSpec {
    pub mu: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    #[serde(default)]
    pub level: Option<f64>,
}

impl FiniteHorizonSpec {
    pub fn new(mu: f64, t_end: f64, level: Option<f64>) -> Result<Self> {
        let s = FiniteHorizonSpec { mu, t_end, level };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() {
            return config(format!("mu must be finite, got {}", self.mu));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return config(format!("T must be positive, got {}", self.t_end));
        }
        if self.level.is_some_and(|x| !x.is_finite()) {
            return config("level must be finite");
        }
        Ok(())
    }

    pub fn level(&self) -> Result<f64> {
        match self.level {
            Some(x) => Ok(x),
            None => config("this operation needs a last-passage level"),
        }
    }
}

/// Step rule dt_n = min(dt, κ(T - t_n)), halting at T - ε_T.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularDriftPolicy {
    pub dt: f64,
    pub kappa: f64,
    pub eps_t: f64,
}

impl SingularDriftPolicy {
    /// κ = 0.1 and ε_T = 10⁻⁴·T.
    pub fn with_defaults(dt: f64, t_end: f64) -> Result<Self> {
        let p = SingularDriftPolicy { dt, kappa: 0.1, eps_t: 1e-4 * t_end };
        p.validate(t_end)?;
        Ok(p)
    }

    pub fn validate(&self, t_end: f64) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return config(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return config(format!("kappa must lie in (0, 1), got {}", self.kappa));
        }
        if !(self.eps_t > 0.0 && self.eps_t < t_end) {
            return config(format!("eps_T must lie in (0, T), got {}", self.eps_t));
        }
        Ok(())
    }

    /// Next step from time t, or `None` once t has reached T - ε_T.
    #[inline]
    pub fn step(&self, t: f64, t_end: f64) -> Option<f64> {
        let stop = t_end - self.eps_t;
        if t >= stop * (1.0 - 1e-15) {
            return None;
        }
        let h = self.dt.min(self.kappa * (t_end - t));
        Some(if t + h > stop { stop - t } else { h })
    }

    pub fn to_step_policy(&self, t_end: f64) -> crate::grid::StepPolicy {
        crate::grid::StepPolicy::SingularShrink {
            dt: self.dt,
            kappa: self.kappa,
            t_end,
        }
    }
}
