use serde::{Deserialize, Serialize};

use crate::error::{config, invalid, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StepPolicy {
    Uniform { dt: f64 },
    /// `dt_n = min(dt, kappa (t_end - t_n))`; used for drifts that blow up
    /// like `1/(t_end - t)`.
    SingularShrink { dt: f64, kappa: f64, t_end: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    Fixed(f64),
    /// Run until a stopping condition; the caller enforces its own cap.
    UntilStopped,
}

/// A time discretization. Steps are produced lazily, one node at a time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub policy: StepPolicy,
    pub horizon: Horizon,
}

impl TimeGrid {
    pub fn uniform(t0: f64, dt: f64, horizon: Horizon) -> Result<Self> {
        Self::new(t0, StepPolicy::Uniform { dt }, horizon)
    }

    pub fn new(t0: f64, policy: StepPolicy, horizon: Horizon) -> Result<Self> {
        if !(t0 >= 0.0) || !t0.is_finite() {
            return config(format!("t0 must be finite and nonnegative, got {t0}"));
        }
        match policy {
            StepPolicy::Uniform { dt } => {
                if !(dt > 0.0) || !dt.is_finite() {
                    return config(format!("dt must be positive, got {dt}"));
                }
            }
            StepPolicy::SingularShrink { dt, kappa, t_end } => {
                if !(dt > 0.0) || !dt.is_finite() {
                    return config(format!("dt must be positive, got {dt}"));
                }
                if !(kappa > 0.0 && kappa < 1.0) {
                    return config(format!("kappa must lie in (0,1), got {kappa}"));
                }
                if !(t_end > t0) {
                    return config(format!("t_end {t_end} must exceed t0 {t0}"));
                }
                if let Horizon::Fixed(h) = horizon {
                    if h > t_end {
                        return config("horizon lies beyond the singular time t_end");
                    }
                } else {
                    return config("a singular-shrink grid needs a fixed horizon below t_end");
                }
            }
        }
        if let Horizon::Fixed(h) = horizon {
            if !(h > t0) || !h.is_finite() {
                return config(format!("horizon {h} must exceed t0 {t0}"));
            }
        }
        Ok(TimeGrid { t0, policy, horizon })
    }

    pub fn base_dt(&self) -> f64 {
        match self.policy {
            StepPolicy::Uniform { dt } | StepPolicy::SingularShrink { dt, .. } => dt,
        }
    }

    /// Step length from node time `t`, or `None` once the horizon is reached.
    /// Never steps past a fixed horizon.
    #[inline]
    pub fn step_from(&self, t: f64) -> Option<f64> {
        let mut dt = match self.policy {
            StepPolicy::Uniform { dt } => dt,
            StepPolicy::SingularShrink { dt, kappa, t_end } => dt.min(kappa * (t_end - t)),
        };
        if let Horizon::Fixed(h) = self.horizon {
            let rest = h - t;
            // Absorb float dust so the final node lands on the horizon.
            if rest <= 1e-12 * h.max(1.0) {
                return None;
            }
            if dt >= rest || rest - dt <= 1e-9 * dt {
                dt = rest;
            }
        }
        if dt > 0.0 {
            Some(dt)
        } else {
            None
        }
    }

    /// All node times; only available for a fixed horizon.
    pub fn nodes(&self) -> Result<Vec<f64>> {
        if let Horizon::UntilStopped = self.horizon {
            return invalid("cannot materialize an open-ended grid");
        }
        let mut t = self.t0;
        let mut out = vec![t];
        let mut i = 0usize;
        while let Some(dt) = self.step_from(t) {
            i += 1;
            t = match self.policy {
                // Index-based nodes avoid accumulated rounding on long grids.
                StepPolicy::Uniform { dt: d } if dt == d => self.t0 + i as f64 * d,
                _ => t + dt,
            };
            out.push(t);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid_ends_on_horizon() {
        let g = TimeGrid::uniform(0.0, 0.3, Horizon::Fixed(1.0)).unwrap();
        let n = g.nodes().unwrap();
        assert_eq!(n.len(), 5);
        assert!((n[4] - 1.0).abs() < 1e-15);
        assert!(n.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn singular_grid_shrinks_and_stays_below_horizon() {
        let g = TimeGrid::new(
            0.0,
            StepPolicy::SingularShrink { dt: 0.01, kappa: 0.1, t_end: 1.0 },
            Horizon::Fixed(1.0 - 1e-4),
        )
        .unwrap();
        let n = g.nodes().unwrap();
        let last = *n.last().unwrap();
        assert!((last - (1.0 - 1e-4)).abs() < 1e-12);
        assert!(n.windows(2).all(|w| w[1] > w[0]));
        let d_end = n[n.len() - 1] - n[n.len() - 2];
        assert!(d_end < 1e-3);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(TimeGrid::uniform(0.0, 0.0, Horizon::UntilStopped).is_err());
        assert!(TimeGrid::uniform(0.0, -1.0, Horizon::UntilStopped).is_err());
        assert!(TimeGrid::uniform(1.0, 0.1, Horizon::Fixed(0.5)).is_err());
        assert!(TimeGrid::uniform(0.0, 0.1, Horizon::UntilStopped).unwrap().nodes().is_err());
    }
}
