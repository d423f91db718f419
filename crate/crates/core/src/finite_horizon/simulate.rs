//! Paths under P (Brownian motion with drift, exact bridge maxima) and under
//! the measures Q attached to the time of maximum and the last passage time.

use serde::{Deserialize, Serialize};

use super::functions::g_unchecked;
use super::{FiniteHorizonSpec, SingularDriftPolicy};
use crate::bridge::bridge_argmax_time;
use crate::diffusion::LocalTimeEstimator;
use crate::error::{config, Error, Result};
use crate::path::{SamplePath, StopReason};
use crate::rng::RngStream;

/// A P-path on [0, T] with the location of its overall maximum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PPath {
    pub path: SamplePath,
    /// Time of the overall maximum (inside the step where it was set).
    pub argmax_t: f64,
}

/// A Q-path and the smallest value of G used along it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QPath {
    pub path: SamplePath,
    pub min_drift: f64,
}

pub use crate::bridge::bridge_max;

/// W_t + μt on a uniform grid to T with exact running maxima; local time at
/// `level` accumulates through `estimator` when a level is given.
pub fn simulate_p(
    spec: &FiniteHorizonSpec,
    dt: f64,
    level: Option<f64>,
    estimator: LocalTimeEstimator,
    rng: &mut RngStream,
) -> Result<PPath> {
    spec.validate()?;
    if !(dt > 0.0) || !dt.is_finite() {
        return config(format!("dt must be positive, got {dt}"));
    }
    let n = (spec.t_end / dt).round().max(1.0) as usize;
    let h = spec.t_end / n as f64;
    let sd = h.sqrt();
    let mut path = SamplePath::with_capacity(0.0, 0.0, level, n + 1);
    let mut x = 0.0;
    let mut m = 0.0;
    let mut argmax_t = 0.0;
    for i in 0..n {
        let t0 = i as f64 * h;
        let y = x + spec.mu * h + sd * rng.normal();
        // P[bridge max > m] = exp(-2(m-x)(m-y)/h) when both ends are below m.
        let hi = x.max(y);
        let mut step_max = None;
        if hi >= m {
            let u = rng.uniform_pos();
            let bm = bridge_max(x, y, h, u);
            step_max = Some(bm);
        } else {
            let p = (-2.0 * (m - x) * (m - y) / h).exp();
            if p > 1e-300 {
                let u = rng.uniform_pos();
                if u < p {
                    step_max = Some(bridge_max(x, y, h, u));
                }
            }
        }
        if let Some(bm) = step_max {
            if bm > m {
                m = bm;
                argmax_t = t0 + bridge_argmax_time(x, y, bm, h, h, rng);
            }
        }
        let dl = match level {
            Some(lv) => estimator.increment(lv, x, y, h, 1.0),
            None => 0.0,
        };
        let t1 = if i + 1 == n { spec.t_end } else { (i + 1) as f64 * h };
        path.push(t1, y, Some(m), dl);
        x = y;
    }
    path.stop(StopReason::Horizon);
    Ok(PPath { path, argmax_t })
}

fn euler<D>(
    spec: &FiniteHorizonSpec,
    policy: &SingularDriftPolicy,
    level: Option<f64>,
    estimator: LocalTimeEstimator,
    rng: &mut RngStream,
    mut drift: D,
) -> Result<QPath>
where
    D: FnMut(f64, f64, f64) -> (f64, f64),
{
    spec.validate()?;
    policy.validate(spec.t_end)?;
    let cap = (spec.t_end / policy.dt) as usize + 64;
    let mut path = SamplePath::with_capacity(0.0, 0.0, level, cap);
    let (mut t, mut x, mut m) = (0.0f64, 0.0f64, 0.0f64);
    let mut min_drift = f64::INFINITY;
    while let Some(h) = policy.step(t, spec.t_end) {
        let tau = spec.t_end - t;
        let (g, gv) = drift(tau, x, m);
        if !g.is_finite() {
            return Err(Error::Internal(format!("drift overflow at t={t}, x={x}")));
        }
        min_drift = min_drift.min(gv);
        let y = x + g * h + h.sqrt() * rng.normal();
        let dl = match level {
            Some(lv) => estimator.increment(lv, x, y, h, 1.0),
            None => 0.0,
        };
        t += h;
        x = y;
        m = m.max(y);
        path.push(t, y, None, dl);
    }
    path.stop(StopReason::Horizon);
    Ok(QPath { path, min_drift })
}

/// dX = G(μ, T-t, X^↑ - X) dt + dW on [0, T - ε_T].
pub fn simulate_q_max(
    spec: &FiniteHorizonSpec,
    policy: &SingularDriftPolicy,
    rng: &mut RngStream,
) -> Result<QPath> {
    let mu = spec.mu;
    euler(spec, policy, None, LocalTimeEstimator::default(), rng, |tau, x, m| {
        let g = g_unchecked(mu, tau, (m - x).max(0.0));
        (g, g)
    })
}

/// Q-drift for the last passage at x*: +G(μ, τ, x* - x) below, -G(-μ, τ, x - x*) above.
#[inline]
pub fn q_last_drift(mu: f64, tau: f64, level: f64, x: f64) -> f64 {
    if x <= level {
        g_unchecked(mu, tau, level - x)
    } else {
        -g_unchecked(-mu, tau, x - level)
    }
}

/// Last-passage Q-dynamics on [0, T - ε_T] with local time at x*.
pub fn simulate_q_last(
    spec: &FiniteHorizonSpec,
    policy: &SingularDriftPolicy,
    estimator: LocalTimeEstimator,
    rng: &mut RngStream,
) -> Result<QPath> {
    let level = spec.level()?;
    let mu = spec.mu;
    euler(spec, policy, Some(level), estimator, rng, |tau, x, _| {
        let d = q_last_drift(mu, tau, level, x);
        (d, d.abs())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bridge_max_endpoints() {
        assert_eq!(bridge_max(0.0, 1.0, 1.0, 1.0), 1.0);
        assert!(bridge_max(0.0, 0.0, 1.0, 0.5) > 0.0);
    }

    #[test]
    fn p_path_has_exact_max_above_nodes() {
        let s = FiniteHorizonSpec::new(0.5, 1.0, None).unwrap();
        let mut rng = RngStream::new(3, 0);
        let p = simulate_p(&s, 1e-2, None, LocalTimeEstimator::default(), &mut rng).unwrap();
        p.path.validate().unwrap();
        let node_max = p.path.x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(*p.path.running_max.last().unwrap() >= node_max);
        assert!(p.argmax_t >= 0.0 && p.argmax_t <= 1.0);
        assert_eq!(p.path.last_t(), 1.0);
    }

    #[test]
    fn q_max_drift_nonnegative_and_stops_before_t() {
        let s = FiniteHorizonSpec::new(-0.5, 1.0, None).unwrap();
        let pol = SingularDriftPolicy::with_defaults(1e-3, 1.0).unwrap();
        for i in 0..20 {
            let mut rng = RngStream::new(9, i);
            let q = simulate_q_max(&s, &pol, &mut rng).unwrap();
            assert!(q.min_drift >= -1e-10);
            assert!((q.path.last_t() - (1.0 - 1e-4)).abs() < 1e-12);
        }
    }

    #[test]
    fn q_last_records_local_time() {
        let s = FiniteHorizonSpec::new(1.0, 1.0, Some(-0.2)).unwrap();
        let pol = SingularDriftPolicy::with_defaults(1e-3, 1.0).unwrap();
        let mut rng = RngStream::new(9, 1);
        let q = simulate_q_last(&s, &pol, LocalTimeEstimator::default(), &mut rng).unwrap();
        assert_eq!(q.path.level, Some(-0.2));
        assert!(*q.path.local_time.last().unwrap() > 0.0);
    }
}
