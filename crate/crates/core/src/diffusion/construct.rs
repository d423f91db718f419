//! Two-step constructions under Q, direct P simulation, and Q-drifts.

use serde::{Deserialize, Serialize};

use super::local_time::{CrossingMonitor, LocalTimeEstimator};
use super::model::DiffusionModel;
use super::scale::ScaleFunction;
use crate::bridge::bridge_hit_time;
use crate::config::MonteCarloConfig;
use crate::error::{config, Result};
use crate::path::{SamplePath, StopReason};
use crate::rng::RngStream;

/// Which Q: the one attached to the time of the overall maximum, or to the
/// last exit from a level x*.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Tilt {
    Maximum,
    LastExit { level: f64 },
}

/// A diffusion with its scale function and the drift under Q.
#[derive(Clone, Debug)]
pub struct TiltedDiffusion {
    pub model: DiffusionModel,
    pub scale: ScaleFunction,
    pub tilt: Tilt,
}

impl TiltedDiffusion {
    pub fn new(model: DiffusionModel, tilt: Tilt) -> Result<Self> {
        let scale = ScaleFunction::build(&model)?;
        Self::with_scale(model, scale, tilt)
    }

    pub fn with_scale(model: DiffusionModel, scale: ScaleFunction, tilt: Tilt) -> Result<Self> {
        if let Tilt::LastExit { level } = tilt {
            if !(level > model.l && level <= model.x0) {
                return config(format!(
                    "last-exit level must lie in (l, x0] = ({}, {}], got {level}",
                    model.l, model.x0
                ));
            }
        }
        Ok(TiltedDiffusion { model, scale, tilt })
    }

    /// q(x) = s'(x)/s(x).
    #[inline]
    pub fn q(&self, x: f64) -> f64 {
        self.scale.q(x)
    }

    /// α_q(x) = α(x) + σ²(x) q(x).
    #[inline]
    pub fn alpha_q(&self, x: f64) -> f64 {
        self.model.alpha(x) + self.model.sigma(x).powi(2) * self.q(x)
    }

    /// Drift under Q: α_q for the maximum; α above x* and α_q at or below x*
    /// for the last exit.
    #[inline]
    pub fn q_drift(&self, x: f64) -> f64 {
        match self.tilt {
            Tilt::Maximum => self.alpha_q(x),
            Tilt::LastExit { level } if x > level => self.model.alpha(x),
            Tilt::LastExit { .. } => self.alpha_q(x),
        }
    }
}

/// Euler step y = x + b h + σ √h N, pulled back to the midpoint of the
/// remaining gap when it would leave (ℓ, r). Returns (y, truncated).
#[inline]
fn euler_step(model: &DiffusionModel, x: f64, drift: f64, h: f64, rng: &mut RngStream) -> (f64, bool) {
    let y = x + drift * h + model.sigma(x) * h.sqrt() * rng.normal();
    if y <= model.l {
        (0.5 * (x + model.l), true)
    } else if y >= model.r {
        (0.5 * (x + model.r), true)
    } else {
        (y, false)
    }
}

/// One realisation of (ρ, X_ρ) for the time of the overall maximum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxRecord {
    pub x_rho: f64,
    /// NaN when the horizon cap was reached first.
    pub rho: f64,
    pub censored: bool,
    pub boundary_steps: u32,
    pub path: Option<SamplePath>,
}

/// X_ρ = s^{-1}(1/U), then Euler under α_q until the first hit of X_ρ,
/// with Brownian-bridge crossing detection between nodes.
pub fn two_step_maximum(
    td: &TiltedDiffusion,
    cfg: &MonteCarloConfig,
    keep_path: bool,
    rng: &mut RngStream,
) -> Result<MaxRecord> {
    let u = 1.0 - rng.uniform();
    let x_rho = td.scale.inverse(1.0 / u)?;
    hit_level_under_q(td, x_rho, cfg, keep_path, rng)
}

/// Euler under α_q from x0 to the first passage at `target`.
pub fn hit_level_under_q(
    td: &TiltedDiffusion,
    target: f64,
    cfg: &MonteCarloConfig,
    keep_path: bool,
    rng: &mut RngStream,
) -> Result<MaxRecord> {
    cfg.validate()?;
    let m = &td.model;
    let h = cfg.dt;
    let mut path = keep_path.then(|| SamplePath::start(0.0, m.x0, None));
    let mut rec = MaxRecord {
        x_rho: target,
        rho: f64::NAN,
        censored: false,
        boundary_steps: 0,
        path: None,
    };
    if target <= m.x0 {
        rec.rho = 0.0;
        if let Some(p) = path.as_mut() {
            p.stop(StopReason::HitLevel);
        }
        rec.path = path;
        return Ok(rec);
    }
    let n_max = (cfg.horizon_cap / h).ceil() as u64;
    let mut x = m.x0;
    for i in 0..n_max {
        let t = i as f64 * h;
        let (y, trunc) = euler_step(m, x, td.alpha_q(x), h, rng);
        rec.boundary_steps += trunc as u32;
        let var = m.sigma(x).powi(2) * h;
        let hit = if y >= target {
            Some(t + bridge_hit_time(x, y, target, h, var, rng))
        } else {
            let p = (-2.0 * (target - x) * (target - y) / var).exp();
            (p > 1e-300 && rng.uniform() < p).then(|| t + bridge_hit_time(x, y, target, h, var, rng))
        };
        if let Some(p) = path.as_mut() {
            p.push(t + h, y.min(target), hit.map(|_| target), 0.0);
        }
        if let Some(r) = hit {
            rec.rho = r;
            if let Some(p) = path.as_mut() {
                p.stop(StopReason::HitLevel);
            }
            rec.path = path;
            return Ok(rec);
        }
        x = y;
    }
    rec.censored = true;
    if let Some(p) = path.as_mut() {
        p.stop(StopReason::Horizon);
    }
    rec.path = path;
    Ok(rec)
}

/// One realisation of (ρ, Λ_∞(x*)) for the last exit from x*.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LastExitRecord {
    pub lambda: f64,
    /// NaN when the horizon cap was reached first.
    pub rho: f64,
    pub censored: bool,
    /// The band had to be widened for this path.
    pub retried: bool,
    /// Band violations persisted after widening.
    pub flagged: bool,
    pub boundary_steps: u32,
    pub path: Option<SamplePath>,
}

/// λ = -(2/q(x*)) ln U, then Q-dynamics until the local time at x* reaches λ.
pub fn two_step_last_exit(
    td: &TiltedDiffusion,
    estimator: LocalTimeEstimator,
    cfg: &MonteCarloConfig,
    keep_path: bool,
    rng: &mut RngStream,
) -> Result<LastExitRecord> {
    let Tilt::LastExit { level } = td.tilt else {
        return config("two_step_last_exit needs a last-exit tilt");
    };
    let u = 1.0 - rng.uniform();
    let lambda = -(2.0 / td.q(level)) * u.ln();
    run_to_local_time(td, level, lambda, estimator, cfg, keep_path, rng)
}

/// Q-dynamics from x0 until the local time at `level` reaches `lambda`.
/// Paths whose crossings skip the band too often are rerun once with a
/// doubled band and flagged if that also fails.
pub fn run_to_local_time(
    td: &TiltedDiffusion,
    level: f64,
    lambda: f64,
    estimator: LocalTimeEstimator,
    cfg: &MonteCarloConfig,
    keep_path: bool,
    rng: &mut RngStream,
) -> Result<LastExitRecord> {
    cfg.validate()?;
    let sig = td.model.sigma(level);
    let first = local_time_pass(td, level, lambda, estimator, cfg, keep_path, rng);
    if !first.1.violated() {
        return Ok(first.0);
    }
    let wide = estimator.widened(sig, cfg.dt);
    let (mut rec, mon) = local_time_pass(td, level, lambda, wide, cfg, keep_path, rng);
    rec.retried = true;
    rec.flagged = mon.violated();
    Ok(rec)
}

fn local_time_pass(
    td: &TiltedDiffusion,
    level: f64,
    lambda: f64,
    estimator: LocalTimeEstimator,
    cfg: &MonteCarloConfig,
    keep_path: bool,
    rng: &mut RngStream,
) -> (LastExitRecord, CrossingMonitor) {
    let m = &td.model;
    let h = cfg.dt;
    let sig = m.sigma(level);
    let eps = estimator.band_width(sig, h);
    let mut mon = CrossingMonitor::default();
    let mut path = keep_path.then(|| SamplePath::start(0.0, m.x0, Some(level)));
    let mut rec = LastExitRecord {
        lambda,
        rho: f64::NAN,
        censored: false,
        retried: false,
        flagged: false,
        boundary_steps: 0,
        path: None,
    };
    if lambda <= 0.0 {
        rec.rho = 0.0;
        rec.path = path;
        return (rec, mon);
    }
    let n_max = (cfg.horizon_cap / h).ceil() as u64;
    let mut x = m.x0;
    let mut acc = 0.0;
    for i in 0..n_max {
        let t = i as f64 * h;
        let (y, trunc) = euler_step(m, x, td.q_drift(x), h, rng);
        rec.boundary_steps += trunc as u32;
        mon.observe(level, x, y, eps);
        let dl = estimator.increment(level, x, y, h, sig);
        acc += dl;
        if let Some(p) = path.as_mut() {
            p.push(t + h, y, None, dl);
        }
        if acc >= lambda {
            rec.rho = t + h;
            if let Some(p) = path.as_mut() {
                p.stop(StopReason::LocalTimeTarget);
            }
            rec.path = path;
            return (rec, mon);
        }
        x = y;
    }
    rec.censored = true;
    if let Some(p) = path.as_mut() {
        p.stop(StopReason::Horizon);
    }
    rec.path = path;
    (rec, mon)
}

/// Direct P simulation of the maximum up to horizon H.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectMaxRecord {
    pub x_max: f64,
    pub argmax_t: f64,
    /// A later maximum was drawn as possible (probability s(X_H)/s(m)).
    pub discarded: bool,
}

/// Euler under P to horizon `cfg.horizon_cap` (or absorption near ℓ) and
/// the argmax of the nodes. A path is discarded with probability
/// s(X_H)/s(X^↑_H), the chance that the future beats the running maximum.
pub fn direct_p_maximum(
    td: &TiltedDiffusion,
    cfg: &MonteCarloConfig,
    rng: &mut RngStream,
) -> Result<DirectMaxRecord> {
    cfg.validate()?;
    let m = &td.model;
    let h = cfg.dt;
    let n = (cfg.horizon_cap / h).ceil() as u64;
    let (mut x, mut best, mut arg) = (m.x0, m.x0, 0.0);
    let floor = if m.l.is_finite() { m.l + 1e-9 * (m.x0 - m.l) } else { f64::NEG_INFINITY };
    for i in 0..n {
        let (y, _) = euler_step(m, x, m.alpha(x), h, rng);
        x = y;
        if x > best {
            best = x;
            arg = (i + 1) as f64 * h;
        }
        if x <= floor {
            return Ok(DirectMaxRecord { x_max: best, argmax_t: arg, discarded: false });
        }
    }
    let p_later = td.scale.eval(x) / td.scale.eval(best);
    let discarded = rng.uniform() < p_later;
    Ok(DirectMaxRecord { x_max: best, argmax_t: arg, discarded })
}

/// Unboundedness of the last-exit Q scale function
/// S̃ = s above x*, 2s(x*) - s(x*)²/s below x* (C¹ at x*).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceReport {
    pub level: f64,
    /// S̃ at the probe point closest to ℓ.
    pub lower_value: f64,
    /// S̃ at the probe point closest to r.
    pub upper_value: f64,
    pub unbounded_below: bool,
    pub unbounded_above: bool,
}

impl RecurrenceReport {
    pub fn recurrent(&self) -> bool {
        self.unbounded_below && self.unbounded_above
    }
}

/// Evaluates the last-exit Q scale function near both endpoints.
pub fn recurrence_check(td: &TiltedDiffusion, level: f64) -> RecurrenceReport {
    let s = &td.scale;
    let sl = s.eval(level);
    let tilde = |y: f64| if y >= level { s.eval(y) } else { 2.0 * sl - sl * sl / s.eval(y) };
    let near_l = if td.model.l.is_finite() {
        td.model.l + 1e-12 * (level - td.model.l)
    } else {
        level - 1e3
    };
    let near_r = if td.model.r.is_finite() {
        td.model.r - 1e-12 * (td.model.r - level)
    } else {
        td.scale.inverse(1e16).unwrap_or(level + 1e3)
    };
    let lo = tilde(near_l);
    let hi = tilde(near_r);
    let big = 1e6 * sl.abs().max(1.0);
    RecurrenceReport {
        level,
        lower_value: lo,
        upper_value: hi,
        unbounded_below: lo < -big || lo == f64::NEG_INFINITY,
        unbounded_above: hi > big || hi == f64::INFINITY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(dt: f64, cap: f64) -> MonteCarloConfig {
        MonteCarloConfig::new(1, 1, dt).unwrap().with_horizon_cap(cap)
    }

    #[test]
    fn q_drift_closed_forms() {
        let a = 0.75;
        let td = TiltedDiffusion::new(DiffusionModel::bessel(a, 1.0).unwrap(), Tilt::Maximum).unwrap();
        for x in [0.2, 1.0, 3.0] {
            assert!((td.q_drift(x) - (1.0 + 2.0 * a) / (2.0 * x)).abs() < 1e-14);
        }
        let bm = TiltedDiffusion::new(DiffusionModel::bm(1.3, 0.0).unwrap(), Tilt::Maximum).unwrap();
        assert!((bm.q_drift(-4.0) - 1.3).abs() < 1e-14);
        let le = TiltedDiffusion::new(DiffusionModel::bm(1.3, 0.0).unwrap(), Tilt::LastExit { level: -0.5 })
            .unwrap();
        assert_eq!(le.q_drift(0.0), -1.3);
        assert!((le.q_drift(-1.0) - 1.3).abs() < 1e-14);
    }

    #[test]
    fn strict_local_martingale_q_drift() {
        let spec = r#"{"l": 0, "r": null, "x0": 1, "alpha": "0", "sigma": "max(1, x^2)"}"#;
        let m = DiffusionModel::from_json(spec).unwrap();
        let td = TiltedDiffusion::new(m, Tilt::Maximum).unwrap();
        assert!((td.q_drift(2.0) - 8.0).abs() < 1e-6);
        assert!((td.q_drift(0.5) - 2.0).abs() < 1e-6);
    }

    #[test]
    fn level_at_start_hits_immediately() {
        let td = TiltedDiffusion::new(DiffusionModel::bessel(0.5, 1.0).unwrap(), Tilt::Maximum).unwrap();
        let mut rng = RngStream::new(1, 0);
        let r = hit_level_under_q(&td, 1.0, &cfg(1e-3, 10.0), true, &mut rng).unwrap();
        assert_eq!(r.rho, 0.0);
        assert_eq!(td.scale.inverse(1.0).unwrap(), 1.0);
    }

    #[test]
    fn two_step_max_reaches_target() {
        let td = TiltedDiffusion::new(DiffusionModel::bm(1.0, 0.0).unwrap(), Tilt::Maximum).unwrap();
        for i in 0..50 {
            let mut rng = RngStream::new(2, i);
            let r = two_step_maximum(&td, &cfg(1e-3, 100.0), true, &mut rng).unwrap();
            assert!(r.x_rho > 0.0 && r.rho >= 0.0 && !r.censored);
            let p = r.path.unwrap();
            p.validate().unwrap();
            assert!(p.running_max.last().unwrap() <= &(r.x_rho + 1e-12));
        }
    }

    #[test]
    fn last_exit_stops_at_local_time_target() {
        let td = TiltedDiffusion::new(DiffusionModel::bm(1.0, 0.0).unwrap(), Tilt::LastExit { level: -0.5 })
            .unwrap();
        let mut rng = RngStream::new(4, 0);
        let r = two_step_last_exit(&td, LocalTimeEstimator::default(), &cfg(1e-3, 1e3), true, &mut rng)
            .unwrap();
        let p = r.path.unwrap();
        let lt = *p.local_time.last().unwrap();
        assert!(lt >= r.lambda);
        assert!(lt - r.lambda <= 3.0 * 1e-3f64.sqrt());
        assert_eq!(p.stopped_at.unwrap().reason, StopReason::LocalTimeTarget);
    }

    #[test]
    fn last_exit_scale_is_recurrent() {
        let bm = TiltedDiffusion::new(DiffusionModel::bm(1.0, 0.0).unwrap(), Tilt::LastExit { level: -0.5 })
            .unwrap();
        assert!(recurrence_check(&bm, -0.5).recurrent());
        let bes = TiltedDiffusion::new(DiffusionModel::bessel(0.5, 1.0).unwrap(), Tilt::LastExit { level: 0.5 })
            .unwrap();
        let rep = recurrence_check(&bes, 0.5);
        assert!(rep.recurrent(), "{rep:?}");
    }

    #[test]
    fn rejects_level_above_start() {
        let m = DiffusionModel::bm(1.0, 0.0).unwrap();
        assert!(TiltedDiffusion::new(m, Tilt::LastExit { level: 0.1 }).is_err());
    }
}
