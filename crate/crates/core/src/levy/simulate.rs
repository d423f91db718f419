//! Path simulation: Gaussian part plus a Gaussian proxy for jumps smaller
//! than δ, and compound-Poisson jumps of size ≥ δ on an event clock.

use serde::{Deserialize, Serialize};

use super::model::{Jumps, LevyModel, TiltedModel};
use crate::config::MonteCarloConfig;
use crate::diffusion::{CrossingMonitor, LocalTimeEstimator};
use crate::error::{config, Result};
use crate::bridge::{bridge_argmax_time, bridge_hit_time, bridge_max};
use crate::path::{SamplePath, StopReason};
use crate::quad::{integrate, integrate_pieces};
use crate::rng::RngStream;

/// Default small-jump threshold.
pub const DEFAULT_DELTA: f64 = 1e-3;

/// Per-model constants of the jump-adapted scheme.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpSampler {
    /// α plus the compensator of the jumps in [δ, 1].
    pub drift: f64,
    /// √(σ² + ∫_0^δ y² ν(dy)).
    pub sigma: f64,
    pub rate_mid: f64,
    pub rate_big: f64,
    pub delta: f64,
    c: f64,
    lambda: f64,
    p: f64,
}

impl JumpSampler {
    pub fn new(model: &LevyModel, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return config(format!("small-jump threshold must lie in (0, 1), got {delta}"));
        }
        match model.jumps {
            Jumps::None => Ok(JumpSampler {
                drift: model.alpha,
                sigma: model.sigma2.sqrt(),
                rate_mid: 0.0,
                rate_big: 0.0,
                delta,
                c: 0.0,
                lambda: 0.0,
                p: 0.0,
            }),
            Jumps::Power { c, lambda, p } => {
                let dens = |k: f64| move |y: f64| y.powf(k - p - 1.0) * (-lambda * y).exp();
                let mut small_breaks: Vec<f64> = (0..=50).rev().map(|i| delta * 0.5f64.powi(i)).collect();
                small_breaks.insert(0, 0.0);
                let var_small = c * integrate_pieces(dens(2.0), &small_breaks, 1e-16, 1e-12)?.value;
                let comp = c * integrate(dens(1.0), delta, 1.0, 1e-14, 1e-12)?.value;
                let rate_mid = c * integrate(dens(0.0), delta, 1.0, 1e-14, 1e-12)?.value;
                let rate_big = c * integrate(dens(0.0), 1.0, f64::INFINITY, 1e-14, 1e-12)?.value;
                Ok(JumpSampler {
                    drift: model.alpha + comp,
                    sigma: (model.sigma2 + var_small).sqrt(),
                    rate_mid,
                    rate_big,
                    delta,
                    c,
                    lambda,
                    p,
                })
            }
            Jumps::Custom { .. } => config("custom jump families cannot be simulated"),
        }
    }

    #[inline]
    pub fn rate(&self) -> f64 {
        self.rate_mid + self.rate_big
    }

    /// Waiting time to the next jump (∞ without jumps).
    #[inline]
    fn next_wait(&self, rng: &mut RngStream) -> f64 {
        let r = self.rate();
        if r > 0.0 {
            rng.exp1() / r
        } else {
            f64::INFINITY
        }
    }

    /// Magnitude y > δ of the next jump (the process moves by -y).
    pub fn jump_size(&self, rng: &mut RngStream) -> f64 {
        let (d, p, l) = (self.delta, self.p, self.lambda);
        if rng.uniform() * self.rate() < self.rate_mid {
            loop {
                let u = rng.uniform();
                let y = if p == 0.0 {
                    d * (1.0 / d).powf(u)
                } else {
                    let a = d.powf(-p);
                    (a - u * (a - 1.0)).powf(-1.0 / p)
                };
                if rng.uniform() < (-l * (y - d)).exp() {
                    return y;
                }
            }
        }
        loop {
            if l > 0.0 {
                let y = 1.0 + rng.exp1() / l;
                if rng.uniform() < y.powf(-p - 1.0) {
                    return y;
                }
            } else {
                return rng.uniform_pos().powf(-1.0 / p);
            }
        }
    }
}

/// First passage at a level under Q.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HitRecord {
    pub level: f64,
    /// NaN when censored.
    pub rho: f64,
    pub censored: bool,
    pub path: Option<SamplePath>,
}

/// Runs the tilted model from 0 until it first reaches `level` (continuous
/// passage: there are no upward jumps), detecting crossings between nodes
/// with the Brownian-bridge probability exp(-2ab/(σ²h)).
pub fn simulate_q_to_level(
    tilted: &TiltedModel,
    level: f64,
    delta: f64,
    cfg: &MonteCarloConfig,
    keep_path: bool,
    rng: &mut RngStream,
) -> Result<HitRecord> {
    let js = JumpSampler::new(tilted.simulation_model()?, delta)?;
    hit_level(&js, level, cfg, keep_path, rng)
}

pub(crate) fn hit_level(
    js: &JumpSampler,
    level: f64,
    cfg: &MonteCarloConfig,
    keep_path: bool,
    rng: &mut RngStream,
) -> Result<HitRecord> {
    cfg.validate()?;
    if !(level >= 0.0) {
        return config(format!("target level must be >= 0, got {level}"));
    }
    let mut path = keep_path.then(|| SamplePath::start(0.0, 0.0, None));
    let mut rec = HitRecord { level, rho: f64::NAN, censored: false, path: None };
    if level == 0.0 {
        rec.rho = 0.0;
        if let Some(p) = path.as_mut() {
            p.stop(StopReason::HitLevel);
        }
        rec.path = path;
        return Ok(rec);
    }
    let s2 = js.sigma * js.sigma;
    let (mut t, mut x) = (0.0f64, 0.0f64);
    let mut next_jump = js.next_wait(rng);
    while t < cfg.horizon_cap {
        let jump_now = next_jump - t <= cfg.dt;
        let h = if jump_now { next_jump - t } else { cfg.dt };
        let y = x + js.drift * h + js.sigma * h.sqrt() * rng.normal();
        let hit = if y >= level {
            Some(t + bridge_hit_time(x, y, level, h, s2 * h, rng))
        } else if s2 > 0.0 {
            let p = (-2.0 * (level - x) * (level - y) / (s2 * h)).exp();
            (p > 1e-300 && rng.uniform() < p).then(|| t + bridge_hit_time(x, y, level, h, s2 * h, rng))
        } else {
            None
        };
        if let Some(r) = hit {
            rec.rho = r;
            if let Some(p) = path.as_mut() {
                p.push(r, level, None, 0.0);
                p.stop(StopReason::HitLevel);
            }
            rec.path = path;
            return Ok(rec);
        }
        t += h;
        x = y;
        if jump_now {
            x -= js.jump_size(rng);
            next_jump = t + js.next_wait(rng);
        }
        if let Some(p) = path.as_mut() {
            p.push(t, x, None, 0.0);
        }
    }
    rec.censored = true;
    if let Some(p) = path.as_mut() {
        p.stop(StopReason::Horizon);
    }
    rec.path = path;
    Ok(rec)
}

/// (X_ρ, ρ) from the two-step recipe; K_ρ = 1 - e^{-qX_ρ}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoStepRecord {
    pub x_rho: f64,
    pub rho: f64,
    pub k_rho: f64,
    pub censored: bool,
    pub path: Option<SamplePath>,
}

/// X_ρ = -(1/q) ln U, then the Q-path up to the first passage at X_ρ.
pub fn two_step_maximum(
    tilted: &TiltedModel,
    delta: f64,
    cfg: &MonteCarloConfig,
    keep_path: bool,
    rng: &mut RngStream,
) -> Result<TwoStepRecord> {
    let js = JumpSampler::new(tilted.simulation_model()?, delta)?;
    two_step_with(&js, tilted.q, cfg, keep_path, rng)
}

pub(crate) fn two_step_with(
    js: &JumpSampler,
    q: f64,
    cfg: &MonteCarloConfig,
    keep_path: bool,
    rng: &mut RngStream,
) -> Result<TwoStepRecord> {
    let u = 1.0 - rng.uniform();
    let x_rho = -u.ln() / q;
    let hit = hit_level(js, x_rho, cfg, keep_path, rng)?;
    Ok(TwoStepRecord {
        x_rho,
        rho: hit.rho,
        k_rho: 1.0 - u,
        censored: hit.censored,
        path: hit.path,
    })
}

/// Argmax of a P-path on [0, H].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectRecord {
    pub x_max: f64,
    pub argmax_t: f64,
    /// The post-H supremum was drawn above the running maximum
    /// (probability e^{-q(X^↑_H - X_H)}).
    pub discarded: bool,
}

/// Simulates under P to `horizon` with exact bridge maxima between events.
pub fn direct_p_maximum(
    model: &LevyModel,
    q: f64,
    horizon: f64,
    delta: f64,
    dt: f64,
    rng: &mut RngStream,
) -> Result<DirectRecord> {
    let js = JumpSampler::new(model, delta)?;
    if !(horizon > 0.0) || !(dt > 0.0) {
        return config("horizon and dt must be positive");
    }
    let s2 = js.sigma * js.sigma;
    let (mut t, mut x, mut m, mut arg) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut next_jump = js.next_wait(rng);
    while t < horizon * (1.0 - 1e-15) {
        let jump_now = next_jump - t <= dt && next_jump <= horizon;
        let h = if jump_now { next_jump - t } else { dt.min(horizon - t) };
        let y = x + js.drift * h + js.sigma * h.sqrt() * rng.normal();
        if s2 > 0.0 {
            let need = x.max(y) >= m || (-2.0 * (m - x) * (m - y) / (s2 * h)).exp() > 1e-300;
            if need {
                let bm = bridge_max(x, y, s2 * h, rng.uniform_pos());
                if bm > m {
                    m = bm;
                    arg = t + bridge_argmax_time(x, y, bm, h, s2 * h, rng);
                }
            }
        } else if y > m {
            m = y;
            arg = t + h;
        }
        t += h;
        x = y;
        if jump_now {
            x -= js.jump_size(rng);
            next_jump = t + js.next_wait(rng);
        }
    }
    let p_later = (-q * (m - x)).exp();
    let discarded = rng.uniform() < p_later;
    Ok(DirectRecord { x_max: m, argmax_t: arg, discarded })
}

/// (ρ, Λ_∞(x)) for the last exit of W_t - μt from x ≤ 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BmLastExitRecord {
    pub lambda: f64,
    pub rho: f64,
    pub censored: bool,
    pub retried: bool,
    pub flagged: bool,
    pub path: Option<SamplePath>,
}

/// Λ_∞(x) ~ Exp(μ), then dX = -μ sign(X - x) dt + dW (sign(0) = -1) until
/// the local time at x reaches Λ_∞(x).
pub fn bm_last_exit_construct(
    mu: f64,
    level: f64,
    estimator: LocalTimeEstimator,
    cfg: &MonteCarloConfig,
    keep_path: bool,
    rng: &mut RngStream,
) -> Result<BmLastExitRecord> {
    if !(mu > 0.0) || !mu.is_finite() {
        return config(format!("mu must be positive, got {mu}"));
    }
    if !(level <= 0.0) {
        return config(format!("last-exit level must be <= 0, got {level}"));
    }
    cfg.validate()?;
    let u = 1.0 - rng.uniform();
    let lambda = -u.ln() / mu;
    let (rec, mon) = bang_bang(mu, level, lambda, estimator, cfg, keep_path, rng);
    if !mon.violated() {
        return Ok(rec);
    }
    let wide = estimator.widened(1.0, cfg.dt);
    let (mut rec, mon) = bang_bang(mu, level, lambda, wide, cfg, keep_path, rng);
    rec.retried = true;
    rec.flagged = mon.violated();
    Ok(rec)
}

fn bang_bang(
    mu: f64,
    level: f64,
    lambda: f64,
    estimator: LocalTimeEstimator,
    cfg: &MonteCarloConfig,
    keep_path: bool,
    rng: &mut RngStream,
) -> (BmLastExitRecord, CrossingMonitor) {
    let h = cfg.dt;
    let sd = h.sqrt();
    let eps = estimator.band_width(1.0, h);
    let mut mon = CrossingMonitor::default();
    let mut path = keep_path.then(|| SamplePath::start(0.0, 0.0, Some(level)));
    let mut rec = BmLastExitRecord {
        lambda,
        rho: f64::NAN,
        censored: false,
        retried: false,
        flagged: false,
        path: None,
    };
    let n = (cfg.horizon_cap / h).ceil() as u64;
    let (mut x, mut acc) = (0.0f64, 0.0f64);
    for i in 0..n {
        let drift = if x > level { -mu } else { mu };
        let y = x + drift * h + sd * rng.normal();
        mon.observe(level, x, y, eps);
        let dl = estimator.increment(level, x, y, h, 1.0);
        acc += dl;
        if let Some(p) = path.as_mut() {
            p.push((i + 1) as f64 * h, y, None, dl);
        }
        if acc >= lambda {
            rec.rho = (i + 1) as f64 * h;
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
