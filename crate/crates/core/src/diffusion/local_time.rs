//! Local time at a level from a discretely observed path.
//!
//! Values are in the semimartingale normalisation, Λ = σ²·Λ̃ with Λ̃ the
//! occupation density in Lebesgue time.

use serde::{Deserialize, Serialize};

/// Per-step local-time increments at a fixed level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum LocalTimeEstimator {
    /// σ²(x*)·dt/(2ε)·1{|X_prev - x*| ≤ ε}; `eps = None` means 3σ(x*)√dt.
    Band { eps: Option<f64> },
    /// Discrete Tanaka increment |b - x*| - |a - x*| - sgn(a - x*)(b - a).
    Tanaka,
}

impl Default for LocalTimeEstimator {
    fn default() -> Self {
        LocalTimeEstimator::Band { eps: None }
    }
}

impl LocalTimeEstimator {
    /// Band half-width used at step size `dt`, or `None` for Tanaka.
    pub fn band_width(&self, sigma_level: f64, dt: f64) -> Option<f64> {
        match *self {
            LocalTimeEstimator::Band { eps: Some(e) } => Some(e),
            LocalTimeEstimator::Band { eps: None } => Some(3.0 * sigma_level * dt.sqrt()),
            LocalTimeEstimator::Tanaka => None,
        }
    }

    /// Same estimator with the band doubled at step size `dt`.
    pub fn widened(&self, sigma_level: f64, dt: f64) -> Self {
        match self.band_width(sigma_level, dt) {
            Some(e) => LocalTimeEstimator::Band { eps: Some(2.0 * e) },
            None => *self,
        }
    }

    /// Increment for the step a → b of length `dt`.
    #[inline]
    pub fn increment(&self, level: f64, a: f64, b: f64, dt: f64, sigma_level: f64) -> f64 {
        match self.band_width(sigma_level, dt) {
            Some(eps) => local_time_band(level, a, dt, sigma_level, eps),
            None => local_time_tanaka(level, a, b),
        }
    }
}

/// σ²·dt/(2ε)·1{|a - level| ≤ ε}.
#[inline]
pub fn local_time_band(level: f64, a: f64, dt: f64, sigma_level: f64, eps: f64) -> f64 {
    if (a - level).abs() <= eps {
        sigma_level * sigma_level * dt / (2.0 * eps)
    } else {
        0.0
    }
}

/// |b - x| - |a - x| - sgn(a - x)(b - a), with sgn(0) = 0; always ≥ 0.
#[inline]
pub fn local_time_tanaka(level: f64, a: f64, b: f64) -> f64 {
    let da = a - level;
    let db = b - level;
    let sgn = if da > 0.0 {
        1.0
    } else if da < 0.0 {
        -1.0
    } else {
        0.0
    };
    (db.abs() - da.abs() - sgn * (db - da)).max(0.0)
}

/// Counts level crossings and those that jump clean over the band.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CrossingMonitor {
    pub crossings: u64,
    pub band_jumps: u64,
}

impl CrossingMonitor {
    #[inline]
    pub fn observe(&mut self, level: f64, a: f64, b: f64, eps: Option<f64>) {
        let (da, db) = (a - level, b - level);
        if da * db < 0.0 {
            self.crossings += 1;
            if let Some(e) = eps {
                if da.abs() > e && db.abs() > e {
                    self.band_jumps += 1;
                }
            }
        }
    }

    /// More than 5% of the crossings skipped the band entirely.
    pub fn violated(&self) -> bool {
        self.crossings >= 20 && self.band_jumps * 20 > self.crossings
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn band_outside_is_zero() {
        let est = LocalTimeEstimator::Band { eps: Some(0.1) };
        assert_eq!(est.increment(0.0, 0.5, 0.6, 1e-3, 1.0), 0.0);
        assert!((est.increment(0.0, 0.05, 0.6, 1e-3, 1.0) - 1e-3 / 0.2).abs() < 1e-15);
    }

    #[test]
    fn tanaka_nonnegative_and_zero_without_crossing() {
        assert_eq!(local_time_tanaka(0.0, 0.3, 0.5), 0.0);
        assert_eq!(local_time_tanaka(0.0, -0.3, -0.1), 0.0);
        assert!((local_time_tanaka(0.0, 0.1, -0.2) - 0.4).abs() < 1e-15);
        assert!((local_time_tanaka(0.0, 0.0, -0.2) - 0.2).abs() < 1e-15);
    }

    fn reflected_mean(est: LocalTimeEstimator, dt: f64, n: usize) -> (f64, f64) {
        let steps = (1.0 / dt).round() as usize;
        let sd = dt.sqrt();
        let mut s = 0.0;
        let mut s2 = 0.0;
        for i in 0..n {
            let mut rng = RngStream::new(11, i as u64);
            let mut x = 0.0f64;
            let mut l = 0.0;
            for _ in 0..steps {
                let y = x + sd * rng.normal();
                l += est.increment(0.0, x, y, dt, 1.0);
                x = y;
            }
            s += l;
            s2 += l * l;
        }
        let m = s / n as f64;
        (m, ((s2 / n as f64 - m * m) / n as f64).sqrt())
    }

    #[test]
    fn brownian_local_time_mean_at_zero() {
        // E[Λ_1(0)] = E|W_1| = √(2/π).
        let target = (2.0 / std::f64::consts::PI).sqrt();
        for est in [LocalTimeEstimator::default(), LocalTimeEstimator::Tanaka] {
            let (m, se) = reflected_mean(est, 1e-4, 2000);
            assert!((m - target).abs() < 3.0 * se + 0.01, "{est:?}: {m} vs {target} (se {se})");
        }
    }

    #[test]
    fn band_refinement_is_stable() {
        // Each Brownian path is observed at dt and 2dt; totals over 200 paths.
        let n = 1 << 14;
        let dt = 1.0 / n as f64;
        let est = LocalTimeEstimator::default();
        let (mut coarse, mut finer) = (0.0, 0.0);
        for p in 0..200 {
            let mut rng = RngStream::new(5, p);
            let mut fine = vec![0.0f64];
            for _ in 0..n {
                let x = *fine.last().unwrap() + dt.sqrt() * rng.normal();
                fine.push(x);
            }
            for (stride, acc) in [(1usize, &mut finer), (2, &mut coarse)] {
                let h = dt * stride as f64;
                let pts: Vec<f64> = fine.iter().step_by(stride).copied().collect();
                *acc += pts.windows(2).map(|w| est.increment(0.0, w[0], w[1], h, 1.0)).sum::<f64>();
            }
        }
        assert!(finer > 0.0);
        assert!(((coarse - finer) / finer).abs() < 0.05, "{coarse} vs {finer}");
    }

    #[test]
    fn monitor_flags_band_jumps() {
        let mut m = CrossingMonitor::default();
        for _ in 0..30 {
            m.observe(0.0, 1.0, -1.0, Some(0.1));
        }
        assert!(m.violated());
        let mut ok = CrossingMonitor::default();
        for _ in 0..30 {
            ok.observe(0.0, 0.05, -0.05, Some(0.1));
        }
        assert!(!ok.violated());
    }
}
