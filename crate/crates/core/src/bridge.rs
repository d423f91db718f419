//! Exact conditional laws of a Brownian bridge over one time step: its
//! maximum, the time it first hits a level, and the time of its maximum.

use crate::rng::RngStream;

/// Maximum of a Brownian bridge from a to b with variance `var` = σ²h,
/// driven by u ∈ (0, 1].
#[inline]
pub fn bridge_max(a: f64, b: f64, var: f64, u: f64) -> f64 {
    0.5 * (a + b + ((a - b) * (a - b) - 2.0 * var * u.ln()).sqrt())
}

/// P[max > level] for a bridge from a to b (both below `level`).
#[inline]
pub fn bridge_cross_prob(a: f64, b: f64, level: f64, var: f64) -> f64 {
    if a >= level || b >= level {
        return 1.0;
    }
    (-2.0 * (level - a) * (level - b) / var).exp()
}

/// Inverse Gaussian draw with mean m and shape λ (Michael, Schucany and
/// Haas); m = ∞ gives the Lévy law with scale λ.
pub fn inverse_gaussian(m: f64, lambda: f64, rng: &mut RngStream) -> f64 {
    let z = rng.normal();
    let y = z * z;
    if !m.is_finite() {
        return lambda / y;
    }
    let x = m + m * m * y / (2.0 * lambda) - m / (2.0 * lambda) * (4.0 * m * lambda * y + m * m * y * y).sqrt();
    if rng.uniform() * (m + x) <= m {
        x
    } else {
        m * m / x
    }
}

/// Fraction r ∈ (0, 1) of a step with r/(1-r) = W, W ~ IG(mean a/b, shape
/// a²/var); a or b may be zero.
fn ig_fraction(a: f64, b: f64, var: f64, rng: &mut RngStream) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    let m = if b > 0.0 { a / b } else { f64::INFINITY };
    let w = inverse_gaussian(m, a * a / var, rng);
    if w.is_infinite() {
        1.0
    } else {
        w / (1.0 + w)
    }
}

/// First hitting time of `level` by a bridge from a to b over [0, h] with
/// variance σ²h, given that the bridge reaches the level.
///
/// The law of the hitting fraction r has density proportional to
/// r^{-3/2}(1-r)^{-1/2} exp(-A/(2r) - B/(2(1-r))), A = (level-a)²/var and
/// B = (level-b)²/var, which makes r/(1-r) inverse Gaussian.
pub fn bridge_hit_time(a: f64, b: f64, level: f64, h: f64, var: f64, rng: &mut RngStream) -> f64 {
    h * ig_fraction(level - a, (b - level).abs(), var, rng)
}

/// Time of the maximum M of a bridge from a to b over [0, h]. Given M the
/// fraction r has density proportional to r^{-3/2}(1-r)^{-3/2}
/// exp(-A/(2r) - B/(2(1-r))), a two-component inverse Gaussian mixture.
pub fn bridge_argmax_time(a: f64, b: f64, max: f64, h: f64, var: f64, rng: &mut RngStream) -> f64 {
    let (da, db) = ((max - a).max(0.0), (max - b).max(0.0));
    if da + db <= 0.0 {
        return 0.5 * h;
    }
    if rng.uniform() * (da + db) < db {
        h * ig_fraction(da, db, var, rng)
    } else {
        h * (1.0 - ig_fraction(db, da, var, rng))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate;

    fn hit_density(r: f64, a: f64, b: f64) -> f64 {
        r.powf(-1.5) * (1.0 - r).powf(-0.5) * (-a / (2.0 * r) - b / (2.0 * (1.0 - r))).exp()
    }

    #[test]
    fn inverse_gaussian_moments() {
        let mut rng = RngStream::new(1, 0);
        let (m, l) = (0.7, 2.0);
        let n = 200_000;
        let v: Vec<f64> = (0..n).map(|_| inverse_gaussian(m, l, &mut rng)).collect();
        let mean = v.iter().sum::<f64>() / n as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((mean - m).abs() < 4.0 * (m * m * m / l / n as f64).sqrt());
        assert!((var - m * m * m / l).abs() < 0.03 * m * m * m / l);
    }

    #[test]
    fn hit_time_matches_density() {
        let (a, b, lv, h) = (0.0, 0.05, 0.03, 0.01);
        let (aa, bb) = ((lv - a) * (lv - a) / h, (b - lv) * (b - lv) / h);
        let norm = integrate(|r| hit_density(r, aa, bb), 0.0, 1.0, 1e-14, 1e-11).unwrap().value;
        let cdf_half = integrate(|r| hit_density(r, aa, bb), 0.0, 0.5, 1e-14, 1e-11).unwrap().value / norm;
        let mut rng = RngStream::new(2, 0);
        let n = 100_000;
        let below = (0..n).filter(|_| bridge_hit_time(a, b, lv, h, h, &mut rng) < 0.5 * h).count() as f64 / n as f64;
        assert!((below - cdf_half).abs() < 4.0 * (0.25 / n as f64).sqrt(), "{below} vs {cdf_half}");
    }

    #[test]
    fn argmax_time_is_symmetric_for_equal_ends() {
        let mut rng = RngStream::new(3, 0);
        let n = 100_000;
        let s: f64 = (0..n).map(|_| bridge_argmax_time(0.0, 0.0, 0.1, 1.0, 1.0, &mut rng)).sum();
        assert!((s / n as f64 - 0.5).abs() < 4.0 * (0.1 / n as f64).sqrt());
        assert_eq!(bridge_max(0.0, 1.0, 1.0, 1.0), 1.0);
    }
}
