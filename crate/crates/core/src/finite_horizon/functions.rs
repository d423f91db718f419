//! F, ∂F/∂z, f, h, G for Brownian motion with drift μ on a finite horizon.
//!
//! F(μ, τ, z) = e^{2μz} Φ̄((z+μτ)/√τ) + Φ̄((z-μτ)/√τ) = P[sup_{s ≤ τ} W^μ_s ≥ z]
//! for W^μ a Brownian motion with drift μ. Every evaluation factors out a
//! common scale so that neither e^{2μz} nor the Gaussian tails overflow.

use crate::error::{invalid, Result};
use crate::special::{norm_pdf, norm_sf, norm_sf_scaled};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// (scale, F/scale, (∂F/∂z)/scale) with scale = e^{-d²/2}, e^{2μz} or 1.
#[inline]
fn scaled_parts(mu: f64, tau: f64, z: f64) -> (f64, f64, f64) {
    let st = tau.sqrt();
    let d = (z - mu * tau) / st;
    let dp = (z + mu * tau) / st;
    if d >= 0.0 && dp >= 0.0 {
        // Both tails small: factor e^{-d²/2}; uses e^{2μz - d'²/2} = e^{-d²/2}.
        let f = norm_sf_scaled(d) + norm_sf_scaled(dp);
        let df = 2.0 * mu * norm_sf_scaled(dp) - 2.0 * INV_SQRT_2PI / st;
        ((-0.5 * d * d).exp(), f, df)
    } else if dp < 0.0 {
        // μ < 0 with z < |μ|τ: factor e^{2μz}; uses e^{-d²/2 - 2μz} = e^{-d'²/2}.
        let f = (-0.5 * dp * dp).exp() * norm_sf_scaled(d) + norm_sf(dp);
        let df = 2.0 * mu * norm_sf(dp) - 2.0 / st * norm_pdf(dp);
        ((2.0 * mu * z).exp(), f, df)
    } else {
        // μ > 0 with z < μτ: Φ̄(d) ≥ 1/2 dominates, no scaling needed.
        let t2 = (-0.5 * d * d).exp() * norm_sf_scaled(dp);
        let f = norm_sf(d) + t2;
        let df = 2.0 * mu * t2 - 2.0 / st * norm_pdf(d);
        (1.0, f, df)
    }
}

fn check(tau: f64, z: f64) -> Result<()> {
    if !(tau > 0.0) || !tau.is_finite() {
        return invalid(format!("tau must be positive and finite, got {tau}"));
    }
    if !(z >= 0.0) {
        return invalid(format!("z must be nonnegative, got {z}"));
    }
    Ok(())
}

#[inline]
pub(crate) fn big_f_unchecked(mu: f64, tau: f64, z: f64) -> f64 {
    let (s, f, _) = scaled_parts(mu, tau, z);
    (s * f).clamp(0.0, 1.0)
}

#[inline]
pub(crate) fn g_unchecked(mu: f64, tau: f64, z: f64) -> f64 {
    let (_, f, df) = scaled_parts(mu, tau, z);
    mu - df / f
}

#[inline]
pub(crate) fn f_unchecked(mu: f64, tau: f64) -> f64 {
    let st = tau.sqrt();
    let a = mu * st;
    let v = if a >= 0.0 {
        // e^{-a²/2} [2/√(2πτ) - 2μ E(a)]: avoids subtracting two tiny tails.
        (-0.5 * a * a).exp() * (2.0 * INV_SQRT_2PI / st - 2.0 * mu * norm_sf_scaled(a))
    } else {
        2.0 * norm_pdf(a) / st - 2.0 * mu * norm_sf(a)
    };
    v.max(0.0)
}

#[inline]
pub(crate) fn h_unchecked(mu: f64, tau: f64) -> f64 {
    0.5 * (f_unchecked(mu, tau) + f_unchecked(-mu, tau))
}

/// F(μ, τ, z) ∈ [0, 1].
pub fn big_f(mu: f64, tau: f64, z: f64) -> Result<f64> {
    check(tau, z)?;
    Ok(big_f_unchecked(mu, tau, z))
}

/// ∂F/∂z = 2μ e^{2μz} Φ̄((z+μτ)/√τ) - (2/√τ) φ((z-μτ)/√τ).
pub fn dfdz(mu: f64, tau: f64, z: f64) -> Result<f64> {
    check(tau, z)?;
    let (s, _, df) = scaled_parts(mu, tau, z);
    Ok(s * df)
}

/// f(μ, τ) = -∂F/∂z(μ, τ, 0).
pub fn f_mu(mu: f64, tau: f64) -> Result<f64> {
    check(tau, 0.0)?;
    Ok(f_unchecked(mu, tau))
}

/// h(μ, τ) = -½ (∂F_μ/∂z + ∂F_{-μ}/∂z)(τ, 0).
pub fn h_mu(mu: f64, tau: f64) -> Result<f64> {
    check(tau, 0.0)?;
    Ok(h_unchecked(mu, tau))
}

/// G(μ, τ, z) = μ - (∂F/∂z)/F.
pub fn g_mu(mu: f64, tau: f64, z: f64) -> Result<f64> {
    check(tau, z)?;
    Ok(g_unchecked(mu, tau, z))
}

/// F(μ, τ, z) as the integral of the first-passage density of W^μ to z.
pub fn big_f_integral(mu: f64, tau: f64, z: f64) -> Result<f64> {
    check(tau, z)?;
    if z == 0.0 {
        return Ok(1.0);
    }
    let pdf = |s: f64| {
        if s <= 0.0 {
            return 0.0;
        }
        z / (2.0 * std::f64::consts::PI * s * s * s).sqrt() * (-(z - mu * s).powi(2) / (2.0 * s)).exp()
    };
    // Split at the mode region so narrow peaks are not missed.
    let peak = (z * z / 3.0).min(tau);
    let mut breaks = vec![0.0];
    for c in [0.1 * peak, peak, 10.0 * peak] {
        if c > *breaks.last().unwrap() && c < tau {
            breaks.push(c);
        }
    }
    breaks.push(tau);
    Ok(crate::quad::integrate_pieces(pdf, &breaks, 1e-14, 1e-12)?.value)
}

/// min over z ∈ [w, w + 20] of τ·G(μ, τ, z), on a fine grid.
pub fn tau_g_min(mu: f64, tau: f64, w: f64) -> Result<f64> {
    check(tau, w)?;
    let n = 4000;
    Ok((0..=n)
        .map(|i| tau * g_unchecked(mu, tau, w + 20.0 * i as f64 / n as f64))
        .fold(f64::INFINITY, f64::min))
}

/// Counts of grid violations of "G decreasing in τ" and "G increasing in z".
#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GMonotonicityProbe {
    pub points: usize,
    pub tau_violations: usize,
    pub z_violations: usize,
    pub min_g: f64,
}

/// Probes the monotonicity of G on a (μ, τ, z) grid; nothing is asserted.
pub fn probe_g_monotonicity(mus: &[f64], taus: &[f64], zs: &[f64]) -> GMonotonicityProbe {
    let mut out = GMonotonicityProbe { min_g: f64::INFINITY, ..Default::default() };
    let tol = 1e-9;
    for &mu in mus {
        for (i, &tau) in taus.iter().enumerate() {
            for (j, &z) in zs.iter().enumerate() {
                let g = g_unchecked(mu, tau, z);
                out.points += 1;
                out.min_g = out.min_g.min(g);
                if i > 0 && g > g_unchecked(mu, taus[i - 1], z) * (1.0 + tol) + tol {
                    out.tau_violations += 1;
                }
                if j > 0 && g < g_unchecked(mu, tau, zs[j - 1]) * (1.0 - tol) - tol {
                    out.z_violations += 1;
                }
            }
        }
    }
    out
}
