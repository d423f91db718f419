//! Canonical pairs of the time of maximum and the last passage time on [0, T).

use serde::{Deserialize, Serialize};

use super::functions::{big_f_unchecked, f_unchecked, h_unchecked};
use super::FiniteHorizonSpec;
use crate::error::{invalid, Result};
use crate::path::SamplePath;

/// Z, K, L along the nodes of a path (nodes with t ≥ T are dropped).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FinitePair {
    pub t: Vec<f64>,
    pub z: Vec<f64>,
    pub k: Vec<f64>,
    pub l: Vec<f64>,
}

impl FinitePair {
    /// Value of each process at the last node with t ≤ s.
    pub fn at(&self, s: f64) -> Option<(f64, f64, f64)> {
        let i = self.t.partition_point(|&v| v <= s);
        (i > 0).then(|| (self.z[i - 1], self.k[i - 1], self.l[i - 1]))
    }

    /// max |Z - L(1 - K)| over nodes with K < 1.
    pub fn identity_residual(&self) -> f64 {
        self.z
            .iter()
            .zip(&self.k)
            .zip(&self.l)
            .filter(|((_, k), _)| **k < 1.0)
            .map(|((z, k), l)| (z - l * (1.0 - k)).abs())
            .fold(0.0, f64::max)
    }
}

fn check_path(spec: &FiniteHorizonSpec, path: &SamplePath) -> Result<usize> {
    spec.validate()?;
    if path.is_empty() {
        return invalid("empty path");
    }
    let n = path.t.partition_point(|&t| t < spec.t_end);
    if n == 0 {
        return invalid("path starts at or after T");
    }
    Ok(n)
}

/// Time-of-maximum pair: Z = F(μ, T-t, m-x), A = Σ f(T-t_{i-1}) Δm_i,
/// K = 1 - e^{-A}, L = Z e^{A}.
pub fn canonical_pair_max(spec: &FiniteHorizonSpec, path: &SamplePath) -> Result<FinitePair> {
    let n = check_path(spec, path)?;
    let mut out = FinitePair::default();
    let mut acc = 0.0;
    for i in 0..n {
        if i > 0 {
            let dm = path.running_max[i] - path.running_max[i - 1];
            if dm > 0.0 {
                acc += f_unchecked(spec.mu, spec.t_end - path.t[i - 1]) * dm;
            }
        }
        let tau = spec.t_end - path.t[i];
        let z = big_f_unchecked(spec.mu, tau, (path.running_max[i] - path.x[i]).max(0.0));
        out.t.push(path.t[i]);
        out.z.push(z);
        out.k.push(-(-acc).exp_m1());
        out.l.push(z * acc.exp());
    }
    Ok(out)
}

/// Z at time-to-go τ and state x for the last passage at `level`.
#[inline]
pub fn z_last(mu: f64, tau: f64, level: f64, x: f64) -> f64 {
    if x <= level {
        big_f_unchecked(mu, tau, level - x)
    } else {
        big_f_unchecked(-mu, tau, x - level)
    }
}

/// Last-passage pair from the local time recorded in `path.local_time`:
/// K = 1 - F(sgn(x*)μ, T, |x*|)·exp(-Σ h(T - t_{i-1}) ΔΛ_i), L = Z/(1 - K).
pub fn canonical_pair_last(spec: &FiniteHorizonSpec, path: &SamplePath) -> Result<FinitePair> {
    let n = check_path(spec, path)?;
    let level = spec.level()?;
    if path.level.is_some_and(|l| l != level) {
        return invalid(format!(
            "path local time is recorded at {:?}, pair requested at {level}",
            path.level
        ));
    }
    let x0 = path.x[0];
    let (sign_mu, dist) = if level >= x0 { (spec.mu, level - x0) } else { (-spec.mu, x0 - level) };
    let tau0 = spec.t_end - path.t[0];
    let p_pos = big_f_unchecked(sign_mu, tau0, dist);
    let mut out = FinitePair::default();
    let mut acc = 0.0;
    for i in 0..n {
        if i > 0 {
            let dl = path.local_time[i] - path.local_time[i - 1];
            if dl > 0.0 {
                acc += h_unchecked(spec.mu, spec.t_end - path.t[i - 1]) * dl;
            }
        }
        let tau = spec.t_end - path.t[i];
        let z = z_last(spec.mu, tau, level, path.x[i]);
        let surv = p_pos * (-acc).exp();
        out.t.push(path.t[i]);
        out.z.push(z);
        out.k.push(1.0 - surv);
        out.l.push(if surv > 0.0 { z / surv } else { 0.0 });
    }
    Ok(out)
}
