//! Closed-form laws used as ground truth by the validation suites.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::quad::{integrate, integrate_pieces};
use crate::special::{bessel_j, bessel_j_zeros, norm_cdf, norm_sf, norm_sf_scaled};

type Pdf1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type Pdf2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Default number of series terms for the Bessel supremum law.
pub const BESSEL_TERMS: usize = 50;
/// Hard cap on the adaptive number of series terms.
pub const BESSEL_MAX_TERMS: usize = 500;

/// Coordinate ranges of the support (open intervals; infinite ends allowed).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Support {
    pub ranges: Vec<(f64, f64)>,
    pub description: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub terms: usize,
    pub max_terms: usize,
    /// Largest |last term| of the series on a probe grid.
    pub tail_bound: f64,
}

#[derive(Clone)]
pub enum Density {
    Univariate(Pdf1),
    /// pdf(t, x).
    Bivariate(Pdf2),
}

#[derive(Clone)]
pub struct DensityOracle {
    pub name: String,
    density: Density,
    cdf: Option<Pdf1>,
    pub support: Support,
    pub truncation: Option<Truncation>,
    /// Numerical total mass found at registration.
    pub mass: f64,
}

impl fmt::Debug for DensityOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensityOracle")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("support", &self.support)
            .field("truncation", &self.truncation)
            .field("mass", &self.mass)
            .finish()
    }
}

impl DensityOracle {
    fn register(
        name: impl Into<String>,
        density: Density,
        cdf: Option<Pdf1>,
        support: Support,
        truncation: Option<Truncation>,
        mass_fn: Option<&dyn Fn() -> Result<f64>>,
    ) -> Result<Self> {
        let mut o = DensityOracle { name: name.into(), density, cdf, support, truncation, mass: f64::NAN };
        o.mass = match mass_fn {
            Some(f) => f()?,
            None => o.default_mass()?,
        };
        let tol = if o.dim() == 1 { 0.01 } else { 0.005 };
        if !((o.mass - 1.0).abs() <= tol) {
            return Err(Error::Numerical(format!(
                "oracle {} integrates to {} (tolerance {tol})",
                o.name, o.mass
            )));
        }
        Ok(o)
    }

    pub fn dim(&self) -> usize {
        match self.density {
            Density::Univariate(_) => 1,
            Density::Bivariate(_) => 2,
        }
    }

    /// 1-D density; NaN for a bivariate oracle.
    pub fn pdf(&self, x: f64) -> f64 {
        match &self.density {
            Density::Univariate(f) => f(x),
            Density::Bivariate(_) => f64::NAN,
        }
    }

    /// 2-D density; NaN for a univariate oracle or where a series fails.
    pub fn pdf2(&self, t: f64, x: f64) -> f64 {
        match &self.density {
            Density::Bivariate(f) => f(t, x),
            Density::Univariate(_) => f64::NAN,
        }
    }

    /// Like `pdf2` but reports series failure as an error.
    pub fn try_pdf2(&self, t: f64, x: f64) -> Result<f64> {
        let v = self.pdf2(t, x);
        if v.is_nan() {
            return Err(Error::Numerical(format!("{}: density unavailable at ({t}, {x})", self.name)));
        }
        Ok(v)
    }

    pub fn has_cdf(&self) -> bool {
        self.cdf.is_some()
    }

    /// Closed-form CDF when available, else quadrature of the pdf.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        if self.dim() != 1 {
            return config(format!("{} is bivariate and has no CDF", self.name));
        }
        if let Some(c) = &self.cdf {
            return Ok(c(x));
        }
        let (lo, hi) = self.support.ranges[0];
        if x <= lo {
            return Ok(0.0);
        }
        let x = x.min(hi);
        let f = |y: f64| self.pdf(y);
        Ok(integrate(f, lo, x, 1e-11, 1e-10)?.value.clamp(0.0, 1.0))
    }

    fn default_mass(&self) -> Result<f64> {
        match &self.density {
            Density::Univariate(f) => {
                let (lo, hi) = self.support.ranges[0];
                Ok(integrate(|x| f(x), lo, hi, 1e-9, 1e-10)?.value)
            }
            Density::Bivariate(f) => {
                let (t0, t1) = self.support.ranges[0];
                let (x0, x1) = self.support.ranges[1];
                let mut err = None;
                let outer = integrate(
                    |t| match integrate(|x| f(t, x), x0, x1, 1e-11, 1e-9) {
                        Ok(r) => r.value,
                        Err(e) => {
                            err.get_or_insert(e);
                            0.0
                        }
                    },
                    t0,
                    t1,
                    1e-9,
                    1e-8,
                )?;
                if let Some(e) = err {
                    return Err(e);
                }
                Ok(outer.value)
            }
        }
    }

    /// ∫∫ pdf over a rectangle by adaptive quadrature in both variables.
    pub fn rect_mass(&self, (t0, t1): (f64, f64), (x0, x1): (f64, f64)) -> Result<f64> {
        let Density::Bivariate(f) = &self.density else {
            return config(format!("{} is univariate", self.name));
        };
        let mut err = None;
        let r = integrate(
            |t| match integrate(|x| f(t, x), x0, x1, 1e-13, 1e-9) {
                Ok(r) if r.value.is_finite() => r.value,
                Ok(_) => {
                    err.get_or_insert(Error::Numerical(format!("{}: non-finite density", self.name)));
                    0.0
                }
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            },
            t0,
            t1,
            1e-13,
            1e-8,
        )?;
        match err {
            Some(e) => Err(e),
            None => Ok(r.value),
        }
    }

    /// ∫ pdf over an interval.
    pub fn interval_mass(&self, a: f64, b: f64) -> Result<f64> {
        if self.dim() != 1 {
            return config(format!("{} is bivariate", self.name));
        }
        if self.cdf.is_some() {
            return Ok(self.cdf(b)? - self.cdf(a)?);
        }
        Ok(integrate(|x| self.pdf(x), a, b, 1e-13, 1e-10)?.value)
    }
}

fn pos(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return config(format!("{name} must be positive, got {v}"));
    }
    Ok(())
}

fn half_line(lo: f64, what: &str) -> Support {
    Support { ranges: vec![(lo, f64::INFINITY)], description: what.into() }
}

/// Exp(q): the law of the overall supremum after the exponential tilt.
pub fn exp_sup_law(q: f64) -> Result<DensityOracle> {
    pos("q", q)?;
    DensityOracle::register(
        format!("exp_sup(q={q})"),
        Density::Univariate(Arc::new(move |x| if x >= 0.0 { q * (-q * x).exp() } else { 0.0 })),
        Some(Arc::new(move |x| if x > 0.0 { -(-q * x).exp_m1() } else { 0.0 })),
        half_line(0.0, "x > 0"),
        None,
        None,
    )
}

/// Uniform on (0, 1).
pub fn uniform01() -> Result<DensityOracle> {
    DensityOracle::register(
        "uniform(0,1)",
        Density::Univariate(Arc::new(|x| if (0.0..=1.0).contains(&x) { 1.0 } else { 0.0 })),
        Some(Arc::new(|x| x.clamp(0.0, 1.0))),
        Support { ranges: vec![(0.0, 1.0)], description: "0 < u < 1".into() },
        None,
        None,
    )
}

/// Pareto law of the supremum of a diffusion with scale s(x) = (x/x0)^{2a}:
/// P[X^↑ > x] = (x0/x)^{2a}.
pub fn pareto_sup(a: f64, x0: f64) -> Result<DensityOracle> {
    pos("a", a)?;
    pos("x0", x0)?;
    let k = 2.0 * a;
    DensityOracle::register(
        format!("pareto_sup(a={a},x0={x0})"),
        Density::Univariate(Arc::new(move |x| {
            if x > x0 {
                k / x0 * (x0 / x).powf(k + 1.0)
            } else {
                0.0
            }
        })),
        Some(Arc::new(move |x| if x > x0 { 1.0 - (x0 / x).powf(k) } else { 0.0 })),
        half_line(x0, "x > x0"),
        None,
        None,
    )
}

/// Joint density of (ρ, X_ρ) for the overall maximum of W_t - μt.
pub fn bm_max_joint(mu: f64) -> Result<DensityOracle> {
    pos("mu", mu)?;
    DensityOracle::register(
        format!("bm_max_joint(mu={mu})"),
        Density::Bivariate(Arc::new(move |t, x| bm_max_joint_pdf(mu, t, x))),
        None,
        Support {
            ranges: vec![(0.0, f64::INFINITY), (0.0, f64::INFINITY)],
            description: "t > 0, x > 0".into(),
        },
        None,
        None,
    )
}

fn bm_max_joint_pdf(mu: f64, t: f64, x: f64) -> f64 {
    if !(t > 0.0 && x > 0.0) {
        return 0.0;
    }
    (2.0 / (PI * t * t * t)).sqrt() * mu * x * (-(x + mu * t).powi(2) / (2.0 * t)).exp()
}

/// Law of the time of the overall maximum of W_t - μt.
pub fn bm_max_rho(mu: f64) -> Result<DensityOracle> {
    pos("mu", mu)?;
    DensityOracle::register(
        format!("bm_max_rho(mu={mu})"),
        Density::Univariate(Arc::new(move |t| bm_max_rho_pdf(mu, t))),
        None,
        half_line(0.0, "t > 0"),
        None,
        None,
    )
}

fn bm_max_rho_pdf(mu: f64, t: f64) -> f64 {
    if !(t > 0.0) {
        return 0.0;
    }
    // 2μ(φ(μ√t)/√t - μΦ̄(μ√t)), written with the Mills ratio.
    let r = mu * t.sqrt();
    let v = 1.0 / (2.0 * PI * t).sqrt() - mu * norm_sf_scaled(r);
    (2.0 * mu * (-0.5 * r * r).exp() * v).max(0.0)
}

/// Inverse Gaussian law of the first passage of W_t + μt at x > 0.
pub fn ig_hitting(mu: f64, x: f64) -> Result<DensityOracle> {
    pos("mu", mu)?;
    pos("x", x)?;
    DensityOracle::register(
        format!("ig_hitting(mu={mu},x={x})"),
        Density::Univariate(Arc::new(move |t| {
            if t > 0.0 {
                x / (2.0 * PI * t * t * t).sqrt() * (-(x - mu * t).powi(2) / (2.0 * t)).exp()
            } else {
                0.0
            }
        })),
        Some(Arc::new(move |t| {
            if t > 0.0 {
                let s = t.sqrt();
                norm_cdf((mu * t - x) / s) + (2.0 * mu * x).exp() * norm_sf((mu * t + x) / s)
            } else {
                0.0
            }
        })),
        half_line(0.0, "t > 0"),
        None,
        None,
    )
}

/// Mode of the inverse Gaussian law with mean x/μ and shape x².
pub fn ig_mode(mu: f64, x: f64) -> f64 {
    let m = x / mu;
    let l = x * x;
    m * ((1.0 + 9.0 * m * m / (4.0 * l * l)).sqrt() - 1.5 * m / l)
}

/// Joint density of (ρ, Λ_ρ(x)) for the last exit of W_t - μt from x ≤ 0.
pub fn bm_lastexit_joint(mu: f64, x: f64) -> Result<DensityOracle> {
    pos("mu", mu)?;
    if !(x <= 0.0) {
        return config(format!("last-exit level must be <= 0, got {x}"));
    }
    DensityOracle::register(
        format!("bm_lastexit_joint(mu={mu},x={x})"),
        Density::Bivariate(Arc::new(move |t, l| bm_lastexit_joint_pdf(mu, x, t, l))),
        None,
        Support {
            ranges: vec![(0.0, f64::INFINITY), (0.0, f64::INFINITY)],
            description: "t > 0, local time > 0".into(),
        },
        None,
        None,
    )
}

fn bm_lastexit_joint_pdf(mu: f64, x: f64, t: f64, l: f64) -> f64 {
    if !(t > 0.0 && l > 0.0) {
        return 0.0;
    }
    let d = l - x;
    mu * d / (2.0 * PI * t * t * t).sqrt() * (-mu * x - 0.5 * mu * mu * t - d * d / (2.0 * t)).exp()
}

/// Law of the last exit time of W_t - μt from x ≤ 0.
pub fn bm_lastexit_rho(mu: f64, x: f64) -> Result<DensityOracle> {
    pos("mu", mu)?;
    if !(x <= 0.0) {
        return config(format!("last-exit level must be <= 0, got {x}"));
    }
    DensityOracle::register(
        format!("bm_lastexit_rho(mu={mu},x={x})"),
        Density::Univariate(Arc::new(move |t| {
            if t > 0.0 {
                mu / (2.0 * PI * t).sqrt() * (-(mu * t + x).powi(2) / (2.0 * t)).exp()
            } else {
                0.0
            }
        })),
        None,
        half_line(0.0, "t > 0"),
        None,
        None,
    )
}

/// Series data of the Bessel supremum law.
#[derive(Clone, Debug)]
pub struct BesselSeries {
    pub a: f64,
    pub x0: f64,
    /// Positive zeros of J_a.
    pub zeros: Vec<f64>,
    /// j_k / J_{a+1}(j_k).
    weights: Vec<f64>,
}

impl BesselSeries {
    pub fn new(a: f64, x0: f64, terms: usize) -> Result<Self> {
        pos("a", a)?;
        pos("x0", x0)?;
        let zeros = bessel_j_zeros(a, terms)?;
        let weights = zeros.iter().map(|&j| j / bessel_j(a + 1.0, j)).collect();
        Ok(BesselSeries { a, x0, zeros, weights })
    }

    /// Terms needed so that the exponential factor of the last one is below
    /// e^{-36}; None if more than the available zeros.
    pub fn terms_needed(&self, t: f64, x: f64) -> Option<usize> {
        let c = t / (2.0 * x * x);
        if !(c > 0.0) {
            return None;
        }
        let jmin = (36.0 / c).sqrt();
        let k = self.zeros.partition_point(|&j| j < jmin) + 1;
        (k <= self.zeros.len()).then_some(k.max(BESSEL_TERMS.min(self.zeros.len())))
    }

    /// Spatial coefficients c_k(x) = j_k J_a(j_k x0/x) / J_{a+1}(j_k).
    pub fn coefficients(&self, x: f64, k: usize) -> Vec<f64> {
        let r = self.x0 / x;
        (0..k).map(|i| self.weights[i] * bessel_j(self.a, self.zeros[i] * r)).collect()
    }

    fn prefactor(&self, x: f64) -> f64 {
        2.0 * self.a * self.x0.powf(self.a) / x.powf(self.a + 3.0)
    }

    /// (pdf, |last term|), or None when the series needs more terms
    /// than available.
    pub fn eval(&self, t: f64, x: f64) -> Option<(f64, f64)> {
        if !(x > self.x0) || !(t > 0.0) {
            return Some((0.0, 0.0));
        }
        let k = self.terms_needed(t, x)?;
        Some(self.sum_with(&self.coefficients(x, k), t, x))
    }

    fn sum_with(&self, coef: &[f64], t: f64, x: f64) -> (f64, f64) {
        let c = t / (2.0 * x * x);
        let mut s = 0.0;
        let mut last = 0.0;
        for (ci, j) in coef.iter().zip(&self.zeros) {
            last = ci * (-j * j * c).exp();
            s += last;
        }
        let pf = self.prefactor(x);
        ((pf * s).max(0.0), (pf * last).abs())
    }

    /// ∫_0^∞ pdf(t, x) dt. On [t_c, ∞) the series is integrated by
    /// quadrature; on [0, t_c], where it needs more than the available
    /// terms, the termwise integrals are summed through the Fourier–Bessel
    /// expansion Σ 2 J_a(j_k r)/(j_k J_{a+1}(j_k)) = r^a (0 < r < 1).
    pub fn x_marginal(&self, x: f64) -> Result<f64> {
        if !(x > self.x0) {
            return Ok(0.0);
        }
        let kmax = self.zeros.len();
        let jk = self.zeros[kmax - 1];
        let x2 = 2.0 * x * x;
        let tc = 36.0 * x2 / (jk * jk);
        let coef = self.coefficients(x, kmax);
        let r = self.x0 / x;
        let all = 0.5 * r.powf(self.a) * x2;
        let late: f64 = coef.iter().zip(&self.zeros).map(|(c, j)| c * x2 / (j * j) * (-(j * j) * tc / x2).exp()).sum();
        let head = self.prefactor(x) * (all - late);
        let tail = integrate(|t| self.sum_with(&coef, t, x).0, tc, f64::INFINITY, 1e-14, 1e-10)?.value;
        Ok(head + tail)
    }
}

/// Joint density of (ρ, X^↑) for the Bessel-type diffusion with scale
/// (x/x0)^{2a}, as a truncated eigenfunction series with adaptive length.
pub fn bessel_max_joint(a: f64, x0: f64) -> Result<DensityOracle> {
    let series = Arc::new(BesselSeries::new(a, x0, BESSEL_MAX_TERMS)?);
    let s2 = series.clone();
    let mass = move || -> Result<f64> {
        let f = |x: f64| s2.x_marginal(x).unwrap_or(f64::NAN);
        let breaks: Vec<f64> = [1.0, 1.01, 1.1, 1.5, 2.0, 4.0, 10.0, 100.0].iter().map(|m| m * x0).collect();
        let body = integrate_pieces(f, &breaks, 1e-9, 1e-8)?.value;
        // Tail above 100 x0 from the scale law.
        let tail = (1.0f64 / 100.0).powf(2.0 * a);
        let m = body + tail;
        if m.is_nan() {
            return Err(Error::Numerical("Bessel series did not converge during registration".into()));
        }
        Ok(m)
    };
    let probe = {
        let mut worst: f64 = 0.0;
        for &t in &[0.05, 0.2, 1.0, 5.0] {
            for &m in &[1.05, 1.5, 2.0, 4.0] {
                if let Some((_, r)) = series.eval(t, m * x0) {
                    worst = worst.max(r);
                }
            }
        }
        worst
    };
    let s3 = series.clone();
    DensityOracle::register(
        format!("bessel_max_joint(a={a},x0={x0})"),
        Density::Bivariate(Arc::new(move |t, x| s3.eval(t, x).map_or(f64::NAN, |v| v.0))),
        None,
        Support {
            ranges: vec![(0.0, f64::INFINITY), (x0, f64::INFINITY)],
            description: "t > 0, x > x0".into(),
        },
        Some(Truncation { terms: BESSEL_TERMS, max_terms: BESSEL_MAX_TERMS, tail_bound: probe }),
        Some(&mass),
    )
}

/// Looks up an oracle by name with named parameters (CLI front end).
pub fn by_name(name: &str, param: impl Fn(&str) -> Option<f64>) -> Result<DensityOracle> {
    let need = |k: &str| param(k).ok_or_else(|| Error::Config(format!("oracle {name} needs --{k}")));
    match name {
        "exp_sup" => exp_sup_law(need("q")?),
        "uniform" => uniform01(),
        "pareto_sup" => pareto_sup(need("a")?, need("x0")?),
        "bm_max_joint" => bm_max_joint(need("mu")?),
        "bm_max_rho" => bm_max_rho(need("mu")?),
        "ig_hitting" => ig_hitting(need("mu")?, need("x")?),
        "bm_lastexit_joint" => bm_lastexit_joint(need("mu")?, need("x")?),
        "bm_lastexit_rho" => bm_lastexit_rho(need("mu")?, need("x")?),
        "bessel_max_joint" => bessel_max_joint(need("a")?, need("x0")?),
        _ => config(format!(
            "unknown oracle {name}; known: exp_sup, uniform, pareto_sup, bm_max_joint, bm_max_rho, \
             ig_hitting, bm_lastexit_joint, bm_lastexit_rho, bessel_max_joint"
        )),
    }
}

pub const ORACLE_NAMES: [&str; 9] = [
    "exp_sup",
    "uniform",
    "pareto_sup",
    "bm_max_joint",
    "bm_max_rho",
    "ig_hitting",
    "bm_lastexit_joint",
    "bm_lastexit_rho",
    "bessel_max_joint",
];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finite_horizon::big_f;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn exponential_supremum() {
        let o = exp_sup_law(2.0).unwrap();
        assert!((o.pdf(1e-300) - 2.0).abs() < 1e-12);
        let mean = integrate(|x| x * o.pdf(x), 0.0, f64::INFINITY, 1e-12, 1e-12).unwrap().value;
        assert!((mean - 0.5).abs() < 1e-10);
        assert!((1.0 - o.cdf(1.0).unwrap() - 0.1353352832366127).abs() < 1e-12);
        assert!(exp_sup_law(0.0).is_err());
    }

    #[test]
    fn max_joint_marginal_matches_rho_law() {
        let joint = bm_max_joint(1.0).unwrap();
        let rho = bm_max_rho(1.0).unwrap();
        assert!((joint.mass - 1.0).abs() < 1e-3, "{}", joint.mass);
        assert!((rho.mass - 1.0).abs() < 1e-3);
        for &t in &[0.05, 0.3, 1.0, 2.5, 8.0] {
            let m = integrate(|x| joint.pdf2(t, x), 0.0, f64::INFINITY, 1e-14, 1e-12).unwrap().value;
            assert!((m - rho.pdf(t)).abs() < 1e-6, "t={t}: {m} vs {}", rho.pdf(t));
        }
        assert!(rho.pdf(400.0) < 1e-80);
    }

    #[test]
    fn rho_law_matches_positive_part_identity() {
        let (mu, q) = (1.0, 2.0);
        let rho = bm_max_rho(mu).unwrap();
        for &t in &[0.5, 1.0, 2.0] {
            let s = f64::sqrt(t);
            let e = integrate(
                |x| x * (-(x + mu * t).powi(2) / (2.0 * t)).exp() / (s * (2.0 * PI).sqrt()),
                0.0,
                f64::INFINITY,
                1e-14,
                1e-12,
            )
            .unwrap()
            .value;
            assert!(rel(rho.pdf(t), q / t * e) < 1e-4);
        }
    }

    #[test]
    fn inverse_gaussian_law() {
        let (mu, x) = (1.0, 1.5);
        let o = ig_hitting(mu, x).unwrap();
        assert!((o.mass - 1.0).abs() < 1e-6);
        let mode = ig_mode(mu, x);
        let h = 1e-4;
        assert!(o.pdf(mode) > o.pdf(mode - h) && o.pdf(mode) > o.pdf(mode + h));
        for &tau in &[0.2, 1.0, 3.0] {
            let num = integrate(|t| o.pdf(t), 0.0, tau, 1e-14, 1e-12).unwrap().value;
            assert!((o.cdf(tau).unwrap() - num).abs() < 1e-10);
            assert!((big_f(mu, tau, x).unwrap() - num).abs() < 1e-9);
        }
    }

    #[test]
    fn last_exit_laws() {
        let (mu, x) = (1.0, -0.5);
        let joint = bm_lastexit_joint(mu, x).unwrap();
        let rho = bm_lastexit_rho(mu, x).unwrap();
        assert!((rho.mass - 1.0).abs() < 1e-6);
        for &l in &[0.1, 0.7, 2.0] {
            let m = integrate(|t| joint.pdf2(t, l), 0.0, f64::INFINITY, 1e-14, 1e-12).unwrap().value;
            assert!(rel(m, mu * (-mu * l).exp()) < 1e-4);
        }
        for &t in &[0.1, 0.5, 1.0, 3.0] {
            let m = integrate(|l| joint.pdf2(t, l), 0.0, f64::INFINITY, 1e-14, 1e-12).unwrap().value;
            assert!((m - rho.pdf(t)).abs() < 1e-6);
        }
        let r0 = bm_lastexit_rho(mu, 0.0).unwrap();
        let t = 0.8;
        assert!(rel(r0.pdf(t), mu / (2.0 * PI * t).sqrt() * (-mu * mu * t / 2.0).exp()) < 1e-14);
        assert!(bm_lastexit_joint(1.0, 0.2).is_err());
    }

    #[test]
    fn bessel_series() {
        let z = bessel_j_zeros(0.5, 10).unwrap();
        for (k, j) in z.iter().enumerate() {
            assert!((j - (k + 1) as f64 * PI).abs() < 1e-10);
        }
        let o = bessel_max_joint(0.5, 1.0).unwrap();
        assert!((o.mass - 1.0).abs() < 5e-3, "{}", o.mass);
        assert!(o.truncation.as_ref().unwrap().tail_bound < 1e-10, "{:?}", o.truncation);
        // Below t = 1e-3 the density at x = 2 is under 2Φ̄(1/√1e-3) ≈ 0.
        let m = integrate(|t| o.try_pdf2(t, 2.0).unwrap(), 1e-3, f64::INFINITY, 1e-14, 1e-10).unwrap().value;
        assert!(rel(m, 1.0 / 4.0) < 1e-3, "{m}");
        for i in 1..40 {
            for j in 1..40 {
                let v = o.pdf2(0.05 + 0.15 * i as f64, 1.0 + 0.1 * j as f64);
                assert!(v >= 0.0);
            }
        }
        assert!(o.try_pdf2(1e-7, 3.0).is_err());
    }

    #[test]
    fn lookup_by_name() {
        let o = by_name("exp_sup", |k| (k == "q").then_some(2.0)).unwrap();
        assert!((o.pdf(1.0) - 2.0 * (-2.0f64).exp()).abs() < 1e-15);
        assert!(by_name("nope", |_| None).is_err());
        assert!(by_name("bm_max_joint", |_| None).unwrap_err().is_config());
    }
}
