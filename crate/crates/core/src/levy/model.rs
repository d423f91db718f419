//! Spectrally negative Lévy models, their Laplace exponent and the
//! exponential tilt by the root q of θ.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::expr::Expr;
use crate::quad::integrate;
use crate::special::{gamma_fn, upper_gamma};

/// Jump part of the Lévy measure, written for the jump magnitude y = -x > 0:
/// ν(dy) = c e^{-λy} y^{-p-1} dy (gamma is p = 0).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum JumpSpec {
    #[default]
    None,
    Gamma { c: f64, lambda: f64 },
    TemperedStable { c: f64, lambda: f64, p: f64 },
    /// Jump part of θ and its derivative as expressions in `z`.
    Custom { theta: String, dtheta: String },
}

/// Model-file form `{alpha, sigma2, jumps: {family, ...}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevySpec {
    pub alpha: f64,
    #[serde(default)]
    pub sigma2: f64,
    #[serde(default)]
    pub jumps: JumpSpec,
}

pub type ThetaFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Jumps {
    None,
    /// c e^{-λy} y^{-p-1}; p = 0 is the gamma family.
    Power { c: f64, lambda: f64, p: f64 },
    Custom { theta: ThetaFn, dtheta: ThetaFn },
}

impl fmt::Debug for Jumps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Jumps::None => write!(f, "None"),
            Jumps::Power { c, lambda, p } => write!(f, "Power {{ c: {c}, lambda: {lambda}, p: {p} }}"),
            Jumps::Custom { .. } => write!(f, "Custom"),
        }
    }
}

/// Lévy triplet (α, σ², ν) with no positive jumps.
#[derive(Clone, Debug)]
pub struct LevyModel {
    pub alpha: f64,
    pub sigma2: f64,
    pub jumps: Jumps,
}

impl LevyModel {
    /// Brownian motion with drift -μ.
    pub fn bm(mu: f64) -> Result<Self> {
        Self::new(-mu, 1.0, Jumps::None)
    }

    pub fn new(alpha: f64, sigma2: f64, jumps: Jumps) -> Result<Self> {
        let m = LevyModel { alpha, sigma2, jumps };
        m.validate()?;
        Ok(m)
    }

    /// Build without the downward-drift check (used for tilted models).
    fn new_unchecked(alpha: f64, sigma2: f64, jumps: Jumps) -> Self {
        LevyModel { alpha, sigma2, jumps }
    }

    pub fn from_spec(spec: &LevySpec) -> Result<Self> {
        let jumps = match &spec.jumps {
            JumpSpec::None => Jumps::None,
            JumpSpec::Gamma { c, lambda } => Jumps::Power { c: *c, lambda: *lambda, p: 0.0 },
            JumpSpec::TemperedStable { c, lambda, p } => {
                if !(*p > 0.0 && *p < 2.0) {
                    return config(format!("tempered_stable needs 0 < p < 2, got {p}"));
                }
                Jumps::Power { c: *c, lambda: *lambda, p: *p }
            }
            JumpSpec::Custom { theta, dtheta } => {
                let t = Expr::parse_in(theta, "z")?;
                let d = Expr::parse_in(dtheta, "z")?;
                Jumps::Custom {
                    theta: Arc::new(move |z| t.eval(z)),
                    dtheta: Arc::new(move |z| d.eval(z)),
                }
            }
        };
        Self::new(spec.alpha, spec.sigma2, jumps)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: LevySpec = serde_json::from_str(text)?;
        Self::from_spec(&spec)
    }

    fn validate(&self) -> Result<()> {
        if !self.alpha.is_finite() || !(self.sigma2 >= 0.0) || !self.sigma2.is_finite() {
            return config(format!("need finite alpha and sigma2 >= 0, got ({}, {})", self.alpha, self.sigma2));
        }
        if let Jumps::Power { c, lambda, p } = self.jumps {
            if !(c > 0.0) || !c.is_finite() {
                return config(format!("jump intensity c must be positive, got {c}"));
            }
            if !(lambda >= 0.0) || !lambda.is_finite() {
                return config(format!("tempering lambda must be >= 0, got {lambda}"));
            }
            if lambda == 0.0 && !(p > 1.0 && p < 2.0) {
                return config("lambda = 0 is supported only for 1 < p < 2 (finite mean of big jumps)");
            }
        }
        if self.sigma2 == 0.0 && matches!(self.jumps, Jumps::None) {
            return config("the process is deterministic: need sigma2 > 0 or jumps");
        }
        if self.sigma2 == 0.0 {
            let beta = self.beta();
            if !(beta > 0.0) {
                return config(format!(
                    "with sigma2 = 0 the process is a negative subordinator (beta = {beta})"
                ));
            }
        }
        let d0 = self.dtheta(0.0);
        if !(d0 < 0.0) {
            return config(format!("theta'(0+) = {d0} must be negative (downward drift)"));
        }
        Ok(())
    }

    /// β = α - ∫_{-1}^0 x ν(dx) (+∞ when the small jumps have infinite variation).
    pub fn beta(&self) -> f64 {
        match self.jumps {
            Jumps::None => self.alpha,
            Jumps::Power { c, lambda, p } => {
                if p >= 1.0 {
                    f64::INFINITY
                } else {
                    self.alpha + c * small_moment(lambda, p, 0.0, 1.0)
                }
            }
            Jumps::Custom { ref dtheta, .. } => self.alpha + dtheta(1e12),
        }
    }

    pub fn can_simulate(&self) -> bool {
        !matches!(self.jumps, Jumps::Custom { .. })
    }

    /// θ(z) = αz + σ²z²/2 + jump term.
    pub fn theta(&self, z: f64) -> f64 {
        self.alpha * z + 0.5 * self.sigma2 * z * z + self.jump_theta(z)
    }

    /// θ'(z); z = 0 gives θ'(0+).
    pub fn dtheta(&self, z: f64) -> f64 {
        self.alpha + self.sigma2 * z + self.jump_dtheta(z)
    }

    fn jump_theta(&self, z: f64) -> f64 {
        match self.jumps {
            Jumps::None => 0.0,
            Jumps::Custom { ref theta, .. } => theta(z),
            Jumps::Power { c, lambda, p } => c * power_theta(lambda, p, z),
        }
    }

    fn jump_dtheta(&self, z: f64) -> f64 {
        match self.jumps {
            Jumps::None => 0.0,
            Jumps::Custom { ref dtheta, .. } => dtheta(z),
            Jumps::Power { c, lambda, p } => c * power_dtheta(lambda, p, z),
        }
    }

    /// ∫(e^{zx} - 1 - zx 1{-1 ≤ x < 0}) ν(dx) by adaptive quadrature.
    pub fn jump_theta_quadrature(&self, z: f64) -> Result<f64> {
        let (c, lambda, p) = match self.jumps {
            Jumps::None => return Ok(0.0),
            Jumps::Power { c, lambda, p } => (c, lambda, p),
            Jumps::Custom { .. } => {
                return Err(Error::Invalid("custom jump families have no Lévy measure".into()))
            }
        };
        let dens = move |y: f64| c * (-lambda * y).exp() * y.powf(-p - 1.0);
        let small = |y: f64| {
            // e^{-zy} - 1 + zy, accurate for small zy.
            let u = z * y;
            let g = if u < 1e-3 { u * u * (0.5 - u / 6.0 + u * u / 24.0) } else { (-u).exp_m1() + u };
            g * dens(y)
        };
        let big = |y: f64| (-z * y).exp_m1() * dens(y);
        let near = crate::quad::integrate_pieces(small, &geometric_breaks(1.0, 60), 1e-14, 1e-13)
            .map_err(|e| Error::Numerical(format!("jump term on (0, 1] diverged: {e}")))?;
        let far = integrate(big, 1.0, f64::INFINITY, 1e-14, 1e-13)
            .map_err(|e| Error::Numerical(format!("jump term on (1, inf) diverged: {e}")))?;
        Ok(near.value + far.value)
    }

    /// Unique q > 0 with θ(q) = 0.
    pub fn find_q(&self) -> Result<f64> {
        let mut hi = 1.0;
        let mut n = 0;
        while !(self.theta(hi) > 0.0) {
            hi *= 2.0;
            n += 1;
            if n > 200 || !hi.is_finite() {
                return config("theta never becomes positive: no root q found");
            }
        }
        let mut lo = 0.0;
        for _ in 0..300 {
            let m = 0.5 * (lo + hi);
            if !(m > lo && m < hi) {
                break;
            }
            if self.theta(m) < 0.0 {
                lo = m;
            } else {
                hi = m;
            }
        }
        let q = if self.theta(lo).abs() < self.theta(hi).abs() { lo } else { hi };
        if !(q > 0.0) || self.theta(q).abs() > 1e-10 {
            return Err(Error::Numerical(format!(
                "root of theta not resolved: theta({q}) = {}",
                self.theta(q)
            )));
        }
        Ok(q)
    }

    /// The model under Q: θ_q(z) = θ(z + q).
    pub fn tilt(&self) -> Result<TiltedModel> {
        let q = self.find_q()?;
        let tilted = match self.jumps {
            Jumps::None => Some(Self::new_unchecked(self.alpha + self.sigma2 * q, self.sigma2, Jumps::None)),
            Jumps::Power { c, lambda, p } => {
                // α_q = α + σ²q + c ∫_0^1 (1 - e^{-qy}) y^{-p} e^{-λy} dy.
                let f = |y: f64| -(-q * y).exp_m1() * y.powf(-p) * (-lambda * y).exp();
                let extra = crate::quad::integrate_pieces(f, &geometric_breaks(1.0, 60), 1e-15, 1e-13)?.value;
                Some(Self::new_unchecked(
                    self.alpha + self.sigma2 * q + c * extra,
                    self.sigma2,
                    Jumps::Power { c, lambda: lambda + q, p },
                ))
            }
            Jumps::Custom { .. } => None,
        };
        Ok(TiltedModel { base: self.clone(), q, model: tilted })
    }
}

/// Breakpoints b, b/2, ..., b/2^k and 0, ascending.
fn geometric_breaks(b: f64, k: i32) -> Vec<f64> {
    let mut v: Vec<f64> = (0..=k).rev().map(|i| b * 0.5f64.powi(i)).collect();
    v.insert(0, 0.0);
    v
}

/// ∫_a^b y^{-p} e^{-λy} dy.
pub(crate) fn small_moment(lambda: f64, p: f64, a: f64, b: f64) -> f64 {
    let f = |y: f64| y.powf(-p) * (-lambda * y).exp();
    let breaks: Vec<f64> = if a == 0.0 { geometric_breaks(b, 60) } else { vec![a, b] };
    crate::quad::integrate_pieces(f, &breaks, 1e-15, 1e-13).map(|r| r.value).unwrap_or(f64::NAN)
}

/// Jump term of θ per unit c for ν(dy) = e^{-λy} y^{-p-1} dy.
fn power_theta(lambda: f64, p: f64, z: f64) -> f64 {
    if z == 0.0 {
        return 0.0;
    }
    if p == 0.0 {
        return -(z / lambda).ln_1p() + z * (-(-lambda).exp_m1()) / lambda;
    }
    if lambda == 0.0 {
        // 1 < p < 2.
        return gamma_fn(-p) * z.powf(p) - z / (p - 1.0);
    }
    let tail = lambda.powf(p - 1.0) * upper_gamma(1.0 - p, lambda).unwrap_or(f64::NAN);
    if p == 1.0 {
        return (lambda + z) * (z / lambda).ln_1p() - z - z * tail;
    }
    let lp = lambda.powf(p);
    // (λ+z)^p - λ^p - pzλ^{p-1} evaluated without cancellation.
    let r = z / lambda;
    let core = lp * ((p * r.ln_1p()).exp_m1() - p * r);
    gamma_fn(-p) * core - z * tail
}

fn power_dtheta(lambda: f64, p: f64, z: f64) -> f64 {
    if p == 0.0 {
        return -1.0 / (lambda + z) + (-(-lambda).exp_m1()) / lambda;
    }
    if lambda == 0.0 {
        return if z == 0.0 {
            f64::NEG_INFINITY
        } else {
            gamma_fn(-p) * p * z.powf(p - 1.0) - 1.0 / (p - 1.0)
        };
    }
    let tail = lambda.powf(p - 1.0) * upper_gamma(1.0 - p, lambda).unwrap_or(f64::NAN);
    if p == 1.0 {
        return (z / lambda).ln_1p() - tail;
    }
    let r = z / lambda;
    gamma_fn(-p) * p * lambda.powf(p - 1.0) * ((p - 1.0) * r.ln_1p()).exp_m1() - tail
}

/// Base model, root q and (for parametric families) the tilted triplet.
#[derive(Clone, Debug)]
pub struct TiltedModel {
    pub base: LevyModel,
    pub q: f64,
    /// Triplet under Q; `None` for custom families.
    pub model: Option<LevyModel>,
}

impl TiltedModel {
    /// θ_q(z) = θ(z + q).
    pub fn theta_q(&self, z: f64) -> f64 {
        self.base.theta(z + self.q)
    }

    /// θ_q'(0+) = θ'(q) > 0.
    pub fn drift_q(&self) -> f64 {
        self.base.dtheta(self.q)
    }

    /// θ_q^{-1}(a) for a ≥ 0.
    pub fn theta_q_inv(&self, a: f64) -> Result<f64> {
        if !(a >= 0.0) {
            return Err(Error::Invalid(format!("theta_q^-1 needs a >= 0, got {a}")));
        }
        if a == 0.0 {
            return Ok(0.0);
        }
        let mut hi = 1.0;
        while self.theta_q(hi) < a {
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::Numerical("theta_q^-1 bracket overflow".into()));
            }
        }
        let mut lo = 0.0;
        while hi - lo > 1e-12 * hi.max(1e-300) {
            let m = 0.5 * (lo + hi);
            if !(m > lo && m < hi) {
                break;
            }
            if self.theta_q(m) < a {
                lo = m;
            } else {
                hi = m;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// The tilted triplet, or an error for custom families.
    pub fn simulation_model(&self) -> Result<&LevyModel> {
        self.model
            .as_ref()
            .ok_or_else(|| Error::Config("custom jump families cannot be simulated".into()))
    }
}

/// E[exp(-aρ - bX_ρ)] = q / (q + θ_q^{-1}(a) + b).
pub fn laplace_rho_xrho(tilted: &TiltedModel, a: f64, b: f64) -> Result<f64> {
    if !(b >= 0.0) {
        return Err(Error::Invalid(format!("b must be >= 0, got {b}")));
    }
    let q = tilted.q;
    Ok(q / (q + tilted.theta_q_inv(a)? + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gamma_model() -> LevyModel {
        LevyModel::new(-1.0, 1.0, Jumps::Power { c: 0.5, lambda: 2.0, p: 0.0 }).unwrap()
    }

    #[test]
    fn brownian_exponent_and_root() {
        let m = LevyModel::bm(1.0).unwrap();
        assert_eq!(m.theta(0.0), 0.0);
        assert!((m.theta(3.0) - (-3.0 + 4.5)).abs() < 1e-15);
        let t = m.tilt().unwrap();
        assert!((t.q - 2.0).abs() < 1e-12);
        let q = LevyModel::bm(0.35).unwrap().find_q().unwrap();
        assert!((q - 0.7).abs() < 1e-12);
        let tm = t.model.as_ref().unwrap();
        assert!((tm.alpha - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_closed_form_matches_quadrature() {
        let m = gamma_model();
        for z in [0.5, 1.0, 2.0] {
            let closed = m.jump_theta(z);
            let quad = m.jump_theta_quadrature(z).unwrap();
            assert!((closed - quad).abs() < 1e-8, "z={z}: {closed} vs {quad}");
        }
        // The closed form carries -c ln(1 + z/λ).
        assert!(m.jump_theta(1.0) < 0.5 * (1.0 - (-2f64).exp()) / 2.0);
    }

    #[test]
    fn tempered_stable_closed_form_matches_quadrature() {
        for (lambda, p) in [(1.5, 0.5), (2.0, 1.0), (0.7, 1.5), (0.0, 1.3)] {
            let m = LevyModel::new(-2.0, 0.5, Jumps::Power { c: 0.3, lambda, p }).unwrap();
            for z in [0.5, 1.0, 2.0] {
                let closed = m.jump_theta(z);
                let quad = m.jump_theta_quadrature(z).unwrap();
                assert!((closed - quad).abs() < 1e-8, "λ={lambda} p={p} z={z}: {closed} vs {quad}");
            }
            if lambda > 0.0 {
                let h = 1e-5;
                let fd = (m.theta(1.0 + h) - m.theta(1.0 - h)) / (2.0 * h);
                assert!((fd - m.dtheta(1.0)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn gamma_root_and_tilt_consistency() {
        let m = gamma_model();
        let t = m.tilt().unwrap();
        assert!(m.theta(t.q).abs() <= 1e-10);
        let via_quad = m.alpha * t.q + 0.5 * m.sigma2 * t.q * t.q + m.jump_theta_quadrature(t.q).unwrap();
        assert!(via_quad.abs() < 1e-8);
        assert!(t.drift_q() > 0.0);
        let tm = t.model.as_ref().unwrap();
        for i in 0..20 {
            let z = 0.25 * i as f64;
            assert!((tm.theta(z) - t.theta_q(z)).abs() < 1e-10, "z={z}");
        }
    }

    #[test]
    fn exponent_is_convex() {
        let m = LevyModel::new(-1.0, 0.2, Jumps::Power { c: 0.4, lambda: 1.0, p: 0.7 }).unwrap();
        let h = 0.05;
        for i in 1..200 {
            let z = i as f64 * h;
            let d2 = m.theta(z + h) - 2.0 * m.theta(z) + m.theta(z - h);
            assert!(d2 >= -1e-8);
        }
    }

    #[test]
    fn laplace_transform_special_cases() {
        let mu: f64 = 1.0;
        let t = LevyModel::bm(mu).unwrap().tilt().unwrap();
        assert!((laplace_rho_xrho(&t, 0.0, 0.0).unwrap() - 1.0).abs() < 1e-15);
        for (a, b) in [(0.5, 0.0), (1.0, 0.5), (0.0, 1.0)] {
            let exact = 2.0 * mu / (b + mu + (mu * mu + 2.0 * a).sqrt());
            assert!((laplace_rho_xrho(&t, a, b).unwrap() - exact).abs() < 1e-10);
        }
        assert!((laplace_rho_xrho(&t, 0.0, 3.0).unwrap() - 2.0 / 5.0).abs() < 1e-15);
    }

    #[test]
    fn assumptions_are_enforced() {
        assert!(LevyModel::new(1.0, 1.0, Jumps::None).is_err());
        assert!(LevyModel::new(-1.0, 0.0, Jumps::None).is_err());
        // Negative of a gamma subordinator.
        assert!(LevyModel::new(-1.0, 0.0, Jumps::Power { c: 1.0, lambda: 1.0, p: 0.0 }).is_err());
        let ok = LevyModel::new(-0.1, 0.0, Jumps::Power { c: 1.0, lambda: 1.0, p: 0.0 });
        assert!(ok.is_ok(), "{ok:?}");
        let spec = r#"{"alpha": -1, "sigma2": 1, "jumps": {"family": "gamma", "c": 0.5, "lambda": 2}}"#;
        assert!(LevyModel::from_json(spec).is_ok());
        let custom = r#"{"alpha": -1, "sigma2": 1, "jumps": {"family": "custom", "theta": "0", "dtheta": "0"}}"#;
        let m = LevyModel::from_json(custom).unwrap();
        assert!(!m.can_simulate());
        assert!(m.tilt().unwrap().simulation_model().is_err());
    }
}
