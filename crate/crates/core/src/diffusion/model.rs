use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::expr::Expr;

pub type Coef = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Built-in models with a closed-form scale function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Builtin {
    /// Bessel process of index -a: α(x) = (1-2a)/(2x), σ = 1 on (0, ∞).
    Bessel { a: f64 },
    /// Brownian motion with drift -μ on ℝ.
    Bm { mu: f64 },
}

/// Model-file form: `{l, r, x0, alpha, sigma, scale_closed_form}`; `null`
/// bounds mean ∓∞, coefficients are expressions in `x` or a builtin call
/// such as `bessel(0.5)` / `bm(1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffusionSpec {
    #[serde(default)]
    pub l: Option<f64>,
    #[serde(default)]
    pub r: Option<f64>,
    pub x0: f64,
    pub alpha: String,
    #[serde(default = "one")]
    pub sigma: String,
    #[serde(default)]
    pub scale_closed_form: Option<String>,
}

fn one() -> String {
    "1".into()
}

/// A one-dimensional diffusion dX = α(X)dt + σ(X)dW on (l, r).
#[derive(Clone)]
pub struct DiffusionModel {
    pub l: f64,
    pub r: f64,
    pub x0: f64,
    alpha: Coef,
    sigma: Coef,
    pub builtin: Option<Builtin>,
    pub closed_scale: Option<Expr>,
    pub description: String,
}

impl fmt::Debug for DiffusionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiffusionModel")
            .field("l", &self.l)
            .field("r", &self.r)
            .field("x0", &self.x0)
            .field("description", &self.description)
            .finish()
    }
}

fn parse_builtin(s: &str) -> Result<Option<Builtin>> {
    let t = s.trim();
    let arg = |name: &str| -> Option<&str> {
        t.strip_prefix(name)
            .and_then(|r| r.trim().strip_prefix('('))
            .and_then(|r| r.trim().strip_suffix(')'))
    };
    if let Some(a) = arg("bessel") {
        let a: f64 = a.trim().parse().map_err(|_| {
            crate::Error::Config(format!("bessel(a) needs a numeric index, got '{a}'"))
        })?;
        return Ok(Some(Builtin::Bessel { a }));
    }
    if let Some(m) = arg("bm") {
        let mu: f64 = m.trim().parse().map_err(|_| {
            crate::Error::Config(format!("bm(mu) needs a numeric drift, got '{m}'"))
        })?;
        return Ok(Some(Builtin::Bm { mu }));
    }
    Ok(None)
}

impl DiffusionModel {
    pub fn bessel(a: f64, x0: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return config(format!("Bessel index parameter a must be positive, got {a}"));
        }
        let c = (1.0 - 2.0 * a) / 2.0;
        Self::from_parts(
            0.0,
            f64::INFINITY,
            x0,
            Arc::new(move |x| c / x),
            Arc::new(|_| 1.0),
            Some(Builtin::Bessel { a }),
            None,
            format!("bessel({a})"),
        )
    }

    pub fn bm(mu: f64, x0: f64) -> Result<Self> {
        if !(mu > 0.0) || !mu.is_finite() {
            return config(format!("bm(mu) needs mu > 0 (downward drift -mu), got {mu}"));
        }
        Self::from_parts(
            f64::NEG_INFINITY,
            f64::INFINITY,
            x0,
            Arc::new(move |_| -mu),
            Arc::new(|_| 1.0),
            Some(Builtin::Bm { mu }),
            None,
            format!("bm({mu})"),
        )
    }

    /// General model from coefficient callables.
    pub fn new(l: f64, r: f64, x0: f64, alpha: Coef, sigma: Coef) -> Result<Self> {
        Self::from_parts(l, r, x0, alpha, sigma, None, None, "custom".into())
    }

    #[allow(clippy::too_many_arguments)]
    fn from_parts(
        l: f64,
        r: f64,
        x0: f64,
        alpha: Coef,
        sigma: Coef,
        builtin: Option<Builtin>,
        closed_scale: Option<Expr>,
        description: String,
    ) -> Result<Self> {
        if !(l < x0 && x0 < r) || l.is_nan() || r.is_nan() || !x0.is_finite() {
            return config(format!("need l < x0 < r, got l={l}, x0={x0}, r={r}"));
        }
        let m = DiffusionModel { l, r, x0, alpha, sigma, builtin, closed_scale, description };
        m.check_coefficients()?;
        Ok(m)
    }

    pub fn from_spec(spec: &DiffusionSpec) -> Result<Self> {
        let l = spec.l.unwrap_or(f64::NEG_INFINITY);
        let r = spec.r.unwrap_or(f64::INFINITY);
        if let Some(b) = parse_builtin(&spec.alpha)? {
            if spec.sigma.trim() != "1" {
                return config("builtin models fix sigma = 1");
            }
            let m = match b {
                Builtin::Bessel { a } => Self::bessel(a, spec.x0)?,
                Builtin::Bm { mu } => Self::bm(mu, spec.x0)?,
            };
            if spec.l.is_some_and(|v| v != m.l) || spec.r.is_some_and(|v| v != m.r) {
                return config(format!("builtin {} lives on ({}, {})", m.description, m.l, m.r));
            }
            return Ok(m);
        }
        let a = Expr::parse(&spec.alpha)?;
        let s = Expr::parse(&spec.sigma)?;
        let closed = spec.scale_closed_form.as_deref().map(Expr::parse).transpose()?;
        let desc = format!("alpha={}, sigma={}", spec.alpha, spec.sigma);
        Self::from_parts(
            l,
            r,
            spec.x0,
            Arc::new(move |x| a.eval(x)),
            Arc::new(move |x| s.eval(x)),
            None,
            closed,
            desc,
        )
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: DiffusionSpec = serde_json::from_str(text)?;
        Self::from_spec(&spec)
    }

    #[inline]
    pub fn alpha(&self, x: f64) -> f64 {
        (self.alpha)(x)
    }

    #[inline]
    pub fn sigma(&self, x: f64) -> f64 {
        (self.sigma)(x)
    }

    /// Points spread over (l, r) for coefficient checks.
    pub fn probe_grid(&self, n: usize) -> Vec<f64> {
        let x0 = self.x0;
        let span = |d: f64| -> f64 { d.min(1e3 * (1.0 + x0.abs())) };
        let left = span(x0 - self.l);
        let right = span(self.r - x0);
        let mut out = Vec::with_capacity(2 * n + 1);
        for i in 1..=n {
            let u = i as f64 / (n + 1) as f64;
            out.push(x0 - left * u.powi(3).max(1e-9));
            out.push(x0 + right * u.powi(3).max(1e-9));
        }
        out.push(x0);
        out.retain(|&x| x > self.l && x < self.r);
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out
    }

    /// σ > 0 and σ^{-2}(1 + |α|) finite on a probe grid, and locally
    /// integrable between neighbouring probe points.
    fn check_coefficients(&self) -> Result<()> {
        let grid = self.probe_grid(40);
        for &x in &grid {
            let s = self.sigma(x);
            let a = self.alpha(x);
            if !(s > 0.0) || !s.is_finite() {
                return config(format!("sigma must be positive on (l, r); sigma({x}) = {s}"));
            }
            if !a.is_finite() {
                return config(format!("alpha is not finite at {x}"));
            }
        }
        for w in grid.windows(2) {
            let q = crate::quad::integrate(
                |x| (1.0 + self.alpha(x).abs()) / self.sigma(x).powi(2),
                w[0],
                w[1],
                1e-8,
                1e-8,
            );
            if !matches!(q, Ok(ref v) if v.value.is_finite()) {
                return config(format!(
                    "sigma^-2 (1 + |alpha|) is not integrable on [{}, {}]",
                    w[0], w[1]
                ));
            }
        }
        Ok(())
    }
}
