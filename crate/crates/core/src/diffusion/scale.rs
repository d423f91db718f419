//! Scale function s with s(ℓ+) = 0 and s(x0) = 1.
//!
//! Builtin models use their closed forms. Otherwise φ = -2∫_{x0} α/σ² and
//! s = ∫_ℓ e^φ are integrated on panels that shrink geometrically toward a
//! finite endpoint and double toward an infinite one, then refined until
//! cubic Hermite interpolation of φ and s is accurate at panel midpoints.

use serde::{Deserialize, Serialize};

use super::model::{Builtin, DiffusionModel};
use crate::error::{config, Error, Result};
use crate::expr::Expr;
use crate::quad::integrate;

const FINITE_END_PANELS: usize = 40;
const INFINITE_END_PANELS: usize = 1000;
const S_TOP: f64 = 1e16;
const PHI_TOL: f64 = 1e-10;
const S_REL_TOL: f64 = 1e-11;
const MAX_DEPTH: usize = 40;
const DIVERGENT_RATIO: f64 = 0.95;

/// Diagnostics from the endpoint analysis.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScaleReport {
    pub backend: String,
    pub nodes: usize,
    /// Mass of s' below the first node, relative to s(x0).
    pub left_tail: f64,
    /// Ratio of the last two panel contributions toward ℓ (< 1 ⇒ s(ℓ+) finite).
    pub left_ratio: f64,
    /// Ratio of the last two panel contributions toward r (≥ 1 ⇒ s(r-) = ∞).
    pub right_ratio: f64,
    /// Largest tabulated value of s.
    pub s_max: f64,
}

#[derive(Clone, Debug)]
struct Table {
    x: Vec<f64>,
    phi: Vec<f64>,
    dphi: Vec<f64>,
    /// Normalised s and s' at the nodes.
    s: Vec<f64>,
    ds: Vec<f64>,
    norm: f64,
}

#[derive(Clone, Debug)]
enum Backend {
    Bm { mu: f64 },
    Bessel { a: f64 },
    Expr { e: Expr, offset: f64, norm: f64 },
    Grid(Box<Table>),
}

/// Normalised scale function of a diffusion.
#[derive(Clone, Debug)]
pub struct ScaleFunction {
    pub l: f64,
    pub r: f64,
    pub x0: f64,
    backend: Backend,
    model: DiffusionModel,
    pub report: ScaleReport,
}

#[inline]
fn hermite(h: f64, t: f64, y0: f64, m0: f64, y1: f64, m1: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0
        + (t3 - 2.0 * t2 + t) * h * m0
        + (-2.0 * t3 + 3.0 * t2) * y1
        + (t3 - t2) * h * m1
}

#[inline]
fn hermite_d(h: f64, t: f64, y0: f64, m0: f64, y1: f64, m1: f64) -> f64 {
    let t2 = t * t;
    ((6.0 * t2 - 6.0 * t) * y0 + (-6.0 * t2 + 6.0 * t) * y1) / h
        + (3.0 * t2 - 4.0 * t + 1.0) * m0
        + (3.0 * t2 - 2.0 * t) * m1
}

/// Node values of φ, φ' and unnormalised s' and s.
#[derive(Clone, Copy, Debug)]
struct Node {
    x: f64,
    phi: f64,
    dphi: f64,
    s: f64,
}

struct Integrator<'a> {
    m: &'a DiffusionModel,
}

impl Integrator<'_> {
    fn dphi(&self, x: f64) -> f64 {
        -2.0 * self.m.alpha(x) / self.m.sigma(x).powi(2)
    }

    /// φ(b) - φ(a).
    fn phi_step(&self, a: f64, b: f64) -> Result<f64> {
        Ok(integrate(|y| self.dphi(y), a, b, 1e-13, 1e-13)?.value)
    }

    /// ∫_a^b e^{φ(y)} dy given φ(a).
    fn s_step(&self, a: f64, b: f64, phi_a: f64) -> Result<f64> {
        let mut err: Option<Error> = None;
        let v = integrate(
            |y| match self.phi_step(a, y) {
                Ok(d) => (phi_a + d).exp(),
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            },
            a,
            b,
            0.0,
            1e-13,
        );
        if let Some(e) = err {
            return Err(e);
        }
        Ok(v?.value)
    }

    fn node_from(&self, prev: &Node, x: f64) -> Result<(Node, f64)> {
        let phi = prev.phi + self.phi_step(prev.x, x)?;
        let (lo, hi, phi_lo) = if x > prev.x { (prev.x, x, prev.phi) } else { (x, prev.x, phi) };
        let ds = self.s_step(lo, hi, phi_lo)?;
        Ok((Node { x, phi, dphi: self.dphi(x), s: 0.0 }, ds))
    }

    /// Recursively split [a, b] until Hermite midpoint errors are small.
    fn refine(&self, a: Node, b: Node, depth: usize, out: &mut Vec<Node>) -> Result<()> {
        let xm = 0.5 * (a.x + b.x);
        let h = b.x - a.x;
        if depth >= MAX_DEPTH || !(xm > a.x && xm < b.x) {
            out.push(b);
            return Ok(());
        }
        let phi_m = a.phi + self.phi_step(a.x, xm)?;
        let s_m = a.s + self.s_step(a.x, xm, a.phi)?;
        let phi_h = hermite(h, 0.5, a.phi, a.dphi, b.phi, b.dphi);
        let s_h = hermite(h, 0.5, a.s, a.phi.exp(), b.s, b.phi.exp());
        let ok = (phi_h - phi_m).abs() <= PHI_TOL && (s_h - s_m).abs() <= S_REL_TOL * s_m.abs();
        if ok {
            out.push(b);
            return Ok(());
        }
        let m = Node { x: xm, phi: phi_m, dphi: self.dphi(xm), s: s_m };
        self.refine(a, m, depth + 1, out)?;
        self.refine(m, b, depth + 1, out)
    }
}

fn finite(v: (Node, f64), end: &str) -> Result<(Node, f64)> {
    if v.1.is_finite() {
        Ok(v)
    } else {
        config(format!("non-finite scale increment toward {end}"))
    }
}

fn ratio(contrib: &[f64]) -> f64 {
    let n = contrib.len();
    if n < 2 || contrib[n - 2] <= 0.0 {
        return if n >= 1 && contrib[n - 1] > 0.0 { f64::INFINITY } else { 0.0 };
    }
    contrib[n - 1] / contrib[n - 2]
}

impl ScaleFunction {
    /// Closed form when the model carries one, quadrature otherwise.
    pub fn build(model: &DiffusionModel) -> Result<Self> {
        match (model.builtin, &model.closed_scale) {
            (Some(b), _) => Ok(Self::closed_builtin(model, b)),
            (None, Some(e)) => Self::closed_expr(model, e.clone()),
            (None, None) => Self::build_quadrature(model),
        }
    }

    fn closed_builtin(model: &DiffusionModel, b: Builtin) -> Self {
        let backend = match b {
            Builtin::Bm { mu } => Backend::Bm { mu },
            Builtin::Bessel { a } => Backend::Bessel { a },
        };
        ScaleFunction {
            l: model.l,
            r: model.r,
            x0: model.x0,
            backend,
            model: model.clone(),
            report: ScaleReport { backend: "closed".into(), ..Default::default() },
        }
    }

    fn closed_expr(model: &DiffusionModel, e: Expr) -> Result<Self> {
        let probe_l = if model.l.is_finite() {
            model.l + 1e-12 * (model.x0 - model.l)
        } else {
            model.x0 - 700.0
        };
        let offset = e.eval(probe_l);
        let at_x0 = e.eval(model.x0);
        let norm = at_x0 - offset;
        if !(norm > 0.0) || !norm.is_finite() {
            return config(format!(
                "scale_closed_form must increase from l to x0 (got {offset} near l, {at_x0} at x0)"
            ));
        }
        let out = ScaleFunction {
            l: model.l,
            r: model.r,
            x0: model.x0,
            backend: Backend::Expr { e, offset, norm },
            model: model.clone(),
            report: ScaleReport { backend: "closed_expr".into(), ..Default::default() },
        };
        let grid = model.probe_grid(20);
        for w in grid.windows(2) {
            if !(out.eval(w[1]) > out.eval(w[0])) {
                return config(format!(
                    "scale_closed_form is not strictly increasing on [{}, {}]",
                    w[0], w[1]
                ));
            }
        }
        Ok(out)
    }

    /// Quadrature backend regardless of any closed form.
    pub fn build_quadrature(model: &DiffusionModel) -> Result<Self> {
        let it = Integrator { m: model };
        let x0 = model.x0;
        let origin = Node { x: x0, phi: 0.0, dphi: it.dphi(x0), s: 0.0 };

        // Left coarse nodes, moving away from x0 (descending x).
        let mut left = vec![origin];
        let mut left_contrib = Vec::new();
        if model.l.is_finite() {
            let span = x0 - model.l;
            for k in 1..=FINITE_END_PANELS {
                let x = model.l + span * 0.5f64.powi(k as i32);
                let (n, ds) = it.node_from(left.last().unwrap(), x)?;
                left.push(n);
                left_contrib.push(ds);
            }
        } else {
            let mut k = 1;
            loop {
                let x = x0 - ((1u64 << k.min(62)) as f64 - 1.0);
                let step = it.node_from(left.last().unwrap(), x);
                let Ok((n, ds)) = step.and_then(|v| finite(v, "l")) else {
                    return config("s(l+) appears to be -infinity: the integral of s' toward l overflows");
                };
                left.push(n);
                left_contrib.push(ds);
                let total: f64 = left_contrib.iter().sum();
                if ds <= 1e-18 * total || k >= 60 {
                    break;
                }
                k += 1;
            }
        }
        let left_ratio = ratio(&left_contrib);
        if !(left_ratio < DIVERGENT_RATIO) {
            return config(format!(
                "s(l+) appears to be -infinity: panel contributions toward l do not decay (ratio {left_ratio:.3})"
            ));
        }
        let last = *left_contrib.last().unwrap_or(&0.0);
        let left_tail = if left_ratio > 0.0 { last * left_ratio / (1.0 - left_ratio) } else { 0.0 };

        // Right coarse nodes (ascending x).
        let mut right = vec![origin];
        let mut right_contrib = Vec::new();
        let s_x0_unnorm = left_tail + left_contrib.iter().sum::<f64>();
        let mut s_run = s_x0_unnorm;
        if model.r.is_finite() {
            let span = model.r - x0;
            for k in 1..=FINITE_END_PANELS {
                let x = model.r - span * 0.5f64.powi(k as i32);
                let (n, ds) = it.node_from(right.last().unwrap(), x)?;
                right.push(n);
                right_contrib.push(ds);
                s_run += ds;
                if s_run > S_TOP * s_x0_unnorm {
                    break;
                }
            }
        } else {
            for k in 1..=INFINITE_END_PANELS {
                let x = x0 + 2f64.powi(k as i32) - 1.0;
                if !x.is_finite() || x > 1e300 {
                    break;
                }
                let (n, ds) = it.node_from(right.last().unwrap(), x)?;
                if !ds.is_finite() {
                    break;
                }
                right.push(n);
                right_contrib.push(ds);
                s_run += ds;
                if s_run > S_TOP * s_x0_unnorm {
                    break;
                }
            }
        }
        let right_ratio = ratio(&right_contrib);
        if s_run <= S_TOP * s_x0_unnorm && right_ratio < DIVERGENT_RATIO {
            return config(format!(
                "s(r-) appears finite: panel contributions toward r decay (ratio {right_ratio:.3}), s reached {:.3e}",
                s_run / s_x0_unnorm
            ));
        }

        // Absolute unnormalised s at coarse nodes, ascending.
        let mut coarse: Vec<Node> = Vec::with_capacity(left.len() + right.len());
        let mut s_acc = left_tail;
        let nl = left.len();
        for i in (0..nl).rev() {
            let mut n = left[i];
            if i + 1 < nl {
                s_acc += left_contrib[i];
            }
            n.s = s_acc;
            coarse.push(n);
        }
        for (i, n) in right.iter().enumerate().skip(1) {
            s_acc += right_contrib[i - 1];
            coarse.push(Node { s: s_acc, ..*n });
        }

        let mut nodes = vec![coarse[0]];
        for w in coarse.windows(2) {
            it.refine(w[0], w[1], 0, &mut nodes)?;
        }
        let norm = s_x0_unnorm;
        let table = Table {
            x: nodes.iter().map(|n| n.x).collect(),
            phi: nodes.iter().map(|n| n.phi).collect(),
            dphi: nodes.iter().map(|n| n.dphi).collect(),
            s: nodes.iter().map(|n| n.s / norm).collect(),
            ds: nodes.iter().map(|n| n.phi.exp() / norm).collect(),
            norm,
        };
        let report = ScaleReport {
            backend: "quadrature".into(),
            nodes: table.x.len(),
            left_tail: left_tail / norm,
            left_ratio,
            right_ratio,
            s_max: *table.s.last().unwrap(),
        };
        Ok(ScaleFunction {
            l: model.l,
            r: model.r,
            x0,
            backend: Backend::Grid(Box::new(table)),
            model: model.clone(),
            report,
        })
    }

    pub fn is_closed_form(&self) -> bool {
        !matches!(self.backend, Backend::Grid(_))
    }

    /// s(x) for x ∈ (ℓ, r).
    pub fn eval(&self, x: f64) -> f64 {
        match &self.backend {
            Backend::Bm { mu } => (2.0 * mu * (x - self.x0)).exp(),
            Backend::Bessel { a } => (x / self.x0).powf(2.0 * a),
            Backend::Expr { e, offset, norm } => (e.eval(x) - offset) / norm,
            Backend::Grid(t) => self.grid_eval(t, x),
        }
    }

    /// s'(x).
    pub fn deriv(&self, x: f64) -> f64 {
        match &self.backend {
            Backend::Bm { mu } => 2.0 * mu * (2.0 * mu * (x - self.x0)).exp(),
            Backend::Bessel { a } => 2.0 * a / x * (x / self.x0).powf(2.0 * a),
            Backend::Expr { e, norm, .. } => {
                let h = 1e-6 * (1.0 + x.abs());
                let (lo, hi) = (x - h, x + h);
                let (lo, hi) = (
                    if lo > self.l { lo } else { x },
                    if hi < self.r { hi } else { x },
                );
                (e.eval(hi) - e.eval(lo)) / ((hi - lo) * norm)
            }
            Backend::Grid(t) => self.grid_deriv(t, x),
        }
    }

    /// q(x) = s'(x)/s(x).
    pub fn q(&self, x: f64) -> f64 {
        match self.backend {
            Backend::Bm { mu } => 2.0 * mu,
            Backend::Bessel { a } => 2.0 * a / x,
            _ => self.deriv(x) / self.eval(x),
        }
    }

    /// s^{-1}(y) for y > 0.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        if !(y > 0.0) || y.is_nan() {
            return Err(Error::Invalid(format!("scale inverse needs y > 0, got {y}")));
        }
        match &self.backend {
            Backend::Bm { mu } => Ok(self.x0 + y.ln() / (2.0 * mu)),
            Backend::Bessel { a } => Ok(self.x0 * y.powf(0.5 / a)),
            Backend::Expr { .. } => self.bisect_inverse(y),
            Backend::Grid(t) => self.grid_inverse(t, y),
        }
    }

    fn grid_eval(&self, t: &Table, x: f64) -> f64 {
        let n = t.x.len();
        if x <= t.x[0] {
            let x1 = t.x[0];
            if self.l.is_finite() {
                let p = t.ds[0] * (x1 - self.l) / t.s[0];
                return t.s[0] * ((x - self.l) / (x1 - self.l)).max(0.0).powf(p);
            }
            return t.s[0] * ((x - x1) * t.ds[0] / t.s[0]).exp();
        }
        if x >= t.x[n - 1] {
            let it = Integrator { m: &self.model };
            let extra = it.s_step(t.x[n - 1], x, t.phi[n - 1]).unwrap_or(f64::INFINITY);
            return t.s[n - 1] + extra / t.norm;
        }
        let i = t.x.partition_point(|&v| v <= x) - 1;
        let h = t.x[i + 1] - t.x[i];
        let u = (x - t.x[i]) / h;
        hermite(h, u, t.s[i], t.ds[i], t.s[i + 1], t.ds[i + 1])
    }

    fn grid_deriv(&self, t: &Table, x: f64) -> f64 {
        let n = t.x.len();
        if x <= t.x[0] {
            let x1 = t.x[0];
            if self.l.is_finite() {
                let p = t.ds[0] * (x1 - self.l) / t.s[0];
                return p * self.grid_eval(t, x) / (x - self.l);
            }
            return t.ds[0] * ((x - x1) * t.ds[0] / t.s[0]).exp();
        }
        if x >= t.x[n - 1] {
            let it = Integrator { m: &self.model };
            let d = it.phi_step(t.x[n - 1], x).unwrap_or(f64::INFINITY);
            return (t.phi[n - 1] + d).exp() / t.norm;
        }
        let i = t.x.partition_point(|&v| v <= x) - 1;
        let h = t.x[i + 1] - t.x[i];
        let u = (x - t.x[i]) / h;
        hermite(h, u, t.phi[i], t.dphi[i], t.phi[i + 1], t.dphi[i + 1]).exp() / t.norm
    }

    fn grid_inverse(&self, t: &Table, y: f64) -> Result<f64> {
        let n = t.x.len();
        if y <= t.s[0] {
            let x1 = t.x[0];
            if self.l.is_finite() {
                let p = t.ds[0] * (x1 - self.l) / t.s[0];
                return Ok(self.l + (x1 - self.l) * (y / t.s[0]).powf(1.0 / p));
            }
            return Ok(x1 + (y / t.s[0]).ln() * t.s[0] / t.ds[0]);
        }
        if y >= t.s[n - 1] {
            return self.bisect_inverse(y);
        }
        let i = t.s.partition_point(|&v| v <= y) - 1;
        let (a, b) = (t.x[i], t.x[i + 1]);
        let h = b - a;
        let f = |x: f64| hermite(h, (x - a) / h, t.s[i], t.ds[i], t.s[i + 1], t.ds[i + 1]);
        let df = |x: f64| hermite_d(h, (x - a) / h, t.s[i], t.ds[i], t.s[i + 1], t.ds[i + 1]);
        let (mut lo, mut hi) = (a, b);
        for _ in 0..60 {
            let m = 0.5 * (lo + hi);
            if f(m) < y {
                lo = m;
            } else {
                hi = m;
            }
            if hi - lo <= 1e-6 * h {
                break;
            }
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..8 {
            let d = df(x);
            if !(d > 0.0) {
                break;
            }
            let nx = x - (f(x) - y) / d;
            if !(nx >= lo && nx <= hi) {
                break;
            }
            let done = (nx - x).abs() <= 1e-15 * (1.0 + x.abs());
            x = nx;
            if done {
                break;
            }
        }
        Ok(x)
    }

    /// Bracket by stepping outward from x0, then bisect.
    fn bisect_inverse(&self, y: f64) -> Result<f64> {
        let (mut lo, mut hi) = (self.x0, self.x0);
        let mut step = 1.0;
        if y >= 1.0 {
            while self.eval(hi) < y {
                lo = hi;
                hi = if self.r.is_finite() {
                    self.r - (self.r - hi) * 0.5
                } else {
                    hi + step
                };
                step *= 2.0;
                if !hi.is_finite() || (self.r.is_finite() && self.r - hi < 1e-15 * (1.0 + self.r.abs())) {
                    return Err(Error::Numerical(format!("scale inverse: {y} is out of reach")));
                }
            }
        } else {
            while self.eval(lo) > y {
                hi = lo;
                lo = if self.l.is_finite() {
                    self.l + (lo - self.l) * 0.5
                } else {
                    lo - step
                };
                step *= 2.0;
                if !lo.is_finite() || (self.l.is_finite() && lo - self.l < 1e-300) {
                    return Err(Error::Numerical(format!("scale inverse: {y} is out of reach")));
                }
            }
        }
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if !(m > lo && m < hi) {
                break;
            }
            if self.eval(m) < y {
                lo = m;
            } else {
                hi = m;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn bessel_quadrature_matches_closed_form() {
        for a in [0.25, 0.5, 1.0, 1.7] {
            let m = DiffusionModel::bessel(a, 1.0).unwrap();
            let q = ScaleFunction::build_quadrature(&m).unwrap();
            let c = ScaleFunction::build(&m).unwrap();
            assert!(c.is_closed_form() && !q.is_closed_form());
            assert!((q.eval(1.0) - 1.0).abs() < 1e-10);
            for i in 0..=40 {
                let x = 0.25 * 16f64.powf(i as f64 / 40.0);
                assert!(rel(q.eval(x), c.eval(x)) < 1e-6, "a={a} x={x}");
                assert!(rel(q.deriv(x), c.deriv(x)) < 1e-6, "a={a} x={x}");
                assert!((q.inverse(q.eval(x)).unwrap() - x).abs() < 1e-8);
            }
            assert!(q.eval(1e-14) < 1e-6);
        }
    }

    #[test]
    fn bm_quadrature_matches_closed_form() {
        let m = DiffusionModel::bm(0.7, 0.3).unwrap();
        let q = ScaleFunction::build_quadrature(&m).unwrap();
        let c = ScaleFunction::build(&m).unwrap();
        for i in 0..=60 {
            let x = -5.0 + 0.25 * i as f64;
            assert!(rel(q.eval(x), c.eval(x)) < 1e-6, "x={x}");
            assert!((q.inverse(c.eval(x)).unwrap() - x).abs() < 1e-8, "x={x}");
        }
        assert!((q.q(2.0) - 1.4).abs() < 1e-6);
        let y = 2f64.powi(52);
        assert!((q.inverse(y).unwrap() - c.inverse(y).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn closed_form_inverse_and_normalisation() {
        let m = DiffusionModel::bessel(0.5, 2.0).unwrap();
        let s = ScaleFunction::build(&m).unwrap();
        assert_eq!(s.eval(2.0), 1.0);
        assert!((s.inverse(1.0).unwrap() - 2.0).abs() < 1e-15);
        assert!((s.q(3.0) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn expression_closed_form() {
        let spec = super::super::model::DiffusionSpec {
            l: Some(0.0),
            r: None,
            x0: 1.0,
            alpha: "0.25/x".into(),
            sigma: "1".into(),
            scale_closed_form: Some("sqrt(x)".into()),
        };
        let m = DiffusionModel::from_spec(&spec).unwrap();
        let s = ScaleFunction::build(&m).unwrap();
        let q = ScaleFunction::build_quadrature(&m).unwrap();
        for x in [0.3, 1.0, 2.5, 9.0] {
            assert!(rel(s.eval(x), q.eval(x)) < 1e-5);
            assert!(rel(s.deriv(x), q.deriv(x)) < 1e-5);
            assert!((s.inverse(s.eval(x)).unwrap() - x).abs() < 1e-8);
        }
    }

    #[test]
    fn recurrent_model_is_rejected() {
        let m = DiffusionModel::new(
            f64::NEG_INFINITY,
            f64::INFINITY,
            0.0,
            Arc::new(|_| 0.0),
            Arc::new(|_| 1.0),
        )
        .unwrap();
        let e = ScaleFunction::build_quadrature(&m).unwrap_err();
        assert!(e.is_config(), "{e}");
        // Upward drift: s(ℓ+) = -∞.
        let upward = DiffusionModel::new(
            f64::NEG_INFINITY,
            f64::INFINITY,
            0.0,
            Arc::new(|_| 1.0),
            Arc::new(|_| 1.0),
        )
        .unwrap();
        assert!(ScaleFunction::build_quadrature(&upward).unwrap_err().is_config());
    }
}
