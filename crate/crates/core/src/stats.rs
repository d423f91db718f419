//! Goodness-of-fit tests, histogram L1 distances and the parallel Monte
//! Carlo driver.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::MonteCarloConfig;
use crate::error::{config, invalid, Error, Result};
use crate::oracles::DensityOracle;
use crate::quad::gauss_legendre;
use crate::rng::RngStream;

/// Smallest sample accepted by the KS tests.
pub const KS_MIN_N: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    samples: Vec<f64>,
    weights: Option<Vec<f64>>,
}

impl EmpiricalDistribution {
    /// Sorts a copy of `samples`; NaN is rejected.
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.iter().any(|v| v.is_nan()) {
            return invalid("sample contains NaN");
        }
        samples.sort_by(f64::total_cmp);
        Ok(EmpiricalDistribution { samples, weights: None })
    }

    /// Takes samples that must already be sorted ascending.
    pub fn from_sorted(samples: Vec<f64>) -> Result<Self> {
        if samples.iter().any(|v| v.is_nan()) || samples.windows(2).any(|w| w[0] > w[1]) {
            return invalid("sample is not sorted ascending");
        }
        Ok(EmpiricalDistribution { samples, weights: None })
    }

    /// Attaches importance weights (≥ 0), rescaled to sum to n.
    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.samples.len() {
            return invalid("weights and samples differ in length");
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return invalid("weights must be finite and >= 0");
        }
        let s: f64 = weights.iter().sum();
        if !(s > 0.0) {
            return invalid("weights sum to zero");
        }
        let k = self.samples.len() as f64 / s;
        self.weights = Some(weights.into_iter().map(|w| w * k).collect());
        Ok(self)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn n_eff(&self) -> f64 {
        match &self.weights {
            None => self.n() as f64,
            Some(w) => {
                let s2: f64 = w.iter().map(|v| v * v).sum();
                let s: f64 = w.iter().sum();
                s * s / s2
            }
        }
    }

    /// Empirical CDF jumps: (value, F just before, F at value).
    fn steps(&self) -> Vec<(f64, f64, f64)> {
        let n = self.n() as f64;
        let mut out: Vec<(f64, f64, f64)> = Vec::with_capacity(self.n());
        let mut acc = 0.0;
        for (i, &x) in self.samples.iter().enumerate() {
            let w = self.weights.as_ref().map_or(1.0, |w| w[i]);
            let before = acc;
            acc += w / n;
            match out.last_mut() {
                Some(last) if last.0 == x => last.2 = acc,
                _ => out.push((x, before, acc)),
            }
        }
        out
    }

    pub fn mean(&self) -> f64 {
        let n = self.n() as f64;
        match &self.weights {
            None => self.samples.iter().sum::<f64>() / n,
            Some(w) => self.samples.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() / n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub test: String,
    pub statistic: f64,
    /// p-value for hypothesis tests; None for distances.
    pub p_value: Option<f64>,
    pub n: usize,
    /// Threshold on the p-value (pass if above) or on the distance (pass if
    /// below).
    pub tolerance: f64,
    pub pass: bool,
    #[serde(default)]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl GofReport {
    pub fn p_test(test: impl Into<String>, statistic: f64, p: f64, n: usize, alpha: f64) -> Self {
        GofReport {
            test: test.into(),
            statistic,
            p_value: Some(p),
            n,
            tolerance: alpha,
            pass: p > alpha,
            metadata: BTreeMap::new(),
        }
    }

    /// Pass iff `distance < tolerance`.
    pub fn distance(test: impl Into<String>, distance: f64, n: usize, tolerance: f64) -> Self {
        GofReport {
            test: test.into(),
            statistic: distance,
            p_value: None,
            n,
            tolerance,
            pass: distance < tolerance,
            metadata: BTreeMap::new(),
        }
    }

    pub fn renamed(mut self, test: &str) -> Self {
        self.test = test.into();
        self
    }

    pub fn with_meta(mut self, key: &str, value: impl Serialize) -> Self {
        self.metadata.insert(key.into(), serde_json::to_value(value).unwrap_or(serde_json::Value::Null));
        self
    }
}

/// Kolmogorov survival function P[K > λ].
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if !(lambda > 0.0) {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi-theta form of the CDF, accurate for small λ.
        let c = -PI * PI / (8.0 * lambda * lambda);
        let mut s = 0.0;
        for k in 1..=20 {
            let m = (2 * k - 1) as f64;
            let term = (c * m * m).exp();
            s += term;
            if term < 1e-17 * s {
                break;
            }
        }
        return (1.0 - (2.0 * PI).sqrt() / lambda * s).clamp(0.0, 1.0);
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Asymptotic p-value of a KS statistic with Stephens' finite-n correction.
pub fn ks_p_value(d: f64, n_eff: f64) -> f64 {
    let rn = n_eff.sqrt();
    kolmogorov_sf((rn + 0.12 + 0.11 / rn) * d)
}

/// One-sample KS test against a continuous CDF; passes if p > alpha.
pub fn ks_one_sample(emp: &EmpiricalDistribution, cdf: impl Fn(f64) -> f64, alpha: f64) -> Result<GofReport> {
    if emp.n() < KS_MIN_N {
        return invalid(format!("KS needs at least {KS_MIN_N} samples, got {}", emp.n()));
    }
    let mut d: f64 = 0.0;
    for (x, before, after) in emp.steps() {
        let f = cdf(x);
        if f.is_nan() {
            return Err(Error::Numerical(format!("CDF is NaN at {x}")));
        }
        d = d.max((f - before).abs()).max((after - f).abs());
    }
    let p = ks_p_value(d, emp.n_eff());
    Ok(GofReport::p_test("ks_one_sample", d, p, emp.n(), alpha))
}

/// Two-sample KS test with effective size n1 n2 / (n1 + n2).
pub fn ks_two_sample(a: &EmpiricalDistribution, b: &EmpiricalDistribution, alpha: f64) -> Result<GofReport> {
    if a.n() < KS_MIN_N || b.n() < KS_MIN_N {
        return invalid(format!("KS needs at least {KS_MIN_N} samples per side, got {} and {}", a.n(), b.n()));
    }
    let (sa, sb) = (a.steps(), b.steps());
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb) = (0.0f64, 0.0f64);
    let mut d: f64 = 0.0;
    while i < sa.len() || j < sb.len() {
        let xa = sa.get(i).map_or(f64::INFINITY, |s| s.0);
        let xb = sb.get(j).map_or(f64::INFINITY, |s| s.0);
        let x = xa.min(xb);
        if xa == x {
            fa = sa[i].2;
            i += 1;
        }
        if xb == x {
            fb = sb[j].2;
            j += 1;
        }
        d = d.max((fa - fb).abs());
    }
    let (na, nb) = (a.n_eff(), b.n_eff());
    let p = ks_p_value(d, na * nb / (na + nb));
    Ok(GofReport::p_test("ks_two_sample", d, p, a.n() + b.n(), alpha))
}

/// Mean with its standard error.
pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, (var / n).sqrt())
}

/// Evenly spaced bin edges.
pub fn linspace_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect()
}

fn bin_of(edges: &[f64], v: f64) -> Option<usize> {
    let (lo, hi) = (edges[0], *edges.last().unwrap());
    if !(v >= lo && v < hi) {
        return None;
    }
    let k = edges.partition_point(|&e| e <= v);
    Some(k - 1)
}

fn check_edges(e: &[f64]) -> Result<()> {
    if e.len() < 2 || e.windows(2).any(|w| !(w[0] < w[1])) || e.iter().any(|v| !v.is_finite()) {
        return invalid("bin edges must be finite and strictly increasing");
    }
    Ok(())
}

/// Counts over a rectangular grid; observations outside the window are
/// tallied in `outside` and still count towards `total`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram2D {
    pub t_edges: Vec<f64>,
    pub x_edges: Vec<f64>,
    /// Row-major in t.
    pub counts: Vec<u64>,
    pub outside: u64,
    pub total: u64,
}

impl Histogram2D {
    pub fn new(t_edges: Vec<f64>, x_edges: Vec<f64>) -> Result<Self> {
        check_edges(&t_edges)?;
        check_edges(&x_edges)?;
        let cells = (t_edges.len() - 1) * (x_edges.len() - 1);
        Ok(Histogram2D { t_edges, x_edges, counts: vec![0; cells], outside: 0, total: 0 })
    }

    pub fn from_points(t_edges: Vec<f64>, x_edges: Vec<f64>, pts: &[(f64, f64)]) -> Result<Self> {
        let mut h = Self::new(t_edges, x_edges)?;
        for &(t, x) in pts {
            h.add(t, x);
        }
        Ok(h)
    }

    pub fn add(&mut self, t: f64, x: f64) {
        self.total += 1;
        let nx = self.x_edges.len() - 1;
        match (bin_of(&self.t_edges, t), bin_of(&self.x_edges, x)) {
            (Some(i), Some(j)) => self.counts[i * nx + j] += 1,
            _ => self.outside += 1,
        }
    }

    /// Counts an observation known to fall outside the window (censored).
    pub fn add_outside(&mut self) {
        self.total += 1;
        self.outside += 1;
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.t_edges.len() - 1, self.x_edges.len() - 1)
    }
}

fn gl_cell(oracle: &DensityOracle, rule: &(Vec<f64>, Vec<f64>), (a, b): (f64, f64), (c, d): (f64, f64)) -> Result<f64> {
    let (gx, gw) = rule;
    let (ca, ha) = (0.5 * (a + b), 0.5 * (b - a));
    let (cb, hb) = (0.5 * (c + d), 0.5 * (d - c));
    let mut s = 0.0;
    for p in 0..gx.len() {
        for q in 0..gx.len() {
            s += gw[p] * gw[q] * oracle.try_pdf2(ca + ha * gx[p], cb + hb * gx[q])?;
        }
    }
    Ok(s * ha * hb)
}

/// Oracle bin masses on a grid: tensor Gauss–Legendre (8 and 12 points)
/// per cell, falling back to adaptive quadrature where the two disagree.
pub fn oracle_bin_masses(oracle: &DensityOracle, t_edges: &[f64], x_edges: &[f64]) -> Result<Vec<f64>> {
    if oracle.dim() != 2 {
        return config(format!("{} is not bivariate", oracle.name));
    }
    let (r8, r12) = (gauss_legendre(8), gauss_legendre(12));
    let nt = t_edges.len() - 1;
    let nx = x_edges.len() - 1;
    let cells: Vec<Result<Vec<f64>>> = (0..nt)
        .into_par_iter()
        .map(|i| {
            let tb = (t_edges[i], t_edges[i + 1]);
            (0..nx)
                .map(|j| {
                    let xb = (x_edges[j], x_edges[j + 1]);
                    let a = gl_cell(oracle, &r8, tb, xb)?;
                    let b = gl_cell(oracle, &r12, tb, xb)?;
                    if (a - b).abs() <= 1e-9 + 1e-6 * b.abs() {
                        Ok(b)
                    } else {
                        oracle.rect_mass(tb, xb)
                    }
                })
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(nt * nx);
    for r in cells {
        out.extend(r?);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct L1Report {
    /// Σ |p̂_bin - p_bin| over the window.
    pub l1: f64,
    /// Oracle mass inside the window.
    pub coverage: f64,
    /// Empirical fraction inside the window.
    pub empirical_coverage: f64,
    /// Expected L1 of an exact sampler of the same size (multinomial noise).
    pub noise_floor: f64,
    pub n: u64,
    pub bins: (usize, usize),
}

/// Expected Σ|p̂ - p| for N multinomial draws, per-bin normal approximation.
pub fn multinomial_l1_floor(p: &[f64], n: u64) -> f64 {
    let nf = n as f64;
    p.iter().map(|&pi| (2.0 * pi.max(0.0) * (1.0 - pi).max(0.0) / (PI * nf)).sqrt()).sum()
}

/// L1 distance between a histogram and the oracle bin masses (both as
/// fractions of all observations).
pub fn l1_density_error(hist: &Histogram2D, oracle: &DensityOracle) -> Result<L1Report> {
    if hist.total == 0 {
        return invalid("histogram is empty");
    }
    let p = oracle_bin_masses(oracle, &hist.t_edges, &hist.x_edges)?;
    let n = hist.total as f64;
    let l1 = hist.counts.iter().zip(&p).map(|(&c, &pi)| (c as f64 / n - pi).abs()).sum();
    Ok(L1Report {
        l1,
        coverage: p.iter().sum(),
        empirical_coverage: 1.0 - hist.outside as f64 / n,
        noise_floor: multinomial_l1_floor(&p, hist.total),
        n: hist.total,
        bins: hist.shape(),
    })
}

/// Closed interval (lo, hi).
pub type Interval = (f64, f64);

/// Picks a window [t_lo, t_hi] × [x_lo, x_hi] holding at least `min_mass`
/// of the oracle, widening the upper ends by 1.5× up to `max_widen` times.
pub fn covering_window(
    oracle: &DensityOracle,
    t: (f64, f64),
    x: (f64, f64),
    min_mass: f64,
    max_widen: usize,
) -> Result<(Interval, Interval, f64)> {
    let (mut t, mut x) = (t, x);
    for _ in 0..=max_widen {
        let m = oracle.rect_mass(t, x)?;
        if m >= min_mass {
            return Ok((t, x, m));
        }
        t.1 = t.0 + 1.5 * (t.1 - t.0);
        x.1 = x.0 + 1.5 * (x.1 - x.0);
    }
    Err(Error::Numerical(format!(
        "{}: no window with mass >= {min_mass} after {max_widen} widenings",
        oracle.name
    )))
}

/// Full-coverage L1 on an n×n grid: window chosen by `covering_window`.
pub fn l1_full_coverage(
    oracle: &DensityOracle,
    pts: &[(f64, f64)],
    start: ((f64, f64), (f64, f64)),
    bins: usize,
) -> Result<L1Report> {
    if pts.is_empty() {
        return invalid("histogram is empty");
    }
    let (t, x, _) = covering_window(oracle, start.0, start.1, 0.99, 10)?;
    let h = Histogram2D::from_points(linspace_edges(t.0, t.1, bins), linspace_edges(x.0, x.1, bins), pts)?;
    l1_density_error(&h, oracle)
}

/// Samples plus the provenance of a driver run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct McRun<T> {
    pub samples: Vec<T>,
    pub seed: u64,
    pub n: usize,
    pub workers: usize,
    pub elapsed_secs: f64,
}

/// Runs `task(rng, i)` for i in 0..n with `RngStream::new(seed, i)`, fanned
/// out over `cfg.workers` threads; the result is in index order and does not
/// depend on the worker count.
pub fn mc_driver<T, F>(cfg: &MonteCarloConfig, task: F) -> Result<McRun<T>>
where
    T: Send,
    F: Fn(&mut RngStream, usize) -> Result<T> + Sync + Send,
{
    cfg.validate()?;
    let start = Instant::now();
    let run = || -> Result<Vec<T>> {
        (0..cfg.n_paths)
            .into_par_iter()
            .map(|i| task(&mut RngStream::new(cfg.seed, i as u64), i))
            .collect()
    };
    let samples = if cfg.workers == 1 {
        (0..cfg.n_paths).map(|i| task(&mut RngStream::new(cfg.seed, i as u64), i)).collect::<Result<Vec<T>>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
        pool.install(run)?
    };
    Ok(McRun {
        samples,
        seed: cfg.seed,
        n: cfg.n_paths,
        workers: cfg.workers,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::{bm_max_joint, exp_sup_law, ig_hitting};

    fn uniforms(seed: u64, n: usize) -> Vec<f64> {
        let mut r = RngStream::new(seed, 0);
        (0..n).map(|_| r.uniform()).collect()
    }

    #[test]
    fn kolmogorov_tails() {
        // Reference values of the limiting distribution.
        assert!((kolmogorov_sf(1.36) - 0.0494).abs() < 5e-4);
        assert!((kolmogorov_sf(1.63) - 0.0098).abs() < 3e-4);
        assert!((kolmogorov_sf(0.5) - 0.9639).abs() < 5e-4);
        assert!((kolmogorov_sf(1.18 - 1e-9) - kolmogorov_sf(1.18)).abs() < 1e-9);
    }

    #[test]
    fn identical_samples_two_sample() {
        let e = EmpiricalDistribution::new(uniforms(1, 500)).unwrap();
        let r = ks_two_sample(&e, &e, 0.01).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, Some(1.0));
    }

    #[test]
    fn uniform_passes_and_power() {
        let e = EmpiricalDistribution::new(uniforms(7, 100_000)).unwrap();
        assert!(ks_one_sample(&e, |x| x.clamp(0.0, 1.0), 0.01).unwrap().pass);
        let mut r = RngStream::new(9, 0);
        let s: Vec<f64> = (0..10_000).map(|_| r.exp1() / 2.0).collect();
        let e = EmpiricalDistribution::new(s).unwrap();
        let rep = ks_one_sample(&e, |x| 1.0 - (-x).exp(), 0.01).unwrap();
        assert!(rep.p_value.unwrap() < 1e-6);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(EmpiricalDistribution::from_sorted(vec![1.0, 0.0]).is_err());
        let e = EmpiricalDistribution::new(vec![0.5; 50]).unwrap();
        assert!(ks_one_sample(&e, |x| x, 0.01).is_err());
        let o = bm_max_joint(1.0).unwrap();
        let h = Histogram2D::new(linspace_edges(0.0, 1.0, 4), linspace_edges(0.0, 1.0, 4)).unwrap();
        assert!(l1_density_error(&h, &o).is_err());
        assert!(l1_full_coverage(&o, &[], ((0.0, 1.0), (0.0, 1.0)), 10).is_err());
    }

    #[test]
    fn weighted_sample_matches_duplicated() {
        let e = EmpiricalDistribution::new(vec![0.1, 0.2, 0.3])
            .unwrap()
            .with_weights(vec![1.0, 2.0, 1.0])
            .unwrap();
        assert!((e.mean() - 0.2).abs() < 1e-15);
    }

    /// Exact sampler of bm_max_joint: X ~ Exp(2μ), then ρ | X = x ~ IG.
    fn sample_bm_max(mu: f64, n: usize, seed: u64) -> Vec<(f64, f64)> {
        (0..n)
            .map(|i| {
                let mut r = RngStream::new(seed, i as u64);
                let x = r.exp1() / (2.0 * mu);
                let ig = ig_hitting(mu, x.max(1e-12)).unwrap();
                let u = r.uniform();
                let (mut lo, mut hi) = (0.0, 1.0);
                while ig.cdf(hi).unwrap() < u {
                    hi *= 2.0;
                }
                for _ in 0..60 {
                    let m = 0.5 * (lo + hi);
                    if ig.cdf(m).unwrap() < u {
                        lo = m;
                    } else {
                        hi = m;
                    }
                }
                (0.5 * (lo + hi), x)
            })
            .collect()
    }

    #[test]
    fn self_consistent_histograms() {
        let o = exp_sup_law(2.0).unwrap();
        let mut r = RngStream::new(11, 0);
        let n = 100_000;
        let edges = linspace_edges(0.0, 3.0, 50);
        let mut c = vec![0u64; 50];
        for _ in 0..n {
            if let Some(k) = bin_of(&edges, r.exp1() / 2.0) {
                c[k] += 1;
            }
        }
        let l1: f64 = (0..50)
            .map(|k| (c[k] as f64 / n as f64 - o.interval_mass(edges[k], edges[k + 1]).unwrap()).abs())
            .sum();
        assert!(l1 < 0.03, "{l1}");

        let joint = bm_max_joint(1.0).unwrap();
        let pts = sample_bm_max(1.0, n, 5);
        let rep = l1_full_coverage(&joint, &pts, ((0.0, 3.0), (0.0, 2.0)), 20).unwrap();
        assert!(rep.coverage >= 0.99, "{rep:?}");
        assert!(rep.l1 < 0.03, "{rep:?}");
        assert!(rep.l1 < 2.0 * rep.noise_floor, "{rep:?}");
    }

    #[test]
    fn driver_is_deterministic_across_workers() {
        let task = |r: &mut RngStream, i: usize| Ok((i, r.normal()));
        let a = mc_driver(&MonteCarloConfig::new(1000, 3, 1e-3).unwrap(), task).unwrap();
        let b = mc_driver(&MonteCarloConfig::new(1000, 3, 1e-3).unwrap().with_workers(3), task).unwrap();
        assert_eq!(a.samples, b.samples);
        assert!(a.samples.iter().enumerate().all(|(i, s)| s.0 == i));
    }
}
