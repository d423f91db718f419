//! Validation suites: each runs one family of constructions against its
//! oracles and returns a list of pass/fail checks.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::MonteCarloConfig;
use crate::diffusion::{self, DiffusionModel, LocalTimeEstimator, ScaleFunction, Tilt, TiltedDiffusion};
use crate::discrete_time::{
    canonical_pair, dominance_check, martingale_residual, numeraire_check, pair_identity_residual,
    q_measure, random_adapted, random_monotone_fn, random_supermartingale, shipped_corpus, verify_pair_identity,
    CorpusEntry, RhoKind, TreeCorpus,
};
use crate::error::{config, Error, Result};
use crate::finite_horizon::{
    big_f, big_f_integral, canonical_pair_last, canonical_pair_max, f_mu, probe_g_monotonicity, simulate_p,
    simulate_q_max, tau_g_min, FiniteHorizonSpec, SingularDriftPolicy,
};
use crate::levy::{self, simulate::DEFAULT_DELTA, JumpSampler, LevyModel};
use crate::oracles::{
    bessel_max_joint, bm_lastexit_joint, bm_lastexit_rho, bm_max_joint, exp_sup_law, pareto_sup,
};
use crate::rng::RngStream;
use crate::stats::{
    ks_one_sample, ks_two_sample, l1_density_error, l1_full_coverage, linspace_edges, mc_driver, mean_se,
    EmpiricalDistribution, GofReport, Histogram2D, L1Report,
};

/// Significance level of the statistical gates.
pub const ALPHA: f64 = 0.01;
/// L1 tolerance of the histogram gates.
pub const L1_TOL: f64 = 0.05;
/// Tolerance of the exact discrete identities.
pub const EXACT_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Discrete,
    LevyMax,
    LevyLastExit,
    DiffusionMax,
    DiffusionLastExit,
    FiniteHorizonMax,
    FiniteHorizonLast,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Discrete,
        Suite::LevyMax,
        Suite::LevyLastExit,
        Suite::DiffusionMax,
        Suite::DiffusionLastExit,
        Suite::FiniteHorizonMax,
        Suite::FiniteHorizonLast,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Discrete => "discrete",
            Suite::LevyMax => "levy_max",
            Suite::LevyLastExit => "levy_last_exit",
            Suite::DiffusionMax => "diffusion_max",
            Suite::DiffusionLastExit => "diffusion_last_exit",
            Suite::FiniteHorizonMax => "finite_horizon_max",
            Suite::FiniteHorizonLast => "finite_horizon_last",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL.into_iter().find(|v| v.name() == s).ok_or_else(|| {
            let names: Vec<_> = Suite::ALL.iter().map(|v| v.name()).collect();
            Error::Config(format!("unknown suite {s}; known: {}", names.join(", ")))
        })
    }
}

/// Sample sizes and numerics of a suite run. `n_cross` is the size of the
/// two-sample comparisons (default n/5).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub n: usize,
    pub n_cross: usize,
    pub dt: f64,
    pub seed: u64,
    pub workers: usize,
    pub estimator: LocalTimeEstimator,
}

impl SuiteConfig {
    pub fn new(n: usize, dt: f64, seed: u64) -> Self {
        SuiteConfig { n, n_cross: (n / 5).max(100), dt, seed, workers: 1, estimator: LocalTimeEstimator::Tanaka }
    }

    fn mc(&self, n: usize, seed_offset: u64) -> Result<MonteCarloConfig> {
        Ok(MonteCarloConfig::new(n, self.seed.wrapping_add(seed_offset), self.dt)?.with_workers(self.workers))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub pass: bool,
    pub checks: Vec<GofReport>,
    pub config: SuiteConfig,
    pub elapsed_secs: f64,
}

impl SuiteReport {
    pub fn check(&self, name: &str) -> Option<&GofReport> {
        self.checks.iter().find(|c| c.test == name)
    }
}

pub fn run_suite(suite: Suite, cfg: &SuiteConfig) -> Result<SuiteReport> {
    if cfg.n == 0 || cfg.n_cross == 0 {
        return config("sample sizes must be positive");
    }
    let start = Instant::now();
    let checks = match suite {
        Suite::Discrete => discrete_checks(&shipped_corpus()?, cfg.seed)?,
        Suite::LevyMax => levy_max(cfg)?,
        Suite::LevyLastExit => levy_last_exit(cfg)?,
        Suite::DiffusionMax => diffusion_max(cfg)?,
        Suite::DiffusionLastExit => diffusion_last_exit(cfg)?,
        Suite::FiniteHorizonMax => finite_horizon_max(cfg)?,
        Suite::FiniteHorizonLast => finite_horizon_last(cfg)?,
    };
    Ok(SuiteReport {
        suite,
        pass: checks.iter().all(|c| c.pass),
        checks,
        config: cfg.clone(),
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}

fn exact(name: &str, residual: f64, n: usize, tol: f64) -> GofReport {
    GofReport::distance(name, residual, n, tol * (1.0 + f64::EPSILON))
}

fn sorted(v: Vec<f64>) -> Result<EmpiricalDistribution> {
    EmpiricalDistribution::new(v)
}

fn l1_check(name: &str, rep: &L1Report) -> GofReport {
    GofReport::distance(name, rep.l1, rep.n as usize, L1_TOL)
        .with_meta("noise_floor", rep.noise_floor)
        .with_meta("coverage", rep.coverage)
        .with_meta("empirical_coverage", rep.empirical_coverage)
        .with_meta("bins", rep.bins)
}

/// Q[ρ = ζ0] when P[ρ = ζ0 | F_ζ0] ∈ {0, 1} everywhere, None otherwise.
pub fn zeta0_mass(e: &CorpusEntry, q: &[f64], zeta0: &[usize]) -> Option<f64> {
    let tree = &e.tree;
    for w in 0..tree.n_outcomes() {
        let t = zeta0[w];
        let c = tree.cell_of(t, w);
        let members = tree.members(t, c);
        let den: f64 = members.iter().map(|&v| tree.p[v]).sum();
        let num: f64 = members.iter().filter(|&&v| e.rho.rho[v] == zeta0[v]).map(|&v| tree.p[v]).sum();
        let r = num / den;
        if r > 1e-14 && r < 1.0 - 1e-14 {
            return None;
        }
    }
    Some((0..tree.n_outcomes()).filter(|&w| e.rho.rho[w] == zeta0[w]).map(|w| q[w]).sum())
}

/// Last time of the maximum on a tree where every node has a child with
/// X_t ≥ X_{t-1}.
pub fn last_max_hypothesis(e: &CorpusEntry) -> bool {
    if e.kind != RhoKind::LastMax {
        return false;
    }
    let tree = &e.tree;
    (1..=tree.horizon).all(|t| {
        (0..tree.n_cells(t - 1)).all(|c| tree.children(t - 1, c).iter().any(|&d| tree.x[t][d] >= tree.x[t - 1][c]))
    })
}

/// Exact identities on a tree corpus: pair identity for 100 V per tree,
/// Z = L(1-K), the martingale property of L, the Q-mass of {ρ = ζ0} and
/// {ρ = T}, the dominance sandwich and the numéraire bound.
pub fn discrete_checks(corpus: &TreeCorpus, seed: u64) -> Result<Vec<GofReport>> {
    let start = Instant::now();
    let (mut ident, mut zl, mut mart) = (0.0f64, 0.0f64, 0.0f64);
    let (mut zeta_dev, mut zeta_n, mut last_dev, mut last_n) = (0.0f64, 0usize, 0.0f64, 0usize);
    let (mut dom_viol, mut num_max) = (0.0f64, f64::NEG_INFINITY);
    let mut t_ident = 0.0;
    let mut t_q = 0.0;
    let mut t_dom = 0.0;
    for e in &corpus.entries {
        let s0 = Instant::now();
        let pair = canonical_pair(&e.tree, &e.rho)?;
        let mut rng = RngStream::new(seed, e.id as u64);
        for _ in 0..100 {
            let v = random_adapted(&e.tree, &mut rng);
            ident = ident.max(verify_pair_identity(&e.tree, &e.rho, &pair, &v)?);
        }
        zl = zl.max(pair_identity_residual(&e.tree, &pair));
        mart = mart.max(martingale_residual(&e.tree, &pair));
        let s1 = Instant::now();
        t_ident += (s1 - s0).as_secs_f64();
        let q = q_measure(&e.tree, &pair);
        if let Some(m) = zeta0_mass(e, &q, &pair.zeta0) {
            zeta_dev = zeta_dev.max((1.0 - m).abs());
            zeta_n += 1;
        }
        if last_max_hypothesis(e) {
            let big_t = e.tree.horizon;
            let m: f64 = (0..e.tree.n_outcomes()).filter(|&w| e.rho.rho[w] == big_t).map(|w| q[w]).sum();
            last_dev = last_dev.max((1.0 - m).abs());
            last_n += 1;
        }
        let s2 = Instant::now();
        t_q += (s2 - s1).as_secs_f64();
        for _ in 0..20 {
            let f = random_monotone_fn(&mut rng);
            let d = dominance_check(&e.tree, &e.rho, &pair, &f);
            dom_viol = dom_viol.max(d.lower - d.integral).max(d.integral - d.upper);
        }
        for _ in 0..50 {
            let s = random_supermartingale(&e.tree, &mut rng);
            num_max = num_max.max(numeraire_check(&e.tree, &e.rho, &pair, &s)?.value);
        }
        t_dom += s2.elapsed().as_secs_f64();
    }
    let n = corpus.entries.len();
    Ok(vec![
        exact("pair_identity", ident, n * 100, EXACT_TOL).with_meta("secs", t_ident),
        exact("z_equals_l_one_minus_k", zl, n, EXACT_TOL),
        exact("l_martingale", mart, n, EXACT_TOL),
        exact("q_rho_equals_zeta0", zeta_dev, zeta_n, EXACT_TOL).with_meta("trees", zeta_n).with_meta("secs", t_q),
        exact("q_rho_equals_horizon", last_dev, last_n, EXACT_TOL).with_meta("trees", last_n),
        exact("dominance_sandwich", dom_viol.max(0.0), n * 20, EXACT_TOL).with_meta("secs", t_dom),
        exact("numeraire_bound", (num_max - 1.0).max(0.0), n * 50, EXACT_TOL).with_meta("max_value", num_max),
        GofReport::distance("discrete_runtime", start.elapsed().as_secs_f64(), n, f64::INFINITY),
    ])
}

/// Closed form of E[e^{-aρ - bX_ρ}] for BM with drift -μ.
pub fn bm_laplace(mu: f64, a: f64, b: f64) -> f64 {
    2.0 * mu / (b + mu + (mu * mu + 2.0 * a).sqrt())
}

/// Two-step samples (ρ, X_ρ, K_ρ) for W_t - μt; censored paths are
/// returned with ρ = NaN.
pub fn levy_bm_two_step(mu: f64, mc: &MonteCarloConfig) -> Result<Vec<(f64, f64, f64)>> {
    let tilted = LevyModel::bm(mu)?.tilt()?;
    let js = JumpSampler::new(tilted.simulation_model()?, DEFAULT_DELTA)?;
    let q = tilted.q;
    let run = mc_driver(mc, |rng, _| {
        let r = levy::simulate::two_step_with(&js, q, mc, false, rng)?;
        Ok((r.rho, r.x_rho, r.k_rho))
    })?;
    Ok(run.samples)
}

/// Direct P-argmax samples to horizon H: (X^↑, ρ, discarded).
pub fn levy_bm_direct(mu: f64, horizon: f64, mc: &MonteCarloConfig) -> Result<Vec<(f64, f64, bool)>> {
    let model = LevyModel::bm(mu)?;
    let q = model.find_q()?;
    let run = mc_driver(mc, |rng, _| {
        let r = levy::direct_p_maximum(&model, q, horizon, DEFAULT_DELTA, mc.dt, rng)?;
        Ok((r.x_max, r.argmax_t, r.discarded))
    })?;
    Ok(run.samples)
}

fn levy_max(cfg: &SuiteConfig) -> Result<Vec<GofReport>> {
    let mu = 1.0;
    let mut out = Vec::new();
    let start = Instant::now();
    let s = levy_bm_two_step(mu, &cfg.mc(cfg.n, 0)?)?;
    let censored = s.iter().filter(|v| v.0.is_nan()).count();
    let secs = start.elapsed().as_secs_f64();
    let exp2 = exp_sup_law(2.0 * mu)?;
    let xs = sorted(s.iter().map(|v| v.1).collect())?;
    out.push(ks_one_sample(&xs, |x| exp2.cdf(x).unwrap_or(f64::NAN), ALPHA)?.renamed("sup_vs_exponential").with_meta("secs", secs));
    let ks = sorted(s.iter().map(|v| v.2).collect())?;
    out.push(ks_one_sample(&ks, |u| u.clamp(0.0, 1.0), ALPHA)?.renamed("k_rho_uniform"));

    let pts: Vec<(f64, f64)> = s.iter().filter(|v| !v.0.is_nan()).map(|v| (v.0, v.1)).collect();
    let joint = bm_max_joint(mu)?;
    let mut rep = l1_full_coverage(&joint, &pts, ((0.0, 5.0), (0.0, 3.0)), 50)?;
    rep.n = s.len() as u64;
    out.push(l1_check("joint_l1", &rep).with_meta("censored", censored));

    for a in [0.0, 0.5, 1.0] {
        for b in [0.0, 0.5, 1.0] {
            let v: Vec<f64> = s.iter().map(|v| if v.0.is_nan() { 0.0 } else { (-a * v.0 - b * v.1).exp() }).collect();
            let (m, se) = mean_se(&v);
            let target = bm_laplace(mu, a, b);
            let dev = (m - target).abs();
            out.push(
                GofReport::distance(format!("laplace_a{a}_b{b}"), dev, v.len(), 3.0 * se + 1e-12)
                    .with_meta("estimate", m)
                    .with_meta("target", target)
                    .with_meta("se", se),
            );
        }
    }

    let start = Instant::now();
    let horizon = 15.0;
    let d = levy_bm_direct(mu, horizon, &cfg.mc(cfg.n_cross, 1)?)?;
    let discard = d.iter().filter(|v| v.2).count() as f64 / d.len() as f64;
    let kept: Vec<_> = d.iter().filter(|v| !v.2).collect();
    let secs = start.elapsed().as_secs_f64();
    let q_part: Vec<_> = s.iter().take(cfg.n_cross).filter(|v| !v.0.is_nan()).collect();
    let dx = sorted(kept.iter().map(|v| v.0).collect())?;
    let qx = sorted(q_part.iter().map(|v| v.1).collect())?;
    out.push(
        ks_two_sample(&dx, &qx, ALPHA)?
            .renamed("two_scheme_sup")
            .with_meta("discard_rate", discard)
            .with_meta("horizon", horizon)
            .with_meta("secs", secs),
    );
    let dr = sorted(kept.iter().map(|v| v.1).collect())?;
    let qr = sorted(q_part.iter().map(|v| v.0).collect())?;
    out.push(ks_two_sample(&dr, &qr, ALPHA)?.renamed("two_scheme_rho"));
    out.push(GofReport::distance("two_scheme_discard_rate", discard, d.len(), 1e-3));
    Ok(out)
}

/// (ρ, Λ) samples of the BM last exit through the bang-bang construction.
pub fn levy_bm_last_exit(
    mu: f64,
    level: f64,
    estimator: LocalTimeEstimator,
    mc: &MonteCarloConfig,
) -> Result<Vec<(f64, f64, bool)>> {
    let run = mc_driver(mc, |rng, _| {
        let r = levy::bm_last_exit_construct(mu, level, estimator, mc, false, rng)?;
        Ok((r.rho, r.lambda, r.flagged))
    })?;
    Ok(run.samples)
}

/// (ρ, Λ) samples of the BM last exit through the diffusion construction.
pub fn diffusion_bm_last_exit(
    mu: f64,
    level: f64,
    estimator: LocalTimeEstimator,
    mc: &MonteCarloConfig,
) -> Result<Vec<(f64, f64, bool)>> {
    let td = TiltedDiffusion::new(DiffusionModel::bm(mu, 0.0)?, Tilt::LastExit { level })?;
    let run = mc_driver(mc, |rng, _| {
        let r = diffusion::two_step_last_exit(&td, estimator, mc, false, rng)?;
        Ok((r.rho, r.lambda, r.flagged))
    })?;
    Ok(run.samples)
}

fn last_exit_checks(
    prefix: &str,
    s: &[(f64, f64, bool)],
    mu: f64,
    level: f64,
    secs: f64,
) -> Result<Vec<GofReport>> {
    let flagged = s.iter().filter(|v| v.2).count();
    let censored = s.iter().filter(|v| v.0.is_nan()).count();
    let rho = bm_lastexit_rho(mu, level)?;
    let rs = sorted(s.iter().filter(|v| !v.0.is_nan()).map(|v| v.0).collect())?;
    let ks = ks_one_sample(&rs, |t| rho.cdf(t).unwrap_or(f64::NAN), ALPHA)?
        .renamed(&format!("{prefix}rho_ks"))
        .with_meta("secs", secs)
        .with_meta("flagged", flagged)
        .with_meta("censored", censored);
    let joint = bm_lastexit_joint(mu, level)?;
    let pts: Vec<(f64, f64)> = s.iter().filter(|v| !v.0.is_nan()).map(|v| (v.0, v.1)).collect();
    let mut rep = l1_full_coverage(&joint, &pts, ((0.0, 5.0), (0.0, 4.0)), 50)?;
    rep.n = s.len() as u64;
    Ok(vec![ks, l1_check(&format!("{prefix}joint_l1"), &rep)])
}

fn levy_last_exit(cfg: &SuiteConfig) -> Result<Vec<GofReport>> {
    let (mu, level) = (1.0, -0.5);
    let start = Instant::now();
    let s = levy_bm_last_exit(mu, level, cfg.estimator, &cfg.mc(cfg.n, 2)?)?;
    let mut out = last_exit_checks("", &s, mu, level, start.elapsed().as_secs_f64())?;
    let start = Instant::now();
    let d = diffusion_bm_last_exit(mu, level, cfg.estimator, &cfg.mc(cfg.n_cross, 3)?)?;
    let a = sorted(s.iter().take(cfg.n_cross).filter(|v| !v.0.is_nan()).map(|v| v.0).collect())?;
    let b = sorted(d.iter().filter(|v| !v.0.is_nan()).map(|v| v.0).collect())?;
    out.push(ks_two_sample(&a, &b, ALPHA)?.renamed("cross_module_rho").with_meta("secs", start.elapsed().as_secs_f64()));
    Ok(out)
}

fn diffusion_last_exit(cfg: &SuiteConfig) -> Result<Vec<GofReport>> {
    let (mu, level) = (1.0, -0.5);
    let start = Instant::now();
    let s = diffusion_bm_last_exit(mu, level, cfg.estimator, &cfg.mc(cfg.n, 4)?)?;
    last_exit_checks("", &s, mu, level, start.elapsed().as_secs_f64())
}

/// Explicit window of the Bessel joint check.
pub const BESSEL_WINDOW: ((f64, f64), (f64, f64)) = ((0.05, 5.0), (1.05, 4.0));
/// Horizon cap of the Bessel Q-paths; later hits fall outside the window.
pub const BESSEL_CAP: f64 = 10.0;

/// Largest relative error of the quadrature scale function against the
/// closed form on a probe grid of the model.
pub fn scale_quadrature_error(model: &DiffusionModel) -> Result<f64> {
    let closed = ScaleFunction::build(model)?;
    if !closed.is_closed_form() {
        return config("model has no closed-form scale function");
    }
    let quad = ScaleFunction::build_quadrature(model)?;
    let mut worst: f64 = 0.0;
    for x in model.probe_grid(400) {
        let (a, b) = (quad.eval(x), closed.eval(x));
        worst = worst.max((a - b).abs() / b.abs().max(1e-300));
    }
    Ok(worst)
}

fn diffusion_max(cfg: &SuiteConfig) -> Result<Vec<GofReport>> {
    let (a, x0) = (0.5, 1.0);
    let model = DiffusionModel::bessel(a, x0)?;
    let mut out = vec![exact("scale_quadrature", scale_quadrature_error(&model)?, 400, 1e-6)];
    let td = TiltedDiffusion::new(model, Tilt::Maximum)?;
    let mc = cfg.mc(cfg.n, 5)?.with_horizon_cap(BESSEL_CAP);
    let start = Instant::now();
    let run = mc_driver(&mc, |rng, _| {
        let r = diffusion::two_step_maximum(&td, &mc, false, rng)?;
        Ok((r.rho, r.x_rho))
    })?;
    let secs = start.elapsed().as_secs_f64();
    let s = run.samples;
    let pareto = pareto_sup(a, x0)?;
    let xs = sorted(s.iter().map(|v| v.1).collect())?;
    out.push(ks_one_sample(&xs, |x| pareto.cdf(x).unwrap_or(f64::NAN), ALPHA)?.renamed("sup_vs_pareto").with_meta("secs", secs));
    let joint = bessel_max_joint(a, x0)?;
    let (tw, xw) = BESSEL_WINDOW;
    let mut h = Histogram2D::new(linspace_edges(tw.0, tw.1, 50), linspace_edges(xw.0, xw.1, 50))?;
    let mut censored = 0;
    for &(rho, x) in &s {
        if rho.is_nan() {
            censored += 1;
            h.add_outside();
        } else {
            h.add(rho, x);
        }
    }
    let rep = l1_density_error(&h, &joint)?;
    out.push(
        l1_check("joint_l1_window", &rep)
            .with_meta("censored", censored)
            .with_meta("horizon_cap", BESSEL_CAP)
            .with_meta("series_tail_bound", joint.truncation.as_ref().map(|t| t.tail_bound)),
    );
    Ok(out)
}

/// Checkpoints (fractions of T) for E[L_t] = 1.
pub const L_CHECKPOINTS: [f64; 3] = [0.25, 0.5, 0.9];

/// K at the argmax: the full Stieltjes sum Σ f(T - t_{i-1}) Δm_i, including
/// the last step.
fn k_at_argmax(spec: &FiniteHorizonSpec, path: &crate::path::SamplePath) -> Result<f64> {
    let mut acc = 0.0;
    for i in 1..path.len() {
        let dm = path.running_max[i] - path.running_max[i - 1];
        if dm > 0.0 {
            acc += f_mu(spec.mu, spec.t_end - path.t[i - 1])? * dm;
        }
    }
    Ok(-(-acc).exp_m1())
}

fn l_mean_checks(name: &str, ls: &[[f64; 3]], t_end: f64) -> Vec<GofReport> {
    L_CHECKPOINTS
        .iter()
        .enumerate()
        .map(|(j, &c)| {
            let v: Vec<f64> = ls.iter().map(|l| l[j]).collect();
            let (m, se) = mean_se(&v);
            GofReport::distance(format!("{name}_t{}", c * t_end), (m - 1.0).abs(), v.len(), 3.0 * se)
                .with_meta("mean", m)
                .with_meta("se", se)
        })
        .collect()
}

fn function_family_checks() -> Result<Vec<GofReport>> {
    let mut dual: f64 = 0.0;
    for mu in [-1.0, 1.0] {
        for i in 0..50 {
            for j in 0..50 {
                let tau = 0.02 + 0.1 * i as f64;
                let z = 0.05 + 0.08 * j as f64;
                dual = dual.max((big_f(mu, tau, z)? - big_f_integral(mu, tau, z)?).abs());
            }
        }
    }
    let mut tau_g: f64 = f64::NEG_INFINITY;
    for w in [0.5, 1.0, 2.0] {
        for mu in [-1.0, 0.0, 1.0] {
            tau_g = tau_g.max(w - 0.01 - tau_g_min(mu, 1e-6, w)?);
        }
    }
    let probe = probe_g_monotonicity(&[-1.0, -0.2, 0.0, 0.2, 1.0], &linspace_edges(0.05, 3.0, 30), &linspace_edges(0.0, 3.0, 30));
    Ok(vec![
        exact("f_dual_representation", dual, 5000, 1e-8),
        GofReport::distance("tau_g_lower_bound", tau_g.max(0.0), 9, 1e-15)
            .with_meta("g_probe_tau_violations", probe.tau_violations)
            .with_meta("g_probe_z_violations", probe.z_violations)
            .with_meta("g_probe_min", probe.min_g),
    ])
}

fn finite_horizon_max(cfg: &SuiteConfig) -> Result<Vec<GofReport>> {
    let spec = FiniteHorizonSpec::new(1.0, 1.0, None)?;
    let mut out = function_family_checks()?;
    let pol = SingularDriftPolicy::with_defaults(cfg.dt.max(1e-4), spec.t_end)?;
    let nq = cfg.n.min(1000);
    let qrun = mc_driver(&cfg.mc(nq, 6)?, |rng, _| Ok(simulate_q_max(&spec, &pol, rng)?.min_drift))?;
    let min_g = qrun.samples.iter().cloned().fold(f64::INFINITY, f64::min);
    out.push(GofReport::distance("q_drift_nonnegative", (-min_g).max(0.0), nq, 1e-10).with_meta("min_drift", min_g));

    let start = Instant::now();
    let run = mc_driver(&cfg.mc(cfg.n, 7)?, |rng, _| {
        let p = simulate_p(&spec, cfg.dt, None, LocalTimeEstimator::default(), rng)?;
        let pair = canonical_pair_max(&spec, &p.path)?;
        let mut ls = [0.0; 3];
        for (j, c) in L_CHECKPOINTS.iter().enumerate() {
            ls[j] = pair.at(c * spec.t_end).map_or(f64::NAN, |v| v.2);
        }
        Ok((ls, k_at_argmax(&spec, &p.path)?, pair.identity_residual()))
    })?;
    let secs = start.elapsed().as_secs_f64();
    let ls: Vec<[f64; 3]> = run.samples.iter().map(|v| v.0).collect();
    out.extend(l_mean_checks("max_l_mean", &ls, spec.t_end));
    let ks = sorted(run.samples.iter().map(|v| v.1).collect())?;
    out.push(ks_one_sample(&ks, |u| u.clamp(0.0, 1.0), ALPHA)?.renamed("k_at_argmax_uniform").with_meta("secs", secs));
    let resid = run.samples.iter().map(|v| v.2).fold(0.0, f64::max);
    out.push(exact("max_pair_identity", resid, cfg.n, 1e-10));
    Ok(out)
}

fn finite_horizon_last(cfg: &SuiteConfig) -> Result<Vec<GofReport>> {
    let level = -0.5;
    let spec = FiniteHorizonSpec::new(1.0, 1.0, Some(level))?;
    let start = Instant::now();
    let run = mc_driver(&cfg.mc(cfg.n, 8)?, |rng, _| {
        let p = simulate_p(&spec, cfg.dt, Some(level), cfg.estimator, rng)?;
        let pair = canonical_pair_last(&spec, &p.path)?;
        let mut ls = [0.0; 3];
        for (j, c) in L_CHECKPOINTS.iter().enumerate() {
            ls[j] = pair.at(c * spec.t_end).map_or(f64::NAN, |v| v.2);
        }
        Ok((ls, pair.identity_residual(), pair.k[0], pair.z[0]))
    })?;
    let secs = start.elapsed().as_secs_f64();
    let ls: Vec<[f64; 3]> = run.samples.iter().map(|v| v.0).collect();
    let mut out = l_mean_checks("last_l_mean", &ls, spec.t_end);
    if let Some(first) = out.first_mut() {
        first.metadata.insert("secs".into(), secs.into());
    }
    let resid = run.samples.iter().map(|v| v.1).fold(0.0, f64::max);
    out.push(exact("last_pair_identity", resid, cfg.n, 1e-10));
    let k0 = run.samples.iter().map(|v| (v.3 - (1.0 - v.2)).abs()).fold(0.0, f64::max);
    out.push(exact("last_z0_equals_one_minus_k0", k0, cfg.n, 1e-12));
    Ok(out)
}
