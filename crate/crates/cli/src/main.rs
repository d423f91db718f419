#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::{SecondsFormat, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use randtime_core::diffusion::{self, DiffusionModel, LocalTimeEstimator, Tilt, TiltedDiffusion};
use randtime_core::discrete_time::{
    canonical_pair, dominance_check, generate_corpus, martingale_residual, numeraire_check, pair_identity_residual,
    random_adapted, random_monotone_fn, random_supermartingale, shipped_corpus, verify_pair_identity, CorpusEntry,
    FiniteTree, RandomTimeSpec, RhoKind, TreeCorpus,
};
use randtime_core::finite_horizon::{simulate_q_last, simulate_q_max, FiniteHorizonSpec, SingularDriftPolicy};
use randtime_core::levy::{self, simulate::DEFAULT_DELTA, LevyModel};
use randtime_core::oracles;
use randtime_core::stats::mc_driver;
use randtime_core::validation::{run_suite, Suite, SuiteConfig};
use randtime_core::{Error, MonteCarloConfig};

const AFTER_HELP: &str = "\
Suites: discrete, levy_max, levy_last_exit, diffusion_max, diffusion_last_exit,
        finite_horizon_max, finite_horizon_last

Model files (JSON):
  Levy        {\"alpha\": -1, \"sigma2\": 1, \"jumps\": {\"family\": \"none\"}}
              jumps families: none | gamma {c, lambda} | tempered_stable {c, lambda, p}
                              | custom {theta, dtheta} (expressions in z; no simulation)
  Diffusion   {\"l\": 0, \"r\": null, \"x0\": 1, \"alpha\": \"bessel(0.5)\", \"sigma\": \"1\",
               \"scale_closed_form\": null}
              alpha/sigma are expressions in x or the builtins bessel(a), bm(mu)
  Finite BM   {\"mu\": 1, \"T\": 1}
An optional \"kind\": \"levy\" | \"diffusion\" | \"finite_bm\" overrides detection.

Oracles: exp_sup(q), uniform, pareto_sup(a, x0), bm_max_joint(mu), bm_max_rho(mu),
         ig_hitting(mu, x), bm_lastexit_joint(mu, x), bm_lastexit_rho(mu, x),
         bessel_max_joint(a, x0)

Exit codes: 0 success, 1 validation failure, 2 configuration or runtime error.
Every file written with --out gets a <out>.manifest.json beside it.";

#[derive(Parser, Debug)]
#[command(name = "randtime", version, about = "Simulate and validate random times and their canonical pairs")]
#[command(after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Time of the overall maximum via the two-step construction.
    SimulateMax(SimArgs),
    /// Last exit time of a level (Lévy BM or diffusion model).
    SimulateLastExit(LastArgs),
    /// Last passage time on a finite horizon (finite BM model).
    SimulateLastPassage(LastArgs),
    /// Run a validation suite and write a JSON report.
    Validate(ValidateArgs),
    /// Tabulate an oracle density on a grid.
    Density(DensityArgs),
    /// Exact identities on a tree corpus.
    DiscreteVerify(DiscreteArgs),
    /// Write a random tree corpus.
    GenTrees(GenArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
struct McArgs {
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Cap on simulated time per path.
    #[arg(long, default_value_t = 1e3)]
    horizon_cap: f64,
}

#[derive(Args, Debug, Serialize)]
struct SimArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    mc: McArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
enum LocalTime {
    Band,
    Tanaka,
}

impl From<LocalTime> for LocalTimeEstimator {
    fn from(v: LocalTime) -> Self {
        match v {
            LocalTime::Band => LocalTimeEstimator::Band { eps: None },
            LocalTime::Tanaka => LocalTimeEstimator::Tanaka,
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct LastArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    level: f64,
    #[arg(long, value_enum, default_value_t = LocalTime::Band)]
    local_time: LocalTime,
    #[command(flatten)]
    mc: McArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct ValidateArgs {
    #[arg(long)]
    suite: String,
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    /// Size of the two-sample comparisons (default n/5).
    #[arg(long)]
    n_cross: Option<usize>,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, value_enum, default_value_t = LocalTime::Tanaka)]
    local_time: LocalTime,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct DensityArgs {
    #[arg(long)]
    oracle: String,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    x: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    x0: Option<f64>,
    /// `x=lo:hi:n` for 1-D oracles, `t=lo:hi:n,x=lo:hi:n` for 2-D ones.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct DiscreteArgs {
    /// Tree corpus JSON, or a single {"tree": ..., "rho": [...]} object;
    /// the shipped corpus when omitted.
    #[arg(long)]
    trees: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct GenArgs {
    #[arg(long, default_value_t = randtime_core::discrete_time::CORPUS_SEED)]
    seed: u64,
    #[arg(long, default_value_t = randtime_core::discrete_time::CORPUS_SIZE)]
    size: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Validation(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Config(e.to_string())
    }
}

type CliResult<T> = Result<T, Failure>;

#[derive(Serialize)]
struct RunManifest<'a, C: Serialize> {
    subcommand: &'a str,
    model_file: Option<String>,
    model_sha256: Option<String>,
    config: &'a C,
    seed: Option<u64>,
    tool_version: &'a str,
    started: String,
    finished: String,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))
}

fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

/// Writes `body` to `out` (or stdout) and, for files, the manifest beside it.
fn emit<C: Serialize>(
    out: Option<&Path>,
    body: &str,
    subcommand: &str,
    model: Option<(&Path, &str)>,
    config: &C,
    seed: Option<u64>,
    started: String,
) -> CliResult<()> {
    let Some(out) = out else {
        io::stdout().write_all(body.as_bytes()).map_err(|e| Failure::Config(e.to_string()))?;
        return Ok(());
    };
    let write = |p: &Path, s: &str| fs::write(p, s).map_err(|e| Failure::Config(format!("cannot write {}: {e}", p.display())));
    write(out, body)?;
    let m = RunManifest {
        subcommand,
        model_file: model.map(|(p, _)| p.display().to_string()),
        model_sha256: model.map(|(_, text)| sha256_hex(text)),
        config,
        seed,
        tool_version: env!("CARGO_PKG_VERSION"),
        started,
        finished: now(),
    };
    let text = serde_json::to_string_pretty(&m).map_err(|e| Failure::Config(e.to_string()))?;
    write(&manifest_path(out), &(text + "\n"))
}

enum Model {
    Levy(LevyModel),
    Diffusion(Box<DiffusionModel>),
    FiniteBm(FiniteHorizonSpec),
}

fn load_model(path: &Path) -> CliResult<(Model, String)> {
    let text = read_file(path)?;
    let v: Value = serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let mut obj = v.as_object().cloned().ok_or_else(|| Failure::Config(format!("{}: expected a JSON object", path.display())))?;
    let kind = match obj.remove("kind") {
        Some(Value::String(k)) => k,
        Some(other) => return Err(Failure::Config(format!("kind must be a string, got {other}"))),
        None if obj.contains_key("T") => "finite_bm".into(),
        None if obj.get("alpha").is_some_and(Value::is_number) => "levy".into(),
        None => "diffusion".into(),
    };
    let body = Value::Object(obj).to_string();
    let model = match kind.as_str() {
        "levy" => Model::Levy(LevyModel::from_json(&body)?),
        "diffusion" => Model::Diffusion(Box::new(DiffusionModel::from_json(&body)?)),
        "finite_bm" => {
            let spec: FiniteHorizonSpec = serde_json::from_str(&body).map_err(|e| Failure::Config(e.to_string()))?;
            spec.validate()?;
            Model::FiniteBm(spec)
        }
        other => return Err(Failure::Config(format!("unknown model kind {other}"))),
    };
    Ok((model, text))
}

fn mc_config(a: &McArgs) -> CliResult<MonteCarloConfig> {
    Ok(MonteCarloConfig::new(a.n, a.seed, a.dt)?.with_workers(a.workers).with_horizon_cap(a.horizon_cap))
}

fn f(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

fn simulate_max(a: &SimArgs) -> CliResult<()> {
    let started = now();
    let (model, text) = load_model(&a.model)?;
    let cfg = mc_config(&a.mc)?;
    let mut csv = String::new();
    match model {
        Model::Levy(m) => {
            let tilted = m.tilt()?;
            let run = mc_driver(&cfg, |rng, _| levy::two_step_maximum(&tilted, DEFAULT_DELTA, &cfg, false, rng))?;
            csv.push_str("index,rho,x_rho,k_rho,censored\n");
            for (i, r) in run.samples.iter().enumerate() {
                csv.push_str(&format!("{i},{},{},{},{}\n", f(r.rho), r.x_rho, r.k_rho, r.censored as u8));
            }
        }
        Model::Diffusion(m) => {
            let td = TiltedDiffusion::new(*m, Tilt::Maximum)?;
            let run = mc_driver(&cfg, |rng, _| diffusion::two_step_maximum(&td, &cfg, false, rng))?;
            csv.push_str("index,rho,x_rho,censored,boundary_steps\n");
            for (i, r) in run.samples.iter().enumerate() {
                csv.push_str(&format!("{i},{},{},{},{}\n", f(r.rho), r.x_rho, r.censored as u8, r.boundary_steps));
            }
        }
        Model::FiniteBm(spec) => {
            let pol = SingularDriftPolicy::with_defaults(cfg.dt, spec.t_end)?;
            let run = mc_driver(&cfg, |rng, _| simulate_q_max(&spec, &pol, rng))?;
            csv.push_str("index,t_end,x_end,max_end,gap_end,min_drift\n");
            for (i, q) in run.samples.iter().enumerate() {
                let p = &q.path;
                let (x, m) = (p.last_x(), *p.running_max.last().unwrap_or(&f64::NAN));
                csv.push_str(&format!("{i},{},{x},{m},{},{}\n", p.last_t(), m - x, q.min_drift));
            }
        }
    }
    emit(a.out.as_deref(), &csv, "simulate-max", Some((&a.model, &text)), a, Some(a.mc.seed), started)
}

fn simulate_last(a: &LastArgs, name: &str) -> CliResult<()> {
    let started = now();
    let (model, text) = load_model(&a.model)?;
    let cfg = mc_config(&a.mc)?;
    let est: LocalTimeEstimator = a.local_time.into();
    let mut csv = String::new();
    match (model, name) {
        (Model::Levy(m), "simulate-last-exit") => {
            if !matches!(m.jumps, levy::Jumps::None) || m.sigma2 != 1.0 || !(m.alpha < 0.0) {
                return Err(Failure::Config("Lévy last exit is implemented for W_t - μt (sigma2 = 1, no jumps, alpha < 0)".into()));
            }
            let mu = -m.alpha;
            let run = mc_driver(&cfg, |rng, _| levy::bm_last_exit_construct(mu, a.level, est, &cfg, false, rng))?;
            csv.push_str("index,rho,lambda,censored,retried,flagged\n");
            for (i, r) in run.samples.iter().enumerate() {
                csv.push_str(&format!("{i},{},{},{},{},{}\n", f(r.rho), r.lambda, r.censored as u8, r.retried as u8, r.flagged as u8));
            }
        }
        (Model::Diffusion(m), "simulate-last-exit") => {
            let td = TiltedDiffusion::new(*m, Tilt::LastExit { level: a.level })?;
            let run = mc_driver(&cfg, |rng, _| diffusion::two_step_last_exit(&td, est, &cfg, false, rng))?;
            csv.push_str("index,rho,lambda,censored,retried,flagged\n");
            for (i, r) in run.samples.iter().enumerate() {
                csv.push_str(&format!("{i},{},{},{},{},{}\n", f(r.rho), r.lambda, r.censored as u8, r.retried as u8, r.flagged as u8));
            }
        }
        (Model::FiniteBm(spec), "simulate-last-passage") => {
            let spec = FiniteHorizonSpec::new(spec.mu, spec.t_end, Some(a.level))?;
            let pol = SingularDriftPolicy::with_defaults(cfg.dt, spec.t_end)?;
            let run = mc_driver(&cfg, |rng, _| simulate_q_last(&spec, &pol, est, rng))?;
            csv.push_str("index,t_end,x_end,local_time_end,min_abs_drift\n");
            for (i, q) in run.samples.iter().enumerate() {
                let p = &q.path;
                let lt = p.local_time.last().copied().unwrap_or(0.0);
                csv.push_str(&format!("{i},{},{},{lt},{}\n", p.last_t(), p.last_x(), q.min_drift));
            }
        }
        (_, "simulate-last-exit") => {
            return Err(Failure::Config("simulate-last-exit needs a Lévy or diffusion model; use simulate-last-passage for finite_bm".into()))
        }
        _ => return Err(Failure::Config("simulate-last-passage needs a finite_bm model {mu, T}".into())),
    }
    emit(a.out.as_deref(), &csv, name, Some((&a.model, &text)), a, Some(a.mc.seed), started)
}

fn validate(a: &ValidateArgs) -> CliResult<()> {
    let started = now();
    let suite: Suite = a.suite.parse()?;
    let mut cfg = SuiteConfig::new(a.n, a.dt, a.seed);
    if let Some(nc) = a.n_cross {
        cfg.n_cross = nc;
    }
    cfg.workers = a.workers;
    cfg.estimator = a.local_time.into();
    let report = run_suite(suite, &cfg)?;
    let text = serde_json::to_string_pretty(&report).map_err(|e| Failure::Config(e.to_string()))? + "\n";
    for c in &report.checks {
        eprintln!("{} {} statistic={:.6e} tolerance={:.3e}", if c.pass { "PASS" } else { "FAIL" }, c.test, c.statistic, c.tolerance);
    }
    emit(a.out.as_deref(), &text, "validate", None, a, Some(a.seed), started)?;
    if report.pass {
        Ok(())
    } else {
        let failed: Vec<_> = report.checks.iter().filter(|c| !c.pass).map(|c| c.test.as_str()).collect();
        Err(Failure::Validation(format!("suite {suite} failed: {}", failed.join(", "))))
    }
}

fn parse_axis(spec: &str) -> CliResult<(String, Vec<f64>)> {
    let bad = || Failure::Config(format!("bad grid axis {spec:?}; expected name=lo:hi:n"));
    let (name, range) = spec.split_once('=').ok_or_else(bad)?;
    let parts: Vec<&str> = range.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if n < 2 || !(hi > lo) {
        return Err(bad());
    }
    Ok((name.trim().to_string(), (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()))
}

fn density(a: &DensityArgs) -> CliResult<()> {
    let started = now();
    let o = oracles::by_name(&a.oracle, |k| match k {
        "q" => a.q,
        "mu" => a.mu,
        "x" => a.x,
        "a" => a.a,
        "x0" => a.x0,
        _ => None,
    })?;
    let mut csv = String::new();
    if o.dim() == 1 {
        let grid = a.grid.as_deref().unwrap_or("x=0:5:51");
        let (name, xs) = parse_axis(grid)?;
        csv.push_str(&format!("{name},pdf\n"));
        for x in xs {
            csv.push_str(&format!("{x},{}\n", o.pdf(x)));
        }
    } else {
        let grid = a.grid.as_deref().unwrap_or("t=0.01:5:100,x=0.01:4:100");
        let axes: Vec<&str> = grid.split(',').collect();
        if axes.len() != 2 {
            return Err(Failure::Config(format!("{} needs a 2-D grid t=lo:hi:n,x=lo:hi:n", o.name)));
        }
        let (tn, ts) = parse_axis(axes[0])?;
        let (xn, xs) = parse_axis(axes[1])?;
        csv.push_str(&format!("{tn},{xn},pdf\n"));
        for &t in &ts {
            for &x in &xs {
                csv.push_str(&format!("{t},{x},{}\n", f(o.pdf2(t, x))));
            }
        }
    }
    let meta = json!({ "args": a, "oracle": o.name, "mass": o.mass, "truncation": o.truncation });
    emit(a.out.as_deref(), &csv, "density", None, &meta, None, started)
}

fn load_trees(path: &Path) -> CliResult<(TreeCorpus, String)> {
    let text = read_file(path)?;
    if let Ok(c) = TreeCorpus::from_json(&text) {
        return Ok((c, text));
    }
    #[derive(serde::Deserialize)]
    struct Single {
        tree: FiniteTree,
        rho: RandomTimeSpec,
    }
    let mut s: Single = serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    s.tree.finish()?;
    s.tree.check_rho(&s.rho)?;
    let entry = CorpusEntry { id: 0, kind: RhoKind::Random, tree: s.tree, rho: s.rho };
    Ok((TreeCorpus { seed: 0, entries: vec![entry] }, text))
}

fn discrete_verify(a: &DiscreteArgs) -> CliResult<()> {
    let started = now();
    let (corpus, text) = match &a.trees {
        Some(p) => {
            let (c, t) = load_trees(p)?;
            (c, Some(t))
        }
        None => (shipped_corpus()?, None),
    };
    let tol = 1e-12;
    let mut csv = String::from("id,kind,horizon,outcomes,pair_identity,z_identity,l_martingale,dominance_violation,numeraire_max\n");
    let mut worst: f64 = 0.0;
    for e in &corpus.entries {
        let pair = canonical_pair(&e.tree, &e.rho)?;
        let mut rng = randtime_core::RngStream::new(a.seed, e.id as u64);
        let mut ident: f64 = 0.0;
        for _ in 0..100 {
            let v = random_adapted(&e.tree, &mut rng);
            ident = ident.max(verify_pair_identity(&e.tree, &e.rho, &pair, &v)?);
        }
        let zl = pair_identity_residual(&e.tree, &pair);
        let mart = martingale_residual(&e.tree, &pair);
        let mut dom: f64 = 0.0;
        for _ in 0..20 {
            let d = dominance_check(&e.tree, &e.rho, &pair, &random_monotone_fn(&mut rng));
            dom = dom.max(d.lower - d.integral).max(d.integral - d.upper);
        }
        let mut num = f64::NEG_INFINITY;
        for _ in 0..50 {
            num = num.max(numeraire_check(&e.tree, &e.rho, &pair, &random_supermartingale(&e.tree, &mut rng))?.value);
        }
        worst = worst.max(ident).max(zl).max(mart).max(dom).max(num - 1.0);
        let kind = serde_json::to_value(e.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        csv.push_str(&format!(
            "{},{kind},{},{},{ident:e},{zl:e},{mart:e},{:e},{num}\n",
            e.id,
            e.tree.horizon,
            e.tree.n_outcomes(),
            dom.max(0.0)
        ));
    }
    let model = a.trees.as_deref().zip(text.as_deref());
    emit(a.report.as_deref(), &csv, "discrete-verify", model, a, Some(a.seed), started)?;
    eprintln!("{} trees, worst residual {worst:e}", corpus.entries.len());
    if worst <= tol {
        Ok(())
    } else {
        Err(Failure::Validation(format!("discrete identities violated: worst residual {worst:e} > {tol:e}")))
    }
}

fn gen_trees(a: &GenArgs) -> CliResult<()> {
    let started = now();
    let text = generate_corpus(a.seed, a.size).to_json()?;
    emit(Some(&a.out), &text, "gen-trees", None, a, Some(a.seed), started)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let r = match &cli.cmd {
        Cmd::SimulateMax(a) => simulate_max(a),
        Cmd::SimulateLastExit(a) => simulate_last(a, "simulate-last-exit"),
        Cmd::SimulateLastPassage(a) => simulate_last(a, "simulate-last-passage"),
        Cmd::Validate(a) => validate(a),
        Cmd::Density(a) => density(a),
        Cmd::DiscreteVerify(a) => discrete_verify(a),
        Cmd::GenTrees(a) => gen_trees(a),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(m)) => {
            eprintln!("validation failed: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
