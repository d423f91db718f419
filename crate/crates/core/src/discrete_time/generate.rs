use serde::{Deserialize, Serialize};

use super::tree::{FiniteTree, NodeTable, RandomTimeSpec};
use crate::error::Result;
use crate::rng::RngStream;

pub const CORPUS_SEED: u64 = 314_159;
pub const CORPUS_SIZE: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoKind {
    /// Last time X attains its overall maximum.
    LastMax,
    /// First time X attains its overall maximum.
    FirstMax,
    /// ρ(ω) drawn uniformly from {0..T}, independently per outcome.
    Random,
    /// First time X rises by one unit above X_0, else T.
    StoppingTime,
}

impl RhoKind {
    pub const ALL: [RhoKind; 4] =
        [RhoKind::LastMax, RhoKind::FirstMax, RhoKind::Random, RhoKind::StoppingTime];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub id: usize,
    pub kind: RhoKind,
    pub tree: FiniteTree,
    pub rho: RandomTimeSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeCorpus {
    pub seed: u64,
    pub entries: Vec<CorpusEntry>,
}

impl TreeCorpus {
    pub fn from_json(text: &str) -> Result<Self> {
        let mut c: TreeCorpus = serde_json::from_str(text)?;
        for e in &mut c.entries {
            e.tree.finish()?;
            e.tree.check_rho(&e.rho)?;
        }
        Ok(c)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Random tree with horizon in 1..=max_horizon, 1..=max_branch children per
/// node and conditional probabilities bounded below so every outcome keeps
/// probability ≥ 1e-3 at horizon 5.
pub fn random_tree(rng: &mut RngStream, max_horizon: usize, max_branch: usize) -> FiniteTree {
    let horizon = 1 + (rng.uniform() * max_horizon as f64) as usize;
    let upward = rng.uniform() < 0.5;
    // Per level: parent index, conditional probability, X value.
    let mut parents: Vec<Vec<usize>> = vec![Vec::new()];
    let mut cond: Vec<Vec<f64>> = vec![vec![1.0]];
    let mut xs: Vec<Vec<f64>> = vec![vec![0.0]];
    for t in 1..=horizon {
        let (mut par, mut cp, mut xv) = (Vec::new(), Vec::new(), Vec::new());
        for (c, &x_parent) in xs[t - 1].iter().enumerate() {
            let b = 1 + (rng.uniform() * max_branch as f64) as usize;
            let w: Vec<f64> = (0..b).map(|_| 1.0 + 0.4 * rng.uniform()).collect();
            let total: f64 = w.iter().sum();
            for (j, wj) in w.iter().enumerate() {
                let mut step = 0.5 * ((rng.uniform() * 5.0) as i64 - 2) as f64;
                if upward && j == 0 {
                    step = step.abs();
                }
                par.push(c);
                cp.push(wj / total);
                xv.push(x_parent + step);
            }
        }
        parents.push(par);
        cond.push(cp);
        xs.push(xv);
    }
    let m = xs[horizon].len();
    let mut cells = vec![vec![0usize; m]; horizon + 1];
    let mut p = vec![1.0; m];
    for w in 0..m {
        let mut c = w;
        for t in (0..=horizon).rev() {
            cells[t][w] = c;
            p[w] *= cond[t][c];
            if t > 0 {
                c = parents[t][c];
            }
        }
    }
    let total: f64 = p.iter().sum();
    for v in &mut p {
        *v /= total;
    }
    let mut refinement = parents;
    refinement[0] = Vec::new();
    FiniteTree::new(horizon, cells, refinement, p, xs).expect("generator builds valid trees")
}

fn path_values(tree: &FiniteTree, w: usize) -> Vec<f64> {
    (0..=tree.horizon).map(|t| tree.x[t][tree.cell_of(t, w)]).collect()
}

pub fn random_time(tree: &FiniteTree, kind: RhoKind, rng: &mut RngStream) -> RandomTimeSpec {
    let rho = (0..tree.n_outcomes())
        .map(|w| {
            let xs = path_values(tree, w);
            let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            match kind {
                RhoKind::LastMax => xs.iter().rposition(|&v| v == max).unwrap(),
                RhoKind::FirstMax => xs.iter().position(|&v| v == max).unwrap(),
                RhoKind::Random => {
                    ((rng.uniform() * (tree.horizon + 1) as f64) as usize).min(tree.horizon)
                }
                RhoKind::StoppingTime => {
                    xs.iter().position(|&v| v >= xs[0] + 1.0).unwrap_or(tree.horizon)
                }
            }
        })
        .collect();
    RandomTimeSpec { rho }
}

pub fn generate_corpus(seed: u64, size: usize) -> TreeCorpus {
    let entries = (0..size)
        .map(|id| {
            let mut rng = RngStream::new(seed, id as u64);
            let tree = random_tree(&mut rng, 5, 3);
            let kind = RhoKind::ALL[id % RhoKind::ALL.len()];
            let rho = random_time(&tree, kind, &mut rng);
            CorpusEntry { id, kind, tree, rho }
        })
        .collect();
    TreeCorpus { seed, entries }
}

/// Nonnegative adapted process; about a fifth of the nodes are zero.
pub fn random_adapted(tree: &FiniteTree, rng: &mut RngStream) -> NodeTable {
    let mut v = tree.zeros();
    for row in v.iter_mut() {
        for x in row.iter_mut() {
            *x = if rng.uniform() < 0.2 { 0.0 } else { 3.0 * rng.uniform() };
        }
    }
    v
}

/// V_t = exp(a X_t + b max_{s ≤ t} X_s + c t): a functional of the path up to t.
pub fn random_path_functional(tree: &FiniteTree, rng: &mut RngStream) -> NodeTable {
    let (a, b, c) = (rng.uniform() - 0.5, rng.uniform() - 0.5, 0.3 * (rng.uniform() - 0.5));
    let mut running = tree.zeros();
    let mut v = tree.zeros();
    for t in 0..=tree.horizon {
        for cell in 0..tree.n_cells(t) {
            let x = tree.x[t][cell];
            let m = tree.parent(t, cell).map_or(x, |par| running[t - 1][par].max(x));
            running[t][cell] = m;
            v[t][cell] = (a * x + b * m + c * t as f64).exp();
        }
    }
    v
}

/// Nonnegative supermartingale with S_0 = 1: each node's children get random
/// positive multipliers rescaled to conditional mean δ ∈ [0.8, 1].
pub fn random_supermartingale(tree: &FiniteTree, rng: &mut RngStream) -> NodeTable {
    let mut s = tree.zeros();
    for v in s[0].iter_mut() {
        *v = 1.0;
    }
    for t in 0..tree.horizon {
        for c in 0..tree.n_cells(t) {
            let ch = tree.children(t, c);
            let pc = tree.cell_prob(t, c);
            let r: Vec<f64> = ch
                .iter()
                .map(|_| if rng.uniform() < 0.1 { 0.0 } else { 0.2 + 2.0 * rng.uniform() })
                .collect();
            let mean: f64 =
                ch.iter().zip(&r).map(|(&k, &rk)| tree.cell_prob(t + 1, k) / pc * rk).sum();
            let delta = if rng.uniform() < 0.3 { 1.0 } else { 0.8 + 0.2 * rng.uniform() };
            for (&k, &rk) in ch.iter().zip(&r) {
                s[t + 1][k] = if mean > 0.0 { s[t][c] * rk * delta / mean } else { 0.0 };
            }
        }
    }
    s
}

/// Nondecreasing f on [0,1]: Σ w_i 1{u ≥ c_i} + Σ v_j u^{k_j} with w, v ≥ 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotoneFn {
    pub steps: Vec<(f64, f64)>,
    pub powers: Vec<(f64, f64)>,
}

impl MonotoneFn {
    pub fn eval(&self, u: f64) -> f64 {
        let a: f64 = self.steps.iter().filter(|s| u >= s.0).map(|s| s.1).sum();
        let b: f64 = self.powers.iter().map(|&(k, v)| v * u.powf(k)).sum();
        a + b
    }

    pub fn integral(&self) -> f64 {
        let a: f64 = self.steps.iter().map(|&(c, w)| w * (1.0 - c)).sum();
        let b: f64 = self.powers.iter().map(|&(k, v)| v / (k + 1.0)).sum();
        a + b
    }
}

pub fn random_monotone_fn(rng: &mut RngStream) -> MonotoneFn {
    let ns = (rng.uniform() * 4.0) as usize;
    let np = 1 + (rng.uniform() * 2.0) as usize;
    MonotoneFn {
        steps: (0..ns).map(|_| (rng.uniform(), rng.uniform())).collect(),
        powers: (0..np).map(|_| (0.2 + 4.0 * rng.uniform(), rng.uniform())).collect(),
    }
}
