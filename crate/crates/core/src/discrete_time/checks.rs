use serde::{Deserialize, Serialize};

use super::generate::MonotoneFn;
use super::pair::CanonicalPairTable;
use super::stopping::{constructive_stopping_time, enumerate_stopping_times};
use super::tree::{FiniteTree, NodeTable, RandomTimeSpec};
use crate::error::{invalid, Result};

/// K_{t} along outcome ω, with K_{-1} = 0.
fn k_at(tree: &FiniteTree, pair: &CanonicalPairTable, t: Option<usize>, w: usize) -> f64 {
    t.map_or(0.0, |t| pair.k[t][tree.cell_of(t, w)])
}

/// E[V_ρ].
pub fn lhs_expectation(tree: &FiniteTree, rho: &RandomTimeSpec, v: &NodeTable) -> f64 {
    tree.expect(|w| {
        let r = rho.rho[w];
        v[r][tree.cell_of(r, w)]
    })
}

/// E[Σ_t V_t L_t ΔK_t].
fn rhs_expectation(tree: &FiniteTree, pair: &CanonicalPairTable, v: &NodeTable) -> f64 {
    tree.expect(|w| {
        let mut s = 0.0;
        let mut k_prev = 0.0;
        for (t, vt) in v.iter().enumerate().take(tree.horizon + 1) {
            let c = tree.cell_of(t, w);
            s += vt[c] * pair.l[t][c] * (pair.k[t][c] - k_prev);
            k_prev = pair.k[t][c];
        }
        s
    })
}

/// |E[V_ρ] - E[Σ V L ΔK]| for a nonnegative adapted V.
pub fn verify_pair_identity(
    tree: &FiniteTree,
    rho: &RandomTimeSpec,
    pair: &CanonicalPairTable,
    v: &NodeTable,
) -> Result<f64> {
    tree.check_table(v, "V")?;
    Ok((lhs_expectation(tree, rho, v) - rhs_expectation(tree, pair, v)).abs())
}

/// max over nodes of |Z - L(1 - K)|.
pub fn pair_identity_residual(tree: &FiniteTree, pair: &CanonicalPairTable) -> f64 {
    let mut worst: f64 = 0.0;
    for t in 0..=tree.horizon {
        for c in 0..tree.n_cells(t) {
            worst = worst.max((pair.z[t][c] - pair.l[t][c] * (1.0 - pair.k[t][c])).abs());
        }
    }
    worst
}

/// max over non-terminal nodes of |E[L_{t+1} | F_t] - L_t|.
pub fn martingale_residual(tree: &FiniteTree, pair: &CanonicalPairTable) -> f64 {
    let mut worst: f64 = 0.0;
    for t in 0..tree.horizon {
        for c in 0..tree.n_cells(t) {
            let pc = tree.cell_prob(t, c);
            let cond: f64 = tree
                .children(t, c)
                .iter()
                .map(|&ch| tree.cell_prob(t + 1, ch) / pc * pair.l[t + 1][ch])
                .sum();
            worst = worst.max((cond - pair.l[t][c]).abs());
        }
    }
    worst
}

/// Pathwise support conditions: max_ω |Σ 1{K_{t-1} = 1} ΔL_t| and
/// max_ω |Σ 1{L_t = 0} ΔK_t|.
pub fn pathwise_support_checks(tree: &FiniteTree, pair: &CanonicalPairTable) -> (f64, f64) {
    let (mut a, mut b): (f64, f64) = (0.0, 0.0);
    for w in 0..tree.n_outcomes() {
        let (mut s1, mut s2) = (0.0, 0.0);
        let (mut k_prev, mut l_prev) = (0.0, 1.0);
        for t in 0..=tree.horizon {
            let c = tree.cell_of(t, w);
            let (k, l) = (pair.k[t][c], pair.l[t][c]);
            if k_prev >= 1.0 - 1e-12 {
                s1 += l - l_prev;
            }
            if l <= 1e-300 {
                s2 += k - k_prev;
            }
            k_prev = k;
            l_prev = l;
        }
        a = a.max(s1.abs());
        b = b.max(s2.abs());
    }
    (a, b)
}

/// Outcome weights of Q with density L_T.
pub fn q_measure(tree: &FiniteTree, pair: &CanonicalPairTable) -> Vec<f64> {
    let tt = tree.horizon;
    (0..tree.n_outcomes())
        .map(|w| pair.l[tt][tree.cell_of(tt, w)] * tree.p[w])
        .collect()
}

/// ∫_0^1 E_{Q_u}[V_{η_u}] du as an exact finite sum: u ↦ η_u is constant
/// between consecutive distinct values of K, Q_u has density L_{η_u}, and
/// V_∞ = 0.
pub fn expectation_via_qu(
    tree: &FiniteTree,
    pair: &CanonicalPairTable,
    v: &NodeTable,
) -> Result<f64> {
    tree.check_table(v, "V")?;
    let mut levels: Vec<f64> = pair.k.iter().flatten().copied().collect();
    levels.push(0.0);
    levels.push(1.0);
    levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
    levels.dedup();
    let mut total = 0.0;
    for win in levels.windows(2) {
        let (lo, hi) = (win[0], win[1]);
        let width = hi - lo;
        if width <= 0.0 {
            continue;
        }
        let u = 0.5 * (lo + hi);
        let e = tree.expect(|w| {
            (0..=tree.horizon)
                .find(|&t| pair.k[t][tree.cell_of(t, w)] >= u)
                .map_or(0.0, |t| {
                    let c = tree.cell_of(t, w);
                    pair.l[t][c] * v[t][c]
                })
        });
        total += width * e;
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    /// E[f(K_{ρ-})].
    pub lower: f64,
    /// ∫_0^1 f.
    pub integral: f64,
    /// E[f(K_ρ)].
    pub upper: f64,
}

impl DominanceReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.lower <= self.integral + tol && self.integral <= self.upper + tol
    }
}

/// Sandwich E[f(K_{ρ-})] ≤ ∫ f ≤ E[f(K_ρ)] for nondecreasing f.
pub fn dominance_check(
    tree: &FiniteTree,
    rho: &RandomTimeSpec,
    pair: &CanonicalPairTable,
    f: &MonotoneFn,
) -> DominanceReport {
    let lower = tree.expect(|w| {
        let r = rho.rho[w];
        f.eval(k_at(tree, pair, r.checked_sub(1), w))
    });
    let upper = tree.expect(|w| f.eval(k_at(tree, pair, Some(rho.rho[w]), w)));
    DominanceReport { lower, integral: f.integral(), upper }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NumeraireReport {
    /// E[S_ρ / L_ρ].
    pub value: f64,
    /// P[L_ρ > 0].
    pub prob_l_positive: f64,
    /// (K_ρ atom, E[S_ρ/L_ρ | K_ρ = atom]).
    pub per_atom: Vec<(f64, f64)>,
}

/// E[S_ρ/L_ρ] for a nonnegative supermartingale S with S_0 = 1.
pub fn numeraire_check(
    tree: &FiniteTree,
    rho: &RandomTimeSpec,
    pair: &CanonicalPairTable,
    s: &NodeTable,
) -> Result<NumeraireReport> {
    tree.check_table(s, "S")?;
    if s[0].iter().any(|&s0| (s0 - 1.0).abs() > 1e-12) {
        return invalid("supermartingale must start at S_0 = 1");
    }
    for t in 0..=tree.horizon {
        for c in 0..tree.n_cells(t) {
            if !(s[t][c] >= 0.0) {
                return invalid(format!("S is negative at ({t},{c})"));
            }
            if t < tree.horizon {
                let pc = tree.cell_prob(t, c);
                let cond: f64 = tree
                    .children(t, c)
                    .iter()
                    .map(|&ch| tree.cell_prob(t + 1, ch) / pc * s[t + 1][ch])
                    .sum();
                if cond > s[t][c] * (1.0 + 1e-12) + 1e-15 {
                    return invalid(format!(
                        "S is not a supermartingale at ({t},{c}): E[S_next|F] = {cond} > {}",
                        s[t][c]
                    ));
                }
            }
        }
    }
    let at_rho = |w: usize| {
        let r = rho.rho[w];
        let c = tree.cell_of(r, w);
        (s[r][c], pair.l[r][c], pair.k[r][c])
    };
    let prob_l_positive = tree.expect(|w| if at_rho(w).1 > 0.0 { 1.0 } else { 0.0 });
    let value = tree.expect(|w| {
        let (sv, lv, _) = at_rho(w);
        if lv > 0.0 {
            sv / lv
        } else {
            f64::INFINITY
        }
    });
    let mut atoms: Vec<(f64, f64, f64)> = Vec::new();
    for w in 0..tree.n_outcomes() {
        let (sv, lv, kv) = at_rho(w);
        let ratio = if lv > 0.0 { sv / lv } else { f64::INFINITY };
        match atoms.iter_mut().find(|a| (a.0 - kv).abs() <= 1e-14) {
            Some(a) => {
                a.1 += tree.p[w] * ratio;
                a.2 += tree.p[w];
            }
            None => atoms.push((kv, tree.p[w] * ratio, tree.p[w])),
        }
    }
    atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let per_atom = atoms.into_iter().map(|(k, num, den)| (k, num / den)).collect();
    Ok(NumeraireReport { value, prob_l_positive, per_atom })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AvoidanceReport {
    /// (1) P[ρ = τ] = 0 for every stopping time τ.
    pub avoids_stopping_times: bool,
    /// (2) ΔK ≡ 0 (with K_{-1} = 0).
    pub delta_k_zero: bool,
    /// (3) P[ΔK_ρ = 0] = 1.
    pub delta_k_rho_zero: bool,
    /// (4) surrogate: sup_u |P[K_ρ ≤ u] - u|.
    pub uniform_gap: f64,
    /// "enumeration" or "constructive".
    pub method: String,
    pub stopping_times_checked: usize,
}

impl AvoidanceReport {
    pub fn equivalences_hold(&self) -> bool {
        self.avoids_stopping_times == self.delta_k_zero
            && self.delta_k_zero == self.delta_k_rho_zero
    }
}

/// Evaluates the avoidance conditions. Stopping times are enumerated
/// exhaustively on small trees (T ≤ 3, branching ≤ 2); otherwise the
/// stopping time "t on the cells where P[ρ = t | F_t] > 0" is used, which is
/// hit with positive probability whenever any such cell exists.
pub fn avoidance_equivalences(
    tree: &FiniteTree,
    rho: &RandomTimeSpec,
    pair: &CanonicalPairTable,
) -> Result<AvoidanceReport> {
    let hit_prob = |tau: &super::stopping::StoppingTime| -> f64 {
        tau.stops
            .iter()
            .map(|&(t, c)| {
                tree.members(t, c)
                    .iter()
                    .filter(|&&w| rho.rho[w] == t)
                    .map(|&w| tree.p[w])
                    .sum::<f64>()
            })
            .sum()
    };
    let small = tree.horizon <= 3
        && (0..tree.horizon).all(|t| (0..tree.n_cells(t)).all(|c| tree.children(t, c).len() <= 2));
    let (avoids, method, checked) = if small {
        let all = enumerate_stopping_times(tree)?;
        let n = all.len();
        (all.iter().all(|tau| hit_prob(tau) == 0.0), "enumeration", n)
    } else {
        let tau = constructive_stopping_time(tree, rho);
        (hit_prob(&tau) == 0.0, "constructive", 1)
    };
    let mut delta_k_zero = true;
    for t in 0..=tree.horizon {
        for c in 0..tree.n_cells(t) {
            let prev = tree.parent(t, c).map_or(0.0, |par| pair.k[t - 1][par]);
            if pair.k[t][c] != prev {
                delta_k_zero = false;
            }
        }
    }
    let jump_at_rho = tree.expect(|w| {
        let r = rho.rho[w];
        let k = k_at(tree, pair, Some(r), w);
        let kp = k_at(tree, pair, r.checked_sub(1), w);
        if k != kp {
            1.0
        } else {
            0.0
        }
    });
    let mut ks: Vec<(f64, f64)> = (0..tree.n_outcomes())
        .map(|w| (k_at(tree, pair, Some(rho.rho[w]), w), tree.p[w]))
        .collect();
    ks.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut gap: f64 = 0.0;
    let mut cdf = 0.0;
    for (k, pw) in ks {
        gap = gap.max((cdf - k).abs());
        cdf += pw;
        gap = gap.max((cdf - k).abs());
    }
    Ok(AvoidanceReport {
        avoids_stopping_times: avoids,
        delta_k_zero,
        delta_k_rho_zero: jump_at_rho == 0.0,
        uniform_gap: gap,
        method: method.to_string(),
        stopping_times_checked: checked,
    })
}
