use serde::{Deserialize, Serialize};

use super::tree::{FiniteTree, NodeTable, RandomTimeSpec};
use crate::error::{Error, Result};

/// Conditional laws of ρ given the filtration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalLaws {
    /// Z(t,c) = P[ρ > t | c].
    pub z: NodeTable,
    /// A(t,c) = Σ_{s ≤ t} P[ρ = s | ancestor_s(c)].
    pub a: NodeTable,
    /// P[ρ = t | c].
    pub p_eq: NodeTable,
    /// P[ρ ≥ t | c].
    pub p_ge: NodeTable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CanonicalPairTable {
    pub z: NodeTable,
    pub a: NodeTable,
    pub k: NodeTable,
    pub l: NodeTable,
    /// ζ0 = min{t : Z_t = 0} per outcome.
    pub zeta0: Vec<usize>,
}

pub fn conditional_laws(tree: &FiniteTree, rho: &RandomTimeSpec) -> Result<ConditionalLaws> {
    tree.check_rho(rho)?;
    let mut z = tree.zeros();
    let mut p_eq = tree.zeros();
    let mut p_ge = tree.zeros();
    for t in 0..=tree.horizon {
        for c in 0..tree.n_cells(t) {
            let (mut gt, mut eq, mut ge) = (0.0, 0.0, 0.0);
            for &w in tree.members(t, c) {
                let r = rho.rho[w];
                let pw = tree.p[w];
                if r > t {
                    gt += pw;
                }
                if r == t {
                    eq += pw;
                }
                if r >= t {
                    ge += pw;
                }
            }
            let pc = tree.cell_prob(t, c);
            z[t][c] = gt / pc;
            p_eq[t][c] = eq / pc;
            p_ge[t][c] = ge / pc;
        }
    }
    let mut a = tree.zeros();
    for t in 0..=tree.horizon {
        for c in 0..tree.n_cells(t) {
            let prev = tree.parent(t, c).map_or(0.0, |par| a[t - 1][par]);
            a[t][c] = prev + p_eq[t][c];
        }
    }
    Ok(ConditionalLaws { z, a, p_eq, p_ge })
}

/// Forward recursion for (K, L), started from K_{-1} = 0, L_{-1} = 1 and
/// frozen after ζ0.
pub fn canonical_pair(tree: &FiniteTree, rho: &RandomTimeSpec) -> Result<CanonicalPairTable> {
    let laws = conditional_laws(tree, rho)?;
    let mut k = tree.zeros();
    let mut l = tree.zeros();
    for t in 0..=tree.horizon {
        for c in 0..tree.n_cells(t) {
            let (k_prev, l_prev, z_prev) = match tree.parent(t, c) {
                None => (0.0, 1.0, 1.0),
                Some(par) => (k[t - 1][par], l[t - 1][par], laws.z[t - 1][par]),
            };
            if z_prev <= 0.0 {
                k[t][c] = k_prev;
                l[t][c] = l_prev;
                continue;
            }
            let ge = laws.p_ge[t][c];
            if ge > 0.0 && laws.p_eq[t][c] == ge {
                // ρ = t surely on this cell; land on 1 exactly.
                k[t][c] = 1.0;
            } else if ge > 0.0 {
                k[t][c] = k_prev + (1.0 - k_prev) * laws.p_eq[t][c] / ge;
            } else {
                k[t][c] = k_prev;
            }
            // P[ρ ≥ t | F_{t-1}] = Z_{t-1} > 0 here.
            let ratio = ge / z_prev;
            if !ratio.is_finite() {
                return Err(Error::Internal(format!("non-finite L update at ({t},{c})")));
            }
            l[t][c] = l_prev * ratio;
        }
    }
    let zeta0 = (0..tree.n_outcomes())
        .map(|w| {
            (0..=tree.horizon)
                .find(|&t| laws.z[t][tree.cell_of(t, w)] <= 0.0)
                .unwrap_or(tree.horizon)
        })
        .collect();
    Ok(CanonicalPairTable { z: laws.z, a: laws.a, k, l, zeta0 })
}
