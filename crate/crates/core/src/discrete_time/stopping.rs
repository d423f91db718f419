use super::tree::{FiniteTree, RandomTimeSpec};
use crate::error::{Error, Result};

/// A stopping time given by the cells at which it stops; cells not covered
/// correspond to τ = ∞.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StoppingTime {
    pub stops: Vec<(usize, usize)>,
}

const ENUMERATION_CAP: usize = 1_000_000;

/// Every stopping time of the tree's filtration (including τ ≡ ∞).
pub fn enumerate_stopping_times(tree: &FiniteTree) -> Result<Vec<StoppingTime>> {
    fn options(tree: &FiniteTree, t: usize, c: usize) -> Result<Vec<Vec<(usize, usize)>>> {
        let mut out = vec![vec![(t, c)]];
        if t == tree.horizon {
            out.push(Vec::new());
            return Ok(out);
        }
        let mut combos: Vec<Vec<(usize, usize)>> = vec![Vec::new()];
        for &ch in tree.children(t, c) {
            let sub = options(tree, t + 1, ch)?;
            if combos.len().saturating_mul(sub.len()) > ENUMERATION_CAP {
                return Err(Error::Invalid("too many stopping times to enumerate".into()));
            }
            let mut next = Vec::with_capacity(combos.len() * sub.len());
            for a in &combos {
                for b in &sub {
                    let mut v = a.clone();
                    v.extend_from_slice(b);
                    next.push(v);
                }
            }
            combos = next;
        }
        out.extend(combos);
        Ok(out)
    }
    let mut all: Vec<Vec<(usize, usize)>> = vec![Vec::new()];
    for c in 0..tree.n_cells(0) {
        let sub = options(tree, 0, c)?;
        if all.len().saturating_mul(sub.len()) > ENUMERATION_CAP {
            return Err(Error::Invalid("too many stopping times to enumerate".into()));
        }
        let mut next = Vec::new();
        for a in &all {
            for b in &sub {
                let mut v = a.clone();
                v.extend_from_slice(b);
                next.push(v);
            }
        }
        all = next;
    }
    Ok(all.into_iter().map(|stops| StoppingTime { stops }).collect())
}

/// τ = min{t : P[ρ = t | F_t] > 0}; P[ρ = τ] > 0 by construction.
pub fn constructive_stopping_time(tree: &FiniteTree, rho: &RandomTimeSpec) -> StoppingTime {
    let mut stops = Vec::new();
    fn walk(
        tree: &FiniteTree,
        rho: &RandomTimeSpec,
        t: usize,
        c: usize,
        stops: &mut Vec<(usize, usize)>,
    ) {
        if tree.members(t, c).iter().any(|&w| rho.rho[w] == t) {
            stops.push((t, c));
            return;
        }
        if t < tree.horizon {
            for &ch in tree.children(t, c) {
                walk(tree, rho, t + 1, ch, stops);
            }
        }
    }
    for c in 0..tree.n_cells(0) {
        walk(tree, rho, 0, c, &mut stops);
    }
    StoppingTime { stops }
}
