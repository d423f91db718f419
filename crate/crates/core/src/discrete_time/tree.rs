use serde::{Deserialize, Serialize};

use crate::error::{config, Result};

/// Values indexed by `[t][cell]`.
pub type NodeTable = Vec<Vec<f64>>;

/// A finite sample space with a filtration of partitions on `{0, ..., T}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteTree {
    pub horizon: usize,
    /// `cells[t][ω]` is the id of the time-t cell containing ω.
    pub cells: Vec<Vec<usize>>,
    /// `refinement[t][c]` is the parent (time t-1) of cell c; empty at t = 0.
    pub refinement: Vec<Vec<usize>>,
    pub p: Vec<f64>,
    #[serde(rename = "X")]
    pub x: NodeTable,
    #[serde(skip)]
    derived: Derived,
}

#[derive(Clone, Debug, Default, PartialEq)]
struct Derived {
    cell_prob: NodeTable,
    children: Vec<Vec<Vec<usize>>>,
    members: Vec<Vec<Vec<usize>>>,
}

/// A random time: ρ(ω) ∈ {0, ..., T}.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomTimeSpec {
    pub rho: Vec<usize>,
}

impl FiniteTree {
    pub fn new(
        horizon: usize,
        cells: Vec<Vec<usize>>,
        refinement: Vec<Vec<usize>>,
        p: Vec<f64>,
        x: NodeTable,
    ) -> Result<Self> {
        let mut t = FiniteTree { horizon, cells, refinement, p, x, derived: Derived::default() };
        t.finish()?;
        Ok(t)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut t: FiniteTree = serde_json::from_str(text)?;
        t.finish()?;
        Ok(t)
    }

    /// Validate and build the derived lookup tables (needed after deserializing).
    pub fn finish(&mut self) -> Result<()> {
        let tt = self.horizon;
        let m = self.p.len();
        if tt > 8 {
            return config(format!("horizon {tt} exceeds the supported maximum of 8"));
        }
        if m == 0 {
            return config("sample space is empty");
        }
        if self.cells.len() != tt + 1 || self.refinement.len() != tt + 1 || self.x.len() != tt + 1
        {
            return config("cells, refinement and X need horizon+1 entries");
        }
        let mut total = 0.0;
        for (w, &pw) in self.p.iter().enumerate() {
            if !(pw > 0.0) || !pw.is_finite() {
                return config(format!("outcome {w} has non-positive probability {pw}"));
            }
            total += pw;
        }
        if (total - 1.0).abs() > 1e-12 {
            return config(format!("probabilities sum to {total}, not 1"));
        }
        let mut d = Derived::default();
        for t in 0..=tt {
            if self.cells[t].len() != m {
                return config(format!("cells[{t}] must assign every outcome"));
            }
            let n = self.x[t].len();
            let mut prob = vec![0.0; n];
            let mut members = vec![Vec::new(); n];
            for (w, &c) in self.cells[t].iter().enumerate() {
                if c >= n {
                    return config(format!("cell id {c} at time {t} has no X value"));
                }
                prob[c] += self.p[w];
                members[c].push(w);
            }
            if let Some(c) = members.iter().position(|v| v.is_empty()) {
                return config(format!("cell {c} at time {t} is empty"));
            }
            if t == 0 {
                if !self.refinement[0].is_empty() {
                    return config("refinement[0] must be empty");
                }
            } else {
                if self.refinement[t].len() != n {
                    return config(format!("refinement[{t}] needs one parent per cell"));
                }
                for (w, &c) in self.cells[t].iter().enumerate() {
                    if self.refinement[t][c] != self.cells[t - 1][w] {
                        return config(format!(
                            "partition at time {t} does not refine time {}: outcome {w}",
                            t - 1
                        ));
                    }
                }
                let mut ch = vec![Vec::new(); self.x[t - 1].len()];
                for (c, &par) in self.refinement[t].iter().enumerate() {
                    ch[par].push(c);
                }
                d.children.push(ch);
            }
            d.cell_prob.push(prob);
            d.members.push(members);
        }
        d.children.push(vec![Vec::new(); self.x[tt].len()]);
        self.derived = d;
        Ok(())
    }

    pub fn n_outcomes(&self) -> usize {
        self.p.len()
    }

    pub fn n_cells(&self, t: usize) -> usize {
        self.x[t].len()
    }

    pub fn cell_prob(&self, t: usize, c: usize) -> f64 {
        self.derived.cell_prob[t][c]
    }

    pub fn children(&self, t: usize, c: usize) -> &[usize] {
        &self.derived.children[t][c]
    }

    pub fn members(&self, t: usize, c: usize) -> &[usize] {
        &self.derived.members[t][c]
    }

    pub fn parent(&self, t: usize, c: usize) -> Option<usize> {
        if t == 0 {
            None
        } else {
            Some(self.refinement[t][c])
        }
    }

    pub fn cell_of(&self, t: usize, w: usize) -> usize {
        self.cells[t][w]
    }

    /// Zero-filled table with the tree's shape.
    pub fn zeros(&self) -> NodeTable {
        (0..=self.horizon).map(|t| vec![0.0; self.n_cells(t)]).collect()
    }

    pub fn check_table(&self, v: &NodeTable, what: &str) -> Result<()> {
        if v.len() != self.horizon + 1
            || (0..=self.horizon).any(|t| v[t].len() != self.n_cells(t))
        {
            return config(format!("{what} table does not match the tree shape"));
        }
        Ok(())
    }

    pub fn check_rho(&self, rho: &RandomTimeSpec) -> Result<()> {
        if rho.rho.len() != self.n_outcomes() {
            return config("rho needs one value per outcome");
        }
        if let Some(&r) = rho.rho.iter().find(|&&r| r > self.horizon) {
            return config(format!("rho value {r} exceeds the horizon"));
        }
        Ok(())
    }

    /// E[f(ω)].
    pub fn expect(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.p.iter().enumerate().map(|(w, &pw)| pw * f(w)).sum()
    }
}
