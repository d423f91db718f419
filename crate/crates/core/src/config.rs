use serde::{Deserialize, Serialize};

use crate::error::{config, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub n_paths: usize,
    pub seed: u64,
    pub workers: usize,
    pub dt: f64,
    pub horizon_cap: f64,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        MonteCarloConfig {
            n_paths: 10_000,
            seed: 7,
            workers: 1,
            dt: 1e-3,
            horizon_cap: 1e3,
        }
    }
}

impl MonteCarloConfig {
    pub fn new(n_paths: usize, seed: u64, dt: f64) -> Result<Self> {
        let cfg = MonteCarloConfig { n_paths, seed, dt, ..Default::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_horizon_cap(mut self, cap: f64) -> Self {
        self.horizon_cap = cap;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return config("n_paths must be at least 1");
        }
        if self.workers == 0 {
            return config("workers must be at least 1");
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return config(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.horizon_cap > 0.0) {
            return config(format!("horizon_cap must be positive, got {}", self.horizon_cap));
        }
        Ok(())
    }
}
