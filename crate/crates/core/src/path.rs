use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    HitLevel,
    LocalTimeTarget,
    Horizon,
    /// A step would have left the state interval and was truncated.
    Boundary,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stop {
    pub index: usize,
    pub reason: StopReason,
}

/// A discretized trajectory with its running maximum and local time at a
/// declared level.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SamplePath {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub running_max: Vec<f64>,
    pub local_time: Vec<f64>,
    pub level: Option<f64>,
    pub stopped_at: Option<Stop>,
}

impl SamplePath {
    pub fn start(t0: f64, x0: f64, level: Option<f64>) -> Self {
        SamplePath {
            t: vec![t0],
            x: vec![x0],
            running_max: vec![x0],
            local_time: vec![0.0],
            level,
            stopped_at: None,
        }
    }

    pub fn with_capacity(t0: f64, x0: f64, level: Option<f64>, cap: usize) -> Self {
        let mut p = SamplePath {
            t: Vec::with_capacity(cap),
            x: Vec::with_capacity(cap),
            running_max: Vec::with_capacity(cap),
            local_time: Vec::with_capacity(cap),
            level,
            stopped_at: None,
        };
        p.t.push(t0);
        p.x.push(x0);
        p.running_max.push(x0);
        p.local_time.push(0.0);
        p
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Append a node; the running max is updated from the node value only
    /// unless `max_hint` (e.g. a sampled bridge maximum) is larger.
    pub fn push(&mut self, t: f64, x: f64, max_hint: Option<f64>, dl: f64) {
        let m_prev = *self.running_max.last().unwrap_or(&x);
        let mut m = m_prev.max(x);
        if let Some(h) = max_hint {
            m = m.max(h);
        }
        let l_prev = *self.local_time.last().unwrap_or(&0.0);
        self.t.push(t);
        self.x.push(x);
        self.running_max.push(m);
        self.local_time.push(l_prev + dl.max(0.0));
    }

    pub fn stop(&mut self, reason: StopReason) {
        self.stopped_at = Some(Stop { index: self.len() - 1, reason });
    }

    pub fn last_t(&self) -> f64 {
        *self.t.last().unwrap()
    }

    pub fn last_x(&self) -> f64 {
        *self.x.last().unwrap()
    }

    /// Check the structural invariants.
    pub fn validate(&self) -> Result<()> {
        let n = self.t.len();
        if n == 0 || self.x.len() != n || self.running_max.len() != n || self.local_time.len() != n
        {
            return invalid("path columns have inconsistent lengths");
        }
        if self.running_max[0] != self.x[0] {
            return invalid("running max must start at x_0");
        }
        for i in 1..n {
            if !(self.t[i] > self.t[i - 1]) {
                return invalid(format!("time not strictly increasing at index {i}"));
            }
            if self.running_max[i] < self.running_max[i - 1] || self.running_max[i] < self.x[i] {
                return invalid(format!("running max invariant broken at index {i}"));
            }
            if self.local_time[i] < self.local_time[i - 1] {
                return invalid(format!("local time decreased at index {i}"));
            }
        }
        if let Some(s) = self.stopped_at {
            if s.index >= n {
                return invalid("stop index outside the path");
            }
        }
        Ok(())
    }

    /// CSV with header `t,x,running_max,local_time`. Rust's `{}` formatting
    /// of f64 is the shortest string that round-trips.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,x,running_max,local_time")?;
        for i in 0..self.t.len() {
            writeln!(
                w,
                "{},{},{},{}",
                self.t[i], self.x[i], self.running_max[i], self.local_time[i]
            )?;
        }
        Ok(())
    }

    pub fn read_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == "t,x,running_max,local_time" => {}
            _ => return invalid("missing CSV header t,x,running_max,local_time"),
        }
        let mut p = SamplePath::default();
        for (k, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let v: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| crate::Error::Invalid(format!("row {}: {e}", k + 2)))?;
            if v.len() != 4 {
                return invalid(format!("row {} has {} columns", k + 2, v.len()));
            }
            p.t.push(v[0]);
            p.x.push(v[1]);
            p.running_max.push(v[2]);
            p.local_time.push(v[3]);
        }
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let mut p = SamplePath::start(0.0, 0.1, None);
        p.push(0.001, 0.1 + 1e-17, None, 0.0);
        p.push(0.002, -1.0 / 3.0, Some(0.25), 1e-300);
        p.push(0.003, std::f64::consts::PI, None, 0.7);
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let back = SamplePath::read_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back.t, p.t);
        assert_eq!(back.x, p.x);
        assert_eq!(back.running_max, p.running_max);
        assert_eq!(back.local_time, p.local_time);
        p.validate().unwrap();
    }

    #[test]
    fn running_max_tracks_hint() {
        let mut p = SamplePath::start(0.0, 0.0, None);
        p.push(1.0, -0.5, Some(0.3), 0.0);
        assert_eq!(p.running_max[1], 0.3);
        p.push(2.0, 0.1, None, 0.0);
        assert_eq!(p.running_max[2], 0.3);
    }
}
