use crate::error::{invalid, Result};

/// First grid index at which a nondecreasing K reaches a level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum EtaIndex {
    At(usize),
    Infinity,
}

impl EtaIndex {
    pub fn index(self) -> Option<usize> {
        match self {
            EtaIndex::At(i) => Some(i),
            EtaIndex::Infinity => None,
        }
    }
}

/// `eta_u = inf { i : k_i >= u }` over a sampled K path.
pub fn eta_u(k_path: &[f64], u: f64) -> Result<EtaIndex> {
    if !(0.0..1.0).contains(&u) {
        return invalid(format!("u must lie in [0,1), got {u}"));
    }
    let mut prev = f64::NEG_INFINITY;
    for &k in k_path {
        if !(0.0..=1.0).contains(&k) {
            return invalid(format!("K value {k} outside [0,1]"));
        }
        if k < prev {
            return invalid("K path is not nondecreasing");
        }
        prev = k;
    }
    // Monotone, so a binary search finds the first crossing.
    let i = k_path.partition_point(|&k| k < u);
    Ok(if i < k_path.len() { EtaIndex::At(i) } else { EtaIndex::Infinity })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_index_reaching_level() {
        let k = [0.0, 0.3, 0.7, 1.0];
        assert_eq!(eta_u(&k, 0.5).unwrap(), EtaIndex::At(2));
        assert_eq!(eta_u(&k, 0.0).unwrap(), EtaIndex::At(0));
        assert_eq!(eta_u(&[0.0, 0.2, 0.4], 0.9).unwrap(), EtaIndex::Infinity);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(eta_u(&[0.0, 0.5], 1.0).is_err());
        assert!(eta_u(&[0.0, 0.5], -0.1).is_err());
        assert!(eta_u(&[0.0, 0.5, 0.4], 0.2).is_err());
    }
}
