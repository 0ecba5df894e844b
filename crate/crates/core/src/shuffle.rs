//! Epoch permutation sequences for random reshuffling (RR), shuffle-once (SO)
//! and incremental gradient (IG).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::is_permutation;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Random reshuffling: a fresh permutation every epoch.
    Rr,
    /// Shuffle once: a single random permutation reused for all epochs.
    So,
    /// Incremental gradient: a fixed permutation, identity by default.
    Ig,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Rr, Scheme::So, Scheme::Ig];

    pub fn is_random(self) -> bool {
        !matches!(self, Scheme::Ig)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Rr => "rr",
            Scheme::So => "so",
            Scheme::Ig => "ig",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rr" => Ok(Scheme::Rr),
            "so" => Ok(Scheme::So),
            "ig" => Ok(Scheme::Ig),
            other => Err(Error::Config(format!("unknown scheme {other:?} (expected rr, so or ig)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShufflePlan {
    scheme: Scheme,
    n: usize,
    epochs: usize,
    seed: u64,
    fixed_perm: Option<Vec<usize>>,
}

impl ShufflePlan {
    pub fn new(scheme: Scheme, n: usize, epochs: usize, seed: u64) -> Self {
        Self {
            scheme,
            n,
            epochs,
            seed,
            fixed_perm: None,
        }
    }

    /// Sets the permutation returned by an IG plan.
    pub fn with_fixed_permutation(mut self, perm: Vec<usize>) -> Result<Self> {
        if !is_permutation(&perm, self.n) {
            return Err(Error::Config(format!(
                "fixed permutation is not a bijection on 0..{}",
                self.n
            )));
        }
        self.fixed_perm = Some(perm);
        Ok(self)
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn epochs(&self) -> usize {
        self.epochs
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// π^(k) for epoch `k ∈ [1, K]`.
    pub fn permutation_for(&self, k: usize) -> Result<Vec<usize>> {
        if k == 0 || k > self.epochs {
            return Err(Error::Config(format!(
                "epoch {k} outside 1..={}",
                self.epochs
            )));
        }
        Ok(match self.scheme {
            Scheme::Rr => rng::permutation(self.n, self.seed, k as u64),
            Scheme::So => rng::permutation(self.n, self.seed, 1),
            Scheme::Ig => self
                .fixed_perm
                .clone()
                .unwrap_or_else(|| (0..self.n).collect()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ig_defaults_to_identity() {
        let plan = ShufflePlan::new(Scheme::Ig, 3, 4, 99);
        for k in 1..=4 {
            assert_eq!(plan.permutation_for(k).unwrap(), vec![0, 1, 2]);
        }
        let plan = plan.with_fixed_permutation(vec![2, 0, 1]).unwrap();
        assert_eq!(plan.permutation_for(3).unwrap(), vec![2, 0, 1]);
    }

    #[test]
    fn so_reuses_one_permutation() {
        let plan = ShufflePlan::new(Scheme::So, 20, 3, 5);
        let p1 = plan.permutation_for(1).unwrap();
        assert_eq!(p1, plan.permutation_for(2).unwrap());
        assert_eq!(p1, plan.permutation_for(3).unwrap());
        assert!(is_permutation(&p1, 20));
    }

    #[test]
    fn rr_epochs_differ_and_are_deterministic() {
        let a = ShufflePlan::new(Scheme::Rr, 30, 3, 5);
        let b = ShufflePlan::new(Scheme::Rr, 30, 3, 5);
        assert_ne!(a.permutation_for(1).unwrap(), a.permutation_for(2).unwrap());
        for k in 1..=3 {
            assert_eq!(a.permutation_for(k).unwrap(), b.permutation_for(k).unwrap());
        }
    }

    #[test]
    fn rejects_bad_input() {
        let plan = ShufflePlan::new(Scheme::Ig, 3, 2, 0);
        assert!(plan.permutation_for(0).is_err());
        assert!(plan.permutation_for(3).is_err());
        assert!(plan.clone().with_fixed_permutation(vec![0, 0, 1]).is_err());
        assert!(plan.with_fixed_permutation(vec![0, 1]).is_err());
        assert!("xx".parse::<Scheme>().is_err());
        assert_eq!("RR".parse::<Scheme>().unwrap(), Scheme::Rr);
    }

    #[test]
    fn rr_position_of_first_element_is_uniform() {
        let n = 64;
        let epochs = 10_000;
        let plan = ShufflePlan::new(Scheme::Rr, n, epochs, 2024);
        let mut counts = vec![0usize; n];
        for k in 1..=epochs {
            let perm = plan.permutation_for(k).unwrap();
            let pos = perm.iter().position(|&v| v == 0).unwrap();
            counts[pos] += 1;
        }
        let expected = epochs as f64 / n as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 0.99 quantile of χ² with 63 degrees of freedom
        assert!(chi2 < 92.01, "chi2 = {chi2}");
    }
}
