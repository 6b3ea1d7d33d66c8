//! Stratum labels for a finite sample of switch times at a single scale `ε`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    times: Vec<f64>,
    eps: f64,
}

impl SampleSet {
    pub fn new(times: Vec<f64>, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidInput(alloc::format!("isolation scale must be positive, got {eps}")));
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("times must be finite and strictly increasing".into()));
        }
        Ok(SampleSet { times, eps })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }
}

/// Peels ε-isolated points round by round: a time gets label `j` when its
/// nearest remaining neighbour is farther than `ε` in round `j`. If a round
/// isolates nothing, the remaining times form clusters unresolved at scale
/// `ε` and all get label `max(j, 1)`.
pub fn sample_strata(s: &SampleSet) -> Vec<usize> {
    let t = &s.times;
    let mut label = vec![usize::MAX; t.len()];
    let mut alive: Vec<usize> = (0..t.len()).collect();
    let mut round = 0;
    while !alive.is_empty() {
        let isolated: Vec<bool> = (0..alive.len())
            .map(|k| {
                let left = k.checked_sub(1).map_or(f64::INFINITY, |l| t[alive[k]] - t[alive[l]]);
                let right = alive.get(k + 1).map_or(f64::INFINITY, |&r| t[r] - t[alive[k]]);
                left.min(right) > s.eps
            })
            .collect();
        if !isolated.contains(&true) {
            for &i in &alive {
                label[i] = round.max(1);
            }
            break;
        }
        let mut rest = Vec::new();
        for (k, &i) in alive.iter().enumerate() {
            if isolated[k] {
                label[i] = round;
            } else {
                rest.push(i);
            }
        }
        alive = rest;
        round += 1;
    }
    label
}
