//! Poisson-binomial moments and the exact small-instance distribution.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest input accepted by [`pb_exact_distribution`] (quadratic DP).
pub const PB_EXACT_MAX_LEN: usize = 10_000;

/// Neumaier-compensated sum.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PbMoments {
    pub mu: f64,
    pub sigma2: f64,
    /// `sigma / mu`; `None` when `mu == 0`.
    pub cv: Option<f64>,
}

impl PbMoments {
    pub(crate) fn from_sums(mu: f64, sigma2: f64) -> Self {
        let sigma2 = sigma2.max(0.0);
        Self {
            mu,
            sigma2,
            cv: (mu > 0.0).then(|| sigma2.sqrt() / mu),
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }
}

fn check_probabilities(p: &[f64]) -> Result<()> {
    match p.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        Some(bad) => Err(Error::Domain(format!("probability {bad} outside [0, 1]"))),
        None => Ok(()),
    }
}

/// Probability that a vertex with per-draw hit probability `pi` is hit at
/// least once in `draws` independent draws: `1 - (1 - pi)^draws`.
pub fn vertex_hit_prob(pi: f64, draws: u64) -> f64 {
    if draws == 0 || pi <= 0.0 {
        return 0.0;
    }
    if pi >= 1.0 {
        return 1.0;
    }
    -(draws as f64 * (-pi).ln_1p()).exp_m1()
}

/// Mean and variance of a sum of independent Bernoulli(p_v).
pub fn pb_moments(p: &[f64]) -> Result<PbMoments> {
    check_probabilities(p)?;
    let mut mu = CompensatedSum::default();
    let mut var = CompensatedSum::default();
    for &pv in p {
        mu.add(pv);
        var.add(pv * (1.0 - pv));
    }
    Ok(PbMoments::from_sums(mu.value(), var.value()))
}

/// Exact Poisson-binomial pmf over `0..=len(p)` by sequential convolution.
pub fn pb_exact_distribution(p: &[f64]) -> Result<Vec<f64>> {
    if p.len() > PB_EXACT_MAX_LEN {
        return Err(Error::Config(format!(
            "exact Poisson-binomial limited to {PB_EXACT_MAX_LEN} terms, got {}",
            p.len()
        )));
    }
    check_probabilities(p)?;
    let mut pmf = vec![0.0; p.len() + 1];
    pmf[0] = 1.0;
    for (i, &pv) in p.iter().enumerate() {
        for k in (1..=i + 1).rev() {
            pmf[k] = pmf[k] * (1.0 - pv) + pmf[k - 1] * pv;
        }
        pmf[0] *= 1.0 - pv;
    }
    Ok(pmf)
}

/// Smallest `k` with `P(X <= k) >= q`.
pub fn pmf_quantile(pmf: &[f64], q: f64) -> usize {
    let mut acc = 0.0;
    for (k, &mass) in pmf.iter().enumerate() {
        acc += mass;
        if acc >= q {
            return k;
        }
    }
    pmf.len().saturating_sub(1)
}
