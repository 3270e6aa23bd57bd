//! Count statistics of the form `P(k) = sum_N p_N Poisson(k; s N^2)`.
//!
//! Both the projective and the continuous measurement produce this shape:
//! the monitor sees a Poisson count with mean `s N^2` in each total-number
//! sector, and the sectors never mix because `N` is conserved.

use rand::Rng;

use crate::numerics::{ln_factorial, stirling2_table};

/// Target bound on the probability mass beyond the adaptive count cutoff.
pub const TAIL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PoissonMixture {
    /// `p_N`, indexed by total photon number.
    weights: Vec<f64>,
    /// Mean counts per unit `N^2`.
    scale: f64,
}

impl PoissonMixture {
    pub fn new(weights: Vec<f64>, scale: f64) -> Self {
        debug_assert!(scale >= 0.0);
        Self { weights, scale }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Poisson mean of sector `N`.
    pub fn sector_mean(&self, total: usize) -> f64 {
        self.scale * (total * total) as f64
    }

    fn sectors(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.weights.iter().copied().enumerate().filter(|&(_, p)| p > 0.0)
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn pmf(&self, k: u32) -> f64 {
        let lnf = ln_factorial(k);
        self.sectors().map(|(n, p)| p * poisson_pmf(k, self.sector_mean(n), lnf)).sum()
    }

    /// Smallest `K` such that the mass above `K` is provably below `tail_tol`.
    pub fn cutoff(&self, tail_tol: f64) -> u32 {
        let mu_max = self.sectors().map(|(n, _)| self.sector_mean(n)).fold(0.0, f64::max);
        let mut k = mu_max.floor() as u32;
        loop {
            let bound: f64 = self.sectors().map(|(n, p)| p * poisson_tail_bound(self.sector_mean(n), k)).sum();
            if bound < tail_tol {
                return k;
            }
            k += 1;
        }
    }

    /// `P(k)` for `k = 0..=K` with `K` from [`Self::cutoff`].
    pub fn distribution(&self, tail_tol: f64) -> Vec<f64> {
        (0..=self.cutoff(tail_tol)).map(|k| self.pmf(k)).collect()
    }

    /// `<N^(2r)>` over the sector weights (not renormalized).
    pub fn number_moment(&self, r: u32) -> f64 {
        self.sectors().map(|(n, p)| p * (n as f64).powi(2 * r as i32)).sum()
    }

    /// `E[k (k-1) ... (k-r+1)] = s^r <N^(2r)>`.
    pub fn factorial_moment(&self, r: u32) -> f64 {
        self.scale.powi(r as i32) * self.number_moment(r)
    }

    /// `E[k^r]` from the factorial moments through Stirling numbers.
    pub fn raw_moments(&self, r_max: u32) -> Vec<f64> {
        let s2 = stirling2_table(r_max as usize);
        (0..=r_max as usize)
            .map(|r| (0..=r).map(|j| s2[r][j] * self.factorial_moment(j as u32)).sum())
            .collect()
    }

    pub fn mean(&self) -> f64 {
        self.factorial_moment(1)
    }

    /// Variance of `k`; equals the mean plus `s^2 Var(N^2)`.
    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        mean + self.factorial_moment(2) - mean * mean
    }

    /// Cumulative table for repeated sampling.
    pub fn sampler(&self) -> CountSampler {
        let mut acc = 0.0;
        let cdf = self
            .distribution(TAIL_TOL)
            .into_iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        CountSampler { cdf }
    }
}

/// Draws counts by inverting a precomputed cumulative distribution.
#[derive(Debug, Clone)]
pub struct CountSampler {
    cdf: Vec<f64>,
}

impl CountSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let total = *self.cdf.last().unwrap_or(&1.0);
        let u: f64 = rng.gen::<f64>() * total;
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1) as u32
    }
}

fn poisson_pmf(k: u32, mu: f64, ln_k_fact: f64) -> f64 {
    if mu == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    (k as f64 * mu.ln() - mu - ln_k_fact).exp()
}

/// Chernoff bound on `P(X > k)` for `X ~ Poisson(mu)`; 1 when `k + 1 <= mu`.
pub fn poisson_tail_bound(mu: f64, k: u32) -> f64 {
    let j = k as f64 + 1.0;
    if mu == 0.0 {
        return 0.0;
    }
    if j <= mu {
        return 1.0;
    }
    (-mu + j * (1.0 + (mu / j).ln())).exp().min(1.0)
}
