use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{monitor_cutoff, NoCountPropagator, ThreeModeState, Tolerances};
use crate::error::{invalid, Result};
use crate::fock::{ModelParams, TwoModeState};

/// Smallest sample count accepted by the estimators.
pub const MIN_SAMPLES: usize = 1000;

/// Count times of one simulated detection record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpRecord {
    /// Strictly increasing, all within `[0, final_time]`.
    pub jump_times: Vec<f64>,
    pub final_time: f64,
    /// Statistical weight; records are drawn from the exact distribution, so 1.
    pub weight: f64,
}

impl JumpRecord {
    pub fn count(&self) -> u32 {
        self.jump_times.len() as u32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    /// One-sided 95% upper bound `3 / n` reported when no sample hit `k`.
    pub zero_hit_bound: Option<f64>,
    pub n_samples: usize,
}

/// Counts per `k` over all sampled records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McHistogram {
    pub counts: Vec<u64>,
    pub n_samples: usize,
}

impl McHistogram {
    pub fn estimate(&self, k: u32) -> McEstimate {
        let n = self.n_samples as f64;
        let hits = self.counts.get(k as usize).copied().unwrap_or(0);
        let p = hits as f64 / n;
        McEstimate {
            estimate: p,
            std_error: (p * (1.0 - p) / n).sqrt(),
            zero_hit_bound: (hits == 0).then(|| 3.0 / n),
            n_samples: self.n_samples,
        }
    }
}

/// Generator for sample `i`: stream `i` of the seeded ChaCha8 family, so
/// results do not depend on scheduling or thread count.
fn sample_rng(seed: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    rng
}

struct Sampler {
    start: ThreeModeState,
    prop: NoCountPropagator,
    gamma: f64,
    t: f64,
}

impl Sampler {
    fn new(state: &TwoModeState, params: &ModelParams, t: f64, tol: Tolerances) -> Result<Self> {
        if !(t >= 0.0) || !t.is_finite() {
            return invalid(format!("time must be finite and >= 0, got {t}"));
        }
        let d_c = monitor_cutoff(params.chi_over_gamma(), state.max_total());
        let mut start = ThreeModeState::from_two_mode(state, d_c)?;
        let norm = start.norm_sqr();
        if !(norm > 0.0) {
            return invalid("initial state has zero norm");
        }
        start.scale(1.0 / norm.sqrt());
        let prop = NoCountPropagator::new(params, &start, tol)?;
        Ok(Self { start, prop, gamma: params.gamma, t })
    }

    /// Waiting-time algorithm: a count happens when the no-count norm
    /// decays to a fresh uniform threshold.
    fn record(&self, rng: &mut ChaCha8Rng) -> Result<JumpRecord> {
        let mut psi = self.start.clone();
        let mut now = 0.0;
        let mut jump_times = Vec::new();
        loop {
            let r: f64 = rng.gen();
            match self.prop.evolve_until_norm(&mut psi, self.t - now, r)? {
                Some(dt) => {
                    now += dt;
                    psi = psi.jump(self.gamma);
                    let norm = psi.norm_sqr();
                    if !(norm > 0.0) {
                        break;
                    }
                    psi.scale(1.0 / norm.sqrt());
                    jump_times.push(now);
                }
                None => break,
            }
        }
        Ok(JumpRecord { jump_times, final_time: self.t, weight: 1.0 })
    }
}

/// Simulated detection records, reproducible per seed.
pub fn sample_jump_records(
    state: &TwoModeState,
    params: &ModelParams,
    t: f64,
    n_samples: usize,
    seed: u64,
    tol: Tolerances,
) -> Result<Vec<JumpRecord>> {
    let sampler = Sampler::new(state, params, t, tol)?;
    (0..n_samples).into_par_iter().map(|i| sampler.record(&mut sample_rng(seed, i))).collect()
}

pub fn count_histogram_montecarlo(
    state: &TwoModeState,
    params: &ModelParams,
    t: f64,
    n_samples: usize,
    seed: u64,
    tol: Tolerances,
) -> Result<McHistogram> {
    if n_samples < MIN_SAMPLES {
        return invalid(format!("need at least {MIN_SAMPLES} samples, got {n_samples}"));
    }
    let records = sample_jump_records(state, params, t, n_samples, seed, tol)?;
    let k_max = records.iter().map(JumpRecord::count).max().unwrap_or(0) as usize;
    let mut counts = vec![0u64; k_max + 1];
    for r in &records {
        counts[r.count() as usize] += 1;
    }
    Ok(McHistogram { counts, n_samples })
}

/// Monte Carlo estimate of `P(k, t)`.
pub fn p_k_montecarlo(
    state: &TwoModeState,
    params: &ModelParams,
    t: f64,
    k: u32,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    Ok(count_histogram_montecarlo(state, params, t, n_samples, seed, Tolerances::default())?.estimate(k))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_are_ordered_and_reproducible() {
        let s = TwoModeState::number(2, 0, 3, 1).unwrap();
        let p = ModelParams::new(0.2, 0.8, 1.0).unwrap();
        let a = sample_jump_records(&s, &p, 1.5, 50, 7, Tolerances::default()).unwrap();
        let b = sample_jump_records(&s, &p, 1.5, 50, 7, Tolerances::default()).unwrap();
        assert_eq!(a, b);
        for r in &a {
            assert!(r.jump_times.windows(2).all(|w| w[0] < w[1]));
            assert!(r.jump_times.iter().all(|&x| x > 0.0 && x <= 1.5));
        }
    }

    #[test]
    fn too_few_samples_rejected() {
        let s = TwoModeState::number(1, 0, 2, 1).unwrap();
        let p = ModelParams::new(0.0, 1.0, 1.0).unwrap();
        assert!(p_k_montecarlo(&s, &p, 1.0, 1, 10, 1).is_err());
    }

    #[test]
    fn zero_hits_give_bound() {
        let h = McHistogram { counts: vec![1000], n_samples: 1000 };
        let e = h.estimate(4);
        assert_eq!(e.estimate, 0.0);
        assert_eq!(e.zero_hit_bound, Some(0.003));
    }
}
