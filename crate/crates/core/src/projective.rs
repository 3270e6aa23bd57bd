//! Instantaneous projective measurement of the monitor photon number.
//!
//! After an interaction time `t` the monitor holds a coherent state whose
//! amplitude is `-i chi t N`, so a number projection onto `k` counts weights
//! each total-number sector by a Poisson amplitude in `k`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fock::{apply_beam_splitter, TwoModeState};
use crate::mixture::{PoissonMixture, TAIL_TOL};

/// Probabilities below this are treated as impossible outcomes.
pub const MIN_OUTCOME_PROBABILITY: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub struct PmOutcome {
    pub k: u32,
    pub t: f64,
    pub probability: f64,
    /// Normalized, with the largest coefficient real and positive.
    pub post_state: TwoModeState,
}

/// First two moments of a count distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanVariance {
    pub mean: f64,
    pub variance: f64,
    /// `variance - mean`, the part carried by the spread of `N^2`.
    pub excess: f64,
}

impl MeanVariance {
    pub(crate) fn from_mixture(mix: &PoissonMixture) -> Self {
        let mean = mix.mean();
        let excess = mix.factorial_moment(2) - mean * mean;
        Self { mean, variance: mean + excess, excess }
    }
}

/// Estimate of the mean total photon number `F` of a coherent input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FEstimate {
    pub value: f64,
    /// False when the estimate came out negative.
    pub physical: bool,
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return invalid(format!("time must be finite and >= 0, got {t}"));
    }
    Ok(())
}

/// Count statistics of the projection at time `t`.
pub fn pm_mixture(state: &TwoModeState, chi: f64, t: f64) -> Result<PoissonMixture> {
    check_time(t)?;
    let ct = chi * t;
    Ok(PoissonMixture::new(state.number_distribution(), ct * ct))
}

pub fn pm_probability(state: &TwoModeState, chi: f64, t: f64, k: u32) -> Result<f64> {
    Ok(pm_mixture(state, chi, t)?.pmf(k))
}

/// `P(k, t)` for `k = 0..=K`, with `K` chosen so the neglected tail is below 1e-12.
pub fn pm_distribution(state: &TwoModeState, chi: f64, t: f64) -> Result<Vec<f64>> {
    Ok(pm_mixture(state, chi, t)?.distribution(TAIL_TOL))
}

/// Normalized `N^k exp(-s N^2 / 2) psi`, built in log space so large `k` or
/// `s` neither overflow nor underflow before normalization.
pub(crate) fn condition_on_count(state: &TwoModeState, scale: f64, k: u32) -> Result<TwoModeState> {
    let log_w = |n: usize| {
        if n == 0 {
            if k == 0 {
                0.0
            } else {
                f64::NEG_INFINITY
            }
        } else {
            let nf = n as f64;
            k as f64 * nf.ln() - 0.5 * scale * nf * nf
        }
    };
    let p = state.number_distribution();
    let max = p
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(n, _)| log_w(n))
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Degenerate("no sector supports this count".into()));
    }
    state.scale_by_total(|n| (log_w(n) - max).exp())
}

/// Projects the monitor onto `k` photons after time `t`.
pub fn pm_postselect(state: &TwoModeState, lambda: f64, chi: f64, t: f64, k: u32) -> Result<PmOutcome> {
    let probability = pm_probability(state, chi, t, k)?;
    if !(probability >= MIN_OUTCOME_PROBABILITY) {
        return Err(Error::OutcomeImpossible { k, probability });
    }
    let evolved = apply_beam_splitter(state, lambda, t);
    let ct = chi * t;
    let mut post_state = condition_on_count(&evolved, ct * ct, k)?;
    post_state.fix_global_phase();
    Ok(PmOutcome { k, t, probability, post_state })
}

/// `k_bar = (chi t)^2 <N^2>` and `Var(k) = k_bar + (chi t)^4 Var(N^2)`.
pub fn pm_mean_variance(state: &TwoModeState, chi: f64, t: f64) -> Result<MeanVariance> {
    Ok(MeanVariance::from_mixture(&pm_mixture(state, chi, t)?))
}

/// Mean photon number of a coherent input from the count mean and excess
/// variance, `s` being the count scale (`(chi t)^2` here, `2g` for
/// continuous detection).
///
/// For coherent states `<N^2> = F^2 + F` and `Var(N^2) = 4F^3 + 6F^2 + F`;
/// eliminating `F^3` and `F^2` gives a ratio linear in the data.
pub fn infer_f_scaled(mean: f64, excess: f64, scale: f64) -> Result<FEstimate> {
    if !(scale > 0.0) || !scale.is_finite() {
        return invalid(format!("count scale must be > 0, got {scale}"));
    }
    if !(mean.is_finite() && excess.is_finite()) {
        return invalid("count moments must be finite");
    }
    if mean == 0.0 {
        return Err(Error::Degenerate("zero mean count carries no information on F".into()));
    }
    let denom = 4.0 * mean / scale - 1.0;
    if denom.abs() <= 1e-12 * (4.0 * mean / scale).max(1.0) {
        return Err(Error::Degenerate(format!("denominator 4 k_bar / s - 1 vanishes (k_bar = {mean}, s = {scale})")));
    }
    let value = (excess / (scale * scale) - 2.0 * mean / scale) / denom;
    let physical = value >= 0.0;
    if !physical {
        log::warn!("inferred F = {value} is negative");
    }
    Ok(FEstimate { value, physical })
}

/// [`infer_f_scaled`] with `s = (chi t)^2`; `excess` is `Var(k) - k_bar`.
pub fn infer_f(mean: f64, excess: f64, chi: f64, t: f64) -> Result<FEstimate> {
    check_time(t)?;
    infer_f_scaled(mean, excess, (chi * t).powi(2))
}

/// Draws one projective outcome from `P(k, t)`.
pub fn pm_sample_count<R: Rng + ?Sized>(state: &TwoModeState, chi: f64, t: f64, rng: &mut R) -> Result<u32> {
    Ok(pm_mixture(state, chi, t)?.sampler().sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{density_from_pure, entanglement_report};
    use num_complex::Complex64 as C64;

    fn coherent5() -> TwoModeState {
        let a = C64::new(5f64.sqrt(), 0.0);
        TwoModeState::coherent_product(a, a, 1e-12).unwrap()
    }

    #[test]
    fn zero_time_is_certain_zero() {
        let s = coherent5();
        let p0 = pm_probability(&s, 1.0, 0.0, 0).unwrap();
        assert!((p0 - s.norm_sqr()).abs() < 1e-13, "{p0} {}", s.norm_sqr());
        assert_eq!(pm_probability(&s, 1.0, 0.0, 2).unwrap(), 0.0);
    }

    #[test]
    fn single_photon_vacuum_count() {
        let s = TwoModeState::number(1, 0, 2, 1).unwrap();
        let p = pm_probability(&s, 1.0, 1.0, 0).unwrap();
        assert!((p - 0.367879441171442).abs() < 1e-12);
    }

    #[test]
    fn number_state_is_unaffected() {
        let s = TwoModeState::number(2, 1, 3, 2).unwrap();
        let free = apply_beam_splitter(&s, 0.8, 0.5);
        for k in [0, 3, 9] {
            let out = pm_postselect(&s, 0.8, 0.4, 0.5, k).unwrap();
            assert!(out.post_state.fidelity(&free) > 1.0 - 1e-12);
        }
    }

    #[test]
    fn coherent_moments_match_closed_form() {
        let mv = pm_mean_variance(&coherent5(), 1.0, 0.1).unwrap();
        assert!((mv.mean - 1.1).abs() < 1e-9);
        assert!((mv.excess - 0.461).abs() < 1e-9);
        assert!((mv.variance - 1.561).abs() < 1e-9);
        let f = infer_f(mv.mean, mv.excess, 1.0, 0.1).unwrap();
        assert!((f.value - 10.0).abs() < 1e-6 && f.physical);
    }

    #[test]
    fn infer_f_from_rounded_moments() {
        let f = infer_f(1.1, 0.461, 1.0, 0.1).unwrap();
        assert!((f.value - 10.0).abs() < 1e-12);
    }

    #[test]
    fn infer_f_degenerate_cases() {
        assert!(matches!(infer_f(0.0, 0.0, 1.0, 0.1), Err(Error::Degenerate(_))));
        // 4 k / s = 1
        assert!(matches!(infer_f(0.0025, 0.1, 1.0, 0.1), Err(Error::Degenerate(_))));
        let neg = infer_f(1.1, 0.0, 1.0, 0.1).unwrap();
        assert!(!neg.physical && neg.value < 0.0);
    }

    #[test]
    fn counting_entangles_coherent_input() {
        let out = pm_postselect(&coherent5(), 1.0, 1.0, 0.1, 3).unwrap();
        assert!((out.post_state.norm_sqr() - 1.0).abs() < 1e-10);
        let r = entanglement_report(&density_from_pure(&out.post_state)).unwrap();
        assert!(r.excess > 0.0 && r.s_ab.abs() < 1e-10);
    }

    #[test]
    fn impossible_outcome_is_reported() {
        let s = TwoModeState::number(0, 0, 1, 1).unwrap();
        assert!(matches!(pm_postselect(&s, 1.0, 1.0, 1.0, 1), Err(Error::OutcomeImpossible { k: 1, .. })));
    }

    #[test]
    fn huge_count_does_not_overflow() {
        let out = pm_postselect(&coherent5(), 0.0, 1.0, 1.0, 200).unwrap();
        assert!((out.post_state.norm_sqr() - 1.0).abs() < 1e-10);
    }
}
