//! Continuous photocounting of the monitor mode.
//!
//! The monitor is driven into a coherent state whose amplitude grows with the
//! total photon number `N` of A and B while a detector at rate `gamma`
//! empties it. Everything observable about the count record then depends on
//! time only through the kernels in [`kernels`].

pub mod kernels;
mod scan;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fock::{apply_beam_splitter, ModelParams, TwoModeDensity, TwoModeState};
use crate::mixture::{PoissonMixture, TAIL_TOL};
use crate::numerics::{bisect_increasing, golden_section_max, ln_factorial};
use crate::projective::{condition_on_count, MeanVariance, MIN_OUTCOME_PROBABILITY};

pub use kernels::{eval_kernels, kernels_at, AmplitudeConvention, KernelMode, SdKernels};
pub use scan::{entanglement_scan, ScanRow};

/// Count statistics at time `t` for the given kernel mode.
pub fn count_mixture(state: &TwoModeState, params: &ModelParams, t: f64, mode: KernelMode) -> Result<PoissonMixture> {
    let k = eval_kernels(params, t)?;
    Ok(PoissonMixture::new(state.number_distribution(), k.u_for(params.chi_over_gamma(), mode)))
}

/// Probability of `k` counts in `[0, t]`.
pub fn count_probability(state: &TwoModeState, params: &ModelParams, t: f64, k: u32) -> Result<f64> {
    Ok(count_mixture(state, params, t, KernelMode::Exact)?.pmf(k))
}

/// `P(k, t)` tabulated over a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountDistribution {
    pub chi: f64,
    pub gamma: f64,
    pub time_grid: Vec<f64>,
    /// Counts `0..=k_max`, the adaptive cutoff of the latest time.
    pub k_range: Vec<u32>,
    /// One row per time, one column per count.
    pub values: Vec<Vec<f64>>,
    pub row_sums: Vec<f64>,
}

/// Evaluates `P(k, t)` on `times`, with `k` extended until the tail beyond
/// the last column is below 1e-12 at every time.
pub fn count_distribution(state: &TwoModeState, params: &ModelParams, times: &[f64]) -> Result<CountDistribution> {
    if times.is_empty() {
        return invalid("time grid is empty");
    }
    if times.windows(2).any(|w| !(w[0] < w[1])) {
        return invalid("time grid must be strictly increasing");
    }
    let mixtures = times
        .iter()
        .map(|&t| count_mixture(state, params, t, KernelMode::Exact))
        .collect::<Result<Vec<_>>>()?;
    let k_max = mixtures.iter().map(|m| m.cutoff(TAIL_TOL)).max().unwrap_or(0);
    let values: Vec<Vec<f64>> = mixtures.par_iter().map(|mix| (0..=k_max).map(|k| mix.pmf(k)).collect()).collect();
    let row_sums = values.iter().map(|r| r.iter().sum()).collect();
    Ok(CountDistribution {
        chi: params.chi,
        gamma: params.gamma,
        time_grid: times.to_vec(),
        k_range: (0..=k_max).collect(),
        values,
        row_sums,
    })
}

/// Sum over `(m, n)` of the unnormalized conditional-state diagonal, built
/// from `h` and `mu` rather than `g`. Agrees with [`count_probability`]
/// exactly when the kernels satisfy `2h - mu = 2g`.
pub fn conditional_trace(state: &TwoModeState, params: &ModelParams, t: f64, k: u32) -> Result<f64> {
    let kern = eval_kernels(params, t)?;
    let lnf = ln_factorial(k);
    let p = state.number_distribution();
    Ok(p.iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(n, &w)| {
            let n2 = (n * n) as f64;
            let base = if k == 0 { 0.0 } else if n == 0 { f64::NEG_INFINITY } else { k as f64 * (kern.u * n2).ln() };
            w * (base - lnf - 2.0 * kern.h * n2 + kern.mu * n2).exp()
        })
        .sum())
}

/// State of A and B after `k` counts in `[0, t]`, with unit trace.
///
/// Elements are `u^k/k! (N N')^k e^{-h (N^2 + N'^2) + mu N N'}` times the
/// freely evolved density `<m,n| U_t rho U_t^dag |m',n'>`. They are formed
/// in log space relative to the largest diagonal weight, which bounds every
/// off-diagonal factor by one.
pub fn postselect_density(state: &TwoModeState, params: &ModelParams, t: f64, k: u32) -> Result<TwoModeDensity> {
    let probability = count_probability(state, params, t, k)?;
    if !(probability >= MIN_OUTCOME_PROBABILITY) {
        return Err(Error::OutcomeImpossible { k, probability });
    }
    let kern = eval_kernels(params, t)?;
    let evolved = apply_beam_splitter(state, params.lambda, t);
    let (d_a, d_b) = (evolved.d_a(), evolved.d_b());
    let log_w = |n: usize| -> f64 {
        let nf = n as f64;
        let count = if k == 0 { 0.0 } else if n == 0 { f64::NEG_INFINITY } else { k as f64 * nf.ln() };
        count - kern.h * nf * nf
    };
    let n_tot = d_a + d_b - 1;
    let lw: Vec<f64> = (0..n_tot).map(log_w).collect();
    let p = evolved.number_distribution();
    let shift = (0..n_tot)
        .filter(|&n| p[n] > 0.0)
        .map(|n| 2.0 * lw[n] + kern.mu * (n * n) as f64)
        .fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        return Err(Error::OutcomeImpossible { k, probability });
    }
    let dim = d_a * d_b;
    let amps: Vec<(usize, C64)> = (0..dim).map(|i| (i / d_b + i % d_b, evolved.coeff(i / d_b, i % d_b))).collect();
    let rho = DMatrix::from_fn(dim, dim, |i, j| {
        let (ni, ci) = amps[i];
        let (nj, cj) = amps[j];
        if ci == C64::new(0.0, 0.0) || cj == C64::new(0.0, 0.0) {
            return C64::new(0.0, 0.0);
        }
        let w = lw[ni] + lw[nj] + kern.mu * (ni * nj) as f64 - shift;
        ci * cj.conj() * w.exp()
    });
    let mut dens = TwoModeDensity::from_matrix_unchecked(rho, d_a, d_b);
    dens.symmetrize();
    dens.normalize()?;
    Ok(dens)
}

/// Pure conditional state in the short-time limit, `N^k |psi(t)>` normalized.
pub fn short_time_state(state: &TwoModeState, lambda: f64, t: f64, k: u32) -> Result<TwoModeState> {
    if !(t >= 0.0) || !t.is_finite() {
        return invalid(format!("time must be finite and >= 0, got {t}"));
    }
    let evolved = apply_beam_splitter(state, lambda, t);
    if k == 0 {
        return Ok(evolved);
    }
    match condition_on_count(&evolved, 0.0, k) {
        Err(Error::Degenerate(_)) => Err(Error::OutcomeImpossible { k, probability: 0.0 }),
        other => other,
    }
}

/// Mean and variance of the count at time `t`.
pub fn count_mean_variance(state: &TwoModeState, params: &ModelParams, t: f64, mode: KernelMode) -> Result<MeanVariance> {
    Ok(MeanVariance::from_mixture(&count_mixture(state, params, t, mode)?))
}

const PROFILE_POINTS: usize = 400;

/// Value of `u = 2g` maximizing `P(k)` for the state's number distribution.
///
/// Depends on the state alone: the coupling ratio only maps `u` to time.
pub fn most_probable_u(state: &TwoModeState, k: u32) -> Result<f64> {
    if k == 0 {
        return Ok(0.0);
    }
    let mix = PoissonMixture::new(state.number_distribution(), 1.0);
    let support: Vec<usize> = mix.weights().iter().enumerate().filter(|(n, &w)| *n > 0 && w > 0.0).map(|(n, _)| n).collect();
    if support.is_empty() {
        return Err(Error::NoInteriorMaximum { k, profile: Vec::new() });
    }
    if support.len() == 1 {
        // Poisson mode of a single sector.
        let n = support[0] as f64;
        return Ok(k as f64 / (n * n));
    }
    let p_at = |u: f64| PoissonMixture::new(mix.weights().to_vec(), u).pmf(k);
    let second = mix.number_moment(1);
    let mut lo = 1e-6 * k as f64 / second;
    let mut hi = 10.0 * k as f64 / second;
    for _ in 0..6 {
        let ln_lo = lo.ln();
        let step = (hi.ln() - ln_lo) / (PROFILE_POINTS - 1) as f64;
        let profile: Vec<(f64, f64)> =
            (0..PROFILE_POINTS).map(|i| (ln_lo + step * i as f64).exp()).map(|u| (u, p_at(u))).collect();
        let mut best = 0;
        for (i, &(_, p)) in profile.iter().enumerate() {
            if p > profile[best].1 {
                best = i;
            }
        }
        if best == 0 {
            lo /= 1e3;
            continue;
        }
        if best == PROFILE_POINTS - 1 {
            hi *= 10.0;
            continue;
        }
        let x = golden_section_max(|lu| p_at(lu.exp()), profile[best - 1].0.ln(), profile[best + 1].0.ln(), 1e-12);
        return Ok(x.exp());
    }
    let step = (hi.ln() - lo.ln()) / (PROFILE_POINTS - 1) as f64;
    let profile = (0..PROFILE_POINTS).map(|i| (lo.ln() + step * i as f64).exp()).map(|u| (u, p_at(u))).collect();
    Err(Error::NoInteriorMaximum { k, profile })
}

/// `gamma t` at which `u(gamma t) = target` for the given coupling ratio.
pub fn gamma_t_for_u(chi_over_gamma: f64, target: f64) -> f64 {
    if target <= 0.0 {
        return 0.0;
    }
    let u = |x: f64| kernels_at(chi_over_gamma, x).u;
    let mut hi = 1.0;
    while u(hi) < target {
        hi *= 2.0;
    }
    bisect_increasing(|x| u(x) - target, 0.0, hi, 1e-12)
}

/// Time at which `k` counts are most likely; zero for `k = 0`.
pub fn most_probable_time(state: &TwoModeState, params: &ModelParams, k: u32) -> Result<f64> {
    params.validate()?;
    let u_star = most_probable_u(state, k)?;
    Ok(gamma_t_for_u(params.chi_over_gamma(), u_star) / params.gamma)
}

/// Coupling ratio `chi / gamma` that places the most probable time of `k`
/// counts at `target_gamma_t`.
pub fn fit_chi_over_gamma(state: &TwoModeState, k: u32, target_gamma_t: f64) -> Result<f64> {
    if k == 0 {
        return invalid("the k = 0 peak sits at t = 0 and cannot fix the coupling");
    }
    if !(target_gamma_t > 0.0) || !target_gamma_t.is_finite() {
        return invalid(format!("target gamma t must be > 0, got {target_gamma_t}"));
    }
    let u_star = most_probable_u(state, k)?;
    Ok((u_star / (4.0 * kernels::f_kernel(target_gamma_t))).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{density_from_pure, entanglement_report};

    fn coherent5() -> TwoModeState {
        let a = C64::new(5f64.sqrt(), 0.0);
        TwoModeState::coherent_product(a, a, 1e-12).unwrap()
    }

    fn params(cg: f64) -> ModelParams {
        ModelParams::new(0.3, cg, 1.0).unwrap()
    }

    #[test]
    fn zero_time_counts_nothing() {
        let s = coherent5();
        assert!((count_probability(&s, &params(1.0), 0.0, 0).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(count_probability(&s, &params(1.0), 0.0, 1).unwrap(), 0.0);
    }

    #[test]
    fn number_state_counts_are_poisson() {
        let s = TwoModeState::number(2, 1, 3, 2).unwrap();
        let p = params(0.8);
        let mean = eval_kernels(&p, 0.7).unwrap().u * 9.0;
        let expected = mean.powi(4) * (-mean).exp() / 24.0;
        assert!((count_probability(&s, &p, 0.7, 4).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn distribution_rows_are_normalized() {
        let d = count_distribution(&coherent5(), &params(1.0), &[0.0, 0.1, 0.5, 2.0]).unwrap();
        for s in &d.row_sums {
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn numerator_trace_equals_probability() {
        let s = coherent5();
        for (t, k) in [(0.2, 1), (0.5, 4), (1.5, 9)] {
            let a = conditional_trace(&s, &params(0.9), t, k).unwrap();
            let b = count_probability(&s, &params(0.9), t, k).unwrap();
            assert!((a - b).abs() < 1e-12, "t = {t}, k = {k}");
        }
    }

    #[test]
    fn number_state_evolves_freely() {
        let s = TwoModeState::number(2, 1, 3, 2).unwrap();
        let p = params(0.8);
        let rho = postselect_density(&s, &p, 0.6, 5).unwrap();
        let free = apply_beam_splitter(&s, p.lambda, 0.6);
        assert!(rho.max_abs_diff(&density_from_pure(&free)) < 1e-12);
    }

    /// Applies `e^{mu N . N}` as the series `sum_j mu^j / j! N^j rho N^j`.
    fn series_density(state: &TwoModeState, p: &ModelParams, t: f64, k: u32, terms: u32) -> TwoModeDensity {
        let kern = eval_kernels(p, t).unwrap();
        let ev = apply_beam_splitter(state, p.lambda, t);
        let (d_a, d_b) = (ev.d_a(), ev.d_b());
        let dim = d_a * d_b;
        let amp = |i: usize| {
            let n = (i / d_b + i % d_b) as f64;
            ev.coeff(i / d_b, i % d_b) * n.powi(k as i32) * (-kern.h * n * n).exp()
        };
        let n_of = |i: usize| (i / d_b + i % d_b) as f64;
        let mut rho = DMatrix::<C64>::zeros(dim, dim);
        let mut coef = 1.0;
        for j in 0..terms {
            if j > 0 {
                coef *= kern.mu / j as f64;
            }
            for a in 0..dim {
                for b in 0..dim {
                    rho[(a, b)] += amp(a) * amp(b).conj() * coef * (n_of(a) * n_of(b)).powi(j as i32);
                }
            }
        }
        let mut d = TwoModeDensity::from_matrix_unchecked(rho, d_a, d_b);
        d.normalize().unwrap();
        d
    }

    #[test]
    fn closed_form_matches_superoperator_series() {
        let s = TwoModeState::superposition(&[(0, 1, C64::new(1.0, 0.0)), (2, 1, C64::new(0.5, 0.5)), (1, 3, C64::new(0.0, 0.7))])
            .unwrap();
        let p = params(0.6);
        let closed = postselect_density(&s, &p, 0.9, 2).unwrap();
        let series = series_density(&s, &p, 0.9, 2, 80);
        assert!(closed.max_abs_diff(&series) < 1e-12);
    }

    #[test]
    fn short_time_limit_matches_pure_state() {
        let s = coherent5();
        let p = params(1.0);
        let t = 1e-3;
        for k in [0, 1, 3] {
            let rho = postselect_density(&s, &p, t, k).unwrap();
            let pure = short_time_state(&s, p.lambda, t, k).unwrap();
            assert!(rho.fidelity_with_pure(&pure) >= 1.0 - 1e-4, "k = {k}");
        }
        let r0 = entanglement_report(&density_from_pure(&short_time_state(&s, 0.3, 0.1, 0).unwrap())).unwrap();
        assert!(r0.excess.abs() < 1e-10);
    }

    #[test]
    fn number_state_peak_time() {
        let s = TwoModeState::number(1, 1, 2, 2).unwrap();
        let p = params(0.5);
        let tm = most_probable_time(&s, &p, 3).unwrap();
        let u = eval_kernels(&p, tm).unwrap().u;
        assert!((u * 4.0 - 3.0).abs() < 1e-9);
        assert_eq!(most_probable_time(&s, &p, 0).unwrap(), 0.0);
    }

    #[test]
    fn generic_peak_is_stationary() {
        let s = coherent5();
        let p = params(1.0);
        let tm = most_probable_time(&s, &p, 4).unwrap();
        let here = count_probability(&s, &p, tm, 4).unwrap();
        for dt in [-1e-3, 1e-3] {
            assert!(count_probability(&s, &p, tm + dt, 4).unwrap() <= here);
        }
    }

    #[test]
    fn vacuum_has_no_peak() {
        let s = TwoModeState::number(0, 0, 1, 1).unwrap();
        assert!(matches!(most_probable_time(&s, &params(1.0), 2), Err(Error::NoInteriorMaximum { .. })));
    }

    #[test]
    fn mean_variance_uses_exact_kernel() {
        let s = coherent5();
        let p = params(1.0);
        let mv = count_mean_variance(&s, &p, 0.0, KernelMode::Exact).unwrap();
        assert_eq!((mv.mean, mv.variance), (0.0, 0.0));
        let t = 2.0;
        let mv = count_mean_variance(&s, &p, t, KernelMode::Exact).unwrap();
        let dist = count_mixture(&s, &p, t, KernelMode::Exact).unwrap().distribution(1e-15);
        let mean: f64 = dist.iter().enumerate().map(|(k, q)| k as f64 * q).sum();
        let second: f64 = dist.iter().enumerate().map(|(k, q)| (k * k) as f64 * q).sum();
        assert!((mv.mean - mean).abs() < 1e-9 * mean);
        assert!((mv.variance - (second - mean * mean)).abs() < 1e-8 * mv.variance);
    }
}
