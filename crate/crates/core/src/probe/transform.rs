use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ProbeMoments;
use crate::error::{invalid, Result};
use crate::numerics::{ln_factorial, CompensatedSum};

/// Cancellation estimates above this mark an `H` sample untrusted.
pub const CANCELLATION_LIMIT: f64 = 1e-4;
/// Series remainders above this mark an `H` sample untrusted.
pub const REMAINDER_LIMIT: f64 = 1e-6;
/// Negative Fourier coefficients beyond this are inconsistent.
pub const NEGATIVE_LIMIT: f64 = 1e-4;
/// Minimum samples per period of the fastest cosine.
pub const POINTS_PER_PERIOD: usize = 8;

/// Denominator of the `r`-th term of the cosine-moment series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FactorialConvention {
    /// `(2r)!`, which resums to `sum p_N cos(N x)`.
    #[default]
    DoubleIndex,
    /// `r!`; resums to `sum p_N exp(-x^2 N^2)` and breaks the round trip.
    SingleIndex,
}

impl FactorialConvention {
    fn ln_denominator(self, r: u32) -> f64 {
        match self {
            Self::DoubleIndex => ln_factorial(2 * r),
            Self::SingleIndex => ln_factorial(r),
        }
    }

    /// Closed-form resummation of one sector.
    fn sector(self, n: usize, x: f64) -> f64 {
        let nx = n as f64 * x;
        match self {
            Self::DoubleIndex => nx.cos(),
            Self::SingleIndex => (-nx * nx).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HSample {
    pub x: f64,
    /// Truncated series in the `kappa` moments.
    pub series: f64,
    /// Resummed value from sector weights, when known.
    pub exact: Option<f64>,
    /// Bound on the first omitted series term.
    pub remainder: f64,
    /// Largest term times machine epsilon over the result.
    pub cancellation: f64,
    pub trusted: bool,
}

impl HSample {
    /// Exact value when available, else the series.
    pub fn value(&self) -> f64 {
        self.exact.unwrap_or(self.series)
    }

    /// Whether [`Self::value`] can be relied on.
    pub fn usable(&self) -> bool {
        self.exact.is_some() || self.trusted
    }
}

/// `H(x) = sum_r (-1)^r x^(2r) kappa_r / d(r)` on each grid point.
pub fn h_function(moments: &ProbeMoments, x_grid: &[f64], convention: FactorialConvention) -> Result<Vec<HSample>> {
    if let Some(&x) = x_grid.iter().find(|&&x| !(0.0..TAU).contains(&x)) {
        return invalid(format!("x = {x} is outside [0, 2 pi)"));
    }
    let kappa = &moments.kappa_moments;
    let r_max = kappa.len() as u32 - 1;
    let s2 = (moments.support_bound as f64).powi(2);
    Ok(x_grid
        .par_iter()
        .map(|&x| {
            let mut sum = CompensatedSum::new();
            for (r, &k) in kappa.iter().enumerate() {
                let r = r as u32;
                let mag = if x == 0.0 {
                    if r == 0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    (2.0 * r as f64 * x.ln() - convention.ln_denominator(r)).exp()
                };
                let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
                sum.add(sign * mag * k);
            }
            let series = sum.value();
            let next = r_max + 1;
            let remainder = if x == 0.0 {
                0.0
            } else {
                kappa[r_max as usize] * s2 * (2.0 * next as f64 * x.ln() - convention.ln_denominator(next)).exp()
            };
            let cancellation = sum.max_abs_term() * f64::EPSILON / series.abs().max(f64::MIN_POSITIVE);
            let exact = moments.number_weights.as_ref().map(|w| {
                w.iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(n, &p)| p * convention.sector(n, x))
                    .collect::<CompensatedSum>()
                    .value()
            });
            HSample {
                x,
                series,
                exact,
                remainder,
                cancellation,
                trusted: cancellation <= CANCELLATION_LIMIT && remainder <= REMAINDER_LIMIT,
            }
        })
        .collect())
}

/// Uniform grid `x_i = 2 pi i / M` over one period.
pub fn uniform_grid(points: usize) -> Vec<f64> {
    (0..points).map(|i| TAU * i as f64 / points as f64).collect()
}

/// Points needed to resolve cosines up to order `j_max` and avoid aliasing
/// of sectors up to `support`.
pub fn grid_size(j_max: usize, support: usize) -> usize {
    (POINTS_PER_PERIOD * j_max.max(1)).max(2 * support + 2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierCoefficient {
    pub j: usize,
    /// As computed, possibly slightly negative.
    pub value: f64,
    /// `max(value, 0)`, for display.
    pub reported: f64,
    /// Set when the value is below `-1e-4`.
    pub inconsistent: bool,
}

/// `C(j)` from `H` samples on a uniform grid over `[0, 2 pi)`, by the
/// periodic trapezoid rule: `(1 / 2 pi) int H` for `j = 0` and
/// `(1 / pi) int cos(j x) H` for `j >= 1`.
pub fn fourier_coefficients(samples: &[HSample], j_max: usize) -> Result<Vec<FourierCoefficient>> {
    let m = samples.len();
    if m < POINTS_PER_PERIOD * j_max.max(1) {
        return invalid(format!("{m} samples cannot resolve j up to {j_max}; need {} per period", POINTS_PER_PERIOD));
    }
    for (i, s) in samples.iter().enumerate() {
        let expected = TAU * i as f64 / m as f64;
        if (s.x - expected).abs() > 1e-12 {
            return invalid("H samples must lie on the uniform grid 2 pi i / M");
        }
    }
    Ok((0..=j_max)
        .map(|j| {
            let sum: CompensatedSum = samples.iter().map(|s| (j as f64 * s.x).cos() * s.value()).collect();
            let norm = if j == 0 { 1.0 } else { 2.0 };
            let value = norm * sum.value() / m as f64;
            FourierCoefficient { j, value, reported: value.max(0.0), inconsistent: value < -NEGATIVE_LIMIT }
        })
        .collect())
}

/// Marginal of mode A when B was prepared in `|n0>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    pub b_number: usize,
    /// `|A_m|^2 = C(m + n0)`.
    pub squared_moduli: Vec<f64>,
    pub normalization: f64,
    /// Set when the moduli sum differs from 1 by more than 1e-3.
    pub normalization_violated: bool,
}

pub fn reconstruct_marginal(coefficients: &[FourierCoefficient], b_number: usize) -> Marginal {
    let squared_moduli: Vec<f64> = coefficients.iter().skip(b_number).map(|c| c.value).collect();
    let normalization: f64 = squared_moduli.iter().sum();
    let below: f64 = coefficients.iter().take(b_number).map(|c| c.value.abs()).sum();
    Marginal {
        b_number,
        squared_moduli,
        normalization,
        normalization_violated: (normalization - 1.0).abs() > 1e-3 || below > 1e-3,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{ModelParams, TwoModeState};
    use crate::probe::{analytic_moments, MomentPathway};
    use num_complex::Complex64 as C64;

    fn moments(s: &TwoModeState) -> ProbeMoments {
        let p = ModelParams::new(0.0, 1.0, 1.0).unwrap();
        analytic_moments(s, &p, 1.0, 12, MomentPathway::Factorial).unwrap()
    }

    #[test]
    fn h_at_zero_is_one() {
        let s = TwoModeState::superposition(&[(0, 1, C64::new(1.0, 0.0)), (2, 3, C64::new(0.0, 0.4))]).unwrap();
        let h = h_function(&moments(&s), &[0.0], FactorialConvention::DoubleIndex).unwrap();
        assert!((h[0].series - 1.0).abs() < 1e-12 && (h[0].exact.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn number_state_gives_cosine() {
        let s = TwoModeState::number(1, 2, 2, 3).unwrap();
        let grid = [0.1, 0.3, 0.5];
        for h in h_function(&moments(&s), &grid, FactorialConvention::DoubleIndex).unwrap() {
            assert!((h.series - (3.0 * h.x).cos()).abs() < 1e-9, "x = {}", h.x);
            assert!(h.trusted);
        }
    }

    #[test]
    fn large_argument_is_flagged() {
        let s = TwoModeState::number(4, 4, 5, 5).unwrap();
        let h = h_function(&moments(&s), &[5.0], FactorialConvention::DoubleIndex).unwrap();
        assert!(!h[0].trusted);
        assert!((h[0].exact.unwrap() - 40f64.cos()).abs() < 1e-12);
    }

    #[test]
    fn bell_state_coefficients() {
        let s = TwoModeState::superposition(&[(0, 0, C64::new(1.0, 0.0)), (1, 1, C64::new(1.0, 0.0))]).unwrap();
        let grid = uniform_grid(grid_size(2, 2));
        let h = h_function(&moments(&s), &grid, FactorialConvention::DoubleIndex).unwrap();
        for hs in &h {
            assert!((hs.value() - 0.5 * (1.0 + (2.0 * hs.x).cos())).abs() < 1e-12);
        }
        let c = fourier_coefficients(&h, 2).unwrap();
        assert!((c[0].value - 0.5).abs() < 1e-12 && c[1].value.abs() < 1e-12 && (c[2].value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_photon_and_vacuum() {
        for (s, j) in [(TwoModeState::number(1, 0, 2, 1).unwrap(), 1), (TwoModeState::number(0, 0, 1, 1).unwrap(), 0)] {
            let grid = uniform_grid(grid_size(3, 1));
            let c = fourier_coefficients(&h_function(&moments(&s), &grid, FactorialConvention::DoubleIndex).unwrap(), 3).unwrap();
            for coef in &c {
                let expected = if coef.j == j { 1.0 } else { 0.0 };
                assert!((coef.value - expected).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn coarse_grid_rejected() {
        let s = TwoModeState::number(1, 0, 2, 1).unwrap();
        let h = h_function(&moments(&s), &uniform_grid(8), FactorialConvention::DoubleIndex).unwrap();
        assert!(fourier_coefficients(&h, 3).is_err());
    }

    #[test]
    fn marginal_offsets_by_b_number() {
        let coefs: Vec<FourierCoefficient> = [0.0, 0.25, 0.75]
            .iter()
            .enumerate()
            .map(|(j, &v)| FourierCoefficient { j, value: v, reported: v, inconsistent: false })
            .collect();
        let m = reconstruct_marginal(&coefs, 1);
        assert_eq!(m.squared_moduli, vec![0.25, 0.75]);
        assert!(!m.normalization_violated);
        assert!(reconstruct_marginal(&coefs, 2).normalization_violated);
    }
}
