use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fock::ModelParams;

/// Below this `gamma t` the kernels are summed as Taylor series; the closed
/// forms cancel catastrophically there.
const SERIES_BELOW: f64 = 0.5;

/// Time kernels of continuous counting at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdKernels {
    pub gamma_t: f64,
    /// `(2 chi^2 / gamma^2) (-3 + gamma t + 4 e^{-gamma t / 2} - e^{-gamma t})`.
    pub g: f64,
    /// `(2 chi^2 / gamma^2) (gamma t - 2 (1 - e^{-gamma t / 2}))`.
    pub h: f64,
    /// `(4 chi^2 / gamma^2) (1 - e^{-gamma t / 2})^2`.
    pub mu: f64,
    /// `2 g`, the count scale per unit `N^2`.
    pub u: f64,
    /// Monitor coherent amplitude per unit total photon number.
    pub z_factor: C64,
}

/// Sign of the exponential inside the no-count amplitude exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AmplitudeConvention {
    /// `e^{-gamma t / 2}`, which keeps the count distribution normalized.
    Corrected,
    /// `e^{+gamma t / 2}`; inconsistent with `h`, kept for regression tests.
    PositiveExponent,
}

/// Whether counts use the exact kernel or its long-time linearization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum KernelMode {
    #[default]
    Exact,
    /// `u = (2 chi / gamma)^2 gamma t`, valid for `gamma t >> 1`.
    Asymptotic,
}

/// `-3 + x + 4 e^{-x/2} - e^{-x}`.
pub(crate) fn f_kernel(x: f64) -> f64 {
    if x < SERIES_BELOW {
        series(x, 3, |n| {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            sign * (2f64.powi(2 - n as i32) - 1.0)
        })
    } else {
        x + 4.0 * (-x / 2.0).exp_m1() - (-x).exp_m1()
    }
}

/// `x - 2 (1 - e^{-x/2})`.
pub(crate) fn q_kernel(x: f64) -> f64 {
    if x < SERIES_BELOW {
        series(x, 2, |n| 2.0 * (-0.5f64).powi(n as i32))
    } else {
        x + 2.0 * (-x / 2.0).exp_m1()
    }
}

/// `sum_{n >= start} c(n) x^n / n!`, stopped once terms are negligible.
fn series(x: f64, start: u32, coeff: impl Fn(u32) -> f64) -> f64 {
    let mut pow = 1.0;
    for n in 1..=start {
        pow *= x / n as f64;
    }
    let mut sum = 0.0;
    for n in start..start + 60 {
        let term = coeff(n) * pow;
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
        pow *= x / (n + 1) as f64;
    }
    sum
}

pub fn eval_kernels(params: &ModelParams, t: f64) -> Result<SdKernels> {
    params.validate()?;
    if !(t >= 0.0) || !t.is_finite() {
        return invalid(format!("time must be finite and >= 0, got {t}"));
    }
    Ok(kernels_at(params.chi_over_gamma(), params.gamma * t))
}

/// Kernels as functions of `chi / gamma` and `gamma t` alone.
pub fn kernels_at(chi_over_gamma: f64, gamma_t: f64) -> SdKernels {
    let c2 = chi_over_gamma * chi_over_gamma;
    let one_minus_e = -(-gamma_t / 2.0).exp_m1();
    let g = 2.0 * c2 * f_kernel(gamma_t);
    SdKernels {
        gamma_t,
        g,
        h: 2.0 * c2 * q_kernel(gamma_t),
        mu: 4.0 * c2 * one_minus_e * one_minus_e,
        u: 2.0 * g,
        z_factor: C64::new(0.0, -2.0 * chi_over_gamma * one_minus_e),
    }
}

impl SdKernels {
    /// `2h - mu = 2g`, checked to 1e-12 relative to the largest term.
    pub fn identity_ok(&self) -> bool {
        let scale = (2.0 * self.h).max(1.0);
        (2.0 * self.h - self.mu - 2.0 * self.g).abs() <= 1e-12 * scale
    }

    /// Long-time form of `u`.
    pub fn asymptotic_u(chi_over_gamma: f64, gamma_t: f64) -> f64 {
        4.0 * chi_over_gamma * chi_over_gamma * gamma_t
    }

    pub fn u_for(&self, chi_over_gamma: f64, mode: KernelMode) -> f64 {
        match mode {
            KernelMode::Exact => self.u,
            KernelMode::Asymptotic => Self::asymptotic_u(chi_over_gamma, self.gamma_t),
        }
    }

    /// No-count amplitude exponent per unit `N^2`.
    pub fn amplitude_exponent(&self, chi_over_gamma: f64, convention: AmplitudeConvention) -> f64 {
        match convention {
            AmplitudeConvention::Corrected => -self.h,
            AmplitudeConvention::PositiveExponent => {
                let x = self.gamma_t;
                -2.0 * chi_over_gamma * chi_over_gamma * (x - 2.0 * (1.0 - (x / 2.0).exp()))
            }
        }
    }

    /// Total count probability of sector `N`, obtained by summing the
    /// per-count weights `(u N^2)^k / k! e^{2A + |z|^2}` over all `k`.
    /// Equals 1 for a consistent amplitude exponent.
    pub fn sector_norm(&self, chi_over_gamma: f64, total: usize, convention: AmplitudeConvention) -> f64 {
        let n2 = (total * total) as f64;
        let a = self.amplitude_exponent(chi_over_gamma, convention) * n2;
        (self.u * n2 + 2.0 * a + self.mu * n2).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct_f(x: f64) -> f64 {
        -3.0 + x + 4.0 * (-x / 2.0).exp() - (-x).exp()
    }

    #[test]
    fn zero_time_is_zero() {
        let k = kernels_at(1.3, 0.0);
        assert_eq!((k.g, k.h, k.mu, k.u), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(k.z_factor.norm(), 0.0);
    }

    #[test]
    fn series_agrees_with_closed_form_at_switch() {
        for x in [0.3, 0.49, 0.5, 0.51] {
            let s = series(x, 3, |n| {
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                sign * (2f64.powi(2 - n as i32) - 1.0)
            });
            assert!((s - direct_f(x)).abs() < 1e-15, "x = {x}");
        }
    }

    #[test]
    fn small_time_limits() {
        let (cg, x) = (0.7, 1e-4);
        let k = kernels_at(cg, x);
        let c2 = cg * cg;
        assert!((k.g / (c2 * x.powi(3) / 6.0) - 1.0).abs() < 1e-3);
        assert!((k.h / (c2 * x * x / 2.0) - 1.0).abs() < 1e-3);
        assert!((k.mu / (c2 * x * x) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn long_time_value() {
        let k = kernels_at(1.0, 10.0);
        let expected = 4.0 * (-3.0 + 10.0 + 4.0 * (-5f64).exp() - (-10f64).exp());
        assert!((k.u - expected).abs() < 1e-12);
        assert!((k.u - 28.107).abs() < 1e-3);
    }

    #[test]
    fn identity_holds_across_scales() {
        for &x in &[0.0, 1e-8, 1e-3, 0.2, 0.5, 1.0, 7.0, 50.0] {
            assert!(kernels_at(2.0, x).identity_ok(), "x = {x}");
        }
    }

    #[test]
    fn positive_exponent_breaks_normalization() {
        let k = kernels_at(1.0, 0.8);
        assert!((k.sector_norm(1.0, 3, AmplitudeConvention::Corrected) - 1.0).abs() < 1e-12);
        assert!((k.sector_norm(1.0, 3, AmplitudeConvention::PositiveExponent) - 1.0).abs() > 1e-2);
    }
}
