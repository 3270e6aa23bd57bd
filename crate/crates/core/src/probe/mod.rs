//! Inference about the initial AB state from the count record on the monitor.
//!
//! Factorial moments of the counts give `<N^(2r)>` exactly at any time. Those
//! moments resum into `H(x) = sum p_N cos(N x)`, whose cosine coefficients
//! `C(j)` are the anti-diagonal weights `sum_m |C_{m, j-m}|^2`. Phases are out
//! of reach, and so is anything finer than the anti-diagonal sums.

mod classify;
mod moments;
mod transform;

pub use classify::{classify_special_state, Classification, ClassificationReport, SqueezedFit};
pub use moments::{
    analytic_moments, empirical_moments, raw_from_factorial, CountRecord, MomentPathway, MomentSource,
    NumberStatistics, ProbeMoments, DEFAULT_R_MAX, R_MAX_LIMIT,
};
pub use transform::{
    fourier_coefficients, grid_size, h_function, reconstruct_marginal, uniform_grid, FactorialConvention,
    FourierCoefficient, HSample, Marginal, CANCELLATION_LIMIT, NEGATIVE_LIMIT, POINTS_PER_PERIOD, REMAINDER_LIMIT,
};

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Tolerance on `|H| <= 1` and on `sum_j C(j) = 1` for exact inputs.
pub const ANALYTIC_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeOptions {
    /// Largest `j`; defaults to the support bound of the moments.
    pub j_max: Option<usize>,
    /// Grid size; defaults to [`grid_size`].
    pub grid_points: Option<usize>,
    /// Number state of mode B for the marginal.
    pub b_number: usize,
    pub convention: FactorialConvention,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self { j_max: None, grid_points: None, b_number: 0, convention: FactorialConvention::DoubleIndex }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeDiagnostics {
    pub max_remainder: f64,
    pub max_cancellation: f64,
    /// Samples whose series value is not trustworthy.
    pub untrusted_samples: usize,
    /// Samples whose value used by the transform is neither exact nor trusted.
    pub unusable_samples: usize,
    /// Largest `|H| - 1` over the grid, clipped at zero.
    pub h_bound_excess: f64,
    /// `sum_j C(j)`.
    pub coefficient_sum: f64,
    pub inconsistent_coefficients: Vec<usize>,
    /// Set when the moments suggest support beyond `j_max`.
    pub aliasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub h_samples: Vec<HSample>,
    pub fourier: Vec<FourierCoefficient>,
    pub reconstructed: Marginal,
    pub diagnostics: ProbeDiagnostics,
}

/// Runs `H(x)`, the cosine transform and the marginal reconstruction.
pub fn probe_report(moments: &ProbeMoments, options: &ProbeOptions) -> Result<ProbeReport> {
    let support = moments.support_bound;
    let j_max = options.j_max.unwrap_or(support);
    let points = options.grid_points.unwrap_or_else(|| grid_size(j_max, support));
    let h_samples = h_function(moments, &uniform_grid(points), options.convention)?;
    let fourier = fourier_coefficients(&h_samples, j_max)?;
    let reconstructed = reconstruct_marginal(&fourier, options.b_number);
    let fold = |f: fn(&HSample) -> f64| h_samples.iter().map(f).fold(0.0, f64::max);
    let diagnostics = ProbeDiagnostics {
        max_remainder: fold(|h| h.remainder),
        max_cancellation: fold(|h| h.cancellation),
        untrusted_samples: h_samples.iter().filter(|h| !h.trusted).count(),
        unusable_samples: h_samples.iter().filter(|h| !h.usable()).count(),
        h_bound_excess: fold(|h| (h.value().abs() - 1.0).max(0.0)),
        coefficient_sum: fourier.iter().map(|c| c.value).sum(),
        inconsistent_coefficients: fourier.iter().filter(|c| c.inconsistent).map(|c| c.j).collect(),
        aliasing: support > j_max || points < 2 * support + 2,
    };
    if diagnostics.aliasing {
        log::warn!("support up to N = {support} aliases with j_max = {j_max} on {points} points");
    }
    Ok(ProbeReport { h_samples, fourier, reconstructed, diagnostics })
}
