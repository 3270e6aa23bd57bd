use serde::{Deserialize, Serialize};

use super::{probe_report, MomentSource, ProbeMoments, ProbeOptions};
use crate::error::{invalid, Result};

/// Relative tolerance on `kappa_r = kappa_1^r` for exact moments.
const SHARP_TOL: f64 = 1e-9;
/// Largest odd-order weight still compatible with pair support.
const ODD_TOL_ANALYTIC: f64 = 1e-6;
const ODD_TOL_EMPIRICAL: f64 = 1e-2;
/// Pair weights below this take no part in the squeezing fit.
const FIT_FLOOR: f64 = 1e-12;

/// Two-mode squeezed hypothesis `|C_{n,n}|^2 ~ tanh^(2n) r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezedFit {
    pub r: f64,
    /// Largest deviation of a ratio `C(2n+2) / C(2n)` from `tanh^2 r`.
    pub residual: f64,
    pub ratios_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Classification {
    /// `N` is sharp; the individual `|C_{N-n,n}|^2` cannot be recovered.
    AntiCorrelated { n_total: usize },
    /// Only `m = n` terms; `pair_weights[n] = |C_{n,n}|^2 = C(2n)`.
    Correlated { pair_weights: Vec<f64>, squeezed: Option<SqueezedFit> },
    Unclassified,
    Indeterminate { reasons: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub classification: Classification,
    /// `kappa_2 - kappa_1^2`, the variance of `N^2`.
    pub n2_variance: f64,
    /// Largest `|kappa_r - kappa_1^r|` relative to the allowed deviation.
    pub sharpness_score: f64,
    /// `sum_j |C(j)|` over odd `j`.
    pub odd_weight: f64,
}

fn fit_squeezing(pair_weights: &[f64]) -> Option<SqueezedFit> {
    let ratios: Vec<f64> = pair_weights
        .windows(2)
        .filter(|w| w[0] > FIT_FLOOR && w[1] > FIT_FLOOR)
        .map(|w| w[1] / w[0])
        .collect();
    if ratios.is_empty() {
        return None;
    }
    let mean_log = ratios.iter().map(|q| q.ln()).sum::<f64>() / ratios.len() as f64;
    let t2 = mean_log.exp();
    if t2 >= 1.0 {
        return None;
    }
    let residual = ratios.iter().map(|q| (q - t2).abs()).fold(0.0, f64::max);
    Some(SqueezedFit { r: t2.sqrt().atanh(), residual, ratios_used: ratios.len() })
}

/// Looks for the anti-correlated and correlated signatures in the moments.
pub fn classify_special_state(moments: &ProbeMoments) -> Result<ClassificationReport> {
    let r_max = moments.r_max() as usize;
    if r_max < 3 {
        return invalid(format!("classification needs r_max >= 3, got {r_max}"));
    }
    let kappa = &moments.kappa_moments;
    let empirical = moments.source == MomentSource::Empirical;
    let k1 = kappa[1];
    let n2_variance = kappa[2] - k1 * k1;

    let mut reasons = Vec::new();
    let var_tol = match &moments.kappa_errors {
        Some(e) => 3.0 * (e[2] + 2.0 * k1.abs() * e[1]) + SHARP_TOL * kappa[2].abs(),
        None => SHARP_TOL * kappa[2].abs().max(1.0),
    };
    if n2_variance < -var_tol {
        reasons.push(format!("negative variance of N^2: {n2_variance:e}"));
    }
    if kappa.iter().any(|k| !k.is_finite() || *k < 0.0) {
        reasons.push("negative or non-finite moment estimate".into());
    }

    let sharpness_score = (1..=r_max)
        .map(|r| {
            let target = k1.powi(r as i32);
            let allowed = match &moments.kappa_errors {
                Some(e) => 3.0 * e[r] + SHARP_TOL * target.abs().max(1.0),
                None => SHARP_TOL * target.abs().max(1.0),
            };
            (kappa[r] - target).abs() / allowed
        })
        .fold(0.0, f64::max);

    let report = probe_report(moments, &ProbeOptions::default())?;
    let odd_weight: f64 = report.fourier.iter().filter(|c| c.j % 2 == 1).map(|c| c.value.abs()).sum();
    if !report.diagnostics.inconsistent_coefficients.is_empty() {
        reasons.push(format!("negative C(j) at j = {:?}", report.diagnostics.inconsistent_coefficients));
    }

    let finish = |classification| ClassificationReport { classification, n2_variance, sharpness_score, odd_weight };
    if !reasons.is_empty() {
        return Ok(finish(Classification::Indeterminate { reasons }));
    }

    if sharpness_score <= 1.0 {
        let n = k1.max(0.0).sqrt();
        let n_total = n.round();
        let tol = if empirical { 0.1 } else { 1e-6 };
        if (n - n_total).abs() > tol {
            let reasons = vec![format!("sharp N^2 = {k1} is not the square of an integer")];
            return Ok(finish(Classification::Indeterminate { reasons }));
        }
        return Ok(finish(Classification::AntiCorrelated { n_total: n_total as usize }));
    }

    if report.diagnostics.unusable_samples > 0 {
        let reasons = vec![format!(
            "{} of {} H samples are untrusted; C(j) cannot be tested",
            report.diagnostics.unusable_samples,
            report.h_samples.len()
        )];
        return Ok(finish(Classification::Indeterminate { reasons }));
    }

    let odd_tol = if empirical { ODD_TOL_EMPIRICAL } else { ODD_TOL_ANALYTIC };
    if odd_weight <= odd_tol {
        let pair_weights: Vec<f64> = report.fourier.iter().filter(|c| c.j % 2 == 0).map(|c| c.value).collect();
        let squeezed = fit_squeezing(&pair_weights);
        return Ok(finish(Classification::Correlated { pair_weights, squeezed }));
    }
    Ok(finish(Classification::Unclassified))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{ModelParams, TwoModeState};
    use crate::probe::{analytic_moments, MomentPathway};
    use num_complex::Complex64 as C64;

    fn classify(s: &TwoModeState) -> ClassificationReport {
        let p = ModelParams::new(0.0, 1.0, 1.0).unwrap();
        classify_special_state(&analytic_moments(s, &p, 1.0, 12, MomentPathway::Factorial).unwrap()).unwrap()
    }

    #[test]
    fn fixed_total_is_anticorrelated() {
        let entries: Vec<_> = (0..=4).map(|n| (4 - n, n, C64::new(0.3 + n as f64, 0.1 * n as f64))).collect();
        let r = classify(&TwoModeState::superposition(&entries).unwrap());
        assert_eq!(r.classification, Classification::AntiCorrelated { n_total: 4 });
    }

    #[test]
    fn squeezed_state_fit() {
        let r = classify(&TwoModeState::two_mode_squeezed(0.5, 8).unwrap());
        let Classification::Correlated { pair_weights, squeezed: Some(fit) } = r.classification else {
            panic!("{:?}", r.classification)
        };
        assert_eq!(pair_weights.len(), 9);
        assert!((fit.r - 0.5).abs() < 1e-6, "{}", fit.r);
        assert!(fit.residual < 1e-8);
    }

    #[test]
    fn generic_state_is_unclassified() {
        let s = TwoModeState::superposition(&[(0, 0, C64::new(1.0, 0.0)), (1, 0, C64::new(1.0, 0.0))]).unwrap();
        assert_eq!(classify(&s).classification, Classification::Unclassified);
    }

    #[test]
    fn short_moment_list_rejected() {
        let p = ModelParams::new(0.0, 1.0, 1.0).unwrap();
        let s = TwoModeState::number(1, 1, 2, 2).unwrap();
        let m = analytic_moments(&s, &p, 1.0, 2, MomentPathway::Factorial).unwrap();
        assert!(classify_special_state(&m).is_err());
    }

    #[test]
    fn negative_variance_is_indeterminate() {
        let p = ModelParams::new(0.0, 1.0, 1.0).unwrap();
        let s = TwoModeState::number(1, 1, 2, 2).unwrap();
        let mut m = analytic_moments(&s, &p, 1.0, 4, MomentPathway::Factorial).unwrap();
        m.kappa_moments[2] = 10.0;
        assert!(matches!(classify_special_state(&m).unwrap().classification, Classification::Indeterminate { .. }));
    }
}
