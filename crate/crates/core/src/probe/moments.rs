use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fock::{ModelParams, TwoModeDensity, TwoModeState};
use crate::mixture::PoissonMixture;
use crate::numerics::{stirling2_table, CompensatedSum};
use crate::oracle::JumpRecord;
use crate::photocount::{eval_kernels, SdKernels};

/// Largest moment order supported; beyond it double precision cannot hold
/// `<N^(2r)>` for the photon numbers of interest.
pub const R_MAX_LIMIT: u32 = 12;
pub const DEFAULT_R_MAX: u32 = 12;

/// Anything with a distribution of the total photon number `N`.
pub trait NumberStatistics {
    /// `p_N` indexed by `N`.
    fn total_number_weights(&self) -> Vec<f64>;
}

impl NumberStatistics for TwoModeState {
    fn total_number_weights(&self) -> Vec<f64> {
        self.number_distribution()
    }
}

impl NumberStatistics for TwoModeDensity {
    fn total_number_weights(&self) -> Vec<f64> {
        self.number_distribution()
    }
}

/// How the `kappa` estimates of `<N^(2r)>` are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MomentPathway {
    /// Factorial moments over the exact `u(t)^r`; exact at every time.
    #[default]
    Factorial,
    /// Raw moments of `k / [(2 chi / gamma)^2 gamma t]`, correct only for
    /// `gamma t >> 1`.
    RawAsymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MomentSource {
    Analytic,
    Empirical,
}

/// Count moments and the derived estimates of `<N^(2r)>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeMoments {
    pub source: MomentSource,
    pub pathway: MomentPathway,
    /// `u = 2g` at the record time.
    pub u: f64,
    /// `E[k^r]`, `r = 0..=r_max`.
    pub raw_moments: Vec<f64>,
    /// `E[k (k-1) ... (k-r+1)]`.
    pub factorial_moments: Vec<f64>,
    /// Estimates of `<N^(2r)>`; entry 0 is 1.
    pub kappa_moments: Vec<f64>,
    /// Jackknife standard errors of `kappa_moments` (empirical only).
    pub kappa_errors: Option<Vec<f64>>,
    /// Sector weights `p_N` (analytic only), used for exact transforms.
    pub number_weights: Option<Vec<f64>>,
    /// Largest total photon number believed to carry weight.
    pub support_bound: usize,
    /// Set when `u = 0` and the moments were read off the state directly.
    pub zero_time: bool,
}

impl ProbeMoments {
    pub fn r_max(&self) -> u32 {
        (self.kappa_moments.len() - 1) as u32
    }
}

fn check_r_max(r_max: u32) -> Result<()> {
    if r_max > R_MAX_LIMIT {
        return invalid(format!("r_max = {r_max} exceeds the supported {R_MAX_LIMIT}"));
    }
    Ok(())
}

fn largest_support(weights: &[f64]) -> usize {
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Exact count moments at time `t` for a known state.
pub fn analytic_moments<S: NumberStatistics + ?Sized>(
    source: &S,
    params: &ModelParams,
    t: f64,
    r_max: u32,
    pathway: MomentPathway,
) -> Result<ProbeMoments> {
    check_r_max(r_max)?;
    let kern = eval_kernels(params, t)?;
    let weights = source.total_number_weights();
    let mix = PoissonMixture::new(weights.clone(), kern.u);
    let factorial_moments: Vec<f64> = (0..=r_max).map(|r| mix.factorial_moment(r)).collect();
    let raw_moments = mix.raw_moments(r_max);
    let zero_time = kern.u == 0.0;
    let kappa_moments: Vec<f64> = if zero_time {
        if r_max >= 1 {
            log::warn!("u(t) = 0: kappa moments taken directly from the state");
        }
        (0..=r_max).map(|r| mix.number_moment(r)).collect()
    } else {
        kappa_from(&raw_moments, &factorial_moments, &kern, params, pathway)
    };
    Ok(ProbeMoments {
        source: MomentSource::Analytic,
        pathway,
        u: kern.u,
        raw_moments,
        factorial_moments,
        kappa_moments,
        kappa_errors: None,
        support_bound: largest_support(&weights),
        number_weights: Some(weights),
        zero_time,
    })
}

fn kappa_from(raw: &[f64], fact: &[f64], kern: &SdKernels, params: &ModelParams, pathway: MomentPathway) -> Vec<f64> {
    match pathway {
        MomentPathway::Factorial => fact.iter().enumerate().map(|(r, f)| f / kern.u.powi(r as i32)).collect(),
        MomentPathway::RawAsymptotic => {
            let ua = SdKernels::asymptotic_u(params.chi_over_gamma(), kern.gamma_t);
            raw.iter().enumerate().map(|(r, m)| m / ua.powi(r as i32)).collect()
        }
    }
}

/// One count observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub k: u32,
    pub t: f64,
    pub weight: f64,
}

impl From<&JumpRecord> for CountRecord {
    fn from(r: &JumpRecord) -> Self {
        Self { k: r.count(), t: r.final_time, weight: r.weight }
    }
}

/// `k (k-1) ... (k-r+1)`.
fn falling(k: u32, r: u32) -> f64 {
    (0..r).map(|i| k as f64 - i as f64).product()
}

/// Weighted mean and jackknife standard error of `f(k)` over the records.
fn jackknife(records: &[CountRecord], f: impl Fn(u32) -> f64) -> (f64, f64) {
    let total_w: CompensatedSum = records.iter().map(|r| r.weight).collect();
    let total_f: CompensatedSum = records.iter().map(|r| r.weight * f(r.k)).collect();
    let (w, s) = (total_w.value(), total_f.value());
    let mean = s / w;
    let n = records.len();
    if n < 2 {
        return (mean, f64::NAN);
    }
    let loo: Vec<f64> = records.iter().map(|r| (s - r.weight * f(r.k)) / (w - r.weight)).collect();
    let loo_mean = loo.iter().copied().collect::<CompensatedSum>().value() / n as f64;
    let ss: CompensatedSum = loo.iter().map(|x| (x - loo_mean).powi(2)).collect();
    (mean, ((n - 1) as f64 / n as f64 * ss.value()).sqrt())
}

/// Moment estimates from observed counts, all taken at one time.
pub fn empirical_moments(
    records: &[CountRecord],
    params: &ModelParams,
    r_max: u32,
    pathway: MomentPathway,
) -> Result<ProbeMoments> {
    check_r_max(r_max)?;
    let Some(first) = records.first() else {
        return invalid("no count records");
    };
    let t = first.t;
    if records.iter().any(|r| (r.t - t).abs() > 1e-12 * t.abs().max(1.0)) {
        return invalid("count records mix different times; moments are normalized per time");
    }
    if records.iter().any(|r| !(r.weight > 0.0) || !r.weight.is_finite()) {
        return invalid("record weights must be positive and finite");
    }
    let kern = eval_kernels(params, t)?;
    if kern.u == 0.0 {
        return Err(Error::Degenerate("records at t = 0 carry no information".into()));
    }
    let scale = match pathway {
        MomentPathway::Factorial => kern.u,
        MomentPathway::RawAsymptotic => SdKernels::asymptotic_u(params.chi_over_gamma(), kern.gamma_t),
    };
    let mut raw_moments = Vec::new();
    let mut factorial_moments = Vec::new();
    let mut kappa_moments = Vec::new();
    let mut kappa_errors = Vec::new();
    for r in 0..=r_max {
        let (raw, raw_se) = jackknife(records, |k| (k as f64).powi(r as i32));
        let (fact, fact_se) = jackknife(records, |k| falling(k, r));
        raw_moments.push(raw);
        factorial_moments.push(fact);
        let (m, se) = match pathway {
            MomentPathway::Factorial => (fact, fact_se),
            MomentPathway::RawAsymptotic => (raw, raw_se),
        };
        let d = scale.powi(r as i32);
        kappa_moments.push(m / d);
        kappa_errors.push(if r == 0 { 0.0 } else { se / d });
    }
    // Support estimate from the growth of the top moments.
    let support_bound = if r_max >= 2 && kappa_moments[r_max as usize - 1] > 0.0 {
        (kappa_moments[r_max as usize] / kappa_moments[r_max as usize - 1]).sqrt().ceil() as usize
    } else if r_max >= 1 {
        kappa_moments[1].sqrt().ceil() as usize
    } else {
        0
    };
    Ok(ProbeMoments {
        source: MomentSource::Empirical,
        pathway,
        u: kern.u,
        raw_moments,
        factorial_moments,
        kappa_moments,
        kappa_errors: Some(kappa_errors),
        number_weights: None,
        support_bound,
        zero_time: false,
    })
}

/// `E[k^r]` from factorial moments, for consistency checks.
pub fn raw_from_factorial(factorial: &[f64]) -> Vec<f64> {
    let r_max = factorial.len().saturating_sub(1);
    let s2 = stirling2_table(r_max);
    (0..=r_max).map(|r| (0..=r).map(|j| s2[r][j] * factorial[j]).sum()).collect()
}
