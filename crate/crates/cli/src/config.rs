//! JSON experiment configuration. One experiment per file; unknown keys are
//! rejected so typos fail loudly.

use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use photoent::{ModelParams, TwoModeState};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub state: StateSpec,
    pub params: ParamsSpec,
    /// Dimensionless times `gamma t`.
    #[serde(default)]
    pub gamma_t: Option<TimeSpec>,
    /// Count values for scans and most-probable-time tables.
    #[serde(default)]
    pub k_list: Option<Vec<u32>>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub fit: Option<FitSpec>,
    #[serde(default)]
    pub oracle: Option<OracleSpec>,
    #[serde(default)]
    pub probe: Option<ProbeSpec>,
    #[serde(default)]
    pub sample: Option<SampleSpec>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    pub lambda: f64,
    pub chi: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StateSpec {
    Number { m: usize, n: usize },
    Coherent {
        alpha: [f64; 2],
        beta: [f64; 2],
        #[serde(default = "default_eps_trunc")]
        eps_trunc: f64,
    },
    Superposition { terms: Vec<Term> },
    TwoModeSqueezed { r: f64, n_max: usize },
}

fn default_eps_trunc() -> f64 {
    1e-12
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub m: usize,
    pub n: usize,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeSpec {
    List(Vec<f64>),
    Range(TimeRange),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeRange {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

/// Fix `chi / gamma` so that `k` counts peak at `gamma_t`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSpec {
    pub k: u32,
    pub gamma_t: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    pub checks: Vec<OracleCheck>,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    /// Integrator tolerances for trajectory sampling; defaults to the
    /// Monte Carlo preset.
    #[serde(default)]
    pub rtol: Option<f64>,
    #[serde(default)]
    pub atol: Option<f64>,
}

fn default_mc_samples() -> usize {
    10_000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleCheck {
    pub k: u32,
    pub gamma_t: f64,
    pub method: OracleMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMethod {
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    /// Record time for analytic moments.
    #[serde(default)]
    pub gamma_t: Option<f64>,
    /// CSV of count records (`k,t,weight`); relative to the config file.
    #[serde(default)]
    pub records: Option<PathBuf>,
    #[serde(default = "default_r_max")]
    pub r_max: u32,
    #[serde(default)]
    pub j_max: Option<usize>,
    #[serde(default)]
    pub x_points: Option<usize>,
    #[serde(default)]
    pub b_number: usize,
}

fn default_r_max() -> u32 {
    photoent::probe::DEFAULT_R_MAX
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSpec {
    pub gamma_t: f64,
    pub n: usize,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("config {}: {e}", path.display())))?;
        cfg.model_params()?;
        Ok(cfg)
    }

    pub fn model_params(&self) -> Result<ModelParams, CliError> {
        let p = self.params;
        Ok(ModelParams::new(p.lambda, p.chi, p.gamma)?)
    }

    pub fn build_state(&self) -> Result<TwoModeState, CliError> {
        Ok(match &self.state {
            StateSpec::Number { m, n } => TwoModeState::number(*m, *n, m + 1, n + 1)?,
            StateSpec::Coherent { alpha, beta, eps_trunc } => {
                TwoModeState::coherent_product(C64::new(alpha[0], alpha[1]), C64::new(beta[0], beta[1]), *eps_trunc)?
            }
            StateSpec::Superposition { terms } => {
                let entries: Vec<_> = terms.iter().map(|t| (t.m, t.n, C64::new(t.re, t.im))).collect();
                TwoModeState::superposition(&entries)?
            }
            StateSpec::TwoModeSqueezed { r, n_max } => TwoModeState::two_mode_squeezed(*r, *n_max)?,
        })
    }

    /// The `gamma t` grid; required by the commands that tabulate in time.
    pub fn gamma_t_grid(&self) -> Result<Vec<f64>, CliError> {
        let grid = match &self.gamma_t {
            None => return Err(CliError::Input("config needs a gamma_t grid".into())),
            Some(TimeSpec::List(v)) => v.clone(),
            Some(TimeSpec::Range(r)) => {
                if r.points < 2 || !(r.stop > r.start) {
                    return Err(CliError::Input("gamma_t range needs points >= 2 and stop > start".into()));
                }
                let step = (r.stop - r.start) / (r.points - 1) as f64;
                (0..r.points).map(|i| r.start + step * i as f64).collect()
            }
        };
        if grid.is_empty() || grid.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(CliError::Input("gamma_t values must be finite and >= 0".into()));
        }
        if grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(CliError::Input("gamma_t values must be strictly increasing".into()));
        }
        Ok(grid)
    }

    pub fn k_list(&self, default: impl FnOnce() -> Vec<u32>) -> Vec<u32> {
        self.k_list.clone().unwrap_or_else(default)
    }
}
