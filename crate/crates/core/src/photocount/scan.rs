use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{most_probable_time, postselect_density, short_time_state};
use crate::error::{invalid, Result};
use crate::fock::{density_from_pure, entanglement_report, ModelParams, TwoModeState};

/// Entanglement of the `k`-count conditional state at its most probable time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub k: u32,
    pub gamma_t_m: f64,
    /// Excess entropy of the short-time pure state.
    pub i_short: f64,
    pub i_tm: f64,
    pub s_ab_tm: f64,
}

/// One row per entry of `k_list`, in the same order.
pub fn entanglement_scan(state: &TwoModeState, params: &ModelParams, k_list: &[u32]) -> Result<Vec<ScanRow>> {
    if k_list.is_empty() {
        return invalid("k list is empty");
    }
    k_list
        .par_iter()
        .map(|&k| {
            let t_m = most_probable_time(state, params, k)?;
            let short = short_time_state(state, params.lambda, t_m, k)?;
            let i_short = entanglement_report(&density_from_pure(&short))?.excess;
            let at_tm = entanglement_report(&postselect_density(state, params, t_m, k)?)?;
            Ok(ScanRow { k, gamma_t_m: params.gamma * t_m, i_short, i_tm: at_tm.excess, s_ab_tm: at_tm.s_ab })
        })
        .collect()
}
