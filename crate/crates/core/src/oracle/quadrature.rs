use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::{monitor_cutoff, NoCountPropagator, ThreeModeState, Tolerances};
use crate::error::{invalid, Error, Result};
use crate::fock::{ModelParams, TwoModeDensity, TwoModeState};
use crate::numerics::gauss_legendre;

/// Gauss–Legendre orders tried in turn; each must agree with its predecessor.
const ORDERS: [usize; 3] = [8, 16, 32];
/// Largest order allowed per simplex dimension.
const NODE_BUDGET: usize = 48;
const REL_TOL: f64 = 1e-6;

/// Unnormalized conditional AB density and its trace.
#[derive(Debug, Clone)]
pub struct QuadratureResult {
    pub probability: f64,
    /// `Tr_C` of the conditional three-mode state, unnormalized.
    pub numerator: DMatrix<C64>,
    pub dims: (usize, usize),
    /// Gauss–Legendre order that met the tolerance (0 for `k = 0`).
    pub order: usize,
    /// Change against the previous order.
    pub error_estimate: f64,
}

struct Setup {
    start: ThreeModeState,
    prop: NoCountPropagator,
    gamma: f64,
    t: f64,
}

impl Setup {
    fn new(state: &TwoModeState, params: &ModelParams, t: f64) -> Result<Self> {
        params.validate()?;
        if !(t >= 0.0) || !t.is_finite() {
            return invalid(format!("time must be finite and >= 0, got {t}"));
        }
        let d_c = monitor_cutoff(params.chi_over_gamma(), state.max_total());
        let start = ThreeModeState::from_two_mode(state, d_c)?;
        let prop = NoCountPropagator::new(params, &start, Tolerances::default())?;
        Ok(Self { start, prop, gamma: params.gamma, t })
    }

    /// `B_{t - t_k} J ... J B_{t_1} psi_0` for ordered jump times.
    fn branch(&self, times: &[f64]) -> Result<ThreeModeState> {
        let mut psi = self.start.clone();
        let mut now = 0.0;
        for &tj in times {
            self.prop.evolve(&mut psi, tj - now)?;
            psi = psi.jump(self.gamma);
            now = tj;
        }
        self.prop.evolve(&mut psi, self.t - now)?;
        Ok(psi)
    }

    fn zero_rho(&self) -> DMatrix<C64> {
        let (d, _, _) = self.start.dims();
        DMatrix::zeros(d * d, d * d)
    }

    /// Integral over the `k`-simplex with an order-`n` product rule.
    fn integrate(&self, k: usize, n: usize) -> Result<DMatrix<C64>> {
        let mut rho = self.zero_rho();
        match k {
            0 => self.branch(&[])?.accumulate_monitor_trace(1.0, &mut rho),
            1 => {
                for (t1, w1) in gauss_legendre(n, 0.0, self.t) {
                    self.branch(&[t1])?.accumulate_monitor_trace(w1, &mut rho);
                }
            }
            2 => {
                for (t2, w2) in gauss_legendre(n, 0.0, self.t) {
                    for (t1, w1) in gauss_legendre(n, 0.0, t2) {
                        self.branch(&[t1, t2])?.accumulate_monitor_trace(w1 * w2, &mut rho);
                    }
                }
            }
            _ => unreachable!(),
        }
        Ok(rho)
    }
}

fn trace(m: &DMatrix<C64>) -> f64 {
    m.diagonal().iter().map(|c| c.re).sum()
}

/// Conditional AB numerator for `k <= 2` counts, by nested quadrature over
/// the jump times with no-count propagation between them.
pub fn quadrature_conditional(state: &TwoModeState, params: &ModelParams, t: f64, k: u32) -> Result<QuadratureResult> {
    if k > 2 {
        return invalid(format!("quadrature handles k <= 2, got {k}; use Monte Carlo"));
    }
    let setup = Setup::new(state, params, t)?;
    let (d, _, _) = setup.start.dims();
    if k == 0 || t == 0.0 {
        let numerator = if k == 0 { setup.integrate(0, 0)? } else { setup.zero_rho() };
        return Ok(QuadratureResult { probability: trace(&numerator), numerator, dims: (d, d), order: 0, error_estimate: 0.0 });
    }
    let mut prev: Option<DMatrix<C64>> = None;
    let mut last = (0.0, f64::INFINITY);
    for &n in ORDERS.iter().filter(|&&n| n <= NODE_BUDGET) {
        let rho = setup.integrate(k as usize, n)?;
        if let Some(p) = &prev {
            let p_now = trace(&rho);
            let diff = (&rho - p).iter().map(|c| c.norm()).fold(0.0, f64::max);
            let dp = (p_now - trace(p)).abs();
            last = (p_now, dp);
            let scale = p_now.abs().max(1e-300);
            if dp <= REL_TOL * scale && diff <= REL_TOL * scale {
                return Ok(QuadratureResult { probability: p_now, numerator: rho, dims: (d, d), order: n, error_estimate: dp });
            }
        }
        prev = Some(rho);
    }
    Err(Error::Convergence { message: format!("quadrature for k = {k} within {NODE_BUDGET} nodes"), estimate: last.0, bound: last.1 })
}

/// `P(k, t)` for `k <= 2` by quadrature.
pub fn p_k_quadrature(state: &TwoModeState, params: &ModelParams, t: f64, k: u32) -> Result<f64> {
    Ok(quadrature_conditional(state, params, t, k)?.probability)
}

/// Normalized conditional AB state for `k <= 2` counts.
pub fn conditional_ab_density(state: &TwoModeState, params: &ModelParams, t: f64, k: u32) -> Result<TwoModeDensity> {
    let q = quadrature_conditional(state, params, t, k)?;
    if !(q.probability > 0.0) {
        return Err(Error::OutcomeImpossible { k, probability: q.probability });
    }
    let mut d = TwoModeDensity::from_matrix_unchecked(q.numerator, q.dims.0, q.dims.1);
    d.symmetrize();
    d.normalize()?;
    Ok(d)
}
