use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::TwoModeDensity;
use crate::error::{invalid, Result};

/// Which subsystem survives a partial trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    A,
    B,
}

/// Reduced single-mode density matrix.
pub fn partial_trace(rho: &TwoModeDensity, keep: Mode) -> DMatrix<C64> {
    let (d_a, d_b) = (rho.d_a(), rho.d_b());
    let m = rho.matrix();
    match keep {
        Mode::A => DMatrix::from_fn(d_a, d_a, |i, j| (0..d_b).map(|n| m[(i * d_b + n, j * d_b + n)]).sum()),
        Mode::B => DMatrix::from_fn(d_b, d_b, |i, j| (0..d_a).map(|a| m[(a * d_b + i, a * d_b + j)]).sum()),
    }
}

/// `1 - Tr rho^2` for a Hermitian matrix.
pub fn linear_entropy(rho: &DMatrix<C64>) -> f64 {
    1.0 - rho.iter().map(|c| c.norm_sqr()).sum::<f64>()
}

/// Linear entropies of both modes and of the joint state, with the excess
/// entropy `I = S_A + S_B - S_AB`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntanglementReport {
    pub s_a: f64,
    pub s_b: f64,
    pub s_ab: f64,
    pub excess: f64,
    /// `0 <= I <= 2 min(S_A, S_B)` within 1e-10.
    pub araki_lieb_ok: bool,
}

pub fn entanglement_report(rho: &TwoModeDensity) -> Result<EntanglementReport> {
    let tr = rho.trace();
    if (tr - 1.0).abs() > 1e-6 {
        return invalid(format!("entanglement report needs unit trace, got {tr}"));
    }
    let s_a = linear_entropy(&partial_trace(rho, Mode::A));
    let s_b = linear_entropy(&partial_trace(rho, Mode::B));
    let s_ab = 1.0 - rho.purity();
    let excess = s_a + s_b - s_ab;
    let tol = 1e-10;
    let araki_lieb_ok = excess >= -tol && excess <= 2.0 * s_a.min(s_b) + tol;
    Ok(EntanglementReport { s_a, s_b, s_ab, excess, araki_lieb_ok })
}

/// `(I, S_AB)` of the maximally mixed separable state on `dim_a x dim_b`
/// levels.
pub fn separable_benchmark(dim_a: u64, dim_b: u64) -> (f64, f64) {
    let (na, nb) = (dim_a.max(1) as f64, dim_b.max(1) as f64);
    let excess = 1.0 - (1.0 / na + 1.0 / nb - 1.0 / (na * nb));
    let s_ab = 1.0 - 1.0 / (na * nb);
    (excess, s_ab)
}
