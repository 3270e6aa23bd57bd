//! Brute-force reference for the closed-form counting results.
//!
//! States of A, B and the monitor are propagated directly on the truncated
//! three-mode space: between counts by the non-Hermitian no-count generator,
//! at counts by the jump `sqrt(gamma) c`. Nothing here uses the closed-form
//! time kernels, so agreement with [`crate::photocount`] is a real check.

mod integrator;
mod montecarlo;
mod quadrature;
mod three_mode;

pub use integrator::{no_count_evolution, NoCountPropagator, Tolerances};
pub use montecarlo::{count_histogram_montecarlo, p_k_montecarlo, sample_jump_records, JumpRecord, McEstimate, McHistogram};
pub use quadrature::{conditional_ab_density, p_k_quadrature, quadrature_conditional, QuadratureResult};
pub use three_mode::{monitor_cutoff, ThreeModeState};
