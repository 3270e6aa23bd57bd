//! Truncated two-mode Fock space: states, densities, the A–B beam splitter,
//! partial traces and linear-entropy diagnostics.

mod beam_splitter;
mod density;
mod entropy;
mod state;

pub use beam_splitter::apply_beam_splitter;
pub use density::{density_from_pure, TwoModeDensity};
pub use entropy::{entanglement_report, linear_entropy, partial_trace, separable_benchmark, EntanglementReport, Mode};
pub use state::{ModelParams, TwoModeState, DEFAULT_EPS_TRUNC, DEFAULT_MAX_DIM};
