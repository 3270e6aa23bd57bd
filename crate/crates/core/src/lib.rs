//! Entanglement of two bosonic modes conditioned on photocounts of a third.
//!
//! Modes A and B exchange photons through a beam-splitter coupling while their
//! total photon number `N` drives a monitor mode C. Counting photons on C
//! (either by an instantaneous projection or by continuous detection) leaves
//! A and B in a state that depends on the number of counts `k`.
//!
//! * [`fock`]: truncated two-mode states, beam splitter, entropies.
//! * [`projective`]: instantaneous photon-number projection of the monitor.
//! * [`photocount`]: closed-form continuous counting statistics and conditional states.
//! * [`oracle`]: brute-force three-mode integration used to validate `photocount`.
//! * [`probe`]: moments of the count record and what they reveal about the initial state.

pub mod error;
pub mod fock;
pub mod mixture;
pub mod numerics;
pub mod oracle;
pub mod photocount;
pub mod probe;
pub mod projective;

pub use error::{Error, Result};
pub use fock::{ModelParams, TwoModeDensity, TwoModeState};
