use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fock::{TwoModeDensity, TwoModeState};

/// Largest number of stored amplitudes the oracle will allocate.
const MAX_AMPLITUDES: usize = 4_000_000;

/// Pure (possibly unnormalized) state of A, B and the monitor C.
///
/// Flat index `(m * d_b + n) * d_c + p`. Only pairs with `m + n <= n_max`
/// are ever populated, since every term of the dynamics conserves `m + n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThreeModeState {
    pub(crate) coeffs: Vec<C64>,
    d_a: usize,
    d_b: usize,
    d_c: usize,
    /// Set once a jump or a no-count propagation has acted, after which the
    /// norm is a probability rather than one.
    conditional: bool,
}

/// Monitor levels for a largest coherent label `z_max = 2 (chi / gamma) n_max`:
/// `ceil(z^2 + 8 z + 10)`, leaving a Poisson tail well below 1e-8.
pub fn monitor_cutoff(chi_over_gamma: f64, n_max: usize) -> usize {
    let z = 2.0 * chi_over_gamma * n_max as f64;
    (z * z + 8.0 * z + 10.0).ceil() as usize
}

impl ThreeModeState {
    /// `|psi>_AB (x) |0>_C` with `d_a = d_b = n_max + 1`.
    pub fn from_two_mode(state: &TwoModeState, d_c: usize) -> Result<Self> {
        let n_max = state.max_total();
        let d = n_max + 1;
        if d * d * d_c > MAX_AMPLITUDES {
            return Err(Error::Resource(format!(
                "three-mode space {d} x {d} x {d_c} exceeds {MAX_AMPLITUDES} amplitudes"
            )));
        }
        let mut coeffs = vec![C64::new(0.0, 0.0); d * d * d_c];
        for m in 0..d {
            for n in 0..d - m {
                coeffs[(m * d + n) * d_c] = state.coeff(m, n);
            }
        }
        Ok(Self { coeffs, d_a: d, d_b: d, d_c, conditional: false })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.d_a, self.d_b, self.d_c)
    }

    pub fn n_max(&self) -> usize {
        self.d_a - 1
    }

    pub fn index(&self, m: usize, n: usize, p: usize) -> usize {
        (m * self.d_b + n) * self.d_c + p
    }

    pub fn coeff(&self, m: usize, n: usize, p: usize) -> C64 {
        self.coeffs[self.index(m, n, p)]
    }

    pub fn is_conditional(&self) -> bool {
        self.conditional
    }

    pub(crate) fn mark_conditional(&mut self) {
        self.conditional = true;
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Active `(m, n)` pairs, those with `m + n <= n_max`.
    pub(crate) fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n_max = self.n_max();
        (0..=n_max).flat_map(move |m| (0..=n_max - m).map(move |n| (m, n)))
    }

    /// Mass in the top monitor level, a truncation diagnostic.
    pub fn monitor_edge_weight(&self) -> f64 {
        self.pairs().map(|(m, n)| self.coeff(m, n, self.d_c - 1).norm_sqr()).sum()
    }

    /// `<c^dag c>` in this (unnormalized) state.
    pub fn monitor_number(&self) -> f64 {
        self.pairs()
            .map(|(m, n)| (0..self.d_c).map(|p| p as f64 * self.coeff(m, n, p).norm_sqr()).sum::<f64>())
            .sum()
    }

    /// Unnormalized `Tr_C |psi><psi|`, laid out as a two-mode density.
    pub fn trace_monitor(&self) -> DMatrix<C64> {
        let dim = self.d_a * self.d_b;
        let mut rho = DMatrix::zeros(dim, dim);
        self.accumulate_monitor_trace(1.0, &mut rho);
        rho
    }

    /// Adds `w Tr_C |psi><psi|` into `rho`.
    pub(crate) fn accumulate_monitor_trace(&self, w: f64, rho: &mut DMatrix<C64>) {
        let pairs: Vec<(usize, usize)> = self.pairs().collect();
        for &(m, n) in &pairs {
            let i = m * self.d_b + n;
            let row = &self.coeffs[i * self.d_c..(i + 1) * self.d_c];
            for &(m2, n2) in &pairs {
                let j = m2 * self.d_b + n2;
                let col = &self.coeffs[j * self.d_c..(j + 1) * self.d_c];
                let s: C64 = row.iter().zip(col).map(|(a, b)| a * b.conj()).sum();
                rho[(i, j)] += s * w;
            }
        }
    }

    /// Normalized reduced state of A and B.
    pub fn reduced_density(&self) -> Result<TwoModeDensity> {
        let mut d = TwoModeDensity::from_matrix_unchecked(self.trace_monitor(), self.d_a, self.d_b);
        d.symmetrize();
        d.normalize()?;
        Ok(d)
    }

    /// Applies `sqrt(gamma) c`.
    pub fn jump(&self, gamma: f64) -> Self {
        let mut out = self.clone();
        let sg = gamma.sqrt();
        let d_c = self.d_c;
        for block in out.coeffs.chunks_mut(d_c) {
            for p in 0..d_c {
                block[p] = if p + 1 < d_c { block[p + 1] * (sg * ((p + 1) as f64).sqrt()) } else { C64::new(0.0, 0.0) };
            }
        }
        out.conditional = true;
        out
    }

    pub(crate) fn scale(&mut self, s: f64) {
        self.coeffs.iter_mut().for_each(|c| *c *= s);
    }
}
