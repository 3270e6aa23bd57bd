use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::ln_factorial;

/// Largest per-mode Fock dimension the automatic cutoff policy will allocate.
pub const DEFAULT_MAX_DIM: usize = 256;

/// Default tail mass for automatically truncated states.
pub const DEFAULT_EPS_TRUNC: f64 = 1e-8;

/// Coupling rates of the three-mode model, all in inverse time units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// A–B beam-splitter coupling.
    pub lambda: f64,
    /// Coupling of the total A+B photon number to the monitor quadrature.
    pub chi: f64,
    /// Detector counting rate on the monitor.
    pub gamma: f64,
}

impl ModelParams {
    pub fn new(lambda: f64, chi: f64, gamma: f64) -> Result<Self> {
        let p = Self { lambda, chi, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.chi.is_finite() && self.gamma.is_finite()) {
            return invalid("model rates must be finite");
        }
        if self.lambda < 0.0 {
            return invalid(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if self.chi <= 0.0 {
            return invalid(format!("chi must be > 0, got {}", self.chi));
        }
        if self.gamma <= 0.0 {
            return invalid(format!("gamma must be > 0, got {}", self.gamma));
        }
        Ok(())
    }

    pub fn chi_over_gamma(&self) -> f64 {
        self.chi / self.gamma
    }
}

/// Pure state of modes A and B as a truncated coefficient matrix `C[m, n]`.
///
/// `trunc_weight` is the probability mass outside the stored block, i.e.
/// `1 - sum |C|^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoModeState {
    coeffs: DMatrix<C64>,
    trunc_weight: f64,
}

impl TwoModeState {
    /// Wraps a coefficient matrix; `trunc_weight` is derived from its norm.
    pub fn from_coeffs(coeffs: DMatrix<C64>) -> Result<Self> {
        if coeffs.nrows() == 0 || coeffs.ncols() == 0 {
            return invalid("state cutoffs must be >= 1");
        }
        let norm = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>();
        if !norm.is_finite() || norm > 1.0 + 1e-10 {
            return invalid(format!("coefficient norm {norm} exceeds 1"));
        }
        if norm == 0.0 {
            return invalid("state has no amplitude");
        }
        Ok(Self { coeffs, trunc_weight: (1.0 - norm).max(0.0) })
    }

    /// `|m, n>` in a `d_a x d_b` truncation.
    pub fn number(m: usize, n: usize, d_a: usize, d_b: usize) -> Result<Self> {
        if m >= d_a || n >= d_b {
            return invalid(format!(
                "number state |{m},{n}> does not fit cutoffs d_A = {d_a}, d_B = {d_b}"
            ));
        }
        let mut coeffs = DMatrix::zeros(d_a, d_b);
        coeffs[(m, n)] = C64::new(1.0, 0.0);
        Ok(Self { coeffs, trunc_weight: 0.0 })
    }

    /// Product of coherent states `|alpha> (x) |beta>`, truncated so the
    /// discarded tail is at most `eps_trunc` (split evenly between modes).
    pub fn coherent_product(alpha: C64, beta: C64, eps_trunc: f64) -> Result<Self> {
        Self::coherent_product_with_limit(alpha, beta, eps_trunc, DEFAULT_MAX_DIM)
    }

    pub fn coherent_product_with_limit(
        alpha: C64,
        beta: C64,
        eps_trunc: f64,
        max_dim: usize,
    ) -> Result<Self> {
        if !(eps_trunc > 0.0 && eps_trunc <= 0.01) {
            return invalid(format!("eps_trunc must lie in (0, 0.01], got {eps_trunc}"));
        }
        let a = coherent_amplitudes(alpha, eps_trunc / 2.0, max_dim)?;
        let b = coherent_amplitudes(beta, eps_trunc / 2.0, max_dim)?;
        let coeffs = DMatrix::from_fn(a.len(), b.len(), |m, n| a[m] * b[n]);
        let norm: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
        Ok(Self { coeffs, trunc_weight: (1.0 - norm).max(0.0) })
    }

    /// Normalized superposition with exactly the given support.
    pub fn superposition(entries: &[(usize, usize, C64)]) -> Result<Self> {
        if entries.is_empty() {
            return invalid("superposition needs at least one entry");
        }
        let mut keys: Vec<(usize, usize)> = entries.iter().map(|e| (e.0, e.1)).collect();
        keys.sort_unstable();
        if let Some(w) = keys.windows(2).find(|w| w[0] == w[1]) {
            return invalid(format!("duplicate basis entry |{},{}>", w[0].0, w[0].1));
        }
        let d_a = entries.iter().map(|e| e.0).max().unwrap() + 1;
        let d_b = entries.iter().map(|e| e.1).max().unwrap() + 1;
        let norm: f64 = entries.iter().map(|e| e.2.norm_sqr()).sum();
        if norm == 0.0 || !norm.is_finite() {
            return invalid("superposition coefficients are all zero");
        }
        let scale = 1.0 / norm.sqrt();
        let mut coeffs = DMatrix::zeros(d_a, d_b);
        for &(m, n, c) in entries {
            coeffs[(m, n)] = c * scale;
        }
        Ok(Self { coeffs, trunc_weight: 0.0 })
    }

    /// Two-mode squeezed vacuum `sum_n tanh^n r / cosh r |n, n>` cut at `n_max`
    /// and renormalized.
    pub fn two_mode_squeezed(r: f64, n_max: usize) -> Result<Self> {
        if !(r.is_finite() && r >= 0.0) {
            return invalid(format!("squeezing parameter must be finite and >= 0, got {r}"));
        }
        let entries: Vec<_> = (0..=n_max)
            .map(|n| (n, n, C64::new(r.tanh().powi(n as i32) / r.cosh(), 0.0)))
            .collect();
        Self::superposition(&entries)
    }

    pub fn d_a(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn d_b(&self) -> usize {
        self.coeffs.ncols()
    }

    pub fn coeffs(&self) -> &DMatrix<C64> {
        &self.coeffs
    }

    /// Coefficient `C[m, n]`, zero outside the stored block.
    pub fn coeff(&self, m: usize, n: usize) -> C64 {
        if m < self.d_a() && n < self.d_b() {
            self.coeffs[(m, n)]
        } else {
            C64::new(0.0, 0.0)
        }
    }

    pub fn trunc_weight(&self) -> f64 {
        self.trunc_weight
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Largest total photon number `m + n` carrying nonzero amplitude.
    pub fn max_total(&self) -> usize {
        let mut best = 0;
        for m in 0..self.d_a() {
            for n in 0..self.d_b() {
                if self.coeffs[(m, n)] != C64::new(0.0, 0.0) {
                    best = best.max(m + n);
                }
            }
        }
        best
    }

    /// Distribution of the total photon number `N = m + n`, indexed by `N`.
    pub fn number_distribution(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.d_a() + self.d_b() - 1];
        for m in 0..self.d_a() {
            for n in 0..self.d_b() {
                p[m + n] += self.coeffs[(m, n)].norm_sqr();
            }
        }
        p
    }

    /// Multiplies each coefficient by `f(m + n)`; the result is renormalized.
    pub fn scale_by_total<F: Fn(usize) -> f64>(&self, f: F) -> Result<Self> {
        let coeffs = DMatrix::from_fn(self.d_a(), self.d_b(), |m, n| self.coeffs[(m, n)] * f(m + n));
        let norm: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Degenerate("conditioned state has zero norm".into()));
        }
        Ok(Self { coeffs: coeffs.unscale(norm.sqrt()), trunc_weight: 0.0 })
    }

    /// Returns the state rescaled to unit norm.
    pub fn normalized(&self) -> Self {
        let norm = self.norm_sqr().sqrt();
        Self { coeffs: self.coeffs.unscale(norm), trunc_weight: 0.0 }
    }

    /// `<self|other>`, zero-padding whichever truncation is smaller.
    pub fn inner(&self, other: &Self) -> C64 {
        let d_a = self.d_a().min(other.d_a());
        let d_b = self.d_b().min(other.d_b());
        let mut acc = C64::new(0.0, 0.0);
        for m in 0..d_a {
            for n in 0..d_b {
                acc += self.coeffs[(m, n)].conj() * other.coeffs[(m, n)];
            }
        }
        acc
    }

    /// `|<self|other>|^2` for normalized inputs.
    pub fn fidelity(&self, other: &Self) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// Largest coefficient difference after zero-padding to a common block.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let d_a = self.d_a().max(other.d_a());
        let d_b = self.d_b().max(other.d_b());
        let mut worst: f64 = 0.0;
        for m in 0..d_a {
            for n in 0..d_b {
                worst = worst.max((self.coeff(m, n) - other.coeff(m, n)).norm());
            }
        }
        worst
    }

    /// Rotates the global phase so the largest-modulus coefficient is real
    /// and positive. The first maximum in (m, n)-lexicographic order wins.
    pub fn fix_global_phase(&mut self) {
        let mut best = (0usize, 0usize, -1.0f64);
        for m in 0..self.d_a() {
            for n in 0..self.d_b() {
                let a = self.coeffs[(m, n)].norm();
                if a > best.2 * (1.0 + 1e-12) {
                    best = (m, n, a);
                }
            }
        }
        if best.2 > 0.0 {
            let c = self.coeffs[(best.0, best.1)];
            let phase = c.conj() / c.norm();
            self.coeffs.iter_mut().for_each(|x| *x *= phase);
        }
    }

    pub(crate) fn from_parts(coeffs: DMatrix<C64>, trunc_weight: f64) -> Self {
        Self { coeffs, trunc_weight }
    }
}

/// Truncated coherent-state amplitudes with tail mass at most `tail`.
fn coherent_amplitudes(alpha: C64, tail: f64, max_dim: usize) -> Result<Vec<C64>> {
    let mean = alpha.norm_sqr();
    if !mean.is_finite() {
        return invalid("coherent amplitude must be finite");
    }
    if mean == 0.0 {
        return Ok(vec![C64::new(1.0, 0.0)]);
    }
    let ln_r = alpha.norm().ln();
    let theta = alpha.arg();
    let mut amps = Vec::new();
    for m in 0..max_dim {
        let ln_mod = -mean / 2.0 + m as f64 * ln_r - 0.5 * ln_factorial(m as u32);
        let c = C64::from_polar(ln_mod.exp(), m as f64 * theta);
        amps.push(c);
        // Once terms decrease, the rest is bounded by a geometric series;
        // Summing kept mass instead would stall at rounding level.
        let next = (-mean + (m + 1) as f64 * mean.ln() - ln_factorial(m as u32 + 1)).exp();
        let ratio = mean / (m + 2) as f64;
        let bound = if ratio < 1.0 { next / (1.0 - ratio) } else { f64::INFINITY };
        if bound <= tail {
            return Ok(amps);
        }
    }
    Err(Error::Resource(format!(
        "coherent amplitude |alpha|^2 = {mean} needs more than {max_dim} Fock levels for tail {tail:e}"
    )))
}
