use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::TwoModeState;
use crate::error::{invalid, Result};

/// Mixed state of modes A and B.
///
/// Rows and columns are indexed by the pair `(m, n)` in lexicographic order,
/// flat index `m * d_b + n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoModeDensity {
    rho: DMatrix<C64>,
    d_a: usize,
    d_b: usize,
}

impl TwoModeDensity {
    /// Wraps a matrix, checking shape and Hermiticity (within 1e-12).
    pub fn from_matrix(rho: DMatrix<C64>, d_a: usize, d_b: usize) -> Result<Self> {
        let dim = d_a * d_b;
        if dim == 0 || rho.nrows() != dim || rho.ncols() != dim {
            return invalid(format!(
                "density shape {}x{} does not match cutoffs {d_a}x{d_b}",
                rho.nrows(),
                rho.ncols()
            ));
        }
        let dens = Self { rho, d_a, d_b };
        let herm = dens.hermiticity_defect();
        if herm > 1e-12 {
            return invalid(format!("density is not Hermitian (defect {herm:e})"));
        }
        Ok(dens)
    }

    pub(crate) fn from_matrix_unchecked(rho: DMatrix<C64>, d_a: usize, d_b: usize) -> Self {
        debug_assert_eq!(rho.nrows(), d_a * d_b);
        Self { rho, d_a, d_b }
    }

    /// `|psi><psi|`.
    pub fn from_pure(state: &TwoModeState) -> Self {
        let (d_a, d_b) = (state.d_a(), state.d_b());
        let v: Vec<C64> = (0..d_a)
            .flat_map(|m| (0..d_b).map(move |n| (m, n)))
            .map(|(m, n)| state.coeff(m, n))
            .collect();
        let dim = v.len();
        let rho = DMatrix::from_fn(dim, dim, |i, j| v[i] * v[j].conj());
        Self { rho, d_a, d_b }
    }

    /// Product state `rho_a (x) rho_b`.
    pub fn product(rho_a: &DMatrix<C64>, rho_b: &DMatrix<C64>) -> Result<Self> {
        if !rho_a.is_square() || !rho_b.is_square() {
            return invalid("single-mode densities must be square");
        }
        Self::from_matrix(rho_a.kronecker(rho_b), rho_a.nrows(), rho_b.nrows())
    }

    /// Identity over `d_a * d_b` levels, normalized.
    pub fn maximally_mixed(d_a: usize, d_b: usize) -> Result<Self> {
        let dim = d_a * d_b;
        if dim == 0 {
            return invalid("cutoffs must be >= 1");
        }
        let rho = DMatrix::from_diagonal_element(dim, dim, C64::new(1.0 / dim as f64, 0.0));
        Ok(Self { rho, d_a, d_b })
    }

    /// Convex combination `sum_i p_i rho_i`; all terms must share cutoffs.
    pub fn mixture(terms: &[(f64, &TwoModeDensity)]) -> Result<Self> {
        let Some((_, first)) = terms.first() else {
            return invalid("mixture needs at least one term");
        };
        let (d_a, d_b) = (first.d_a, first.d_b);
        let mut rho = DMatrix::zeros(d_a * d_b, d_a * d_b);
        for (p, term) in terms {
            if term.d_a != d_a || term.d_b != d_b {
                return invalid("mixture terms have different cutoffs");
            }
            if !(*p >= 0.0) {
                return invalid(format!("mixture weight {p} is negative"));
            }
            rho += &term.rho * C64::new(*p, 0.0);
        }
        Ok(Self { rho, d_a, d_b })
    }

    /// Incoherent mixture of basis projectors `sum w |m,n><m,n|`.
    pub fn diagonal(entries: &[(usize, usize, f64)]) -> Result<Self> {
        if entries.is_empty() {
            return invalid("diagonal density needs at least one entry");
        }
        let d_a = entries.iter().map(|e| e.0).max().unwrap() + 1;
        let d_b = entries.iter().map(|e| e.1).max().unwrap() + 1;
        let mut rho = DMatrix::zeros(d_a * d_b, d_a * d_b);
        for &(m, n, w) in entries {
            if !(w >= 0.0) {
                return invalid(format!("weight {w} is negative"));
            }
            let i = m * d_b + n;
            rho[(i, i)] += C64::new(w, 0.0);
        }
        Ok(Self { rho, d_a, d_b })
    }

    pub fn d_a(&self) -> usize {
        self.d_a
    }

    pub fn d_b(&self) -> usize {
        self.d_b
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.rho
    }

    pub fn index(&self, m: usize, n: usize) -> usize {
        m * self.d_b + n
    }

    /// `<m,n| rho |m2,n2>`, zero outside the stored block.
    pub fn get(&self, m: usize, n: usize, m2: usize, n2: usize) -> C64 {
        if m < self.d_a && n < self.d_b && m2 < self.d_a && n2 < self.d_b {
            self.rho[(self.index(m, n), self.index(m2, n2))]
        } else {
            C64::new(0.0, 0.0)
        }
    }

    pub fn trace(&self) -> f64 {
        self.rho.diagonal().iter().map(|c| c.re).sum()
    }

    /// `Tr rho^2`, computed as the Frobenius norm squared.
    pub fn purity(&self) -> f64 {
        self.rho.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Distribution of `N = m + n` on the diagonal, indexed by `N`.
    pub fn number_distribution(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.d_a + self.d_b - 1];
        for m in 0..self.d_a {
            for n in 0..self.d_b {
                let i = self.index(m, n);
                p[m + n] += self.rho[(i, i)].re;
            }
        }
        p
    }

    /// Largest `|rho - rho^dagger|` entry.
    pub fn hermiticity_defect(&self) -> f64 {
        let dim = self.rho.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..dim {
            for j in i..dim {
                worst = worst.max((self.rho[(i, j)] - self.rho[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Replaces `rho` by `(rho + rho^dagger) / 2` and returns the Frobenius
    /// norm of the applied correction.
    pub fn symmetrize(&mut self) -> f64 {
        let adj = self.rho.adjoint();
        let correction = (&adj - &self.rho).norm() / 2.0;
        self.rho = (&self.rho + adj) * C64::new(0.5, 0.0);
        if correction > 0.0 {
            log::debug!("hermitian symmetrization correction {correction:e}");
        }
        correction
    }

    /// Rescales to unit trace.
    pub fn normalize(&mut self) -> Result<()> {
        let tr = self.trace();
        if !(tr > 0.0) || !tr.is_finite() {
            return invalid(format!("cannot normalize density with trace {tr}"));
        }
        self.rho /= C64::new(tr, 0.0);
        Ok(())
    }

    /// Smallest eigenvalue of the (Hermitian part of the) matrix.
    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.rho + self.rho.adjoint()) * C64::new(0.5, 0.0);
        herm.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// `<psi| rho |psi>` for a pure state, zero-padded to a common block.
    pub fn fidelity_with_pure(&self, state: &TwoModeState) -> f64 {
        let mut acc = C64::new(0.0, 0.0);
        for m in 0..self.d_a {
            for n in 0..self.d_b {
                let c1 = state.coeff(m, n);
                if c1 == C64::new(0.0, 0.0) {
                    continue;
                }
                for m2 in 0..self.d_a {
                    for n2 in 0..self.d_b {
                        acc += c1.conj() * self.get(m, n, m2, n2) * state.coeff(m2, n2);
                    }
                }
            }
        }
        acc.re
    }

    /// Largest element difference after zero-padding to a common block.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let d_a = self.d_a.max(other.d_a);
        let d_b = self.d_b.max(other.d_b);
        let mut worst: f64 = 0.0;
        for m in 0..d_a {
            for n in 0..d_b {
                for m2 in 0..d_a {
                    for n2 in 0..d_b {
                        let d = self.get(m, n, m2, n2) - other.get(m, n, m2, n2);
                        worst = worst.max(d.norm());
                    }
                }
            }
        }
        worst
    }
}

/// `|psi><psi|` for a pure two-mode state.
pub fn density_from_pure(state: &TwoModeState) -> TwoModeDensity {
    TwoModeDensity::from_pure(state)
}
