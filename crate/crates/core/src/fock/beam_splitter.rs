use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

use super::TwoModeState;

/// Total amplitude mass allowed to be dropped when the evolved state is
/// trimmed back to a compact block.
const TRIM_TOL: f64 = 1e-15;

/// Evolves `state` by `exp(-i lambda t (a^dag b + a b^dag))`.
///
/// The generator conserves `N = m + n`, so each `N` block is exponentiated
/// separately through the eigenvectors of its tridiagonal generator. Blocks
/// are completed to the full `|N - j, j>` ladder before evolving, then
/// trailing rows/columns with negligible mass are dropped.
pub fn apply_beam_splitter(state: &TwoModeState, lambda: f64, t: f64) -> TwoModeState {
    let theta = lambda * t;
    if theta == 0.0 {
        return state.clone();
    }
    let n_max = state.max_total();
    let dim = n_max + 1;
    let mut out = DMatrix::<C64>::zeros(dim, dim);
    for total in 0..=n_max {
        let v = DVector::from_fn(total + 1, |j, _| state.coeff(total - j, j));
        if v.iter().all(|c| c.norm_sqr() == 0.0) {
            continue;
        }
        let w = block_propagator(total, theta) * v;
        for j in 0..=total {
            out[(total - j, j)] = w[j];
        }
    }
    trim(out, state)
}

/// `exp(-i theta G_N)` on the `(N + 1)`-dimensional block with basis
/// `|N - j, j>`.
fn block_propagator(total: usize, theta: f64) -> DMatrix<C64> {
    let size = total + 1;
    let mut gen = DMatrix::<f64>::zeros(size, size);
    for j in 0..total {
        // <N-j, j| a^dag b |N-j-1, j+1> = sqrt((N - j)(j + 1))
        let x = (((total - j) * (j + 1)) as f64).sqrt();
        gen[(j, j + 1)] = x;
        gen[(j + 1, j)] = x;
    }
    let eig = SymmetricEigen::new(gen);
    let v = eig.eigenvectors.map(|x| C64::new(x, 0.0));
    let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|e| C64::from_polar(1.0, -theta * e)));
    &v * phases * v.transpose()
}

fn trim(out: DMatrix<C64>, input: &TwoModeState) -> TwoModeState {
    let dim = out.nrows();
    let row_mass: Vec<f64> = (0..dim).map(|m| out.row(m).iter().map(|c| c.norm_sqr()).sum()).collect();
    let col_mass: Vec<f64> = (0..dim).map(|n| out.column(n).iter().map(|c| c.norm_sqr()).sum()).collect();
    let keep = |mass: &[f64], floor: usize| {
        let mut k = mass.len();
        let mut dropped = 0.0;
        while k > floor.max(1) && dropped + mass[k - 1] <= TRIM_TOL / 2.0 {
            dropped += mass[k - 1];
            k -= 1;
        }
        k
    };
    let d_a = keep(&row_mass, input.d_a().min(dim));
    let d_b = keep(&col_mass, input.d_b().min(dim));
    let mut coeffs = DMatrix::zeros(d_a.max(input.d_a()), d_b.max(input.d_b()));
    let mut kept = 0.0;
    for m in 0..d_a {
        for n in 0..d_b {
            coeffs[(m, n)] = out[(m, n)];
            kept += out[(m, n)].norm_sqr();
        }
    }
    let total: f64 = row_mass.iter().sum();
    let dropped = (total - kept).max(0.0);
    TwoModeState::from_parts(coeffs, input.trunc_weight() + dropped)
}
