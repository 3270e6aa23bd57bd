//! Small numerical helpers shared across modules.

use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;

const LN_FACTORIAL_TABLE: usize = 1024;

/// `ln k!`: tabulated by direct summation up to 1023, Stirling series beyond.
pub fn ln_factorial(k: u32) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut acc = 0.0;
        (0..LN_FACTORIAL_TABLE)
            .map(|i| {
                if i > 1 {
                    acc += (i as f64).ln();
                }
                acc
            })
            .collect()
    });
    match table.get(k as usize) {
        Some(&v) => v,
        None => {
            // truncation error below 1 / (1680 k^7)
            let n = k as f64;
            let inv = 1.0 / n;
            let inv2 = inv * inv;
            n * n.ln() - n + 0.5 * (std::f64::consts::TAU * n).ln() + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 / 1260.0))
        }
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
    max_abs_term: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
        self.max_abs_term = self.max_abs_term.max(x.abs());
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }

    /// Largest magnitude of any term added so far.
    pub fn max_abs_term(&self) -> f64 {
        self.max_abs_term
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Stirling numbers of the second kind `S(r, j)` for `0 <= j <= r <= r_max`.
pub fn stirling2_table(r_max: usize) -> Vec<Vec<f64>> {
    let mut s = vec![vec![0.0; r_max + 1]; r_max + 1];
    s[0][0] = 1.0;
    for r in 1..=r_max {
        for j in 1..=r {
            s[r][j] = j as f64 * s[r - 1][j] + s[r - 1][j - 1];
        }
    }
    s
}

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`.
///
/// Returns the abscissa; stops when the bracket is narrower than `tol`.
pub fn golden_section_max<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..400 {
        if (hi - lo).abs() <= tol {
            break;
        }
        // ties move toward the lower end
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Bisection for a root of an increasing function `f` on `[lo, hi]` with
/// `f(lo) <= 0 <= f(hi)`.
pub fn bisect_increasing<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol || mid <= lo || mid >= hi {
            return mid;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Gauss–Legendre nodes and weights mapped onto `[a, b]`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(n.max(2)).expect("degree >= 2");
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    let mut pairs: Vec<(f64, f64)> = rule
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (mid + half * x, half * w))
        .collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_factorial_small() {
        assert_eq!(ln_factorial(0), 0.0);
        assert_eq!(ln_factorial(1), 0.0);
        assert!((ln_factorial(5) - 120f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn ln_factorial_series_joins_table() {
        let direct = |k: u32| (2..=k).map(|i| (i as f64).ln()).sum::<f64>();
        for k in [1023, 1024, 1025, 5000] {
            let d = direct(k);
            assert!((ln_factorial(k) - d).abs() <= 1e-13 * d, "k = {k}");
        }
    }

    #[test]
    fn compensated_sum_recovers_cancellation() {
        let s: CompensatedSum = [1e16, 1.0, -1e16].into_iter().collect();
        assert_eq!(s.value(), 1.0);
        assert_eq!(s.max_abs_term(), 1e16);
    }

    #[test]
    fn stirling_rows() {
        let s = stirling2_table(4);
        assert_eq!(s[4][1..=4], [1.0, 7.0, 6.0, 1.0]);
    }

    #[test]
    fn golden_section_quadratic() {
        let x = golden_section_max(|x| -(x - 0.3).powi(2), 0.0, 1.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-9);
    }

    #[test]
    fn bisection_sqrt2() {
        let x = bisect_increasing(|x| x * x - 2.0, 0.0, 2.0, 1e-15);
        assert!((x - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_integrates_polynomial() {
        let nodes = gauss_legendre(5, 0.0, 2.0);
        let v: f64 = nodes.iter().map(|(x, w)| w * x.powi(9)).sum();
        assert!((v - 2f64.powi(10) / 10.0).abs() < 1e-10);
    }
}
