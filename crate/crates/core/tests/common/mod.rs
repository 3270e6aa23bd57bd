#![allow(dead_code)]

use num_complex::Complex64 as C64;
use photoent::TwoModeState;
use proptest::prelude::*;

/// Random normalized state on at most `d x d` levels.
pub fn state(d: usize) -> impl Strategy<Value = TwoModeState> {
    (1..=d, 1..=d)
        .prop_flat_map(|(da, db)| prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), da * db).prop_map(move |v| (da, db, v)))
        .prop_filter_map("zero vector", |(da, db, v)| {
            let entries: Vec<_> = v.iter().enumerate().map(|(i, &(re, im))| (i / db, i % db, C64::new(re, im))).collect();
            let _ = da;
            if entries.iter().map(|e| e.2.norm_sqr()).sum::<f64>() < 1e-6 {
                return None;
            }
            TwoModeState::superposition(&entries).ok()
        })
}

/// `sum_m |C_{m, j-m}|^2` for every `j`, straight from the coefficients.
pub fn anti_diagonal_sums(s: &TwoModeState) -> Vec<f64> {
    let mut out = vec![0.0; s.d_a() + s.d_b() - 1];
    for m in 0..s.d_a() {
        for n in 0..s.d_b() {
            out[m + n] += s.coeff(m, n).norm_sqr();
        }
    }
    out
}
