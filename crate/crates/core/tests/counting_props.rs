mod common;

use photoent::fock::{apply_beam_splitter, density_from_pure, entanglement_report};
use photoent::mixture::TAIL_TOL;
use photoent::photocount::{
    conditional_trace, count_distribution, count_probability, kernels_at, most_probable_time, postselect_density,
};
use photoent::projective::{infer_f, pm_distribution, pm_mean_variance, pm_postselect, pm_probability};
use photoent::{ModelParams, TwoModeState};
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn coherent(mean_each: f64) -> TwoModeState {
    let a = C64::new(mean_each.sqrt(), 0.0);
    TwoModeState::coherent_product(a, a, 1e-13).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pm_distribution_sums_to_one(s in common::state(5), t in 0.0..2.0f64) {
        let total: f64 = pm_distribution(&s, 1.0, t).unwrap().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pm_counts_ignore_beam_splitter(s in common::state(4), lt in 0.0..5.0f64, k in 0u32..6) {
        let a = pm_probability(&s, 0.7, 0.9, k).unwrap();
        let b = pm_probability(&apply_beam_splitter(&s, 1.0, lt), 0.7, 0.9, k).unwrap();
        prop_assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn pm_postselect_is_normalized(s in common::state(4), t in 0.05..2.0f64, k in 0u32..5) {
        if pm_probability(&s, 1.0, t, k).unwrap() > 1e-12 {
            let out = pm_postselect(&s, 0.3, 1.0, t, k).unwrap();
            prop_assert!((out.post_state.norm_sqr() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn infer_f_round_trip(f in 0.5..20.0f64, t in 0.01..0.3f64) {
        let mv = pm_mean_variance(&coherent(f / 2.0), 1.0, t).unwrap();
        let est = infer_f(mv.mean, mv.excess, 1.0, t).unwrap();
        prop_assert!((est.value - f).abs() < 1e-9 * f.max(1.0), "{} vs {}", est.value, f);
    }

    #[test]
    fn counting_sums_to_one(s in common::state(5), gt in 0.0..10.0f64, cg in 0.1..2.0f64) {
        let p = ModelParams::new(0.4, cg, 1.0).unwrap();
        let d = count_distribution(&s, &p, &[gt]).unwrap();
        prop_assert!((d.row_sums[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn counting_trace_matches_probability(s in common::state(4), gt in 0.01..5.0f64, k in 0u32..6) {
        let p = ModelParams::new(0.6, 0.8, 1.0).unwrap();
        let a = conditional_trace(&s, &p, gt, k).unwrap();
        let b = count_probability(&s, &p, gt, k).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn counting_ignores_beam_splitter(s in common::state(4), lt in 0.0..5.0f64, k in 0u32..5) {
        let p = ModelParams::new(0.6, 0.8, 1.0).unwrap();
        let a = count_probability(&s, &p, 1.3, k).unwrap();
        let b = count_probability(&apply_beam_splitter(&s, 1.0, lt), &p, 1.3, k).unwrap();
        prop_assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn number_state_variance_equals_mean() {
    let mv = pm_mean_variance(&TwoModeState::number(2, 3, 3, 4).unwrap(), 1.0, 0.2).unwrap();
    assert!((mv.variance - mv.mean).abs() < 1e-10);
    let mv = pm_mean_variance(&coherent(2.0), 1.0, 0.2).unwrap();
    assert!(mv.variance > mv.mean);
}

#[test]
fn fast_detector_sees_nothing() {
    let s = coherent(2.0);
    let mut last = 0.0;
    for gamma in [10.0, 100.0, 1000.0, 10000.0] {
        let p = ModelParams::new(0.0, 1.0, gamma).unwrap();
        let p0 = count_probability(&s, &p, 1.0, 0).unwrap();
        assert!(p0 > last, "gamma = {gamma}: {p0} <= {last}");
        last = p0;
    }
    assert!(last > 0.99);
}

#[test]
fn probability_depends_on_time_through_g_only() {
    // Two coupling ratios sharing one value of g at different times.
    let s = coherent(1.5);
    let g1 = kernels_at(1.0, 0.8).g;
    let cg2 = 0.5;
    let gt2 = photoent::numerics::bisect_increasing(|x| kernels_at(cg2, x).g - g1, 0.0, 50.0, 1e-14);
    for k in 0..6 {
        let a = count_probability(&s, &ModelParams::new(0.0, 1.0, 1.0).unwrap(), 0.8, k).unwrap();
        let b = count_probability(&s, &ModelParams::new(0.0, cg2, 1.0).unwrap(), gt2, k).unwrap();
        assert!((a - b).abs() < 1e-10, "k = {k}: {a} vs {b}");
    }
}

#[test]
fn coherent_purity_at_short_and_peak_times() {
    let s = coherent(5.0);
    let p = ModelParams::new(0.0, 0.967, 1.0).unwrap();
    for k in 1..=4 {
        let early = entanglement_report(&postselect_density(&s, &p, 1e-4, 0).unwrap()).unwrap();
        assert!(early.s_ab <= 1e-6);
        let t_m = most_probable_time(&s, &p, k).unwrap();
        let late = entanglement_report(&postselect_density(&s, &p, t_m, k).unwrap()).unwrap();
        assert!(late.s_ab > 0.0);
        assert!(late.araki_lieb_ok);
    }
    assert!(TAIL_TOL <= 1e-12);
}

#[test]
fn conditional_density_matches_pure_limit() {
    let s = TwoModeState::number(1, 1, 2, 2).unwrap();
    let p = ModelParams::new(0.5, 1.0, 1.0).unwrap();
    let rho = postselect_density(&s, &p, 0.7, 2).unwrap();
    let free = apply_beam_splitter(&s, 0.5, 0.7);
    assert!(rho.max_abs_diff(&density_from_pure(&free)) < 1e-12);
}
