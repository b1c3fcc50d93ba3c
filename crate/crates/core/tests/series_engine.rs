mod common;

use common::*;
use ladder_core::increments::IncrementModel;
use ladder_core::lattice::{sign_sequence, DEFAULT_CELL_LIMIT};
use ladder_core::series::*;
use proptest::prelude::*;

const SIMPLE: [(i64, f64); 2] = [(-1, 0.5), (1, 0.5)];

// P(τ⁺ = n) by enumeration: mirror the walk and stop at the first strict
// ascent, i.e. first time -S_n < 0.
fn enumerate_tau_plus_simple(n_max: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_max + 1];
    for mask in 0u32..(1 << n_max) {
        let mut s = 0i64;
        for n in 1..=n_max {
            s += if mask >> (n - 1) & 1 == 1 { 1 } else { -1 };
            if s > 0 {
                // Each path of length n_max carries weight 2^{-n_max}.
                out[n] += 1.0 / (1u64 << n_max) as f64;
                break;
            }
        }
    }
    out
}

#[test]
fn simple_walk_against_path_enumeration() {
    let signs = SignSequence::simple_walk(12);
    let minus = tau_minus_pmf(&signs, 12).unwrap();
    let plus = tau_plus_pmf(&signs, 12).unwrap();
    assert_eq!(minus.coeff(0), 0.0);
    let brute_minus = enumerate_tau_minus(&SIMPLE, 12);
    let brute_plus = enumerate_tau_plus_simple(12);
    for n in 1..=12 {
        assert!(
            (minus.coeff(n) - brute_minus[n]).abs() < 1e-15,
            "τ⁻, n = {n}"
        );
        assert!((plus.coeff(n) - brute_plus[n]).abs() < 1e-15, "τ⁺, n = {n}");
    }
    assert!((minus.coeff(1) - 0.5).abs() < 1e-16);
    assert!((minus.coeff(2) - 0.25).abs() < 1e-16);
    assert!(minus.coeff(3).abs() < 1e-16);
    assert!((minus.coeff(4) - 1.0 / 16.0).abs() < 1e-16);
    assert!((plus.coeff(1) - 0.5).abs() < 1e-16);
    assert!(plus.coeff(2).abs() < 1e-16);
    assert!((plus.coeff(3) - 0.125).abs() < 1e-16);
}

#[test]
fn analytic_and_exact_simple_walk_signs_agree() {
    let exact = sign_sequence(&IncrementModel::simple_walk(), 300, DEFAULT_CELL_LIMIT).unwrap();
    let analytic = SignSequence::simple_walk(300);
    for n in 0..300 {
        assert!((exact.gt_zero[n] - analytic.gt_zero[n]).abs() < 1e-14);
        assert!((exact.eq_zero[n] - analytic.eq_zero[n]).abs() < 1e-14);
    }
}

#[test]
fn lazy_walk_first_coefficients() {
    let signs = sign_sequence(&IncrementModel::lazy_walk(), 8, DEFAULT_CELL_LIMIT).unwrap();
    assert!((tau_minus_pmf(&signs, 8).unwrap().coeff(1) - 0.75).abs() < 1e-16);
    assert!((tau_plus_pmf(&signs, 8).unwrap().coeff(1) - 0.25).abs() < 1e-16);
    assert!((omega_series(&signs, 8).unwrap().coeff(1) - 0.5).abs() < 1e-16);
}

#[test]
fn probability_role_bounds_and_factorization() {
    for pmf in [
        LAZY.to_vec(),
        random_zero_mean_pmf(1),
        random_zero_mean_pmf(2),
    ] {
        let m = IncrementModel::finite_lattice(&pmf).unwrap();
        let signs = sign_sequence(&m, 1024, DEFAULT_CELL_LIMIT).unwrap();
        let minus = tau_minus_pmf(&signs, 1024).unwrap();
        let plus = tau_plus_pmf(&signs, 1024).unwrap();
        assert!(factorization_residual(&plus, &minus) <= 1e-10);
        for s in [&minus, &plus] {
            assert!(s.coeffs().iter().all(|c| *c >= -1e-12 && *c <= 1.0 + 1e-12));
            assert!(s.partial_sum() <= 1.0 + 1e-9);
        }
        let omega = omega_series(&signs, 1024).unwrap();
        assert_eq!(omega.coeff(0), 1.0);
        assert!(omega.coeffs().iter().all(|w| *w >= 0.0));
        let t = t_minus_pmf(&minus, &omega);
        assert!(t.coeffs().iter().all(|c| *c >= -1e-12));
        assert!(t.partial_sum() <= 1.0 + 1e-9);
    }
}

#[test]
fn simple_walk_factorization_at_200() {
    let signs = SignSequence::simple_walk(200);
    let plus = tau_plus_pmf(&signs, 200).unwrap();
    let minus = tau_minus_pmf(&signs, 200).unwrap();
    assert!(factorization_residual(&plus, &minus) <= 1e-12);
    // First coefficient: zero-atom symmetric continuous model.
    let sym = SignSequence::symmetric_continuous(1);
    let r = factorization_residual(
        &tau_plus_pmf(&sym, 1).unwrap(),
        &tau_minus_pmf(&sym, 1).unwrap(),
    );
    assert_eq!(r, 0.0);
}

#[test]
fn simple_walk_omega_and_t_minus() {
    let n = 4096;
    let signs = SignSequence::simple_walk(n);
    let omega = omega_series(&signs, n).unwrap();
    let minus = tau_minus_pmf(&signs, n).unwrap();
    let t = t_minus_pmf(&minus, &omega);
    // Ω(1) = exp(Σ_k C(2k,k) 4^{-k} / (2k)) = exp(ln 2) = 2, approached from below.
    let partial = omega.partial_sum();
    assert!(partial < 2.0 && partial > 1.95);
    // Period-2 walk: compare window sums over {200, 201}.
    let ratio = (t.coeff(200) + t.coeff(201)) / (minus.coeff(200) + minus.coeff(201));
    assert!((ratio / 2.0 - 1.0).abs() < 0.05, "ratio {ratio}");
}

#[test]
fn mc_error_bounds_propagate() {
    let mut signs = SignSequence::symmetric_continuous(64);
    signs.source = SignSource::MonteCarlo;
    signs.stderr = Some(vec![1e-3; 64]);
    let law = LadderEpochLaw::from_signs(&signs, 64, Epoch::WeakDescending).unwrap();
    let pe = law.pmf_err.unwrap();
    let se = law.survival_err.unwrap();
    // Bound at n = 1: σ_1 / 1.
    assert!((pe[1] - 1e-3).abs() < 1e-18);
    assert!((se[1] - 1e-3).abs() < 1e-18);

    // The bound dominates the actual first-order change for any sign pattern.
    let mut shifted = signs.clone();
    for (n, (g, l)) in shifted
        .gt_zero
        .iter_mut()
        .zip(shifted.le_zero.iter_mut())
        .enumerate()
    {
        let d = if n % 3 == 0 { 1e-3 } else { -1e-3 };
        *l += d;
        *g -= d;
    }
    let moved = LadderEpochLaw::from_signs(&shifted, 64, Epoch::WeakDescending).unwrap();
    for n in 1..=64 {
        assert!(
            (moved.pmf[n] - law.pmf[n]).abs() <= pe[n] * 1.01 + 1e-9,
            "pmf n = {n}"
        );
        assert!(
            (moved.survival[n] - law.survival[n]).abs() <= se[n] * 1.01 + 1e-9,
            "survival n = {n}"
        );
    }
}

fn random_series(coeffs: Vec<f64>, c0: f64) -> PowerSeries<f64> {
    let mut c = coeffs;
    c[0] = c0;
    PowerSeries::new(c)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn exp_log_round_trip(c in proptest::collection::vec(-0.05f64..0.05, 257), c0 in 0.5f64..3.0) {
        // Σ|a_n| < a_0 keeps the series zero-free on the closed unit disk.
        let decayed: Vec<f64> = c.iter().enumerate().map(|(n, x)| x * 0.9f64.powi(n as i32)).collect();
        let a = random_series(decayed, c0);
        let back = a.log_positive().unwrap();
        let mut shifted = back.clone().into_coeffs();
        let log_c0 = shifted[0];
        shifted[0] = 0.0;
        let e = PowerSeries::new(shifted).exp().unwrap().scale(&log_c0.exp());
        for n in 0..=256 {
            prop_assert!((e.coeff(n) - a.coeff(n)).abs() <= 1e-12, "n = {}", n);
        }
    }

    #[test]
    fn log_exp_round_trip(c in proptest::collection::vec(-1.0f64..1.0, 257)) {
        let decayed: Vec<f64> = c.iter().enumerate().map(|(n, x)| x * 0.8f64.powi(n as i32)).collect();
        let a = random_series(decayed, 0.0);
        let back = a.exp().unwrap().log().unwrap();
        for n in 0..=256 {
            prop_assert!((back.coeff(n) - a.coeff(n)).abs() <= 1e-12);
        }
    }
}
