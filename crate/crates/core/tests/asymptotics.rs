use ladder_core::asymptotics::{
    calibrate, epoch_law_from_table, spitzer_doney_diagnostic, verify_local_law_minus,
    verify_local_law_plus, verify_omega_ratio, verify_renewal_asymptotics, verify_small_deviations,
    OmegaSum, TheoremId, ToleranceSchedule, Verdict,
};
use ladder_core::lattice::{
    killed_walk, omega_at_one, renewal_function, sign_sequence, RenewalOptions, DEFAULT_CELL_LIMIT,
};
use ladder_core::series::{
    omega_series, t_minus_pmf, tau_minus_pmf, Epoch, LadderEpochLaw, SignSequence,
};
use ladder_core::{Error, IncrementModel};
use proptest::prelude::*;

#[test]
fn lazy_walk_local_law_passes_at_two_thousand() {
    let model = IncrementModel::lazy_walk();
    let signs = sign_sequence(&model, 2100, DEFAULT_CELL_LIMIT).unwrap();
    let law = LadderEpochLaw::from_signs(&signs, 2100, Epoch::WeakDescending).unwrap();
    let grid = [100, 500, 1000, 2000];
    let rep = verify_local_law_minus(&law, 0.5, &grid, ToleranceSchedule::exact_lattice(), 1);
    assert_eq!(rep.theorem, TheoremId::Main);
    assert_eq!(rep.rows.len(), 4);
    assert_eq!(rep.verdict, Verdict::Pass, "{rep}");
    let last = rep.last().unwrap();
    assert!((last.ratio - 1.0).abs() < 0.01);
}

#[test]
fn simple_walk_needs_period_windows() {
    let signs = SignSequence::simple_walk(1100);
    let law = LadderEpochLaw::from_signs(&signs, 1100, Epoch::WeakDescending).unwrap();
    let grid = [250, 500, 1000];
    let averaged = verify_local_law_minus(&law, 0.5, &grid, ToleranceSchedule::exact_lattice(), 2);
    assert_eq!(averaged.verdict, Verdict::Pass, "{averaged}");
    // The literal column alternates between 0 and about twice the target.
    for r in &averaged.rows {
        let lit = r.literal.unwrap();
        assert!(!(0.1..=0.9).contains(&lit), "{lit}");
    }
    let literal = verify_local_law_minus(&law, 0.5, &grid, ToleranceSchedule::exact_lattice(), 1);
    assert_eq!(literal.verdict, Verdict::Fail);
}

#[test]
fn finer_grid_reproduces_coarse_rows() {
    let model =
        IncrementModel::finite_lattice(&[(-2, 0.1), (-1, 0.2), (0, 0.3), (1, 0.4)]).unwrap();
    let signs = sign_sequence(&model, 600, DEFAULT_CELL_LIMIT).unwrap();
    let law = LadderEpochLaw::from_signs(&signs, 600, Epoch::WeakDescending).unwrap();
    let coarse = verify_local_law_minus(
        &law,
        0.5,
        &[100, 300, 600],
        ToleranceSchedule::exact_lattice(),
        1,
    );
    let fine: Vec<u64> = (1..=60).map(|k| 10 * k).collect();
    let refined = verify_local_law_minus(&law, 0.5, &fine, ToleranceSchedule::exact_lattice(), 1);
    for row in &coarse.rows {
        let twin = refined.rows.iter().find(|r| r.n == row.n).unwrap();
        assert_eq!(row, twin);
    }
    assert_eq!(coarse.verdict, refined.verdict);
}

#[test]
fn omega_ratio_for_lazy_walk() {
    let model = IncrementModel::lazy_walk();
    let n = 1200;
    let signs = sign_sequence(&model, n, DEFAULT_CELL_LIMIT).unwrap();
    let tau = tau_minus_pmf(&signs, n).unwrap();
    let omega = omega_series(&signs, n).unwrap();
    let t = t_minus_pmf(&tau, &omega);
    let value = omega_at_one(&model).unwrap();
    assert!((value - 4.0).abs() < 1e-9);
    let sum = OmegaSum::cross_checked(value, omega.coeffs(), 1, "fourier", 1e-3).unwrap();
    let rep = verify_omega_ratio(
        t.coeffs(),
        tau.coeffs(),
        &sum,
        &[200, 600, 1200],
        ToleranceSchedule::constant(ladder_core::asymptotics::ToleranceKind::Relative, 0.05),
        1,
    );
    assert_eq!(rep.verdict, Verdict::Pass, "{rep}");
}

#[test]
fn calibration_is_stable_in_n_for_lazy_walk() {
    let model = IncrementModel::lazy_walk();
    let signs = sign_sequence(&model, 1000, DEFAULT_CELL_LIMIT).unwrap();
    let a = calibrate(&model, 500, signs.eq_zero[499]).unwrap();
    let b = calibrate(&model, 1000, signs.eq_zero[999]).unwrap();
    assert!((a.g0_hat / b.g0_hat - 1.0).abs() < 0.03);
    // Gaussian density at zero.
    assert!((b.g0_hat - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-3);
}

#[test]
fn small_deviation_rejects_periodic_walks() {
    let model = IncrementModel::simple_walk();
    let killed = killed_walk(&model, 40, None, Some(10)).unwrap();
    let renewal = renewal_function(&model, 20, &RenewalOptions::default()).unwrap();
    let calib = calibrate(&model, 40, 0.1).unwrap();
    let err = verify_small_deviations(&model, &killed, &renewal, &calib, 40, 10, 0.05).unwrap_err();
    assert!(matches!(err, Error::InvalidModel(_)));
}

#[test]
fn small_deviation_report_shape() {
    let model = IncrementModel::lazy_walk();
    let n = 400;
    let killed = killed_walk(&model, n, None, None).unwrap();
    let renewal = renewal_function(&model, 20, &RenewalOptions::default()).unwrap();
    let signs = sign_sequence(&model, n, DEFAULT_CELL_LIMIT).unwrap();
    let calib = calibrate(&model, n as u64, signs.eq_zero[n - 1]).unwrap();
    let rep =
        verify_small_deviations(&model, &killed, &renewal, &calib, n as u64, 10, 0.05).unwrap();
    assert_eq!(rep.rows.len(), 10);
    assert!(rep.rows.iter().all(|r| r.measured > 0.0));
    assert_eq!(rep.metadata["row_sum_identity"], 1.0);
}

#[test]
fn renewal_report_needs_two_decades() {
    let model = IncrementModel::lazy_walk();
    let short = renewal_function(&model, 50, &RenewalOptions::default()).unwrap();
    assert!(matches!(
        verify_renewal_asymptotics(&short, &model),
        Err(Error::Insufficient(_))
    ));
    let long = renewal_function(&model, 4000, &RenewalOptions::default()).unwrap();
    let rep = verify_renewal_asymptotics(&long, &model).unwrap();
    assert_eq!(rep.verdict, Verdict::Pass, "{rep}");
    assert!((rep.last().unwrap().measured - 1.0).abs() < 0.01);
}

#[test]
fn spitzer_for_symmetric_walk() {
    let model = IncrementModel::lazy_walk();
    let signs = sign_sequence(&model, 800, DEFAULT_CELL_LIMIT).unwrap();
    let rep = spitzer_doney_diagnostic(&signs, 0.5, &[100, 400, 800], 0.05);
    // P(S_n > 0) = (1 - P(S_n = 0)) / 2 sits just below a half.
    assert_eq!(rep.verdict, Verdict::Pass, "{rep}");
    assert!(rep.rows.iter().all(|r| r.literal.unwrap() < 0.5));
}

#[test]
fn killed_table_feeds_the_same_report_as_series() {
    let model = IncrementModel::finite_lattice(&[(-1, 0.4), (0, 0.3), (1, 0.2), (2, 0.1)]).unwrap();
    let n = 300;
    let killed = killed_walk(&model, n, None, Some(1)).unwrap();
    let signs = sign_sequence(&model, n, DEFAULT_CELL_LIMIT).unwrap();
    let law = LadderEpochLaw::from_signs(&signs, n, Epoch::WeakDescending).unwrap();
    let grid = [50, 150, 300];
    let a = verify_local_law_minus(
        &epoch_law_from_table(&killed),
        0.5,
        &grid,
        ToleranceSchedule::exact_lattice(),
        1,
    );
    let b = verify_local_law_minus(&law, 0.5, &grid, ToleranceSchedule::exact_lattice(), 1);
    for (x, y) in a.rows.iter().zip(&b.rows) {
        assert!((x.measured - y.measured).abs() < 1e-9);
    }
}

fn constant_signs(rho: f64, order: usize) -> SignSequence<f64> {
    SignSequence::from_gt_eq(
        vec![rho; order],
        vec![0.0; order],
        ladder_core::series::SignSource::Analytic,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // Reflecting an atomless walk swaps τ⁺ and τ⁻ and ρ with 1 - ρ.
    #[test]
    fn sign_flip_swaps_reports(rho in 0.05f64..0.95) {
        let order = 400;
        let signs = constant_signs(rho, order);
        let plus = LadderEpochLaw::from_signs(&signs, order, Epoch::StrictAscending).unwrap();
        let minus_of_mirror = LadderEpochLaw::from_signs(&signs.mirror(), order, Epoch::WeakDescending).unwrap();
        let grid = [50, 100, 400];
        let a = verify_local_law_plus(&plus, rho, &grid, ToleranceSchedule::monte_carlo(), 1);
        let b = verify_local_law_minus(&minus_of_mirror, 1.0 - rho, &grid, ToleranceSchedule::monte_carlo(), 1);
        prop_assert_eq!(a.rows.len(), b.rows.len());
        for (x, y) in a.rows.iter().zip(&b.rows) {
            prop_assert!((x.measured - y.measured).abs() <= 1e-12 * x.measured.abs().max(1.0));
            prop_assert!((x.predicted - y.predicted).abs() <= 1e-12);
        }
        prop_assert_eq!(a.verdict, b.verdict);
    }

    #[test]
    fn schedule_lookup_is_nonincreasing(n in 0u64..10_000, m in 0u64..10_000) {
        let s = ToleranceSchedule::exact_lattice();
        let (lo, hi) = if n <= m { (n, m) } else { (m, n) };
        prop_assert!(s.tol(hi) <= s.tol(lo));
    }
}
