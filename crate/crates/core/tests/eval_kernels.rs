mod common;

use proptest::prelude::*;
use riskforge::eval::{auc, cox_partial_loglik, fit_cox, kaplan_meier, pearson, SurvivalData};
use riskforge::FeatureMatrix;

fn scores_and_labels() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    (2usize..=50).prop_flat_map(|n| {
        // a small score alphabet forces ties
        (prop::collection::vec(0u8..8, n), prop::collection::vec(0u8..=1, n))
            .prop_map(|(s, y)| (s.into_iter().map(|v| f64::from(v) / 8.0).collect(), y))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn auc_equals_pair_counting((s, y) in scores_and_labels()) {
        match (auc(&s, &y), common::auc_pairs(&s, &y)) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() <= 1e-12, "{} vs {}", a, b),
            (a, b) => prop_assert_eq!(a, b),
        }
    }

    #[test]
    fn auc_label_flip_complements((s, y) in scores_and_labels()) {
        let flipped: Vec<u8> = y.iter().map(|v| 1 - v).collect();
        if let (Some(a), Some(b)) = (auc(&s, &y), auc(&s, &flipped)) {
            prop_assert!((a + b - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn auc_invariant_to_monotone_transform((s, y) in scores_and_labels()) {
        let t: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
        prop_assert_eq!(auc(&s, &y), auc(&t, &y));
    }

    #[test]
    fn km_is_monotone_within_unit_interval(
        data in prop::collection::vec((1u8..30, any::<bool>()), 1..60)
    ) {
        let times: Vec<f64> = data.iter().map(|(t, _)| f64::from(*t)).collect();
        let events: Vec<bool> = data.iter().map(|(_, e)| *e).collect();
        let km = kaplan_meier(&times, &events);
        for w in km.windows(2) {
            prop_assert!(w[1].survival <= w[0].survival);
            prop_assert!((0.0..=1.0).contains(&w[1].survival));
        }
    }
}

#[test]
fn km_hand_fixture_exact() {
    let (times, events, want) = common::km_fixture();
    let km = kaplan_meier(&times, &events);
    let got: Vec<(f64, f64, usize)> = km.iter().map(|p| (p.time, p.survival, p.at_risk)).collect();
    assert_eq!(got, want);
}

fn one_covariate(times: Vec<f64>, events: Vec<bool>, x: Vec<f64>) -> SurvivalData {
    let n = times.len();
    let m = FeatureMatrix::new((0..n).map(|i| format!("i{i}")).collect(), vec!["x".into()], x).unwrap();
    SurvivalData::new(times, events, Some(m)).unwrap()
}

#[test]
fn cox_recovers_planted_hazard_ratio() {
    let (t, e, x) = common::planted_hazard(2000, 2.0, 0.59, 2024);
    let censored = e.iter().filter(|v| !**v).count() as f64 / 2000.0;
    assert!((0.27..=0.33).contains(&censored), "censoring {censored}");
    let fit = fit_cox(&one_covariate(t, e, x)).unwrap();
    let hr = fit.coefficients[0].exp_beta;
    assert!((1.8..=2.2).contains(&hr), "hr {hr}");
    assert!(fit.coefficients[0].ci_lower < hr && hr < fit.coefficients[0].ci_upper);
    assert!(fit.trace.windows(2).all(|w| w[1] >= w[0] - 1e-9));
}

#[test]
fn cox_gradient_matches_finite_differences() {
    let (t, e, x1) = common::planted_hazard(300, 1.5, 0.5, 9);
    let x: Vec<f64> = x1.iter().enumerate().flat_map(|(i, v)| [*v, (i % 7) as f64 / 7.0 - 0.4, ((i * 13) % 11) as f64 / 5.0]).collect();
    for beta in [[0.0, 0.0, 0.0], [0.3, -0.5, 0.1], [-0.2, 0.8, -0.3]] {
        let (_, g, info) = cox_partial_loglik(&t, &e, &x, 3, &beta);
        let f = |b: &[f64]| cox_partial_loglik(&t, &e, &x, 3, b).0;
        let fd = common::numeric_grad(&f, &beta, 1e-5);
        let rel = common::relative_error(&g, &fd);
        assert!(rel < 1e-5, "gradient rel err {rel}");
        // information is minus the Hessian
        for a in 0..3 {
            let ga = |b: &[f64]| cox_partial_loglik(&t, &e, &x, 3, b).1[a];
            let row = common::numeric_grad(&ga, &beta, 1e-5);
            let want: Vec<f64> = row.iter().map(|v| -v).collect();
            assert!(common::relative_error(&info[a * 3..a * 3 + 3], &want) < 1e-5);
        }
    }
}

#[test]
fn cox_tied_times_use_breslow() {
    // all four subjects fail at t=1; Breslow: ll = sum(eta) - 4 ln(sum exp(eta))
    let x = [0.0, 1.0, 0.0, 1.0];
    let (ll, _, _) = cox_partial_loglik(&[1.0; 4], &[true; 4], &x, 1, &[0.5]);
    let want = 1.0 - 4.0 * (2.0 + 2.0 * 0.5f64.exp()).ln();
    assert!((ll - want).abs() < 1e-12);
}

#[test]
fn pearson_matches_textbook_formula() {
    let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
    let y = [0.0, 0.0, 1.0, 0.0, 1.0, 1.0];
    let (mx, my) = (3.5, 0.5);
    let num: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den = (x.iter().map(|a| (a - mx).powi(2)).sum::<f64>() * y.iter().map(|b| (b - my).powi(2)).sum::<f64>()).sqrt();
    assert!((pearson(&x, &y).unwrap() - num / den).abs() < 1e-14);
    assert_eq!(pearson(&[1.0, 1.0, 1.0], &[0.0, 1.0, 0.0]), None);
}
