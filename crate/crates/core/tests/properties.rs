use proptest::prelude::*;

use sfgroup::basis::within_demean;
use sfgroup::dgp::{generate, Design};
use sfgroup::grouping::{classification_error, hac_cluster, ward_linkage, GroupAssignment};
use sfgroup::individual::fit_firm;
use sfgroup::likelihood::{loglik_mixture_firm, loglik_unique_firm, FirmResidual, MixtureParams};
use sfgroup::montecarlo::{aggregate, Outcome, RepSummary, ReplicationRecord};
use sfgroup::inefficiency::ModelChoice;

fn points(max_n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2..=max_n, 1..=4usize).prop_flat_map(|(n, d)| prop::collection::vec(prop::collection::vec(-10.0..10.0f64, d), n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn demean_is_idempotent_and_linear(
        a in prop::collection::vec(-1e3..1e3f64, 1..40),
        c in -5.0..5.0f64,
    ) {
        let once = within_demean(&a).unwrap();
        let twice = within_demean(&once).unwrap();
        for (x, y) in once.iter().zip(&twice) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
        let scaled: Vec<f64> = a.iter().map(|v| c * v + 3.0).collect();
        for (x, y) in within_demean(&scaled).unwrap().iter().zip(&once) {
            prop_assert!((x - c * y).abs() <= 1e-8 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn every_cut_matches_direct_clustering(pts in points(12)) {
        let history = ward_linkage(&pts).unwrap();
        for k in 1..=pts.len() {
            prop_assert_eq!(history.cut(k).unwrap(), hac_cluster(&pts, k).unwrap().0);
        }
    }

    #[test]
    fn membership_survives_common_rescaling(pts in points(10)) {
        let scaled: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|v| 7.3 * v).collect()).collect();
        let (a, b) = (ward_linkage(&pts).unwrap(), ward_linkage(&scaled).unwrap());
        // rescaling by 7.3 is not exact in floating point, so only inputs
        // whose merge costs are well separated count as tie-free
        let costs: Vec<f64> = a.merges.iter().map(|m| m.cost).collect();
        let mut sorted = costs.clone();
        sorted.sort_by(f64::total_cmp);
        let tie_free = sorted.windows(2).all(|w| w[1] - w[0] > 1e-9 * w[1].abs().max(1.0));
        prop_assume!(tie_free);
        for k in 1..=pts.len() {
            prop_assert_eq!(a.cut(k).unwrap(), b.cut(k).unwrap());
        }
    }

    #[test]
    fn classification_error_is_symmetric(
        labels in prop::collection::vec((0..3usize, 0..3usize), 1..60),
    ) {
        let a = GroupAssignment::from_labels(&labels.iter().map(|l| l.0).collect::<Vec<_>>()).unwrap();
        let b = GroupAssignment::from_labels(&labels.iter().map(|l| l.1).collect::<Vec<_>>()).unwrap();
        let ab = classification_error(&a, &b).unwrap();
        prop_assert_eq!(ab, classification_error(&b, &a).unwrap());
        prop_assert_eq!(ab == 0.0, a == b);
        prop_assert_eq!(classification_error(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn intercept_shift_is_equivariant(seed in 0u64..1000, c in -50.0..50.0f64) {
        let (panel, _) = generate(Design::Dgp1U, 2, 20, seed).unwrap();
        let shifted = panel.with_shifted_firm(0, c);
        let (a, b) = (fit_firm(&panel, 0, 2).unwrap(), fit_firm(&shifted, 0, 2).unwrap());
        prop_assert!((b.intercept_hat - a.intercept_hat - c).abs() <= 1e-9 * (1.0 + c.abs()));
        for (x, y) in a.pi_hat.iter().zip(&b.pi_hat) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
        prop_assert!((a.sigma_v_hat - b.sigma_v_hat).abs() <= 1e-9);
    }

    #[test]
    fn unit_weight_mixture_is_the_unique_likelihood(
        series in prop::collection::vec(-5.0..5.0f64, 1..30),
        sv2 in 0.01..4.0f64,
        su2 in 0.01..4.0f64,
        a0 in -2.0..2.0f64,
    ) {
        let firm = FirmResidual::from_series(&series, sv2);
        let mix = MixtureParams { tau: 1.0, alpha0_1: a0, sigma_u2_1: su2, alpha0_2: a0 + 1.0, sigma_u2_2: 1.0 };
        prop_assert_eq!(loglik_mixture_firm(&firm, &mix).unwrap(), firm.loglik(a0, su2).unwrap());
    }

    #[test]
    fn likelihood_is_finite_in_the_tails(
        sum in -1e6..1e6f64,
        periods in 1usize..10_000,
        sv2 in 1e-3..10.0f64,
        su2 in 1e-3..10.0f64,
    ) {
        let t = periods as f64;
        // Σε² ≥ (Σε)²/T by Cauchy–Schwarz
        let sumsq = sum * sum / t + t * sv2;
        let l = loglik_unique_firm(sum, sumsq, periods, sv2, su2).unwrap();
        prop_assert!(l.is_finite(), "{l}");
    }

    #[test]
    fn bias_never_exceeds_rmse(
        reps in prop::collection::vec((1..=4usize, -3.0..3.0f64, -3.0..3.0f64, any::<bool>()), 1..50),
    ) {
        let records: Vec<ReplicationRecord> = reps
            .iter()
            .enumerate()
            .map(|(i, &(k, e1, e2, mix))| ReplicationRecord {
                rep: i,
                c_lambda: 1.0,
                c_tilde: 1.0,
                outcome: Outcome::Success(RepSummary {
                    k_hat: k,
                    classification_error: 0.0,
                    choice: if mix { ModelChoice::Mixture } else { ModelChoice::Unique },
                    errors: vec![("a".into(), e1), ("b".into(), e2)],
                }),
            })
            .collect();
        let stats = aggregate(&records, 4).unwrap();
        for p in &stats.params {
            prop_assert!(p.bias <= p.rmse + 1e-15, "{p:?}");
        }
        prop_assert!((stats.k_frequency.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!((stats.unique_frequency + stats.mixture_frequency - 1.0).abs() <= 1e-12);
    }
}
