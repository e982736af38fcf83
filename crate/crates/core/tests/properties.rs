use dppm::data::{standardize, DataMatrix};
use dppm::dpm::crp_predictive;
use dppm::metrics::{misclassification_error, rand_index};
use dppm::random::log_sum_exp;
use proptest::prelude::*;

fn partition(n: usize, k: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0..k, n)
}

proptest! {
    #[test]
    fn predictive_is_a_distribution(counts in prop::collection::vec(1usize..50, 0..12), alpha in 1e-3f64..50.0) {
        let total = counts.iter().sum();
        let p = crp_predictive(&counts, alpha, total).unwrap();
        prop_assert_eq!(p.len(), counts.len() + 1);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rand_index_is_symmetric_and_bounded((a, b) in (2usize..40).prop_flat_map(|n| (partition(n, 5), partition(n, 4)))) {
        let ab = rand_index(&a, &b).unwrap();
        prop_assert_eq!(ab, rand_index(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(rand_index(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn error_ignores_label_names(z in partition(30, 3), shift in 1usize..3) {
        let renamed: Vec<usize> = z.iter().map(|v| (v + shift) % 3 + 10).collect();
        prop_assert_eq!(misclassification_error(&renamed, &z).unwrap(), 0.0);
    }

    #[test]
    fn log_sum_exp_shift(v in prop::collection::vec(-50.0f64..50.0, 1..20), c in -100.0f64..100.0) {
        let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
        let lhs = log_sum_exp(&shifted).unwrap();
        let rhs = log_sum_exp(&v).unwrap() + c;
        prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + rhs.abs()));
    }

    #[test]
    fn standardize_is_idempotent(rows in prop::collection::vec(prop::collection::vec(-100.0f64..100.0, 3), 3..30)) {
        let data = DataMatrix::from_rows(&rows).unwrap();
        if let Ok(once) = standardize(&data) {
            let twice = standardize(&once).unwrap();
            for (x, y) in once.values().iter().zip(twice.values().iter()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn log_sum_exp_handles_negative_infinity() {
    let v = log_sum_exp(&[f64::NEG_INFINITY, 0.0]).unwrap();
    assert_eq!(v, 0.0);
}
