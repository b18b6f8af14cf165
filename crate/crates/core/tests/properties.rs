use fnnsel::criteria::{aic, bic, log_likelihood, FitSummary};
use fnnsel::data::{fit_scaler, split, test_size, Dataset};
use fnnsel::model::{forward, param_count, rss, rss_gradient, Architecture, ParamVector};
use fnnsel::optim::{minimize, BfgsOptions};
use proptest::collection::vec;
use proptest::prelude::*;

const P_MAX: usize = 5;

fn arch_strategy() -> impl Strategy<Value = Architecture> {
    (proptest::sample::subsequence((0..P_MAX).collect::<Vec<_>>(), 1..=P_MAX), 1usize..4)
        .prop_map(|(inputs, q)| Architecture::new(inputs, q).unwrap())
}

fn arch_and_theta() -> impl Strategy<Value = (Architecture, ParamVector)> {
    arch_strategy().prop_flat_map(|arch| {
        let k = arch.param_count();
        (Just(arch.clone()), vec(-3.0..3.0f64, k))
            .prop_map(|(a, t)| {
                let theta = ParamVector::new(&a, t).unwrap();
                (a, theta)
            })
    })
}

fn dataset(n: usize) -> impl Strategy<Value = Dataset> {
    (vec(vec(-2.0..2.0f64, P_MAX), n), vec(-2.0..2.0f64, n)).prop_map(|(rows, y)| {
        let names = (1..=P_MAX).map(|j| format!("x{j}")).collect();
        Dataset::from_rows(names, "y", &rows, y).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn param_count_matches_layout((arch, theta) in arch_and_theta()) {
        prop_assert_eq!(theta.len(), (arch.p() + 2) * arch.q() + 1);
        prop_assert_eq!(param_count(arch.p(), arch.q()).unwrap(), theta.len());
    }

    #[test]
    fn pack_unpack_round_trip((_arch, theta) in arch_and_theta()) {
        let back = theta.unpack().pack().unwrap();
        prop_assert_eq!(back, theta);
    }

    #[test]
    fn prediction_ignores_excluded_covariates(
        (arch, theta) in arch_and_theta(),
        x in vec(-3.0..3.0f64, P_MAX),
        noise in vec(-50.0..50.0f64, P_MAX),
    ) {
        let mut perturbed = x.clone();
        for j in 0..P_MAX {
            if !arch.has_input(j) {
                perturbed[j] = noise[j];
            }
        }
        prop_assert_eq!(forward(&arch, &theta, &x).unwrap(), forward(&arch, &theta, &perturbed).unwrap());
    }

    #[test]
    fn prediction_is_bounded_by_output_weights(
        (arch, theta) in arch_and_theta(),
        x in vec(-1e6..1e6f64, P_MAX),
    ) {
        let w = theta.unpack();
        let bound = w.output_bias.abs() + w.output_weights.iter().map(|g| g.abs()).sum::<f64>();
        let g = forward(&arch, &theta, &x).unwrap();
        prop_assert!(g.is_finite());
        prop_assert!(g.abs() <= bound * (1.0 + 1e-12));
    }

    #[test]
    fn gradient_matches_finite_differences((arch, theta) in arch_and_theta(), data in dataset(12)) {
        let grad = rss_gradient(&arch, &theta, &data).unwrap();
        let mut t = theta.clone();
        for i in 0..theta.len() {
            let h = 1e-5 * (1.0 + theta.as_slice()[i].abs());
            t.as_mut_slice()[i] = theta.as_slice()[i] + h;
            let up = rss(&arch, &t, &data).unwrap();
            t.as_mut_slice()[i] = theta.as_slice()[i] - h;
            let down = rss(&arch, &t, &data).unwrap();
            t.as_mut_slice()[i] = theta.as_slice()[i];
            let fd = (up - down) / (2.0 * h);
            prop_assert!((grad[i] - fd).abs() <= 1e-5 * fd.abs().max(1.0), "component {}: {} vs {}", i, grad[i], fd);
        }
    }

    #[test]
    fn information_criteria_differ_by_penalty(rss_v in 1e-3..1e4f64, n in 5usize..5000, k in 1usize..200) {
        let ll = log_likelihood(rss_v, n).unwrap();
        let gap = bic(ll, n, k) - aic(ll, k);
        let expected = ((n as f64).ln() - 2.0) * (k + 1) as f64;
        prop_assert!((gap - expected).abs() <= 1e-9 * expected.abs().max(1.0));
        let s = FitSummary::from_rss(rss_v, n, k).unwrap();
        prop_assert!((s.sigma2_hat - rss_v / n as f64).abs() <= 1e-15 * s.sigma2_hat);
    }

    #[test]
    fn split_partitions_rows(n in 2usize..300, tf in 0.01..0.99f64, seed in any::<u64>()) {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let data = Dataset::from_rows(vec!["x".into()], "y", &rows, y).unwrap();
        let n_test = test_size(n, tf);
        match split(&data, tf, seed) {
            Ok((train, test)) => {
                prop_assert_eq!(test.n(), n_test);
                prop_assert_eq!(train.n() + test.n(), n);
                let mut all: Vec<f64> = train.response().iter().chain(test.response()).copied().collect();
                // each part keeps the original order
                prop_assert!(train.response().windows(2).all(|w| w[0] < w[1]));
                prop_assert!(test.response().windows(2).all(|w| w[0] < w[1]));
                all.sort_by(f64::total_cmp);
                prop_assert_eq!(all, (0..n).map(|i| i as f64).collect::<Vec<_>>());
            }
            Err(_) => prop_assert!(n_test == 0 || n_test >= n),
        }
    }

    #[test]
    fn scaler_maps_training_rows_onto_unit_interval(data in dataset(20)) {
        let scaler = fit_scaler(&data).unwrap();
        let scaled = scaler.transform(&data).unwrap();
        for j in 0..P_MAX {
            let col = scaled.column(j);
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(lo.abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
        }
        let back = scaler.inverse_transform(&scaled).unwrap();
        for (a, b) in back.covariates_flat().iter().zip(data.covariates_flat()) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
        for (a, b) in back.response().iter().zip(data.response()) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn bfgs_never_ends_above_its_start(c in vec(-5.0..5.0f64, 4), w in vec(0.1..10.0f64, 4), x0 in vec(-5.0..5.0f64, 4)) {
        let f = |x: &[f64], g: &mut [f64]| {
            let mut v = 0.0;
            for i in 0..4 {
                g[i] = 2.0 * w[i] * (x[i] - c[i]) + 4.0 * (x[i] - c[i]).powi(3);
                v += w[i] * (x[i] - c[i]).powi(2) + (x[i] - c[i]).powi(4);
            }
            v
        };
        let mut g0 = vec![0.0; 4];
        let start = f(&x0, &mut g0);
        let m = minimize(f, x0, &BfgsOptions::default());
        prop_assert!(m.value <= start);
        for i in 0..4 {
            prop_assert!((m.x[i] - c[i]).abs() < 1e-4);
        }
    }
}
