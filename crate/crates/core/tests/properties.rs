use kseek_core::eval::{ari, cari, pair_counts};
use kseek_core::gmm::{em_fit, mixture_log_likelihood, sample_model, EmInit, EmOptions};
use kseek_core::linalg::Matrix;
use kseek_core::stats::{dip_statistic, ks_statistic, normal_cdf, SortedSample};
use kseek_core::{CovType, Dataset, Error, GmmModel, Partition, Stream};
use proptest::prelude::*;

fn labels(n: usize, k: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0..k, n)
}

fn dataset(max_n: usize, p: usize) -> impl Strategy<Value = Dataset> {
    prop::collection::vec(-5.0..5.0f64, (20 * p)..(max_n * p)).prop_map(move |mut v| {
        v.truncate(v.len() / p * p);
        let n = v.len() / p;
        Dataset::new(Matrix::from_vec(n, p, v)).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn em_never_decreases_likelihood(data in dataset(80, 2), k in 1usize..4, seed in 0u64..1000, ct in 0usize..4) {
        let cov_type = CovType::ALL[ct];
        let n = data.n();
        let raw: Vec<usize> = (0..n).map(|i| ((i as u64 * 2654435761) ^ seed) as usize % k).collect();
        let part = Partition::compact(&raw);
        let opts = EmOptions { cov_type, epsilon: 1e-10, max_iter: 50 };
        match em_fit(&data, part.k(), EmInit::Partition(&part), &opts) {
            Ok(fit) => {
                prop_assert!(fit.trace.len() >= 2);
                for w in fit.trace.windows(2) {
                    prop_assert!(w[1] >= w[0] - 1e-8 * w[0].abs().max(1.0), "{} -> {}", w[0], w[1]);
                }
            }
            Err(e) => prop_assert!(matches!(e, Error::DegenerateComponent(_)), "{e}"),
        }
    }

    #[test]
    fn ari_is_symmetric_and_label_free(u in labels(30, 4), v in labels(30, 5), shift in 1usize..7) {
        let pu = Partition::compact(&u);
        let pv = Partition::compact(&v);
        let a = ari(&pu, &pv).unwrap();
        prop_assert!((a - ari(&pv, &pu).unwrap()).abs() < 1e-12);
        let relabeled: Vec<usize> = u.iter().map(|l| (l + shift) * 3).collect();
        prop_assert!((a - ari(&Partition::compact(&relabeled), &pv).unwrap()).abs() < 1e-12);
        prop_assert!((ari(&pu, &pu).unwrap() - 1.0).abs() < 1e-12 || pu.k() == 1);
    }

    #[test]
    fn cari_lies_between_ari_and_half(u in labels(25, 3), v in labels(25, 4)) {
        let pu = Partition::compact(&u);
        let pv = Partition::compact(&v);
        let a = ari(&pu, &pv).unwrap();
        let c = cari(&pu, &pv).unwrap();
        let lo = a.min(0.5);
        let hi = a.max(0.5);
        prop_assert!(c >= lo - 1e-12 && c <= hi + 1e-12, "ari {a} cari {c}");
        let pc = pair_counts(&pu, &pv).unwrap();
        prop_assert!(pc.t <= pc.p.min(pc.q) + 1e-9);
    }

    #[test]
    fn compact_keeps_pairs(u in labels(40, 6)) {
        let p = Partition::compact(&u);
        prop_assert_eq!(p.sizes().iter().sum::<usize>(), u.len());
        prop_assert!(p.sizes().iter().all(|&s| s > 0));
        for i in 0..u.len() {
            for j in 0..u.len() {
                prop_assert_eq!(u[i] == u[j], p.labels()[i] == p.labels()[j]);
            }
        }
    }

    #[test]
    fn dip_is_bounded(v in prop::collection::vec(-100.0..100.0f64, 4..60)) {
        let n = v.len() as f64;
        let s = SortedSample::from_unsorted(v).unwrap();
        let d = dip_statistic(&s).unwrap();
        prop_assert!(d >= 1.0 / (2.0 * n) - 1e-12 && d <= 0.25 + 1e-12, "{d}");
    }

    #[test]
    fn ks_is_a_probability_gap(v in prop::collection::vec(-4.0..4.0f64, 1..60)) {
        let s = SortedSample::from_unsorted(v).unwrap();
        let d = ks_statistic(&s, normal_cdf);
        prop_assert!(d > 0.0 && d <= 1.0);
    }

    #[test]
    fn likelihood_ignores_component_order(seed in 0u64..500, rot in 0usize..3) {
        let model = GmmModel::new(
            vec![0.2, 0.5, 0.3],
            vec![vec![0.0, 0.0], vec![2.0, 1.0], vec![-1.0, 3.0]],
            vec![Matrix::identity(2), Matrix::from_rows(&[[1.5, 0.3], [0.3, 0.8]]), Matrix::scaled_identity(2, 0.5)],
        ).unwrap();
        let data = sample_model(&model, 50, Stream::new(seed)).unwrap();
        let order: Vec<usize> = (0..3).map(|i| (i + rot) % 3).collect();
        let a = mixture_log_likelihood(&model, &data).unwrap();
        let b = mixture_log_likelihood(&model.permuted(&order), &data).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * a.abs());
    }
}
