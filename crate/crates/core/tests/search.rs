use kseek_core::eval::cari;
use kseek_core::gmm::{bic_xmeans, sample_model};
use kseek_core::linalg::Matrix;
use kseek_core::search::{best_of_runs, search, Method, SearchConfig};
use kseek_core::{Dataset, Error, GmmModel, Stream};

fn three_clusters(n: usize, seed: u64) -> Dataset {
    let model = GmmModel::new(
        vec![0.3, 0.3, 0.4],
        vec![vec![0.0, 0.0], vec![9.0, 0.0], vec![0.0, 9.0]],
        vec![Matrix::identity(2), Matrix::from_rows(&[[2.0, 0.5], [0.5, 1.0]]), Matrix::identity(2)],
    )
    .unwrap();
    sample_model(&model, n, Stream::new(seed)).unwrap()
}

fn one_gaussian(n: usize, p: usize, seed: u64) -> Dataset {
    let model = GmmModel::new(vec![1.0], vec![vec![0.0; p]], vec![Matrix::identity(p)]).unwrap();
    sample_model(&model, n, Stream::new(seed)).unwrap()
}

#[test]
fn every_method_recovers_three_clusters() {
    for m in Method::ALL {
        let mut hits = 0;
        for seed in 0..3 {
            let data = three_clusters(600, 100 + seed);
            let r = search(&data, m, &SearchConfig::for_method(m).with_seed(seed)).unwrap();
            let c = cari(&r.partition, &data.true_partition().unwrap()).unwrap();
            if r.k_hat == 3 && c > 0.9 {
                hits += 1;
            }
        }
        assert!(hits >= 2, "{m}: {hits}/3");
    }
}

#[test]
fn every_method_accepts_one_gaussian() {
    for m in Method::ALL {
        let ones = (0..3)
            .filter(|&seed| {
                let data = one_gaussian(500, 2, 200 + seed);
                search(&data, m, &SearchConfig::for_method(m).with_seed(seed)).unwrap().k_hat == 1
            })
            .count();
        assert!(ones >= 2, "{m}: {ones}/3");
    }
}

#[test]
fn same_seed_same_result() {
    let data = three_clusters(300, 7);
    for m in Method::ALL {
        let cfg = SearchConfig::for_method(m).with_seed(42);
        let a = search(&data, m, &cfg).unwrap();
        let b = search(&data, m, &cfg).unwrap();
        assert_eq!(a, b, "{m}");
    }
}

#[test]
fn gmeans_ignores_the_seed() {
    let data = three_clusters(400, 8);
    let a = search(&data, Method::GMeans, &SearchConfig::for_method(Method::GMeans).with_seed(1)).unwrap();
    let b = search(&data, Method::GMeans, &SearchConfig::for_method(Method::GMeans).with_seed(99)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn k_hat_respects_bounds() {
    let data = three_clusters(300, 9);
    for m in Method::ALL {
        let mut cfg = SearchConfig::for_method(m).with_seed(3);
        cfg.k_min = 2;
        cfg.k_max = 2;
        let r = search(&data, m, &cfg).unwrap();
        assert_eq!(r.k_hat, 2, "{m}");
        assert_eq!(r.partition.k(), 2);
        assert!(r.partition.sizes().iter().all(|&s| s > 0));
    }
}

#[test]
fn dipmeans_splits_two_clumps() {
    let rows: Vec<[f64; 1]> =
        (0..200).map(|i| [if i % 2 == 0 { -10.0 } else { 10.0 } + (i as f64 * 0.618_034).fract()]).collect();
    let data = Dataset::from_rows(&rows).unwrap();
    let r = search(&data, Method::DipMeans, &SearchConfig::for_method(Method::DipMeans)).unwrap();
    assert_eq!(r.k_hat, 2);
}

#[test]
fn xmeans_moves_lower_local_bic() {
    let data = three_clusters(600, 11);
    let r = search(&data, Method::XMeans, &SearchConfig::for_method(Method::XMeans)).unwrap();
    assert!(!r.moves.is_empty());
    for mv in &r.moves {
        assert!(mv.score_after < mv.score_before);
        assert_eq!(mv.k_after, mv.k_before + 1);
    }
    assert_eq!(r.criterion, bic_xmeans(&r.partition, &data).unwrap());
}

#[test]
fn mmlem_returns_recorded_minimum() {
    let data = three_clusters(600, 12);
    let r = search(&data, Method::MmlEm, &SearchConfig::for_method(Method::MmlEm).with_seed(5)).unwrap();
    assert!(r.trace.iter().all(|t| t.1.is_finite()));
    let min = r.trace.iter().map(|t| t.1).fold(f64::INFINITY, f64::min);
    assert_eq!(r.criterion, min);
    assert!(r.trace.windows(2).all(|w| w[1].0 < w[0].0));
}

#[test]
fn smlsom_merges_strictly_lower_mdl() {
    for seed in 0..4 {
        let data = three_clusters(600, 20 + seed);
        let r = search(&data, Method::Smlsom, &SearchConfig::for_method(Method::Smlsom).with_seed(seed)).unwrap();
        for mv in &r.moves {
            assert!(mv.score_after < mv.score_before);
        }
    }
}

#[test]
fn best_of_one_is_a_single_search() {
    let data = three_clusters(300, 13);
    for m in Method::ALL {
        let cfg = SearchConfig::for_method(m).with_seed(17);
        assert_eq!(best_of_runs(&data, m, 1, &cfg).unwrap(), search(&data, m, &cfg).unwrap(), "{m}");
    }
}

#[test]
fn best_of_runs_keeps_the_minimum() {
    let data = three_clusters(300, 14);
    let cfg = SearchConfig::for_method(Method::XMeans).with_seed(4);
    let best = best_of_runs(&data, Method::XMeans, 5, &cfg).unwrap();
    for r in 1..=5 {
        let partial = best_of_runs(&data, Method::XMeans, r, &cfg).unwrap();
        assert!(best.criterion <= partial.criterion);
    }
}

#[test]
fn invalid_config_is_rejected() {
    let data = one_gaussian(50, 2, 1);
    let mut cfg = SearchConfig::for_method(Method::XMeans);
    cfg.k_max = 0;
    assert!(matches!(search(&data, Method::XMeans, &cfg), Err(Error::InvalidInput(_))));
    assert!(best_of_runs(&data, Method::XMeans, 0, &SearchConfig::for_method(Method::XMeans)).is_err());
}
