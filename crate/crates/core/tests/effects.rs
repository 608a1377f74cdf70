use kseek_core::effects::{
    analyze, ebic, effect_tables, interaction_groups, recover_redundant, refit, AnalysisOptions, Factor, FactorDesign,
    GroupLasso, LassoOptions,
};
use kseek_core::linalg::dot;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn factor(name: &str, n: usize) -> Factor {
    Factor { name: name.into(), levels: (0..n).map(|l| format!("{name}{l}")).collect() }
}

fn random_cells(rng: &mut ChaCha8Rng, levels: &[usize], n: usize) -> Vec<Vec<usize>> {
    (0..n).map(|_| levels.iter().map(|&l| rng.random_range(0..l)).collect()).collect()
}

fn factors(levels: &[usize]) -> Vec<Factor> {
    levels.iter().enumerate().map(|(i, &l)| factor(&format!("f{i}"), l)).collect()
}

/// Unbalanced three-factor design with all interactions.
fn messy_problem(seed: u64) -> (FactorDesign, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let levels = [3, 4, 2];
    let cells = random_cells(&mut rng, &levels, 120);
    let d = FactorDesign::new(factors(&levels), &cells, &interaction_groups(3, None, 3)).unwrap();
    let y: Vec<f64> = cells
        .iter()
        .map(|c| 0.5 * c[0] as f64 - 0.3 * (c[1] == 2) as u8 as f64 + rng.sample::<f64, _>(StandardNormal))
        .collect();
    (d, y)
}

#[test]
fn kkt_holds_along_the_path() {
    for seed in 0..3 {
        let (d, y) = messy_problem(seed);
        let gl = GroupLasso::new(&d, &y).unwrap();
        let path = gl.path(100, 1e-3, &LassoOptions::default()).unwrap();
        for p in &path.points {
            let kkt = gl.kkt_residual(&p.fit);
            assert!(kkt <= 1e-6, "seed {seed} lambda {} kkt {kkt}", p.fit.lambda);
        }
    }
}

#[test]
fn path_starts_empty_and_rss_decreases() {
    let (d, y) = messy_problem(4);
    let gl = GroupLasso::new(&d, &y).unwrap();
    let path = gl.path(60, 1e-3, &LassoOptions::default()).unwrap();
    assert!(path.points[0].fit.beta.iter().all(|b| *b == 0.0));
    let above = gl.fit(gl.lambda_max() * 1.01, None, &LassoOptions::default()).unwrap();
    assert_eq!(above.nonzero(), 0);
    for w in path.points.windows(2) {
        assert!(w[1].fit.rss <= w[0].fit.rss * (1.0 + 1e-9), "{} > {}", w[1].fit.rss, w[0].fit.rss);
        assert!(w[1].fit.lambda < w[0].fit.lambda);
    }
    let best = path.points[path.selected].ebic;
    assert!(best <= path.points[0].ebic && best <= path.points.last().unwrap().ebic);
}

#[test]
fn zero_penalty_is_least_squares() {
    let (d, y) = messy_problem(5);
    let gl = GroupLasso::new(&d, &y).unwrap();
    let opts = LassoOptions { tol: 1e-12, kkt_tol: 1e-12, ..LassoOptions::default() };
    let fit = gl.fit(0.0, None, &opts).unwrap();
    let all: Vec<usize> = (0..d.n_groups()).collect();
    let ols = refit(&d, &y, &all).unwrap();
    let cols: Vec<usize> = all.iter().flat_map(|&g| d.group_columns(g)).collect();
    for i in 0..d.n() {
        let x = d.x().row(i);
        let a = fit.intercept + dot(x, &fit.beta);
        let b = ols.intercept + cols.iter().zip(&ols.coef).map(|(&c, v)| x[c] * v).sum::<f64>();
        assert!((a - b).abs() < 1e-6, "row {i}: {a} vs {b}");
    }
}

fn planted(seed: u64, signal: bool) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let levels = [3, 3, 3, 3, 3];
    let cells = random_cells(&mut rng, &levels, 150);
    let d = FactorDesign::new(factors(&levels), &cells, &interaction_groups(5, None, 1)).unwrap();
    let b1 = [0.4, -0.25];
    let b3 = [-0.3, 0.5];
    let y: Vec<f64> = (0..d.n())
        .map(|i| {
            let x = d.x().row(i);
            let mean = if signal { dot(&x[d.group_columns(0)], &b1) + dot(&x[d.group_columns(2)], &b3) } else { 0.0 };
            mean + 0.1 * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    analyze(&d, &y, &AnalysisOptions::default()).unwrap().selected
}

#[test]
fn planted_groups_are_recovered() {
    let hits = (0..20).filter(|&s| {
        let sel = planted(100 + s, true);
        sel.contains(&0) && sel.contains(&2)
    });
    let hits = hits.count();
    assert!(hits >= 16, "{hits}/20");
}

#[test]
fn pure_noise_selects_nothing() {
    let empty = (0..20).filter(|&s| planted(200 + s, false).is_empty()).count();
    assert!(empty >= 18, "{empty}/20");
}

#[test]
fn ebic_matches_direct_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let n: usize = rng.random_range(1..5000);
        let d: usize = rng.random_range(0..400);
        let m: usize = rng.random_range(0..=d);
        let rss: f64 = rng.random_range(1e-3..1e4);
        let log_binom: f64 = (0..m).map(|i| ((d - i) as f64 / (i + 1) as f64).ln()).sum();
        let direct = n as f64 * (rss / n as f64).ln() + m as f64 * (n as f64).ln() + 2.0 * log_binom;
        let got = ebic(rss, n, m, d).unwrap();
        assert!((got - direct).abs() <= 1e-9 * direct.abs().max(1.0), "{got} vs {direct}");
    }
}

#[test]
fn ebic_grows_with_candidate_count() {
    for m in 0..10 {
        for d in (2 * m).max(1)..60 {
            assert!(ebic(10.0, 50, m, d + 1).unwrap() >= ebic(10.0, 50, m, d).unwrap());
        }
    }
}

#[test]
fn recovered_effects_sum_to_zero() {
    let (d, y) = messy_problem(6);
    let all: Vec<usize> = (0..d.n_groups()).collect();
    let fit = refit(&d, &y, &all).unwrap();
    for rec in recover_redundant(&d, &fit) {
        let fs = &d.groups()[rec.group];
        let sizes: Vec<usize> = fs.iter().map(|&f| d.factors()[f].levels.len()).collect();
        assert_eq!(rec.alpha.len(), sizes.iter().product::<usize>());
        // Every marginal sum over one factor vanishes.
        for (axis, &len) in sizes.iter().enumerate() {
            let stride: usize = sizes[..axis].iter().product();
            for r in 0..rec.alpha.len() {
                if !(r / stride).is_multiple_of(len) {
                    continue;
                }
                let s: f64 = (0..len).map(|l| rec.alpha[r + l * stride]).sum();
                assert!(s.abs() < 1e-12, "group {} axis {axis}: {s}", d.group_name(rec.group));
            }
        }
        assert!(rec.variance.iter().all(|v| *v >= -1e-15));
    }
}

#[test]
fn three_by_four_interaction_margins() {
    let cells: Vec<Vec<usize>> = (0..24).map(|i| vec![i % 3, (i / 3) % 4]).collect();
    let d = FactorDesign::new(factors(&[3, 4]), &cells, &[vec![0], vec![1], vec![0, 1]]).unwrap();
    let y: Vec<f64> = (0..24).map(|i| ((i * 7) % 5) as f64).collect();
    let fit = refit(&d, &y, &[0, 1, 2]).unwrap();
    let inter = &recover_redundant(&d, &fit)[2].alpha;
    for a in 0..3 {
        assert!((0..4).map(|b| inter[a + 3 * b]).sum::<f64>().abs() < 1e-12);
    }
    for b in 0..4 {
        assert!((0..3).map(|a| inter[a + 3 * b]).sum::<f64>().abs() < 1e-12);
    }
    // One 3-level factor: three effects summing to zero.
    let main = &recover_redundant(&d, &fit)[0].alpha;
    assert_eq!(main.len(), 3);
    assert!(main.iter().sum::<f64>().abs() < 1e-12);
}

#[test]
fn constant_response_has_zero_effects() {
    let (d, _) = messy_problem(7);
    let y = vec![2.5; d.n()];
    let all: Vec<usize> = (0..d.n_groups()).collect();
    let fit = refit(&d, &y, &all).unwrap();
    for t in effect_tables(&d, &fit, 0.95, &[]).unwrap() {
        assert!(t.rows.iter().all(|r| r.effect.abs() < 1e-9), "{}", t.name);
    }
    let a = analyze(&d, &y, &AnalysisOptions::default()).unwrap();
    assert!(a.selected.is_empty());
}

#[test]
fn report_cardinality_and_absorption() {
    let (d, y) = messy_problem(8);
    let all: Vec<usize> = (0..d.n_groups()).collect();
    let fit = refit(&d, &y, &all).unwrap();
    let tables = effect_tables(&d, &fit, 0.95, &[]).unwrap();
    assert_eq!(tables.len(), d.n_groups());
    for (t, g) in tables.iter().zip(d.groups()) {
        let expect: usize = g.iter().map(|&f| d.factors()[f].levels.len()).product();
        assert_eq!(t.rows.len(), expect);
        for r in &t.rows {
            assert!(r.lower <= r.effect && r.effect <= r.upper);
        }
    }
    let main = d.find_group(&["f1"]).unwrap();
    let inter = d.find_group(&["f0", "f1"]).unwrap();
    let merged = effect_tables(&d, &fit, 0.95, &[(main, inter)]).unwrap();
    assert_eq!(merged.len(), tables.len() - 1);
    let t_main = &tables[main];
    let t_int = &tables[inter];
    let m_int = merged.iter().find(|t| t.name == "f0:f1").unwrap();
    for (r, row) in m_int.rows.iter().enumerate() {
        let expect = t_int.rows[r].effect + t_main.rows[r / 3].effect;
        assert!((row.effect - expect).abs() < 1e-12);
    }
    assert!(effect_tables(&d, &fit, 0.95, &[(inter, main)]).is_err());
}
