//! Exhaustive linear-programming evaluation of the dip.
//!
//! For each candidate mode among the distinct values, the closest unimodal CDF
//! is piecewise linear between data points, convex up to the mode (with a
//! possible jump there) and concave after it. Minimizing the band half-width
//! `d` is a linear program; the dip is the smallest optimum over modes.

/// Dense two-phase simplex for `min c·x` s.t. `A x ≤ b`, `x ≥ 0` (Bland's rule).
fn simplex_min(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> f64 {
    let nv = c.len();
    let m = a.len();
    let n_art = b.iter().filter(|&&v| v < 0.0).count();
    let cols = nv + m + n_art + 1;
    let rhs = cols - 1;
    let mut t = vec![vec![0.0; cols]; m];
    let mut basis = vec![0usize; m];
    let mut art = nv + m;
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..nv {
            t[i][j] = sign * a[i][j];
        }
        t[i][nv + i] = sign;
        t[i][rhs] = sign * b[i];
        if sign < 0.0 {
            t[i][art] = 1.0;
            basis[i] = art;
            art += 1;
        } else {
            basis[i] = nv + i;
        }
    }

    fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], r: usize, e: usize) {
        let pv = t[r][e];
        t[r].iter_mut().for_each(|v| *v /= pv);
        let row = t[r].clone();
        for (i, ti) in t.iter_mut().enumerate() {
            if i != r && ti[e] != 0.0 {
                let f = ti[e];
                ti.iter_mut().zip(&row).for_each(|(v, w)| *v -= f * w);
            }
        }
        basis[r] = e;
    }

    fn run(t: &mut [Vec<f64>], basis: &mut [usize], cost: &[f64], allowed: usize) {
        let rhs = t[0].len() - 1;
        loop {
            let mut enter = None;
            for j in 0..allowed {
                if basis.contains(&j) {
                    continue;
                }
                let reduced: f64 = cost[j] - (0..t.len()).map(|i| cost[basis[i]] * t[i][j]).sum::<f64>();
                if reduced < -1e-11 {
                    enter = Some(j);
                    break;
                }
            }
            let Some(e) = enter else { return };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..t.len() {
                if t[i][e] > 1e-11 {
                    let ratio = t[i][rhs] / t[i][e];
                    let better = match leave {
                        None => true,
                        Some((l, best)) => ratio < best - 1e-13 || (ratio <= best + 1e-13 && basis[i] < basis[l]),
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let (r, _) = leave.expect("bounded program");
            pivot(t, basis, r, e);
        }
    }

    let total = cols - 1;
    if n_art > 0 {
        let mut phase1 = vec![0.0; total];
        phase1[nv + m..].iter_mut().for_each(|v| *v = 1.0);
        run(&mut t, &mut basis, &phase1, total);
        let infeasibility: f64 = (0..m).filter(|&i| basis[i] >= nv + m).map(|i| t[i][rhs]).sum();
        assert!(infeasibility < 1e-9, "infeasible program");
        // Drive remaining zero-level artificials out of the basis.
        for i in 0..m {
            if basis[i] >= nv + m {
                if let Some(e) = (0..nv + m).find(|&j| t[i][j].abs() > 1e-9) {
                    pivot(&mut t, &mut basis, i, e);
                }
            }
        }
    }
    let mut cost = vec![0.0; total];
    cost[..nv].copy_from_slice(c);
    run(&mut t, &mut basis, &cost, nv + m);
    (0..m).map(|i| cost[basis[i]] * t[i][rhs]).sum()
}

/// Smallest band half-width (in counts) admitting a unimodal CDF with mode at `values[mode]`.
fn band_for_mode(values: &[f64], counts: &[f64], n: f64, mode: usize) -> f64 {
    let m = values.len();
    // Variables: g_0..g_{m-1}, h (left limit at the mode), d.
    let nv = m + 2;
    let (h, d) = (m, m + 1);
    let g = |i: usize| i;
    let left = |i: usize| if i == mode { h } else { g(i) };
    let mut a: Vec<Vec<f64>> = Vec::new();
    let mut b: Vec<f64> = Vec::new();
    let mut row = |coef: &[(usize, f64)], rhs: f64| {
        let mut r = vec![0.0; nv];
        for &(j, v) in coef {
            r[j] += v;
        }
        a.push(r);
        b.push(rhs);
    };
    for i in 0..m {
        let before = if i == 0 { 0.0 } else { counts[i - 1] };
        row(&[(g(i), 1.0), (d, -1.0)], counts[i]);
        row(&[(g(i), -1.0), (d, -1.0)], -counts[i]);
        row(&[(left(i), 1.0), (d, -1.0)], before);
        row(&[(left(i), -1.0), (d, -1.0)], -before);
    }
    row(&[(g(m - 1), -1.0), (d, -1.0)], -n);
    row(&[(g(m - 1), 1.0)], n);
    row(&[(h, 1.0), (g(mode), -1.0)], 0.0);
    // Slope of segment i (from values[i] to values[i+1]) as coefficients.
    let slope = |i: usize, end: usize| -> Vec<(usize, f64)> {
        let w = 1.0 / (values[i + 1] - values[i]);
        vec![(end, w), (g(i), -w)]
    };
    if mode > 0 {
        let seg = |i: usize| slope(i, if i + 1 == mode { h } else { g(i + 1) });
        let neg: Vec<(usize, f64)> = seg(0).into_iter().map(|(j, v)| (j, -v)).collect();
        row(&neg, 0.0);
        for i in 0..mode - 1 {
            let mut c = seg(i);
            c.extend(seg(i + 1).into_iter().map(|(j, v)| (j, -v)));
            row(&c, 0.0);
        }
    }
    if mode + 1 < m {
        let seg = |i: usize| slope(i, g(i + 1));
        let neg: Vec<(usize, f64)> = seg(m - 2).into_iter().map(|(j, v)| (j, -v)).collect();
        row(&neg, 0.0);
        for i in mode..m - 2 {
            let mut c = seg(i + 1);
            c.extend(seg(i).into_iter().map(|(j, v)| (j, -v)));
            row(&c, 0.0);
        }
    }
    let mut cost = vec![0.0; nv];
    cost[d] = 1.0;
    simplex_min(&cost, &a, &b)
}

pub fn brute_force_dip(sample: &[f64]) -> f64 {
    let mut values: Vec<f64> = sample.to_vec();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let counts: Vec<f64> = values.iter().map(|v| sample.iter().filter(|&&x| x <= *v).count() as f64).collect();
    let n = sample.len() as f64;
    (0..values.len()).map(|j| band_for_mode(&values, &counts, n, j)).fold(f64::INFINITY, f64::min) / n
}
