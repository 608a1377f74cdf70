use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use rand::Rng;

use super::SplitInit;
use crate::gmm::{Dataset, Partition};
use crate::linalg::{norm, sq_dist, Matrix};

pub const KMEANS_MAX_ITER: usize = 100;

fn nearest(x: &[f64], centers: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for k in 0..centers.rows() {
        let d = sq_dist(x, centers.row(k));
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

fn centroids(data: &Dataset, labels: &[usize], k: usize) -> Matrix {
    let p = data.p();
    let mut c = Matrix::zeros(k, p);
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for (a, x) in c.row_mut(l).iter_mut().zip(data.sample(i)) {
            *a += x;
        }
    }
    for (l, &s) in counts.iter().enumerate() {
        if s > 0 {
            c.row_mut(l).iter_mut().for_each(|a| *a /= s as f64);
        }
    }
    c
}

/// Lloyd's algorithm from `centers`.
///
/// Ties go to the lowest center index. A cluster left empty takes the point
/// farthest from its own centroid. The returned centers are the centroids
/// of the returned partition; clusters that stay empty are dropped.
pub fn kmeans(data: &Dataset, centers: &Matrix, max_iter: usize) -> (Partition, Matrix) {
    let n = data.n();
    let k = centers.rows();
    let mut centers = centers.clone();
    let mut labels: Vec<usize> = (0..n).map(|i| nearest(data.sample(i), &centers).0).collect();
    for _ in 0..max_iter.max(1) {
        repair_empty(data, &mut labels, &centers, k);
        centers = centroids(data, &labels, k);
        let next: Vec<usize> = (0..n).map(|i| nearest(data.sample(i), &centers).0).collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    repair_empty(data, &mut labels, &centers, k);
    let part = Partition::compact(&labels);
    let centers = part.centroids(data);
    (part, centers)
}

fn repair_empty(data: &Dataset, labels: &mut [usize], centers: &Matrix, k: usize) {
    let mut sizes = vec![0usize; k];
    for &l in labels.iter() {
        sizes[l] += 1;
    }
    for j in 0..k {
        if sizes[j] > 0 {
            continue;
        }
        let mut far: Option<(usize, f64)> = None;
        for (i, &l) in labels.iter().enumerate() {
            if sizes[l] < 2 {
                continue;
            }
            let d = sq_dist(data.sample(i), centers.row(l));
            if far.is_none_or(|(_, b)| d > b) {
                far = Some((i, d));
            }
        }
        if let Some((i, _)) = far {
            sizes[labels[i]] -= 1;
            labels[i] = j;
            sizes[j] = 1;
        }
    }
}

/// `μ ± u √(2λ/π)` with `(λ, u)` the principal eigenpair of the ML covariance
/// of `data`, found by power iteration.
pub fn split_init(data: &Dataset, mu: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let p = data.p();
    let cov = data.covariance();
    let mut u: Vec<f64> = (0..p).map(|j| 1.0 + 0.1 * j as f64 / p as f64).collect();
    let mut lambda = 0.0;
    for _ in 0..1000 {
        let w = cov.mul_vec(&u);
        let len = norm(&w);
        if !(len > 0.0) {
            lambda = 0.0;
            break;
        }
        let next: Vec<f64> = w.iter().map(|v| v / len).collect();
        let change = sq_dist(&next, &u).sqrt();
        u = next;
        lambda = len;
        if change < 1e-8 {
            break;
        }
    }
    if !(lambda > 0.0) {
        let mut a = mu.to_vec();
        let mut b = mu.to_vec();
        a[0] += 1e-8;
        b[0] -= 1e-8;
        return (a, b);
    }
    let s = (2.0 * lambda / core::f64::consts::PI).sqrt();
    let a = mu.iter().zip(&u).map(|(m, v)| m + s * v).collect();
    let b = mu.iter().zip(&u).map(|(m, v)| m - s * v).collect();
    (a, b)
}

/// A random member and its reflection through `mu`. Falls back to the
/// principal split when every draw coincides with `mu`.
pub(crate) fn reflection_init<R: Rng>(data: &Dataset, mu: &[f64], rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    for _ in 0..8 {
        let x = data.sample(rng.random_range(0..data.n()));
        if sq_dist(x, mu) > 0.0 {
            let r = x.iter().zip(mu).map(|(v, m)| 2.0 * m - v).collect();
            return (x.to_vec(), r);
        }
    }
    split_init(data, mu)
}

/// Local 2-means of `subset` seeded by `init`. `None` if it collapses to one cluster.
pub(crate) fn two_means<R: Rng>(subset: &Dataset, init: SplitInit, rng: &mut R) -> Option<(Partition, Matrix)> {
    let mu = subset.mean();
    let (a, b) = match init {
        SplitInit::Principal => split_init(subset, &mu),
        SplitInit::Reflection => reflection_init(subset, &mu, rng),
    };
    let (part, centers) = kmeans(subset, &Matrix::from_rows(&[a, b]), KMEANS_MAX_ITER);
    (part.k() == 2).then_some((part, centers))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmm::{sample_model, GmmModel};
    use crate::rng::Stream;

    #[test]
    fn single_center_is_mean() {
        let d = Dataset::from_rows(&[[0.0, 1.0], [2.0, 3.0], [4.0, 8.0]]).unwrap();
        let (part, c) = kmeans(&d, &Matrix::from_rows(&[[10.0, 10.0]]), 100);
        assert_eq!(part.k(), 1);
        assert_eq!(c.row(0), &[2.0, 4.0]);
    }

    #[test]
    fn separated_clumps_and_fixed_point() {
        let m = GmmModel::new(
            vec![0.5, 0.5],
            vec![vec![-10.0], vec![10.0]],
            vec![Matrix::identity(1), Matrix::identity(1)],
        )
        .unwrap();
        let d = sample_model(&m, 400, Stream::new(3)).unwrap();
        let (part, c) = kmeans(&d, &Matrix::from_rows(&[[-1.0], [1.0]]), 100);
        assert_eq!(part, Partition::compact(d.labels().unwrap()));
        let (again, c2) = kmeans(&d, &c, 100);
        assert_eq!(again, part);
        assert_eq!(c, c2);
    }

    #[test]
    fn empty_cluster_takes_farthest_point() {
        let d = Dataset::from_rows(&[[0.0], [1.0], [2.0], [10.0]]).unwrap();
        let (part, _) = kmeans(&d, &Matrix::from_rows(&[[1.0], [100.0]]), 100);
        assert_eq!(part.k(), 2);
        assert_eq!(part.labels(), &[0, 0, 0, 1]);
    }

    #[test]
    fn split_init_scalar_case() {
        let d = Dataset::from_rows(&[[1.0], [3.0], [5.0], [7.0]]).unwrap();
        let (a, b) = split_init(&d, &[4.0]);
        let sd = 5.0f64.sqrt();
        let off = sd * (2.0 / core::f64::consts::PI).sqrt();
        assert!((a[0] - (4.0 + off)).abs() < 1e-6 || (a[0] - (4.0 - off)).abs() < 1e-6);
        assert!((a[0] + b[0] - 8.0).abs() < 1e-12);
    }

    #[test]
    fn split_init_follows_long_axis() {
        let m =
            GmmModel::new(vec![1.0], vec![vec![0.0, 0.0]], vec![Matrix::from_rows(&[[9.0, 0.0], [0.0, 1.0]])]).unwrap();
        let d = sample_model(&m, 5000, Stream::new(4)).unwrap();
        let mu = d.mean();
        let (a, b) = split_init(&d, &mu);
        let dir = [a[0] - b[0], a[1] - b[1]];
        // Closed-form principal direction of the sample covariance.
        let c = d.covariance();
        let theta = 0.5 * (2.0 * c[(0, 1)]).atan2(c[(0, 0)] - c[(1, 1)]);
        let got = dir[1].atan2(dir[0]);
        let mut diff = (got - theta).abs() % core::f64::consts::PI;
        diff = diff.min(core::f64::consts::PI - diff);
        assert!(diff < 1e-4, "{diff}");
        assert!(theta.abs() < 5f64.to_radians());
        for j in 0..2 {
            assert!((a[j] + b[j] - 2.0 * mu[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_covariance_perturbs() {
        let d = Dataset::from_rows(&[[2.0, 2.0], [2.0, 2.0]]).unwrap();
        let (a, b) = split_init(&d, &[2.0, 2.0]);
        assert_eq!(a, vec![2.0 + 1e-8, 2.0]);
        assert_eq!(b, vec![2.0 - 1e-8, 2.0]);
    }
}
