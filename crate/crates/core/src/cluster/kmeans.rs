use ndarray::{Array2, ArrayView1};
use rand::Rng;

use crate::exec::Exec;
use crate::{seed, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansParams {
    pub k: usize,
    pub restarts: usize,
    pub max_iter: usize,
    /// Stop when inertia improves by less than `tol` relative.
    pub tol: f64,
    pub seed: u64,
}

impl KMeansParams {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            restarts: 10,
            max_iter: 100,
            tol: 1e-6,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub centroids: Array2<f64>,
    pub inertia: f64,
    /// Inertia after each assignment step of the winning restart.
    pub inertia_trace: Vec<f64>,
    /// Clusters left without members because every candidate point
    /// coincided with its centroid.
    pub empty_clusters: Vec<usize>,
    /// Index of the winning restart.
    pub restart: usize,
    /// Final inertia of every restart.
    pub restart_inertias: Vec<f64>,
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid per point (ties go to the lower centroid index) and
/// the squared distance to it.
fn nearest(points: &Array2<f64>, centroids: &Array2<f64>) -> (Vec<usize>, Vec<f64>) {
    points
        .outer_iter()
        .map(|p| {
            let mut best = (0, f64::INFINITY);
            for (j, c) in centroids.outer_iter().enumerate() {
                let d = sq_dist(p, c);
                if d < best.1 {
                    best = (j, d);
                }
            }
            best
        })
        .unzip()
}

pub fn assign_to_centroids(points: &Array2<f64>, centroids: &Array2<f64>) -> Result<Vec<usize>> {
    if points.ncols() != centroids.ncols() || centroids.nrows() == 0 {
        return Err(Error::input("points and centroids differ in dimension"));
    }
    Ok(nearest(points, centroids).0)
}

/// k-means++ seeding: first centroid uniform, then proportional to squared
/// distance to the nearest chosen centroid.
fn seed_centroids(points: &Array2<f64>, k: usize, rng: &mut impl Rng) -> Array2<f64> {
    let n = points.nrows();
    let mut centroids = Array2::zeros((k, points.ncols()));
    let first = rng.random_range(0..n);
    centroids.row_mut(0).assign(&points.row(first));
    let mut d2: Vec<f64> = points.outer_iter().map(|p| sq_dist(p, points.row(first))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.random_range(0.0..total);
            let mut idx = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if r < d {
                    idx = i;
                    break;
                }
                r -= d;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(c).assign(&points.row(pick));
        for (i, p) in points.outer_iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, points.row(pick)));
        }
    }
    centroids
}

fn lloyd(points: &Array2<f64>, params: &KMeansParams, restart: usize) -> ClusterAssignment {
    let k = params.k;
    let mut rng = seed::rng(params.seed, 0x6B6D_0000 + restart as u64);
    let mut centroids = seed_centroids(points, k, &mut rng);
    let mut trace = Vec::new();
    let mut prev_labels: Option<Vec<usize>> = None;
    let empty;
    loop {
        let (labels, d2) = nearest(points, &centroids);
        let inertia: f64 = d2.iter().sum();
        let improved_little = trace
            .last()
            .is_some_and(|&p: &f64| p - inertia <= params.tol * p.abs());
        trace.push(inertia);
        let stable = prev_labels.as_ref() == Some(&labels);
        if stable || improved_little || trace.len() > params.max_iter {
            let mut counts = vec![0usize; k];
            labels.iter().for_each(|&l| counts[l] += 1);
            empty = (0..k).filter(|&j| counts[j] == 0).collect();
            prev_labels = Some(labels);
            break;
        }

        // update step with empty-cluster repair
        let mut labels = labels;
        let mut d2 = d2;
        let mut counts = vec![0usize; k];
        labels.iter().for_each(|&l| counts[l] += 1);
        for j in 0..k {
            if counts[j] > 0 {
                continue;
            }
            let largest = (0..k).max_by_key(|&c| (counts[c], std::cmp::Reverse(c))).unwrap();
            let far = (0..points.nrows())
                .filter(|&i| labels[i] == largest)
                .max_by(|&a, &b| d2[a].total_cmp(&d2[b]).then(b.cmp(&a)));
            if let Some(i) = far.filter(|&i| d2[i] > 0.0 && counts[largest] > 1) {
                counts[largest] -= 1;
                counts[j] += 1;
                labels[i] = j;
                d2[i] = 0.0;
            }
        }
        let mut sums = Array2::<f64>::zeros(centroids.dim());
        for (i, p) in points.outer_iter().enumerate() {
            let mut row = sums.row_mut(labels[i]);
            row += &p;
        }
        for j in 0..k {
            if counts[j] > 0 {
                let mean = &sums.row(j) / counts[j] as f64;
                centroids.row_mut(j).assign(&mean);
            }
        }
        prev_labels = Some(labels);
    }
    ClusterAssignment {
        labels: prev_labels.unwrap(),
        centroids,
        inertia: *trace.last().unwrap(),
        inertia_trace: trace,
        empty_clusters: empty,
        restart,
        restart_inertias: Vec::new(),
    }
}

/// Lloyd's k-means with k-means++ seeding, best of `restarts` runs by
/// inertia (ties go to the lowest restart index).
pub fn kmeans(points: &Array2<f64>, params: &KMeansParams, exec: Exec) -> Result<ClusterAssignment> {
    let n = points.nrows();
    if params.k == 0 {
        return Err(Error::input("k must be positive"));
    }
    if params.k > n {
        return Err(Error::input(format!("k = {} exceeds {} points", params.k, n)));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("points contain non-finite values"));
    }
    let runs = exec.map_range(params.restarts.max(1), |r| lloyd(points, params, r));
    let inertias: Vec<f64> = runs.iter().map(|r| r.inertia).collect();
    let mut best = runs
        .into_iter()
        .reduce(|a, b| if b.inertia < a.inertia { b } else { a })
        .unwrap();
    best.restart_inertias = inertias;
    Ok(best)
}

#[cfg(test)]
fn column_mean(points: &Array2<f64>) -> ndarray::Array1<f64> {
    points.mean_axis(ndarray::Axis(0)).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn blobs() -> Array2<f64> {
        let mut rows = Vec::new();
        for i in 0..20 {
            let j = (i as f64) * 0.01;
            rows.push([j, -j]);
            rows.push([10.0 + j, 10.0 - j]);
        }
        Array2::from_shape_vec((40, 2), rows.concat()).unwrap()
    }

    #[test]
    fn single_cluster_is_mean() {
        let p = array![[0.0, 0.0], [2.0, 0.0], [4.0, 3.0]];
        let r = kmeans(&p, &KMeansParams::new(1, 3), Exec::Sequential).unwrap();
        let mean = column_mean(&p);
        assert!((r.centroids[(0, 0)] - mean[0]).abs() < 1e-12);
        assert!((r.centroids[(0, 1)] - mean[1]).abs() < 1e-12);
        let total: f64 = p.outer_iter().map(|q| sq_dist(q, mean.view())).sum();
        assert!((r.inertia - total).abs() < 1e-12);
    }

    #[test]
    fn separates_blobs() {
        let r = kmeans(&blobs(), &KMeansParams::new(2, 1), Exec::Sequential).unwrap();
        for i in (0..40).step_by(2) {
            assert_eq!(r.labels[i], r.labels[0]);
            assert_eq!(r.labels[i + 1], r.labels[1]);
        }
        assert_ne!(r.labels[0], r.labels[1]);
    }

    #[test]
    fn inertia_never_increases() {
        let p = Array2::from_shape_fn((200, 3), |(i, j)| ((i * 7 + j * 13) % 17) as f64 + (i % 5) as f64 * 0.3);
        let r = kmeans(&p, &KMeansParams::new(6, 9), Exec::Sequential).unwrap();
        for w in r.inertia_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{:?}", r.inertia_trace);
        }
        assert!(r.restart_inertias.iter().all(|&x| r.inertia <= x));
    }

    #[test]
    fn identical_points_flag_empty_clusters() {
        let p = Array2::from_elem((5, 2), 1.5);
        let r = kmeans(&p, &KMeansParams::new(3, 0), Exec::Sequential).unwrap();
        assert_eq!(r.inertia, 0.0);
        assert!(r.labels.iter().all(|&l| l == r.labels[0]));
        assert_eq!(r.empty_clusters.len(), 2);
    }

    #[test]
    fn too_many_clusters_is_error() {
        assert!(kmeans(&Array2::zeros((2, 2)), &KMeansParams::new(3, 0), Exec::Sequential).is_err());
    }

    #[test]
    fn parallel_matches_sequential() {
        let p = blobs();
        let a = kmeans(&p, &KMeansParams::new(3, 4), Exec::Sequential).unwrap();
        let b = kmeans(&p, &KMeansParams::new(3, 4), Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }
}
