use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const MAX_ITERATIONS: usize = 300;
/// Independent k-means++ starts; the lowest final inertia wins.
pub const N_INIT: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    pub assignments: Vec<usize>,
    pub centroids: Matrix,
    pub inertia: f64,
    pub k: usize,
    pub seed: u64,
    /// Inertia after each assignment step, first to last.
    pub inertia_trace: Vec<f64>,
}

impl ClusterResult {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn plus_plus_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = vec![points[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, d) in d2.iter().enumerate() {
                if u < *d {
                    chosen = i;
                    break;
                }
                u -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = points[pick].clone();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Lloyd's algorithm from [`N_INIT`] k-means++ starts, keeping the run with
/// the lowest inertia (the earliest on ties). Deterministic in `(points, k, seed)`.
pub fn kmeans(points: &Matrix, k: usize, seed: u64) -> Result<ClusterResult> {
    let n = points.rows();
    if k == 0 || n == 0 {
        return Err(Error::InvalidArgument("k-means needs k >= 1 and at least one point".into()));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds {n} points")));
    }
    let pts: Vec<Vec<f64>> = points
        .iter_rows()
        .map(|r| r.iter().map(|v| *v as f64).collect())
        .collect();
    let dim = points.cols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<usize>, Vec<Vec<f64>>, f64, Vec<f64>)> = None;
    for _ in 0..N_INIT {
        let run = lloyd(&pts, dim, k, &mut rng);
        if best.as_ref().is_none_or(|b| run.2 < b.2) {
            best = Some(run);
        }
    }
    let (assignments, centroids, inertia, trace) = best.expect("N_INIT > 0");
    let centroids = Matrix::from_rows(
        &centroids
            .iter()
            .map(|c| c.iter().map(|v| *v as f32).collect())
            .collect::<Vec<_>>(),
    )?;
    Ok(ClusterResult {
        assignments,
        centroids,
        inertia,
        k,
        seed,
        inertia_trace: trace,
    })
}

/// One Lloyd run: assignments, centroids, final inertia and the trace.
fn lloyd(pts: &[Vec<f64>], dim: usize, k: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<Vec<f64>>, f64, Vec<f64>) {
    let mut centroids = plus_plus_init(pts, k, rng);

    let mut assignments: Vec<usize> = Vec::new();
    let mut trace = Vec::new();
    for _ in 0..MAX_ITERATIONS {
        let mut inertia = 0.0;
        let next: Vec<usize> = pts
            .iter()
            .map(|p| {
                let (best, d) = centroids
                    .iter()
                    .enumerate()
                    .map(|(c, cent)| (c, sq_dist(p, cent)))
                    .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
                inertia += d;
                best
            })
            .collect();
        trace.push(inertia);
        if next == assignments {
            break;
        }
        assignments = next;

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in pts.iter().zip(&assignments) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            // an emptied cluster keeps its previous centroid
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    // the centroids moved after the last assignment unless it converged
    let inertia = pts
        .iter()
        .zip(&assignments)
        .map(|(p, &a)| sq_dist(p, &centroids[a]))
        .sum();

    (assignments, centroids, inertia, trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn blobs(seed: u64, n_a: usize, n_b: usize) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.5).unwrap();
        let mut rows = Vec::new();
        for (center, n) in [(-4.0f32, n_a), (4.0, n_b)] {
            for _ in 0..n {
                rows.push(vec![
                    center + noise.sample(&mut rng) as f32,
                    noise.sample(&mut rng) as f32,
                ]);
            }
        }
        Matrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let m = blobs(1, 5, 7);
        let r = kmeans(&m, 1, 0).unwrap();
        let mean = m.mean_rows();
        for (a, b) in r.centroids.row(0).iter().zip(&mean) {
            assert!((a - b).abs() < 1e-5);
        }
        let total: f64 = m
            .iter_rows()
            .map(|row| row.iter().zip(&mean).map(|(x, mu)| ((x - mu) as f64).powi(2)).sum::<f64>())
            .sum();
        assert!((r.inertia - total).abs() < 1e-6 * total.max(1.0));
    }

    #[test]
    fn one_point_per_cluster() {
        let m = blobs(2, 3, 3);
        let r = kmeans(&m, 6, 5).unwrap();
        assert!(r.inertia.abs() < 1e-9);
    }

    #[test]
    fn k_exceeding_points_is_rejected() {
        assert!(kmeans(&blobs(3, 1, 1), 3, 0).is_err());
        assert!(kmeans(&blobs(3, 1, 1), 0, 0).is_err());
    }

    #[test]
    fn deterministic_for_seed() {
        let m = blobs(4, 20, 13);
        assert_eq!(kmeans(&m, 3, 11).unwrap(), kmeans(&m, 3, 11).unwrap());
    }

    #[test]
    fn separated_blobs_split_cleanly() {
        let r = kmeans(&blobs(5, 8, 4), 2, 1).unwrap();
        assert_eq!(r.assignments[..8].iter().collect::<std::collections::BTreeSet<_>>().len(), 1);
        assert_ne!(r.assignments[0], r.assignments[11]);
        let mut sizes = r.cluster_sizes();
        sizes.sort();
        assert_eq!(sizes, vec![4, 8]);
    }

    #[test]
    fn duplicate_points_do_not_break_seeding() {
        let m = Matrix::from_rows(&vec![vec![1.0, 1.0]; 5]).unwrap();
        let r = kmeans(&m, 3, 0).unwrap();
        assert_eq!(r.inertia, 0.0);
    }
}
