//! Cosine k-means with optional fixed seed centroids and anchored points.

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, normalize_in_place, Matrix};
use crate::rng::RngService;

pub const MAX_ITERATIONS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    /// `K x p`, unit-norm rows.
    pub centroids: Matrix,
    /// `sum_i (1 - <x_i, c_{a(i)}>)`.
    pub dissimilarity: f64,
    pub iterations: usize,
}

/// k-means++ on the unit sphere: extends `existing` centroids to `k` rows,
/// sampling each new one with probability proportional to its squared
/// Euclidean distance `2 - 2 cos` to the closest chosen centroid.
pub fn kmeans_plus_plus(points: &Matrix, existing: &Matrix, k: usize, rng: &mut RngService) -> Matrix {
    let p = points.cols();
    let n = points.rows();
    let mut centroids = Matrix::zeros(k, p);
    let start = existing.rows().min(k);
    for r in 0..start {
        centroids.row_mut(r).copy_from_slice(existing.row(r));
    }
    if start == k || n == 0 {
        return centroids;
    }
    let mut best_d2 = vec![f64::INFINITY; n];
    let refresh = |best_d2: &mut [f64], c: &[f64]| {
        for (i, d) in best_d2.iter_mut().enumerate() {
            let d2 = (2.0 - 2.0 * dot(points.row(i), c)).max(0.0);
            if d2 < *d {
                *d = d2;
            }
        }
    };
    for r in 0..start {
        refresh(&mut best_d2, existing.row(r));
    }
    for r in start..k {
        let pick = if r == 0 {
            rng.index(n)
        } else {
            // all points already coincide with a centroid
            rng.weighted_index(&best_d2).unwrap_or_else(|| rng.index(n))
        };
        centroids.row_mut(r).copy_from_slice(points.row(pick));
        refresh(&mut best_d2, points.row(pick));
    }
    centroids
}

fn nearest(x: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = 0;
    let mut best_sim = f64::NEG_INFINITY;
    for (k, c) in centroids.row_iter().enumerate() {
        let s = dot(x, c);
        if s > best_sim {
            best_sim = s;
            best = k;
        }
    }
    (best, best_sim)
}

/// Clusters unit-norm `points` into `k` groups.
///
/// `seeds` fixes the initial centroids of clusters `0..seeds.rows()`; the
/// rest start from k-means++. `anchors[i] = Some(c)` pins point `i` to
/// cluster `c` for every iteration. An emptied cluster is re-seeded at the
/// free point least similar to its own centroid.
pub fn seeded_kmeans(
    points: &Matrix,
    k: usize,
    seeds: Option<&Matrix>,
    anchors: Option<&[Option<usize>]>,
    rng: &mut RngService,
) -> Result<KMeansResult> {
    let n = points.rows();
    let p = points.cols();
    if k == 0 || k > n {
        return Err(Error::invalid("k", format!("need 1 <= K <= n = {n}, got {k}")));
    }
    let empty = Matrix::zeros(0, p);
    let seeds = seeds.unwrap_or(&empty);
    if seeds.rows() > k || (seeds.rows() > 0 && seeds.cols() != p) {
        return Err(Error::invalid("seeds", "more seeds than clusters or wrong width"));
    }
    if let Some(a) = anchors {
        if a.len() != n || a.iter().flatten().any(|&c| c >= k) {
            return Err(Error::invalid("anchors", "one entry per point with cluster ids below K"));
        }
    }
    let anchor_of = |i: usize| anchors.and_then(|a| a[i]);

    let mut centroids = kmeans_plus_plus(points, seeds, k, rng);
    let mut assignments = vec![usize::MAX; n];
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut changed = false;
        let mut sims = vec![0.0; n];
        for i in 0..n {
            let (c, s) = match anchor_of(i) {
                Some(c) => (c, dot(points.row(i), centroids.row(c))),
                None => nearest(points.row(i), &centroids),
            };
            sims[i] = s;
            if assignments[i] != c {
                assignments[i] = c;
                changed = true;
            }
        }

        let mut counts = vec![0usize; k];
        for &c in &assignments {
            counts[c] += 1;
        }
        let mut taken = vec![false; n];
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let victim = (0..n)
                .filter(|&i| anchor_of(i).is_none() && !taken[i] && counts[assignments[i]] > 1)
                .min_by(|&a, &b| sims[a].total_cmp(&sims[b]));
            if let Some(i) = victim {
                taken[i] = true;
                counts[assignments[i]] -= 1;
                counts[c] += 1;
                assignments[i] = c;
                centroids.row_mut(c).copy_from_slice(points.row(i));
                changed = true;
            }
        }

        let mut sums = Matrix::zeros(k, p);
        for (i, &c) in assignments.iter().enumerate() {
            axpy(1.0, points.row(i), sums.row_mut(c));
        }
        for c in 0..k {
            let row = sums.row_mut(c);
            if counts[c] > 0 && normalize_in_place(row, 1e-12) >= 1e-12 {
                centroids.row_mut(c).copy_from_slice(row);
            }
        }
        if !changed {
            break;
        }
    }
    let dissimilarity = assignments
        .iter()
        .enumerate()
        .map(|(i, &c)| 1.0 - dot(points.row(i), centroids.row(c)))
        .sum();
    Ok(KMeansResult {
        assignments,
        centroids,
        dissimilarity,
        iterations,
    })
}

/// Best of `restarts` runs by total dissimilarity; earlier runs win ties.
pub fn seeded_kmeans_restarts(
    points: &Matrix,
    k: usize,
    seeds: Option<&Matrix>,
    anchors: Option<&[Option<usize>]>,
    restarts: usize,
    rng: &mut RngService,
) -> Result<KMeansResult> {
    let mut best = seeded_kmeans(points, k, seeds, anchors, rng)?;
    for _ in 1..restarts {
        let run = seeded_kmeans(points, k, seeds, anchors, rng)?;
        if run.dissimilarity < best.dissimilarity - 1e-12 {
            best = run;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_rows(rows: &[Vec<f64>]) -> Matrix {
        let mut m = Matrix::from_rows(rows).unwrap();
        for r in 0..m.rows() {
            normalize_in_place(m.row_mut(r), 1e-12);
        }
        m
    }

    #[test]
    fn antipodal_groups_separate() {
        let mut rng = RngService::new(1, 0);
        let mut rows = Vec::new();
        for i in 0..10 {
            let e = 0.05 * i as f64;
            rows.push(vec![1.0, e, -e]);
            rows.push(vec![-1.0, -e, e]);
        }
        let pts = unit_rows(&rows);
        let out = seeded_kmeans(&pts, 2, None, None, &mut rng).unwrap();
        for i in (0..20).step_by(2) {
            assert_eq!(out.assignments[i], out.assignments[0]);
            assert_eq!(out.assignments[i + 1], out.assignments[1]);
        }
        assert_ne!(out.assignments[0], out.assignments[1]);
    }

    #[test]
    fn k_equals_n() {
        let mut rng = RngService::new(2, 0);
        let pts = unit_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.6, 0.8], vec![-1.0, 0.2]]);
        let out = seeded_kmeans(&pts, 4, None, None, &mut rng).unwrap();
        let mut seen = out.assignments.clone();
        seen.sort_unstable();
        assert_eq!(seen, vec![0, 1, 2, 3]);
        assert!(out.dissimilarity.abs() < 1e-12);
    }

    #[test]
    fn anchors_are_respected() {
        let mut rng = RngService::new(3, 0);
        let pts = unit_rows(&[vec![1.0, 0.0], vec![0.9, 0.1], vec![0.0, 1.0], vec![0.1, 0.9], vec![0.95, 0.05]]);
        // anchor a point that sits near cluster 0 into cluster 1
        let anchors = [Some(1), None, Some(0), None, None];
        let seeds = unit_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let out = seeded_kmeans(&pts, 2, Some(&seeds), Some(&anchors), &mut rng).unwrap();
        assert_eq!(out.assignments[0], 1);
        assert_eq!(out.assignments[2], 0);
    }

    #[test]
    fn empty_cluster_is_reseeded() {
        let mut rng = RngService::new(4, 0);
        let pts = unit_rows(&[vec![1.0, 0.0], vec![0.99, 0.01], vec![0.0, 1.0], vec![0.01, 0.99]]);
        // both seeds on the same side: one cluster starts empty
        let seeds = unit_rows(&[vec![1.0, 0.0], vec![0.98, 0.02], vec![0.97, 0.03]]);
        let out = seeded_kmeans(&pts, 3, Some(&seeds), None, &mut rng).unwrap();
        let mut counts = [0; 3];
        for &a in &out.assignments {
            counts[a] += 1;
        }
        assert!(counts.iter().all(|&c| c > 0), "{counts:?}");
    }

    #[test]
    fn rejects_k_above_n() {
        let mut rng = RngService::new(5, 0);
        let pts = unit_rows(&[vec![1.0, 0.0]]);
        assert!(seeded_kmeans(&pts, 2, None, None, &mut rng).is_err());
    }
}
