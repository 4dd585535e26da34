//! Oracles shared by the integration tests.

#![allow(dead_code)]

pub mod gradcheck;

use ltgcd::linalg::normalize_in_place;
use ltgcd::{Matrix, RngService};

/// Central finite differences of `f` at `x`.
pub fn central_diff(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `|a - b| / max(|a|, |b|)`, 0 when both vanish.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let n = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = n(a).max(n(b));
    if scale == 0.0 {
        0.0
    } else {
        n(&diff) / scale
    }
}

pub fn gaussian(rng: &mut RngService, rows: usize, cols: usize) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.normal()).collect()).unwrap()
}

pub fn unit_rows(rng: &mut RngService, rows: usize, cols: usize) -> Matrix {
    let mut m = gaussian(rng, rows, cols);
    for r in 0..rows {
        normalize_in_place(m.row_mut(r), 1e-12);
    }
    m
}

/// A random point in the interior of the simplex.
pub fn simplex(rng: &mut RngService, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.uniform_range(0.05, 1.0)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Minimum total cost over all `n!` assignments.
pub fn brute_force_assignment(cost: &Matrix) -> f64 {
    fn go(cost: &Matrix, row: usize, used: &mut [bool], acc: f64, best: &mut f64) {
        let n = cost.rows();
        if row == n {
            *best = best.min(acc);
            return;
        }
        for c in 0..n {
            if !used[c] {
                used[c] = true;
                go(cost, row + 1, used, acc + cost.get(row, c), best);
                used[c] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(cost, 0, &mut vec![false; cost.rows()], 0.0, &mut best);
    best
}

/// Freezes a perfect classifier on well-separated data, applies `updates`
/// prior updates at momentum `mu` and returns the sup-norm distance to the
/// true unlabeled class frequencies.
pub fn frozen_prior_error(updates: usize, mu: f64) -> f64 {
    use ltgcd::datagen::generate_mixture;
    use ltgcd::linalg::{argmax, axpy};
    use ltgcd::model::predict_probs;
    use ltgcd::prior::hard_histogram;
    use ltgcd::{ClassPrior, Prototypes, SplitSpec};

    let spec = SplitSpec {
        num_classes: 6,
        num_known: 3,
        samples_per_known: 60,
        rho: 4.0,
        labeled_fraction: 0.5,
        dim: 32,
    };
    let data = generate_mixture(&spec, 40.0, &mut RngService::derive_stream(3, "split")).unwrap();
    let mut feats = data.points.clone();
    for r in 0..feats.rows() {
        normalize_in_place(feats.row_mut(r), 1e-12);
    }
    let slots = data.class_slots();
    let mut means = Matrix::zeros(data.num_classes, data.dim());
    for i in 0..data.len() {
        axpy(1.0, feats.row(i), means.row_mut(slots[data.labels[i]]));
    }
    let protos = Prototypes::new(means).unwrap();

    let unlabeled = data.unlabeled_indices();
    let probs = predict_probs(&feats.select_rows(&unlabeled), &protos, 0.1);
    for (r, &i) in unlabeled.iter().enumerate() {
        assert_eq!(argmax(probs.row(r)), slots[data.labels[i]], "classifier is not perfect");
    }
    let z = hard_histogram(&probs).unwrap();
    let mut truth = vec![0.0; data.num_classes];
    for &i in &unlabeled {
        truth[slots[data.labels[i]]] += 1.0 / unlabeled.len() as f64;
    }
    let mut prior = ClassPrior::uniform(data.num_classes, mu).unwrap();
    for _ in 0..updates {
        prior.ema_update(&z).unwrap();
    }
    prior.r().iter().zip(&truth).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}
