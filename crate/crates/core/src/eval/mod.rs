//! Clustering-accuracy evaluation.
//!
//! * **Agnostic pass** clusters every row into `C` clusters. Known clusters
//!   are seeded at the labeled-class means and labeled rows stay anchored to
//!   them, so cluster `k < |known|` *is* known class `k`; the remaining
//!   clusters are Hungarian-matched to the novel classes. This yields the
//!   all, known and unknown-agnostic (Un2) accuracies over unlabeled rows.
//! * **Aware pass** takes only the rows whose true class is novel, clusters
//!   them into `|novel|` clusters from scratch and matches over the full
//!   confusion matrix: the unknown-aware (Un1) accuracy.

pub mod hungarian;
pub mod kmeans;

use std::collections::BTreeMap;

pub use hungarian::{hungarian, Assignment};
pub use kmeans::{kmeans_plus_plus, seeded_kmeans, seeded_kmeans_restarts, KMeansResult};

use crate::datagen::EmbeddingDataset;
use crate::error::{Error, Result};
use crate::linalg::{axpy, normalize_in_place, Matrix};
use crate::model::ModelSnapshot;
use crate::rng::{RngService, STREAM_KMEANS};

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub all_acc: f64,
    pub known_acc: Option<f64>,
    /// Unknown-aware accuracy; absent without novel rows.
    pub un1_acc: Option<f64>,
    /// Unknown-agnostic accuracy; absent without novel rows.
    pub un2_acc: Option<f64>,
    pub n_all: usize,
    pub n_known: usize,
    pub n_novel: usize,
    pub seed: u64,
}

/// Best one-to-one matching of predicted cluster ids to class ids, padded
/// to square with zero counts. Returns `(correct, cluster -> class)`.
fn match_clusters(y_true: &[usize], clusters: &[usize]) -> Result<(usize, BTreeMap<usize, usize>)> {
    let classes: Vec<usize> = y_true.iter().copied().collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    let ids: Vec<usize> = clusters.iter().copied().collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    let size = classes.len().max(ids.len());
    let mut cost = Matrix::zeros(size, size);
    for (&t, &c) in y_true.iter().zip(clusters) {
        let row = ids.binary_search(&c).expect("cluster id present");
        let col = classes.binary_search(&t).expect("class id present");
        cost.set(row, col, cost.get(row, col) - 1.0);
    }
    let a = hungarian(&cost)?;
    let mut mapping = BTreeMap::new();
    for (row, &col) in a.perm.iter().enumerate() {
        if row < ids.len() && col < classes.len() {
            mapping.insert(ids[row], classes[col]);
        }
    }
    Ok(((-a.cost).round() as usize, mapping))
}

/// Accuracy after the optimal cluster-to-class matching.
pub fn clustering_accuracy(y_true: &[usize], clusters: &[usize]) -> Result<f64> {
    if y_true.len() != clusters.len() || y_true.is_empty() {
        return Err(Error::invalid("clustering_accuracy", "need equal, non-empty label and cluster lists"));
    }
    let (correct, _) = match_clusters(y_true, clusters)?;
    Ok(correct as f64 / y_true.len() as f64)
}

/// Accuracies from an agnostic clustering of the unlabeled rows.
///
/// Clusters `0..known_classes.len()` are known class `known_classes[k]`;
/// higher ids are matched to `novel_classes`. Returns
/// `(all, known, un2)`; the latter two are `None` without such rows.
pub fn agnostic_accuracy(
    y_true: &[usize],
    clusters: &[usize],
    known_classes: &[usize],
    novel_classes: &[usize],
) -> Result<(f64, Option<f64>, Option<f64>)> {
    if y_true.len() != clusters.len() || y_true.is_empty() {
        return Err(Error::invalid("agnostic_accuracy", "need equal, non-empty label and cluster lists"));
    }
    let nk = known_classes.len();
    let is_novel = |c: usize| novel_classes.binary_search(&c).is_ok();
    let (novel_true, novel_pred): (Vec<usize>, Vec<usize>) = y_true
        .iter()
        .zip(clusters)
        .filter(|&(&t, &c)| is_novel(t) && c >= nk)
        .map(|(&t, &c)| (t, c))
        .unzip();
    let mapping = if novel_true.is_empty() {
        BTreeMap::new()
    } else {
        match_clusters(&novel_true, &novel_pred)?.1
    };
    let predict = |c: usize| if c < nk { Some(known_classes[c]) } else { mapping.get(&c).copied() };

    let (mut hit_all, mut hit_known, mut n_known, mut hit_novel, mut n_novel) = (0, 0, 0, 0, 0);
    for (&t, &c) in y_true.iter().zip(clusters) {
        let ok = predict(c) == Some(t);
        hit_all += usize::from(ok);
        if is_novel(t) {
            n_novel += 1;
            hit_novel += usize::from(ok);
        } else {
            n_known += 1;
            hit_known += usize::from(ok);
        }
    }
    let frac = |h: usize, n: usize| (n > 0).then(|| h as f64 / n as f64);
    Ok((hit_all as f64 / y_true.len() as f64, frac(hit_known, n_known), frac(hit_novel, n_novel)))
}

/// Normalized mean of the labeled features of each known class, in
/// `known_classes` order.
fn labeled_means(features: &Matrix, data: &EmbeddingDataset) -> Result<Matrix> {
    let slots = data.class_slots();
    let mut sums = Matrix::zeros(data.num_known(), features.cols());
    for i in data.labeled_indices() {
        axpy(1.0, features.row(i), sums.row_mut(slots[data.labels[i]]));
    }
    for k in 0..sums.rows() {
        if normalize_in_place(sums.row_mut(k), 1e-12) < 1e-12 {
            return Err(Error::Numerical(format!("labeled features of known class {} cancel out", data.known_classes[k])));
        }
    }
    Ok(sums)
}

/// Both passes on precomputed unit-norm features, one row per dataset row.
pub fn evaluate_features(features: &Matrix, data: &EmbeddingDataset, seed: u64, restarts: usize) -> Result<MetricsReport> {
    if features.rows() != data.len() {
        return Err(Error::invalid("features", "one feature row per dataset row required"));
    }
    let unlabeled = data.unlabeled_indices();
    if unlabeled.is_empty() {
        return Err(Error::invalid("dataset", "no unlabeled rows to evaluate"));
    }
    let mut rng = RngService::derive_stream(seed, STREAM_KMEANS);
    let slots = data.class_slots();

    let seeds = labeled_means(features, data)?;
    let anchors: Vec<Option<usize>> = (0..data.len())
        .map(|i| data.is_labeled[i].then(|| slots[data.labels[i]]))
        .collect();
    let agnostic = seeded_kmeans_restarts(features, data.num_classes, Some(&seeds), Some(&anchors), restarts, &mut rng)?;
    let y_true: Vec<usize> = unlabeled.iter().map(|&i| data.labels[i]).collect();
    let clusters: Vec<usize> = unlabeled.iter().map(|&i| agnostic.assignments[i]).collect();
    let (all_acc, known_acc, un2_acc) = agnostic_accuracy(&y_true, &clusters, &data.known_classes, &data.unknown_classes)?;

    let novel_rows: Vec<usize> = unlabeled.iter().copied().filter(|&i| !data.is_known_class(data.labels[i])).collect();
    let un1_acc = if novel_rows.is_empty() {
        None
    } else {
        let k = data.unknown_classes.len().min(novel_rows.len());
        let aware = seeded_kmeans_restarts(&features.select_rows(&novel_rows), k, None, None, restarts, &mut rng)?;
        let truth: Vec<usize> = novel_rows.iter().map(|&i| data.labels[i]).collect();
        Some(clustering_accuracy(&truth, &aware.assignments)?)
    };

    Ok(MetricsReport {
        all_acc,
        known_acc,
        un1_acc,
        un2_acc,
        n_all: unlabeled.len(),
        n_known: unlabeled.len() - novel_rows.len(),
        n_novel: novel_rows.len(),
        seed,
    })
}

/// Projects the dataset through the snapshot's head, then evaluates.
pub fn evaluate(snapshot: &ModelSnapshot, data: &EmbeddingDataset, seed: u64, restarts: usize) -> Result<MetricsReport> {
    let features = snapshot.head.forward(&data.points)?;
    evaluate_features(&features, data, seed, restarts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_point_example() {
        let acc = clustering_accuracy(&[0, 0, 1, 1, 2], &[1, 1, 0, 0, 0]).unwrap();
        assert_eq!(acc, 0.8);
    }

    #[test]
    fn matching_absorbs_permutation() {
        let truth = [3, 3, 4, 4, 5, 5];
        assert_eq!(clustering_accuracy(&truth, &[2, 2, 0, 0, 1, 1]).unwrap(), 1.0);
    }

    #[test]
    fn agnostic_known_ids_are_fixed() {
        // known classes {0,1}, novel {2,3}; clusters 0,1 are known, 2,3 novel
        let y = [0, 1, 2, 2, 3];
        let (all, known, un2) = agnostic_accuracy(&y, &[0, 1, 3, 3, 2], &[0, 1], &[2, 3]).unwrap();
        assert_eq!((all, known, un2), (1.0, Some(1.0), Some(1.0)));
        // swapping the known cluster ids is not forgiven
        let (all, known, _) = agnostic_accuracy(&y, &[1, 0, 3, 3, 2], &[0, 1], &[2, 3]).unwrap();
        assert_eq!(known, Some(0.0));
        assert_eq!(all, 0.6);
        // novel row absorbed by a known cluster is wrong
        let (_, _, un2) = agnostic_accuracy(&y, &[0, 1, 0, 3, 2], &[0, 1], &[2, 3]).unwrap();
        assert!((un2.unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn agnostic_without_novel_rows() {
        let (all, known, un2) = agnostic_accuracy(&[0, 1], &[0, 1], &[0, 1], &[2]).unwrap();
        assert_eq!((all, known, un2), (1.0, Some(1.0), None));
    }
}
