use ltgcd::eval::{agnostic_accuracy, clustering_accuracy, evaluate_features};
use ltgcd::{EmbeddingDataset, Matrix};
use proptest::prelude::*;

/// Classes 0,1 known, 2,3 novel; rows are one-hot class indicators so any
/// sensible clustering is perfect.
fn one_hot_dataset() -> (EmbeddingDataset, Matrix) {
    let mut labels = Vec::new();
    let mut flags = Vec::new();
    for c in 0..4usize {
        let n = if c < 2 { 20 } else { 6 };
        for i in 0..n {
            labels.push(c);
            flags.push(c < 2 && i < 10);
        }
    }
    let rows: Vec<Vec<f64>> = labels
        .iter()
        .map(|&c| (0..4).map(|j| if j == c { 1.0 } else { 0.0 }).collect())
        .collect();
    let points = Matrix::from_rows(&rows).unwrap();
    let data = EmbeddingDataset::new(
        (0..labels.len() as u64).collect(),
        points.clone(),
        labels,
        flags,
        vec![0, 1],
        4,
    )
    .unwrap();
    (data, points)
}

#[test]
fn perfect_clustering_scores_one_everywhere() {
    let (data, features) = one_hot_dataset();
    let m = evaluate_features(&features, &data, 0, 3).unwrap();
    assert_eq!(m.all_acc, 1.0);
    assert_eq!(m.known_acc, Some(1.0));
    assert_eq!(m.un1_acc, Some(1.0));
    assert_eq!(m.un2_acc, Some(1.0));
    assert_eq!((m.n_all, m.n_known, m.n_novel), (32, 20, 12));
}

#[test]
fn worked_example() {
    assert_eq!(clustering_accuracy(&[0, 0, 1, 1, 2], &[1, 1, 0, 0, 0]).unwrap(), 0.8);
}

proptest! {
    #[test]
    fn novel_cluster_ids_are_interchangeable(
        data in prop::collection::vec((0usize..5, 0usize..5), 1..60),
        perm in Just(vec![2usize, 3, 4]).prop_shuffle(),
    ) {
        let known = [0, 1];
        let novel = [2, 3, 4];
        let (y, c): (Vec<usize>, Vec<usize>) = data.into_iter().unzip();
        let relabeled: Vec<usize> = c.iter().map(|&k| if k < 2 { k } else { perm[k - 2] }).collect();
        prop_assert_eq!(
            agnostic_accuracy(&y, &c, &known, &novel).unwrap(),
            agnostic_accuracy(&y, &relabeled, &known, &novel).unwrap()
        );
        prop_assert_eq!(clustering_accuracy(&y, &c).unwrap(), clustering_accuracy(&y, &relabeled).unwrap());
    }

    #[test]
    fn accuracy_lies_in_unit_interval(data in prop::collection::vec((0usize..6, 0usize..9), 1..80)) {
        let (y, c): (Vec<usize>, Vec<usize>) = data.into_iter().unzip();
        let a = clustering_accuracy(&y, &c).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        // matching only the largest cluster/class overlap is feasible
        let mut pairs = [[0usize; 9]; 6];
        y.iter().zip(&c).for_each(|(&t, &k)| pairs[t][k] += 1);
        let best = pairs.iter().flatten().max().copied().unwrap();
        prop_assert!(a * y.len() as f64 + 1e-9 >= best as f64);
    }
}
