//! k-NN, accuracy and sparsity metrics on hand-worked cases, plus their
//! invariances.

use proptest::prelude::*;

use vbnmf_core::eval::{
    coefficient_sparsity, inter_label_sparsity, knn_classify, label_aggregate, macro_accuracy,
    micro_accuracy,
};
use vbnmf_core::numerics::{hoyer_sparsity, matrix_hoyer_sparsity};
use vbnmf_core::Matrix;

fn columns(cols: &[[f64; 2]]) -> Matrix {
    Matrix::from_fn(2, cols.len(), |r, c| cols[c][r])
}

/// Five training points; cosine similarities to the query (0.8, 0.3) are
/// b 0.970, a 0.936, e 0.911, d 0.453, c 0.351.
#[test]
fn five_point_vote() {
    let train = columns(&[[1.0, 0.0], [0.9, 0.1], [0.0, 1.0], [0.1, 0.9], [1.0, 1.0]]);
    let labels = [0, 0, 1, 1, 1];
    let test = columns(&[[0.8, 0.3]]);
    let predict = |k| knn_classify(&train, &labels, &test, k).unwrap().predictions[0];
    assert_eq!(predict(1), 0);
    assert_eq!(predict(3), 0);
    // Two votes each; label 0 has the larger similarity sum (1.906 vs 1.363).
    assert_eq!(predict(4), 0);
    assert_eq!(predict(5), 1);
    // Capped at the number of training columns.
    assert_eq!(predict(50), 1);
}

#[test]
fn exact_tie_goes_to_smaller_label() {
    let train = columns(&[[1.0, 0.0], [0.0, 1.0]]);
    let test = columns(&[[1.0, 1.0]]);
    assert_eq!(
        knn_classify(&train, &[1, 0], &test, 2).unwrap().predictions,
        vec![0]
    );
}

#[test]
fn zero_columns_are_reported() {
    let train = columns(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
    let test = columns(&[[0.0, 0.0], [0.2, 1.0]]);
    let r = knn_classify(&train, &[0, 1, 0], &test, 1).unwrap();
    assert_eq!(r.warnings.zero_train, vec![0]);
    assert_eq!(r.warnings.zero_test, vec![0]);
    assert_eq!(r.predictions[1], 0);
}

#[test]
fn hand_counted_accuracies() {
    let truth = [0, 0, 0, 1, 1, 2];
    let pred = [0, 0, 1, 1, 0, 2];
    assert!((micro_accuracy(&pred, &truth).unwrap() - 4.0 / 6.0).abs() < 1e-12);
    // (2/3 + 1/2 + 1) / 3
    assert!((macro_accuracy(&pred, &truth, 3).unwrap() - 13.0 / 18.0).abs() < 1e-12);
    assert!(macro_accuracy(&pred, &truth, 4).is_err());
}

#[test]
fn hoyer_endpoints() {
    for n in [2usize, 3, 10, 1000] {
        let mut one_hot = vec![0.0; n];
        one_hot[n / 2] = 3.5;
        assert!((hoyer_sparsity(&one_hot).unwrap() - 1.0).abs() < 1e-12);
        assert!(hoyer_sparsity(&vec![0.7; n]).unwrap().abs() < 1e-12);
    }
    let uniform = Matrix::filled(3, 4, 2.0);
    assert!(coefficient_sparsity(&uniform).unwrap().abs() < 1e-12);
    assert!(coefficient_sparsity(&Matrix::zeros(2, 2)).is_err());
}

#[test]
fn inter_label_sparsity_two_by_two() {
    // Each label uses its own component exclusively: aggregate diag(a, a).
    let v = Matrix::from_vec(2, 4, vec![1.0, 0.0, 2.0, 0.0, 0.0, 1.5, 0.0, 1.5]).unwrap();
    let s = inter_label_sparsity(&v, &[0, 1, 0, 1], 2).unwrap();
    assert!((s - (2.0 - 2f64.sqrt())).abs() < 1e-12);
    // Identical activations for every label.
    let flat = Matrix::filled(3, 6, 0.4);
    assert!(
        inter_label_sparsity(&flat, &[0, 1, 2, 0, 1, 2], 3)
            .unwrap()
            .abs()
            < 1e-12
    );
}

fn loop_aggregate(v: &Matrix, labels: &[usize], n_labels: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; n_labels]; v.rows()];
    for (i, row) in out.iter_mut().enumerate() {
        for (d, &l) in labels.iter().enumerate() {
            row[l] += v[(i, d)];
        }
    }
    out
}

fn min_similarity_gap(train: &Matrix, test: &Matrix) -> f64 {
    let unit = |v: Vec<f64>| {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / n).collect::<Vec<_>>()
    };
    let mut gap = f64::INFINITY;
    for c in 0..test.cols() {
        let q = unit(test.column(c));
        let mut sims: Vec<f64> = (0..train.cols())
            .map(|j| {
                unit(train.column(j))
                    .iter()
                    .zip(&q)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect();
        sims.sort_by(f64::total_cmp);
        for w in sims.windows(2) {
            gap = gap.min(w[1] - w[0]);
        }
    }
    gap
}

fn matrix_strategy() -> impl Strategy<Value = (Matrix, Vec<usize>, usize)> {
    // At least two aggregate entries, where sparsity is defined.
    (1usize..5, 1usize..4, 1usize..12)
        .prop_filter("single entry", |(rows, n_labels, _)| rows * n_labels >= 2)
        .prop_flat_map(|(rows, n_labels, extra)| {
            let cols = n_labels + extra;
            (
                prop::collection::vec(0.0f64..5.0, rows * cols),
                prop::collection::vec(0..n_labels, extra),
            )
                .prop_map(move |(data, tail)| {
                    // The first n_labels documents cover every label.
                    let labels: Vec<usize> = (0..n_labels).chain(tail).collect();
                    (
                        Matrix::from_vec(rows, cols, data).unwrap(),
                        labels,
                        n_labels,
                    )
                })
        })
}

proptest! {
    #[test]
    fn aggregate_matches_loop((v, labels, n_labels) in matrix_strategy()) {
        let got = label_aggregate(&v, &labels, n_labels).unwrap();
        let want = loop_aggregate(&v, &labels, n_labels);
        for i in 0..v.rows() {
            for l in 0..n_labels {
                prop_assert!((got[(i, l)] - want[i][l]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn inter_label_sparsity_invariances((v, labels, n_labels) in matrix_strategy(), c in 0.01f64..100.0, shift in 0usize..50) {
        prop_assume!(v.as_slice().iter().any(|&x| x > 0.0));
        let base = inter_label_sparsity(&v, &labels, n_labels).unwrap();
        let scaled = v.map(|x| c * x);
        prop_assert!((inter_label_sparsity(&scaled, &labels, n_labels).unwrap() - base).abs() < 1e-12);
        // Rotating the document order (labels travel with their columns).
        let n = v.cols();
        let order: Vec<usize> = (0..n).map(|d| (d + shift) % n).collect();
        let permuted = v.select_columns(&order);
        let permuted_labels: Vec<usize> = order.iter().map(|&d| labels[d]).collect();
        prop_assert!((inter_label_sparsity(&permuted, &permuted_labels, n_labels).unwrap() - base).abs() < 1e-12);
    }

    #[test]
    fn single_document_labels_reduce_to_matrix_sparsity(data in prop::collection::vec(0.0f64..5.0, 12)) {
        prop_assume!(data.iter().any(|&x| x > 0.0));
        let v = Matrix::from_vec(3, 4, data).unwrap();
        let s = inter_label_sparsity(&v, &[2, 0, 3, 1], 4).unwrap();
        prop_assert!((s - matrix_hoyer_sparsity(&v).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn knn_ignores_column_scale(
        train in prop::collection::vec(0.01f64..1.0, 3 * 8),
        test in prop::collection::vec(0.01f64..1.0, 3 * 4),
        col in 0usize..8,
        c in 0.01f64..100.0,
        k in 1usize..8,
    ) {
        let train = Matrix::from_vec(3, 8, train).unwrap();
        let test = Matrix::from_vec(3, 4, test).unwrap();
        let labels = [0, 1, 2, 0, 1, 2, 0, 1];
        let base = knn_classify(&train, &labels, &test, k).unwrap().predictions;
        let mut scaled_train = train.clone();
        let column: Vec<f64> = train.column(col).iter().map(|x| x * c).collect();
        scaled_train.set_column(col, &column);
        let mut scaled_test = test.clone();
        let column: Vec<f64> = test.column(col % 4).iter().map(|x| x * c).collect();
        scaled_test.set_column(col % 4, &column);
        // Scaling can perturb cosines in the last bit; skip near-ties.
        prop_assume!(min_similarity_gap(&train, &test) > 1e-9);
        let again = knn_classify(&scaled_train, &labels, &scaled_test, k).unwrap().predictions;
        prop_assert_eq!(base, again);
    }

    #[test]
    fn micro_is_mean_of_correctness(pairs in prop::collection::vec((0usize..4, 0usize..4), 1..60)) {
        let (pred, truth): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let hits: Vec<f64> = pred.iter().zip(&truth).map(|(p, t)| if p == t { 1.0 } else { 0.0 }).collect();
        let mean = hits.iter().sum::<f64>() / hits.len() as f64;
        prop_assert!((micro_accuracy(&pred, &truth).unwrap() - mean).abs() < 1e-12);
    }
}
