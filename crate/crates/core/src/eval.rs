//! Cosine k-NN classification, accuracy metrics and sparsity diagnostics.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::numerics::matrix_hoyer_sparsity;

/// Neighbor count used when none is given: `round(√n)`, at least 1.
pub fn default_k(n_train: usize) -> usize {
    (libm::round(libm::sqrt(n_train as f64)) as usize).max(1)
}

/// Columns with zero norm met during classification.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct KnnWarnings {
    /// Training columns left out of every neighbor set.
    pub zero_train: Vec<usize>,
    /// Test columns whose similarity to everything was taken as −1.
    pub zero_test: Vec<usize>,
}

impl KnnWarnings {
    pub fn is_empty(&self) -> bool {
        self.zero_train.is_empty() && self.zero_test.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KnnResult {
    pub predictions: Vec<usize>,
    pub warnings: KnnWarnings,
}

fn column_norms(m: &Matrix) -> Vec<f64> {
    let mut sq = vec![0.0; m.cols()];
    for r in 0..m.rows() {
        for (s, &v) in sq.iter_mut().zip(m.row(r)) {
            *s += v * v;
        }
    }
    sq.into_iter().map(libm::sqrt).collect()
}

/// Classifies each test column by majority vote over its `k` most
/// cosine-similar training columns.
///
/// Vote ties go to the label with the larger summed similarity, then to the
/// smaller label id. Among equally similar neighbors the lower training
/// index is taken first. `k` larger than the number of usable training
/// columns is capped.
pub fn knn_classify(
    train: &Matrix,
    train_labels: &[usize],
    test: &Matrix,
    k: usize,
) -> Result<KnnResult> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if train_labels.len() != train.cols() {
        return Err(Error::InvalidArgument(alloc::format!(
            "{} training labels for {} training columns",
            train_labels.len(),
            train.cols()
        )));
    }
    if train.rows() != test.rows() {
        return Err(Error::Shape {
            context: "knn_classify",
            expected: (train.rows(), test.cols()),
            found: test.shape(),
        });
    }
    let n_labels = train_labels.iter().max().map_or(0, |&m| m + 1);
    let train_norms = column_norms(train);
    let test_norms = column_norms(test);
    let mut warnings = KnnWarnings::default();
    let usable: Vec<usize> = (0..train.cols())
        .filter(|&j| {
            let ok = train_norms[j] > 0.0;
            if !ok {
                warnings.zero_train.push(j);
            }
            ok
        })
        .collect();
    if usable.is_empty() {
        return Err(Error::Degenerate("no training column has nonzero norm"));
    }
    let k = k.min(usable.len());
    // Unit-normalized training columns, stored column by column.
    let dim = train.rows();
    let mut unit = vec![0.0; usable.len() * dim];
    for (u, &j) in usable.iter().enumerate() {
        for r in 0..dim {
            unit[u * dim + r] = train[(r, j)] / train_norms[j];
        }
    }

    let mut predictions = Vec::with_capacity(test.cols());
    let mut sims: Vec<(f64, usize)> = Vec::with_capacity(usable.len());
    let mut votes = vec![0usize; n_labels];
    let mut mass = vec![0.0f64; n_labels];
    for c in 0..test.cols() {
        sims.clear();
        if test_norms[c] > 0.0 {
            let q: Vec<f64> = (0..dim).map(|r| test[(r, c)] / test_norms[c]).collect();
            for u in 0..usable.len() {
                let col = &unit[u * dim..(u + 1) * dim];
                let s: f64 = col.iter().zip(&q).map(|(a, b)| a * b).sum();
                sims.push((s, u));
            }
        } else {
            warnings.zero_test.push(c);
            sims.extend((0..usable.len()).map(|u| (-1.0, u)));
        }
        sims.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        votes.iter_mut().for_each(|v| *v = 0);
        mass.iter_mut().for_each(|m| *m = 0.0);
        for &(s, u) in &sims[..k] {
            let l = train_labels[usable[u]];
            votes[l] += 1;
            mass[l] += s;
        }
        let mut best = 0;
        for l in 1..n_labels {
            if votes[l] > votes[best] || (votes[l] == votes[best] && mass[l] > mass[best]) {
                best = l;
            }
        }
        predictions.push(best);
    }
    Ok(KnnResult {
        predictions,
        warnings,
    })
}

fn check_pair(pred: &[usize], truth: &[usize]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::InvalidArgument(alloc::format!(
            "{} predictions for {} labels",
            pred.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::InvalidArgument("no labels to score".into()));
    }
    Ok(())
}

/// Correct and total counts per true label.
pub fn per_label_counts(
    pred: &[usize],
    truth: &[usize],
    n_labels: usize,
) -> Result<(Vec<usize>, Vec<usize>)> {
    check_pair(pred, truth)?;
    let mut correct = vec![0; n_labels];
    let mut total = vec![0; n_labels];
    for (&p, &t) in pred.iter().zip(truth) {
        if t >= n_labels {
            return Err(Error::InvalidArgument(alloc::format!(
                "label {t} outside 0..{n_labels}"
            )));
        }
        total[t] += 1;
        if p == t {
            correct[t] += 1;
        }
    }
    Ok((correct, total))
}

/// Fraction of all documents classified correctly.
pub fn micro_accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_pair(pred, truth)?;
    let correct = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(correct as f64 / truth.len() as f64)
}

/// Mean over labels of the per-label recall. Every label must occur in
/// `truth`.
pub fn macro_accuracy(pred: &[usize], truth: &[usize], n_labels: usize) -> Result<f64> {
    let (correct, total) = per_label_counts(pred, truth, n_labels)?;
    if let Some(l) = total.iter().position(|&n| n == 0) {
        return Err(Error::EmptyLabel(l));
    }
    let sum: f64 = correct
        .iter()
        .zip(&total)
        .map(|(&c, &n)| c as f64 / n as f64)
        .sum();
    Ok(sum / n_labels as f64)
}

/// Per-label sums of coefficient columns (rank × labels).
pub fn label_aggregate(v: &Matrix, labels: &[usize], n_labels: usize) -> Result<Matrix> {
    if labels.len() != v.cols() {
        return Err(Error::InvalidArgument(alloc::format!(
            "{} labels for {} columns",
            labels.len(),
            v.cols()
        )));
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= n_labels) {
        return Err(Error::InvalidArgument(alloc::format!(
            "label {l} outside 0..{n_labels}"
        )));
    }
    let mut out = Matrix::zeros(v.rows(), n_labels);
    for r in 0..v.rows() {
        let row = v.row(r);
        for (&x, &l) in row.iter().zip(labels) {
            out[(r, l)] += x;
        }
    }
    Ok(out)
}

/// Hoyer sparsity of the label aggregate.
pub fn inter_label_sparsity(v: &Matrix, labels: &[usize], n_labels: usize) -> Result<f64> {
    matrix_hoyer_sparsity(&label_aggregate(v, labels, n_labels)?)
}

/// Hoyer sparsity of the whole coefficient matrix.
pub fn coefficient_sparsity(v: &Matrix) -> Result<f64> {
    matrix_hoyer_sparsity(v)
}

/// Scores of one fitted and evaluated run.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub method: String,
    pub rank: usize,
    /// Shape of the rate prior; `None` for methods without one.
    pub a_lambda: Option<f64>,
    /// Shape of the coefficient prior; `None` for methods without one.
    pub a_v: Option<f64>,
    pub seed: u64,
    pub micro_accuracy: f64,
    pub macro_accuracy: f64,
    /// `None` when the coefficients can be negative (PCA).
    pub coefficient_sparsity: Option<f64>,
    pub inter_label_sparsity: Option<f64>,
    pub correct: Vec<usize>,
    pub total: Vec<usize>,
    pub iterations: usize,
}

/// Run identity passed to [`evaluate`].
#[derive(Clone, Debug, PartialEq)]
pub struct RunInfo {
    pub method: String,
    pub rank: usize,
    pub a_lambda: Option<f64>,
    pub a_v: Option<f64>,
    pub seed: u64,
    pub iterations: usize,
}

/// Classifies test coordinates against training coordinates with `k`
/// neighbors and collects accuracy and sparsity scores, returning the
/// predictions alongside. Sparsity is measured on the training coefficients
/// and only when they are nonnegative.
pub fn evaluate(
    info: RunInfo,
    train: &Matrix,
    train_labels: &[usize],
    test: &Matrix,
    test_labels: &[usize],
    n_labels: usize,
    k: usize,
) -> Result<(EvalReport, KnnResult)> {
    let knn = knn_classify(train, train_labels, test, k)?;
    let (correct, total) = per_label_counts(&knn.predictions, test_labels, n_labels)?;
    let micro = micro_accuracy(&knn.predictions, test_labels)?;
    let macro_ = macro_accuracy(&knn.predictions, test_labels, n_labels)?;
    let (coef, inter) = if train.is_nonnegative() {
        (
            Some(coefficient_sparsity(train)?),
            Some(inter_label_sparsity(train, train_labels, n_labels)?),
        )
    } else {
        (None, None)
    };
    let report = EvalReport {
        method: info.method,
        rank: info.rank,
        a_lambda: info.a_lambda,
        a_v: info.a_v,
        seed: info.seed,
        micro_accuracy: micro,
        macro_accuracy: macro_,
        coefficient_sparsity: coef,
        inter_label_sparsity: inter,
        correct,
        total,
        iterations: info.iterations,
    };
    Ok((report, knn))
}
