//! Term counts, TF-IDF weighting and vocabulary pruning.
//!
//! Matrices are terms × documents: each column is one document. TF divides
//! a count by the largest count in the same document, IDF is
//! `ln(N / n_τ)` over the documents used to fit the weighting, and the
//! final feature is their product.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::SparseMatrix;

/// One stored `(term, document, count)` triple.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CountEntry {
    pub term: usize,
    pub doc: usize,
    pub count: u64,
}

/// Sparse term × document count matrix with its vocabulary.
///
/// Stored counts are strictly positive, coordinates are unique and every
/// document has at least one nonzero count.
#[derive(Clone, Debug, PartialEq)]
pub struct CountMatrix {
    n_terms: usize,
    n_docs: usize,
    /// Sorted by `(doc, term)`.
    entries: Vec<CountEntry>,
    vocabulary: Vec<String>,
}

impl CountMatrix {
    pub fn new(
        n_terms: usize,
        n_docs: usize,
        mut entries: Vec<CountEntry>,
        vocabulary: Vec<String>,
    ) -> Result<Self> {
        if n_terms == 0 || n_docs == 0 {
            return Err(Error::InvalidDimension(
                "corpus needs at least one term and one document",
            ));
        }
        if vocabulary.len() != n_terms {
            return Err(Error::InvalidCorpus(format!(
                "vocabulary has {} entries but the corpus has {n_terms} terms",
                vocabulary.len()
            )));
        }
        entries.sort_unstable_by_key(|e| (e.doc, e.term));
        let mut seen_doc = vec![false; n_docs];
        for (i, e) in entries.iter().enumerate() {
            if e.term >= n_terms || e.doc >= n_docs {
                return Err(Error::InvalidCorpus(format!(
                    "entry (term {}, doc {}) outside {n_terms} x {n_docs}",
                    e.term, e.doc
                )));
            }
            if e.count == 0 {
                return Err(Error::InvalidCorpus(format!(
                    "zero count stored for term {} in doc {}",
                    e.term, e.doc
                )));
            }
            if i > 0 && entries[i - 1].doc == e.doc && entries[i - 1].term == e.term {
                return Err(Error::InvalidCorpus(format!(
                    "duplicate entry for term {} in doc {}",
                    e.term, e.doc
                )));
            }
            seen_doc[e.doc] = true;
        }
        if let Some(doc) = seen_doc.iter().position(|&s| !s) {
            return Err(Error::EmptyDocument(doc));
        }
        Ok(Self {
            n_terms,
            n_docs,
            entries,
            vocabulary,
        })
    }

    pub fn n_terms(&self) -> usize {
        self.n_terms
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn entries(&self) -> &[CountEntry] {
        &self.entries
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    /// Sub-corpus of the listed documents, renumbered in the order given.
    /// The vocabulary is kept whole.
    pub fn select_docs(&self, docs: &[usize]) -> Result<CountMatrix> {
        if docs.is_empty() {
            return Err(Error::InvalidDimension("no documents selected"));
        }
        let mut starts = vec![0usize; self.n_docs + 1];
        for e in &self.entries {
            starts[e.doc + 1] += 1;
        }
        for d in 0..self.n_docs {
            starts[d + 1] += starts[d];
        }
        let mut out = Vec::new();
        for (new_doc, &doc) in docs.iter().enumerate() {
            if doc >= self.n_docs {
                return Err(Error::InvalidCorpus(format!("document {doc} out of range")));
            }
            out.extend(
                self.entries[starts[doc]..starts[doc + 1]]
                    .iter()
                    .map(|e| CountEntry { doc: new_doc, ..*e }),
            );
        }
        CountMatrix::new(self.n_terms, docs.len(), out, self.vocabulary.clone())
    }

    /// Number of documents containing each term.
    pub fn document_frequency(&self) -> Vec<usize> {
        let mut df = vec![0usize; self.n_terms];
        for e in &self.entries {
            df[e.term] += 1;
        }
        df
    }

    pub fn to_sparse(&self) -> SparseMatrix {
        SparseMatrix::from_triplets(
            self.n_terms,
            self.n_docs,
            self.entries.iter().map(|e| (e.term, e.doc, e.count as f64)),
        )
        .expect("count matrix invariants hold")
    }
}

/// Nonnegative TF-IDF features, terms × documents, with the vocabulary of
/// the kept rows.
///
/// Stored sparse: an entry is zero wherever the count is zero, and at
/// realistic vocabulary sizes the dense form would not fit comfortably.
#[derive(Clone, Debug, PartialEq)]
pub struct TfIdfMatrix {
    pub values: SparseMatrix,
    pub vocabulary: Vec<String>,
}

impl TfIdfMatrix {
    pub fn n_terms(&self) -> usize {
        self.values.rows()
    }

    pub fn n_docs(&self) -> usize {
        self.values.cols()
    }
}

/// Per-document label ids in `0..n_labels`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelVector {
    labels: Vec<usize>,
    n_labels: usize,
}

impl LabelVector {
    pub fn new(labels: Vec<usize>, n_labels: usize) -> Result<Self> {
        if n_labels == 0 {
            return Err(Error::InvalidDimension("at least one label is required"));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_labels) {
            return Err(Error::InvalidCorpus(format!(
                "label {bad} outside 0..{n_labels}"
            )));
        }
        Ok(Self { labels, n_labels })
    }

    /// Labels with `n_labels` inferred as one past the largest id.
    pub fn from_ids(labels: Vec<usize>) -> Result<Self> {
        let n_labels = labels.iter().max().map_or(0, |&m| m + 1);
        Self::new(labels, n_labels)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_labels];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Errors if some label id never occurs (required of training labels).
    pub fn check_all_present(&self) -> Result<()> {
        match self.counts().iter().position(|&c| c == 0) {
            Some(l) => Err(Error::EmptyLabel(l)),
            None => Ok(()),
        }
    }

    pub fn select(&self, docs: &[usize]) -> Result<LabelVector> {
        let mut out = Vec::with_capacity(docs.len());
        for &d in docs {
            let label = *self
                .labels
                .get(d)
                .ok_or_else(|| Error::InvalidCorpus(format!("no label for document {d}")))?;
            out.push(label);
        }
        LabelVector::new(out, self.n_labels)
    }
}

/// Term frequencies: each count divided by the largest count of its document.
pub fn compute_tf(counts: &CountMatrix) -> Result<SparseMatrix> {
    let mut doc_max = vec![0u64; counts.n_docs()];
    for e in counts.entries() {
        doc_max[e.doc] = doc_max[e.doc].max(e.count);
    }
    if let Some(doc) = doc_max.iter().position(|&m| m == 0) {
        return Err(Error::EmptyDocument(doc));
    }
    SparseMatrix::from_triplets(
        counts.n_terms(),
        counts.n_docs(),
        counts
            .entries()
            .iter()
            .map(|e| (e.term, e.doc, e.count as f64 / doc_max[e.doc] as f64)),
    )
}

/// `ln(N / n_τ)` for every term; `None` for terms absent from all documents.
pub fn compute_idf(counts: &CountMatrix) -> Vec<Option<f64>> {
    let n = counts.n_docs() as f64;
    counts
        .document_frequency()
        .into_iter()
        .map(|df| (df > 0).then(|| libm::log(n / df as f64)))
        .collect()
}

/// TF-IDF of a corpus using its own document frequencies. Terms that occur
/// in no document are dropped from the result.
pub fn compute_tfidf(counts: &CountMatrix) -> Result<TfIdfMatrix> {
    let idf = compute_idf(counts);
    apply_tfidf(counts, &idf)
}

/// TF-IDF of `counts` with an IDF table fitted elsewhere (typically on the
/// training split). Rows whose IDF is `None` are dropped.
pub fn apply_tfidf(counts: &CountMatrix, idf: &[Option<f64>]) -> Result<TfIdfMatrix> {
    if idf.len() != counts.n_terms() {
        return Err(Error::InvalidCorpus(format!(
            "IDF table has {} terms, corpus has {}",
            idf.len(),
            counts.n_terms()
        )));
    }
    let kept: Vec<usize> = (0..idf.len()).filter(|&t| idf[t].is_some()).collect();
    if kept.is_empty() {
        return Err(Error::InvalidCorpus("no term has a defined IDF".into()));
    }
    let tf = compute_tf(counts)?;
    let weighted = tf.map_values(|term, _, v| v * idf[term].unwrap_or(0.0));
    Ok(TfIdfMatrix {
        values: weighted.select_rows(&kept)?,
        vocabulary: kept
            .iter()
            .map(|&t| counts.vocabulary()[t].clone())
            .collect(),
    })
}

/// Keeps the `k` terms with the largest maximum TF-IDF across documents.
///
/// Ties at the cutoff go to the lower term index. Kept terms stay in their
/// original relative order; the second return value lists, for each kept
/// row, its index in the input.
pub fn select_top_terms(x: &TfIdfMatrix, k: usize) -> Result<(TfIdfMatrix, Vec<usize>)> {
    if k == 0 || k > x.n_terms() {
        return Err(Error::InvalidArgument(format!(
            "cannot keep {k} of {} terms",
            x.n_terms()
        )));
    }
    let row_max = x.values.row_max();
    let mut order: Vec<usize> = (0..x.n_terms()).collect();
    order.sort_by(|&a, &b| row_max[b].total_cmp(&row_max[a]).then(a.cmp(&b)));
    let mut kept = order[..k].to_vec();
    kept.sort_unstable();
    let selected = TfIdfMatrix {
        values: x.values.select_rows(&kept)?,
        vocabulary: kept.iter().map(|&t| x.vocabulary[t].clone()).collect(),
    };
    Ok((selected, kept))
}

/// TF-IDF weighting fitted on a training corpus: its IDF table plus the
/// terms retained after pruning, so that held-out documents land in the
/// same feature space.
#[derive(Clone, Debug, PartialEq)]
pub struct TfIdfTransform {
    idf: Vec<Option<f64>>,
    /// Original term ids of the output rows, ascending.
    selected_terms: Vec<usize>,
}

impl TfIdfTransform {
    /// Fits on `train`, keeping at most `vocab_cap` terms by maximum score.
    pub fn fit(train: &CountMatrix, vocab_cap: usize) -> Result<(Self, TfIdfMatrix)> {
        let idf = compute_idf(train);
        let full = apply_tfidf(train, &idf)?;
        let defined: Vec<usize> = (0..idf.len()).filter(|&t| idf[t].is_some()).collect();
        let cap = vocab_cap.min(full.n_terms());
        let (pruned, kept_rows) = select_top_terms(&full, cap)?;
        let selected_terms = kept_rows.iter().map(|&r| defined[r]).collect();
        Ok((
            Self {
                idf,
                selected_terms,
            },
            pruned,
        ))
    }

    pub fn selected_terms(&self) -> &[usize] {
        &self.selected_terms
    }

    pub fn idf(&self) -> &[Option<f64>] {
        &self.idf
    }

    /// Applies the fitted weighting. Term frequencies use each document's
    /// maximum over the full vocabulary, before pruning.
    pub fn transform(&self, counts: &CountMatrix) -> Result<TfIdfMatrix> {
        if counts.n_terms() != self.idf.len() {
            return Err(Error::InvalidCorpus(format!(
                "corpus has {} terms, transform was fitted on {}",
                counts.n_terms(),
                self.idf.len()
            )));
        }
        let tf = compute_tf(counts)?;
        let weighted = tf.map_values(|term, _, v| v * self.idf[term].unwrap_or(0.0));
        Ok(TfIdfMatrix {
            values: weighted.select_rows(&self.selected_terms)?,
            vocabulary: self
                .selected_terms
                .iter()
                .map(|&t| counts.vocabulary()[t].clone())
                .collect(),
        })
    }
}
