//! Plain-text corpus files.
//!
//! * counts: `doc_id<TAB>term_id<TAB>count` per line, 0-based ids
//! * vocabulary: one term per line, line number = term id
//! * labels: `doc_id<TAB>label_id` per line, one line per document
//! * split lists: one doc id per line
//!
//! Blank lines and lines starting with `#` are ignored everywhere except in
//! the vocabulary, where every line is a term.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use vbnmf_core::corpus::{CountEntry, CountMatrix, LabelVector};
use vbnmf_core::matrix::SparseMatrix;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
    #[error(transparent)]
    Core(#[from] vbnmf_core::Error),
}

pub type Result<T> = std::result::Result<T, IoError>;

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| IoError::Read {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `contents`, creating missing parent directories.
pub fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|source| IoError::Write {
                path: dir.to_path_buf(),
                source,
            })?;
        }
    }
    fs::write(path, contents).map_err(|source| IoError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_fields<const N: usize>(path: &Path, line: usize, text: &str) -> Result<[u64; N]> {
    let parts: Vec<&str> = text.split('\t').collect();
    if parts.len() != N {
        return Err(IoError::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("expected {N} tab-separated fields, found {}", parts.len()),
        });
    }
    let mut out = [0u64; N];
    for (o, p) in out.iter_mut().zip(&parts) {
        *o = p.trim().parse().map_err(|_| IoError::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("not a nonnegative integer: {p:?}"),
        })?;
    }
    Ok(out)
}

pub fn read_counts(path: &Path) -> Result<Vec<CountEntry>> {
    let text = read_text(path)?;
    let mut entries = Vec::new();
    for (line, l) in data_lines(&text) {
        let [doc, term, count] = parse_fields::<3>(path, line, l)?;
        if count == 0 {
            continue;
        }
        entries.push(CountEntry {
            term: term as usize,
            doc: doc as usize,
            count,
        });
    }
    Ok(entries)
}

pub fn write_counts(path: &Path, counts: &CountMatrix) -> Result<()> {
    let mut out = Vec::new();
    for e in counts.entries() {
        writeln!(out, "{}\t{}\t{}", e.doc, e.term, e.count).expect("write to Vec");
    }
    write_file(path, &out)
}

pub fn read_vocabulary(path: &Path) -> Result<Vec<String>> {
    let text = read_text(path)?;
    Ok(text
        .lines()
        .map(|l| l.trim_end_matches('\r').to_string())
        .collect())
}

pub fn write_vocabulary(path: &Path, vocabulary: &[String]) -> Result<()> {
    let mut out = Vec::new();
    for term in vocabulary {
        writeln!(out, "{term}").expect("write to Vec");
    }
    write_file(path, &out)
}

/// Labels indexed by document id; every document id below the largest one
/// must appear exactly once.
pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = read_text(path)?;
    let mut pairs = Vec::new();
    for (line, l) in data_lines(&text) {
        let [doc, label] = parse_fields::<2>(path, line, l)?;
        pairs.push((doc as usize, label as usize, line));
    }
    let n = pairs.iter().map(|p| p.0 + 1).max().unwrap_or(0);
    let mut labels = vec![None; n];
    for (doc, label, line) in pairs {
        if labels[doc].replace(label).is_some() {
            return Err(IoError::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("document {doc} labelled twice"),
            });
        }
    }
    labels
        .into_iter()
        .enumerate()
        .map(|(doc, l)| {
            l.ok_or_else(|| IoError::Invalid {
                path: path.to_path_buf(),
                message: format!("document {doc} has no label"),
            })
        })
        .collect()
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut out = Vec::new();
    for (doc, label) in labels.iter().enumerate() {
        writeln!(out, "{doc}\t{label}").expect("write to Vec");
    }
    write_file(path, &out)
}

pub fn read_doc_list(path: &Path) -> Result<Vec<usize>> {
    let text = read_text(path)?;
    data_lines(&text)
        .map(|(line, l)| parse_fields::<1>(path, line, l).map(|[d]| d as usize))
        .collect()
}

pub fn write_doc_list(path: &Path, docs: &[usize]) -> Result<()> {
    let mut out = Vec::new();
    for d in docs {
        writeln!(out, "{d}").expect("write to Vec");
    }
    write_file(path, &out)
}

/// Locations of the four corpus files plus the two split lists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorpusPaths {
    pub counts: PathBuf,
    pub vocabulary: PathBuf,
    pub labels: PathBuf,
    pub train: PathBuf,
    pub test: PathBuf,
}

impl CorpusPaths {
    /// Conventional file names inside one directory.
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            counts: dir.join("counts.tsv"),
            vocabulary: dir.join("vocab.txt"),
            labels: dir.join("labels.tsv"),
            train: dir.join("train.txt"),
            test: dir.join("test.txt"),
        }
    }
}

/// A labelled corpus split into training and test documents.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitCorpus {
    pub train: CountMatrix,
    pub train_labels: LabelVector,
    pub test: CountMatrix,
    pub test_labels: LabelVector,
    /// Original document ids of the training and test columns.
    pub train_ids: Vec<usize>,
    pub test_ids: Vec<usize>,
}

impl SplitCorpus {
    pub fn n_labels(&self) -> usize {
        self.train_labels.n_labels()
    }
}

pub fn load_corpus(paths: &CorpusPaths) -> Result<SplitCorpus> {
    let vocabulary = read_vocabulary(&paths.vocabulary)?;
    let entries = read_counts(&paths.counts)?;
    let labels = read_labels(&paths.labels)?;
    let train_ids = read_doc_list(&paths.train)?;
    let test_ids = read_doc_list(&paths.test)?;
    let n_docs = labels.len();
    let mut in_split = vec![0u8; n_docs];
    for (ids, path) in [(&train_ids, &paths.train), (&test_ids, &paths.test)] {
        if ids.is_empty() {
            return Err(IoError::Invalid {
                path: path.clone(),
                message: "split lists no documents".into(),
            });
        }
        for &d in ids {
            if d >= n_docs {
                return Err(IoError::Invalid {
                    path: path.clone(),
                    message: format!("document {d} has no label"),
                });
            }
            in_split[d] += 1;
            if in_split[d] > 1 {
                return Err(IoError::Invalid {
                    path: path.clone(),
                    message: format!("document {d} listed more than once across the splits"),
                });
            }
        }
    }
    if let Some(e) = entries.iter().find(|e| e.doc >= n_docs) {
        return Err(IoError::Invalid {
            path: paths.counts.clone(),
            message: format!("document {} has counts but no label", e.doc),
        });
    }
    let n_labels = labels.iter().max().map_or(0, |&m| m + 1);
    let all_labels = LabelVector::new(labels, n_labels)?;
    let train_labels = all_labels.select(&train_ids)?;
    train_labels.check_all_present()?;
    let n_terms = vocabulary.len();
    let split = |ids: &[usize]| -> Result<CountMatrix> {
        let mut column = vec![usize::MAX; n_docs];
        for (new, &d) in ids.iter().enumerate() {
            column[d] = new;
        }
        let picked = entries
            .iter()
            .filter(|e| column[e.doc] != usize::MAX)
            .map(|e| CountEntry {
                doc: column[e.doc],
                ..*e
            })
            .collect();
        CountMatrix::new(n_terms, ids.len(), picked, vocabulary.clone()).map_err(|e| match e {
            vbnmf_core::Error::EmptyDocument(d) => IoError::Invalid {
                path: paths.counts.clone(),
                message: format!("document {} has no counts", ids[d]),
            },
            other => other.into(),
        })
    };
    Ok(SplitCorpus {
        train: split(&train_ids)?,
        test: split(&test_ids)?,
        test_labels: all_labels.select(&test_ids)?,
        train_labels,
        train_ids,
        test_ids,
    })
}

/// Writes a corpus in the conventional layout of [`CorpusPaths::in_dir`].
/// Training documents get ids `0..n_train`, test documents follow.
pub fn write_corpus(
    dir: &Path,
    train: &CountMatrix,
    train_labels: &LabelVector,
    test: &CountMatrix,
    test_labels: &LabelVector,
) -> Result<CorpusPaths> {
    let paths = CorpusPaths::in_dir(dir);
    let n_train = train.n_docs();
    let mut out = Vec::new();
    for e in train.entries() {
        writeln!(out, "{}\t{}\t{}", e.doc, e.term, e.count).expect("write to Vec");
    }
    for e in test.entries() {
        writeln!(out, "{}\t{}\t{}", e.doc + n_train, e.term, e.count).expect("write to Vec");
    }
    write_file(&paths.counts, &out)?;
    write_vocabulary(&paths.vocabulary, train.vocabulary())?;
    let labels: Vec<usize> = train_labels
        .labels()
        .iter()
        .chain(test_labels.labels())
        .copied()
        .collect();
    write_labels(&paths.labels, &labels)?;
    write_doc_list(&paths.train, &(0..n_train).collect::<Vec<_>>())?;
    write_doc_list(
        &paths.test,
        &(n_train..n_train + test.n_docs()).collect::<Vec<_>>(),
    )?;
    Ok(paths)
}

/// Sparse weighted matrix as `doc<TAB>term<TAB>value` lines (values in
/// shortest round-trip form).
pub fn write_sparse(path: &Path, m: &SparseMatrix) -> Result<()> {
    let mut out = Vec::new();
    for (r, c, v) in m.iter() {
        writeln!(out, "{c}\t{r}\t{v}").expect("write to Vec");
    }
    write_file(path, &out)
}

/// Dense matrix with one row per document (matrix column):
/// `doc_id,c0,c1,...`.
pub fn write_coordinates(
    path: &Path,
    coords: &vbnmf_core::Matrix,
    doc_ids: &[usize],
) -> Result<()> {
    let file = fs::File::create(path).map_err(|source| IoError::Write {
        path: path.to_path_buf(),
        source,
    })?;
    let mut w = BufWriter::new(file);
    let werr = |source| IoError::Write {
        path: path.to_path_buf(),
        source,
    };
    let header: Vec<String> = (0..coords.rows()).map(|i| format!("c{i}")).collect();
    writeln!(w, "doc_id,{}", header.join(",")).map_err(werr)?;
    for (c, id) in doc_ids.iter().enumerate().take(coords.cols()) {
        let row: Vec<String> = (0..coords.rows())
            .map(|r| coords[(r, c)].to_string())
            .collect();
        writeln!(w, "{id},{}", row.join(",")).map_err(werr)?;
    }
    w.flush().map_err(werr)
}
