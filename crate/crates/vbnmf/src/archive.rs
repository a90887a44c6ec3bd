//! Model archives.
//!
//! An archive is a UTF-8 header of `key=value` lines, opened by the magic
//! line `vbnmf-archive 1` and closed by `end`, followed by the matrix blocks
//! it declares (`block=NAME ROWS COLS`, in order) as row-major
//! little-endian `f64`. Real numbers in the header use the shortest form
//! that reads back to the same bits, so saving is byte-for-byte
//! reproducible.
//!
//! Factor matrices are stored as their means and log-means; shapes and
//! scales are recovered on load.

use std::fmt::Write as _;
use std::path::Path;

use vbnmf_core::corpus::LabelVector;
use vbnmf_core::pca::PcaModel;
use vbnmf_core::supervised::{LabelIndicator, SupervisedHyper, SupervisedModel};
use vbnmf_core::vbnmf::{FitWarning, GammaStats, VbnmfHyper, VbnmfModel};
use vbnmf_core::Matrix;

use crate::io::{read_bytes, write_file, IoError};

pub const MAGIC: &str = "vbnmf-archive 1";

#[derive(Debug, thiserror::Error)]
pub enum ArchiveError {
    #[error("not a model archive (missing `{MAGIC}` line)")]
    BadMagic,
    #[error("archive header: {0}")]
    Header(String),
    #[error("archive holds {found} bytes of matrix data, header declares {declared}")]
    Truncated { declared: usize, found: usize },
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Core(#[from] vbnmf_core::Error),
}

pub type Result<T> = std::result::Result<T, ArchiveError>;

/// Any fitted model the CLI can persist.
#[derive(Clone, Debug, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum ArchivedModel {
    Vbnmf(VbnmfModel),
    Supervised(SupervisedModel),
    Pca(PcaModel),
}

impl ArchivedModel {
    pub fn method(&self) -> &'static str {
        match self {
            ArchivedModel::Vbnmf(_) => "vbnmf",
            ArchivedModel::Supervised(_) => "supervised",
            ArchivedModel::Pca(_) => "pca",
        }
    }

    pub fn n_terms(&self) -> usize {
        match self {
            ArchivedModel::Vbnmf(m) => m.n_terms(),
            ArchivedModel::Supervised(m) => m.n_terms(),
            ArchivedModel::Pca(m) => m.n_terms(),
        }
    }

    pub fn rank(&self) -> usize {
        match self {
            ArchivedModel::Vbnmf(m) => m.rank(),
            ArchivedModel::Supervised(m) => m.rank(),
            ArchivedModel::Pca(m) => m.rank(),
        }
    }
}

struct Writer {
    header: String,
    blocks: Vec<u8>,
}

impl Writer {
    fn new(kind: &str) -> Self {
        let mut header = String::new();
        header.push_str(MAGIC);
        header.push('\n');
        let mut w = Self {
            header,
            blocks: Vec::new(),
        };
        w.field("kind", kind);
        w
    }

    fn field(&mut self, key: &str, value: impl std::fmt::Display) {
        writeln!(self.header, "{key}={value}").expect("write to String");
    }

    fn block(&mut self, name: &str, rows: usize, cols: usize, data: &[f64]) {
        debug_assert_eq!(data.len(), rows * cols);
        writeln!(self.header, "block={name} {rows} {cols}").expect("write to String");
        for v in data {
            self.blocks.extend_from_slice(&v.to_le_bytes());
        }
    }

    fn matrix(&mut self, name: &str, m: &Matrix) {
        self.block(name, m.rows(), m.cols(), m.as_slice());
    }

    fn finish(mut self) -> Vec<u8> {
        self.header.push_str("end\n");
        let mut out = self.header.into_bytes();
        out.extend_from_slice(&self.blocks);
        out
    }
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn warnings_field(warnings: &[FitWarning]) -> String {
    let items: Vec<String> = warnings
        .iter()
        .map(|w| match w {
            FitWarning::CollapsedComponent(i) => format!("collapsed:{i}"),
            FitWarning::RateClamped { component, label } => format!("clamped:{component}/{label}"),
        })
        .collect();
    items.join(",")
}

pub fn to_bytes(model: &ArchivedModel) -> Vec<u8> {
    let mut w = Writer::new(model.method());
    match model {
        ArchivedModel::Vbnmf(m) => {
            w.field("n_terms", m.n_terms());
            w.field("n_docs", m.n_docs());
            w.field("rank", m.rank());
            let h = &m.hyper;
            w.field("a_t", h.a_t);
            w.field("b_t", h.b_t);
            w.field("a_v", h.a_v);
            w.field("b_v", h.b_v);
            w.field("optimize_b_t", h.optimize_b_t);
            w.field("optimize_b_v", h.optimize_b_v);
            w.field("seed", m.seed);
            w.field("iterations", m.iterations);
            w.field("warnings", warnings_field(&m.warnings));
            w.matrix("E_t", &m.t.mean);
            w.matrix("L_t", &m.t.log_mean);
            w.matrix("E_v", &m.v.mean);
            w.matrix("L_v", &m.v.log_mean);
            w.block("bound_trace", 1, m.bound_trace.len(), &m.bound_trace);
        }
        ArchivedModel::Supervised(m) => {
            w.field("n_terms", m.n_terms());
            w.field("n_docs", m.n_docs());
            w.field("rank", m.rank());
            w.field("n_labels", m.n_labels());
            let h = &m.hyper;
            w.field("a_t", h.a_t);
            w.field("b_t", h.b_t);
            w.field("a_lambda", h.a_lambda);
            w.field("b_lambda", h.b_lambda);
            w.field("burn_in", h.burn_in);
            w.field("optimize_b_t", h.optimize_b_t);
            w.field("optimize_b_lambda", h.optimize_b_lambda);
            w.field("lambda_fixed", m.lambda_fixed);
            w.field("seed", m.seed);
            w.field("iterations", m.iterations);
            w.field("warnings", warnings_field(&m.warnings));
            w.field("labels", join(m.labels.labels()));
            w.matrix("E_t", &m.t.mean);
            w.matrix("L_t", &m.t.log_mean);
            w.matrix("E_v", &m.v.mean);
            w.matrix("L_v", &m.v.log_mean);
            w.matrix("E_lambda", &m.lambda.mean);
            w.matrix("L_lambda", &m.lambda.log_mean);
            w.block("bound_trace", 1, m.bound_trace.len(), &m.bound_trace);
        }
        ArchivedModel::Pca(m) => {
            w.field("n_terms", m.n_terms());
            w.field("rank", m.rank());
            w.block("mean", 1, m.mean.len(), &m.mean);
            w.matrix("basis", &m.basis);
            w.block(
                "explained_variance",
                1,
                m.explained_variance.len(),
                &m.explained_variance,
            );
        }
    }
    w.finish()
}

pub fn save(path: &Path, model: &ArchivedModel) -> Result<()> {
    write_file(path, &to_bytes(model))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<ArchivedModel> {
    from_bytes(&read_bytes(path)?)
}

struct Block {
    name: String,
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

struct Parsed {
    fields: Vec<(String, String)>,
    blocks: Vec<Block>,
}

impl Parsed {
    fn get(&self, key: &str) -> Result<&str> {
        self.fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| ArchiveError::Header(format!("missing `{key}`")))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.get(key)?;
        raw.parse()
            .map_err(|_| ArchiveError::Header(format!("bad value for `{key}`: {raw:?}")))
    }

    fn take_block(&mut self, name: &str) -> Result<Block> {
        let pos = self
            .blocks
            .iter()
            .position(|b| b.name == name)
            .ok_or_else(|| ArchiveError::Header(format!("missing block `{name}`")))?;
        Ok(self.blocks.remove(pos))
    }

    fn take(&mut self, name: &str) -> Result<Matrix> {
        let b = self.take_block(name)?;
        if b.rows == 0 || b.cols == 0 {
            return Err(ArchiveError::Header(format!("block `{name}` is empty")));
        }
        Ok(Matrix::from_vec(b.rows, b.cols, b.values)?)
    }

    fn take_vec(&mut self, name: &str) -> Result<Vec<f64>> {
        Ok(self.take_block(name)?.values)
    }

    fn expect_dims(&self, m: &Matrix, name: &str, dims: (usize, usize)) -> Result<()> {
        if m.shape() != dims {
            return Err(ArchiveError::Header(format!(
                "block `{name}` is {:?}, expected {:?}",
                m.shape(),
                dims
            )));
        }
        Ok(())
    }

    fn stats(&mut self, e: &str, l: &str, dims: (usize, usize)) -> Result<GammaStats> {
        let mean = self.take(e)?;
        let log_mean = self.take(l)?;
        self.expect_dims(&mean, e, dims)?;
        self.expect_dims(&log_mean, l, dims)?;
        Ok(GammaStats::from_moments(mean, log_mean)?)
    }

    fn warnings(&self) -> Result<Vec<FitWarning>> {
        let raw = self.get("warnings")?;
        let bad = || ArchiveError::Header(format!("bad warnings field {raw:?}"));
        raw.split(',')
            .filter(|s| !s.is_empty())
            .map(|item| {
                if let Some(i) = item.strip_prefix("collapsed:") {
                    Ok(FitWarning::CollapsedComponent(
                        i.parse().map_err(|_| bad())?,
                    ))
                } else if let Some(rest) = item.strip_prefix("clamped:") {
                    let (c, l) = rest.split_once('/').ok_or_else(bad)?;
                    Ok(FitWarning::RateClamped {
                        component: c.parse().map_err(|_| bad())?,
                        label: l.parse().map_err(|_| bad())?,
                    })
                } else {
                    Err(bad())
                }
            })
            .collect()
    }
}

fn parse(bytes: &[u8]) -> Result<(String, Parsed)> {
    if !bytes.starts_with(MAGIC.as_bytes()) || bytes.get(MAGIC.len()) != Some(&b'\n') {
        return Err(ArchiveError::BadMagic);
    }
    let mut pos = 0;
    let mut lines = Vec::new();
    loop {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| ArchiveError::Header("header is not terminated by `end`".into()))?;
        let line = std::str::from_utf8(&bytes[pos..pos + end])
            .map_err(|_| ArchiveError::Header("header is not UTF-8".into()))?;
        pos += end + 1;
        if line == "end" {
            break;
        }
        lines.push(line.to_string());
    }
    let mut fields = Vec::new();
    let mut declared = Vec::new();
    for line in &lines[1..] {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ArchiveError::Header(format!("malformed line {line:?}")))?;
        if k == "block" {
            let parts: Vec<&str> = v.split(' ').collect();
            let dims = match parts.as_slice() {
                [name, r, c] => r
                    .parse::<usize>()
                    .ok()
                    .zip(c.parse::<usize>().ok())
                    .map(|d| (name.to_string(), d)),
                _ => None,
            };
            declared.push(
                dims.ok_or_else(|| ArchiveError::Header(format!("malformed block line {line:?}")))?,
            );
        } else {
            fields.push((k.to_string(), v.to_string()));
        }
    }
    let data = &bytes[pos..];
    let total: usize = declared.iter().map(|(_, (r, c))| r * c * 8).sum();
    if data.len() != total {
        return Err(ArchiveError::Truncated {
            declared: total,
            found: data.len(),
        });
    }
    let mut blocks = Vec::new();
    let mut offset = 0;
    for (name, (rows, cols)) in declared {
        let n = rows * cols;
        let values: Vec<f64> = data[offset..offset + n * 8]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        offset += n * 8;
        blocks.push(Block {
            name,
            rows,
            cols,
            values,
        });
    }
    let parsed = Parsed { fields, blocks };
    let kind = parsed.get("kind")?.to_string();
    Ok((kind, parsed))
}

pub fn from_bytes(bytes: &[u8]) -> Result<ArchivedModel> {
    let (kind, mut p) = parse(bytes)?;
    match kind.as_str() {
        "vbnmf" => {
            let (n_terms, n_docs, rank) =
                (p.parse("n_terms")?, p.parse("n_docs")?, p.parse("rank")?);
            let hyper = VbnmfHyper {
                a_t: p.parse("a_t")?,
                b_t: p.parse("b_t")?,
                a_v: p.parse("a_v")?,
                b_v: p.parse("b_v")?,
                optimize_b_t: p.parse("optimize_b_t")?,
                optimize_b_v: p.parse("optimize_b_v")?,
            };
            hyper.validate()?;
            Ok(ArchivedModel::Vbnmf(VbnmfModel {
                t: p.stats("E_t", "L_t", (n_terms, rank))?,
                v: p.stats("E_v", "L_v", (rank, n_docs))?,
                hyper,
                bound_trace: p.take_vec("bound_trace")?,
                seed: p.parse("seed")?,
                iterations: p.parse("iterations")?,
                warnings: p.warnings()?,
            }))
        }
        "supervised" => {
            let (n_terms, n_docs, rank): (usize, usize, usize) =
                (p.parse("n_terms")?, p.parse("n_docs")?, p.parse("rank")?);
            let n_labels: usize = p.parse("n_labels")?;
            let labels: Vec<usize> = p
                .get("labels")?
                .split(',')
                .map(|s| {
                    s.parse()
                        .map_err(|_| ArchiveError::Header(format!("bad label {s:?}")))
                })
                .collect::<Result<_>>()?;
            if labels.len() != n_docs {
                return Err(ArchiveError::Header(format!(
                    "{} labels for {n_docs} documents",
                    labels.len()
                )));
            }
            let indicator = LabelIndicator::new(&LabelVector::new(labels, n_labels)?)?;
            let hyper = SupervisedHyper {
                a_t: p.parse("a_t")?,
                b_t: p.parse("b_t")?,
                a_lambda: p.parse("a_lambda")?,
                b_lambda: p.parse("b_lambda")?,
                burn_in: p.parse("burn_in")?,
                optimize_b_t: p.parse("optimize_b_t")?,
                optimize_b_lambda: p.parse("optimize_b_lambda")?,
            };
            hyper.validate()?;
            Ok(ArchivedModel::Supervised(SupervisedModel {
                t: p.stats("E_t", "L_t", (n_terms, rank))?,
                v: p.stats("E_v", "L_v", (rank, n_docs))?,
                lambda: p.stats("E_lambda", "L_lambda", (rank, n_labels))?,
                lambda_fixed: p.parse("lambda_fixed")?,
                hyper,
                labels: indicator,
                bound_trace: p.take_vec("bound_trace")?,
                seed: p.parse("seed")?,
                iterations: p.parse("iterations")?,
                warnings: p.warnings()?,
            }))
        }
        "pca" => {
            let (n_terms, rank): (usize, usize) = (p.parse("n_terms")?, p.parse("rank")?);
            let mean = p.take("mean")?;
            p.expect_dims(&mean, "mean", (1, n_terms))?;
            let basis = p.take("basis")?;
            p.expect_dims(&basis, "basis", (n_terms, rank))?;
            let ev = p.take("explained_variance")?;
            p.expect_dims(&ev, "explained_variance", (1, rank))?;
            Ok(ArchivedModel::Pca(PcaModel {
                mean: mean.into_vec(),
                basis,
                explained_variance: ev.into_vec(),
            }))
        }
        other => Err(ArchiveError::Header(format!(
            "unknown model kind {other:?}"
        ))),
    }
}
