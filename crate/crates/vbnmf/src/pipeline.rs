//! The steps shared by the CLI and the experiment runner: weighting a
//! split corpus, fitting one model, and turning models into coordinates.

use vbnmf_core::corpus::{LabelVector, TfIdfMatrix, TfIdfTransform};
use vbnmf_core::eval::{default_k, evaluate, EvalReport, KnnResult, RunInfo};
use vbnmf_core::pca::{pca_fit, pca_project};
use vbnmf_core::supervised::{fit_supervised, projection_prior, SupervisedHyper};
use vbnmf_core::vbnmf::{fit, project, FitConfig, GammaPrior, VbnmfHyper};
use vbnmf_core::{Error, Matrix, Result, SparseMatrix};

use crate::archive::ArchivedModel;
use crate::config::{Method, ModelSettings};
use crate::io::SplitCorpus;

/// TF-IDF features of both splits, weighted and pruned on the training
/// split.
#[derive(Clone, Debug, PartialEq)]
pub struct Prepared {
    pub transform: TfIdfTransform,
    pub train: TfIdfMatrix,
    pub test: TfIdfMatrix,
    pub train_labels: LabelVector,
    pub test_labels: LabelVector,
    pub train_ids: Vec<usize>,
    pub test_ids: Vec<usize>,
}

impl Prepared {
    pub fn n_labels(&self) -> usize {
        self.train_labels.n_labels()
    }
}

pub fn prepare(corpus: &SplitCorpus, vocab_cap: usize) -> Result<Prepared> {
    let (transform, train) = TfIdfTransform::fit(&corpus.train, vocab_cap)?;
    let test = transform.transform(&corpus.test)?;
    Ok(Prepared {
        transform,
        train,
        test,
        train_labels: corpus.train_labels.clone(),
        test_labels: corpus.test_labels.clone(),
        train_ids: corpus.train_ids.clone(),
        test_ids: corpus.test_ids.clone(),
    })
}

fn fit_config(s: &ModelSettings) -> FitConfig {
    FitConfig::new(s.rank)
        .with_seed(s.seed)
        .with_max_iters(s.max_iters)
        .with_tol(s.tol)
}

/// Fits the method named in `settings` on the training features.
pub fn fit_model(
    x: &SparseMatrix,
    labels: &LabelVector,
    s: &ModelSettings,
) -> Result<ArchivedModel> {
    match s.method {
        Method::Supervised => {
            let hyper = SupervisedHyper {
                a_t: s.a_t,
                a_lambda: s.a_lambda,
                burn_in: s.burn_in,
                ..SupervisedHyper::default()
            };
            Ok(ArchivedModel::Supervised(fit_supervised(
                x,
                labels,
                hyper,
                &fit_config(s),
            )?))
        }
        Method::Vbnmf => {
            let hyper = VbnmfHyper {
                a_t: s.a_t,
                a_v: s.a_v,
                ..VbnmfHyper::default()
            };
            Ok(ArchivedModel::Vbnmf(fit(x, hyper, &fit_config(s))?))
        }
        Method::Pca => Ok(ArchivedModel::Pca(pca_fit(x, s.rank)?)),
    }
}

fn check_terms(model: &ArchivedModel, x: &SparseMatrix, context: &'static str) -> Result<()> {
    if x.rows() != model.n_terms() {
        return Err(Error::Shape {
            context,
            expected: (model.n_terms(), x.cols()),
            found: x.shape(),
        });
    }
    Ok(())
}

/// Coordinates of the training documents: the fitted coefficients for the
/// factorizations, the projection for PCA.
pub fn train_coordinates(model: &ArchivedModel, x_train: &SparseMatrix) -> Result<Matrix> {
    check_terms(model, x_train, "training features vs model")?;
    let v = match model {
        ArchivedModel::Vbnmf(m) => &m.v.mean,
        ArchivedModel::Supervised(m) => &m.v.mean,
        ArchivedModel::Pca(m) => return pca_project(x_train, m),
    };
    if v.cols() != x_train.cols() {
        return Err(Error::Shape {
            context: "training documents vs model coefficients",
            expected: (x_train.rows(), v.cols()),
            found: x_train.shape(),
        });
    }
    Ok(v.clone())
}

/// Coordinates of new documents with the learned components held fixed.
pub fn project_documents(
    model: &ArchivedModel,
    x: &SparseMatrix,
    s: &ModelSettings,
) -> Result<Matrix> {
    check_terms(model, x, "features vs model")?;
    let cfg = fit_config(s);
    match model {
        ArchivedModel::Vbnmf(m) => {
            let prior = GammaPrior::new(m.hyper.a_v, m.hyper.b_v)?;
            Ok(project(x, &m.t, prior, m.hyper.optimize_b_v, &cfg)?
                .coefficients
                .mean)
        }
        ArchivedModel::Supervised(m) => Ok(project(x, &m.t, projection_prior(m), true, &cfg)?
            .coefficients
            .mean),
        ArchivedModel::Pca(m) => pca_project(x, m),
    }
}

/// Shape parameters recorded with a report.
pub fn run_info(model: &ArchivedModel, seed: u64) -> RunInfo {
    let (a_lambda, a_v, iterations) = match model {
        ArchivedModel::Supervised(m) => (Some(m.hyper.a_lambda), None, m.iterations),
        ArchivedModel::Vbnmf(m) => (None, Some(m.hyper.a_v), m.iterations),
        ArchivedModel::Pca(_) => (None, None, 0),
    };
    RunInfo {
        method: model.method().to_string(),
        rank: model.rank(),
        a_lambda,
        a_v,
        seed,
        iterations,
    }
}

/// Projects the test split, classifies it against the training
/// coordinates and scores the result.
pub fn evaluate_model(
    model: &ArchivedModel,
    data: &Prepared,
    s: &ModelSettings,
) -> Result<(EvalReport, KnnResult)> {
    let train = train_coordinates(model, &data.train.values)?;
    let test = project_documents(model, &data.test.values, s)?;
    let k = s.k.unwrap_or_else(|| default_k(data.train.n_docs()));
    let seed = match model {
        ArchivedModel::Supervised(m) => m.seed,
        ArchivedModel::Vbnmf(m) => m.seed,
        ArchivedModel::Pca(_) => s.seed,
    };
    evaluate(
        run_info(model, seed),
        &train,
        data.train_labels.labels(),
        &test,
        data.test_labels.labels(),
        data.n_labels(),
        k,
    )
}
