//! Supervised variational Bayesian NMF with label-driven coefficient
//! sparsity.
//!
//! Coefficients are exponential with a rate `λ_il` shared by component `i`
//! across all documents labelled `l`; each rate has a gamma prior with
//! shape `a_λ` and scale `b_λ`. Small `⟨λ_il⟩` lets component `i` be active
//! for label `l`, large values switch it off, so documents with the same
//! label share a small active subset of components.
//!
//! After initialization the rates are held at one common value for a
//! burn-in period before their posterior is updated.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::LabelVector;
use crate::error::{check_positive, Error, Result};
use crate::matrix::{Matrix, SparseMatrix};
use crate::vbnmf::{
    check_data, check_rank, collapsed_components, converged, e_step_sums, gamma_posterior,
    likelihood_bound_with, log_factorial_sum, optimize_scale_hyper, sample_gamma_matrix, update_t,
    FitConfig, FitWarning, GammaPrior, GammaStats,
};

/// Rates above this are capped.
pub const RATE_CLAMP: f64 = 1e12;

/// Posterior statistics of the per-label rates, rank × labels.
pub type LambdaStats = GammaStats;

/// One-hot document-to-label assignment (documents × labels).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelIndicator {
    labels: Vec<usize>,
    counts: Vec<usize>,
}

impl LabelIndicator {
    /// Every label must own at least one document.
    pub fn new(labels: &LabelVector) -> Result<Self> {
        labels.check_all_present()?;
        Ok(Self {
            labels: labels.labels().to_vec(),
            counts: labels.counts(),
        })
    }

    pub fn n_docs(&self) -> usize {
        self.labels.len()
    }

    pub fn n_labels(&self) -> usize {
        self.counts.len()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Documents per label.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_fn(self.n_docs(), self.n_labels(), |d, l| {
            if self.labels[d] == l {
                1.0
            } else {
                0.0
            }
        })
    }

    /// `per_label · Δᵀ`: copies column `label(d)` into column `d`.
    pub fn gather(&self, per_label: &Matrix) -> Matrix {
        Matrix::from_fn(per_label.rows(), self.n_docs(), |i, d| {
            per_label[(i, self.labels[d])]
        })
    }

    /// `per_doc · Δ`: sums the columns of each label.
    pub fn scatter_sum(&self, per_doc: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(per_doc.rows(), self.n_labels());
        for i in 0..per_doc.rows() {
            for (d, &l) in self.labels.iter().enumerate() {
                out[(i, l)] += per_doc[(i, d)];
            }
        }
        out
    }
}

/// Hyperparameters of the supervised model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SupervisedHyper {
    pub a_t: f64,
    pub b_t: f64,
    /// Shape of the rate prior; held fixed.
    pub a_lambda: f64,
    pub b_lambda: f64,
    /// Iterations with all rates fixed to one common value.
    pub burn_in: usize,
    pub optimize_b_t: bool,
    pub optimize_b_lambda: bool,
}

impl Default for SupervisedHyper {
    fn default() -> Self {
        Self {
            a_t: 1.0,
            b_t: 1.0,
            a_lambda: 1.0,
            b_lambda: 1.0,
            burn_in: 10,
            optimize_b_t: true,
            optimize_b_lambda: true,
        }
    }
}

impl SupervisedHyper {
    pub fn validate(&self) -> Result<()> {
        check_positive("a_t", self.a_t)?;
        check_positive("b_t", self.b_t)?;
        check_positive("a_lambda", self.a_lambda)?;
        check_positive("b_lambda", self.b_lambda)
    }

    pub fn t_prior(&self) -> GammaPrior {
        GammaPrior {
            shape: self.a_t,
            scale: self.b_t,
        }
    }

    pub fn lambda_prior(&self) -> GammaPrior {
        GammaPrior {
            shape: self.a_lambda,
            scale: self.b_lambda,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SupervisedModel {
    pub t: GammaStats,
    pub v: GammaStats,
    pub lambda: LambdaStats,
    /// True while the rates are fixed (burn-in); the bound then treats them
    /// as constants rather than random variables.
    pub lambda_fixed: bool,
    pub hyper: SupervisedHyper,
    pub labels: LabelIndicator,
    pub bound_trace: Vec<f64>,
    pub seed: u64,
    pub iterations: usize,
    pub warnings: Vec<FitWarning>,
}

impl SupervisedModel {
    pub fn rank(&self) -> usize {
        self.t.mean.cols()
    }

    pub fn n_terms(&self) -> usize {
        self.t.mean.rows()
    }

    pub fn n_docs(&self) -> usize {
        self.v.mean.cols()
    }

    pub fn n_labels(&self) -> usize {
        self.labels.n_labels()
    }

    /// Index into `bound_trace` of the first entry recorded with the rates
    /// free; the trace is non-decreasing from there on.
    pub fn first_free_bound(&self) -> usize {
        self.hyper.burn_in.min(self.bound_trace.len())
    }
}

/// Coefficient update: shape `1 + Σ_v`, scale
/// `1 / (⟨λ_{i,label(τ)}⟩ + Σ_ν ⟨t_νi⟩)`.
pub fn update_v_sup(
    sigma_v: &Matrix,
    mean_t: &Matrix,
    mean_lambda: &Matrix,
    delta: &LabelIndicator,
) -> Result<GammaStats> {
    let rank = sigma_v.rows();
    if mean_t.cols() != rank {
        return Err(Error::Shape {
            context: "update_v_sup (components)",
            expected: (mean_t.rows(), rank),
            found: mean_t.shape(),
        });
    }
    mean_lambda.expect_shape((rank, delta.n_labels()), "update_v_sup (rates)")?;
    if sigma_v.cols() != delta.n_docs() {
        return Err(Error::Shape {
            context: "update_v_sup (labels)",
            expected: (rank, delta.n_docs()),
            found: sigma_v.shape(),
        });
    }
    let exposure = mean_t.col_sums();
    let labels = delta.labels();
    gamma_posterior(1.0, sigma_v, |i, d| {
        mean_lambda[(i, labels[d])] + exposure[i]
    })
}

/// Rate update: shape `a_λ + N_l`, scale `1 / (1/b_λ + Σ_{τ∈l} ⟨v_iτ⟩)`.
pub fn update_lambda(
    mean_v: &Matrix,
    delta: &LabelIndicator,
    prior: GammaPrior,
) -> Result<LambdaStats> {
    if mean_v.cols() != delta.n_docs() {
        return Err(Error::Shape {
            context: "update_lambda",
            expected: (mean_v.rows(), delta.n_docs()),
            found: mean_v.shape(),
        });
    }
    GammaPrior::new(prior.shape, prior.scale)?;
    if let Some(l) = delta.counts().iter().position(|&n| n == 0) {
        return Err(Error::EmptyLabel(l));
    }
    let label_mass = delta.scatter_sum(mean_v);
    let n_docs = Matrix::from_fn(mean_v.rows(), delta.n_labels(), |_, l| {
        delta.counts()[l] as f64
    });
    let inv_b = 1.0 / prior.scale;
    gamma_posterior(prior.shape, &n_docs, |i, l| inv_b + label_mass[(i, l)])
}

/// Caps rates above [`RATE_CLAMP`] (keeping the shape) and reports them.
fn clamp_rates(lambda: &mut LambdaStats) -> Result<Vec<FitWarning>> {
    let mut warnings = Vec::new();
    let (rows, cols) = lambda.mean.shape();
    let mut scale = lambda.scale.clone();
    for i in 0..rows {
        for l in 0..cols {
            if lambda.mean[(i, l)] > RATE_CLAMP {
                scale[(i, l)] = RATE_CLAMP / lambda.shape[(i, l)];
                warnings.push(FitWarning::RateClamped {
                    component: i,
                    label: l,
                });
            }
        }
    }
    if !warnings.is_empty() {
        *lambda = GammaStats::from_shape_scale(lambda.shape.clone(), scale)?;
    }
    Ok(warnings)
}

/// Σ_{i,τ} ⟨ln 𝒢(v_iτ | 1, 1/λ_{i,label(τ)})⟩ = Σ −⟨λ⟩⟨v⟩ + ⟨ln λ⟩.
///
/// With one label per document the sum over labels inside the logarithm
/// has a single term, so the lower bound on ⟨ln Σ_l δ(z_τ−l) λ_il⟩ used for
/// the rate update holds with equality.
fn coefficient_log_prior(v: &GammaStats, lambda: &LambdaStats, delta: &LabelIndicator) -> f64 {
    let labels = delta.labels();
    let mut total = 0.0;
    for i in 0..v.mean.rows() {
        for (d, &l) in labels.iter().enumerate() {
            total += -lambda.mean[(i, l)] * v.mean[(i, d)] + lambda.log_mean[(i, l)];
        }
    }
    total
}

/// Lower bound of the supervised model with the rate term relaxed by
/// Jensen's inequality. While the rates are fixed their prior and entropy
/// terms are left out.
pub fn compute_relaxed_bound(x: &SparseMatrix, model: &SupervisedModel) -> Result<f64> {
    relaxed_bound_with(x, model, log_factorial_sum(x))
}

fn relaxed_bound_with(
    x: &SparseMatrix,
    model: &SupervisedModel,
    log_factorials: f64,
) -> Result<f64> {
    let h = &model.hyper;
    let mut bound = likelihood_bound_with(x, &model.t, &model.v, log_factorials)?
        + model.t.expected_log_prior(h.t_prior())
        + model.t.entropy()
        + coefficient_log_prior(&model.v, &model.lambda, &model.labels)
        + model.v.entropy();
    if !model.lambda_fixed {
        bound += model.lambda.expected_log_prior(h.lambda_prior()) + model.lambda.entropy();
    }
    Ok(bound)
}

/// Random initial state. Components are drawn from their prior and
/// coefficients from a unit exponential (ChaCha8 seeded with `seed`, in that
/// order); every rate starts at `1 / mean(⟨V⟩)`.
pub fn init_supervised(
    n_terms: usize,
    labels: &LabelVector,
    rank: usize,
    hyper: SupervisedHyper,
    seed: u64,
) -> Result<SupervisedModel> {
    check_rank(n_terms, labels.len(), rank)?;
    hyper.validate()?;
    let indicator = LabelIndicator::new(labels)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = sample_gamma_matrix(&mut rng, n_terms, rank, hyper.t_prior())?;
    let v = sample_gamma_matrix(
        &mut rng,
        rank,
        labels.len(),
        GammaPrior {
            shape: 1.0,
            scale: 1.0,
        },
    )?;
    let rate = 1.0 / v.mean();
    Ok(SupervisedModel {
        t: GammaStats::point_mass(t)?,
        v: GammaStats::point_mass(v)?,
        lambda: GammaStats::point_mass(Matrix::filled(rank, indicator.n_labels(), rate))?,
        lambda_fixed: true,
        hyper,
        labels: indicator,
        bound_trace: Vec::new(),
        seed,
        iterations: 0,
        warnings: Vec::new(),
    })
}

/// Fits the supervised model.
///
/// Each sweep splits the data, updates components then coefficients; once
/// `burn_in` sweeps have run it also updates the rates and the optional
/// scale hyperparameters. Convergence is only tested after burn-in.
pub fn fit_supervised(
    x: &SparseMatrix,
    labels: &LabelVector,
    hyper: SupervisedHyper,
    config: &FitConfig,
) -> Result<SupervisedModel> {
    check_data(x)?;
    if labels.len() != x.cols() {
        return Err(Error::InvalidArgument(alloc::format!(
            "{} labels for {} documents",
            labels.len(),
            x.cols()
        )));
    }
    let mut model = init_supervised(x.rows(), labels, config.rank, hyper, config.seed)?;
    let mut warnings = Vec::new();
    let log_factorials = log_factorial_sum(x);
    for iter in 0..config.max_iters {
        let (sigma_t, sigma_v) = e_step_sums(x, &model.t.log_mean, &model.v.log_mean)?;
        model.t = update_t(&sigma_t, &model.v.mean, model.hyper.t_prior())?;
        model.v = update_v_sup(&sigma_v, &model.t.mean, &model.lambda.mean, &model.labels)?;
        let free = iter >= model.hyper.burn_in;
        if free {
            model.lambda = update_lambda(&model.v.mean, &model.labels, model.hyper.lambda_prior())?;
            model.lambda_fixed = false;
            for w in clamp_rates(&mut model.lambda)? {
                if !warnings.contains(&w) {
                    warnings.push(w);
                }
            }
            if model.hyper.optimize_b_t {
                model.hyper.b_t = optimize_scale_hyper(&model.t, model.hyper.a_t)?;
            }
            if model.hyper.optimize_b_lambda {
                model.hyper.b_lambda = optimize_scale_hyper(&model.lambda, model.hyper.a_lambda)?;
            }
        }
        model
            .bound_trace
            .push(relaxed_bound_with(x, &model, log_factorials)?);
        model.iterations += 1;
        if free && converged(&model.bound_trace[model.hyper.burn_in..], config.tol) {
            break;
        }
    }
    warnings.extend(collapsed_components(&model.t.mean));
    model.warnings = warnings;
    Ok(model)
}

/// Coefficient prior used to project unlabelled documents onto a supervised
/// model's components: unit shape (exponential, as for training
/// coefficients) with the mean of the training coefficients as scale.
pub fn projection_prior(model: &SupervisedModel) -> GammaPrior {
    GammaPrior {
        shape: 1.0,
        scale: model.v.mean.mean(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vbnmf::{update_v_unsup, VbnmfHyper};
    use alloc::vec;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn labels(ids: &[usize]) -> LabelVector {
        LabelVector::from_ids(ids.to_vec()).unwrap()
    }

    fn random_sparse(rows: usize, cols: usize, seed: u64) -> SparseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SparseMatrix::from_dense(&Matrix::from_fn(rows, cols, |_, _| {
            if rng.random::<f64>() < 0.6 {
                rng.random::<f64>() * 4.0
            } else {
                0.0
            }
        }))
    }

    #[test]
    fn indicator_products() {
        let ind = LabelIndicator::new(&labels(&[1, 0, 1])).unwrap();
        let m = ind.to_matrix();
        assert_eq!(m.as_slice(), &[0.0, 1.0, 1.0, 0.0, 0.0, 1.0]);
        let per_label = Matrix::from_vec(1, 2, vec![5.0, 7.0]).unwrap();
        assert_eq!(
            ind.gather(&per_label),
            per_label.matmul(&m.transpose()).unwrap()
        );
        let per_doc = Matrix::from_vec(1, 3, vec![1.0, 2.0, 4.0]).unwrap();
        assert_eq!(ind.scatter_sum(&per_doc), per_doc.matmul(&m).unwrap());
        assert!(LabelIndicator::new(&LabelVector::new(vec![0, 0], 2).unwrap()).is_err());
    }

    #[test]
    fn update_v_sup_examples() {
        let ind = LabelIndicator::new(&labels(&[0, 1])).unwrap();
        let lam = Matrix::from_vec(1, 2, vec![2.0, 4.0]).unwrap();
        let s = update_v_sup(&Matrix::zeros(1, 2), &Matrix::zeros(3, 1), &lam, &ind).unwrap();
        assert_abs_diff_eq!(s.mean[(0, 0)], 0.5);
        assert_abs_diff_eq!(s.mean[(0, 1)], 0.25);

        let one = LabelIndicator::new(&labels(&[0])).unwrap();
        let s = update_v_sup(
            &Matrix::filled(1, 1, 3.0),
            &Matrix::filled(1, 1, 1.0),
            &Matrix::filled(1, 1, 1.0),
            &one,
        )
        .unwrap();
        assert_abs_diff_eq!(s.shape[(0, 0)], 4.0);
        assert_abs_diff_eq!(s.scale[(0, 0)], 0.5);
        assert_abs_diff_eq!(s.mean[(0, 0)], 2.0);

        // Same data, different labels: only the rate term differs.
        let sigma = Matrix::filled(1, 2, 3.0);
        let t = Matrix::filled(2, 1, 0.5);
        let s = update_v_sup(&sigma, &t, &lam, &ind).unwrap();
        assert_eq!(s.shape[(0, 0)], s.shape[(0, 1)]);
        assert_abs_diff_eq!(
            1.0 / s.scale[(0, 0)] - 1.0 / s.scale[(0, 1)],
            2.0 - 4.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn update_lambda_examples() {
        let ind = LabelIndicator::new(&labels(&[0])).unwrap();
        let prior = GammaPrior::new(1.0, 1.0).unwrap();
        let s = update_lambda(&Matrix::filled(1, 1, 1.0), &ind, prior).unwrap();
        assert_abs_diff_eq!(s.shape[(0, 0)], 2.0);
        assert_abs_diff_eq!(s.scale[(0, 0)], 0.5);
        assert_abs_diff_eq!(s.mean[(0, 0)], 1.0);

        // Vanishing coefficients leave the prior-dominated rate (a + N)·b.
        let ind3 = LabelIndicator::new(&labels(&[0, 0, 0])).unwrap();
        let prior = GammaPrior::new(0.5, 2.0).unwrap();
        let s = update_lambda(&Matrix::filled(2, 3, 1e-300), &ind3, prior).unwrap();
        assert_abs_diff_eq!(s.mean[(1, 0)], 3.5 * 2.0, epsilon = 1e-12);

        // Duplicating documents doubles the data terms.
        let v = Matrix::from_vec(1, 2, vec![0.3, 0.9]).unwrap();
        let vv = Matrix::from_vec(1, 4, vec![0.3, 0.9, 0.3, 0.9]).unwrap();
        let a = update_lambda(&v, &LabelIndicator::new(&labels(&[0, 0])).unwrap(), prior).unwrap();
        let b = update_lambda(
            &vv,
            &LabelIndicator::new(&labels(&[0, 0, 0, 0])).unwrap(),
            prior,
        )
        .unwrap();
        assert_abs_diff_eq!(b.shape[(0, 0)] - a.shape[(0, 0)], 2.0);
        assert_abs_diff_eq!(
            1.0 / b.scale[(0, 0)] - 0.5,
            2.0 * (1.0 / a.scale[(0, 0)] - 0.5),
            epsilon = 1e-12
        );
    }

    #[test]
    fn uniform_rate_matches_exponential_prior_update() {
        let sigma = Matrix::from_vec(2, 3, vec![1.0, 0.0, 2.5, 3.0, 0.5, 0.1]).unwrap();
        let t = Matrix::from_vec(2, 2, vec![0.4, 1.0, 2.0, 0.3]).unwrap();
        let ind = LabelIndicator::new(&labels(&[0, 1, 0])).unwrap();
        let c = 1.7;
        let sup = update_v_sup(&sigma, &t, &Matrix::filled(2, 2, c), &ind).unwrap();
        let unsup = update_v_unsup(&sigma, &t, GammaPrior::new(1.0, 1.0 / c).unwrap()).unwrap();
        for (a, b) in sup.mean.as_slice().iter().zip(unsup.mean.as_slice()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-14);
        }
    }

    #[test]
    fn burn_in_spanning_the_run_keeps_rates_fixed() {
        let x = random_sparse(6, 8, 2);
        let l = labels(&[0, 1, 0, 1, 2, 2, 0, 1]);
        let hyper = SupervisedHyper {
            burn_in: 15,
            ..SupervisedHyper::default()
        };
        let cfg = FitConfig::new(3).with_seed(5).with_max_iters(15);
        let m = fit_supervised(&x, &l, hyper, &cfg).unwrap();
        let init = init_supervised(6, &l, 3, hyper, 5).unwrap();
        assert!(m.lambda_fixed);
        assert_eq!(m.lambda, init.lambda);
        assert_eq!(m.hyper, hyper);
        assert_eq!(m.iterations, 15);
    }

    #[test]
    fn relaxed_bound_monotone_after_burn_in() {
        for seed in 0..3 {
            let x = random_sparse(10, 24, 50 + seed);
            let l = LabelVector::from_ids((0..24).map(|d| d % 3).collect()).unwrap();
            for a_lambda in [0.1, 1.0, 30.0] {
                let hyper = SupervisedHyper {
                    a_lambda,
                    ..SupervisedHyper::default()
                };
                let cfg = FitConfig::new(4)
                    .with_seed(seed)
                    .with_max_iters(60)
                    .with_tol(0.0);
                let m = fit_supervised(&x, &l, hyper, &cfg).unwrap();
                let trace = &m.bound_trace[m.first_free_bound()..];
                for w in trace.windows(2) {
                    assert!(
                        w[1] >= w[0] - 1e-9 * w[0].abs(),
                        "a={a_lambda}: {} -> {}",
                        w[0],
                        w[1]
                    );
                }
            }
        }
    }

    #[test]
    fn single_label_fixed_rate_equals_unsupervised_bound() {
        let x = random_sparse(3, 4, 8);
        let l = labels(&[0, 0, 0, 0]);
        let hyper = SupervisedHyper {
            burn_in: 100,
            ..SupervisedHyper::default()
        };
        let mut m = fit_supervised(&x, &l, hyper, &FitConfig::new(2).with_max_iters(5)).unwrap();
        m.lambda = GammaStats::point_mass(Matrix::filled(2, 1, 1.0)).unwrap();
        let unsup = crate::vbnmf::VbnmfModel {
            t: m.t.clone(),
            v: m.v.clone(),
            hyper: VbnmfHyper {
                a_v: 1.0,
                b_v: 1.0,
                ..VbnmfHyper::default()
            },
            bound_trace: Vec::new(),
            seed: 0,
            iterations: 0,
            warnings: Vec::new(),
        };
        let a = compute_relaxed_bound(&x, &m).unwrap();
        let b = crate::vbnmf::compute_bound(&x, &unsup).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-10 * b.abs());
    }

    #[test]
    fn label_count_mismatch_is_rejected() {
        let x = random_sparse(4, 3, 1);
        assert!(fit_supervised(
            &x,
            &labels(&[0, 1]),
            SupervisedHyper::default(),
            &FitConfig::new(2)
        )
        .is_err());
    }
}
