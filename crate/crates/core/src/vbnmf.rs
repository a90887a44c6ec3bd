//! Unsupervised Poisson-gamma variational Bayesian NMF.
//!
//! The data `X` (terms × documents) is modelled as `X ≈ T·V` with gamma
//! priors on every entry of the components `T` and coefficients `V`, a
//! Poisson likelihood, and latent per-component splits `S` of each entry.
//! The posterior is approximated by a fully factorized `q` whose factors are
//! gamma (for `T`, `V`) and multinomial (for `S`). Every factor is stored as
//! its sufficient statistics `⟨x⟩` and `⟨ln x⟩`.
//!
//! One iteration is a coordinate ascent sweep: split the data with the
//! current log-means, update `T`, update `V` against the fresh `T`, then the
//! optional closed-form scale updates. Each step maximizes the lower bound
//! in its own block, so the recorded bound never decreases.

use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{check_positive, Error, Result};
use crate::matrix::{Matrix, SparseMatrix};
use crate::numerics::{
    digamma_unchecked, gamma_entropy_unchecked, gamma_expected_log_density, ln_gamma_unchecked,
};

/// Floor applied to `exp(⟨ln x⟩)` before it enters a product.
const EXP_FLOOR: f64 = 1e-300;
/// Reconstructions below this use the log-domain fallback.
const DENOM_MIN: f64 = 1e-280;

/// Posterior sufficient statistics of a matrix of independent gamma factors.
///
/// `shape` and `scale` are the variational parameters; `mean = shape·scale`
/// and `log_mean = ψ(shape) + ln scale`. A freshly initialized matrix is a
/// point mass: `log_mean = ln mean`, infinite shape and zero scale.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaStats {
    pub mean: Matrix,
    pub log_mean: Matrix,
    pub shape: Matrix,
    pub scale: Matrix,
}

impl GammaStats {
    pub fn from_shape_scale(shape: Matrix, scale: Matrix) -> Result<Self> {
        scale.expect_shape(shape.shape(), "GammaStats::from_shape_scale")?;
        for (&a, &b) in shape.as_slice().iter().zip(scale.as_slice()) {
            check_positive("gamma shape", a)?;
            check_positive("gamma scale", b)?;
        }
        let mean = shape.zip_map(&scale, |a, b| a * b)?;
        let log_mean = shape.zip_map(&scale, |a, b| digamma_unchecked(a) + libm::log(b))?;
        Ok(Self {
            mean,
            log_mean,
            shape,
            scale,
        })
    }

    /// Degenerate statistics concentrated on `mean`.
    pub fn point_mass(mean: Matrix) -> Result<Self> {
        if mean.as_slice().iter().any(|&m| !(m > 0.0 && m.is_finite())) {
            return Err(Error::InvalidArgument(
                "point mass requires positive finite means".into(),
            ));
        }
        let (rows, cols) = mean.shape();
        Ok(Self {
            log_mean: mean.map(libm::log),
            mean,
            shape: Matrix::filled(rows, cols, f64::INFINITY),
            scale: Matrix::zeros(rows, cols),
        })
    }

    /// Recovers shape and scale from stored moments by solving
    /// `ln a − ψ(a) = ln⟨x⟩ − ⟨ln x⟩`. Entries with `⟨ln x⟩ = ln⟨x⟩` are
    /// point masses.
    pub fn from_moments(mean: Matrix, log_mean: Matrix) -> Result<Self> {
        log_mean.expect_shape(mean.shape(), "GammaStats::from_moments")?;
        let (rows, cols) = mean.shape();
        let mut shape = Matrix::zeros(rows, cols);
        let mut scale = Matrix::zeros(rows, cols);
        for k in 0..rows * cols {
            let e = mean.as_slice()[k];
            let l = log_mean.as_slice()[k];
            check_positive("gamma mean", e)?;
            let gap = libm::log(e) - l;
            if gap.is_nan() || gap < 0.0 {
                return Err(Error::InvalidArgument(alloc::format!(
                    "log-mean {l} exceeds ln of mean {e}"
                )));
            }
            let (a, b) = if gap == 0.0 {
                (f64::INFINITY, 0.0)
            } else {
                let a = invert_log_gap(gap);
                (a, e / a)
            };
            shape.as_mut_slice()[k] = a;
            scale.as_mut_slice()[k] = b;
        }
        Ok(Self {
            mean,
            log_mean,
            shape,
            scale,
        })
    }

    pub fn shape_dims(&self) -> (usize, usize) {
        self.mean.shape()
    }

    pub fn is_point_mass(&self) -> bool {
        self.shape.as_slice().iter().any(|a| a.is_infinite())
    }

    /// Summed entropy; `-∞` for point masses.
    pub fn entropy(&self) -> f64 {
        if self.is_point_mass() {
            return f64::NEG_INFINITY;
        }
        self.shape
            .as_slice()
            .iter()
            .zip(self.scale.as_slice())
            .map(|(&a, &b)| gamma_entropy_unchecked(a, b))
            .sum()
    }

    /// Σ ⟨ln 𝒢(x | a, b)⟩ over all entries for a shared prior.
    pub fn expected_log_prior(&self, prior: GammaPrior) -> f64 {
        self.mean
            .as_slice()
            .iter()
            .zip(self.log_mean.as_slice())
            .map(|(&e, &l)| gamma_expected_log_density(prior.shape, prior.scale, e, l))
            .sum()
    }
}

/// Solves ln a − ψ(a) = gap (gap > 0) for a with Newton steps on ln a.
fn invert_log_gap(gap: f64) -> f64 {
    // Starting point from ln a − ψ(a) ≈ 1/(2a) + 1/(12a²).
    let mut a = (3.0 - gap + libm::sqrt((gap - 3.0) * (gap - 3.0) + 24.0 * gap)) / (12.0 * gap);
    for _ in 0..100 {
        let f = libm::log(a) - digamma_unchecked(a) - gap;
        let df = 1.0 / a - trigamma(a);
        let next = a * libm::exp(-f / (a * df));
        let done = ((next - a) / a).abs() < 1e-15;
        a = next;
        if done {
            break;
        }
    }
    a
}

fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 8.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // 1/x + 1/(2x²) + Σ B_{2k}/x^{2k+1}
    let series =
        inv2 * (1.0 / 6.0 - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 - inv2 * (1.0 / 30.0))));
    acc + inv + 0.5 * inv2 + series * inv
}

/// Shared gamma prior: shape and scale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaPrior {
    pub shape: f64,
    pub scale: f64,
}

impl GammaPrior {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        check_positive("prior shape", shape)?;
        check_positive("prior scale", scale)?;
        Ok(Self { shape, scale })
    }
}

/// Hyperparameters of the unsupervised model. Shapes stay fixed; scales are
/// re-estimated each iteration when the matching flag is set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VbnmfHyper {
    pub a_t: f64,
    pub b_t: f64,
    pub a_v: f64,
    pub b_v: f64,
    pub optimize_b_t: bool,
    pub optimize_b_v: bool,
}

impl Default for VbnmfHyper {
    fn default() -> Self {
        Self {
            a_t: 1.0,
            b_t: 1.0,
            a_v: 1.0,
            b_v: 1.0,
            optimize_b_t: true,
            optimize_b_v: true,
        }
    }
}

impl VbnmfHyper {
    pub fn validate(&self) -> Result<()> {
        check_positive("a_t", self.a_t)?;
        check_positive("b_t", self.b_t)?;
        check_positive("a_v", self.a_v)?;
        check_positive("b_v", self.b_v)
    }

    pub fn t_prior(&self) -> GammaPrior {
        GammaPrior {
            shape: self.a_t,
            scale: self.b_t,
        }
    }

    pub fn v_prior(&self) -> GammaPrior {
        GammaPrior {
            shape: self.a_v,
            scale: self.b_v,
        }
    }
}

/// Iteration control shared by every fitting routine.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitConfig {
    pub rank: usize,
    pub max_iters: usize,
    /// Stop when the relative bound change falls below this.
    pub tol: f64,
    pub seed: u64,
}

impl FitConfig {
    pub fn new(rank: usize) -> Self {
        Self {
            rank,
            max_iters: 200,
            tol: 1e-6,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

/// Non-fatal conditions noticed while fitting.
#[derive(Clone, Debug, PartialEq)]
pub enum FitWarning {
    /// A column of `⟨T⟩` carries (numerically) no mass.
    CollapsedComponent(usize),
    /// A label rate exceeded the clamp and was capped.
    RateClamped { component: usize, label: usize },
}

/// Fitted (or freshly initialized) unsupervised model.
#[derive(Clone, Debug, PartialEq)]
pub struct VbnmfModel {
    /// Components, terms × rank.
    pub t: GammaStats,
    /// Coefficients, rank × documents.
    pub v: GammaStats,
    pub hyper: VbnmfHyper,
    pub bound_trace: Vec<f64>,
    pub seed: u64,
    pub iterations: usize,
    pub warnings: Vec<FitWarning>,
}

impl VbnmfModel {
    pub fn rank(&self) -> usize {
        self.t.mean.cols()
    }

    pub fn n_terms(&self) -> usize {
        self.t.mean.rows()
    }

    pub fn n_docs(&self) -> usize {
        self.v.mean.cols()
    }

    /// `⟨T⟩·⟨V⟩`.
    pub fn reconstruction(&self) -> Matrix {
        self.t.mean.matmul(&self.v.mean).expect("consistent model")
    }
}

pub(crate) fn sample_gamma_matrix(
    rng: &mut ChaCha8Rng,
    rows: usize,
    cols: usize,
    prior: GammaPrior,
) -> Result<Matrix> {
    let dist = Gamma::new(prior.shape, prior.scale).map_err(|_| Error::Domain {
        name: "gamma prior",
        value: prior.shape,
    })?;
    Ok(Matrix::from_fn(rows, cols, |_, _| {
        dist.sample(rng).max(f64::MIN_POSITIVE)
    }))
}

pub(crate) fn check_rank(n_terms: usize, n_docs: usize, rank: usize) -> Result<()> {
    if rank == 0 {
        return Err(Error::InvalidDimension("rank must be at least 1"));
    }
    if n_terms == 0 || n_docs == 0 {
        return Err(Error::InvalidDimension(
            "data must have at least one term and one document",
        ));
    }
    Ok(())
}

/// Random initial state: every mean drawn i.i.d. from its prior with a
/// seeded ChaCha8 generator (components first, row-major), log-means set to
/// `ln mean`.
pub fn init_model(
    n_terms: usize,
    n_docs: usize,
    rank: usize,
    hyper: VbnmfHyper,
    seed: u64,
) -> Result<VbnmfModel> {
    check_rank(n_terms, n_docs, rank)?;
    hyper.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = sample_gamma_matrix(&mut rng, n_terms, rank, hyper.t_prior())?;
    let v = sample_gamma_matrix(&mut rng, rank, n_docs, hyper.v_prior())?;
    Ok(VbnmfModel {
        t: GammaStats::point_mass(t)?,
        v: GammaStats::point_mass(v)?,
        hyper,
        bound_trace: Vec::new(),
        seed,
        iterations: 0,
        warnings: Vec::new(),
    })
}

/// Expected split of the data over components, summed both ways.
///
/// Returns `(Σ_t, Σ_v)` with `Σ_t[ν,i] = Σ_τ ⟨s_νiτ⟩` and
/// `Σ_v[i,τ] = Σ_ν ⟨s_νiτ⟩`, where `⟨s_νiτ⟩ = x_ντ·p_νiτ` and
/// `p_ν·τ ∝ exp(⟨ln t_νi⟩ + ⟨ln v_iτ⟩)`. Only nonzeros of `X` are visited,
/// which is the sparse form of `Ξ = X ./ (exp L_t · exp L_v)`. When the
/// reconstruction underflows the responsibilities are taken in the log
/// domain instead.
pub fn e_step_sums(x: &SparseMatrix, log_t: &Matrix, log_v: &Matrix) -> Result<(Matrix, Matrix)> {
    let (n_terms, n_docs) = x.shape();
    let rank = log_t.cols();
    log_t.expect_shape((n_terms, rank), "e_step_sums (components)")?;
    log_v.expect_shape((rank, n_docs), "e_step_sums (coefficients)")?;

    let exp_t = log_t.map(|l| libm::exp(l).max(EXP_FLOOR));
    let mut sigma_t = Matrix::zeros(n_terms, rank);
    let mut sigma_v = Matrix::zeros(rank, n_docs);
    let mut ev = vec![0.0; rank];
    let mut lv = vec![0.0; rank];
    let mut weights = vec![0.0; rank];
    let mut acc = vec![0.0; rank];

    for doc in 0..n_docs {
        let (terms, values) = x.column(doc);
        if terms.is_empty() {
            continue;
        }
        for i in 0..rank {
            lv[i] = log_v[(i, doc)];
            ev[i] = libm::exp(lv[i]).max(EXP_FLOOR);
        }
        acc.iter_mut().for_each(|a| *a = 0.0);
        for (&term, &value) in terms.iter().zip(values) {
            let et = exp_t.row(term);
            let mut denom = 0.0;
            for i in 0..rank {
                weights[i] = et[i] * ev[i];
                denom += weights[i];
            }
            if !(denom > DENOM_MIN && denom.is_finite()) {
                log_softmax_weights(log_t.row(term), &lv, &mut weights)?;
                denom = 1.0;
            }
            let xi = value / denom;
            let st = sigma_t.row_mut(term);
            for i in 0..rank {
                let s = xi * weights[i];
                st[i] += s;
                acc[i] += s;
            }
        }
        for i in 0..rank {
            sigma_v[(i, doc)] = acc[i];
        }
    }
    Ok((sigma_t, sigma_v))
}

/// Normalized `exp(lt + lv)` computed relative to the maximum.
fn log_softmax_weights(lt: &[f64], lv: &[f64], out: &mut [f64]) -> Result<()> {
    let max = lt
        .iter()
        .zip(lv)
        .map(|(a, b)| a + b)
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Degenerate(
            "reconstruction is zero or non-finite where data is positive",
        ));
    }
    let mut total = 0.0;
    for ((o, a), b) in out.iter_mut().zip(lt).zip(lv) {
        *o = libm::exp(a + b - max);
        total += *o;
    }
    out.iter_mut().for_each(|o| *o /= total);
    Ok(())
}

/// `ln Σ_i exp(lt_i + lv_i)`, using the precomputed exponentials when the
/// sum is representable.
fn log_rate(et: &[f64], ev: &[f64], lt: &[f64], lv: &[f64]) -> Result<f64> {
    let denom: f64 = et.iter().zip(ev).map(|(a, b)| a * b).sum();
    if denom > DENOM_MIN && denom.is_finite() {
        return Ok(libm::log(denom));
    }
    let max = lt
        .iter()
        .zip(lv)
        .map(|(a, b)| a + b)
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Degenerate(
            "reconstruction is zero or non-finite where data is positive",
        ));
    }
    let total: f64 = lt.iter().zip(lv).map(|(a, b)| libm::exp(a + b - max)).sum();
    Ok(max + libm::log(total))
}

/// Posterior of a gamma-distributed matrix: shape `prior_shape + data`,
/// scale `1 / rate(r, c)`.
pub(crate) fn gamma_posterior(
    prior_shape: f64,
    data: &Matrix,
    rate: impl Fn(usize, usize) -> f64,
) -> Result<GammaStats> {
    let (rows, cols) = data.shape();
    let shape = data.map(|s| prior_shape + s);
    let mut scale = Matrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            let rt = rate(r, c);
            if !(rt > 0.0 && rt.is_finite()) {
                return Err(Error::Degenerate("posterior scale is not positive"));
            }
            scale[(r, c)] = 1.0 / rt;
        }
    }
    GammaStats::from_shape_scale(shape, scale)
}

/// Components update: shape `a_t + Σ_t`, scale
/// `1 / (1/b_t + Σ_τ ⟨v_iτ⟩)`.
pub fn update_t(sigma_t: &Matrix, mean_v: &Matrix, prior: GammaPrior) -> Result<GammaStats> {
    if sigma_t.cols() != mean_v.rows() {
        return Err(Error::Shape {
            context: "update_t",
            expected: (sigma_t.cols(), mean_v.cols()),
            found: mean_v.shape(),
        });
    }
    GammaPrior::new(prior.shape, prior.scale)?;
    let exposure = mean_v.row_sums();
    let inv_b = 1.0 / prior.scale;
    gamma_posterior(prior.shape, sigma_t, |_, i| inv_b + exposure[i])
}

/// Coefficient update under a shared gamma prior: shape `a_v + Σ_v`, scale
/// `1 / (1/b_v + Σ_ν ⟨t_νi⟩)`.
pub fn update_v_unsup(sigma_v: &Matrix, mean_t: &Matrix, prior: GammaPrior) -> Result<GammaStats> {
    if sigma_v.rows() != mean_t.cols() {
        return Err(Error::Shape {
            context: "update_v_unsup",
            expected: (mean_t.rows(), sigma_v.rows()),
            found: mean_t.shape(),
        });
    }
    GammaPrior::new(prior.shape, prior.scale)?;
    let exposure = mean_t.col_sums();
    let inv_b = 1.0 / prior.scale;
    gamma_posterior(prior.shape, sigma_v, |i, _| inv_b + exposure[i])
}

/// Scale maximizing Σ ⟨ln 𝒢(x | a, b)⟩ for fixed shape: `mean(⟨x⟩) / a`.
pub fn optimize_scale_hyper(stats: &GammaStats, shape: f64) -> Result<f64> {
    check_positive("shape", shape)?;
    let mean = stats.mean.mean();
    if !(mean > 0.0 && mean.is_finite()) {
        return Err(Error::ZeroInput("scale optimization"));
    }
    Ok(mean / shape)
}

/// Terms of the bound that involve the data:
/// `Σ_{x>0} [x ln Σ_i exp(⟨ln t⟩+⟨ln v⟩) − ln Γ(x+1)] − Σ ⟨t⟩⟨v⟩`.
///
/// This is `⟨ln p(X,S|T,V)⟩ + H[q(S)]` with `q(S)` at the multinomial
/// implied by the current log-means; the `⟨ln Γ(s+1)⟩` terms of the Poisson
/// and multinomial parts cancel.
pub fn likelihood_bound(x: &SparseMatrix, t: &GammaStats, v: &GammaStats) -> Result<f64> {
    likelihood_bound_with(x, t, v, log_factorial_sum(x))
}

/// `Σ_{x>0} ln Γ(x+1)`, constant over a fit.
pub(crate) fn log_factorial_sum(x: &SparseMatrix) -> f64 {
    x.values()
        .iter()
        .map(|&v| ln_gamma_unchecked(v + 1.0))
        .sum()
}

pub(crate) fn likelihood_bound_with(
    x: &SparseMatrix,
    t: &GammaStats,
    v: &GammaStats,
    log_factorials: f64,
) -> Result<f64> {
    let (n_terms, n_docs) = x.shape();
    let rank = t.mean.cols();
    t.mean
        .expect_shape((n_terms, rank), "likelihood_bound (components)")?;
    v.mean
        .expect_shape((rank, n_docs), "likelihood_bound (coefficients)")?;

    let exp_t = t.log_mean.map(|l| libm::exp(l).max(EXP_FLOOR));
    let mut ev = vec![0.0; rank];
    let mut lv = vec![0.0; rank];
    let mut total = 0.0;
    for doc in 0..n_docs {
        let (terms, values) = x.column(doc);
        if terms.is_empty() {
            continue;
        }
        for i in 0..rank {
            lv[i] = v.log_mean[(i, doc)];
            ev[i] = libm::exp(lv[i]).max(EXP_FLOOR);
        }
        for (&term, &value) in terms.iter().zip(values) {
            let lr = log_rate(exp_t.row(term), &ev, t.log_mean.row(term), &lv)?;
            total += value * lr;
        }
    }
    let t_mass = t.mean.col_sums();
    let v_mass = v.mean.row_sums();
    let cross: f64 = t_mass.iter().zip(&v_mass).map(|(a, b)| a * b).sum();
    Ok(total - log_factorials - cross)
}

/// Variational lower bound of the unsupervised model on `x`.
pub fn compute_bound(x: &SparseMatrix, model: &VbnmfModel) -> Result<f64> {
    compute_bound_with(x, model, log_factorial_sum(x))
}

fn compute_bound_with(x: &SparseMatrix, model: &VbnmfModel, log_factorials: f64) -> Result<f64> {
    let h = &model.hyper;
    Ok(
        likelihood_bound_with(x, &model.t, &model.v, log_factorials)?
            + model.t.expected_log_prior(h.t_prior())
            + model.t.entropy()
            + model.v.expected_log_prior(h.v_prior())
            + model.v.entropy(),
    )
}

pub(crate) fn check_data(x: &SparseMatrix) -> Result<()> {
    if !x.is_nonnegative() {
        return Err(Error::InvalidArgument("data must be nonnegative".into()));
    }
    Ok(())
}

pub(crate) fn converged(trace: &[f64], tol: f64) -> bool {
    match trace {
        [.., prev, last] => {
            prev.is_finite() && last.is_finite() && (last - prev).abs() <= tol * prev.abs()
        }
        _ => false,
    }
}

pub(crate) fn collapsed_components(mean_t: &Matrix) -> Vec<FitWarning> {
    let mass = mean_t.col_sums();
    let total: f64 = mass.iter().sum();
    let cutoff = 1e-10 * total / mass.len() as f64;
    mass.iter()
        .enumerate()
        .filter(|(_, &m)| m <= cutoff)
        .map(|(i, _)| FitWarning::CollapsedComponent(i))
        .collect()
}

/// Fits the unsupervised model, recording the bound after every sweep.
pub fn fit(x: &SparseMatrix, hyper: VbnmfHyper, config: &FitConfig) -> Result<VbnmfModel> {
    check_data(x)?;
    let mut model = init_model(x.rows(), x.cols(), config.rank, hyper, config.seed)?;
    let log_factorials = log_factorial_sum(x);
    for _ in 0..config.max_iters {
        let (sigma_t, sigma_v) = e_step_sums(x, &model.t.log_mean, &model.v.log_mean)?;
        model.t = update_t(&sigma_t, &model.v.mean, model.hyper.t_prior())?;
        model.v = update_v_unsup(&sigma_v, &model.t.mean, model.hyper.v_prior())?;
        if model.hyper.optimize_b_t {
            model.hyper.b_t = optimize_scale_hyper(&model.t, model.hyper.a_t)?;
        }
        if model.hyper.optimize_b_v {
            model.hyper.b_v = optimize_scale_hyper(&model.v, model.hyper.a_v)?;
        }
        model
            .bound_trace
            .push(compute_bound_with(x, &model, log_factorials)?);
        model.iterations += 1;
        if converged(&model.bound_trace, config.tol) {
            break;
        }
    }
    model.warnings = collapsed_components(&model.t.mean);
    Ok(model)
}

/// Coefficients inferred for new documents with the components held fixed.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub coefficients: GammaStats,
    /// Coefficient prior after any scale re-estimation.
    pub prior: GammaPrior,
    pub bound_trace: Vec<f64>,
    pub iterations: usize,
}

/// Infers coefficients of `x` under fixed components `t`.
///
/// Runs the fitting sweep without the component update. Coefficients start
/// at the prior itself, so the result does not depend on a seed and each
/// document's column depends only on its own data and the shared prior.
pub fn project(
    x: &SparseMatrix,
    t: &GammaStats,
    prior: GammaPrior,
    optimize_scale: bool,
    config: &FitConfig,
) -> Result<Projection> {
    if x.rows() != t.mean.rows() {
        return Err(Error::Shape {
            context: "project",
            expected: (t.mean.rows(), x.cols()),
            found: x.shape(),
        });
    }
    check_data(x)?;
    let mut prior = GammaPrior::new(prior.shape, prior.scale)?;
    let rank = t.mean.cols();
    let n_docs = x.cols();
    let mut v = GammaStats::from_shape_scale(
        Matrix::filled(rank, n_docs, prior.shape),
        Matrix::filled(rank, n_docs, prior.scale),
    )?;
    let mut trace = Vec::new();
    let mut iterations = 0;
    let log_factorials = log_factorial_sum(x);
    for _ in 0..config.max_iters {
        let (_, sigma_v) = e_step_sums(x, &t.log_mean, &v.log_mean)?;
        v = update_v_unsup(&sigma_v, &t.mean, prior)?;
        if optimize_scale {
            prior.scale = optimize_scale_hyper(&v, prior.shape)?;
        }
        trace.push(
            likelihood_bound_with(x, t, &v, log_factorials)?
                + v.expected_log_prior(prior)
                + v.entropy(),
        );
        iterations += 1;
        if converged(&trace, config.tol) {
            break;
        }
    }
    Ok(Projection {
        coefficients: v,
        prior,
        bound_trace: trace,
        iterations,
    })
}
