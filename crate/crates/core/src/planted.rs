//! Sampler for synthetic labelled corpora drawn from the supervised
//! generative model, used to check that a fit recovers label structure.
//!
//! Each label switches on a fixed set of components: the rates of active
//! (component, label) pairs are drawn from a gamma distribution with a small
//! mean and those of inactive pairs from one with a large mean. Components
//! are gamma, coefficients exponential with the rate of their document's
//! label, and counts Poisson with mean `T·V`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, Poisson};

use crate::corpus::{CountEntry, CountMatrix, LabelVector};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlantedConfig {
    pub n_terms: usize,
    pub n_components: usize,
    pub n_labels: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Components switched on by each label.
    pub active_per_label: usize,
    pub a_t: f64,
    pub b_t: f64,
    /// Gamma shape and scale of active rates.
    pub active_rate: (f64, f64),
    /// Gamma shape and scale of inactive rates.
    pub inactive_rate: (f64, f64),
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            n_terms: 100,
            n_components: 5,
            n_labels: 3,
            n_train: 300,
            n_test: 150,
            active_per_label: 2,
            a_t: 0.5,
            b_t: 2.0,
            active_rate: (10.0, 0.1),
            inactive_rate: (10.0, 5.0),
        }
    }
}

impl PlantedConfig {
    /// Label `l` activates components `a·l, a·l + 1, …, a·l + a − 1`
    /// (mod the number of components), `a` = `active_per_label`.
    pub fn active(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n_components, self.n_labels);
        for l in 0..self.n_labels {
            for j in 0..self.active_per_label {
                m[((self.active_per_label * l + j) % self.n_components, l)] = 1.0;
            }
        }
        m
    }
}

/// Sampled corpus together with the parameters that generated it.
#[derive(Clone, Debug, PartialEq)]
pub struct PlantedCorpus {
    pub train: CountMatrix,
    pub train_labels: LabelVector,
    pub test: CountMatrix,
    pub test_labels: LabelVector,
    /// Terms × components.
    pub t: Matrix,
    /// Components × labels.
    pub lambda: Matrix,
    /// Components × (train then test documents).
    pub v: Matrix,
}

fn dist_err(what: &'static str) -> Error {
    Error::InvalidArgument(format!("invalid {what} parameters"))
}

/// Draws a corpus. Document `d` of either split has label `d mod L`.
/// Documents whose counts all come out zero are redrawn.
pub fn sample_planted(config: &PlantedConfig, seed: u64) -> Result<PlantedCorpus> {
    let c = config;
    if c.n_terms == 0 || c.n_components == 0 || c.n_labels == 0 {
        return Err(Error::InvalidDimension(
            "planted corpus needs terms, components and labels",
        ));
    }
    if c.active_per_label == 0 || c.active_per_label > c.n_components {
        return Err(Error::InvalidArgument(
            "active_per_label must be in 1..=n_components".into(),
        ));
    }
    if c.n_train < c.n_labels || c.n_test < c.n_labels {
        return Err(Error::InvalidArgument(
            "each split needs a document per label".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t_dist = Gamma::new(c.a_t, c.b_t).map_err(|_| dist_err("component"))?;
    let on = Gamma::new(c.active_rate.0, c.active_rate.1).map_err(|_| dist_err("active rate"))?;
    let off =
        Gamma::new(c.inactive_rate.0, c.inactive_rate.1).map_err(|_| dist_err("inactive rate"))?;

    let t = Matrix::from_fn(c.n_terms, c.n_components, |_, _| t_dist.sample(&mut rng));
    let active = c.active();
    let lambda = Matrix::from_fn(c.n_components, c.n_labels, |i, l| {
        if active[(i, l)] > 0.0 {
            on.sample(&mut rng)
        } else {
            off.sample(&mut rng)
        }
    });

    let n_docs = c.n_train + c.n_test;
    let mut v = Matrix::zeros(c.n_components, n_docs);
    let mut entries = Vec::new();
    for d in 0..n_docs {
        let label = (if d < c.n_train { d } else { d - c.n_train }) % c.n_labels;
        let doc = if d < c.n_train { d } else { d - c.n_train };
        loop {
            for i in 0..c.n_components {
                let exp = Exp::new(lambda[(i, label)]).map_err(|_| dist_err("coefficient"))?;
                v[(i, d)] = exp.sample(&mut rng);
            }
            let start = entries.len();
            for term in 0..c.n_terms {
                let rate: f64 = (0..c.n_components).map(|i| t[(term, i)] * v[(i, d)]).sum();
                if rate <= 0.0 {
                    continue;
                }
                let count = Poisson::new(rate)
                    .map_err(|_| dist_err("count"))?
                    .sample(&mut rng) as u64;
                if count > 0 {
                    entries.push((d, CountEntry { term, doc, count }));
                }
            }
            if entries.len() > start {
                break;
            }
        }
    }
    let vocabulary: Vec<String> = (0..c.n_terms).map(|i| format!("w{i:04}")).collect();
    let (train_entries, test_entries): (Vec<_>, Vec<_>) =
        entries.into_iter().partition(|(d, _)| *d < c.n_train);
    let strip = |v: Vec<(usize, CountEntry)>| v.into_iter().map(|(_, e)| e).collect();
    let labels = |n: usize| LabelVector::new((0..n).map(|d| d % c.n_labels).collect(), c.n_labels);
    Ok(PlantedCorpus {
        train: CountMatrix::new(
            c.n_terms,
            c.n_train,
            strip(train_entries),
            vocabulary.clone(),
        )?,
        train_labels: labels(c.n_train)?,
        test: CountMatrix::new(c.n_terms, c.n_test, strip(test_entries), vocabulary)?,
        test_labels: labels(c.n_test)?,
        t,
        lambda,
        v,
    })
}
