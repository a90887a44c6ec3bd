//! Synthetic newsgroup-style corpora.
//!
//! Every token comes from one of three sources. The first is a Zipf
//! background shared by all documents. The second is one of the label
//! topics of the document's label. The third is one of a few nuisance
//! topics chosen per document, shared across labels. Labels come in pairs
//! whose topics draw half their words from a common pool, so neighbouring
//! groups are easy to confuse, much like related newsgroups.
//! Document lengths are log-normal.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Gamma, LogNormal};

use vbnmf_core::corpus::{CountEntry, CountMatrix, LabelVector};
use vbnmf_core::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct NewsgroupConfig {
    pub n_words: usize,
    pub n_labels: usize,
    pub topics_per_label: usize,
    pub nuisance_topics: usize,
    /// Nuisance topics mixed into each document.
    pub nuisance_per_doc: usize,
    /// Distinct words in each topic.
    pub topic_words: usize,
    pub zipf_exponent: f64,
    pub n_train: usize,
    pub n_test: usize,
    /// Median document length in tokens.
    pub median_length: f64,
    /// Standard deviation of the log length.
    pub length_sigma: f64,
    pub min_length: usize,
    /// Beta parameters of the per-document share of label tokens.
    pub label_share: (f64, f64),
    /// Beta parameters of the per-document share of nuisance tokens.
    pub nuisance_share: (f64, f64),
}

impl Default for NewsgroupConfig {
    fn default() -> Self {
        Self {
            n_words: 5000,
            n_labels: 4,
            topics_per_label: 3,
            nuisance_topics: 40,
            nuisance_per_doc: 3,
            topic_words: 60,
            zipf_exponent: 1.0,
            n_train: 2000,
            n_test: 1300,
            median_length: 120.0,
            length_sigma: 0.7,
            min_length: 10,
            label_share: (2.0, 8.0),
            nuisance_share: (3.0, 5.0),
        }
    }
}

/// Cumulative weights over word ids.
struct Topic {
    words: Vec<usize>,
    cumulative: Vec<f64>,
}

impl Topic {
    /// Zipf weights over `words` in the given order.
    fn zipf(words: Vec<usize>, exponent: f64) -> Self {
        let mut total = 0.0;
        let cumulative = (0..words.len())
            .map(|r| {
                total += (r as f64 + 1.0).powf(-exponent);
                total
            })
            .collect();
        Topic { words, cumulative }
    }

    fn draw(&self, rng: &mut impl Rng) -> usize {
        let total = *self.cumulative.last().expect("topic has words");
        let u = rng.random::<f64>() * total;
        let i = self
            .cumulative
            .partition_point(|&c| c <= u)
            .min(self.words.len() - 1);
        self.words[i]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCorpus {
    pub train: CountMatrix,
    pub train_labels: LabelVector,
    pub test: CountMatrix,
    pub test_labels: LabelVector,
}

fn invalid(message: &str) -> Error {
    Error::InvalidArgument(message.to_string())
}

fn bad<E>(_: E) -> Error {
    invalid("invalid distribution parameters")
}

fn random_subset(rng: &mut impl Rng, pool: &[usize], k: usize) -> Vec<usize> {
    sample(rng, pool.len(), k)
        .into_iter()
        .map(|i| pool[i])
        .collect()
}

/// Draws a corpus. Document `d` of either split has label `d mod L`.
pub fn sample_newsgroups(c: &NewsgroupConfig, seed: u64) -> Result<SyntheticCorpus> {
    if c.n_labels == 0 || c.topics_per_label == 0 || c.topic_words < 2 {
        return Err(invalid(
            "need labels, label topics and at least 2 words per topic",
        ));
    }
    if c.n_words < 2 * c.topic_words || c.nuisance_per_doc > c.nuisance_topics {
        return Err(invalid(
            "vocabulary too small or too many nuisance topics per document",
        ));
    }
    if c.n_train < c.n_labels || c.n_test < c.n_labels || c.min_length == 0 {
        return Err(invalid(
            "each split needs a document per label and documents need tokens",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all: Vec<usize> = (0..c.n_words).collect();
    let background = Topic::zipf(all.clone(), c.zipf_exponent);

    // Content words avoid the 100 most frequent background words.
    let content: Vec<usize> = all[100.min(c.n_words / 2)..].to_vec();
    let half = c.topic_words / 2;
    let n_groups = c.n_labels.div_ceil(2);
    let group_pools: Vec<Vec<usize>> = (0..n_groups)
        .map(|_| random_subset(&mut rng, &content, 4 * half))
        .collect();
    let label_topics: Vec<Vec<Topic>> = (0..c.n_labels)
        .map(|l| {
            (0..c.topics_per_label)
                .map(|_| {
                    let mut words = random_subset(&mut rng, &group_pools[l / 2], half);
                    words.extend(random_subset(&mut rng, &content, c.topic_words - half));
                    Topic::zipf(words, c.zipf_exponent)
                })
                .collect()
        })
        .collect();
    let nuisance: Vec<Topic> = (0..c.nuisance_topics)
        .map(|_| {
            Topic::zipf(
                random_subset(&mut rng, &content, c.topic_words),
                c.zipf_exponent,
            )
        })
        .collect();

    let length = LogNormal::new(c.median_length.ln(), c.length_sigma).map_err(bad)?;
    let label_share = Beta::new(c.label_share.0, c.label_share.1).map_err(bad)?;
    let nuisance_share = Beta::new(c.nuisance_share.0, c.nuisance_share.1).map_err(bad)?;
    let unit_gamma = Gamma::new(1.0, 1.0).map_err(bad)?;

    let mut draw_split = |n_docs: usize| -> Result<(CountMatrix, LabelVector)> {
        let mut entries = Vec::new();
        let mut counts = vec![0u64; c.n_words];
        for d in 0..n_docs {
            let label = d % c.n_labels;
            let n_tokens = (length.sample(&mut rng).round() as usize).max(c.min_length);
            let p_label = label_share.sample(&mut rng);
            let p_nuisance = nuisance_share.sample(&mut rng) * (1.0 - p_label);
            // Flat Dirichlet weights over the label's topics and the
            // document's nuisance topics.
            let mut dirichlet = |k: usize| -> Vec<f64> {
                let g: Vec<f64> = (0..k).map(|_| unit_gamma.sample(&mut rng)).collect();
                let s: f64 = g.iter().sum();
                g.iter().map(|x| x / s).collect()
            };
            let label_mix = dirichlet(c.topics_per_label);
            let nuisance_mix = dirichlet(c.nuisance_per_doc);
            let picked = sample(&mut rng, c.nuisance_topics, c.nuisance_per_doc).into_vec();
            for _ in 0..n_tokens {
                let u: f64 = rng.random();
                let w = if u < p_label {
                    let j = pick(&label_mix, rng.random());
                    label_topics[label][j].draw(&mut rng)
                } else if u < p_label + p_nuisance {
                    let j = pick(&nuisance_mix, rng.random());
                    nuisance[picked[j]].draw(&mut rng)
                } else {
                    background.draw(&mut rng)
                };
                counts[w] += 1;
            }
            for (term, count) in counts.iter_mut().enumerate() {
                if *count > 0 {
                    entries.push(CountEntry {
                        term,
                        doc: d,
                        count: *count,
                    });
                    *count = 0;
                }
            }
        }
        let vocabulary = (0..c.n_words).map(|i| format!("t{i:05}")).collect();
        let labels = LabelVector::new((0..n_docs).map(|d| d % c.n_labels).collect(), c.n_labels)?;
        Ok((
            CountMatrix::new(c.n_words, n_docs, entries, vocabulary)?,
            labels,
        ))
    };
    let (train, train_labels) = draw_split(c.n_train)?;
    let (test, test_labels) = draw_split(c.n_test)?;
    Ok(SyntheticCorpus {
        train,
        train_labels,
        test,
        test_labels,
    })
}

/// Index drawn from normalized weights with uniform variate `u`.
fn pick(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}
