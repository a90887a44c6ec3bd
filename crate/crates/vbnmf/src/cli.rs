//! Subcommands of the `vbnmf` binary.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use vbnmf::archive::{self, ArchivedModel};
use vbnmf::config::{Config, ConfigError, CorpusSettings, ExperimentConfig, ModelSettings};
use vbnmf::harness::{self, RESULTS_HEADER};
use vbnmf::io::{
    self, load_corpus, write_coordinates, write_corpus, write_sparse, write_vocabulary,
};
use vbnmf::pipeline::{
    evaluate_model, fit_model, prepare, project_documents, train_coordinates, Prepared,
};
use vbnmf::synth::{sample_newsgroups, NewsgroupConfig};
use vbnmf_core::eval::EvalReport;
use vbnmf_core::planted::{sample_planted, PlantedConfig};

/// Errors in how the program was invoked rather than in the data.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

/// Process exit status for an error: 1 for usage and configuration
/// problems, 2 for everything about the data.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 1;
        }
        if let Some(c) = cause.downcast_ref::<ConfigError>() {
            return if matches!(c, ConfigError::Io(_)) {
                2
            } else {
                1
            };
        }
    }
    2
}

#[derive(Parser, Debug)]
#[command(
    name = "vbnmf",
    version,
    about = "Supervised and unsupervised variational Bayesian NMF for document classification"
)]
pub struct Cli {
    /// Log progress to stderr (RUST_LOG takes precedence).
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Validate a corpus and write its TF-IDF features.
    Ingest {
        #[command(flatten)]
        common: Common,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a model on the training split and save it.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Archive to write.
        #[arg(long, default_value = "model.vbnmf")]
        model: PathBuf,
    },
    /// Write document coordinates under a saved model.
    Project {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "model.vbnmf")]
        model: PathBuf,
        #[arg(long, value_enum, default_value_t = Split::Test)]
        split: Split,
        /// Coordinates CSV to write.
        #[arg(long, default_value = "coordinates.csv")]
        out: PathBuf,
    },
    /// Classify the test split with k-NN against the training coordinates.
    Classify {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "model.vbnmf")]
        model: PathBuf,
        /// Predictions CSV to write.
        #[arg(long, default_value = "predictions.csv")]
        out: PathBuf,
    },
    /// Score a saved model on the test split.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "model.vbnmf")]
        model: PathBuf,
        /// Report CSV to write; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the configured sweep.
    Experiment {
        #[command(flatten)]
        common: Common,
        /// Output directory, overriding [experiment] output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic labelled corpus.
    Synth {
        #[arg(long, value_enum, default_value_t = SynthKind::Newsgroups)]
        kind: SynthKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Corpus directory to write.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        n_train: Option<usize>,
        #[arg(long)]
        n_test: Option<usize>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SynthKind {
    /// Zipf background, label topics and shared nuisance topics.
    Newsgroups,
    /// Draw from the supervised generative model.
    Planted,
}

/// Config file and the flags that override its entries.
#[derive(Args, Debug)]
pub struct Common {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Corpus directory ([corpus] dir).
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub vocab_cap: Option<usize>,
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub a_t: Option<f64>,
    #[arg(long)]
    pub a_v: Option<f64>,
    #[arg(long)]
    pub a_lambda: Option<f64>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Neighbors for k-NN (default round(sqrt(n_train))).
    #[arg(long)]
    pub k: Option<usize>,
}

impl Common {
    fn config(&self) -> Result<Config> {
        let mut c = match &self.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        if let Some(dir) = &self.corpus {
            let dir =
                std::path::absolute(dir).with_context(|| format!("resolving {}", dir.display()))?;
            c.set("corpus", "dir", &dir.to_string_lossy())?;
        }
        let overrides: [(&str, &str, Option<String>); 12] = [
            ("corpus", "vocab_cap", self.vocab_cap.map(|v| v.to_string())),
            ("model", "method", self.method.clone()),
            ("model", "rank", self.rank.map(|v| v.to_string())),
            ("model", "a_t", self.a_t.map(|v| v.to_string())),
            ("model", "a_v", self.a_v.map(|v| v.to_string())),
            ("model", "a_lambda", self.a_lambda.map(|v| v.to_string())),
            ("model", "burn_in", self.burn_in.map(|v| v.to_string())),
            ("model", "max_iters", self.max_iters.map(|v| v.to_string())),
            ("model", "tol", self.tol.map(|v| v.to_string())),
            ("model", "seed", self.seed.map(|v| v.to_string())),
            ("model", "k", self.k.map(|v| v.to_string())),
            ("experiment", "base_seed", self.seed.map(|v| v.to_string())),
        ];
        for (section, key, value) in overrides {
            if let Some(v) = value {
                c.set(section, key, &v)?;
            }
        }
        Ok(c)
    }

    fn settings(&self) -> Result<(Config, CorpusSettings, ModelSettings)> {
        let c = self.config()?;
        let corpus = CorpusSettings::from_config(&c)?;
        let model = ModelSettings::from_config(&c)?;
        Ok((c, corpus, model))
    }
}

fn load_prepared(corpus: &CorpusSettings) -> Result<Prepared> {
    let split = load_corpus(&corpus.paths).context("loading corpus")?;
    Ok(prepare(&split, corpus.vocab_cap)?)
}

fn load_model(path: &Path) -> Result<ArchivedModel> {
    archive::load(path).with_context(|| format!("loading model {}", path.display()))
}

fn threads() -> Result<usize> {
    match std::env::var("NMF_THREADS") {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => {
                Err(UsageError(format!("NMF_THREADS must be a positive integer, got {v:?}")).into())
            }
        },
    }
}

pub fn report_csv(report: &EvalReport) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    writeln!(
        out,
        "0,{},{},{},{},{},{},{},{},{},{},,ok",
        report.method,
        report.rank,
        opt(report.a_lambda),
        opt(report.a_v),
        report.seed,
        report.micro_accuracy,
        report.macro_accuracy,
        opt(report.coefficient_sparsity),
        opt(report.inter_label_sparsity),
        report.iterations,
    )
    .expect("write to String");
    out
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { common, out } => {
            let (_, corpus, _) = common.settings()?;
            let data = load_prepared(&corpus)?;
            write_vocabulary(&out.join("vocab.txt"), &data.train.vocabulary)?;
            write_sparse(&out.join("train_tfidf.tsv"), &data.train.values)?;
            write_sparse(&out.join("test_tfidf.tsv"), &data.test.values)?;
            println!(
                "{} terms kept, {} training and {} test documents, {} labels",
                data.train.n_terms(),
                data.train.n_docs(),
                data.test.n_docs(),
                data.n_labels()
            );
        }
        Command::Fit { common, model } => {
            let (_, corpus, settings) = common.settings()?;
            let data = load_prepared(&corpus)?;
            let fitted = fit_model(&data.train.values, &data.train_labels, &settings)?;
            archive::save(&model, &fitted)?;
            log::info!("wrote {}", model.display());
        }
        Command::Project {
            common,
            model,
            split,
            out,
        } => {
            let (_, corpus, settings) = common.settings()?;
            let data = load_prepared(&corpus)?;
            let m = load_model(&model)?;
            let (coords, ids) = match split {
                Split::Train => (train_coordinates(&m, &data.train.values)?, &data.train_ids),
                Split::Test => (
                    project_documents(&m, &data.test.values, &settings)?,
                    &data.test_ids,
                ),
            };
            write_coordinates(&out, &coords, ids)?;
        }
        Command::Classify { common, model, out } => {
            let (_, corpus, settings) = common.settings()?;
            let data = load_prepared(&corpus)?;
            let m = load_model(&model)?;
            let (_, knn) = evaluate_model(&m, &data, &settings)?;
            let mut csv = String::from("doc_id,predicted,label\n");
            for ((id, p), t) in data
                .test_ids
                .iter()
                .zip(&knn.predictions)
                .zip(data.test_labels.labels())
            {
                writeln!(csv, "{id},{p},{t}").expect("write to String");
            }
            io::write_file(&out, csv.as_bytes())?;
        }
        Command::Evaluate { common, model, out } => {
            let (_, corpus, settings) = common.settings()?;
            let data = load_prepared(&corpus)?;
            let m = load_model(&model)?;
            let (report, _) = evaluate_model(&m, &data, &settings)?;
            let csv = report_csv(&report);
            match out {
                Some(path) => io::write_file(&path, csv.as_bytes())?,
                None => print!("{csv}"),
            }
        }
        Command::Experiment { common, out } => {
            if common.config.is_none() {
                return Err(UsageError("experiment needs --config".into()).into());
            }
            let mut c = common.config()?;
            if let Some(dir) = out {
                let dir = std::path::absolute(&dir)
                    .with_context(|| format!("resolving {}", dir.display()))?;
                c.set("experiment", "output", &dir.to_string_lossy())?;
            }
            let cfg = ExperimentConfig::from_config(&c)?;
            let (sweep, outputs) = harness::run_experiment(&cfg, threads()?)?;
            println!(
                "{} runs, {} failed; wrote {}",
                sweep.rows.len(),
                sweep.failures(),
                outputs.results.display()
            );
        }
        Command::Synth {
            kind,
            seed,
            out,
            n_train,
            n_test,
        } => {
            let (train, train_labels, test, test_labels) = match kind {
                SynthKind::Newsgroups => {
                    let d = NewsgroupConfig::default();
                    let cfg = NewsgroupConfig {
                        n_train: n_train.unwrap_or(d.n_train),
                        n_test: n_test.unwrap_or(d.n_test),
                        ..d
                    };
                    let s = sample_newsgroups(&cfg, seed)?;
                    (s.train, s.train_labels, s.test, s.test_labels)
                }
                SynthKind::Planted => {
                    let d = PlantedConfig::default();
                    let cfg = PlantedConfig {
                        n_train: n_train.unwrap_or(d.n_train),
                        n_test: n_test.unwrap_or(d.n_test),
                        ..d
                    };
                    let s = sample_planted(&cfg, seed)?;
                    (s.train, s.train_labels, s.test, s.test_labels)
                }
            };
            write_corpus(&out, &train, &train_labels, &test, &test_labels)?;
        }
    }
    Ok(())
}
