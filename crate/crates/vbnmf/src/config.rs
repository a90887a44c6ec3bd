//! Configuration files: `key = value` lines grouped under `[section]`
//! headers, `#` comments. Relative paths are resolved against the
//! directory of the file they appear in.
//!
//! ```text
//! [corpus]
//! dir = data/demo        # counts.tsv, vocab.txt, labels.tsv, train.txt, test.txt
//! vocab_cap = 2000
//!
//! [model]
//! method = supervised
//! rank = 40
//! a_lambda = 10
//!
//! [experiment]
//! methods = supervised, vbnmf
//! ranks = 20, 40
//! restarts = 5
//! output = results
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::io::{read_text, CorpusPaths};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{origin}:{line}: {message}")]
    Syntax {
        origin: String,
        line: usize,
        message: String,
    },
    #[error("unknown key `{key}` in section [{section}]")]
    UnknownKey { section: String, key: String },
    #[error("[{section}] {key}: {message}")]
    Value {
        section: String,
        key: String,
        message: String,
    },
    #[error("missing [{section}] {key}")]
    Missing { section: String, key: String },
    #[error(transparent)]
    Io(#[from] crate::io::IoError),
}

pub type Result<T> = std::result::Result<T, ConfigError>;

const KNOWN: &[(&str, &[&str])] = &[
    (
        "corpus",
        &[
            "dir",
            "counts",
            "vocab",
            "labels",
            "train",
            "test",
            "vocab_cap",
        ],
    ),
    (
        "model",
        &[
            "method",
            "rank",
            "a_t",
            "a_v",
            "a_lambda",
            "burn_in",
            "max_iters",
            "tol",
            "seed",
            "k",
        ],
    ),
    (
        "experiment",
        &[
            "methods",
            "ranks",
            "pca_ranks",
            "a_lambda_grid",
            "a_v_grid",
            "restarts",
            "base_seed",
            "output",
            "record_wall_time",
            "save_models",
        ],
    ),
];

/// Raw key/value pairs by section.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    sections: BTreeMap<String, BTreeMap<String, String>>,
    base_dir: PathBuf,
}

impl Config {
    pub fn parse(text: &str, origin: &str, base_dir: &Path) -> Result<Self> {
        let mut config = Config {
            sections: BTreeMap::new(),
            base_dir: base_dir.to_path_buf(),
        };
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let syntax = |message: String| ConfigError::Syntax {
                origin: origin.to_string(),
                line: i + 1,
                message,
            };
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| syntax(format!("unterminated section header {line:?}")))?
                    .trim();
                if !KNOWN.iter().any(|(s, _)| *s == name) {
                    return Err(syntax(format!("unknown section [{name}]")));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| syntax(format!("expected `key = value`, found {line:?}")))?;
            let section = section
                .clone()
                .ok_or_else(|| syntax("key outside any section".into()))?;
            config.set(&section, key.trim(), value.trim())?;
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        Self::parse(&text, &path.display().to_string(), &base)
    }

    /// Sets a value as if it appeared in the file; used for command-line
    /// overrides.
    pub fn set(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        let known = KNOWN
            .iter()
            .find(|(s, _)| *s == section)
            .is_some_and(|(_, keys)| keys.contains(&key));
        if !known {
            return Err(ConfigError::UnknownKey {
                section: section.into(),
                key: key.into(),
            });
        }
        self.sections
            .entry(section.to_string())
            .or_default()
            .insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn raw(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section)?.get(key).map(String::as_str)
    }

    fn value_err(section: &str, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::Value {
            section: section.into(),
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn get<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>> {
        match self.raw(section, key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| Self::value_err(section, key, format!("cannot parse {raw:?}"))),
        }
    }

    pub fn get_or<T: FromStr>(&self, section: &str, key: &str, default: T) -> Result<T> {
        Ok(self.get(section, key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, section: &str, key: &str) -> Result<T> {
        self.get(section, key)?.ok_or_else(|| ConfigError::Missing {
            section: section.into(),
            key: key.into(),
        })
    }

    pub fn list<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<Vec<T>>> {
        let Some(raw) = self.raw(section, key) else {
            return Ok(None);
        };
        let items = raw
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|_| Self::value_err(section, key, format!("cannot parse item {s:?}")))
            })
            .collect::<Result<Vec<T>>>()?;
        if items.is_empty() {
            return Err(Self::value_err(section, key, "list is empty"));
        }
        Ok(Some(items))
    }

    pub fn path(&self, section: &str, key: &str) -> Option<PathBuf> {
        self.raw(section, key).map(|p| self.base_dir.join(p))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Supervised,
    Vbnmf,
    Pca,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Supervised => "supervised",
            Method::Vbnmf => "vbnmf",
            Method::Pca => "pca",
        })
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "supervised" => Ok(Method::Supervised),
            "vbnmf" | "unsupervised" => Ok(Method::Vbnmf),
            "pca" => Ok(Method::Pca),
            other => Err(format!("unknown method {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusSettings {
    pub paths: CorpusPaths,
    /// Terms kept after TF-IDF pruning.
    pub vocab_cap: usize,
}

impl CorpusSettings {
    pub fn from_config(c: &Config) -> Result<Self> {
        let dir = c.path("corpus", "dir");
        let pick = |key: &str, file: &str| -> Result<PathBuf> {
            c.path("corpus", key)
                .or_else(|| dir.as_ref().map(|d| d.join(file)))
                .ok_or_else(|| ConfigError::Missing {
                    section: "corpus".into(),
                    key: key.into(),
                })
        };
        let paths = CorpusPaths {
            counts: pick("counts", "counts.tsv")?,
            vocabulary: pick("vocab", "vocab.txt")?,
            labels: pick("labels", "labels.tsv")?,
            train: pick("train", "train.txt")?,
            test: pick("test", "test.txt")?,
        };
        let vocab_cap = c.get_or("corpus", "vocab_cap", 10_000usize)?;
        if vocab_cap == 0 {
            return Err(Config::value_err(
                "corpus",
                "vocab_cap",
                "must be at least 1",
            ));
        }
        Ok(Self { paths, vocab_cap })
    }
}

/// Settings for a single fit.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSettings {
    pub method: Method,
    pub rank: usize,
    pub a_t: f64,
    pub a_v: f64,
    pub a_lambda: f64,
    pub burn_in: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
    /// Neighbors for classification; `round(√n_train)` when absent.
    pub k: Option<usize>,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self {
            method: Method::Supervised,
            rank: 10,
            a_t: 1.0,
            a_v: 1.0,
            a_lambda: 1.0,
            burn_in: 10,
            max_iters: 200,
            tol: 1e-6,
            seed: 0,
            k: None,
        }
    }
}

fn positive(section: &str, key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Config::value_err(
            section,
            key,
            "must be positive and finite",
        ))
    }
}

impl ModelSettings {
    pub fn from_config(c: &Config) -> Result<Self> {
        let d = ModelSettings::default();
        let s = "model";
        let rank = c.get_or(s, "rank", d.rank)?;
        if rank == 0 {
            return Err(Config::value_err(s, "rank", "must be at least 1"));
        }
        let k = c.get::<usize>(s, "k")?;
        if k == Some(0) {
            return Err(Config::value_err(s, "k", "must be at least 1"));
        }
        let tol: f64 = c.get_or(s, "tol", d.tol)?;
        if tol.is_nan() || tol < 0.0 {
            return Err(Config::value_err(s, "tol", "must be nonnegative"));
        }
        Ok(Self {
            method: c.get_or(s, "method", d.method)?,
            rank,
            a_t: positive(s, "a_t", c.get_or(s, "a_t", d.a_t)?)?,
            a_v: positive(s, "a_v", c.get_or(s, "a_v", d.a_v)?)?,
            a_lambda: positive(s, "a_lambda", c.get_or(s, "a_lambda", d.a_lambda)?)?,
            burn_in: c.get_or(s, "burn_in", d.burn_in)?,
            max_iters: c.get_or(s, "max_iters", d.max_iters)?,
            tol,
            seed: c.get_or(s, "seed", d.seed)?,
            k,
        })
    }
}

/// Log-spaced grid `10^(lo/2), 10^((lo+1)/2), …, 10^(hi/2)`.
pub fn half_decade_grid(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|k| 10f64.powf(k as f64 / 2.0)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub corpus: CorpusSettings,
    /// Shared fit settings (`a_t`, `burn_in`, `max_iters`, `tol`, `k`); the
    /// swept fields are ignored.
    pub model: ModelSettings,
    pub methods: Vec<Method>,
    /// Ranks for the two factorizations.
    pub ranks: Vec<usize>,
    pub pca_ranks: Vec<usize>,
    pub a_lambda_grid: Vec<f64>,
    pub a_v_grid: Vec<f64>,
    pub restarts: usize,
    pub base_seed: u64,
    pub output: PathBuf,
    /// Fill the `wall_time_s` column. Off by default so that repeated runs
    /// write identical files.
    pub record_wall_time: bool,
    pub save_models: bool,
}

impl ExperimentConfig {
    pub fn from_config(c: &Config) -> Result<Self> {
        let s = "experiment";
        let grid = |key: &str, default: Vec<f64>| -> Result<Vec<f64>> {
            let g = c.list(s, key)?.unwrap_or(default);
            for &v in &g {
                positive(s, key, v)?;
            }
            Ok(g)
        };
        let ranks = |key: &str, default: Vec<usize>| -> Result<Vec<usize>> {
            let r = c.list(s, key)?.unwrap_or(default);
            if r.contains(&0) {
                return Err(Config::value_err(s, key, "ranks must be at least 1"));
            }
            Ok(r)
        };
        let restarts = c.get_or(s, "restarts", 10usize)?;
        if restarts == 0 {
            return Err(Config::value_err(s, "restarts", "must be at least 1"));
        }
        Ok(Self {
            corpus: CorpusSettings::from_config(c)?,
            model: ModelSettings::from_config(c)?,
            methods: c
                .list(s, "methods")?
                .unwrap_or_else(|| vec![Method::Supervised, Method::Vbnmf, Method::Pca]),
            ranks: ranks("ranks", vec![10, 20, 40])?,
            pca_ranks: ranks("pca_ranks", vec![20, 60, 100, 200])?,
            a_lambda_grid: grid("a_lambda_grid", half_decade_grid(-2, 6))?,
            a_v_grid: grid("a_v_grid", vec![0.1, 0.5, 1.0])?,
            restarts,
            base_seed: c.get_or(s, "base_seed", 0u64)?,
            output: c.path(s, "output").ok_or_else(|| ConfigError::Missing {
                section: s.into(),
                key: "output".into(),
            })?,
            record_wall_time: c.get_or(s, "record_wall_time", false)?,
            save_models: c.get_or(s, "save_models", true)?,
        })
    }
}
