//! Grid sweeps with random restarts and their CSV reports.
//!
//! Runs are enumerated in a fixed order (methods as configured, then rank,
//! then the shape grid of the method, then restart) and run `i` of the
//! sweep uses seed `base_seed + i`. PCA has no random initialization, so it
//! gets a single run per rank. Workers may finish in any order; every file
//! is written in plan order.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use vbnmf_core::eval::EvalReport;

use crate::archive::{self, ArchivedModel};
use crate::config::{ExperimentConfig, Method, ModelSettings};
use crate::io::{load_corpus, write_file, IoError};
use crate::pipeline::{evaluate_model, fit_model, prepare, Prepared};
use crate::stats::{pearson, spearman};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Core(#[from] vbnmf_core::Error),
    #[error("scatter needs at least 2 supervised runs with a sparsity score, found {0}")]
    InsufficientRows(usize),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

/// One point of the sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub index: usize,
    pub method: Method,
    pub rank: usize,
    pub a_lambda: Option<f64>,
    pub a_v: Option<f64>,
    pub restart: usize,
    pub seed: u64,
}

impl RunSpec {
    /// Directory name for the run's artifacts.
    pub fn id(&self) -> String {
        format!("{:04}-{}-r{}", self.index, self.method, self.rank)
    }

    pub fn settings(&self, base: &ModelSettings) -> ModelSettings {
        let mut s = base.clone();
        s.method = self.method;
        s.rank = self.rank;
        s.seed = self.seed;
        if let Some(a) = self.a_lambda {
            s.a_lambda = a;
        }
        if let Some(a) = self.a_v {
            s.a_v = a;
        }
        s
    }
}

/// Every run of the sweep, in canonical order.
pub fn plan(cfg: &ExperimentConfig) -> Vec<RunSpec> {
    let mut runs = Vec::new();
    let mut push = |method, rank, a_lambda, a_v, restart| {
        let index = runs.len();
        runs.push(RunSpec {
            index,
            method,
            rank,
            a_lambda,
            a_v,
            restart,
            seed: cfg.base_seed + index as u64,
        });
    };
    for &method in &cfg.methods {
        match method {
            Method::Supervised => {
                for &rank in &cfg.ranks {
                    for &a in &cfg.a_lambda_grid {
                        for r in 0..cfg.restarts {
                            push(method, rank, Some(a), None, r);
                        }
                    }
                }
            }
            Method::Vbnmf => {
                for &rank in &cfg.ranks {
                    for &a in &cfg.a_v_grid {
                        for r in 0..cfg.restarts {
                            push(method, rank, None, Some(a), r);
                        }
                    }
                }
            }
            Method::Pca => {
                for &rank in &cfg.pca_ranks {
                    push(method, rank, None, None, 0);
                }
            }
        }
    }
    runs
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRow {
    pub spec: RunSpec,
    pub outcome: std::result::Result<EvalReport, String>,
    pub wall_time_s: Option<f64>,
}

/// Statistics of one (method, rank, shape) group over its successful runs.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub rank: usize,
    pub a_lambda: Option<f64>,
    pub a_v: Option<f64>,
    pub runs: usize,
    pub failed: usize,
    pub micro: MinMeanMax,
    pub macro_: MinMeanMax,
    pub mean_coefficient_sparsity: Option<f64>,
    pub mean_inter_label_sparsity: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MinMeanMax {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

impl MinMeanMax {
    /// NaN everywhere for an empty slice.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self {
                min: f64::NAN,
                mean: f64::NAN,
                max: f64::NAN,
            };
        }
        Self {
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            mean: values.iter().sum::<f64>() / values.len() as f64,
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<RunRow>,
    pub summary: Vec<SummaryRow>,
}

impl SweepResult {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.outcome.is_err()).count()
    }

    pub fn reports(&self) -> impl Iterator<Item = &EvalReport> {
        self.rows.iter().filter_map(|r| r.outcome.as_ref().ok())
    }
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.collect::<Option<Vec<f64>>>()?;
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Groups rows by (method, rank, shape) in order of first appearance.
pub fn summarize(rows: &[RunRow]) -> Vec<SummaryRow> {
    let mut groups: Vec<(RunSpec, Vec<&RunRow>)> = Vec::new();
    for row in rows {
        let s = &row.spec;
        let found = groups.iter_mut().find(|(g, _)| {
            g.method == s.method && g.rank == s.rank && g.a_lambda == s.a_lambda && g.a_v == s.a_v
        });
        match found {
            Some((_, members)) => members.push(row),
            None => groups.push((s.clone(), vec![row])),
        }
    }
    groups
        .into_iter()
        .map(|(spec, members)| {
            let ok: Vec<&EvalReport> = members
                .iter()
                .filter_map(|r| r.outcome.as_ref().ok())
                .collect();
            let micro: Vec<f64> = ok.iter().map(|r| r.micro_accuracy).collect();
            let macro_: Vec<f64> = ok.iter().map(|r| r.macro_accuracy).collect();
            SummaryRow {
                method: spec.method,
                rank: spec.rank,
                a_lambda: spec.a_lambda,
                a_v: spec.a_v,
                runs: ok.len(),
                failed: members.len() - ok.len(),
                micro: MinMeanMax::of(&micro),
                macro_: MinMeanMax::of(&macro_),
                mean_coefficient_sparsity: mean_of(ok.iter().map(|r| r.coefficient_sparsity)),
                mean_inter_label_sparsity: mean_of(ok.iter().map(|r| r.inter_label_sparsity)),
            }
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Quotes a CSV field when it contains a separator, quote or newline.
fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub const RESULTS_HEADER: &str = "run,method,rank,a_lambda,a_v,seed,micro,macro,coeff_sparsity,inter_label_sparsity,iterations,wall_time_s,status";

pub fn results_csv(rows: &[RunRow]) -> String {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for row in rows {
        let s = &row.spec;
        let wall = opt(row.wall_time_s);
        match &row.outcome {
            Ok(r) => writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},ok",
                s.index,
                s.method,
                s.rank,
                opt(s.a_lambda),
                opt(s.a_v),
                s.seed,
                r.micro_accuracy,
                r.macro_accuracy,
                opt(r.coefficient_sparsity),
                opt(r.inter_label_sparsity),
                r.iterations,
                wall,
            ),
            Err(e) => writeln!(
                out,
                "{},{},{},{},{},{},,,,,,{},{}",
                s.index,
                s.method,
                s.rank,
                opt(s.a_lambda),
                opt(s.a_v),
                s.seed,
                wall,
                csv_field(&format!("failed: {e}")),
            ),
        }
        .expect("write to String");
    }
    out
}

pub fn summary_csv(summary: &[SummaryRow]) -> String {
    let mut out = String::from(
        "method,rank,a_lambda,a_v,runs,failed,micro_mean,micro_min,micro_max,macro_mean,macro_min,macro_max,coeff_sparsity_mean,inter_label_sparsity_mean\n",
    );
    for g in summary {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            g.method,
            g.rank,
            opt(g.a_lambda),
            opt(g.a_v),
            g.runs,
            g.failed,
            g.micro.mean,
            g.micro.min,
            g.micro.max,
            g.macro_.mean,
            g.macro_.min,
            g.macro_.max,
            opt(g.mean_coefficient_sparsity),
            opt(g.mean_inter_label_sparsity),
        )
        .expect("write to String");
    }
    out
}

/// Points of the sparsity/accuracy scatter: successful supervised runs
/// with an inter-label sparsity score.
pub fn scatter_points(rows: &[RunRow]) -> Vec<(&RunSpec, &EvalReport)> {
    rows.iter()
        .filter(|r| r.spec.method == Method::Supervised)
        .filter_map(|r| r.outcome.as_ref().ok().map(|rep| (&r.spec, rep)))
        .filter(|(_, rep)| rep.inter_label_sparsity.is_some())
        .collect()
}

fn fmt_corr(c: f64) -> String {
    if c.is_nan() {
        "nan".into()
    } else {
        c.to_string()
    }
}

/// Scatter CSV with the Pearson and Spearman coefficients in trailing
/// comment lines.
pub fn scatter_csv(rows: &[RunRow]) -> Result<String> {
    let points = scatter_points(rows);
    if points.len() < 2 {
        return Err(HarnessError::InsufficientRows(points.len()));
    }
    let sparsity: Vec<f64> = points
        .iter()
        .map(|(_, r)| r.inter_label_sparsity.unwrap_or(f64::NAN))
        .collect();
    let micro: Vec<f64> = points.iter().map(|(_, r)| r.micro_accuracy).collect();
    let mut out = String::from("inter_label_sparsity,micro_accuracy,rank,seed,a_lambda\n");
    for ((spec, _), (s, m)) in points.iter().zip(sparsity.iter().zip(&micro)) {
        writeln!(
            out,
            "{s},{m},{},{},{}",
            spec.rank,
            spec.seed,
            opt(spec.a_lambda)
        )
        .expect("write to String");
    }
    writeln!(out, "# pearson={}", fmt_corr(pearson(&sparsity, &micro))).expect("write to String");
    writeln!(out, "# spearman={}", fmt_corr(spearman(&sparsity, &micro))).expect("write to String");
    Ok(out)
}

pub fn emit_scatter(path: &Path, rows: &[RunRow]) -> Result<()> {
    Ok(write_file(path, scatter_csv(rows)?.as_bytes())?)
}

pub fn bound_trace_csv(trace: &[f64]) -> String {
    let mut out = String::from("iteration,bound\n");
    for (i, b) in trace.iter().enumerate() {
        writeln!(out, "{},{b}", i + 1).expect("write to String");
    }
    out
}

fn bound_trace(model: &ArchivedModel) -> &[f64] {
    match model {
        ArchivedModel::Vbnmf(m) => &m.bound_trace,
        ArchivedModel::Supervised(m) => &m.bound_trace,
        ArchivedModel::Pca(_) => &[],
    }
}

/// Fits, evaluates and stores one run. Artifact write failures count as
/// run failures.
fn execute(
    spec: &RunSpec,
    cfg: &ExperimentConfig,
    data: &Prepared,
    out_dir: Option<&Path>,
) -> RunRow {
    let started = Instant::now();
    let settings = spec.settings(&cfg.model);
    let outcome = (|| -> std::result::Result<EvalReport, String> {
        let model = fit_model(&data.train.values, &data.train_labels, &settings)
            .map_err(|e| e.to_string())?;
        let (report, knn) = evaluate_model(&model, data, &settings).map_err(|e| e.to_string())?;
        if !knn.warnings.is_empty() {
            log::warn!(
                "run {}: {} training and {} test documents have all-zero coordinates",
                spec.id(),
                knn.warnings.zero_train.len(),
                knn.warnings.zero_test.len()
            );
        }
        if let Some(dir) = out_dir {
            let run_dir = dir.join("runs").join(spec.id());
            write_file(
                &run_dir.join("bound_trace.csv"),
                bound_trace_csv(bound_trace(&model)).as_bytes(),
            )
            .map_err(|e| e.to_string())?;
            if cfg.save_models {
                archive::save(&run_dir.join("model.vbnmf"), &model).map_err(|e| e.to_string())?;
            }
        }
        Ok(report)
    })();
    match &outcome {
        Ok(r) => log::info!(
            "run {} micro={:.4} macro={:.4}",
            spec.id(),
            r.micro_accuracy,
            r.macro_accuracy
        ),
        Err(e) => log::warn!("run {} failed: {e}", spec.id()),
    }
    RunRow {
        spec: spec.clone(),
        outcome,
        wall_time_s: cfg
            .record_wall_time
            .then(|| started.elapsed().as_secs_f64()),
    }
}

/// Runs the sweep on already prepared features. With `out_dir`, per-run
/// artifacts go to `out_dir/runs/<id>/`.
pub fn run_sweep(
    cfg: &ExperimentConfig,
    data: &Prepared,
    threads: usize,
    out_dir: Option<&Path>,
) -> SweepResult {
    let specs = plan(cfg);
    let slots: Mutex<Vec<Option<RunRow>>> = Mutex::new(vec![None; specs.len()]);
    let next = AtomicUsize::new(0);
    let worker = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        let Some(spec) = specs.get(i) else { break };
        let row = execute(spec, cfg, data, out_dir);
        slots.lock().expect("worker panicked")[i] = Some(row);
    };
    let threads = threads.clamp(1, specs.len().max(1));
    if threads == 1 {
        worker();
    } else {
        std::thread::scope(|scope| {
            for _ in 0..threads {
                scope.spawn(worker);
            }
        });
    }
    let rows: Vec<RunRow> = slots
        .into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|r| r.expect("every planned run executed"))
        .collect();
    let summary = summarize(&rows);
    SweepResult { rows, summary }
}

/// Files written by [`run_experiment`].
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOutputs {
    pub results: PathBuf,
    pub summary: PathBuf,
    /// Absent when the sweep has fewer than two supervised scores.
    pub scatter: Option<PathBuf>,
}

/// Loads the corpus, runs the sweep and writes `results.csv`,
/// `summary.csv`, `scatter.csv` and the per-run artifacts to the output
/// directory.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    threads: usize,
) -> Result<(SweepResult, ExperimentOutputs)> {
    let corpus = load_corpus(&cfg.corpus.paths)?;
    let data = prepare(&corpus, cfg.corpus.vocab_cap)?;
    log::info!(
        "prepared {} terms, {} training and {} test documents",
        data.train.n_terms(),
        data.train.n_docs(),
        data.test.n_docs()
    );
    let sweep = run_sweep(cfg, &data, threads, Some(&cfg.output));
    let outputs = write_reports(&cfg.output, &sweep)?;
    Ok((sweep, outputs))
}

pub fn write_reports(dir: &Path, sweep: &SweepResult) -> Result<ExperimentOutputs> {
    let results = dir.join("results.csv");
    write_file(&results, results_csv(&sweep.rows).as_bytes())?;
    let summary = dir.join("summary.csv");
    write_file(&summary, summary_csv(&sweep.summary).as_bytes())?;
    let scatter_path = dir.join("scatter.csv");
    let scatter = match emit_scatter(&scatter_path, &sweep.rows) {
        Ok(()) => Some(scatter_path),
        Err(HarnessError::InsufficientRows(n)) => {
            log::warn!("scatter.csv not written: {n} supervised scores");
            None
        }
        Err(e) => return Err(e),
    };
    Ok(ExperimentOutputs {
        results,
        summary,
        scatter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{half_decade_grid, CorpusSettings};
    use crate::io::CorpusPaths;

    fn config() -> ExperimentConfig {
        ExperimentConfig {
            corpus: CorpusSettings {
                paths: CorpusPaths::in_dir(Path::new("unused")),
                vocab_cap: 100,
            },
            model: ModelSettings::default(),
            methods: vec![Method::Supervised, Method::Pca, Method::Vbnmf],
            ranks: vec![2, 3],
            pca_ranks: vec![4],
            a_lambda_grid: half_decade_grid(0, 2),
            a_v_grid: vec![0.5],
            restarts: 2,
            base_seed: 100,
            output: PathBuf::from("unused"),
            record_wall_time: false,
            save_models: false,
        }
    }

    #[test]
    fn plan_order_and_seeds() {
        let p = plan(&config());
        assert_eq!(p.len(), 2 * 3 * 2 + 1 + 2 * 2);
        assert!(p
            .iter()
            .enumerate()
            .all(|(i, s)| s.index == i && s.seed == 100 + i as u64));
        assert_eq!((p[0].rank, p[0].a_lambda, p[0].restart), (2, Some(1.0), 0));
        assert_eq!((p[1].rank, p[1].a_lambda, p[1].restart), (2, Some(1.0), 1));
        assert_eq!(p[2].a_lambda, Some(10f64.sqrt()));
        assert_eq!(p[6].rank, 3);
        assert_eq!((p[12].method, p[12].rank), (Method::Pca, 4));
        assert_eq!((p[13].method, p[13].a_v), (Method::Vbnmf, Some(0.5)));
    }

    #[test]
    fn single_point_gives_single_run() {
        let mut c = config();
        c.methods = vec![Method::Supervised];
        c.ranks = vec![5];
        c.a_lambda_grid = vec![3.0];
        c.restarts = 1;
        assert_eq!(plan(&c).len(), 1);
    }

    fn row(index: usize, a: f64, micro: f64, sparsity: Option<f64>) -> RunRow {
        RunRow {
            spec: RunSpec {
                index,
                method: Method::Supervised,
                rank: 2,
                a_lambda: Some(a),
                a_v: None,
                restart: 0,
                seed: index as u64,
            },
            outcome: Ok(EvalReport {
                method: "supervised".into(),
                rank: 2,
                a_lambda: Some(a),
                a_v: None,
                seed: index as u64,
                micro_accuracy: micro,
                macro_accuracy: micro / 2.0,
                coefficient_sparsity: sparsity,
                inter_label_sparsity: sparsity,
                correct: vec![],
                total: vec![],
                iterations: 3,
            }),
            wall_time_s: None,
        }
    }

    #[test]
    fn summary_groups_and_skips_failures() {
        let mut rows = vec![
            row(0, 1.0, 0.5, Some(0.2)),
            row(1, 1.0, 0.7, Some(0.4)),
            row(2, 2.0, 0.9, None),
        ];
        let mut failed = row(3, 1.0, 0.0, None);
        failed.outcome = Err("boom, twice".into());
        rows.push(failed);
        let s = summarize(&rows);
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].runs, s[0].failed), (2, 1));
        assert_eq!(
            s[0].micro,
            MinMeanMax {
                min: 0.5,
                mean: 0.6,
                max: 0.7
            }
        );
        assert!((s[0].mean_inter_label_sparsity.unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(s[1].mean_inter_label_sparsity, None);
        let csv = results_csv(&rows);
        assert!(csv.ends_with("3,supervised,2,1,,3,,,,,,,\"failed: boom, twice\"\n"));
    }

    #[test]
    fn scatter_footer() {
        let rows = vec![row(0, 1.0, 0.5, Some(0.2)), row(1, 1.0, 0.5, Some(0.2))];
        let csv = scatter_csv(&rows).unwrap();
        assert!(csv.ends_with("# pearson=nan\n# spearman=nan\n"));
        let rows = vec![
            row(0, 1.0, 0.5, Some(0.25)),
            row(1, 1.0, 0.75, Some(0.5)),
            row(2, 1.0, 1.0, Some(0.75)),
        ];
        assert!(scatter_csv(&rows).unwrap().contains("# pearson=1\n"));
        assert!(matches!(
            scatter_csv(&rows[..1]),
            Err(HarnessError::InsufficientRows(1))
        ));
    }
}
