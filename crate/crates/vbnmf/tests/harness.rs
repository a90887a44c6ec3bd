//! Sweeps run in-process on the bundled demo corpus.

use std::path::Path;

use vbnmf::config::{Config, ExperimentConfig, Method};
use vbnmf::harness::{plan, run_sweep, scatter_points, summarize};
use vbnmf::io::load_corpus;
use vbnmf::pipeline::prepare;
use vbnmf::stats::pearson;

fn config(extra: &str) -> ExperimentConfig {
    let demo = Path::new(env!("CARGO_MANIFEST_DIR")).join("demo");
    let text = format!(
        "[corpus]\ndir = corpus\nvocab_cap = 60\n[model]\nmax_iters = 30\n[experiment]\n\
         methods = supervised, vbnmf, pca\nranks = 3, 4\npca_ranks = 2\n\
         a_lambda_grid = 1, 10\na_v_grid = 1\nrestarts = 2\nbase_seed = 100\noutput = out\n{extra}"
    );
    ExperimentConfig::from_config(&Config::parse(&text, "test", &demo).unwrap()).unwrap()
}

#[test]
fn plan_covers_the_grid_once() {
    let cfg = config("");
    let specs = plan(&cfg);
    // 2 ranks × 2 shapes × 2 restarts + 2 ranks × 1 shape × 2 restarts + 1
    assert_eq!(specs.len(), 8 + 4 + 1);
    for (i, s) in specs.iter().enumerate() {
        assert_eq!(s.index, i);
        assert_eq!(s.seed, 100 + i as u64);
    }
    assert_eq!(specs.last().unwrap().method, Method::Pca);
}

#[test]
fn summary_agrees_with_rows() {
    let cfg = config("");
    let data = prepare(&load_corpus(&cfg.corpus.paths).unwrap(), 60).unwrap();
    let sweep = run_sweep(&cfg, &data, 3, None);
    assert_eq!(sweep.failures(), 0);
    assert_eq!(sweep.summary, summarize(&sweep.rows));
    let total: usize = sweep.summary.iter().map(|s| s.runs + s.failed).sum();
    assert_eq!(total, sweep.rows.len());
    for s in &sweep.summary {
        let micro: Vec<f64> = sweep
            .rows
            .iter()
            .filter(|r| {
                r.spec.method == s.method
                    && r.spec.rank == s.rank
                    && r.spec.a_lambda == s.a_lambda
                    && r.spec.a_v == s.a_v
            })
            .map(|r| r.outcome.as_ref().unwrap().micro_accuracy)
            .collect();
        assert_eq!(micro.len(), s.runs);
        let mean = micro.iter().sum::<f64>() / micro.len() as f64;
        assert!((mean - s.micro.mean).abs() < 1e-12);
        assert!(micro.iter().all(|&m| s.micro.min <= m && m <= s.micro.max));
        // Sparsity is only defined for the nonnegative factorizations.
        assert_eq!(
            s.mean_inter_label_sparsity.is_some(),
            s.method != Method::Pca
        );
    }
    // The scatter takes exactly the supervised runs.
    let points = scatter_points(&sweep.rows);
    assert_eq!(points.len(), 8);
    let x: Vec<f64> = points
        .iter()
        .map(|(_, r)| r.inter_label_sparsity.unwrap())
        .collect();
    let y: Vec<f64> = points.iter().map(|(_, r)| r.micro_accuracy).collect();
    let r = pearson(&x, &y);
    assert!(r.is_nan() || (-1.0..=1.0).contains(&r));
}

#[test]
fn failed_runs_are_kept_and_counted() {
    // PCA cannot keep more directions than there are terms.
    let cfg = config("pca_ranks = 2, 500\nmethods = pca\n");
    let data = prepare(&load_corpus(&cfg.corpus.paths).unwrap(), 60).unwrap();
    let sweep = run_sweep(&cfg, &data, 1, None);
    assert_eq!(sweep.rows.len(), 2);
    assert_eq!(sweep.failures(), 1);
    let failed = sweep.summary.iter().find(|s| s.rank == 500).unwrap();
    assert_eq!((failed.runs, failed.failed), (0, 1));
    assert!(failed.micro.mean.is_nan());
}
