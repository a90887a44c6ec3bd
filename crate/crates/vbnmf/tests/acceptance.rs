//! Acceptance checks. Prints one PASS/FAIL line per criterion.
//!
//! Failing criteria are reported without failing the test binary; set
//! `ACCEPTANCE_STRICT=1` to exit non-zero when any criterion fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vbnmf::config::{Config, ExperimentConfig, Method, ModelSettings};
use vbnmf::harness::{run_experiment, scatter_points, SweepResult};
use vbnmf::io::{write_corpus, SplitCorpus};
use vbnmf::pipeline::{evaluate_model, fit_model, prepare};
use vbnmf::stats::{pearson, spearman};
use vbnmf::synth::{sample_newsgroups, NewsgroupConfig};
use vbnmf_core::corpus::LabelVector;
use vbnmf_core::eval::{
    inter_label_sparsity, knn_classify, label_aggregate, macro_accuracy, micro_accuracy,
};
use vbnmf_core::numerics::{digamma, hoyer_sparsity, ln_gamma};
use vbnmf_core::planted::{sample_planted, PlantedConfig};
use vbnmf_core::supervised::{fit_supervised, SupervisedHyper};
use vbnmf_core::vbnmf::{e_step_sums, fit, FitConfig, VbnmfHyper};
use vbnmf_core::{Matrix, SparseMatrix};

struct Outcome {
    pass: bool,
    detail: String,
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> (Outcome, Duration, bool) {
    let start = Instant::now();
    let o = f();
    let elapsed = start.elapsed();
    let in_time = limit.is_none_or(|l| elapsed < l);
    (o, elapsed, in_time)
}

fn report(id: usize, name: &str, limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let (o, elapsed, in_time) = timed(limit, f);
    let pass = o.pass && in_time;
    let time = match limit {
        Some(l) => format!("{:.1} s (limit {} s)", elapsed.as_secs_f64(), l.as_secs()),
        None => format!("{:.1} s", elapsed.as_secs_f64()),
    };
    println!(
        "{} C{id} {name}: {}; {time}",
        if pass { "PASS" } else { "FAIL" },
        o.detail
    );
    pass
}

fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> SparseMatrix {
    let dense = Matrix::from_fn(rows, cols, |_, _| {
        if rng.random::<f64>() < 0.3 {
            0.0
        } else {
            10.0 * rng.random::<f64>()
        }
    });
    SparseMatrix::from_dense(&dense)
}

/// Largest relative decrease between consecutive bounds.
fn worst_decrease(trace: &[f64]) -> f64 {
    trace
        .windows(2)
        .map(|w| (w[0] - w[1]) / w[0].abs().max(1.0))
        .fold(f64::NEG_INFINITY, f64::max)
}

fn c1_monotone() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let cfg = FitConfig::new(10).with_max_iters(50).with_tol(0.0);
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_matrix(50, 200, &mut rng);
        let labels = LabelVector::from_ids((0..200).map(|d| d % 4).collect()).unwrap();
        let un = fit(&x, VbnmfHyper::default(), &cfg.with_seed(seed)).unwrap();
        worst = worst.max(worst_decrease(&un.bound_trace));
        let hyper = SupervisedHyper::default();
        let sup = fit_supervised(&x, &labels, hyper, &cfg.with_seed(seed)).unwrap();
        // The rates become random variables after burn-in, which changes the
        // objective; each regime is checked on its own.
        let (fixed, free) = sup.bound_trace.split_at(hyper.burn_in);
        worst = worst.max(worst_decrease(fixed)).max(worst_decrease(free));
        if un.bound_trace.len() != 50 || sup.bound_trace.len() != 50 {
            return Outcome {
                pass: false,
                detail: "fit stopped before 50 iterations".into(),
            };
        }
    }
    Outcome {
        pass: worst <= 1e-9,
        detail: format!("worst relative bound decrease {worst:.2e} over 10 fits (tol 1e-9)"),
    }
}

fn c2_conservation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (terms, docs, rank) = (
            rng.random_range(1..60),
            rng.random_range(1..60),
            rng.random_range(1..12),
        );
        let x = random_matrix(terms, docs, &mut rng);
        let lt = Matrix::from_fn(terms, rank, |_, _| rng.random_range(-20.0..20.0));
        let lv = Matrix::from_fn(rank, docs, |_, _| rng.random_range(-20.0..20.0));
        let (st, sv) = e_step_sums(&x, &lt, &lv).unwrap();
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
        for (a, b) in st.row_sums().iter().zip(x.row_sums()) {
            worst = worst.max(rel(*a, b));
        }
        for (a, b) in sv.col_sums().iter().zip(x.col_sums()) {
            worst = worst.max(rel(*a, b));
        }
    }
    Outcome {
        pass: worst <= 1e-12,
        detail: format!("worst relative marginal error {worst:.2e} on 100 instances (tol 1e-12)"),
    }
}

fn planted_split(seed: u64) -> SplitCorpus {
    let c = PlantedConfig::default();
    let p = sample_planted(&c, seed).unwrap();
    SplitCorpus {
        train: p.train,
        train_labels: p.train_labels,
        test: p.test,
        test_labels: p.test_labels,
        train_ids: (0..c.n_train).collect(),
        test_ids: (c.n_train..c.n_train + c.n_test).collect(),
    }
}

/// Supervised fit on a planted corpus through the standard pipeline:
/// (micro accuracy, inter-label sparsity).
fn planted_run(seed: u64, a_lambda: f64) -> (f64, f64) {
    let data = prepare(&planted_split(seed), PlantedConfig::default().n_terms).unwrap();
    let s = ModelSettings {
        method: Method::Supervised,
        rank: PlantedConfig::default().n_components,
        a_lambda,
        seed,
        ..ModelSettings::default()
    };
    let model = fit_model(&data.train.values, &data.train_labels, &s).unwrap();
    let (r, _) = evaluate_model(&model, &data, &s).unwrap();
    (r.micro_accuracy, r.inter_label_sparsity.unwrap())
}

fn c3_planted() -> Outcome {
    let runs: Vec<(f64, f64)> = (0..5).map(|seed| planted_run(seed, 1.0)).collect();
    let good = runs.iter().filter(|(m, s)| *m >= 0.9 && *s >= 0.6).count();
    let list: Vec<String> = runs.iter().map(|(m, s)| format!("{m:.3}/{s:.3}")).collect();
    Outcome {
        pass: good >= 4,
        detail: format!(
            "{good}/5 seeds reach micro >= 0.9 and inter-label sparsity >= 0.6 (micro/sparsity: {})",
            list.join(" ")
        ),
    }
}

fn c5_sparsity_control() -> Outcome {
    let grid = [0.1, 1.0, 10.0, 100.0];
    let means: Vec<f64> = grid
        .iter()
        .map(|&a| (0..5).map(|seed| planted_run(seed, a).1).sum::<f64>() / 5.0)
        .collect();
    let logs: Vec<f64> = grid.iter().map(|a: &f64| a.log10()).collect();
    let rho = spearman(&logs, &means);
    let list: Vec<String> = means.iter().map(|m| format!("{m:.3}")).collect();
    Outcome {
        pass: rho >= 0.8,
        detail: format!(
            "Spearman {rho:.3} (need >= 0.8); mean sparsity at a = 0.1, 1, 10, 100: {}",
            list.join(", ")
        ),
    }
}

fn newsgroup_sweep(dir: &Path, corpus: &Path, body: &str) -> SweepResult {
    let text = format!(
        "[corpus]\ndir = {}\nvocab_cap = 2000\n[model]\nmax_iters = 200\ntol = 1e-6\nburn_in = 10\n\
         [experiment]\noutput = {}\nbase_seed = 0\n{body}",
        corpus.display(),
        dir.display()
    );
    let cfg =
        ExperimentConfig::from_config(&Config::parse(&text, "acceptance", dir).unwrap()).unwrap();
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    run_experiment(&cfg, threads).unwrap().0
}

struct Sweeps {
    main: SweepResult,
    extra: SweepResult,
}

fn run_newsgroup_sweeps(tmp: &Path) -> Sweeps {
    let s = sample_newsgroups(&NewsgroupConfig::default(), 0).unwrap();
    let corpus = tmp.join("corpus");
    write_corpus(&corpus, &s.train, &s.train_labels, &s.test, &s.test_labels).unwrap();
    let main = newsgroup_sweep(
        &tmp.join("rank40"),
        &corpus,
        "methods = supervised, vbnmf\nranks = 40\na_lambda_grid = 0.1, 1, 10, 100, 1000\na_v_grid = 0.1, 0.5, 1\nrestarts = 5\n",
    );
    let extra = newsgroup_sweep(
        &tmp.join("rank20"),
        &corpus,
        "methods = supervised\nranks = 20\na_lambda_grid = 0.1, 1, 10, 100, 1000\nrestarts = 1\n",
    );
    Sweeps { main, extra }
}

fn best_mean(sweep: &SweepResult, method: Method) -> (f64, String) {
    sweep
        .summary
        .iter()
        .filter(|s| s.method == method && s.rank == 40 && s.failed == 0)
        .map(|s| {
            let shape = s.a_lambda.or(s.a_v).unwrap();
            (s.micro.mean, format!("{shape}"))
        })
        .fold((f64::NEG_INFINITY, String::new()), |best, x| {
            if x.0 > best.0 {
                x
            } else {
                best
            }
        })
}

fn c4_gap(sweeps: &Sweeps) -> Outcome {
    let (sup, a) = best_mean(&sweeps.main, Method::Supervised);
    let (uns, av) = best_mean(&sweeps.main, Method::Vbnmf);
    let gap = sup - uns;
    Outcome {
        pass: gap >= 0.05 && sweeps.main.failures() == 0,
        detail: format!(
            "supervised {sup:.4} (a_lambda {a}) vs unsupervised {uns:.4} (a_v {av}), gap {gap:.4} (need >= 0.05); {} failed runs",
            sweeps.main.failures()
        ),
    }
}

fn c6_correlation(sweeps: &Sweeps) -> Outcome {
    let points: Vec<(f64, f64)> = scatter_points(&sweeps.main.rows)
        .into_iter()
        .chain(scatter_points(&sweeps.extra.rows))
        .map(|(_, r)| (r.inter_label_sparsity.unwrap(), r.micro_accuracy))
        .collect();
    let (x, y): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
    let r = pearson(&x, &y);
    Outcome {
        pass: points.len() >= 30 && r > 0.0,
        detail: format!(
            "Pearson {r:.3} over {} supervised runs (need > 0 over >= 30)",
            points.len()
        ),
    }
}

fn c7_metrics() -> Outcome {
    let mut worst = 0.0f64;
    let mut track = |got: f64, want: f64| worst = worst.max((got - want).abs());
    for n in [2usize, 5, 100] {
        let mut one_hot = vec![0.0; n];
        one_hot[n - 1] = 2.5;
        track(hoyer_sparsity(&one_hot).unwrap(), 1.0);
        track(hoyer_sparsity(&vec![1.3; n]).unwrap(), 0.0);
    }
    let truth = [0, 0, 0, 1, 1, 2];
    let pred = [0, 0, 1, 1, 0, 2];
    track(micro_accuracy(&pred, &truth).unwrap(), 4.0 / 6.0);
    track(macro_accuracy(&pred, &truth, 3).unwrap(), 13.0 / 18.0);
    let v = Matrix::from_vec(2, 4, vec![1.0, 0.0, 2.0, 0.0, 0.0, 1.5, 0.0, 1.5]).unwrap();
    track(
        inter_label_sparsity(&v, &[0, 1, 0, 1], 2).unwrap(),
        2.0 - 2f64.sqrt(),
    );

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let (rows, cols, n_labels) = (rng.random_range(1..8), rng.random_range(3..30), 3);
        let v = Matrix::from_fn(rows, cols, |_, _| rng.random::<f64>());
        let labels: Vec<usize> = (0..cols)
            .map(|d| {
                if d < n_labels {
                    d
                } else {
                    rng.random_range(0..n_labels)
                }
            })
            .collect();
        let got = label_aggregate(&v, &labels, n_labels).unwrap();
        for i in 0..rows {
            for l in 0..n_labels {
                let mut want = 0.0;
                for d in 0..cols {
                    if labels[d] == l {
                        want += v[(i, d)];
                    }
                }
                track(got[(i, l)], want);
            }
        }
    }
    let train =
        Matrix::from_vec(2, 5, vec![1.0, 0.9, 0.0, 0.1, 1.0, 0.0, 0.1, 1.0, 0.9, 1.0]).unwrap();
    let test = Matrix::from_vec(2, 1, vec![0.8, 0.3]).unwrap();
    let knn: Vec<usize> = [1, 3, 4, 5]
        .iter()
        .map(|&k| {
            knn_classify(&train, &[0, 0, 1, 1, 1], &test, k)
                .unwrap()
                .predictions[0]
        })
        .collect();
    let knn_ok = knn == [0, 0, 0, 1];
    Outcome {
        pass: worst <= 1e-12 && knn_ok,
        detail: format!(
            "worst deviation {worst:.2e} (tol 1e-12); hand k-NN votes {}",
            if knn_ok { "match" } else { "differ" }
        ),
    }
}

fn c8_special() -> Outcome {
    let mut worst = 0.0f64;
    let mut worst_recurrence = 0.0f64;
    let mut n = 0;
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
    for line in include_str!("../../core/tests/data/special_oracle.csv").lines() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let f: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        let (x, psi, lg) = (f[0], f[1], f[2]);
        worst = worst
            .max(rel(digamma(x).unwrap(), psi))
            .max(rel(ln_gamma(x).unwrap(), lg));
        let r1 = rel(digamma(x + 1.0).unwrap(), digamma(x).unwrap() + 1.0 / x);
        let r2 = rel(ln_gamma(x + 1.0).unwrap(), ln_gamma(x).unwrap() + x.ln());
        worst_recurrence = worst_recurrence.max(r1).max(r2);
        n += 1;
    }
    Outcome {
        pass: n == 1000 && worst <= 1e-10 && worst_recurrence <= 1e-10,
        detail: format!("worst error {worst:.2e} on {n} points, worst recurrence residual {worst_recurrence:.2e} (tol 1e-10)"),
    }
}

fn vbnmf(args: &[&str], cwd: &Path) -> bool {
    Command::new(env!("CARGO_BIN_EXE_vbnmf"))
        .args(args)
        .current_dir(cwd)
        .env_remove("RUST_LOG")
        .status()
        .map(|s| s.success())
        .unwrap_or(false)
}

fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(dir).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn c9_determinism() -> Outcome {
    let demo = Path::new(env!("CARGO_MANIFEST_DIR")).join("demo");
    let corpus = demo.join("corpus").to_string_lossy().into_owned();
    let cfg = demo.join("demo.cfg").to_string_lossy().into_owned();
    let runs: Vec<tempfile::TempDir> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    for dir in &runs {
        let d = dir.path();
        let ok = vbnmf(
            &[
                "fit",
                "--corpus",
                &corpus,
                "--method",
                "supervised",
                "--rank",
                "5",
                "--seed",
                "11",
            ],
            d,
        ) && vbnmf(
            &[
                "project",
                "--corpus",
                &corpus,
                "--split",
                "train",
                "--out",
                "train.csv",
            ],
            d,
        ) && vbnmf(&["project", "--corpus", &corpus, "--out", "test.csv"], d)
            && vbnmf(
                &[
                    "fit", "--corpus", &corpus, "--method", "vbnmf", "--rank", "4", "--seed", "11",
                    "--model", "un.vbnmf",
                ],
                d,
            )
            && vbnmf(
                &[
                    "project",
                    "--corpus",
                    &corpus,
                    "--model",
                    "un.vbnmf",
                    "--out",
                    "un_test.csv",
                ],
                d,
            )
            && vbnmf(&["experiment", "--config", &cfg, "--out", "exp"], d);
        if !ok {
            return Outcome {
                pass: false,
                detail: "a CLI invocation failed".into(),
            };
        }
    }
    let (a, b) = (runs[0].path(), runs[1].path());
    let names = files_under(a);
    if names != files_under(b) {
        return Outcome {
            pass: false,
            detail: "runs produced different file sets".into(),
        };
    }
    let differing: Vec<String> = names
        .iter()
        .filter(|n| fs::read(a.join(n)).unwrap() != fs::read(b.join(n)).unwrap())
        .map(|n| n.display().to_string())
        .collect();
    Outcome {
        pass: differing.is_empty(),
        detail: if differing.is_empty() {
            format!(
                "{} artifacts byte-identical across repeated runs",
                names.len()
            )
        } else {
            format!("differing artifacts: {}", differing.join(", "))
        },
    }
}

fn main() {
    // Respect `cargo test -- --list` and filters aimed at other targets.
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        return;
    }
    let secs = Duration::from_secs;
    let mut passed = Vec::new();
    passed.push(report(1, "bound monotonicity", Some(secs(30)), c1_monotone));
    passed.push(report(2, "conservation", Some(secs(5)), c2_conservation));
    passed.push(report(3, "planted recovery", Some(secs(120)), c3_planted));

    let tmp = tempfile::tempdir().unwrap();
    let (sweeps, elapsed, in_time) = {
        let start = Instant::now();
        let s = run_newsgroup_sweeps(tmp.path());
        let e = start.elapsed();
        (s, e, e < secs(15 * 60))
    };
    let sweep_time = format!("sweep {:.1} s (limit 900 s)", elapsed.as_secs_f64());
    let c4 = c4_gap(&sweeps);
    let c4_pass = c4.pass && in_time;
    println!(
        "{} C4 supervised vs unsupervised gap: {}; {sweep_time}",
        if c4_pass { "PASS" } else { "FAIL" },
        c4.detail
    );
    passed.push(c4_pass);

    passed.push(report(
        5,
        "inter-label sparsity control",
        Some(secs(300)),
        c5_sparsity_control,
    ));

    let c6 = c6_correlation(&sweeps);
    println!(
        "{} C6 sparsity-accuracy correlation: {}; shares the C4 sweep",
        if c6.pass { "PASS" } else { "FAIL" },
        c6.detail
    );
    passed.push(c6.pass);

    passed.push(report(7, "metric exactness", None, c7_metrics));
    passed.push(report(8, "special functions", None, c8_special));
    passed.push(report(9, "determinism", None, c9_determinism));

    let n = passed.iter().filter(|&&p| p).count();
    println!("acceptance: {n}/{} criteria passed", passed.len());
    if n < passed.len() && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
