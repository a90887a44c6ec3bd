//! Digamma and log-gamma against tabulated 40-digit values, plus the
//! functional equations they must satisfy.

use proptest::prelude::*;
use vbnmf_core::numerics::{digamma, gamma_entropy, ln_gamma};

const TOL: f64 = 1e-10;

struct OraclePoint {
    x: f64,
    digamma: f64,
    ln_gamma: f64,
}

fn oracle() -> Vec<OraclePoint> {
    include_str!("data/special_oracle.csv")
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|s| s.parse().unwrap()).collect();
            OraclePoint {
                x: f[0],
                digamma: f[1],
                ln_gamma: f[2],
            }
        })
        .collect()
}

/// Absolute error below 1e-10, relative for values beyond unit magnitude.
fn close(got: f64, want: f64) -> bool {
    (got - want).abs() <= TOL * want.abs().max(1.0)
}

#[test]
fn matches_tabulated_values() {
    let points = oracle();
    assert_eq!(points.len(), 1000);
    let mut worst = (0.0f64, 0.0f64);
    for p in &points {
        let d = digamma(p.x).unwrap();
        let g = ln_gamma(p.x).unwrap();
        assert!(
            close(d, p.digamma),
            "digamma({}) = {d}, want {}",
            p.x,
            p.digamma
        );
        assert!(
            close(g, p.ln_gamma),
            "ln_gamma({}) = {g}, want {}",
            p.x,
            p.ln_gamma
        );
        worst.0 = worst
            .0
            .max((d - p.digamma).abs() / p.digamma.abs().max(1.0));
        worst.1 = worst
            .1
            .max((g - p.ln_gamma).abs() / p.ln_gamma.abs().max(1.0));
    }
    assert!(worst.0 < 1e-13 && worst.1 < 1e-13, "worst errors {worst:?}");
}

#[test]
fn known_closed_forms() {
    let euler = 0.577_215_664_901_532_9;
    let d1 = digamma(1.0).unwrap();
    assert!((d1 + euler).abs() < 1e-14, "digamma(1) = {d1}");
    assert!((digamma(0.5).unwrap() + euler + 2.0 * 2f64.ln()).abs() < 1e-14);
    assert!((ln_gamma(0.5).unwrap() - std::f64::consts::PI.sqrt().ln()).abs() < 1e-15);
    assert!(ln_gamma(2.0).unwrap().abs() < 1e-15);
    // ln 10! = ln 3628800
    assert!((ln_gamma(11.0).unwrap() - 3_628_800f64.ln()).abs() < 1e-13);
    assert!((gamma_entropy(1.0, 2.0).unwrap() - (1.0 + 2f64.ln())).abs() < 1e-15);
}

proptest! {
    #[test]
    fn digamma_recurrence(x in 1e-3f64..1e3) {
        let lhs = digamma(x + 1.0).unwrap();
        let rhs = digamma(x).unwrap() + 1.0 / x;
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
    }

    #[test]
    fn ln_gamma_recurrence(x in 1e-3f64..1e3) {
        let lhs = ln_gamma(x + 1.0).unwrap();
        let rhs = ln_gamma(x).unwrap() + x.ln();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
    }

    #[test]
    fn legendre_duplication(x in 1e-2f64..100.0) {
        // ln Γ(2x) = ln Γ(x) + ln Γ(x + ½) + (2x − 1) ln 2 − ½ ln π
        let lhs = ln_gamma(2.0 * x).unwrap();
        let rhs = ln_gamma(x).unwrap() + ln_gamma(x + 0.5).unwrap() + (2.0 * x - 1.0) * 2f64.ln()
            - 0.5 * std::f64::consts::PI.ln();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn digamma_duplication(x in 1e-2f64..100.0) {
        // ψ(2x) = ½ψ(x) + ½ψ(x + ½) + ln 2
        let lhs = digamma(2.0 * x).unwrap();
        let rhs = 0.5 * digamma(x).unwrap() + 0.5 * digamma(x + 0.5).unwrap() + 2f64.ln();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn digamma_is_derivative_of_ln_gamma(x in 0.1f64..50.0) {
        let h = 1e-5 * x;
        let fd = (ln_gamma(x + h).unwrap() - ln_gamma(x - h).unwrap()) / (2.0 * h);
        prop_assert!((fd - digamma(x).unwrap()).abs() < 1e-6 * digamma(x).unwrap().abs().max(1.0));
    }
}
