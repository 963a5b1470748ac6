use std::num::NonZeroUsize;

mod common;

use common::random_segment;
use gauss_quad::GaussLegendre;
use intercept_core::bezier::{bernstein_gram, binomial};
use intercept_core::sim::run_interception;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Power-basis coefficients of the Bernstein polynomial with control points `c`.
fn power_coefficients(c: &[f64]) -> Vec<f64> {
    let n = c.len() - 1;
    (0..=n)
        .map(|k| {
            (0..=k)
                .map(|i| {
                    let sign = if (k - i) % 2 == 0 { 1.0 } else { -1.0 };
                    c[i] * binomial(n, i) * binomial(n - i, k - i) * sign
                })
                .sum()
        })
        .collect()
}

fn horner(a: &[f64], x: f64) -> f64 {
    a.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn differentiate(a: &[f64]) -> Vec<f64> {
    a.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect()
}

#[test]
fn curve_stays_in_control_hull_and_interpolates_endpoints() {
    assert_eq!(common::bezier_hull_violations(41, 10_000), 0);
}

#[test]
fn derivatives_match_power_basis() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for _ in 0..2_000 {
        let seg = random_segment(&mut rng);
        let p = power_coefficients(&seg.control_points);
        let (dp, ddp) = (differentiate(&p), differentiate(&differentiate(&p)));
        let tau: f64 = rng.random_range(0.0..=1.0);
        let (s, v, a) = seg.eval(seg.t_start + tau * seg.h).unwrap();
        let want = (seg.h * horner(&p, tau), horner(&dp, tau), horner(&ddp, tau) / seg.h);
        let scale = |x: f64| 1e-10 * x.abs().max(1.0);
        assert!((s - want.0).abs() <= scale(want.0), "s {s} vs {}", want.0);
        assert!((v - want.1).abs() <= scale(want.1), "v {v} vs {}", want.1);
        assert!((a - want.2).abs() <= scale(want.2), "a {a} vs {}", want.2);
    }
}

fn bernstein(k: usize, i: usize, x: f64) -> f64 {
    binomial(k, i) * x.powi(i as i32) * (1.0 - x).powi((k - i) as i32)
}

#[test]
fn gram_matrix_and_energy_match_gauss_legendre() {
    for k in 1..=8 {
        let rule = GaussLegendre::new(NonZeroUsize::new(k + 1).unwrap());
        let g = bernstein_gram(k);
        for i in 0..=k {
            for l in 0..=k {
                let q = rule.integrate(0.0, 1.0, |x| bernstein(k, i, x) * bernstein(k, l, x));
                assert!((g[i][l] - q).abs() <= 1e-9, "k {k} ({i},{l}): {} vs {q}", g[i][l]);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    for _ in 0..200 {
        let seg = random_segment(&mut rng);
        let rule = GaussLegendre::new(NonZeroUsize::new(seg.order()).unwrap());
        let q = rule.integrate(seg.t_start, seg.t_end(), |t| seg.eval(t).unwrap().2.powi(2));
        assert!((seg.accel_energy() - q).abs() <= 1e-9 * q.max(1.0));
    }
}

#[test]
fn optimized_profiles_join_continuously() {
    for name in common::SCENARIOS {
        let log = run_interception(&common::scenario(name));
        let gap = common::join_gap(log.plan.as_ref().unwrap());
        assert!(gap <= 1e-6, "{name}: join discontinuity {gap}");
    }
}
