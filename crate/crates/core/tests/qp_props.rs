mod common;

use common::random_qp;
use intercept_core::qp::{solve_qp, QpError, QpProblem, QpSettings};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Minimum by nullspace elimination of the equalities followed by Hildreth's
/// dual coordinate ascent on the inequalities.
fn oracle(p: &QpProblem) -> f64 {
    let n = p.num_vars();
    let (x0, basis) = if p.a_eq.nrows() == 0 {
        (DVector::zeros(n), DMatrix::identity(n, n))
    } else {
        let svd = p.a_eq.clone().svd(true, true);
        let x0 = svd.solve(&p.b_eq, 1e-12).unwrap();
        let v_t = svd.v_t.unwrap();
        // Full right-singular basis: complete through the orthogonal complement.
        let full = {
            let mut m = DMatrix::identity(n, n);
            let r = v_t.nrows();
            m.rows_mut(0, r).copy_from(&v_t);
            let qr = m.transpose().qr();
            qr.q()
        };
        let r = p.a_eq.nrows();
        (x0, full.columns(r, n - r).into_owned())
    };
    // Reduced problem in z: x = x0 + N z.
    let qz = basis.transpose() * &p.q * &basis;
    let cz = basis.transpose() * (&p.q * &x0 + &p.c);
    let az = &p.a_iq * &basis;
    let bz = &p.b_iq - &p.a_iq * &x0;
    let qinv = qz.clone().try_inverse().unwrap();
    let h = &az * &qinv * az.transpose();
    let d = &bz + &az * &qinv * &cz;
    let mut lam = DVector::<f64>::zeros(az.nrows());
    for _ in 0..200_000 {
        let mut change: f64 = 0.0;
        for i in 0..lam.len() {
            if h[(i, i)] <= 0.0 {
                continue;
            }
            let g = h.row(i).dot(&lam.transpose()) + d[i];
            let new = (lam[i] - g / h[(i, i)]).max(0.0);
            change = change.max((new - lam[i]).abs());
            lam[i] = new;
        }
        if change < 1e-14 {
            break;
        }
    }
    let z = -&qinv * (&cz + az.transpose() * &lam);
    let x = &x0 + &basis * z;
    assert!((&p.a_iq * &x - &p.b_iq).max() < 1e-7, "oracle iterate infeasible");
    p.objective(&x)
}

#[test]
fn solver_matches_active_set_enumeration() {
    let gap = common::qp_worst_gap(107, 50);
    assert!(gap <= 1e-6, "objective gap {gap}");
}

/// Larger problems than enumeration can reach, checked by dual ascent.
#[test]
fn solver_matches_dual_ascent_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let settings = QpSettings::default();
    for case in 0..50 {
        let p = random_qp(&mut rng, 12, 20);
        let sol = solve_qp(&p, &settings).unwrap_or_else(|e| panic!("case {case}: {e}"));
        let want = oracle(&p);
        let gap = (sol.objective - want).abs() / want.abs().max(1.0);
        assert!(gap <= 1e-6, "case {case}: solver {} oracle {want}", sol.objective);
        assert!(sol.primal_residual <= 1e-6);
        assert!(sol.y_iq.iter().all(|y| *y >= -1e-8));
    }
}

#[test]
fn dropping_a_constraint_never_raises_the_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let settings = QpSettings::default();
    let mut dropped = 0;
    while dropped < 10 {
        let p = random_qp(&mut rng, 12, 20);
        if p.a_iq.nrows() < 2 {
            continue;
        }
        let full = solve_qp(&p, &settings).unwrap().objective;
        let k = rng.random_range(0..p.a_iq.nrows());
        let relaxed = QpProblem { a_iq: p.a_iq.clone().remove_row(k), b_iq: p.b_iq.clone().remove_row(k), ..p.clone() };
        let loose = solve_qp(&relaxed, &settings).unwrap().objective;
        assert!(loose <= full + 1e-6 * full.abs().max(1.0), "{loose} > {full}");
        dropped += 1;
    }
}

#[test]
fn contradictory_bounds_are_reported_infeasible() {
    // x0 + x1 <= -1 and x0 + x1 >= 1
    let qp = QpProblem::new(DMatrix::identity(2, 2), DVector::zeros(2))
        .with_iq(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, -1.0, -1.0]), DVector::from_vec(vec![-1.0, -1.0]));
    assert_eq!(solve_qp(&qp, &QpSettings::default()).unwrap_err(), QpError::Infeasible);
}
