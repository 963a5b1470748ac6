//! Dense convex quadratic programming by operator splitting (ADMM).
//!
//! Solves `min 0.5 x'Qx + c'x  s.t.  A_eq x = b_eq,  A_iq x <= b_iq`.
//! Constraints are stacked as `l <= A x <= u`; each iteration solves one
//! factorized linear system and projects onto the bounds. Problem data are
//! Ruiz-equilibrated first, and a converged iterate is polished by solving the
//! equality-constrained problem on the detected active set.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    /// Symmetric positive semidefinite Hessian.
    pub q: DMatrix<f64>,
    pub c: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub a_iq: DMatrix<f64>,
    pub b_iq: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QpError {
    #[error("inconsistent QP dimensions: {0}")]
    Dimension(String),
    #[error("Hessian is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("problem is primal infeasible")]
    Infeasible,
    #[error("problem is unbounded below")]
    Unbounded,
    #[error("iteration cap reached; best iterate has primal residual {:e}, dual residual {:e}", .0.primal_residual, .0.dual_residual)]
    MaxIterations(Box<QpSolution>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSettings {
    /// Absolute residual tolerance.
    pub tol: f64,
    pub max_iter: usize,
    pub rho: f64,
    pub sigma: f64,
    /// Over-relaxation factor in (0, 2).
    pub alpha: f64,
    pub polish: bool,
    /// Residual and infeasibility checks run every this many iterations.
    pub check_interval: usize,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 20_000, rho: 0.1, sigma: 1e-6, alpha: 1.6, polish: true, check_interval: 10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// Multipliers of the equality rows.
    pub y_eq: DVector<f64>,
    /// Multipliers of the inequality rows (non-negative at optimum).
    pub y_iq: DVector<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub polished: bool,
    /// `max(|A_eq x - b_eq|_inf, |max(A_iq x - b_iq, 0)|_inf)`
    pub primal_residual: f64,
    /// `|Q x + c + A_eq' y_eq + A_iq' y_iq|_inf`
    pub dual_residual: f64,
}

impl QpProblem {
    pub fn new(q: DMatrix<f64>, c: DVector<f64>) -> Self {
        let n = c.len();
        Self {
            q,
            c,
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
            a_iq: DMatrix::zeros(0, n),
            b_iq: DVector::zeros(0),
        }
    }

    pub fn with_eq(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_eq = a;
        self.b_eq = b;
        self
    }

    pub fn with_iq(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_iq = a;
        self.b_iq = b;
        self
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn validate(&self) -> Result<(), QpError> {
        let n = self.c.len();
        if self.q.nrows() != n || self.q.ncols() != n {
            return Err(QpError::Dimension(format!("Q is {}x{}, expected {n}x{n}", self.q.nrows(), self.q.ncols())));
        }
        if self.a_eq.ncols() != n || self.a_eq.nrows() != self.b_eq.len() {
            return Err(QpError::Dimension("equality block".into()));
        }
        if self.a_iq.ncols() != n || self.a_iq.nrows() != self.b_iq.len() {
            return Err(QpError::Dimension("inequality block".into()));
        }
        let asym = (&self.q - self.q.transpose()).abs().max();
        let scale = self.q.abs().max().max(1.0);
        if asym > 1e-12 * scale {
            return Err(QpError::NotSymmetric(asym));
        }
        Ok(())
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.q * x)) + self.c.dot(x)
    }

    fn primal_residual(&self, x: &DVector<f64>) -> f64 {
        let eq = (&self.a_eq * x - &self.b_eq).abs().max();
        let iq = (&self.a_iq * x - &self.b_iq).map(|v| v.max(0.0)).max();
        eq.max(iq)
    }

    fn dual_residual(&self, x: &DVector<f64>, y_eq: &DVector<f64>, y_iq: &DVector<f64>) -> f64 {
        (&self.q * x + &self.c + self.a_eq.transpose() * y_eq + self.a_iq.transpose() * y_iq).abs().max()
    }
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.abs().max()
    }
}

/// Stacked, scaled working copy of a problem.
struct Scaled {
    p: DMatrix<f64>,
    q: DVector<f64>,
    a: DMatrix<f64>,
    l: DVector<f64>,
    u: DVector<f64>,
    d: DVector<f64>,
    e: DVector<f64>,
    cost_scale: f64,
    n_eq: usize,
}

fn equilibrate(qp: &QpProblem) -> Scaled {
    let n = qp.num_vars();
    let (me, mi) = (qp.a_eq.nrows(), qp.a_iq.nrows());
    let m = me + mi;
    let mut a = DMatrix::zeros(m, n);
    a.rows_mut(0, me).copy_from(&qp.a_eq);
    a.rows_mut(me, mi).copy_from(&qp.a_iq);
    let mut l = DVector::from_element(m, f64::NEG_INFINITY);
    let mut u = DVector::zeros(m);
    l.rows_mut(0, me).copy_from(&qp.b_eq);
    u.rows_mut(0, me).copy_from(&qp.b_eq);
    u.rows_mut(me, mi).copy_from(&qp.b_iq);

    let mut p = qp.q.clone();
    let mut q = qp.c.clone();
    let mut d = DVector::from_element(n, 1.0);
    let mut e = DVector::from_element(m, 1.0);
    let clamp = |v: f64| if v < 1e-4 { 1.0 } else { v.min(1e4) };
    for _ in 0..15 {
        let dd = DVector::from_fn(n, |j, _| {
            let col_p = p.column(j).iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            let col_a = a.column(j).iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            1.0 / clamp(col_p.max(col_a)).sqrt()
        });
        let de = DVector::from_fn(m, |i, _| 1.0 / clamp(a.row(i).iter().fold(0.0_f64, |a, v| a.max(v.abs()))).sqrt());
        for j in 0..n {
            for i in 0..n {
                p[(i, j)] *= dd[i] * dd[j];
            }
            for i in 0..m {
                a[(i, j)] *= de[i] * dd[j];
            }
            q[j] *= dd[j];
        }
        d.component_mul_assign(&dd);
        e.component_mul_assign(&de);
    }
    let mean_col = if n > 0 { (0..n).map(|j| p.column(j).abs().max()).sum::<f64>() / n as f64 } else { 1.0 };
    let cost_scale = 1.0 / clamp(mean_col.max(inf_norm(&q)));
    p *= cost_scale;
    q *= cost_scale;
    for i in 0..m {
        l[i] *= e[i];
        u[i] *= e[i];
    }
    Scaled { p, q, a, l, u, d, e, cost_scale, n_eq: me }
}

fn factor(s: &Scaled, rho: &DVector<f64>, sigma: f64) -> nalgebra::Cholesky<f64, nalgebra::Dyn> {
    let n = s.p.nrows();
    let mut k = s.p.clone();
    for i in 0..n {
        k[(i, i)] += sigma;
    }
    let ar = DMatrix::from_fn(s.a.nrows(), n, |i, j| s.a[(i, j)] * rho[i]);
    k += s.a.transpose() * ar;
    k.cholesky().expect("P + sigma I + A' R A is positive definite")
}

struct Unscaled {
    x: DVector<f64>,
    y_eq: DVector<f64>,
    y_iq: DVector<f64>,
}

fn unscale(s: &Scaled, x: &DVector<f64>, y: &DVector<f64>) -> Unscaled {
    let x = x.component_mul(&s.d);
    let y = y.component_mul(&s.e) / s.cost_scale;
    let m = y.len();
    Unscaled { x, y_eq: y.rows(0, s.n_eq).into_owned(), y_iq: y.rows(s.n_eq, m - s.n_eq).into_owned() }
}

fn build_solution(qp: &QpProblem, us: Unscaled, iterations: usize, polished: bool) -> QpSolution {
    let primal_residual = qp.primal_residual(&us.x);
    let dual_residual = qp.dual_residual(&us.x, &us.y_eq, &us.y_iq);
    QpSolution {
        objective: qp.objective(&us.x),
        x: us.x,
        y_eq: us.y_eq,
        y_iq: us.y_iq,
        iterations,
        polished,
        primal_residual,
        dual_residual,
    }
}

/// Solves the QP to absolute residual tolerance `settings.tol`.
pub fn solve_qp(qp: &QpProblem, settings: &QpSettings) -> Result<QpSolution, QpError> {
    qp.validate()?;
    let n = qp.num_vars();
    let s = equilibrate(qp);
    let m = s.a.nrows();
    let eq_row = |i: usize| s.l[i] == s.u[i];
    let rho_for = |base: f64| DVector::from_fn(m, |i, _| if eq_row(i) { base * 1e3 } else { base });

    let mut rho_base = settings.rho;
    let mut rho = rho_for(rho_base);
    let mut chol = factor(&s, &rho, settings.sigma);
    let mut x = DVector::zeros(n);
    let mut z = DVector::zeros(m);
    let mut y = DVector::zeros(m);
    let mut best: Option<(f64, QpSolution)> = None;
    let mut last_active: Vec<usize> = Vec::new();

    for iter in 1..=settings.max_iter {
        let x_prev = x.clone();
        let y_prev = y.clone();
        let rhs = settings.sigma * &x - &s.q + s.a.transpose() * (rho.component_mul(&z) - &y);
        let x_tilde = chol.solve(&rhs);
        let z_tilde = &s.a * &x_tilde;
        x = settings.alpha * &x_tilde + (1.0 - settings.alpha) * &x_prev;
        let z_relaxed = settings.alpha * &z_tilde + (1.0 - settings.alpha) * &z;
        let z_new = DVector::from_fn(m, |i, _| (z_relaxed[i] + y[i] / rho[i]).clamp(s.l[i], s.u[i]));
        y += rho.component_mul(&(z_relaxed - &z_new));
        z = z_new;

        if iter % settings.check_interval != 0 && iter != settings.max_iter {
            continue;
        }

        let us = unscale(&s, &x, &y);
        let sol = build_solution(qp, us, iter, false);
        let worst = sol.primal_residual.max(sol.dual_residual);
        if best.as_ref().is_none_or(|(b, _)| worst < *b) {
            best = Some((worst, sol.clone()));
        }
        if sol.primal_residual <= settings.tol && sol.dual_residual <= settings.tol {
            return Ok(finish(qp, sol, settings));
        }
        if settings.polish {
            let active = active_set(&sol);
            if active != last_active {
                if let Some(p) = polish(qp, &sol, &active) {
                    if p.primal_residual <= settings.tol && p.dual_residual <= settings.tol {
                        return Ok(p);
                    }
                }
                last_active = active;
            }
        }

        if certify_primal_infeasible(&s, &(&y - &y_prev)) {
            return Err(QpError::Infeasible);
        }
        if certify_unbounded(&s, &(&x - &x_prev)) {
            return Err(QpError::Unbounded);
        }

        // rebalance primal and dual progress
        let ax = &s.a * &x;
        let prim = inf_norm(&(&ax - &z)) / inf_norm(&ax).max(inf_norm(&z)).max(1e-10);
        let px = &s.p * &x;
        let aty = s.a.transpose() * &y;
        let dual = inf_norm(&(&px + &s.q + &aty)) / inf_norm(&px).max(inf_norm(&aty)).max(inf_norm(&s.q)).max(1e-10);
        let ratio = (prim / dual.max(1e-12)).sqrt();
        if !(0.2..=5.0).contains(&ratio) && ratio.is_finite() {
            rho_base = (rho_base * ratio).clamp(1e-6, 1e6);
            rho = rho_for(rho_base);
            chol = factor(&s, &rho, settings.sigma);
        }
    }
    let (_, sol) = best.expect("at least one residual check");
    if sol.primal_residual <= settings.tol && sol.dual_residual <= settings.tol {
        return Ok(sol);
    }
    let polished = if settings.polish { polish(qp, &sol, &active_set(&sol)) } else { None };
    match polished {
        Some(p) if p.primal_residual <= settings.tol && p.dual_residual <= settings.tol => Ok(p),
        _ => Err(QpError::MaxIterations(Box::new(sol))),
    }
}

fn finish(qp: &QpProblem, sol: QpSolution, settings: &QpSettings) -> QpSolution {
    if !settings.polish {
        return sol;
    }
    match polish(qp, &sol, &active_set(&sol)) {
        Some(p) if p.primal_residual <= settings.tol && p.dual_residual <= settings.tol => p,
        _ => sol,
    }
}

/// Inequalities whose multiplier is clearly positive.
fn active_set(sol: &QpSolution) -> Vec<usize> {
    let scale = inf_norm(&sol.y_iq).max(1.0);
    (0..sol.y_iq.len()).filter(|&i| sol.y_iq[i] > 1e-7 * scale).collect()
}

/// Equality-constrained solve on a working set of inequalities via a
/// regularized KKT system with iterative refinement. Returns `x`, the equality
/// multipliers and the working-set multipliers.
fn kkt_solve(qp: &QpProblem, working: &[usize]) -> Option<(DVector<f64>, DVector<f64>, DVector<f64>)> {
    let n = qp.num_vars();
    let me = qp.a_eq.nrows();
    let dim = n + me + working.len();
    let delta = 1e-10;
    let mut kkt = DMatrix::zeros(dim, dim);
    kkt.view_mut((0, 0), (n, n)).copy_from(&qp.q);
    let mut rhs = DVector::zeros(dim);
    rhs.rows_mut(0, n).copy_from(&(-&qp.c));
    for r in 0..me {
        for j in 0..n {
            kkt[(n + r, j)] = qp.a_eq[(r, j)];
            kkt[(j, n + r)] = qp.a_eq[(r, j)];
        }
        rhs[n + r] = qp.b_eq[r];
    }
    for (r, &i) in working.iter().enumerate() {
        for j in 0..n {
            kkt[(n + me + r, j)] = qp.a_iq[(i, j)];
            kkt[(j, n + me + r)] = qp.a_iq[(i, j)];
        }
        rhs[n + me + r] = qp.b_iq[i];
    }
    let mut reg = kkt.clone();
    for i in 0..dim {
        reg[(i, i)] += if i < n { delta } else { -delta };
    }
    let lu = reg.lu();
    let mut v = lu.solve(&rhs)?;
    for _ in 0..5 {
        let r = &rhs - &kkt * &v;
        v += lu.solve(&r)?;
    }
    if v.iter().any(|x| !x.is_finite()) {
        return None;
    }
    Some((v.rows(0, n).into_owned(), v.rows(n, me).into_owned(), v.rows(n + me, working.len()).into_owned()))
}

/// Active-set refinement from a guessed working set: drop negative multipliers
/// or add violated inequalities until neither exists. The first rounds change
/// the set in bulk; later rounds change one row at a time to avoid cycling.
fn polish(qp: &QpProblem, sol: &QpSolution, active: &[usize]) -> Option<QpSolution> {
    let mi = qp.a_iq.nrows();
    let mut working: Vec<usize> = active.to_vec();
    let mut in_set = vec![false; mi];
    for &i in &working {
        in_set[i] = true;
    }
    for round in 0..(2 * mi + 10) {
        let bulk = round < 4;
        let (x, y_eq, y_w) = kkt_solve(qp, &working)?;
        let y_scale = inf_norm(&y_w).max(inf_norm(&y_eq)).max(1.0);
        let negative: Vec<usize> = (0..working.len()).filter(|&r| y_w[r] < -1e-9 * y_scale).collect();
        if !negative.is_empty() {
            let drop: Vec<usize> = if bulk {
                negative
            } else {
                vec![negative.into_iter().min_by(|&a, &b| y_w[a].total_cmp(&y_w[b])).unwrap()]
            };
            for &r in drop.iter().rev() {
                in_set[working[r]] = false;
                working.remove(r);
            }
            continue;
        }
        let viol = &qp.a_iq * &x - &qp.b_iq;
        let violated: Vec<usize> = (0..mi).filter(|&i| !in_set[i] && viol[i] > 1e-9 * (1.0 + qp.b_iq[i].abs())).collect();
        if !violated.is_empty() {
            let add: Vec<usize> = if bulk {
                violated
            } else {
                vec![violated.into_iter().max_by(|&a, &b| viol[a].total_cmp(&viol[b])).unwrap()]
            };
            for i in add {
                in_set[i] = true;
                working.push(i);
            }
            continue;
        }
        let mut y_iq = DVector::zeros(mi);
        for (r, &i) in working.iter().enumerate() {
            y_iq[i] = y_w[r].max(0.0);
        }
        return Some(build_solution(qp, Unscaled { x, y_eq, y_iq }, sol.iterations, true));
    }
    None
}

fn certify_primal_infeasible(s: &Scaled, dy: &DVector<f64>) -> bool {
    let m = dy.len();
    if m == 0 {
        return false;
    }
    // certificate in unscaled coordinates: E dy, A' dy via D^{-1}
    let dy_u = dy.component_mul(&s.e);
    let norm = inf_norm(&dy_u);
    if norm < 1e-10 {
        return false;
    }
    let eps = 1e-6;
    let at_dy = (s.a.transpose() * dy).component_div(&s.d);
    if inf_norm(&at_dy) > eps * norm {
        return false;
    }
    let mut support = 0.0;
    for i in 0..m {
        let (l, u) = (s.l[i] / s.e[i], s.u[i] / s.e[i]);
        let v = dy_u[i];
        if v > 0.0 {
            if u.is_infinite() {
                if v > eps * norm {
                    return false;
                }
            } else {
                support += u * v;
            }
        } else if v < 0.0 {
            if l.is_infinite() {
                if -v > eps * norm {
                    return false;
                }
            } else {
                support += l * v;
            }
        }
    }
    support < -eps * norm
}

fn certify_unbounded(s: &Scaled, dx: &DVector<f64>) -> bool {
    let dx_u = dx.component_mul(&s.d);
    let norm = inf_norm(&dx_u);
    if norm < 1e-10 {
        return false;
    }
    let eps = 1e-6;
    let p_dx = (&s.p * dx).component_div(&s.d) / s.cost_scale;
    if inf_norm(&p_dx) > eps * norm {
        return false;
    }
    let q_dx = s.q.dot(dx) / s.cost_scale;
    if q_dx > -eps * norm {
        return false;
    }
    let a_dx = (&s.a * dx).component_div(&s.e);
    for i in 0..a_dx.len() {
        let (l, u) = (s.l[i], s.u[i]);
        let v = a_dx[i];
        if u.is_finite() && v > eps * norm {
            return false;
        }
        if l.is_finite() && v < -eps * norm {
            return false;
        }
    }
    true
}
