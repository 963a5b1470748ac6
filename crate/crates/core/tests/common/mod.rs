//! Oracles shared by the property tests and the acceptance report.
#![allow(dead_code)]

use std::collections::HashMap;
use std::f64::consts::PI;

use intercept_core::bezier::BezierSegment;
use intercept_core::geometry::{dubins_shortest, Obstacle, Pose, Vec2, WorldMap};
use intercept_core::qp::{solve_qp, QpProblem, QpSettings};
use intercept_core::scenario::load_scenario;
use intercept_core::sim::{InterceptionLog, Plan, Scenario, SpeedPlan};
use intercept_core::smoother::{objective_terms, term_gradients, ObjectiveTerms, PathPolyline, SmootherConfig};
use intercept_core::st_graph::dp_search_with;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SCENARIOS: [&str; 4] = ["minimal", "fig3", "fig4", "table2"];

pub fn scenario(name: &str) -> Scenario {
    load_scenario(format!("{}/../../scenarios/{name}.toml", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

// ---- smoother -------------------------------------------------------------

pub fn hexagon_map() -> WorldMap {
    let hex = (0..6)
        .map(|k| {
            let a = PI / 3.0 * k as f64 + 0.2;
            Vec2::new(5.0 + 1.5 * a.cos(), 5.0 + 1.5 * a.sin())
        })
        .collect();
    WorldMap::new(10.0, 10.0, vec![Obstacle::new_static(0, hex, 0.25).unwrap()])
}

/// Random polyline arching over the hexagon, all points outside it.
pub fn random_arch(rng: &mut ChaCha8Rng, map: &WorldMap) -> PathPolyline {
    loop {
        let pts: Vec<Vec2> = (0..8)
            .map(|i| {
                let a = PI * (i as f64 / 7.0);
                let r = rng.random_range(1.9..3.2);
                Vec2::new(5.0 - r * a.cos(), 5.0 + r * a.sin()) + Vec2::new(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2))
            })
            .collect();
        if pts.iter().all(|p| map.static_clearance(*p).distance > 0.05) {
            return PathPolyline::new(pts).unwrap();
        }
    }
}

fn term(t: &ObjectiveTerms, k: usize) -> f64 {
    [t.obs, t.cur, t.smo][k]
}

/// Central differences of term `k` over the free coordinates against the
/// analytic gradient; `None` when the term is inactive.
fn fd_relative_error(path: &PathPolyline, map: &WorldMap, cfg: &SmootherConfig, k: usize) -> Option<f64> {
    let base = objective_terms(path, map, cfg).unwrap();
    if term(&base, k) < 1e-8 {
        return None;
    }
    let g = term_gradients(path, map, cfg).unwrap();
    let ga = [&g.obs, &g.cur, &g.smo][k];
    let h = 1e-6;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 1..path.points.len() - 1 {
        for axis in 0..2 {
            let mut plus = path.clone();
            let mut minus = path.clone();
            plus.points[i][axis] += h;
            minus.points[i][axis] -= h;
            let fp = term(&objective_terms(&plus, map, cfg).unwrap(), k);
            let fm = term(&objective_terms(&minus, map, cfg).unwrap(), k);
            let fd = (fp - fm) / (2.0 * h);
            num += (ga[i][axis] - fd).powi(2);
            den += fd * fd;
        }
    }
    Some(num.sqrt() / den.sqrt().max(1e-6))
}

/// Worst relative gradient error over `per_term` active cases of each term.
pub fn smoother_gradient_worst(seed: u64, per_term: usize) -> f64 {
    let map = hexagon_map();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cfg = SmootherConfig::with_limits(1.2, 0.3);
    let mut worst: f64 = 0.0;
    for k in 0..3 {
        let mut checked = 0;
        while checked < per_term {
            cfg.kappa_max = rng.random_range(0.05..0.4);
            let path = random_arch(&mut rng, &map);
            if let Some(err) = fd_relative_error(&path, &map, &cfg, k) {
                worst = worst.max(err);
                checked += 1;
            }
        }
    }
    worst
}

// ---- ST dynamic programming -----------------------------------------------

/// Minimum over every monotone lattice path, summed in the same order as the DP.
pub fn enumerate<N, E>(nt: usize, ns: usize, kmax: usize, node: &N, edge: &E) -> f64
where
    N: Fn(usize, usize) -> f64,
    E: Fn(usize, Option<usize>, usize, usize) -> f64,
{
    #[allow(clippy::too_many_arguments)]
    fn go<N, E>(i: usize, rows: &mut Vec<usize>, acc: f64, nt: usize, ns: usize, kmax: usize, node: &N, edge: &E, best: &mut f64)
    where
        N: Fn(usize, usize) -> f64,
        E: Fn(usize, Option<usize>, usize, usize) -> f64,
    {
        if i > nt {
            if rows[nt] == ns && acc < *best {
                *best = acc;
            }
            return;
        }
        let from = rows[i - 1];
        for d in 0..=kmax {
            let to = from + d;
            if to > ns {
                break;
            }
            let before = if i >= 2 { Some(rows[i - 2]) } else { None };
            let c = (acc + node(i, to)) + edge(i, before, from, to);
            if !c.is_finite() {
                continue;
            }
            rows.push(to);
            go(i + 1, rows, c, nt, ns, kmax, node, edge, best);
            rows.pop();
        }
    }
    let mut best = f64::INFINITY;
    let start = node(0, 0);
    if start.is_finite() {
        go(1, &mut vec![0], start, nt, ns, kmax, node, edge, &mut best);
    }
    best
}

/// Random lattices of at most 8 x 10; returns how many disagree bitwise with
/// enumeration (cost, endpoints, or feasibility).
pub fn dp_enumeration_mismatches(seed: u64, cases: usize) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = 0;
    for _ in 0..cases {
        let nt = rng.random_range(2..=8);
        let ns = rng.random_range(2..=10);
        let kmax = rng.random_range(1..=3);
        let mut nodes = vec![vec![0.0; ns + 1]; nt + 1];
        for row in nodes.iter_mut().skip(1) {
            for c in row.iter_mut() {
                *c = if rng.random_bool(0.1) { f64::INFINITY } else { rng.random_range(0.0..10.0) };
            }
        }
        nodes[0][0] = rng.random_range(0.0..1.0);
        let mut edges: HashMap<(usize, Option<usize>, usize, usize), f64> = HashMap::new();
        for i in 1..=nt {
            for from in 0..=ns {
                for to in from..=(from + kmax).min(ns) {
                    let befores: Vec<Option<usize>> = if i == 1 { vec![None] } else { (0..=from).map(Some).collect() };
                    for b in befores {
                        let v = if rng.random_bool(0.05) { f64::INFINITY } else { rng.random_range(0.0..5.0) };
                        edges.insert((i, b, from, to), v);
                    }
                }
            }
        }
        let node = |i: usize, j: usize| nodes[i][j];
        let edge = |i: usize, b: Option<usize>, f: usize, t: usize| edges[&(i, b, f, t)];
        let oracle = enumerate(nt, ns, kmax, &node, &edge);
        let ok = match dp_search_with(nt, ns, kmax, node, edge) {
            Some((rows, cost)) => cost.to_bits() == oracle.to_bits() && rows[0] == 0 && rows[nt] == ns,
            None => oracle.is_infinite(),
        };
        bad += usize::from(!ok);
    }
    bad
}

// ---- QP -------------------------------------------------------------------

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

/// Strictly convex, feasible problem with up to `max_n` variables, `max_m`
/// inequalities (a mix of tight and slack at a known feasible point) and a
/// few equalities.
pub fn random_qp(rng: &mut ChaCha8Rng, max_n: usize, max_m: usize) -> QpProblem {
    let n = rng.random_range(2..=max_n);
    let m = rng.random_range(1..=max_m);
    let me = rng.random_range(0..=3.min(n - 1));
    let l = random_matrix(rng, n, n);
    let q = l.transpose() * &l + DMatrix::identity(n, n) * 0.1;
    let c = random_matrix(rng, n, 1).column(0) * 5.0;
    let x_feas = random_matrix(rng, n, 1).column(0).into_owned();
    let a_iq = random_matrix(rng, m, n);
    let slack = DVector::from_fn(m, |_, _| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..1.0) });
    let b_iq = &a_iq * &x_feas + slack;
    let a_eq = random_matrix(rng, me, n);
    let b_eq = &a_eq * &x_feas;
    QpProblem::new(q, c.into_owned()).with_eq(a_eq, b_eq).with_iq(a_iq, b_iq)
}

/// Exact minimum by enumerating candidate active sets: each subset's KKT
/// system is solved and the point kept if it is primal feasible with
/// non-negative inequality multipliers.
pub fn kkt_enumeration(p: &QpProblem) -> f64 {
    let n = p.num_vars();
    let (me, m) = (p.a_eq.nrows(), p.a_iq.nrows());
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << m) {
        let active: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let k = me + active.len();
        if k > n {
            continue;
        }
        let mut kkt = DMatrix::zeros(n + k, n + k);
        let mut rhs = DVector::zeros(n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(&p.q);
        rhs.rows_mut(0, n).copy_from(&(-&p.c));
        for r in 0..k {
            let (row, b) = if r < me { (p.a_eq.row(r), p.b_eq[r]) } else { (p.a_iq.row(active[r - me]), p.b_iq[active[r - me]]) };
            kkt.view_mut((n + r, 0), (1, n)).copy_from(&row);
            kkt.view_mut((0, n + r), (n, 1)).copy_from(&row.transpose());
            rhs[n + r] = b;
        }
        let Some(sol) = kkt.lu().solve(&rhs) else { continue };
        let x = sol.rows(0, n).into_owned();
        let feasible = (&p.a_iq * &x - &p.b_iq).max() <= 1e-9 && (me == 0 || (&p.a_eq * &x - &p.b_eq).abs().max() <= 1e-9);
        let dual_ok = (me..k).all(|r| sol[n + r] >= -1e-9);
        if feasible && dual_ok {
            best = best.min(p.objective(&x));
        }
    }
    best
}

/// Largest relative objective gap between the solver and the enumeration oracle.
pub fn qp_worst_gap(seed: u64, cases: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let settings = QpSettings::default();
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let p = random_qp(&mut rng, 8, 12);
        let gap = match solve_qp(&p, &settings) {
            Ok(sol) => {
                let want = kkt_enumeration(&p);
                (sol.objective - want).abs() / want.abs().max(1.0)
            }
            Err(_) => f64::INFINITY,
        };
        worst = worst.max(gap);
    }
    worst
}

// ---- Bezier ---------------------------------------------------------------

pub fn random_segment(rng: &mut ChaCha8Rng) -> BezierSegment {
    let n = rng.random_range(4..=8);
    let ctrl = (0..=n).map(|_| rng.random_range(-10.0..10.0)).collect();
    BezierSegment::new(ctrl, rng.random_range(0.1..5.0), rng.random_range(-3.0..3.0)).unwrap()
}

/// Segments whose sampled station leaves the control hull or misses an endpoint.
pub fn bezier_hull_violations(seed: u64, count: usize) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = 0;
    for _ in 0..count {
        let seg = random_segment(&mut rng);
        let c = &seg.control_points;
        let lo = c.iter().copied().fold(f64::INFINITY, f64::min) * seg.h;
        let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max) * seg.h;
        let t = seg.t_start + rng.random_range(0.0..=1.0) * seg.h;
        let s = seg.eval(t).unwrap().0;
        let start = seg.eval(seg.t_start).unwrap().0;
        let end = seg.eval(seg.t_end()).unwrap().0;
        let ok = s >= lo - 1e-9
            && s <= hi + 1e-9
            && (start - seg.h * c[0]).abs() <= 1e-12 * seg.h * c[0].abs().max(1.0)
            && (end - seg.h * c[c.len() - 1]).abs() <= 1e-9;
        bad += usize::from(!ok);
    }
    bad
}

/// Largest jump in `s`, `s_dot` or `s_ddot` across segment joins of an
/// optimized plan; zero for a single segment.
pub fn join_gap(plan: &Plan) -> f64 {
    let SpeedPlan::Optimized(profile) = &plan.speed else { return f64::INFINITY };
    profile
        .segments
        .windows(2)
        .map(|w| {
            let a = w[0].eval(w[0].t_end()).unwrap();
            let b = w[1].eval(w[1].t_start).unwrap();
            (a.0 - b.0).abs().max((a.1 - b.1).abs()).max((a.2 - b.2).abs())
        })
        .fold(0.0, f64::max)
}

/// Uniform samples inside the plan's corridor that land in an ST obstacle.
pub fn corridor_hits(plan: &Plan, seed: u64, samples: usize) -> usize {
    let corr = plan.corridor.as_ref().expect("optimized plan has a corridor");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0;
    for _ in 0..samples {
        let seg = &corr.segments[rng.random_range(0..corr.segments.len())];
        let t = rng.random_range(seg.t_start..seg.t_end);
        let (lo, hi) = (seg.lower_at(t), seg.upper_at(t));
        let s = if hi > lo { rng.random_range(lo..hi) } else { lo };
        hits += usize::from(plan.st_obstacles.iter().any(|o| o.contains(t, s)));
    }
    hits
}

// ---- Dubins ---------------------------------------------------------------

/// `(worst admissibility deficit, worst symmetry error)` over random pose pairs.
pub fn dubins_worst(seed: u64, pairs: usize) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pose = |rng: &mut ChaCha8Rng| Pose::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0), rng.random_range(-PI..PI));
    let (mut adm, mut sym): (f64, f64) = (0.0, 0.0);
    for _ in 0..pairs {
        let (a, b) = (pose(&mut rng), pose(&mut rng));
        let r = rng.random_range(0.5..4.0);
        let fwd = dubins_shortest(a, b, r).total_length;
        let back = dubins_shortest(Pose::new(b.x, b.y, b.theta + PI), Pose::new(a.x, a.y, a.theta + PI), r).total_length;
        adm = adm.max(a.distance(&b) - fwd);
        sym = sym.max((fwd - back).abs() / fwd.max(1.0));
    }
    (adm, sym)
}

// ---- determinism ----------------------------------------------------------

/// Exact text rendering of everything a run logs (floats print round-trip exact).
pub fn log_fingerprint(log: &InterceptionLog) -> String {
    format!("{:?}\n{:?}\n{:?}\n{}", log.rows, log.observations, log.outcome, log.replans)
}
