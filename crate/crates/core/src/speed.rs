//! Speed optimization over trapezoidal corridors as a convex QP.
//!
//! The decision vector holds the scaled control points of every segment, row
//! major by segment. The cost is `w1 * integral of s_ddot^2 + w2 * (s(T) - s_ref)^2`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::bezier::{bernstein_gram, BezierError, BezierSegment, SpeedProfile};
use crate::qp::{solve_qp, QpError, QpProblem, QpSettings, QpSolution};
use crate::smoother::PathPolyline;
use crate::st_graph::{Corridor, ReferenceProfile};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpeedError {
    #[error("assembly error: {0}")]
    Assembly(String),
    #[error("speed QP is infeasible over the given corridor")]
    Infeasible(Box<Corridor>),
    #[error("QP solver failed: {0}")]
    Solver(QpError),
    #[error("optimized profile failed verification: {0}")]
    Verification(String),
    #[error(transparent)]
    Bezier(#[from] BezierError),
}

/// Initial station is always zero; speed and acceleration are given.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryConditions {
    pub v0: f64,
    pub a0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedLimits {
    pub v_min: f64,
    /// Upper speed bound per corridor segment.
    pub v_max: Vec<f64>,
    pub a_min: f64,
    pub a_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedConfig {
    pub order: usize,
    /// Weight on integrated squared acceleration.
    pub w1: f64,
    /// Weight on squared terminal station error.
    pub w2: f64,
    /// Pin `s(T)` to the reference instead of penalizing the deviation.
    pub hard_terminal: bool,
    pub terminal_speed: Option<f64>,
    pub terminal_accel: Option<f64>,
    pub qp: QpSettings,
}

impl Default for SpeedConfig {
    fn default() -> Self {
        Self { order: 5, w1: 10.0, w2: 3.0, hard_terminal: false, terminal_speed: None, terminal_accel: None, qp: QpSettings::default() }
    }
}

/// Per-segment speed caps `min(v_max, sqrt(a_lat / kappa_j))`, where `kappa_j`
/// is the largest path curvature at stations the corridor segment can reach.
pub fn segment_speed_caps(corridor: &Corridor, path: &PathPolyline, v_max: f64, a_lat: f64) -> Vec<f64> {
    let stations = path.stations();
    let curv = path.curvatures();
    corridor
        .segments
        .iter()
        .map(|seg| {
            let lo = seg.lower_at(seg.t_start).min(seg.lower_at(seg.t_end));
            let hi = seg.upper_at(seg.t_start).max(seg.upper_at(seg.t_end));
            let kappa = curv
                .iter()
                .enumerate()
                .filter(|(i, _)| stations[i + 1] >= lo && stations[i + 1] <= hi)
                .map(|(_, k)| *k)
                .fold(0.0, f64::max);
            if kappa > 1e-12 {
                v_max.min((a_lat / kappa).sqrt())
            } else {
                v_max
            }
        })
        .collect()
}

/// Builds the speed QP; returns the problem and the constant term dropped from
/// the objective.
pub fn assemble_qp(
    corridor: &Corridor,
    profile_ref: &ReferenceProfile,
    bc: BoundaryConditions,
    limits: &SpeedLimits,
    cfg: &SpeedConfig,
) -> Result<(QpProblem, f64), SpeedError> {
    let m = corridor.segments.len();
    let n = cfg.order;
    if n < 4 {
        return Err(SpeedError::Assembly(format!("order {n} below 4")));
    }
    if m == 0 || limits.v_max.len() != m {
        return Err(SpeedError::Assembly(format!("{m} segments but {} speed caps", limits.v_max.len())));
    }
    if (corridor.segments[m - 1].t_end - profile_ref.horizon()).abs() > 1e-9 {
        return Err(SpeedError::Assembly("corridor and reference horizons differ".into()));
    }
    let w = n + 1;
    let nv = m * w;
    let var = |j: usize, i: usize| j * w + i;
    let nf = n as f64;
    let n2 = nf * (nf - 1.0);
    let s_ref = profile_ref.s_max();

    // ---- cost
    let g = bernstein_gram(n - 2);
    let mut q = DMatrix::zeros(nv, nv);
    let mut c = DVector::zeros(nv);
    for (j, seg) in corridor.segments.iter().enumerate() {
        let h = seg.duration();
        let scale = 2.0 * cfg.w1 * n2 * n2 / h;
        // second difference i maps to control points i, i+1, i+2 with weights 1, -2, 1
        for (a, ga) in g.iter().enumerate() {
            for (b, gab) in ga.iter().enumerate() {
                for (da, wa) in [1.0, -2.0, 1.0].iter().enumerate() {
                    for (db, wb) in [1.0, -2.0, 1.0].iter().enumerate() {
                        q[(var(j, a + da), var(j, b + db))] += scale * gab * wa * wb;
                    }
                }
            }
        }
    }
    let h_last = corridor.segments[m - 1].duration();
    let last = var(m - 1, n);
    let mut constant = 0.0;
    if !cfg.hard_terminal {
        q[(last, last)] += 2.0 * cfg.w2 * h_last * h_last;
        c[last] -= 2.0 * cfg.w2 * h_last * s_ref;
        constant = cfg.w2 * s_ref * s_ref;
    }

    // ---- equalities
    let mut eq_rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    let h0 = corridor.segments[0].duration();
    eq_rows.push((vec![(var(0, 0), h0)], 0.0));
    eq_rows.push((vec![(var(0, 0), -nf), (var(0, 1), nf)], bc.v0));
    eq_rows.push((vec![(var(0, 0), n2 / h0), (var(0, 1), -2.0 * n2 / h0), (var(0, 2), n2 / h0)], bc.a0));
    for j in 0..m - 1 {
        let (ha, hb) = (corridor.segments[j].duration(), corridor.segments[j + 1].duration());
        eq_rows.push((vec![(var(j, n), ha), (var(j + 1, 0), -hb)], 0.0));
        eq_rows.push((vec![(var(j, n), nf), (var(j, n - 1), -nf), (var(j + 1, 1), -nf), (var(j + 1, 0), nf)], 0.0));
        eq_rows.push((
            vec![
                (var(j, n), n2 / ha),
                (var(j, n - 1), -2.0 * n2 / ha),
                (var(j, n - 2), n2 / ha),
                (var(j + 1, 2), -n2 / hb),
                (var(j + 1, 1), 2.0 * n2 / hb),
                (var(j + 1, 0), -n2 / hb),
            ],
            0.0,
        ));
    }
    if cfg.hard_terminal {
        eq_rows.push((vec![(last, h_last)], s_ref));
    }
    if let Some(v) = cfg.terminal_speed {
        eq_rows.push((vec![(last, nf), (var(m - 1, n - 1), -nf)], v));
    }
    if let Some(a) = cfg.terminal_accel {
        eq_rows.push((
            vec![(last, n2 / h_last), (var(m - 1, n - 1), -2.0 * n2 / h_last), (var(m - 1, n - 2), n2 / h_last)],
            a,
        ));
    }

    // ---- inequalities (row sense <=)
    let mut iq_rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    for (j, seg) in corridor.segments.iter().enumerate() {
        let h = seg.duration();
        for i in 0..=n {
            let t = seg.t_start + h * i as f64 / nf;
            iq_rows.push((vec![(var(j, i), h)], corridor_upper(seg, t)));
            iq_rows.push((vec![(var(j, i), -h)], -corridor_lower(seg, t)));
        }
        for i in 0..n {
            iq_rows.push((vec![(var(j, i + 1), nf), (var(j, i), -nf)], limits.v_max[j]));
            iq_rows.push((vec![(var(j, i + 1), -nf), (var(j, i), nf)], -limits.v_min));
        }
        for i in 0..n - 1 {
            let k = n2 / h;
            iq_rows.push((vec![(var(j, i + 2), k), (var(j, i + 1), -2.0 * k), (var(j, i), k)], limits.a_max));
            iq_rows.push((vec![(var(j, i + 2), -k), (var(j, i + 1), 2.0 * k), (var(j, i), -k)], -limits.a_min));
        }
    }

    let dense = |rows: &[(Vec<(usize, f64)>, f64)]| {
        let mut a = DMatrix::zeros(rows.len(), nv);
        let mut b = DVector::zeros(rows.len());
        for (r, (coeffs, rhs)) in rows.iter().enumerate() {
            for &(k, v) in coeffs {
                a[(r, k)] += v;
            }
            b[r] = *rhs;
        }
        (a, b)
    };
    let (a_eq, b_eq) = dense(&eq_rows);
    let (a_iq, b_iq) = dense(&iq_rows);
    Ok((QpProblem::new(q, c).with_eq(a_eq, b_eq).with_iq(a_iq, b_iq), constant))
}

/// Corridor bounds evaluated at a control point's time abscissa.
fn corridor_upper(seg: &crate::st_graph::CorridorSegment, t: f64) -> f64 {
    seg.upper_at(t)
}

fn corridor_lower(seg: &crate::st_graph::CorridorSegment, t: f64) -> f64 {
    seg.lower_at(t)
}

/// Solution of the speed QP with the solver report.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedSolution {
    pub profile: SpeedProfile,
    /// Full objective including the constant terminal term.
    pub objective: f64,
    pub qp: QpSolution,
}

/// Assembles and solves the speed QP, then checks continuity, forward motion
/// and that 100 samples per segment stay inside the corridor.
pub fn optimize_speed(
    corridor: &Corridor,
    profile_ref: &ReferenceProfile,
    bc: BoundaryConditions,
    limits: &SpeedLimits,
    cfg: &SpeedConfig,
) -> Result<SpeedSolution, SpeedError> {
    let (qp, constant) = assemble_qp(corridor, profile_ref, bc, limits, cfg)?;
    let sol = match solve_qp(&qp, &cfg.qp) {
        Ok(s) => s,
        Err(QpError::Infeasible) => return Err(SpeedError::Infeasible(Box::new(corridor.clone()))),
        Err(e) => return Err(SpeedError::Solver(e)),
    };
    let w = cfg.order + 1;
    let segments = corridor
        .segments
        .iter()
        .enumerate()
        .map(|(j, seg)| BezierSegment::new(sol.x.rows(j * w, w).iter().copied().collect(), seg.duration(), seg.t_start))
        .collect::<Result<Vec<_>, _>>()?;
    let profile = SpeedProfile { segments, horizon: profile_ref.horizon() };
    let tol = 1e-5;
    profile.validate(tol).map_err(|e| SpeedError::Verification(e.to_string()))?;
    for (seg, bez) in corridor.segments.iter().zip(&profile.segments) {
        for k in 0..100 {
            let t = seg.t_start + seg.duration() * k as f64 / 99.0;
            let (s, _, _) = bez.eval(t)?;
            if s > seg.upper_at(t) + tol || s < seg.lower_at(t) - tol {
                return Err(SpeedError::Verification(format!("station {s} leaves corridor at t = {t}")));
            }
        }
    }
    let objective = cfg.w1 * profile.accel_energy() + if cfg.hard_terminal { 0.0 } else { cfg.w2 * (profile.final_station() - profile_ref.s_max()).powi(2) };
    debug_assert!((objective - (sol.objective + constant)).abs() <= 1e-6 * (1.0 + objective.abs()));
    Ok(SpeedSolution { profile, objective, qp: sol })
}

/// Discrete counterpart of the speed objective for a lattice profile: the
/// acceleration integral becomes `sum ((v_i - v_{i-1}) / dt)^2 dt` with the
/// initial speed as `v_{-1}`.
pub fn polyline_objective(profile: &ReferenceProfile, v0: f64, w1: f64, w2: f64, s_ref: f64) -> f64 {
    let dt = profile.dt;
    let mut prev = v0;
    let mut energy = 0.0;
    for v in profile.speeds() {
        let a = (v - prev) / dt;
        energy += a * a * dt;
        prev = v;
    }
    w1 * energy + w2 * (profile.s_max() - s_ref).powi(2)
}

/// `sqrt(1/T * sum ((v_i - v_{i-1}) / dt)^2 dt)` for a lattice profile.
pub fn polyline_rms_accel(profile: &ReferenceProfile, v0: f64) -> f64 {
    (polyline_objective(profile, v0, 1.0, 0.0, 0.0) / profile.horizon()).sqrt()
}
