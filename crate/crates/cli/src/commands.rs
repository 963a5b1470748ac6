use std::fs;
use std::path::{Path, PathBuf};

use intercept_core::predictor::predict_position;
use intercept_core::sim::{plan_initial, prediction_errors, Plan, PlanFailure, SpeedPlan};
use intercept_core::{run_interception, summarize, Outcome, Scenario, ScenarioFile, SpeedMode};
use rayon::prelude::*;

use crate::plots;
use crate::records::*;
use crate::{CliError, RunFlags};

const BUILTIN: &[(&str, &str)] = &[
    ("minimal", include_str!("../../../scenarios/minimal.toml")),
    ("fig3", include_str!("../../../scenarios/fig3.toml")),
    ("fig4", include_str!("../../../scenarios/fig4.toml")),
    ("table1_uniform", include_str!("../../../scenarios/table1_uniform.toml")),
    ("table1_curve", include_str!("../../../scenarios/table1_curve.toml")),
    ("table2", include_str!("../../../scenarios/table2.toml")),
];

/// Loads `arg` as a TOML file, or as a built-in scenario name if no such file exists.
pub fn load_file(arg: &str) -> Result<ScenarioFile, CliError> {
    let path = Path::new(arg);
    let parsed = if path.exists() {
        ScenarioFile::load(path)
    } else if let Some((_, text)) = BUILTIN.iter().find(|(name, _)| *name == arg) {
        ScenarioFile::parse(text)
    } else {
        let names: Vec<&str> = BUILTIN.iter().map(|(n, _)| *n).collect();
        return Err(CliError::Scenario(format!("no scenario file {arg} and no built-in of that name (built-ins: {})", names.join(", "))));
    };
    parsed.map_err(|e| CliError::Scenario(e.to_string()))
}

fn build(file: &ScenarioFile, seed: Option<u64>) -> Result<Scenario, CliError> {
    file.build(seed).map_err(|e| CliError::Scenario(e.to_string()))
}

fn out_dir(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))
}

fn report_plots(paths: &[PathBuf]) {
    for p in paths {
        eprintln!("wrote {}", p.display());
    }
}

fn failure(f: PlanFailure) -> CliError {
    CliError::Infeasible(format!("{:?} stage: {}", f.stage, f.message).to_lowercase())
}

pub const PREDICT_HORIZONS: std::ops::RangeInclusive<u32> = 0..=15;

pub fn predict(file: ScenarioFile, seed: Option<u64>, trials: u64, out: &Path) -> Result<(), CliError> {
    if trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    out_dir(out)?;
    let base = seed.unwrap_or(file.seed);
    build(&file, Some(base))?;
    let horizons: Vec<f64> = PREDICT_HORIZONS.map(f64::from).collect();
    let per_trial: Vec<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let scn = build(&file, Some(base.wrapping_add(i)))?;
            prediction_errors(&scn.target, &scn.noise, scn.plan.observations, scn.plan.degree, &horizons)
                .map_err(|e| CliError::Runtime(e.to_string()))
        })
        .collect::<Result<_, _>>()?;
    let rows: Vec<PredictRow> = horizons
        .iter()
        .enumerate()
        .map(|(j, &h)| {
            let col = per_trial.iter().map(|e| e[j]);
            PredictRow {
                horizon: h,
                mean_error: col.clone().sum::<f64>() / trials as f64,
                max_error: col.fold(0.0, f64::max),
                trials,
            }
        })
        .collect();
    write_csv(&out.join("predict.csv"), &rows)?;
    println!("{}: relative prediction error over {trials} trials (seeds {base}..)", file.name);
    println!("{:>10} {:>10} {:>10}", "horizon_s", "mean_%", "max_%");
    for r in &rows {
        println!("{:>10.0} {:>10.3} {:>10.3}", r.horizon, 100.0 * r.mean_error, 100.0 * r.max_error);
    }
    report_plots(&[plots::prediction_error(out)?]);
    Ok(())
}

fn obstacle_rows(scn: &Scenario) -> Vec<ObstacleRow> {
    let mut rows = Vec::new();
    for o in &scn.map.obstacles {
        let v = o.velocity();
        let kind = if o.is_static() { "static" } else { "dynamic" };
        for (i, p) in o.inflated_polygon_at(0.0).iter().enumerate() {
            rows.push(ObstacleRow { id: o.id, kind: kind.into(), vertex: i, x: p.x, y: p.y, vx: v.x, vy: v.y });
        }
    }
    rows
}

fn polyline(kind: &str, pts: impl IntoIterator<Item = (f64, f64)>) -> Vec<PathRow> {
    pts.into_iter().enumerate().map(|(index, (x, y))| PathRow { kind: kind.into(), index, x, y }).collect()
}

fn path_rows(scn: &Scenario, plan: &Plan) -> Vec<PathRow> {
    let samples = 200;
    let times: Vec<f64> = (0..=samples).map(|i| plan.t0 + plan.horizon * i as f64 / samples as f64).collect();
    let mut rows = polyline("coarse", plan.coarse.iter().map(|p| (p.x, p.y)));
    rows.extend(polyline("smoothed", plan.smoothed.points.iter().map(|p| (p.x, p.y))));
    rows.extend(polyline("prediction", times.iter().map(|&t| predict_position(&plan.prediction, t)).map(|p| (p.x, p.y))));
    rows.extend(polyline("target", times.iter().map(|&t| scn.target_position(t)).map(|p| (p.x, p.y))));
    rows
}

fn trace_rows(plan: &Plan) -> Vec<TraceCsvRow> {
    plan.smoother_trace
        .iter()
        .map(|r| TraceCsvRow {
            iteration: r.iteration,
            obstacle: r.terms.obs,
            curvature: r.terms.cur,
            smoothness: r.terms.smo,
            total: r.total,
        })
        .collect()
}

fn write_path_outputs(scn: &Scenario, plan: &Plan, out: &Path) -> Result<(), CliError> {
    write_csv(&out.join("path.csv"), &path_rows(scn, plan))?;
    write_csv_with_header(&out.join("obstacles.csv"), &["id", "kind", "vertex", "x", "y", "vx", "vy"], &obstacle_rows(scn))?;
    write_csv(&out.join("trace.csv"), &trace_rows(plan))
}

const CURVE_SAMPLES: usize = 400;

fn st_rows(plan: &Plan) -> Vec<StRow> {
    let mut rows = Vec::new();
    for (id, o) in plan.st_obstacles.iter().enumerate() {
        let verts = o.vertices();
        for (t, s) in verts.iter().chain(std::iter::once(&verts[0])) {
            rows.push(StRow { kind: "obstacle".into(), id, source: Some(o.source), t: *t, s: *s });
        }
    }
    if let Some(r) = &plan.reference {
        for (t, s) in r.times().into_iter().zip(&r.stations) {
            rows.push(StRow { kind: "reference".into(), id: 0, source: None, t, s: *s });
        }
    }
    if let Some(c) = &plan.corridor {
        for (id, seg) in c.segments.iter().enumerate() {
            for t in [seg.t_start, seg.t_end] {
                rows.push(StRow { kind: "corridor_lower".into(), id, source: None, t, s: seg.lower_at(t) });
                rows.push(StRow { kind: "corridor_upper".into(), id, source: None, t, s: seg.upper_at(t) });
            }
        }
    }
    let s_max = plan.smoothed.length();
    for t in [0.0, plan.horizon] {
        rows.push(StRow { kind: "uniform".into(), id: 0, source: None, t, s: s_max * t / plan.horizon });
    }
    if let SpeedPlan::Optimized(_) = plan.speed {
        for i in 0..=CURVE_SAMPLES {
            let t = plan.horizon * i as f64 / CURVE_SAMPLES as f64;
            rows.push(StRow { kind: "profile".into(), id: 0, source: None, t, s: plan.speed.eval(t).0 });
        }
    }
    // Group by kind; the sort is stable, so each curve keeps its point order.
    rows.sort_by_key(|r| ["obstacle", "reference", "corridor_lower", "corridor_upper", "uniform", "profile"].iter().position(|k| *k == r.kind));
    rows
}

fn profile_rows(plan: &Plan) -> Vec<ProfileRow> {
    (0..=CURVE_SAMPLES)
        .map(|i| {
            let t = plan.horizon * i as f64 / CURVE_SAMPLES as f64;
            let (s, v, a) = plan.speed.eval(t);
            ProfileRow { t, s, v, a }
        })
        .collect()
}

fn write_speed_outputs(plan: &Plan, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    write_csv(&out.join("st_graph.csv"), &st_rows(plan))?;
    let mut figures = vec![plots::st_graph(out)?];
    if let SpeedPlan::Optimized(_) = plan.speed {
        write_csv(&out.join("profile.csv"), &profile_rows(plan))?;
        figures.push(plots::speed(out)?);
        figures.push(plots::accel(out)?);
    }
    Ok(figures)
}

pub fn plan(file: ScenarioFile, seed: Option<u64>, out: &Path) -> Result<(), CliError> {
    let mut scn = build(&file, seed)?;
    scn.plan.speed_mode = SpeedMode::Uniform;
    out_dir(out)?;
    let plan = plan_initial(&scn).map_err(failure)?;
    write_path_outputs(&scn, &plan, out)?;
    println!(
        "{}: goal ({:.3}, {:.3}, {:.3}), coarse {} poses, smoothed {} points, length {:.3} m, max curvature {:.4} 1/m",
        scn.name,
        plan.goal.x,
        plan.goal.y,
        plan.goal.theta,
        plan.coarse.len(),
        plan.smoothed.points.len(),
        plan.smoothed.length(),
        plan.smoothed.max_curvature()
    );
    report_plots(&[plots::path(out)?, plots::convergence(out)?]);
    Ok(())
}

pub fn speed(file: ScenarioFile, seed: Option<u64>, out: &Path) -> Result<(), CliError> {
    let mut scn = build(&file, seed)?;
    scn.plan.speed_mode = SpeedMode::Optimized;
    out_dir(out)?;
    let plan = plan_initial(&scn).map_err(failure)?;
    let figures = write_speed_outputs(&plan, out)?;
    if let SpeedPlan::Optimized(p) = &plan.speed {
        println!(
            "{}: {} ST obstacles, {} segments, final station {:.3} of {:.3} m, max |a| {:.3}, rms a {:.4}",
            scn.name,
            plan.st_obstacles.len(),
            p.segments.len(),
            p.final_station(),
            plan.smoothed.length(),
            p.max_abs_accel(),
            p.rms_accel()
        );
    }
    report_plots(&figures);
    Ok(())
}

pub fn apply_flags(scn: &mut Scenario, flags: &RunFlags) {
    if let Some(on) = flags.replan {
        scn.plan.replan_period = if on.0 { Some(scn.plan.replan_period.unwrap_or(1.0)) } else { None };
    }
    if let Some(t) = flags.track {
        scn.plan.tracking = t.into();
    }
    if let Some(m) = flags.speed_mode {
        scn.plan.speed_mode = m.into();
    }
}

fn timing_line(label: &str, t: &intercept_core::sim::StageTimings) -> String {
    format!(
        "{label}: prediction {:.3} ms, path {:.3} ms, speed {:.3} ms, total {:.3} ms",
        1e3 * t.prediction,
        1e3 * t.path,
        1e3 * t.speed,
        1e3 * t.total
    )
}

pub fn intercept(file: ScenarioFile, seed: Option<u64>, flags: &RunFlags, out: &Path) -> Result<(), CliError> {
    let mut scn = build(&file, seed)?;
    apply_flags(&mut scn, flags);
    out_dir(out)?;
    let log = run_interception(&scn);
    let summary = summarize(&scn, &log);
    write_csv(&out.join("summary.csv"), &[&summary])?;
    write_csv_with_header(&out.join("observations.csv"), &["t", "x", "y", "true_x", "true_y"], &log.observations)?;
    write_csv_with_header(
        &out.join("log.csv"),
        &["t", "robot_x", "robot_y", "robot_theta", "robot_v", "robot_a", "station", "target_x", "target_y", "target_distance", "min_clearance"],
        &log.rows,
    )?;
    eprintln!("{}", timing_line("timings", &log.timings));
    if let Outcome::Infeasible { stage, message } = &log.outcome {
        return Err(CliError::Infeasible(format!("{stage:?} stage: {message}").to_lowercase()));
    }
    let plan = log.plan.as_ref().expect("feasible runs keep their plan");
    write_path_outputs(&scn, plan, out)?;
    let mut figures = write_speed_outputs(plan, out)?;
    figures.push(plots::path(out)?);
    figures.push(plots::convergence(out)?);
    println!(
        "{}: {}, miss {:.3} m, min clearance {:.3} m, replans {}",
        summary.scenario, summary.outcome, summary.miss_distance, summary.min_clearance, summary.replans
    );
    report_plots(&figures);
    Ok(())
}

fn stats(v: &mut [f64]) -> (f64, f64, f64, f64) {
    v.sort_by(f64::total_cmp);
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    (v[v.len() / 2], mean, v[0], v[v.len() - 1])
}

pub fn bench(file: ScenarioFile, seed: Option<u64>, repeat: usize, parallel: bool, flags: &RunFlags, out: &Path) -> Result<(), CliError> {
    if repeat == 0 {
        return Err(CliError::Usage("--repeat must be at least 1".into()));
    }
    let mut scn = build(&file, seed)?;
    apply_flags(&mut scn, flags);
    out_dir(out)?;
    let once = |run: usize| {
        plan_initial(&scn).map_err(failure).map(|p| BenchRow {
            run,
            prediction_ms: 1e3 * p.timings.prediction,
            path_ms: 1e3 * p.timings.path,
            speed_ms: 1e3 * p.timings.speed,
            total_ms: 1e3 * p.timings.total,
        })
    };
    let rows: Vec<BenchRow> = if parallel {
        (0..repeat).into_par_iter().map(once).collect::<Result<_, _>>()?
    } else {
        (0..repeat).map(once).collect::<Result<_, _>>()?
    };
    write_csv(&out.join("bench.csv"), &rows)?;
    println!("{}: {repeat} plans{}", scn.name, if parallel { " (parallel)" } else { "" });
    println!("{:<15} {:>10} {:>10} {:>10} {:>10}", "stage", "median_ms", "mean_ms", "min_ms", "max_ms");
    type Column = (&'static str, fn(&BenchRow) -> f64);
    let cols: [Column; 4] = [
        ("Prediction", |r| r.prediction_ms),
        ("Path-Planner", |r| r.path_ms),
        ("Speed-Planner", |r| r.speed_ms),
        ("Total", |r| r.total_ms),
    ];
    for (label, f) in cols {
        let (med, mean, lo, hi) = stats(&mut rows.iter().map(f).collect::<Vec<_>>());
        println!("{label:<15} {med:>10.3} {mean:>10.3} {lo:>10.3} {hi:>10.3}");
    }
    Ok(())
}

pub fn plot(dir: &Path) -> Result<(), CliError> {
    if !dir.is_dir() {
        return Err(CliError::Usage(format!("{} is not a directory", dir.display())));
    }
    let figures = plots::render_available(dir)?;
    if figures.is_empty() {
        return Err(CliError::Usage(format!("no plottable CSV files in {}", dir.display())));
    }
    report_plots(&figures);
    Ok(())
}
