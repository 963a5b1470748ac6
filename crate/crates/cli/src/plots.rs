//! SVG figures. Every renderer takes the output directory, reads the CSVs it
//! needs from there and writes into `DIR/plots/`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::records::{read_csv, read_optional, LogCsvRow, ObstacleRow, PathRow, PredictRow, ProfileRow, StRow, TraceCsvRow};
use crate::CliError;

const SIZE: (u32, u32) = (900, 650);

struct Series {
    label: &'static str,
    color: RGBColor,
    points: Vec<(f64, f64)>,
}

struct Patch {
    color: RGBColor,
    points: Vec<(f64, f64)>,
}

struct Figure<'a> {
    title: &'a str,
    x_desc: &'a str,
    y_desc: &'a str,
    series: Vec<Series>,
    patches: Vec<Patch>,
    equal_aspect: bool,
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    let span = hi - lo;
    if span <= 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    (lo - 0.05 * span, hi + 0.05 * span)
}

fn bounds(fig: &Figure) -> ((f64, f64), (f64, f64)) {
    let pts = fig.series.iter().flat_map(|s| &s.points).chain(fig.patches.iter().flat_map(|p| &p.points));
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts.filter(|(x, y)| x.is_finite() && y.is_finite()) {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let (mut xr, mut yr) = (padded(x0, x1), padded(y0, y1));
    if fig.equal_aspect {
        // Grow the narrower axis so one metre spans the same pixels both ways.
        let (plot_w, plot_h) = (SIZE.0 as f64 - 80.0, SIZE.1 as f64 - 100.0);
        let scale = ((xr.1 - xr.0) / plot_w).max((yr.1 - yr.0) / plot_h);
        let (cx, cy) = (0.5 * (xr.0 + xr.1), 0.5 * (yr.0 + yr.1));
        xr = (cx - 0.5 * scale * plot_w, cx + 0.5 * scale * plot_w);
        yr = (cy - 0.5 * scale * plot_h, cy + 0.5 * scale * plot_h);
    }
    (xr, yr)
}

fn plot_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("cannot render {}: {e}", path.display()))
}

fn render(path: &Path, fig: &Figure) -> Result<(), CliError> {
    let ((x0, x1), (y0, y1)) = bounds(fig);
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_err(path, e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(fig.title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(56)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(|e| plot_err(path, e))?;
    chart
        .configure_mesh()
        .x_desc(fig.x_desc)
        .y_desc(fig.y_desc)
        .light_line_style(WHITE.mix(0.0))
        .draw()
        .map_err(|e| plot_err(path, e))?;
    for p in &fig.patches {
        chart
            .draw_series(std::iter::once(Polygon::new(p.points.clone(), p.color.mix(0.35).filled())))
            .map_err(|e| plot_err(path, e))?;
    }
    for s in &fig.series {
        let color = s.color;
        let drawn = chart
            .draw_series(LineSeries::new(s.points.iter().copied(), color.stroke_width(2)))
            .map_err(|e| plot_err(path, e))?;
        if !s.label.is_empty() {
            drawn.label(s.label).legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2)));
        }
    }
    if fig.series.iter().any(|s| !s.label.is_empty()) {
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.85))
            .border_style(BLACK.mix(0.4))
            .position(SeriesLabelPosition::UpperLeft)
            .draw()
            .map_err(|e| plot_err(path, e))?;
    }
    root.present().map_err(|e| plot_err(path, e))
}

fn plots_dir(dir: &Path) -> Result<PathBuf, CliError> {
    let p = dir.join("plots");
    fs::create_dir_all(&p).map_err(|e| CliError::io(&p, e))?;
    Ok(p)
}

const BLUE_: RGBColor = RGBColor(31, 119, 180);
const ORANGE: RGBColor = RGBColor(255, 127, 14);
const GREEN_: RGBColor = RGBColor(44, 160, 44);
const RED_: RGBColor = RGBColor(214, 39, 40);
const PURPLE: RGBColor = RGBColor(148, 103, 189);
const GREY: RGBColor = RGBColor(110, 110, 110);

pub fn prediction_error(dir: &Path) -> Result<PathBuf, CliError> {
    let rows: Vec<PredictRow> = read_csv(&dir.join("predict.csv"))?;
    let out = plots_dir(dir)?.join("prediction_error.svg");
    let fig = Figure {
        title: "Prediction error",
        x_desc: "prediction horizon [s]",
        y_desc: "relative error [%]",
        series: vec![
            Series { label: "mean", color: BLUE_, points: rows.iter().map(|r| (r.horizon, 100.0 * r.mean_error)).collect() },
            Series { label: "max", color: ORANGE, points: rows.iter().map(|r| (r.horizon, 100.0 * r.max_error)).collect() },
        ],
        patches: Vec::new(),
        equal_aspect: false,
    };
    render(&out, &fig)?;
    Ok(out)
}

fn obstacle_patches(rows: &[ObstacleRow]) -> Vec<Patch> {
    let mut by_id: BTreeMap<usize, (bool, Vec<(f64, f64)>)> = BTreeMap::new();
    for r in rows {
        let e = by_id.entry(r.id).or_insert_with(|| (r.kind == "dynamic", Vec::new()));
        e.1.push((r.x, r.y));
    }
    by_id
        .into_values()
        .map(|(dynamic, points)| Patch { color: if dynamic { ORANGE } else { GREY }, points })
        .collect()
}

/// Map view: obstacles at `t = 0`, paths, predicted and true target tracks and,
/// when `log.csv` is present, the driven robot track.
pub fn path(dir: &Path) -> Result<PathBuf, CliError> {
    let rows: Vec<PathRow> = read_csv(&dir.join("path.csv"))?;
    let obstacles: Vec<ObstacleRow> = read_csv(&dir.join("obstacles.csv"))?;
    let log: Option<Vec<LogCsvRow>> = read_optional(&dir.join("log.csv"))?;
    let pick = |kind: &str| rows.iter().filter(|r| r.kind == kind).map(|r| (r.x, r.y)).collect::<Vec<_>>();
    let mut series = vec![
        Series { label: "Hybrid A*", color: GREY, points: pick("coarse") },
        Series { label: "smoothed path", color: BLUE_, points: pick("smoothed") },
        Series { label: "predicted target", color: PURPLE, points: pick("prediction") },
        Series { label: "true target", color: RED_, points: pick("target") },
    ];
    if let Some(log) = log {
        series.push(Series { label: "robot", color: GREEN_, points: log.iter().map(|r| (r.robot_x, r.robot_y)).collect() });
    }
    series.retain(|s| !s.points.is_empty());
    let out = plots_dir(dir)?.join("path.svg");
    render(
        &out,
        &Figure { title: "Path", x_desc: "x [m]", y_desc: "y [m]", series, patches: obstacle_patches(&obstacles), equal_aspect: true },
    )?;
    Ok(out)
}

pub fn convergence(dir: &Path) -> Result<PathBuf, CliError> {
    let rows: Vec<TraceCsvRow> = read_csv(&dir.join("trace.csv"))?;
    let col = |f: fn(&TraceCsvRow) -> f64| rows.iter().map(|r| (r.iteration as f64, f(r))).collect::<Vec<_>>();
    let fig = Figure {
        title: "Smoother convergence",
        x_desc: "iteration",
        y_desc: "objective",
        series: vec![
            Series { label: "total", color: BLUE_, points: col(|r| r.total) },
            Series { label: "obstacle", color: RED_, points: col(|r| r.obstacle) },
            Series { label: "curvature", color: ORANGE, points: col(|r| r.curvature) },
            Series { label: "smoothness", color: GREEN_, points: col(|r| r.smoothness) },
        ],
        patches: Vec::new(),
        equal_aspect: false,
    };
    let out = plots_dir(dir)?.join("convergence.svg");
    render(&out, &fig)?;
    Ok(out)
}

fn grouped(rows: &[StRow], kind: &str) -> Vec<Vec<(f64, f64)>> {
    let mut by_id: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.kind == kind) {
        by_id.entry(r.id).or_default().push((r.t, r.s));
    }
    by_id.into_values().collect()
}

pub fn st_graph(dir: &Path) -> Result<PathBuf, CliError> {
    let rows: Vec<StRow> = read_csv(&dir.join("st_graph.csv"))?;
    let patches = grouped(&rows, "obstacle").into_iter().map(|points| Patch { color: RED_, points }).collect();
    let mut series = Vec::new();
    for (kind, label, color) in [
        ("corridor_lower", "corridor lower", GREY),
        ("corridor_upper", "corridor upper", GREY),
        ("reference", "DP reference", PURPLE),
        ("uniform", "uniform speed", ORANGE),
        ("profile", "optimized profile", BLUE_),
    ] {
        // Corridor bounds are one curve per segment; give the legend one entry.
        for (i, points) in grouped(&rows, kind).into_iter().enumerate() {
            series.push(Series { label: if i == 0 { label } else { "" }, color, points });
        }
    }
    let out = plots_dir(dir)?.join("st_graph.svg");
    render(&out, &Figure { title: "ST graph", x_desc: "t [s]", y_desc: "s [m]", series, patches, equal_aspect: false })?;
    Ok(out)
}

fn profile_plot(dir: &Path, file: &str, title: &str, y_desc: &str, f: fn(&ProfileRow) -> f64) -> Result<PathBuf, CliError> {
    let rows: Vec<ProfileRow> = read_csv(&dir.join("profile.csv"))?;
    let series = vec![Series { label: "optimized profile", color: BLUE_, points: rows.iter().map(|r| (r.t, f(r))).collect() }];
    let out = plots_dir(dir)?.join(file);
    render(&out, &Figure { title, x_desc: "t [s]", y_desc, series, patches: Vec::new(), equal_aspect: false })?;
    Ok(out)
}

pub fn speed(dir: &Path) -> Result<PathBuf, CliError> {
    profile_plot(dir, "speed.svg", "Speed", "v [m/s]", |r| r.v)
}

pub fn accel(dir: &Path) -> Result<PathBuf, CliError> {
    profile_plot(dir, "accel.svg", "Acceleration", "a [m/s^2]", |r| r.a)
}

/// Renders every figure whose input CSVs exist in `dir`.
pub fn render_available(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let has = |f: &str| dir.join(f).exists();
    let mut out = Vec::new();
    if has("predict.csv") {
        out.push(prediction_error(dir)?);
    }
    if has("path.csv") && has("obstacles.csv") {
        out.push(path(dir)?);
    }
    if has("trace.csv") {
        out.push(convergence(dir)?);
    }
    if has("st_graph.csv") {
        out.push(st_graph(dir)?);
    }
    if has("profile.csv") {
        out.push(speed(dir)?);
        out.push(accel(dir)?);
    }
    Ok(out)
}
