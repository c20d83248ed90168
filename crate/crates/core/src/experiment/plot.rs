use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use super::online::{AccuracyRow, TrajectoryRow};
use super::{io_error, mean_std, ExperimentError};

/// Files written by [`emit_plots`].
pub const PLOT_FILES: [&str; 3] = [
    "cumulative_clicks.svg",
    "cumulative_normalized_clicks.svg",
    "accuracy.svg",
];

/// A mean curve over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSeries {
    pub name: String,
    /// `(day, mean over seeds)`.
    pub points: Vec<(f64, f64)>,
}

/// Mean accuracy with a one-standard-deviation band.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyBand {
    pub name: String,
    /// `(day, mean, std)`.
    pub points: Vec<(f64, f64, f64)>,
}

fn read_rows<T: serde::de::DeserializeOwned>(
    path: &Path,
    series: &str,
) -> Result<Vec<T>, ExperimentError> {
    if !path.exists() {
        return Err(ExperimentError::Plot(format!(
            "missing {} (needed for the {series} series)",
            path.display()
        )));
    }
    let mut reader = csv::Reader::from_path(path).map_err(|e| ExperimentError::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    reader
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| ExperimentError::Plot(format!("{}: {e}", path.display())))
}

/// Policies in first-seen order, each mapped to its seeds' rows.
fn group<T>(rows: &[T], key: impl Fn(&T) -> (&str, u64)) -> Vec<(String, BTreeMap<u64, Vec<&T>>)> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, BTreeMap<u64, Vec<&T>>> = BTreeMap::new();
    for r in rows {
        let (policy, seed) = key(r);
        if !groups.contains_key(policy) {
            order.push(policy.to_string());
        }
        groups
            .entry(policy.to_string())
            .or_default()
            .entry(seed)
            .or_default()
            .push(r);
    }
    order
        .into_iter()
        .map(|p| {
            let g = groups.remove(&p).expect("grouped above");
            (p, g)
        })
        .collect()
}

/// Mean cumulative clicks and mean cumulative normalized clicks per step,
/// one series per policy. Fails when policies cover different seeds.
pub(crate) fn cumulative_series_from(
    rows: &[TrajectoryRow],
) -> Result<(Vec<CurveSeries>, Vec<CurveSeries>), ExperimentError> {
    let grouped = group(rows, |r| (r.policy.as_str(), r.seed));
    let all_seeds: BTreeSet<u64> = rows.iter().map(|r| r.seed).collect();
    let mut clicks = Vec::new();
    let mut normalized = Vec::new();
    for (policy, by_seed) in &grouped {
        let missing: Vec<u64> = all_seeds
            .iter()
            .filter(|s| !by_seed.contains_key(s))
            .copied()
            .collect();
        if !missing.is_empty() {
            return Err(ExperimentError::Plot(format!(
                "series {policy} is missing seeds {missing:?}"
            )));
        }
        let mut sums: BTreeMap<usize, (f64, f64, usize)> = BTreeMap::new();
        for seed_rows in by_seed.values() {
            let mut ordered = seed_rows.clone();
            ordered.sort_by_key(|r| r.day);
            let (mut c, mut n) = (0.0, 0.0);
            for r in ordered {
                c += r.y as f64;
                n += if r.y_star == r.y_minus {
                    1.0
                } else {
                    (r.y - r.y_minus) as f64 / (r.y_star - r.y_minus) as f64
                };
                let e = sums.entry(r.day).or_default();
                e.0 += c;
                e.1 += n;
                e.2 += 1;
            }
        }
        let curve = |pick: fn(&(f64, f64, usize)) -> f64| CurveSeries {
            name: policy.clone(),
            points: sums
                .iter()
                .map(|(&d, s)| (d as f64, pick(s) / s.2 as f64))
                .collect(),
        };
        clicks.push(curve(|s| s.0));
        normalized.push(curve(|s| s.1));
    }
    Ok((clicks, normalized))
}

pub(crate) fn accuracy_series_from(rows: &[AccuracyRow]) -> Vec<AccuracyBand> {
    group(rows, |r| (r.policy.as_str(), r.seed))
        .into_iter()
        .map(|(policy, by_seed)| {
            let mut by_day: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
            for r in by_seed.values().flatten() {
                by_day.entry(r.day).or_default().push(r.accuracy);
            }
            AccuracyBand {
                name: policy,
                points: by_day
                    .into_iter()
                    .map(|(d, v)| {
                        let (m, s) = mean_std(&v);
                        (d as f64, m, s)
                    })
                    .collect(),
            }
        })
        .collect()
}

/// Cumulative-click and cumulative-normalized-click curves from a
/// results directory's `trajectories.csv`.
pub fn cumulative_series(
    dir: &Path,
) -> Result<(Vec<CurveSeries>, Vec<CurveSeries>), ExperimentError> {
    cumulative_series_from(&read_rows(
        &dir.join("trajectories.csv"),
        "cumulative clicks",
    )?)
}

/// Accuracy bands from a results directory's `accuracy.csv`.
pub fn accuracy_series(dir: &Path) -> Result<Vec<AccuracyBand>, ExperimentError> {
    Ok(accuracy_series_from(&read_rows(
        &dir.join("accuracy.csv"),
        "accuracy",
    )?))
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#7f7f7f",
];
const W: f64 = 800.0;
const H: f64 = 500.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let span = |v: &mut dyn Iterator<Item = f64>| {
            v.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                (lo.min(x), hi.max(x))
            })
        };
        let (mut x0, mut x1) = span(&mut xs.clone());
        let (mut y0, mut y1) = span(&mut ys.clone());
        if !x0.is_finite() {
            (x0, x1) = (0.0, 1.0);
        }
        if !y0.is_finite() {
            (y0, y1) = (0.0, 1.0);
        }
        if x1 <= x0 {
            x1 = x0 + 1.0;
        }
        if y1 <= y0 {
            y1 = y0 + 1.0;
        }
        Self { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (H - TOP - BOTTOM)
    }
}

fn tick_label(v: f64) -> String {
    if v.abs() >= 10_000.0 {
        format!("{:.0}k", v / 1000.0)
    } else if v.abs() >= 10.0 || v == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn svg_start(out: &mut String, title: &str, x_label: &str, y_label: &str, f: &Frame) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{title}</text>\n",
        (LEFT + W - RIGHT) / 2.0
    );
    let (bx, by) = (H - BOTTOM, W - RIGHT);
    let _ = writeln!(
        out,
        "<path d=\"M{LEFT} {TOP} V{bx} H{by}\" fill=\"none\" stroke=\"black\"/>"
    );
    for i in 0..=5 {
        let t = i as f64 / 5.0;
        let xv = f.x0 + t * (f.x1 - f.x0);
        let yv = f.y0 + t * (f.y1 - f.y0);
        let (x, y) = (f.px(xv), f.py(yv));
        let _ = writeln!(
            out,
            "<line x1=\"{x:.1}\" y1=\"{bx}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"black\"/><text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            bx + 5.0,
            bx + 20.0,
            tick_label(xv)
        );
        let _ = writeln!(
            out,
            "<line x1=\"{:.1}\" y1=\"{y:.1}\" x2=\"{LEFT}\" y2=\"{y:.1}\" stroke=\"black\"/><text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0,
            tick_label(yv)
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{x_label}</text>",
        (LEFT + W - RIGHT) / 2.0,
        H - 15.0
    );
    let _ = writeln!(
        out,
        "<text transform=\"translate(20 {:.1}) rotate(-90)\" text-anchor=\"middle\">{y_label}</text>",
        (TOP + H - BOTTOM) / 2.0
    );
}

fn legend(out: &mut String, i: usize, name: &str) {
    let y = TOP + 20.0 * i as f64;
    let x = W - RIGHT + 15.0;
    let _ = writeln!(
        out,
        "<line x1=\"{x}\" y1=\"{y}\" x2=\"{:.1}\" y2=\"{y}\" stroke=\"{}\" stroke-width=\"2\"/><text x=\"{:.1}\" y=\"{:.1}\">{name}</text>",
        x + 25.0,
        PALETTE[i % PALETTE.len()],
        x + 32.0,
        y + 4.0
    );
}

fn polyline(f: &Frame, pts: impl Iterator<Item = (f64, f64)>) -> String {
    pts.map(|(x, y)| format!("{:.2},{:.2}", f.px(x), f.py(y)))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Line chart of mean curves.
pub(crate) fn curves_svg(title: &str, y_label: &str, series: &[CurveSeries]) -> String {
    let all = || series.iter().flat_map(|s| s.points.iter());
    let f = Frame::new(all().map(|p| p.0), all().map(|p| p.1).chain([0.0]));
    let mut out = String::new();
    svg_start(&mut out, title, "day", y_label, &f);
    for (i, s) in series.iter().enumerate() {
        let _ = writeln!(
            out,
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>",
            PALETTE[i % PALETTE.len()],
            polyline(&f, s.points.iter().copied())
        );
        legend(&mut out, i, &s.name);
    }
    out.push_str("</svg>\n");
    out
}

/// Mean accuracy lines over shaded ±1 std bands.
pub(crate) fn bands_svg(title: &str, series: &[AccuracyBand]) -> String {
    let all = || series.iter().flat_map(|s| s.points.iter());
    let f = Frame::new(
        all().map(|p| p.0),
        all().flat_map(|p| [p.1 - p.2, p.1 + p.2]),
    );
    let mut out = String::new();
    svg_start(&mut out, title, "day", "test pair accuracy", &f);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let upper = s.points.iter().map(|p| (p.0, p.1 + p.2));
        let lower = s.points.iter().rev().map(|p| (p.0, p.1 - p.2));
        let _ = writeln!(
            out,
            "<polygon fill=\"{color}\" fill-opacity=\"0.18\" stroke=\"none\" points=\"{}\"/>",
            polyline(&f, upper.chain(lower))
        );
        let _ = writeln!(
            out,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
            polyline(&f, s.points.iter().map(|p| (p.0, p.1)))
        );
        legend(&mut out, i, &s.name);
    }
    out.push_str("</svg>\n");
    out
}

/// Writes the three figures of an online results directory and returns
/// their paths.
pub fn emit_plots(dir: &Path) -> Result<Vec<std::path::PathBuf>, ExperimentError> {
    let (clicks, normalized) = cumulative_series(dir)?;
    let accuracy = accuracy_series(dir)?;
    if clicks.is_empty() {
        return Err(ExperimentError::Plot(format!(
            "{} has no rows (cumulative clicks series)",
            dir.join("trajectories.csv").display()
        )));
    }
    if accuracy.is_empty() {
        return Err(ExperimentError::Plot(format!(
            "{} has no rows (accuracy series)",
            dir.join("accuracy.csv").display()
        )));
    }
    let figures = [
        curves_svg("Cumulative clicks", "clicks", &clicks),
        curves_svg(
            "Cumulative normalized clicks",
            "normalized clicks",
            &normalized,
        ),
        bands_svg("Model accuracy over time", &accuracy),
    ];
    let mut paths = Vec::new();
    for (name, svg) in PLOT_FILES.iter().zip(figures) {
        let path = dir.join(name);
        std::fs::write(&path, svg).map_err(io_error(&path))?;
        paths.push(path);
    }
    Ok(paths)
}
