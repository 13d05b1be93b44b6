use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::metrics::{eval_series, read_metrics, ModelTag, RoundRecord};

use super::compare::train_curve;

/// A named polyline.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo == hi {
        (lo - 1.0, hi + 1.0)
    } else {
        (lo, hi)
    }
}

fn tick_label(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e9 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

/// Renders a standalone SVG line chart. Output depends only on the inputs.
pub fn render_line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> Result<String> {
    let all = || series.iter().flat_map(|s| s.points.iter());
    if all().next().is_none() {
        return Err(Error::Metrics("nothing to plot".into()));
    }
    let (x0, x1) = bounds(all().map(|p| p.0));
    let (y0, y1) = bounds(all().map(|p| p.1));
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            sx(xv),
            TOP + ph + 18.0,
            tick_label(xv)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            sy(yv) + 4.0,
            tick_label(yv)
        );
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{0:.1}" x2="{1:.1}" y2="{0:.1}" stroke="#dddddd"/>"##,
            sy(yv),
            LEFT + pw
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{0:.1}" text-anchor="middle" transform="rotate(-90 16 {0:.1})">{1}</text>"#,
        TOP + ph / 2.0,
        escape(y_label)
    );
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = ser.points.iter().map(|p| format!("{:.2},{:.2}", sx(p.0), sy(p.1))).collect();
        if ser.points.len() == 1 {
            let (x, y) = ser.points[0];
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, sx(x), sy(y));
        } else if !pts.is_empty() {
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            );
        }
        let ly = TOP + 14.0 + 18.0 * i as f64;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/>"#,
            lx + 20.0
        );
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, lx + 26.0, ly + 4.0, escape(&ser.label));
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn run_label(path: &Path) -> String {
    path.file_stem().map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned())
}

fn eval_curves(label: &str, records: &[RoundRecord]) -> Vec<Series> {
    [ModelTag::Global, ModelTag::Center]
        .into_iter()
        .map(|m| Series {
            label: format!("{label} {m}"),
            points: eval_series(records, m).into_iter().map(|(r, v)| (r as f64, v)).collect(),
        })
        .filter(|s| !s.points.is_empty())
        .collect()
}

fn train_curves(label: &str, records: &[RoundRecord]) -> Vec<Series> {
    [ModelTag::Client, ModelTag::Center]
        .into_iter()
        .map(|m| Series {
            label: format!("{label} {m}"),
            points: train_curve(records, m),
        })
        .filter(|s| !s.points.is_empty())
        .collect()
}

/// Writes `eval_curves.svg`, `train_curves.svg` and `plot_data.csv` into
/// `out_dir`. Nothing is written if any metrics file has no rows.
pub fn emit_plots(metrics: &[PathBuf], out_dir: &Path) -> Result<Vec<PathBuf>> {
    if metrics.is_empty() {
        return Err(Error::Metrics("no metrics files given".into()));
    }
    let mut eval = Vec::new();
    let mut train = Vec::new();
    for path in metrics {
        let records = read_metrics(path)?;
        if records.is_empty() {
            return Err(Error::Metrics(format!("{} has no rounds", path.display())));
        }
        let label = run_label(path);
        eval.extend(eval_curves(&label, &records));
        train.extend(train_curves(&label, &records));
    }
    let eval_svg = render_line_chart("Validation reward", "round", "cumulative reward", &eval)?;
    let train_svg = if train.is_empty() {
        None
    } else {
        Some(render_line_chart("Training reward", "cumulative local epochs", "episode reward", &train)?)
    };

    let mut data = csv::Writer::from_writer(Vec::new());
    data.write_record(["figure", "series", "x", "y"])?;
    for (fig, set) in [("eval", &eval), ("train", &train)] {
        for s in set {
            for (x, y) in &s.points {
                data.serialize((fig, &s.label, x, y))?;
            }
        }
    }
    let data = data.into_inner().map_err(|e| Error::Metrics(e.to_string()))?;

    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: &str, bytes: &[u8]| -> Result<()> {
        let p = out_dir.join(name);
        fs::write(&p, bytes).map_err(|e| Error::io(&p, e))?;
        written.push(p);
        Ok(())
    };
    put("eval_curves.svg", eval_svg.as_bytes())?;
    if let Some(svg) = train_svg {
        put("train_curves.svg", svg.as_bytes())?;
    }
    put("plot_data.csv", &data)?;
    Ok(written)
}
