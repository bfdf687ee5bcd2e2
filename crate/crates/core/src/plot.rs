//! Standalone SVG rendering of loss curves.
//!
//! Writes plain shapes and text, no scripts and no external references,
//! so the output opens anywhere. One polyline per input curve with
//! stderr whiskers and point markers, axis ticks, and a legend naming
//! each series by its horizon.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::sweep::parse_curve_csv;

const WIDTH: f64 = 840.0;
const HEIGHT: f64 = 560.0;
const MARGIN_LEFT: f64 = 74.0;
const MARGIN_RIGHT: f64 = 26.0;
const MARGIN_TOP: f64 = 26.0;
const MARGIN_BOTTOM: f64 = 62.0;

const SERIES_COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

/// One plotted series: a label and `(d, mean, stderr)` points.
#[derive(Clone, Debug)]
pub struct PlotSeries {
    pub label: String,
    pub points: Vec<(f64, f64, f64)>,
}

/// Read each CSV (curve schema) and write the combined plot to `out_path`.
pub fn emit_plot(inputs: &[PathBuf], out_path: &Path) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::config("need at least one input CSV"));
    }
    let mut series = Vec::with_capacity(inputs.len());
    for path in inputs {
        let curve = parse_curve_csv(path)?;
        let label = match curve.rows.first() {
            Some(row) => format!("N={}", row.horizon),
            None => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "series".into()),
        };
        series.push(PlotSeries {
            label,
            points: curve
                .rows
                .iter()
                .map(|r| (r.gap, r.mean, r.stderr))
                .collect(),
        });
    }
    let svg = render_plot(&series);
    fs::write(out_path, svg).map_err(|e| Error::Io {
        path: out_path.to_path_buf(),
        source: e,
    })
}

/// Render series to a self-contained SVG document.
pub fn render_plot(series: &[PlotSeries]) -> String {
    let (x_min, x_max) = padded_range(
        series.iter().flat_map(|s| s.points.iter().map(|p| p.0)),
        0.04,
        0.04,
    );
    let (y_min, y_max) = padded_range(
        series
            .iter()
            .flat_map(|s| s.points.iter().flat_map(|&(_, y, e)| [y - e, y + e, 0.0])),
        0.02,
        0.08,
    );

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |d: f64| MARGIN_LEFT + (d - x_min) / (x_max - x_min) * plot_w;
    let sy = |y: f64| MARGIN_TOP + plot_h - (y - y_min) / (y_max - y_min) * plot_h;
    let x0 = MARGIN_LEFT;
    let y0 = MARGIN_TOP + plot_h;

    let mut svg = String::with_capacity(16 * 1024);
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str(&format!(
        "  <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));

    // Gridlines and ticks.
    let font = "font-family=\"sans-serif\"";
    for tick in ticks(y_min, y_max, 6) {
        let y = sy(tick.value);
        svg.push_str(&format!(
            "  <line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#e6e6e6\"/>\n",
            x0,
            x0 + plot_w
        ));
        svg.push_str(&format!(
            "  <line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{x0:.2}\" y2=\"{y:.2}\" stroke=\"black\"/>\n",
            x0 - 5.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"{:.2}\" {font} font-size=\"12\" text-anchor=\"end\">{}</text>\n",
            x0 - 9.0,
            y + 4.0,
            tick.label
        ));
    }
    for tick in ticks(x_min, x_max, 8) {
        let x = sx(tick.value);
        svg.push_str(&format!(
            "  <line x1=\"{x:.2}\" y1=\"{y0:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
            y0 + 5.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{x:.2}\" y=\"{:.2}\" {font} font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
            y0 + 20.0,
            tick.label
        ));
    }

    // Axes.
    svg.push_str(&format!(
        "  <line x1=\"{x0:.2}\" y1=\"{:.2}\" x2=\"{x0:.2}\" y2=\"{y0:.2}\" stroke=\"black\"/>\n",
        MARGIN_TOP
    ));
    svg.push_str(&format!(
        "  <line x1=\"{x0:.2}\" y1=\"{y0:.2}\" x2=\"{:.2}\" y2=\"{y0:.2}\" stroke=\"black\"/>\n",
        x0 + plot_w
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.2}\" y=\"{:.2}\" {font} font-size=\"15\" text-anchor=\"middle\">d</text>\n",
        x0 + plot_w / 2.0,
        HEIGHT - 14.0
    ));
    svg.push_str(&format!(
        "  <text x=\"20\" y=\"{:.2}\" {font} font-size=\"15\" text-anchor=\"middle\" transform=\"rotate(-90 20 {:.2})\">scaled loss l(d)</text>\n",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    ));

    // Series: whiskers, then the polyline, then markers.
    for (i, s) in series.iter().enumerate() {
        let color = SERIES_COLORS[i % SERIES_COLORS.len()];
        svg.push_str(&format!("  <g class=\"whiskers\" stroke=\"{color}\" stroke-opacity=\"0.7\">\n"));
        for &(d, y, e) in &s.points {
            if e > 0.0 {
                let x = sx(d);
                let (hi, lo) = (sy(y + e), sy(y - e));
                svg.push_str(&format!(
                    "    <line x1=\"{x:.2}\" y1=\"{hi:.2}\" x2=\"{x:.2}\" y2=\"{lo:.2}\"/>\n"
                ));
                for yy in [hi, lo] {
                    svg.push_str(&format!(
                        "    <line x1=\"{:.2}\" y1=\"{yy:.2}\" x2=\"{:.2}\" y2=\"{yy:.2}\"/>\n",
                        x - 3.0,
                        x + 3.0
                    ));
                }
            }
        }
        svg.push_str("  </g>\n");
        if !s.points.is_empty() {
            let coords: Vec<String> = s
                .points
                .iter()
                .map(|&(d, y, _)| format!("{:.2},{:.2}", sx(d), sy(y)))
                .collect();
            svg.push_str(&format!(
                "  <polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.6\"/>\n",
                coords.join(" ")
            ));
        }
        for &(d, y, _) in &s.points {
            svg.push_str(&format!(
                "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.6\" fill=\"{color}\"/>\n",
                sx(d),
                sy(y)
            ));
        }
    }

    // Legend, top right.
    let legend_x = x0 + plot_w - 150.0;
    let legend_y = MARGIN_TOP + 12.0;
    svg.push_str(&format!(
        "  <g class=\"legend\">\n    <rect x=\"{:.2}\" y=\"{:.2}\" width=\"142\" height=\"{}\" fill=\"white\" stroke=\"#cccccc\"/>\n",
        legend_x - 8.0,
        legend_y - 12.0,
        series.len() * 19 + 10
    ));
    for (i, s) in series.iter().enumerate() {
        let color = SERIES_COLORS[i % SERIES_COLORS.len()];
        let y = legend_y + i as f64 * 19.0;
        svg.push_str(&format!(
            "    <line x1=\"{legend_x:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"{color}\" stroke-width=\"1.6\"/>\n",
            legend_x + 24.0
        ));
        svg.push_str(&format!(
            "    <text x=\"{:.2}\" y=\"{:.2}\" {font} font-size=\"12\">{}</text>\n",
            legend_x + 30.0,
            y + 4.0,
            escape_xml(&s.label)
        ));
    }
    svg.push_str("  </g>\n</svg>\n");
    svg
}

fn escape_xml(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn padded_range(values: impl Iterator<Item = f64>, pad_lo: f64, pad_hi: f64) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for v in values {
        min = min.min(v);
        max = max.max(v);
    }
    if !min.is_finite() || !max.is_finite() {
        return (0.0, 1.0);
    }
    let span = max - min;
    if span <= 0.0 {
        return (min - 1.0, max + 1.0);
    }
    (min - pad_lo * span, max + pad_hi * span)
}

struct Tick {
    value: f64,
    label: String,
}

fn ticks(min: f64, max: f64, target: usize) -> Vec<Tick> {
    let span = max - min;
    let raw = span / target as f64;
    let exponent = raw.log10().floor();
    let magnitude = 10f64.powf(exponent);
    let normalized = raw / magnitude;
    let nice = if normalized <= 1.5 {
        1.0
    } else if normalized <= 3.0 {
        2.0
    } else if normalized <= 7.0 {
        5.0
    } else {
        10.0
    };
    let step = nice * magnitude;
    let decimals = (-(step.log10().floor()) as i64).max(0) as usize;
    let mut out = Vec::new();
    let mut v = (min / step).ceil() * step;
    while v <= max + step * 1e-9 {
        let value = if v.abs() < step * 1e-9 { 0.0 } else { v };
        out.push(Tick {
            value,
            label: format!("{value:.decimals$}"),
        });
        v += step;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sweep::CURVE_CSV_HEADER;

    fn write_curve(dir: &Path, name: &str, rows: &[(f64, f64, f64, u64)]) -> PathBuf {
        let path = dir.join(name);
        let mut text = format!("{CURVE_CSV_HEADER}\n");
        for (d, mean, stderr, horizon) in rows {
            text.push_str(&format!(
                "{d:.16e},{mean:.16e},{stderr:.16e},100,{:.16e},2,1,{horizon},{horizon},7\n",
                1.0 / 3.0
            ));
        }
        fs::write(&path, text).unwrap();
        path
    }

    #[test]
    fn single_point_renders_one_marker() {
        let dir = tempfile::tempdir().unwrap();
        let csv = write_curve(dir.path(), "one.csv", &[(1.5, 0.4, 0.02, 100)]);
        let out = dir.path().join("one.svg");
        emit_plot(&[csv], &out).unwrap();
        let svg = fs::read_to_string(&out).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<circle").count(), 1);
        assert!(svg.contains(">d</text>"));
        assert!(svg.contains("scaled loss l(d)"));
    }

    #[test]
    fn three_series_three_polylines_and_legend_entries() {
        let dir = tempfile::tempdir().unwrap();
        let rows = [(0.0, 0.0, 0.0, 0u64), (1.0, 0.3, 0.01, 0), (2.0, 0.5, 0.01, 0)];
        let files: Vec<PathBuf> = [100u64, 400, 1500]
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                let rows: Vec<_> = rows.iter().map(|&(d, m, e, _)| (d, m, e, n)).collect();
                write_curve(dir.path(), &format!("n{i}.csv"), &rows)
            })
            .collect();
        let out = dir.path().join("fig.svg");
        emit_plot(&files, &out).unwrap();
        let svg = fs::read_to_string(&out).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 3);
        for label in ["N=100", "N=400", "N=1500"] {
            assert!(svg.contains(label), "missing legend entry {label}");
        }
        // stderr whiskers exist for the nonzero-stderr points.
        assert!(svg.contains("class=\"whiskers\""));
    }

    #[test]
    fn zero_stderr_draws_no_whiskers() {
        let dir = tempfile::tempdir().unwrap();
        let csv = write_curve(dir.path(), "flat.csv", &[(0.0, 0.0, 0.0, 50), (1.0, 0.2, 0.0, 50)]);
        let out = dir.path().join("flat.svg");
        emit_plot(&[csv], &out).unwrap();
        let svg = fs::read_to_string(&out).unwrap();
        let whiskers = svg
            .split("class=\"whiskers\"")
            .nth(1)
            .unwrap()
            .split("</g>")
            .next()
            .unwrap();
        assert!(!whiskers.contains("<line"));
    }

    #[test]
    fn malformed_input_reports_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, format!("{CURVE_CSV_HEADER}\n1,2\n")).unwrap();
        match emit_plot(&[path], &dir.path().join("out.svg")).unwrap_err() {
            Error::CsvParse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn no_inputs_is_a_configuration_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            emit_plot(&[], &dir.path().join("out.svg")).unwrap_err(),
            Error::InvalidConfig(_)
        ));
    }
}
