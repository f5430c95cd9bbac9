//! Turns experiment CSVs into one SVG line chart per metric, with one
//! series per algorithm. The charts are plain hand-written SVG so the
//! output stays dependency-free and diffable.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::experiment::METRIC_NAMES;
use crate::{CliError, Result};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 160.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;
const TICKS: usize = 5;
const PALETTE: [&str; 5] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"];

struct Row {
    sweep: String,
    value: f64,
    algorithm: String,
    means: [f64; 12],
}

fn parse_csv(path: &Path) -> Result<Vec<Row>> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| CliError::Parse {
        path: path.into(),
        message: "empty file, expected a CSV header".into(),
    })?;
    let cols: Vec<&str> = header.split(',').collect();
    let col = |name: &str| {
        cols.iter().position(|c| *c == name).ok_or_else(|| {
            CliError::Usage(format!("CSV {} is missing the `{name}` column", path.display()))
        })
    };
    let sweep_i = col("sweep")?;
    let value_i = col("value")?;
    let algo_i = col("algorithm")?;
    let mut mean_is = [0usize; 12];
    for (slot, name) in mean_is.iter_mut().zip(METRIC_NAMES) {
        *slot = col(&format!("{name}_mean"))?;
    }

    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let field = |i: usize| {
            fields.get(i).copied().ok_or_else(|| CliError::Parse {
                path: path.into(),
                message: format!("line {}: expected at least {} fields", lineno + 2, i + 1),
            })
        };
        let num = |i: usize| -> Result<f64> {
            field(i)?.parse().map_err(|e| CliError::Parse {
                path: path.into(),
                message: format!("line {}: {e}", lineno + 2),
            })
        };
        let mut means = [0.0; 12];
        for (slot, &i) in means.iter_mut().zip(&mean_is) {
            *slot = num(i)?;
        }
        rows.push(Row {
            sweep: field(sweep_i)?.to_string(),
            value: num(value_i)?,
            algorithm: field(algo_i)?.to_string(),
            means,
        });
    }
    Ok(rows)
}

/// Ordered series of (swept value, metric mean) points for one algorithm.
type Series = BTreeMap<String, Vec<(f64, f64)>>;

fn series_for(rows: &[Row], sweep: &str, metric: usize) -> Series {
    let mut series = Series::new();
    for row in rows.iter().filter(|r| r.sweep == sweep) {
        series
            .entry(row.algorithm.clone())
            .or_default()
            .push((row.value, row.means[metric]));
    }
    for points in series.values_mut() {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    series
}

fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    let s = if !(1e-3..1e5).contains(&a) {
        format!("{v:.2e}")
    } else if a >= 100.0 {
        format!("{v:.0}")
    } else if a >= 1.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.3}")
    };
    let s = if s.contains('.') && !s.contains('e') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    s
}

fn render_chart(sweep: &str, metric: &str, series: &Series) -> String {
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for points in series.values() {
        for &(x, y) in points {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
    }
    y_min = y_min.min(0.0);
    if (x_max - x_min).abs() < f64::EPSILON {
        x_min -= 0.5;
        x_max += 0.5;
    }
    if (y_max - y_min).abs() < f64::EPSILON {
        y_max = y_min + 1.0;
    }
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (x - x_min) / (x_max - x_min) * plot_w;
    let sy = |y: f64| MARGIN_T + plot_h - (y - y_min) / (y_max - y_min) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(svg, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{} by {}</text>",
        MARGIN_L + plot_w / 2.0,
        metric,
        sweep
    );

    // Gridlines, ticks and labels.
    for i in 0..TICKS {
        let t = i as f64 / (TICKS - 1) as f64;
        let xv = x_min + t * (x_max - x_min);
        let yv = y_min + t * (y_max - y_min);
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(
            svg,
            "<line x1=\"{px:.1}\" y1=\"{}\" x2=\"{px:.1}\" y2=\"{}\" stroke=\"#ddd\"/>",
            MARGIN_T,
            MARGIN_T + plot_h
        );
        let _ = writeln!(
            svg,
            "<line x1=\"{}\" y1=\"{py:.1}\" x2=\"{}\" y2=\"{py:.1}\" stroke=\"#ddd\"/>",
            MARGIN_L,
            MARGIN_L + plot_w
        );
        let _ = writeln!(
            svg,
            "<text x=\"{px:.1}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
            MARGIN_T + plot_h + 18.0,
            fmt_num(xv)
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
            MARGIN_L - 8.0,
            py + 4.0,
            fmt_num(yv)
        );
    }
    let _ = writeln!(
        svg,
        "<rect x=\"{}\" y=\"{}\" width=\"{plot_w}\" height=\"{plot_h}\" fill=\"none\" stroke=\"#333\"/>",
        MARGIN_L, MARGIN_T
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 12.0,
        sweep
    );
    let _ = writeln!(
        svg,
        "<text x=\"18\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">{}</text>",
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0,
        metric
    );

    // One polyline plus point markers per algorithm, legend on the right.
    for (si, (algo, points)) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let path: Vec<String> =
            points.iter().map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y))).collect();
        let _ = writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\"/>",
            path.join(" ")
        );
        for &(x, y) in points {
            let _ = writeln!(
                svg,
                "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3\" fill=\"{color}\"/>",
                sx(x),
                sy(y)
            );
        }
        let ly = MARGIN_T + 16.0 + si as f64 * 20.0;
        let lx = MARGIN_L + plot_w + 16.0;
        let _ = writeln!(
            svg,
            "<line x1=\"{lx}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"1.8\"/>",
            lx + 22.0
        );
        let _ = writeln!(svg, "<text x=\"{}\" y=\"{}\">{algo}</text>", lx + 28.0, ly + 4.0);
    }
    svg.push_str("</svg>\n");
    svg
}

/// Renders one chart per metric per sweep found in the CSV and returns the
/// written paths. A header-only CSV yields a warning and no files.
pub fn emit_plots(csv_path: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let rows = parse_csv(csv_path)?;
    if rows.is_empty() {
        eprintln!("warning: {} has no data rows, nothing to plot", csv_path.display());
        return Ok(Vec::new());
    }
    std::fs::create_dir_all(out_dir).map_err(CliError::io(out_dir))?;
    let mut sweeps: Vec<&str> = rows.iter().map(|r| r.sweep.as_str()).collect();
    sweeps.sort_unstable();
    sweeps.dedup();

    let mut written = Vec::new();
    for sweep in sweeps {
        for (mi, metric) in METRIC_NAMES.iter().enumerate() {
            let series = series_for(&rows, sweep, mi);
            let svg = render_chart(sweep, metric, &series);
            let path = out_dir.join(format!("{sweep}_{metric}.svg"));
            std::fs::write(&path, svg).map_err(CliError::io(&path))?;
            written.push(path);
        }
    }
    Ok(written)
}
