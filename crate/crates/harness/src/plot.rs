//! SVG figures from results and trace CSVs. Each figure carries its plotted
//! series as JSON inside `<metadata>`, so the data can be checked without
//! looking at pixels.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::experiment::{RESULTS_HEADER, TRACES_HEADER};

#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct ResultRecord {
    pub method: String,
    pub cr: f64,
    pub bits: String,
    pub nmse_db: f64,
    pub cos: f64,
    pub rate_0db: f64,
    pub rate_10db: f64,
    pub rate_20db: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct TraceCsvRecord {
    pub method: String,
    pub cr: f64,
    pub bits: String,
    pub sample: usize,
    pub iter: usize,
    pub rho: f64,
    pub sigma: f64,
    pub residual: f64,
    pub nmse: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Figure {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log2_x: bool,
    pub series: Vec<Series>,
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path, header: &str) -> Result<Vec<T>> {
    let parse_err = |line: u64, message: String| HarnessError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let found = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.iter().collect::<Vec<_>>().join(",");
    if found != header {
        return Err(parse_err(1, format!("expected header {header:?}, found {found:?}")));
    }
    reader
        .deserialize()
        .map(|row| {
            row.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                parse_err(line, e.to_string())
            })
        })
        .collect()
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRecord>> {
    read_csv(path, RESULTS_HEADER)
}

pub fn read_traces(path: &Path) -> Result<Vec<TraceCsvRecord>> {
    read_csv(path, TRACES_HEADER)
}

fn bits_suffix(bits: &str) -> String {
    if bits == "none" {
        String::new()
    } else {
        format!(", B={bits}")
    }
}

/// One figure per SNR, a curve per (method, bits), sorted by CR.
pub fn rate_figures(rows: &[ResultRecord]) -> Vec<(u32, Figure)> {
    [(0u32, 0usize), (10, 1), (20, 2)]
        .iter()
        .map(|&(db, col)| {
            let mut groups: BTreeMap<(String, String), Vec<(f64, f64)>> = BTreeMap::new();
            for r in rows {
                let rate = [r.rate_0db, r.rate_10db, r.rate_20db][col];
                groups.entry((r.method.clone(), r.bits.clone())).or_default().push((r.cr, rate));
            }
            let series = groups
                .into_iter()
                .map(|((method, bits), mut pts)| {
                    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                    Series {
                        label: format!("{method}{}", bits_suffix(&bits)),
                        x: pts.iter().map(|p| p.0).collect(),
                        y: pts.iter().map(|p| p.1).collect(),
                    }
                })
                .collect();
            let fig = Figure {
                title: format!("Achievable rate, downlink SNR {db} dB"),
                x_label: "compression ratio".into(),
                y_label: "rate (bit/s/Hz)".into(),
                log2_x: true,
                series,
            };
            (db, fig)
        })
        .collect()
}

/// Mean NMSE (averaged linearly, shown in dB) per iteration for each
/// (method, CR, bits) group.
pub fn convergence_figure(rows: &[TraceCsvRecord]) -> Figure {
    let mut groups: BTreeMap<(String, String, String), BTreeMap<usize, (f64, usize)>> = BTreeMap::new();
    for r in rows {
        let Some(db) = r.nmse else { continue };
        let key = (r.method.clone(), format!("{:020.12}", r.cr), r.bits.clone());
        let slot = groups.entry(key).or_default().entry(r.iter).or_insert((0.0, 0));
        slot.0 += 10f64.powf(db / 10.0);
        slot.1 += 1;
    }
    let series = groups
        .into_iter()
        .map(|((method, cr, bits), iters)| Series {
            label: format!("{method}, CR={}{}", tick_label(cr.parse().unwrap_or(0.0), true), bits_suffix(&bits)),
            x: iters.keys().map(|&i| i as f64).collect(),
            y: iters.values().map(|(s, c)| 10.0 * (s / *c as f64).log10()).collect(),
        })
        .collect();
    Figure {
        title: "Convergence".into(),
        x_label: "iteration".into(),
        y_label: "NMSE (dB)".into(),
        log2_x: false,
        series,
    }
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick_label(v: f64, log2: bool) -> String {
    if log2 && v > 0.0 && v < 1.0 && (1.0 / v).fract().abs() < 1e-9 {
        format!("1/{}", (1.0 / v).round())
    } else if v.abs() >= 100.0 || v == v.trunc() {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

pub fn render_svg(fig: &Figure) -> String {
    let fx = |x: f64| if fig.log2_x { x.log2() } else { x };
    let points: Vec<(f64, f64)> = fig
        .series
        .iter()
        .flat_map(|s| s.x.iter().zip(&s.y))
        .filter(|(x, y)| y.is_finite() && fx(**x).is_finite())
        .map(|(x, y)| (fx(*x), *y))
        .collect();
    let span = |vals: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi - lo < 1e-12 {
            (lo - 0.5, hi + 0.5)
        } else {
            let pad = 0.05 * (hi - lo);
            (lo - pad, hi + pad)
        }
    };
    let (x0, x1) = span(&mut points.iter().map(|p| p.0));
    let (y0, y1) = span(&mut points.iter().map(|p| p.1));
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * (W - LEFT - RIGHT);
    let py = |y: f64| H - BOTTOM - (y - y0) / (y1 - y0) * (H - TOP - BOTTOM);

    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#).unwrap();
    let data = serde_json::to_string(&fig.series).expect("series serialize");
    writeln!(s, r#"<metadata id="series">{}</metadata>"#, escape(&data)).unwrap();
    writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, escape(&fig.title)).unwrap();
    let (bx, by, bw, bh) = (LEFT, TOP, W - LEFT - RIGHT, H - TOP - BOTTOM);
    writeln!(s, r##"<rect x="{bx}" y="{by}" width="{bw}" height="{bh}" fill="none" stroke="#333"/>"##).unwrap();

    // Ticks: the data's own x values on a log axis, five even steps otherwise.
    let mut xticks: Vec<f64> = if fig.log2_x {
        let mut v: Vec<f64> = points.iter().map(|p| p.0).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    } else if points.iter().all(|p| p.0.fract() == 0.0) {
        let (lo, hi) = (x0.ceil() as i64, x1.floor() as i64);
        let step = ((hi - lo) / 10 + 1).max(1);
        (lo..=hi).step_by(step as usize).map(|v| v as f64).collect()
    } else {
        (0..=4).map(|i| x0 + (x1 - x0) * i as f64 / 4.0).collect()
    };
    if points.is_empty() {
        xticks.clear();
    }
    for t in xticks {
        let label = if fig.log2_x { tick_label(t.exp2(), true) } else { tick_label(t, false) };
        writeln!(s, r##"<line x1="{0:.2}" y1="{1}" x2="{0:.2}" y2="{2}" stroke="#333"/>"##, px(t), H - BOTTOM, H - BOTTOM + 5.0).unwrap();
        writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#, px(t), H - BOTTOM + 18.0, label).unwrap();
    }
    if !points.is_empty() {
        for i in 0..=4 {
            let t = y0 + (y1 - y0) * i as f64 / 4.0;
            writeln!(s, r##"<line x1="{}" y1="{1:.2}" x2="{2}" y2="{1:.2}" stroke="#333"/>"##, LEFT - 5.0, py(t), LEFT).unwrap();
            writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 8.0, py(t) + 4.0, tick_label(t, false)).unwrap();
        }
    } else {
        writeln!(s, r##"<text x="{}" y="{}" text-anchor="middle" fill="#888">no data</text>"##, LEFT + bw / 2.0, TOP + bh / 2.0).unwrap();
    }
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, LEFT + bw / 2.0, H - 12.0, escape(&fig.x_label)).unwrap();
    writeln!(s, r#"<text transform="translate(18 {}) rotate(-90)" text-anchor="middle">{}</text>"#, TOP + bh / 2.0, escape(&fig.y_label)).unwrap();

    for (k, series) in fig.series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<(f64, f64)> = series
            .x
            .iter()
            .zip(&series.y)
            .filter(|(x, y)| y.is_finite() && fx(**x).is_finite())
            .map(|(x, y)| (px(fx(*x)), py(*y)))
            .collect();
        if pts.len() > 1 {
            let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, path.join(" ")).unwrap();
        }
        for (x, y) in &pts {
            writeln!(s, r#"<circle class="marker" cx="{x:.2}" cy="{y:.2}" r="3" fill="{color}"/>"#).unwrap();
        }
        let ly = TOP + 14.0 + 18.0 * k as f64;
        let lx = W - RIGHT + 12.0;
        writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 18.0).unwrap();
        writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 24.0, ly + 4.0, escape(&series.label)).unwrap();
    }
    s.push_str("</svg>\n");
    s
}

/// Recovers the series embedded by [`render_svg`].
pub fn embedded_series(svg: &str) -> Option<Vec<Series>> {
    let start = svg.find(r#"<metadata id="series">"#)? + r#"<metadata id="series">"#.len();
    let end = start + svg[start..].find("</metadata>")?;
    let raw = svg[start..end].replace("&lt;", "<").replace("&gt;", ">").replace("&amp;", "&");
    serde_json::from_str(&raw).ok()
}

#[derive(Clone, Debug, Default)]
pub struct PlotSummary {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

/// Writes `rate_vs_cr_{0,10,20}db.svg` and, given traces, `convergence.svg`.
pub fn plot_results(results: &Path, traces: Option<&Path>, out_dir: &Path) -> Result<PlotSummary> {
    let rows = read_results(results)?;
    let mut summary = PlotSummary::default();
    if rows.is_empty() {
        summary.warnings.push(format!("{}: no result rows; figures are empty", results.display()));
    }
    fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    let mut figures: Vec<(String, Figure)> = rate_figures(&rows)
        .into_iter()
        .map(|(db, f)| (format!("rate_vs_cr_{db}db.svg"), f))
        .collect();
    if let Some(t) = traces {
        let trace_rows = read_traces(t)?;
        if trace_rows.iter().all(|r| r.nmse.is_none()) {
            summary.warnings.push(format!("{}: no NMSE values in traces", t.display()));
        }
        figures.push(("convergence.svg".into(), convergence_figure(&trace_rows)));
    }
    for (name, fig) in figures {
        let path = out_dir.join(name);
        fs::write(&path, render_svg(&fig)).map_err(|e| HarnessError::io(&path, e))?;
        summary.files.push(path);
    }
    for w in &summary.warnings {
        log::warn!("{w}");
    }
    Ok(summary)
}
