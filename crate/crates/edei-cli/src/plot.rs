//! Static SVG rendering of per-episode metric curves.
//!
//! Reads one or more metrics CSV files and draws a six-panel figure
//! (success rate, failure rate, processing time, agent efficiency,
//! incident throughput, reward), one curve per policy series.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

const PANEL_W: f64 = 300.0;
const PANEL_H: f64 = 200.0;
const MARGIN: f64 = 52.0;
const GAP: f64 = 34.0;
const COLORS: [&str; 6] = ["#1f6f8b", "#d1495b", "#3a7d44", "#8d5a97", "#c77b22", "#4a4e69"];

/// One metric panel: y-values per series, indexed by episode.
struct Panel {
    title: &'static str,
    column: usize,
}

const PANELS: [Panel; 6] = [
    Panel { title: "success rate", column: 4 },
    Panel { title: "failure rate", column: 6 },
    Panel { title: "processing time", column: 7 },
    Panel { title: "agent efficiency", column: 8 },
    Panel { title: "incident throughput", column: 9 },
    Panel { title: "episode reward", column: 10 },
];

type Series = BTreeMap<String, Vec<(f64, f64)>>;

/// Parses a metrics CSV into per-policy (episode, value) points for the
/// given column.
fn load_column(text: &str, column: usize, source: &str) -> Result<Series> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if !header.starts_with("episode,scenario,policy,") {
        bail!("{source} is not a metrics CSV (unexpected header)");
    }
    let mut series: Series = BTreeMap::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() <= column {
            bail!("{source} row {} has too few columns", i + 2);
        }
        let episode: f64 = cols[0]
            .parse()
            .with_context(|| format!("{source} row {}: episode column", i + 2))?;
        let value: f64 = cols[column]
            .parse()
            .with_context(|| format!("{source} row {}: column {column}", i + 2))?;
        series.entry(cols[2].to_string()).or_default().push((episode, value));
    }
    Ok(series)
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if a >= 1000.0 {
        format!("{v:.0}")
    } else if a >= 1.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.2}")
    }
}

fn draw_panel(out: &mut String, x0: f64, y0: f64, panel: &Panel, series: &Series) {
    let (mut x_max, mut y_min, mut y_max) = (1.0_f64, f64::INFINITY, f64::NEG_INFINITY);
    for points in series.values() {
        for &(x, y) in points {
            x_max = x_max.max(x);
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
    }
    if !y_min.is_finite() {
        (y_min, y_max) = (0.0, 1.0);
    }
    if (y_max - y_min).abs() < 1e-12 {
        y_min -= 0.5;
        y_max += 0.5;
    }
    let pad = (y_max - y_min) * 0.08;
    let (y_lo, y_hi) = (y_min - pad, y_max + pad);

    let sx = |x: f64| x0 + x / x_max * PANEL_W;
    let sy = |y: f64| y0 + PANEL_H - (y - y_lo) / (y_hi - y_lo) * PANEL_H;

    let _ = write!(
        out,
        r##"<rect x="{x0}" y="{y0}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="#999" stroke-width="1"/>"##
    );
    let _ = write!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="13" font-weight="bold">{}</text>"#,
        x0 + PANEL_W / 2.0,
        y0 - 8.0,
        panel.title
    );
    for frac in [0.0, 0.5, 1.0] {
        let y = y_lo + (y_hi - y_lo) * frac;
        let _ = write!(
            out,
            r##"<line x1="{x0}" y1="{0}" x2="{1}" y2="{0}" stroke="#ddd" stroke-width="0.5"/>"##,
            sy(y),
            x0 + PANEL_W
        );
        let _ = write!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end" font-size="9">{}</text>"#,
            x0 - 4.0,
            sy(y) + 3.0,
            fmt_tick(y)
        );
        let x = x_max * frac;
        let _ = write!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="9">{}</text>"#,
            sx(x),
            y0 + PANEL_H + 12.0,
            fmt_tick(x)
        );
    }
    let _ = write!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="10">episode</text>"#,
        x0 + PANEL_W / 2.0,
        y0 + PANEL_H + 26.0
    );

    for (idx, (_, points)) in series.iter().enumerate() {
        let color = COLORS[idx % COLORS.len()];
        let mut path = String::new();
        for (i, &(x, y)) in points.iter().enumerate() {
            let cmd = if i == 0 { 'M' } else { 'L' };
            let _ = write!(path, "{cmd}{:.2} {:.2} ", sx(x), sy(y));
        }
        let _ = write!(
            out,
            r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            path.trim_end()
        );
    }
}

/// Renders all panels to one SVG document string.
pub fn render(inputs: &[(String, String)]) -> Result<String> {
    let width = MARGIN * 2.0 + PANEL_W * 3.0 + GAP * 2.0;
    let height = MARGIN * 2.0 + PANEL_H * 2.0 + GAP * 2.5 + 24.0;
    let mut out = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif">"#
    );
    let _ = write!(out, r#"<rect width="{width}" height="{height}" fill="white"/>"#);

    let mut legend: Vec<String> = Vec::new();
    for (i, panel) in PANELS.iter().enumerate() {
        let mut merged: Series = BTreeMap::new();
        for (name, text) in inputs {
            let series = load_column(text, panel.column, name)?;
            for (policy, points) in series {
                let key = if inputs.len() > 1 && series_conflicts(&merged, &policy) {
                    format!("{policy} ({name})")
                } else {
                    policy
                };
                merged.insert(key, points);
            }
        }
        for key in merged.keys() {
            if !legend.contains(key) {
                legend.push(key.clone());
            }
        }
        let col = (i % 3) as f64;
        let row = (i / 3) as f64;
        let x0 = MARGIN + col * (PANEL_W + GAP);
        let y0 = MARGIN + row * (PANEL_H + GAP + 24.0);
        draw_panel(&mut out, x0, y0, panel, &merged);
    }

    let mut lx = MARGIN;
    let ly = height - 14.0;
    for (idx, key) in legend.iter().enumerate() {
        let color = COLORS[idx % COLORS.len()];
        let _ = write!(
            out,
            r#"<line x1="{lx}" y1="{0}" x2="{1}" y2="{0}" stroke="{color}" stroke-width="2"/>"#,
            ly - 4.0,
            lx + 18.0
        );
        let _ = write!(
            out,
            r#"<text x="{}" y="{ly}" font-size="11">{key}</text>"#,
            lx + 22.0
        );
        lx += 30.0 + 7.0 * key.len() as f64;
    }

    out.push_str("</svg>\n");
    Ok(out)
}

fn series_conflicts(merged: &Series, policy: &str) -> bool {
    merged.contains_key(policy)
}

pub fn run_plot(inputs: &[std::path::PathBuf], out: &Path) -> Result<()> {
    if inputs.is_empty() {
        bail!("plot needs at least one metrics CSV file");
    }
    let mut loaded = Vec::new();
    for path in inputs {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        loaded.push((name, text));
    }
    let svg = render(&loaded)?;
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    fs::write(out, svg).with_context(|| format!("writing {}", out.display()))?;
    println!("wrote {}", out.display());
    Ok(())
}
