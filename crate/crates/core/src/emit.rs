//! CSV, JSON and SVG output for sweep rows, plus readers for the two data formats.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sweep::{ParamName, SweepRow, SweepSpec, DEPHASING_CONVENTION};

pub const CSV_HEADER: &str = "row_index,n_particles,gamma,nbar,d_factor,i_raw,i_value,n_ph,z_norm,method";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl Format {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Format> {
        path.extension()?.to_str()?.to_ascii_lowercase().parse().ok()
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "svg" => Ok(Format::Svg),
            _ => Err(Error::Parse(format!("unknown format `{s}`"))),
        }
    }
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.row_index,
            r.n_particles,
            fmt_real(r.gamma),
            fmt_real(r.nbar),
            fmt_real(r.d_factor),
            fmt_real(r.i_raw),
            fmt_real(r.i_value),
            fmt_real(r.n_ph),
            fmt_real(r.z_norm),
            r.method
        );
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => return Err(Error::Parse(format!("unexpected csv header {other:?}"))),
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 10 {
                return Err(Error::Parse(format!("line {}: expected 10 fields, got {}", i + 2, f.len())));
            }
            let real = |k: usize| {
                f[k].parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}, field {k}: {e}", i + 2)))
            };
            Ok(SweepRow {
                row_index: f[0].parse().map_err(|e| Error::Parse(format!("line {}: {e}", i + 2)))?,
                n_particles: f[1].parse().map_err(|e| Error::Parse(format!("line {}: {e}", i + 2)))?,
                gamma: real(2)?,
                nbar: real(3)?,
                d_factor: real(4)?,
                i_raw: real(5)?,
                i_value: real(6)?,
                n_ph: real(7)?,
                z_norm: real(8)?,
                method: f[9].to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub version: String,
    pub dephasing: String,
    pub generated_unix: u64,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

impl Meta {
    pub fn now(sweep: Option<SweepSpec>) -> Self {
        let generated_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            dephasing: DEPHASING_CONVENTION.to_string(),
            generated_unix,
            sweep,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub meta: Meta,
    pub rows: Vec<SweepRow>,
}

pub fn to_json(rows: &[SweepRow], meta: &Meta) -> Result<String> {
    #[derive(Serialize)]
    struct View<'a> {
        meta: &'a Meta,
        rows: &'a [SweepRow],
    }
    serde_json::to_string_pretty(&View { meta, rows }).map_err(|e| Error::Parse(e.to_string()))
}

pub fn parse_json(text: &str) -> Result<Dataset> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
    dashed: bool,
    color: &'static str,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Plots `i_value` (solid) and `n_ph` (dashed) against `axes[0]`, one pair
/// of curves per distinct value of `axes[1]`.
pub fn to_svg(rows: &[SweepRow], axes: &[ParamName], title: &str) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::domain("rows", "nothing to plot"));
    }
    let (x_axis, group_axis) = match axes {
        [x] => (*x, None),
        [x, g] => (*x, Some(*g)),
        _ => return Err(Error::domain("axes", format!("expected 1 or 2 plot axes, got {}", axes.len()))),
    };

    let mut groups: Vec<(String, f64, Vec<&SweepRow>)> = Vec::new();
    for r in rows {
        let key = group_axis.map_or(0.0, |g| r.param(g));
        let method = r.method.clone();
        match groups.iter_mut().find(|(m, k, _)| *k == key && *m == method) {
            Some((_, _, v)) => v.push(r),
            None => groups.push((method, key, vec![r])),
        }
    }
    let methods: Vec<&str> = {
        let mut m: Vec<&str> = rows.iter().map(|r| r.method.as_str()).collect();
        m.dedup();
        m.sort_unstable();
        m.dedup();
        m
    };

    let mut series = Vec::new();
    for (i, (method, key, members)) in groups.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut label = match group_axis {
            Some(g) => format!("{g} = {key}"),
            None => String::new(),
        };
        if methods.len() > 1 {
            label = format!("{label} [{method}]");
        }
        let pts = |f: fn(&SweepRow) -> f64| -> Vec<(f64, f64)> {
            members.iter().map(|r| (r.param(x_axis), f(r))).collect()
        };
        series.push(Series {
            label: format!("I {label}").trim_end().to_string(),
            points: pts(|r| r.i_value),
            dashed: false,
            color,
        });
        series.push(Series {
            label: format!("n_ph {label}").trim_end().to_string(),
            points: pts(|r| r.n_ph),
            dashed: true,
            color,
        });
    }

    let all = series.iter().flat_map(|s| s.points.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1.partial_cmp(&y0) != Some(std::cmp::Ordering::Greater) {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        svg,
        r#"<path d="M{left},{top} L{left},{bottom} L{right},{bottom}" fill="none" stroke="black"/>"#
    );
    for k in 0..=4 {
        let t = f64::from(k) / 4.0;
        let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            px(xv),
            bottom + 18.0,
            short(xv)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            left - 6.0,
            py(yv) + 4.0,
            short(yv)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0,
        x_axis
    );
    for (i, s) in series.iter().enumerate() {
        let path: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let dash = if s.dashed { r#" stroke-dasharray="6,4""# } else { "" };
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"{dash}/>"#,
            path.join(" "),
            s.color
        );
        let ly = top + 14.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{}"{dash}/><text x="{:.1}" y="{:.1}">{}</text>"#,
            right - 150.0,
            right - 125.0,
            s.color,
            right - 120.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn short(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{}", (v * 1000.0).round() / 1000.0)
    }
}

/// What a caller needs besides the rows to render any format.
pub struct EmitContext<'a> {
    pub axes: &'a [ParamName],
    pub title: &'a str,
    pub meta: Meta,
}

pub fn render(rows: &[SweepRow], format: Format, ctx: &EmitContext<'_>) -> Result<String> {
    match format {
        Format::Csv => Ok(to_csv(rows)),
        Format::Json => to_json(rows, &ctx.meta),
        Format::Svg => to_svg(rows, ctx.axes, ctx.title),
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<SweepRow> {
        (0..4)
            .map(|i| SweepRow {
                row_index: i,
                n_particles: 1 + i as u32 / 2,
                gamma: if i % 2 == 0 { 1.0 } else { 10.0 },
                nbar: 0.1 + 1e-17 * i as f64,
                d_factor: 0.0,
                i_raw: std::f64::consts::PI * i as f64,
                i_value: std::f64::consts::PI * i as f64,
                n_ph: 1.0 / 3.0 + i as f64,
                z_norm: 1.0,
                method: "closed_form".into(),
            })
            .collect()
    }

    #[test]
    fn csv_header_is_exact() {
        let csv = to_csv(&sample());
        assert_eq!(csv.lines().next().unwrap(), CSV_HEADER);
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn csv_round_trips_bitwise() {
        let rows = sample();
        let back = parse_csv(&to_csv(&rows)).unwrap();
        assert_eq!(back, rows);
        for (a, b) in rows.iter().zip(&back) {
            assert_eq!(a.n_ph.to_bits(), b.n_ph.to_bits());
        }
    }

    #[test]
    fn csv_rejects_bad_header() {
        assert!(parse_csv("a,b\n").is_err());
    }

    #[test]
    fn json_round_trips() {
        let rows = sample();
        let meta = Meta::now(None);
        let back = parse_json(&to_json(&rows, &meta).unwrap()).unwrap();
        assert_eq!(back.rows, rows);
        assert_eq!(back.meta.dephasing, DEPHASING_CONVENTION);
    }

    #[test]
    fn svg_has_two_curves_per_group() {
        let svg = to_svg(&sample(), &[ParamName::NParticles, ParamName::Gamma], "t").unwrap();
        assert_eq!(svg.matches("<polyline").count(), 4);
        assert!(svg.contains("gamma = 10"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn svg_rejects_empty_and_wide() {
        assert!(to_svg(&[], &[ParamName::Gamma], "t").is_err());
        let axes = [ParamName::Gamma, ParamName::Nbar, ParamName::DFactor];
        assert!(to_svg(&sample(), &axes, "t").is_err());
    }

    #[test]
    fn format_from_extension() {
        assert_eq!(Format::from_path(Path::new("x/out.CSV")), Some(Format::Csv));
        assert_eq!(Format::from_path(Path::new("out.svg")), Some(Format::Svg));
        assert_eq!(Format::from_path(Path::new("out")), None);
    }

    #[test]
    fn write_failure_is_io() {
        let err = write_file(Path::new("/nonexistent-dir/x.csv"), "x").unwrap_err();
        assert!(err.is_io());
    }
}
