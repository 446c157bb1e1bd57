//! Hand-written SVG charts. Every chart has a CSV sidecar holding exactly
//! the numbers drawn; data elements also carry them as `data-*` attributes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{csv_bytes, fmt_f64, write_atomic};
use crate::dataset::HpValue;
use crate::error::{Error, Result};
use crate::stats::{DensityCurve, Interval};

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

#[derive(Clone, Debug, PartialEq)]
pub struct BarGroup {
    pub label: String,
    pub value: f64,
    pub interval: Interval,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityPoint {
    pub x: HpValue,
    pub mean: f64,
    pub interval: Interval,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Round-ish tick values covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / n as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= n as f64)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    let r = (v * 1e6).round() / 1e6;
    fmt_f64(if r == 0.0 { 0.0 } else { r })
}

struct Frame {
    width: f64,
    height: f64,
    left: f64,
    right: f64,
    top: f64,
    bottom: f64,
    y_lo: f64,
    y_hi: f64,
}

impl Frame {
    fn y(&self, v: f64) -> f64 {
        let h = self.height - self.top - self.bottom;
        self.top + h * (1.0 - (v - self.y_lo) / (self.y_hi - self.y_lo))
    }

    fn plot_width(&self) -> f64 {
        self.width - self.left - self.right
    }

    fn open(&self, title: &str, out: &mut String) {
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#,
            w = self.width,
            h = self.height
        );
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text class="title" x="{}" y="18" text-anchor="middle" font-size="13">{}</text>"#,
            self.width / 2.0,
            esc(title)
        );
    }

    fn y_axis(&self, label: &str, out: &mut String) {
        let x0 = self.left;
        let _ = writeln!(
            out,
            r#"<line class="axis" x1="{x0}" y1="{}" x2="{x0}" y2="{}" stroke="black"/>"#,
            self.top,
            self.height - self.bottom
        );
        for t in ticks(self.y_lo, self.y_hi, 5) {
            let y = self.y(t);
            let _ = writeln!(
                out,
                r##"<line class="grid" x1="{x0}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#ddd"/>"##,
                self.width - self.right
            );
            let _ = writeln!(
                out,
                r#"<text class="tick" x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
                x0 - 4.0,
                y + 4.0,
                tick_label(t)
            );
        }
        let _ = writeln!(
            out,
            r#"<text class="ylabel" transform="translate(14,{:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
            (self.top + self.height - self.bottom) / 2.0,
            esc(label)
        );
    }
}

fn y_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    lo = lo.min(0.0);
    if hi - lo < 1e-12 {
        hi = lo + 1.0;
    }
    let pad = 0.05 * (hi - lo);
    (if lo < 0.0 { lo - pad } else { lo }, hi + pad)
}

/// Builds a bar chart with error bars and its CSV sidecar.
pub fn bar_chart_svg(groups: &[BarGroup], title: &str, y_label: &str) -> Result<(String, Vec<u8>)> {
    if groups.is_empty() {
        return Err(Error::arg("bar chart needs at least one group"));
    }
    let bar_w = 22.0;
    let gap = 10.0;
    let frame = {
        let (y_lo, y_hi) = y_range(
            groups
                .iter()
                .flat_map(|g| [g.value, g.interval.lower, g.interval.upper]),
        );
        Frame {
            width: (70.0 + groups.len() as f64 * (bar_w + gap) + 20.0).max(320.0),
            height: 360.0,
            left: 60.0,
            right: 20.0,
            top: 30.0,
            bottom: 110.0,
            y_lo,
            y_hi,
        }
    };
    let mut svg = String::new();
    frame.open(title, &mut svg);
    frame.y_axis(y_label, &mut svg);
    let zero = frame.y(0f64.max(frame.y_lo));
    for (i, g) in groups.iter().enumerate() {
        let x = frame.left + gap / 2.0 + i as f64 * (bar_w + gap);
        let top = frame.y(g.value);
        let (y0, h) = if top <= zero {
            (top, zero - top)
        } else {
            (zero, top - zero)
        };
        let _ = writeln!(
            svg,
            r#"<rect class="bar" x="{x:.2}" y="{y0:.2}" width="{bar_w}" height="{h:.2}" fill="{}" data-label="{}" data-value="{}" data-lower="{}" data-upper="{}"/>"#,
            PALETTE[i % PALETTE.len()],
            esc(&g.label),
            fmt_f64(g.value),
            fmt_f64(g.interval.lower),
            fmt_f64(g.interval.upper)
        );
        let cx = x + bar_w / 2.0;
        let (yl, yu) = (frame.y(g.interval.lower), frame.y(g.interval.upper));
        let _ = writeln!(
            svg,
            r#"<line class="errorbar" x1="{cx:.2}" y1="{yl:.2}" x2="{cx:.2}" y2="{yu:.2}" stroke="black"/>"#
        );
        for y in [yl, yu] {
            let _ = writeln!(
                svg,
                r#"<line class="cap" x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="black"/>"#,
                cx - 5.0,
                cx + 5.0
            );
        }
        let ly = frame.height - frame.bottom + 8.0;
        let _ = writeln!(
            svg,
            r#"<text class="label" transform="translate({cx:.2},{ly:.2}) rotate(60)" text-anchor="start">{}</text>"#,
            esc(&g.label)
        );
    }
    svg.push_str("</svg>\n");
    let rows: Vec<Vec<String>> = groups
        .iter()
        .map(|g| {
            vec![
                g.label.clone(),
                fmt_f64(g.value),
                fmt_f64(g.interval.lower),
                fmt_f64(g.interval.upper),
            ]
        })
        .collect();
    let csv = csv_bytes(&["label", "value", "lower", "upper"], &rows)?;
    Ok((svg, csv))
}

fn sidecar(svg_path: &Path) -> PathBuf {
    svg_path.with_extension("csv")
}

fn emit(svg_path: &Path, svg: String, csv: Vec<u8>) -> Result<(PathBuf, PathBuf)> {
    let side = sidecar(svg_path);
    write_atomic(svg_path, svg.as_bytes())?;
    write_atomic(&side, &csv)?;
    Ok((svg_path.to_path_buf(), side))
}

/// Writes the bar chart to `svg_path` and its values to the `.csv` beside it.
pub fn emit_bar_chart(
    groups: &[BarGroup],
    title: &str,
    y_label: &str,
    svg_path: &Path,
) -> Result<(PathBuf, PathBuf)> {
    let (svg, csv) = bar_chart_svg(groups, title, y_label)?;
    emit(svg_path, svg, csv)
}

/// `2^k` when `x` is an exact power of two.
fn power_of_two_label(x: f64) -> Option<String> {
    if x <= 0.0 {
        return None;
    }
    let k = x.log2().round();
    (2f64.powi(k as i32) == x).then(|| format!("2^{}", k as i32))
}

struct Series {
    name: String,
    points: Vec<(f64, f64, Interval)>,
}

fn numeric_series(series: &[(String, Vec<SensitivityPoint>)]) -> Result<Vec<Series>> {
    if series.is_empty() {
        return Err(Error::arg("sensitivity chart needs at least one series"));
    }
    series
        .iter()
        .map(|(name, pts)| {
            if pts.len() < 2 {
                return Err(Error::arg(format!(
                    "series {name} has {} point(s); a curve needs at least 2",
                    pts.len()
                )));
            }
            let mut points = pts
                .iter()
                .map(|p| {
                    p.x.as_f64()
                        .map(|x| (x, p.mean, p.interval))
                        .ok_or_else(|| {
                            Error::arg(format!("non-numeric axis value {} in {name}", p.x))
                        })
                })
                .collect::<Result<Vec<_>>>()?;
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            Ok(Series {
                name: name.clone(),
                points,
            })
        })
        .collect()
}

/// Builds a multi-line chart of mean against a numeric hyperparameter.
/// Positive axes spanning a factor of 10 or more are drawn on a log scale.
pub fn sensitivity_svg(
    series: &[(String, Vec<SensitivityPoint>)],
    title: &str,
    x_label: &str,
    y_label: &str,
) -> Result<(String, Vec<u8>)> {
    let series = numeric_series(series)?;
    let xs: Vec<f64> = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.0))
        .collect();
    let x_min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let x_max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log = x_min > 0.0 && x_max / x_min >= 10.0;
    let tx = |x: f64| if log { x.log2() } else { x };
    let (a, b) = (tx(x_min), tx(x_max));
    let b = if b - a < 1e-12 { a + 1.0 } else { b };
    let (y_lo, y_hi) = y_range(
        series
            .iter()
            .flat_map(|s| s.points.iter().flat_map(|p| [p.1, p.2.lower, p.2.upper])),
    );
    let frame = Frame {
        width: 560.0,
        height: 360.0,
        left: 60.0,
        right: 120.0,
        top: 30.0,
        bottom: 50.0,
        y_lo,
        y_hi,
    };
    let px = |x: f64| frame.left + 10.0 + (frame.plot_width() - 20.0) * (tx(x) - a) / (b - a);
    let mut svg = String::new();
    frame.open(title, &mut svg);
    frame.y_axis(y_label, &mut svg);
    let base = frame.height - frame.bottom;
    let _ = writeln!(
        svg,
        r#"<line class="axis" x1="{}" y1="{base}" x2="{}" y2="{base}" stroke="black"/>"#,
        frame.left,
        frame.width - frame.right
    );
    let mut axis: Vec<f64> = xs.clone();
    axis.sort_by(f64::total_cmp);
    axis.dedup();
    for &x in &axis {
        let label = if log {
            power_of_two_label(x).unwrap_or_else(|| tick_label(x))
        } else {
            tick_label(x)
        };
        let _ = writeln!(
            svg,
            r#"<text class="xtick" x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
            px(x),
            base + 14.0,
            esc(&label)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text class="xlabel" x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
        frame.left + frame.plot_width() / 2.0,
        frame.height - 10.0,
        esc(&format!(
            "{x_label}{}",
            if log { " (log scale)" } else { "" }
        ))
    );
    let mut rows = Vec::new();
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", px(p.0), frame.y(p.1)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="series" data-series="{}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            esc(&s.name),
            pts.join(" ")
        );
        for &(x, m, iv) in &s.points {
            let cx = px(x);
            let _ = writeln!(
                svg,
                r#"<line class="errorbar" x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="{color}"/>"#,
                frame.y(iv.lower),
                frame.y(iv.upper)
            );
            let _ = writeln!(
                svg,
                r#"<circle class="point" cx="{cx:.2}" cy="{:.2}" r="2.5" fill="{color}" data-series="{}" data-x="{}" data-mean="{}" data-lower="{}" data-upper="{}"/>"#,
                frame.y(m),
                esc(&s.name),
                fmt_f64(x),
                fmt_f64(m),
                fmt_f64(iv.lower),
                fmt_f64(iv.upper)
            );
            rows.push(vec![
                s.name.clone(),
                fmt_f64(x),
                fmt_f64(m),
                fmt_f64(iv.lower),
                fmt_f64(iv.upper),
            ]);
        }
        let ly = frame.top + 14.0 * (i as f64 + 1.0);
        let _ = writeln!(
            svg,
            r#"<text class="legend" x="{}" y="{ly:.2}" fill="{color}">{}</text>"#,
            frame.width - frame.right + 8.0,
            esc(&s.name)
        );
    }
    svg.push_str("</svg>\n");
    let csv = csv_bytes(&["series", "x", "mean", "lower", "upper"], &rows)?;
    Ok((svg, csv))
}

pub fn emit_sensitivity_curve(
    series: &[(String, Vec<SensitivityPoint>)],
    title: &str,
    x_label: &str,
    y_label: &str,
    svg_path: &Path,
) -> Result<(PathBuf, PathBuf)> {
    let (svg, csv) = sensitivity_svg(series, title, x_label, y_label)?;
    emit(svg_path, svg, csv)
}

/// Builds a chart of one or more density curves.
pub fn density_svg(curves: &[(String, DensityCurve)], title: &str) -> Result<(String, Vec<u8>)> {
    if curves.is_empty() {
        return Err(Error::arg("density chart needs at least one curve"));
    }
    let x_min = curves
        .iter()
        .map(|c| c.1.xs[0])
        .fold(f64::INFINITY, f64::min);
    let x_max = curves
        .iter()
        .map(|c| *c.1.xs.last().expect("non-empty grid"))
        .fold(f64::NEG_INFINITY, f64::max);
    let (y_lo, y_hi) = y_range(curves.iter().flat_map(|c| c.1.ys.iter().copied()));
    let frame = Frame {
        width: 560.0,
        height: 340.0,
        left: 70.0,
        right: 120.0,
        top: 30.0,
        bottom: 40.0,
        y_lo,
        y_hi,
    };
    let span = (x_max - x_min).max(1e-12);
    let px = |x: f64| frame.left + frame.plot_width() * (x - x_min) / span;
    let mut svg = String::new();
    frame.open(title, &mut svg);
    frame.y_axis("density", &mut svg);
    let base = frame.height - frame.bottom;
    for t in ticks(x_min, x_max, 6) {
        let _ = writeln!(
            svg,
            r#"<text class="xtick" x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
            px(t),
            base + 14.0,
            tick_label(t)
        );
    }
    let mut rows = Vec::new();
    for (i, (name, c)) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> =
            c.xs.iter()
                .zip(&c.ys)
                .map(|(&x, &y)| format!("{:.2},{:.2}", px(x), frame.y(y)))
                .collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="density" data-series="{}" data-bandwidth="{}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            esc(name),
            fmt_f64(c.bandwidth),
            pts.join(" ")
        );
        let ly = frame.top + 14.0 * (i as f64 + 1.0);
        let _ = writeln!(
            svg,
            r#"<text class="legend" x="{}" y="{ly:.2}" fill="{color}">{}</text>"#,
            frame.width - frame.right + 8.0,
            esc(name)
        );
        for (&x, &y) in c.xs.iter().zip(&c.ys) {
            rows.push(vec![name.clone(), fmt_f64(x), fmt_f64(y)]);
        }
    }
    svg.push_str("</svg>\n");
    let csv = csv_bytes(&["series", "x", "density"], &rows)?;
    Ok((svg, csv))
}

pub fn emit_density_chart(
    curves: &[(String, DensityCurve)],
    title: &str,
    svg_path: &Path,
) -> Result<(PathBuf, PathBuf)> {
    let (svg, csv) = density_svg(curves, title)?;
    emit(svg_path, svg, csv)
}
