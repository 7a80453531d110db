//! Minimal SVG charts for experiment reports: scatter series, mean/std
//! error bars, reference lines. No external renderer; the output is a
//! self-contained `<svg>` document.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

const PALETTE: [&str; 6] = ["#2c6fbb", "#c23b22", "#3a923a", "#8147a8", "#b8860b", "#3b3b3b"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Marker {
    Circle,
    Cross,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub marker: Marker,
}

/// Vertical bar at `x`: mean marker with whiskers at mean +/- std.
#[derive(Debug, Clone, Copy)]
pub struct ErrorBar {
    pub x: f64,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub error_bars: Vec<ErrorBar>,
    /// Dashed horizontal reference lines with captions.
    pub h_lines: Vec<(f64, String)>,
    /// Replaces numeric x ticks (used for categorical parameter axes).
    pub x_ticks: Option<Vec<(f64, String)>>,
    pub log_y: bool,
}

impl Plot {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Plot {
        Plot {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            series: Vec::new(),
            error_bars: Vec::new(),
            h_lines: Vec::new(),
            x_ticks: None,
            log_y: false,
        }
    }

    fn y_transform(&self, y: f64) -> f64 {
        if self.log_y {
            y.max(f64::MIN_POSITIVE).log10()
        } else {
            y
        }
    }

    fn data_ranges(&self) -> ((f64, f64), (f64, f64)) {
        let mut xs: Vec<f64> = Vec::new();
        let mut ys: Vec<f64> = Vec::new();
        for s in &self.series {
            for &(x, y) in &s.points {
                xs.push(x);
                ys.push(self.y_transform(y));
            }
        }
        for b in &self.error_bars {
            xs.push(b.x);
            ys.push(self.y_transform(b.mean - b.std));
            ys.push(self.y_transform(b.mean + b.std));
        }
        for (y, _) in &self.h_lines {
            ys.push(self.y_transform(*y));
        }
        if let Some(ticks) = &self.x_ticks {
            xs.extend(ticks.iter().map(|(x, _)| *x));
        }
        let span = |v: &[f64]| -> (f64, f64) {
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !lo.is_finite() || !hi.is_finite() {
                return (0.0, 1.0);
            }
            if lo == hi {
                let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
                return (lo - pad, hi + pad);
            }
            let pad = (hi - lo) * 0.06;
            (lo - pad, hi + pad)
        };
        (span(&xs), span(&ys))
    }

    /// Render at the given pixel size.
    pub fn to_svg(&self, width: u32, height: u32) -> String {
        let (w, h) = (width as f64, height as f64);
        let (ml, mr, mt, mb) = (64.0, 16.0, 34.0, 48.0);
        let (px0, px1) = (ml, w - mr);
        let (py0, py1) = (h - mb, mt);
        let ((x_lo, x_hi), (y_lo, y_hi)) = self.data_ranges();
        let sx = move |x: f64| px0 + (x - x_lo) / (x_hi - x_lo) * (px1 - px0);
        let sy = move |y: f64| py0 + (y - y_lo) / (y_hi - y_lo) * (py1 - py0);
        let tsy = |y: f64| sy(self.y_transform(y));

        let mut s = String::new();
        writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
        )
        .unwrap();
        writeln!(s, r#"<rect width="{width}" height="{height}" fill="white"/>"#).unwrap();
        writeln!(
            s,
            r#"<text x="{:.1}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
            (px0 + px1) / 2.0,
            escape(&self.title)
        )
        .unwrap();

        // axes
        writeln!(
            s,
            r#"<path d="M {px0:.1} {py1:.1} L {px0:.1} {py0:.1} L {px1:.1} {py0:.1}" fill="none" stroke="black" stroke-width="1"/>"#
        )
        .unwrap();

        // x ticks
        let x_ticks: Vec<(f64, String)> = match &self.x_ticks {
            Some(t) => t.clone(),
            None => nice_ticks(x_lo, x_hi).into_iter().map(|v| (v, fmt_tick(v))).collect(),
        };
        for (x, label) in &x_ticks {
            if *x < x_lo || *x > x_hi {
                continue;
            }
            let px = sx(*x);
            writeln!(
                s,
                r#"<line x1="{px:.1}" y1="{py0:.1}" x2="{px:.1}" y2="{:.1}" stroke="black"/>"#,
                py0 + 4.0
            )
            .unwrap();
            writeln!(
                s,
                r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="11">{}</text>"#,
                py0 + 17.0,
                escape(label)
            )
            .unwrap();
        }

        // y ticks (powers of ten in log mode)
        let y_ticks: Vec<(f64, String)> = if self.log_y {
            let lo = y_lo.floor() as i32;
            let hi = y_hi.ceil() as i32;
            (lo..=hi)
                .filter(|e| {
                    let v = *e as f64;
                    v >= y_lo && v <= y_hi
                })
                .map(|e| (e as f64, format!("1e{e}")))
                .collect()
        } else {
            nice_ticks(y_lo, y_hi).into_iter().map(|v| (v, fmt_tick(v))).collect()
        };
        for (y, label) in &y_ticks {
            let py = sy(*y);
            writeln!(
                s,
                r#"<line x1="{:.1}" y1="{py:.1}" x2="{px0:.1}" y2="{py:.1}" stroke="black"/>"#,
                px0 - 4.0
            )
            .unwrap();
            writeln!(
                s,
                r##"<line x1="{px0:.1}" y1="{py:.1}" x2="{px1:.1}" y2="{py:.1}" stroke="#dddddd" stroke-width="0.5"/>"##
            )
            .unwrap();
            writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-family="sans-serif" font-size="11">{}</text>"#,
                px0 - 7.0,
                py + 3.5,
                escape(label)
            )
            .unwrap();
        }

        // axis labels
        writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="12">{}</text>"#,
            (px0 + px1) / 2.0,
            h - 12.0,
            escape(&self.x_label)
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="16" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 16 {:.1})">{}</text>"#,
            (py0 + py1) / 2.0,
            (py0 + py1) / 2.0,
            escape(&self.y_label)
        )
        .unwrap();

        // reference lines
        for (y, label) in &self.h_lines {
            let py = tsy(*y);
            writeln!(
                s,
                r##"<line x1="{px0:.1}" y1="{py:.1}" x2="{px1:.1}" y2="{py:.1}" stroke="#888888" stroke-dasharray="5 3"/>"##
            )
            .unwrap();
            writeln!(
                s,
                r##"<text x="{:.1}" y="{:.1}" text-anchor="end" font-family="sans-serif" font-size="10" fill="#555555">{}</text>"##,
                px1 - 4.0,
                py - 4.0,
                escape(label)
            )
            .unwrap();
        }

        // series
        for (si, series) in self.series.iter().enumerate() {
            let color = PALETTE[si % PALETTE.len()];
            for &(x, y) in &series.points {
                let (px, py) = (sx(x), tsy(y));
                match series.marker {
                    Marker::Circle => writeln!(
                        s,
                        r#"<circle cx="{px:.1}" cy="{py:.1}" r="3" fill="{color}" fill-opacity="0.75"/>"#
                    )
                    .unwrap(),
                    Marker::Cross => writeln!(
                        s,
                        r#"<path d="M {:.1} {:.1} L {:.1} {:.1} M {:.1} {:.1} L {:.1} {:.1}" stroke="{color}" stroke-width="1.5"/>"#,
                        px - 3.5,
                        py - 3.5,
                        px + 3.5,
                        py + 3.5,
                        px - 3.5,
                        py + 3.5,
                        px + 3.5,
                        py - 3.5
                    )
                    .unwrap(),
                }
            }
        }

        // error bars on top
        for b in &self.error_bars {
            let px = sx(b.x);
            let (top, bot) = (tsy(b.mean + b.std), tsy(b.mean - b.std));
            let mid = tsy(b.mean);
            writeln!(
                s,
                r#"<line x1="{px:.1}" y1="{top:.1}" x2="{px:.1}" y2="{bot:.1}" stroke="black" stroke-width="1.2"/>"#
            )
            .unwrap();
            for y in [top, bot] {
                writeln!(
                    s,
                    r#"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="black" stroke-width="1.2"/>"#,
                    px - 5.0,
                    px + 5.0
                )
                .unwrap();
            }
            writeln!(
                s,
                r#"<rect x="{:.1}" y="{:.1}" width="7" height="7" fill="black" transform="rotate(45 {px:.1} {mid:.1})"/>"#,
                px - 3.5,
                mid - 3.5
            )
            .unwrap();
        }

        // legend
        let mut ly = py1 + 6.0;
        for (si, series) in self.series.iter().enumerate() {
            if series.label.is_empty() {
                continue;
            }
            let color = PALETTE[si % PALETTE.len()];
            writeln!(
                s,
                r#"<circle cx="{:.1}" cy="{ly:.1}" r="4" fill="{color}"/>"#,
                px1 - 110.0
            )
            .unwrap();
            writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11">{}</text>"#,
                px1 - 102.0,
                ly + 3.5,
                escape(&series.label)
            )
            .unwrap();
            ly += 15.0;
        }

        writeln!(s, "</svg>").unwrap();
        s
    }

    pub fn write_svg(&self, path: &Path, width: u32, height: u32) -> Result<()> {
        std::fs::write(path, self.to_svg(width, height))
            .map_err(|e| Error::io(path.display().to_string(), e))
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e4).contains(&a) {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    } else {
        format!("{v:.2e}")
    }
}

/// Tick positions at a 1/2/5 step covering [lo, hi].
fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    if !(span > 0.0) || !span.is_finite() {
        return vec![lo];
    }
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let step = if norm < 1.5 {
        mag
    } else if norm < 3.5 {
        2.0 * mag
    } else if norm < 7.5 {
        5.0 * mag
    } else {
        10.0 * mag
    };
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + step * 1e-9 {
        out.push(if t.abs() < step * 1e-9 { 0.0 } else { t });
        t += step;
    }
    out
}
