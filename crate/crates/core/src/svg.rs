//! Deterministic SVG scatter plots. Identical inputs give byte-identical
//! documents.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{GeodexError, Result};

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 600.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 30.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;
const GLYPH_RADIUS: f64 = 2.5;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Palette {
    /// Single colour; colour values ignored.
    #[default]
    Plain,
    /// Blue through green to yellow, low to high.
    BlueYellow,
    /// Hue wheel: the colour range maps onto 0°–360°.
    Hue,
}

impl std::str::FromStr for Palette {
    type Err = GeodexError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Palette::Plain),
            "blue_yellow" => Ok(Palette::BlueYellow),
            "hue" => Ok(Palette::Hue),
            _ => Err(GeodexError::Config(format!("unknown palette {s:?} (plain, blue_yellow, hue)"))),
        }
    }
}

pub struct ScatterPlot<'a> {
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub title: Option<&'a str>,
    pub color: Option<&'a [f64]>,
    pub palette: Palette,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn range(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.05 };
        (lo - pad, hi + pad)
    } else {
        let pad = (hi - lo) * 0.03;
        (lo - pad, hi + pad)
    }
}

/// Step from the 1-2-5 sequence giving about `target` intervals.
fn tick_step(span: f64, target: f64) -> f64 {
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm < 1.5 {
        1.0
    } else if norm < 3.5 {
        2.0
    } else if norm < 7.5 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn ticks(lo: f64, hi: f64) -> (Vec<f64>, usize) {
    let step = tick_step(hi - lo, 5.0);
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    ((first..=last).map(|k| k as f64 * step).collect(), decimals)
}

fn lerp_rgb(a: [f64; 3], b: [f64; 3], t: f64) -> [u8; 3] {
    let mut out = [0u8; 3];
    for i in 0..3 {
        out[i] = (a[i] + (b[i] - a[i]) * t).round() as u8;
    }
    out
}

fn hsl_to_rgb(h: f64, s: f64, l: f64) -> [u8; 3] {
    let c = (1.0 - (2.0 * l - 1.0).abs()) * s;
    let hp = (h / 60.0) % 6.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = l - c / 2.0;
    [
        ((r + m) * 255.0).round() as u8,
        ((g + m) * 255.0).round() as u8,
        ((b + m) * 255.0).round() as u8,
    ]
}

/// Colour for a value already scaled to `[0, 1]`.
pub fn palette_color(palette: Palette, t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0);
    match palette {
        Palette::Plain => [31, 119, 180],
        Palette::BlueYellow => {
            const BLUE: [f64; 3] = [40.0, 60.0, 190.0];
            const GREEN: [f64; 3] = [35.0, 165.0, 100.0];
            const YELLOW: [f64; 3] = [245.0, 225.0, 30.0];
            if t < 0.5 {
                lerp_rgb(BLUE, GREEN, t * 2.0)
            } else {
                lerp_rgb(GREEN, YELLOW, (t - 0.5) * 2.0)
            }
        }
        // the wheel closes, so 1.0 maps back to red; keep the top end just short
        Palette::Hue => hsl_to_rgb(t * 359.0, 0.75, 0.5),
    }
}

/// Renders an 800×600 scatter plot with linear axes and one circle per point.
pub fn render_scatter_svg(plot: &ScatterPlot) -> Result<String> {
    let n = plot.x.len();
    if n == 0 {
        return Err(GeodexError::Argument("cannot plot an empty sample".into()));
    }
    if plot.y.len() != n || plot.color.is_some_and(|c| c.len() != n) {
        return Err(GeodexError::Argument("scatter coordinates are not aligned".into()));
    }
    let all = plot.x.iter().chain(plot.y).chain(plot.color.unwrap_or(&[]));
    if all.clone().any(|v| !v.is_finite()) {
        return Err(GeodexError::Argument("scatter data contains non-finite values".into()));
    }

    let (x0, x1) = range(plot.x);
    let (y0, y1) = range(plot.y);
    let left = MARGIN_LEFT;
    let right = WIDTH - MARGIN_RIGHT;
    let top = MARGIN_TOP;
    let bottom = HEIGHT - MARGIN_BOTTOM;
    let px = |x: f64| (left + (x - x0) / (x1 - x0) * (right - left)).clamp(left + GLYPH_RADIUS, right - GLYPH_RADIUS);
    let py = |y: f64| (bottom - (y - y0) / (y1 - y0) * (bottom - top)).clamp(top + GLYPH_RADIUS, bottom - GLYPH_RADIUS);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        right - left,
        bottom - top
    );
    if let Some(title) = plot.title {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#,
            WIDTH / 2.0,
            escape(title)
        );
    }

    let (xt, xd) = ticks(x0, x1);
    for t in xt {
        let x = px(t);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{bottom}" x2="{x:.2}" y2="{}" stroke="black"/>"#, bottom + 5.0);
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">{t:.xd$}</text>"#,
            bottom + 20.0
        );
    }
    let (yt, yd) = ticks(y0, y1);
    for t in yt {
        let y = py(t);
        let _ = writeln!(s, r#"<line x1="{}" y1="{y:.2}" x2="{left}" y2="{y:.2}" stroke="black"/>"#, left - 5.0);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" text-anchor="end" font-family="sans-serif" font-size="12">{t:.yd$}</text>"#,
            left - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        (left + right) / 2.0,
        HEIGHT - 15.0,
        escape(plot.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{0}" text-anchor="middle" font-family="sans-serif" font-size="14" transform="rotate(-90 20 {0})">{1}</text>"#,
        (top + bottom) / 2.0,
        escape(plot.y_label)
    );

    let (c0, c1) = match plot.color {
        Some(c) if plot.palette != Palette::Plain => {
            let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        }
        _ => (0.0, 0.0),
    };
    let _ = writeln!(s, r#"<g fill-opacity="0.7">"#);
    for i in 0..n {
        let t = match plot.color {
            Some(c) if c1 > c0 => (c[i] - c0) / (c1 - c0),
            _ => 0.0,
        };
        let [r, g, b] = palette_color(plot.palette, t);
        let _ = writeln!(
            s,
            r##"<circle cx="{:.2}" cy="{:.2}" r="{GLYPH_RADIUS}" fill="#{r:02x}{g:02x}{b:02x}"/>"##,
            px(plot.x[i]),
            py(plot.y[i])
        );
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    Ok(s)
}
