//! Minimal SVG line plots: axes, tick labels, one polyline per series.

use std::fmt::Write;

const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            name: name.into(),
            points,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

impl Panel {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            ..Default::default()
        }
    }

    pub fn log_y(mut self) -> Self {
        self.log_y = true;
        self
    }

    pub fn log_xy(mut self) -> Self {
        self.log_x = true;
        self.log_y = true;
        self
    }

    pub fn with(mut self, s: Series) -> Self {
        self.series.push(s);
        self
    }
}

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 300.0;
const MARGIN_L: f64 = 62.0;
const MARGIN_R: f64 = 14.0;
const MARGIN_T: f64 = 28.0;
const MARGIN_B: f64 = 44.0;

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn range(vals: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in vals.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return None;
    }
    if hi - lo <= 1e-300 {
        let pad = if lo == 0.0 { 1.0 } else { 0.05 * lo.abs() };
        return Some((lo - pad, hi + pad));
    }
    Some((lo, hi))
}

fn render_panel(out: &mut String, p: &Panel, ox: f64, oy: f64) {
    let tx = |v: f64| if p.log_x { v.log10() } else { v };
    let ty = |v: f64| if p.log_y { v.log10() } else { v };
    let keep = |&(x, y): &(f64, f64)| (!p.log_x || x > 0.0) && (!p.log_y || y > 0.0) && x.is_finite() && y.is_finite();
    let pts: Vec<Vec<(f64, f64)>> = p
        .series
        .iter()
        .map(|s| s.points.iter().copied().filter(keep).map(|(x, y)| (tx(x), ty(y))).collect())
        .collect();
    let (x0, x1) = range(pts.iter().flatten().map(|q| q.0)).unwrap_or((0.0, 1.0));
    let (y0, y1) = range(pts.iter().flatten().map(|q| q.1)).unwrap_or((0.0, 1.0));
    let (pw, ph) = (PANEL_W - MARGIN_L - MARGIN_R, PANEL_H - MARGIN_T - MARGIN_B);
    let sx = |x: f64| ox + MARGIN_L + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| oy + MARGIN_T + ph - (y - y0) / (y1 - y0) * ph;

    let _ = writeln!(
        out,
        r#"<rect x="{:.1}" y="{:.1}" width="{pw:.1}" height="{ph:.1}" fill="none" stroke="black"/>"#,
        ox + MARGIN_L,
        oy + MARGIN_T
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="13">{}</text>"#,
        ox + MARGIN_L + pw / 2.0,
        oy + 18.0,
        escape(&p.title)
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let xl = if p.log_x { fmt_tick(10f64.powf(xv)) } else { fmt_tick(xv) };
        let yl = if p.log_y { fmt_tick(10f64.powf(yv)) } else { fmt_tick(yv) };
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="10">{xl}</text>"#,
            sx(xv),
            oy + MARGIN_T + ph + 14.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-size="10">{yl}</text>"#,
            ox + MARGIN_L - 4.0,
            sy(yv) + 3.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="11">{}</text>"#,
        ox + MARGIN_L + pw / 2.0,
        oy + PANEL_H - 8.0,
        escape(&p.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="11" transform="rotate(-90 {:.1} {:.1})">{}</text>"#,
        ox + 14.0,
        oy + MARGIN_T + ph / 2.0,
        ox + 14.0,
        oy + MARGIN_T + ph / 2.0,
        escape(&p.y_label)
    );
    for (k, (s, q)) in p.series.iter().zip(&pts).enumerate() {
        let color = COLORS[k % COLORS.len()];
        if q.len() > 1 {
            let mut d = String::new();
            for (x, y) in q {
                let _ = write!(d, "{:.2},{:.2} ", sx(*x), sy(*y));
            }
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.3" points="{}"/>"#,
                d.trim_end()
            );
        } else if let Some((x, y)) = q.first() {
            let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#, sx(*x), sy(*y));
        }
        if !s.name.is_empty() && p.series.len() <= 12 {
            let ly = oy + MARGIN_T + 12.0 + 12.0 * k as f64;
            let lx = ox + PANEL_W - MARGIN_R - 110.0;
            let _ = writeln!(
                out,
                r#"<line x1="{lx:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{color}"/><text x="{:.1}" y="{ly:.1}" font-size="10">{}</text>"#,
                ly - 3.0,
                lx + 14.0,
                ly - 3.0,
                lx + 18.0,
                escape(&s.name)
            );
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Panels laid out row-major, `cols` per row.
pub fn render(panels: &[Panel], cols: usize) -> String {
    let cols = cols.max(1).min(panels.len().max(1));
    let rows = panels.len().div_ceil(cols).max(1);
    let (w, h) = (PANEL_W * cols as f64, PANEL_H * rows as f64);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    for (k, p) in panels.iter().enumerate() {
        let (r, c) = (k / cols, k % cols);
        render_panel(&mut out, p, c as f64 * PANEL_W, r as f64 * PANEL_H);
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_polylines_and_skips_nonpositive_on_log_axes() {
        let p = Panel::new("t", "x", "y")
            .log_y()
            .with(Series::new("a", vec![(0.0, 1.0), (1.0, 0.1), (2.0, 0.0)]));
        let svg = render(&[p], 1);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 1);
        let pts = svg.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        assert_eq!(pts.split(' ').count(), 2);
    }

    #[test]
    fn grid_layout_size() {
        let panels = vec![Panel::new("a", "", ""); 5];
        let svg = render(&panels, 2);
        assert!(svg.contains(r#"width="840" height="900""#));
    }
}
