//! Minimal standalone SVG charts: line panels with ±1 sd bands, grouped bars
//! and scatter plots, laid out on a grid.

use std::fmt::Write;

const PANEL_W: f64 = 440.0;
const PANEL_H: f64 = 320.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 16.0;
const MARGIN_TOP: f64 = 32.0;
const MARGIN_BOTTOM: f64 = 48.0;
const TITLE_H: f64 = 36.0;

pub const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

/// A mean curve with a shaded ±1 sd band.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub label: String,
    pub x: Vec<f64>,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarSeries {
    pub label: String,
    pub values: Vec<f64>,
    /// Symmetric error bars, one per value.
    pub errors: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PanelBody {
    Lines(Vec<Band>),
    Bars { categories: Vec<String>, series: Vec<BarSeries> },
    /// Points as (x, y, group index into `groups`).
    Scatter { points: Vec<(f64, f64, usize)>, groups: Vec<String> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub body: PanelBody,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Figure {
    pub title: String,
    pub columns: usize,
    pub panels: Vec<Panel>,
}

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Round tick positions covering `[lo, hi]`, about `target` of them.
pub fn nice_ticks(lo: f64, hi: f64, target: usize) -> (Vec<f64>, f64) {
    let (lo, hi) = if (hi - lo).abs() < 1e-12 { (lo - 1.0, hi + 1.0) } else { (lo.min(hi), lo.max(hi)) };
    let raw = (hi - lo) / target.max(1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let start = (lo / step).floor() as i64;
    let end = (hi / step).ceil() as i64;
    ((start..=end).map(|i| i as f64 * step).collect(), step)
}

fn tick_label(v: f64, step: f64) -> String {
    let decimals = (0..6).find(|&d| {
        let scaled = step * 10f64.powi(d as i32);
        (scaled - scaled.round()).abs() < 1e-6
    });
    let decimals = decimals.unwrap_or(6);
    let s = format!("{v:.decimals$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

struct Axis {
    lo: f64,
    hi: f64,
    ticks: Vec<f64>,
    step: f64,
}

impl Axis {
    fn new(lo: f64, hi: f64) -> Axis {
        let (ticks, step) = nice_ticks(lo, hi, 5);
        Axis { lo: ticks[0], hi: *ticks.last().expect("ticks are non-empty"), ticks, step }
    }

    /// Maps a data value to `[0, 1]` along the axis.
    fn frac(&self, v: f64) -> f64 {
        (v - self.lo) / (self.hi - self.lo)
    }
}

struct Frame {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
}

impl Frame {
    fn px(&self, axis: &Axis, v: f64) -> f64 {
        self.x0 + axis.frac(v) * self.w
    }

    fn py(&self, axis: &Axis, v: f64) -> f64 {
        self.y0 + self.h - axis.frac(v) * self.h
    }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn or_unit((lo, hi): (f64, f64)) -> (f64, f64) {
    if lo.is_finite() {
        (lo, hi)
    } else {
        (0.0, 1.0)
    }
}

impl Figure {
    pub fn render(&self) -> String {
        let columns = self.columns.clamp(1, self.panels.len().max(1));
        let rows = self.panels.len().div_ceil(columns).max(1);
        let width = PANEL_W * columns as f64;
        let height = TITLE_H + PANEL_H * rows as f64;
        let mut s = String::new();
        writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="Helvetica, Arial, sans-serif">"#
        )
        .unwrap();
        writeln!(s, r#"<rect x="0" y="0" width="{width:.0}" height="{height:.0}" fill="white"/>"#).unwrap();
        writeln!(s, r#"<text x="{:.1}" y="24" font-size="16" text-anchor="middle" font-weight="bold">{}</text>"#, width / 2.0, escape(&self.title)).unwrap();
        for (i, panel) in self.panels.iter().enumerate() {
            let (col, row) = (i % columns, i / columns);
            let ox = col as f64 * PANEL_W;
            let oy = TITLE_H + row as f64 * PANEL_H;
            writeln!(s, r#"<g class="panel" transform="translate({ox:.0},{oy:.0})">"#).unwrap();
            panel.render_into(&mut s);
            s.push_str("</g>\n");
        }
        s.push_str("</svg>\n");
        s
    }
}

impl Panel {
    fn render_into(&self, s: &mut String) {
        let frame = Frame { x0: MARGIN_LEFT, y0: MARGIN_TOP, w: PANEL_W - MARGIN_LEFT - MARGIN_RIGHT, h: PANEL_H - MARGIN_TOP - MARGIN_BOTTOM };
        writeln!(s, r#"<text x="{:.1}" y="20" font-size="13" text-anchor="middle">{}</text>"#, frame.x0 + frame.w / 2.0, escape(&self.title)).unwrap();
        let legend: Vec<String> = match &self.body {
            PanelBody::Lines(bands) => {
                let (xlo, xhi) = or_unit(range(bands.iter().flat_map(|b| b.x.iter().copied())));
                let (ylo, yhi) = or_unit(range(bands.iter().flat_map(|b| {
                    b.mean.iter().zip(&b.sd).flat_map(|(m, d)| [m - d, m + d])
                })));
                let (xa, ya) = (Axis::new(xlo, xhi), Axis::new(ylo, yhi));
                draw_axes(s, &frame, &xa, &ya, self);
                for (i, b) in bands.iter().enumerate() {
                    draw_band(s, &frame, &xa, &ya, b, PALETTE[i % PALETTE.len()]);
                }
                bands.iter().map(|b| b.label.clone()).collect()
            }
            PanelBody::Bars { categories, series } => {
                let (lo, hi) = or_unit(range(series.iter().flat_map(|b| {
                    let errs = b.errors.clone().unwrap_or_else(|| vec![0.0; b.values.len()]);
                    b.values.iter().zip(errs).flat_map(|(v, e)| [v - e, v + e]).chain([0.0]).collect::<Vec<_>>()
                })));
                let ya = Axis::new(lo, hi);
                draw_bars(s, &frame, &ya, categories, series, self);
                series.iter().map(|b| b.label.clone()).collect()
            }
            PanelBody::Scatter { points, groups } => {
                let (xlo, xhi) = or_unit(range(points.iter().map(|p| p.0)));
                let (ylo, yhi) = or_unit(range(points.iter().map(|p| p.1)));
                let (xa, ya) = (Axis::new(xlo, xhi), Axis::new(ylo, yhi));
                draw_axes(s, &frame, &xa, &ya, self);
                for &(x, y, g) in points {
                    writeln!(
                        s,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{}" fill-opacity="0.7"/>"#,
                        frame.px(&xa, x),
                        frame.py(&ya, y),
                        PALETTE[g % PALETTE.len()]
                    )
                    .unwrap();
                }
                groups.clone()
            }
        };
        draw_legend(s, &frame, &legend);
    }
}

fn draw_axes(s: &mut String, f: &Frame, xa: &Axis, ya: &Axis, panel: &Panel) {
    draw_y_axis(s, f, ya, &panel.y_label);
    let bottom = f.y0 + f.h;
    for &t in &xa.ticks {
        let x = f.px(xa, t);
        writeln!(s, r#"<line x1="{x:.2}" y1="{bottom:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, bottom + 4.0).unwrap();
        writeln!(s, r#"<text x="{x:.2}" y="{:.2}" font-size="10" text-anchor="middle">{}</text>"#, bottom + 16.0, tick_label(t, xa.step)).unwrap();
    }
    writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#, f.x0 + f.w / 2.0, bottom + 36.0, escape(&panel.x_label)).unwrap();
}

fn draw_y_axis(s: &mut String, f: &Frame, ya: &Axis, label: &str) {
    writeln!(s, r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#, f.x0, f.y0, f.w, f.h).unwrap();
    for &t in &ya.ticks {
        let y = f.py(ya, t);
        writeln!(s, r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##, f.x0, f.x0 + f.w).unwrap();
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{}</text>"#, f.x0 - 6.0, y + 3.5, tick_label(t, ya.step)).unwrap();
    }
    let cy = f.y0 + f.h / 2.0;
    writeln!(s, r#"<text x="16" y="{cy:.2}" font-size="11" text-anchor="middle" transform="rotate(-90 16 {cy:.2})">{}</text>"#, escape(label)).unwrap();
}

fn draw_band(s: &mut String, f: &Frame, xa: &Axis, ya: &Axis, b: &Band, color: &str) {
    let n = b.x.len().min(b.mean.len()).min(b.sd.len());
    if n == 0 {
        return;
    }
    let mut pts: Vec<String> = (0..n).map(|i| format!("{:.2},{:.2}", f.px(xa, b.x[i]), f.py(ya, b.mean[i] + b.sd[i]))).collect();
    pts.extend((0..n).rev().map(|i| format!("{:.2},{:.2}", f.px(xa, b.x[i]), f.py(ya, b.mean[i] - b.sd[i]))));
    writeln!(s, r#"<polygon class="band" points="{}" fill="{color}" fill-opacity="0.18" stroke="none"/>"#, pts.join(" ")).unwrap();
    let line: Vec<String> = (0..n).map(|i| format!("{:.2},{:.2}", f.px(xa, b.x[i]), f.py(ya, b.mean[i]))).collect();
    writeln!(s, r#"<polyline class="mean" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, line.join(" ")).unwrap();
}

fn draw_bars(s: &mut String, f: &Frame, ya: &Axis, categories: &[String], series: &[BarSeries], panel: &Panel) {
    draw_y_axis(s, f, ya, &panel.y_label);
    let n_cat = categories.len().max(1) as f64;
    let cat_w = f.w / n_cat;
    let bar_w = 0.8 * cat_w / series.len().max(1) as f64;
    let zero = f.py(ya, 0.0);
    let bottom = f.y0 + f.h;
    for (c, name) in categories.iter().enumerate() {
        let cx = f.x0 + (c as f64 + 0.5) * cat_w;
        writeln!(s, r#"<text x="{cx:.2}" y="{:.2}" font-size="10" text-anchor="middle">{}</text>"#, bottom + 16.0, escape(name)).unwrap();
        for (j, b) in series.iter().enumerate() {
            let Some(&v) = b.values.get(c) else { continue };
            let x = f.x0 + c as f64 * cat_w + 0.1 * cat_w + j as f64 * bar_w;
            let y = f.py(ya, v);
            let color = PALETTE[j % PALETTE.len()];
            writeln!(s, r#"<rect class="bar" x="{x:.2}" y="{:.2}" width="{bar_w:.2}" height="{:.2}" fill="{color}" fill-opacity="0.75"/>"#, y.min(zero), (y - zero).abs()).unwrap();
            if let Some(e) = b.errors.as_ref().and_then(|e| e.get(c)) {
                let mx = x + bar_w / 2.0;
                writeln!(s, r#"<line class="err" x1="{mx:.2}" y1="{:.2}" x2="{mx:.2}" y2="{:.2}" stroke="black"/>"#, f.py(ya, v - e), f.py(ya, v + e)).unwrap();
            }
        }
    }
    writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#, f.x0 + f.w / 2.0, bottom + 36.0, escape(&panel.x_label)).unwrap();
}

fn draw_legend(s: &mut String, f: &Frame, labels: &[String]) {
    for (i, label) in labels.iter().enumerate().take(PALETTE.len()) {
        let y = f.y0 + 8.0 + i as f64 * 14.0;
        let x = f.x0 + 8.0;
        writeln!(s, r#"<rect x="{x:.2}" y="{:.2}" width="10" height="10" fill="{}"/>"#, y - 4.0, PALETTE[i]).unwrap();
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="10">{}</text>"#, x + 14.0, y + 5.0, escape(label)).unwrap();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_cover_the_range_with_round_steps() {
        let (t, step) = nice_ticks(0.0, 10.0, 5);
        assert_eq!(step, 2.0);
        assert_eq!(t, vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
        let (t, step) = nice_ticks(-13.0, 47.0, 5);
        assert_eq!(step, 20.0);
        assert!(t[0] <= -13.0 && *t.last().unwrap() >= 47.0);
        let (t, _) = nice_ticks(3.0, 3.0, 5);
        assert!(t[0] < 3.0 && *t.last().unwrap() > 3.0);
    }

    #[test]
    fn tick_labels_use_enough_decimals() {
        assert_eq!(tick_label(0.25, 0.25), "0.25");
        assert_eq!(tick_label(0.5, 0.5), "0.5");
        assert_eq!(tick_label(20.0, 10.0), "20");
        assert_eq!(tick_label(-0.0, 0.2), "0.0");
        assert_eq!(tick_label(2500.0, 500.0), "2500");
    }

    #[test]
    fn text_is_escaped() {
        assert_eq!(escape("a<b & \"c\""), "a&lt;b &amp; &quot;c&quot;");
    }

    fn figure() -> Figure {
        let band = |label: &str, k: f64| Band { label: label.into(), x: vec![1.0, 2.0, 3.0], mean: vec![k, 2.0 * k, 3.0 * k], sd: vec![0.5, 0.5, 0.5] };
        Figure {
            title: "T & C".into(),
            columns: 2,
            panels: vec![
                Panel { title: "soc".into(), x_label: "day".into(), y_label: "kWh".into(), body: PanelBody::Lines(vec![band("a", 1.0), band("b", 2.0)]) },
                Panel {
                    title: "hist".into(),
                    x_label: "kWh".into(),
                    y_label: "share".into(),
                    body: PanelBody::Bars { categories: vec!["0".into(), "1".into()], series: vec![BarSeries { label: "a".into(), values: vec![0.2, 0.8], errors: Some(vec![0.1, 0.1]) }] },
                },
                Panel { title: "pts".into(), x_label: "x".into(), y_label: "y".into(), body: PanelBody::Scatter { points: vec![(0.0, 1.0, 0), (2.0, -1.0, 1)], groups: vec!["g0".into(), "g1".into()] } },
            ],
        }
    }

    #[test]
    fn figure_has_one_element_per_mark() {
        let svg = figure().render();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches(r#"class="panel""#).count(), 3);
        assert_eq!(svg.matches(r#"class="band""#).count(), 2);
        assert_eq!(svg.matches(r#"class="mean""#).count(), 2);
        assert_eq!(svg.matches(r#"class="bar""#).count(), 2);
        assert_eq!(svg.matches(r#"class="err""#).count(), 2);
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(svg.contains("T &amp; C"));
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
        assert_eq!(svg, figure().render());
    }

    #[test]
    fn band_polygon_encloses_the_mean() {
        let svg = figure().render();
        let poly = svg.split(r#"class="band" points=""#).nth(1).unwrap().split('"').next().unwrap();
        let ys: Vec<f64> = poly.split(' ').map(|p| p.split(',').nth(1).unwrap().parse().unwrap()).collect();
        assert_eq!(ys.len(), 6);
        // Upper edge is drawn above (smaller y than) the lower edge at each x.
        assert!(ys[0] < ys[5] && ys[1] < ys[4] && ys[2] < ys[3]);
    }
}
