//! SVG rendering of information planes.
//!
//! Each layer is drawn as a polyline through its `(I(T;X), I(T;Y))` points
//! in epoch order, with one marker per snapshot coloured by epoch rank.
//! Output is plain text with fixed-precision coordinates, so identical
//! planes render to identical bytes.

use std::fmt::Write;

use crate::analysis::InfoPlane;

#[derive(Debug, Clone, PartialEq)]
pub struct PlotStyle {
    pub width: f64,
    pub height: f64,
    pub title: Option<String>,
    pub marker_radius: f64,
    /// Fixed axis maxima; `None` fits the data.
    pub x_max: Option<f64>,
    pub y_max: Option<f64>,
}

impl Default for PlotStyle {
    fn default() -> Self {
        PlotStyle {
            width: 640.0,
            height: 480.0,
            title: None,
            marker_radius: 3.0,
            x_max: None,
            y_max: None,
        }
    }
}

const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 96.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 56.0;

// viridis anchors
const COLORMAP: [(f64, f64, f64); 5] = [
    (68.0, 1.0, 84.0),
    (59.0, 82.0, 139.0),
    (33.0, 145.0, 140.0),
    (94.0, 201.0, 98.0),
    (253.0, 231.0, 37.0),
];

/// Colour for position `t` in `[0, 1]` as `#rrggbb`.
pub fn epoch_color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0) * (COLORMAP.len() - 1) as f64;
    let i = (t.floor() as usize).min(COLORMAP.len() - 2);
    let f = t - i as f64;
    let (a, b) = (COLORMAP[i], COLORMAP[i + 1]);
    let mix = |x: f64, y: f64| (x + (y - x) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// A "nice" axis maximum at or above `v`.
fn nice_ceiling(v: f64) -> f64 {
    if v.is_nan() || v <= 0.0 {
        return 1.0;
    }
    let mag = 10f64.powf(v.log10().floor());
    [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|&c| c >= v)
        .unwrap_or(10.0 * mag)
}

pub fn render_information_plane(plane: &InfoPlane, style: &PlotStyle) -> String {
    let data_x = plane.itx.as_slice().iter().fold(0.0f64, |m, &v| m.max(v));
    let data_y = plane.ity.as_slice().iter().fold(0.0f64, |m, &v| m.max(v));
    let x_max = style.x_max.unwrap_or_else(|| nice_ceiling(data_x));
    let y_max = style.y_max.unwrap_or_else(|| nice_ceiling(data_y.max(1.0)));

    let plot_w = style.width - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = style.height - MARGIN_TOP - MARGIN_BOTTOM;
    let px = |x: f64| MARGIN_LEFT + x / x_max * plot_w;
    let py = |y: f64| MARGIN_TOP + plot_h - y / y_max * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}" font-family="sans-serif" font-size="12">"#,
        w = style.width,
        h = style.height
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if let Some(title) = &style.title {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
            MARGIN_LEFT + plot_w / 2.0,
            escape(title)
        );
    }

    // axes and ticks
    let (x0, y0) = (px(0.0), py(0.0));
    let _ = writeln!(
        s,
        r#"<g stroke="black" stroke-width="1"><line x1="{x0:.2}" y1="{y0:.2}" x2="{:.2}" y2="{y0:.2}"/><line x1="{x0:.2}" y1="{y0:.2}" x2="{x0:.2}" y2="{:.2}"/></g>"#,
        px(x_max),
        py(y_max)
    );
    let ticks = 5;
    for i in 0..=ticks {
        let xv = x_max * i as f64 / ticks as f64;
        let yv = y_max * i as f64 / ticks as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{xv:.2}</text>"#,
            y0 + 4.0,
            y0 + 18.0,
            x = px(xv)
        );
        let _ = writeln!(
            s,
            r#"<line x1="{x0:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{yv:.2}</text>"#,
            x0 - 4.0,
            x0 - 8.0,
            py(yv) + 4.0,
            y = py(yv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">I(T;X) (bits)</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        style.height - 14.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">I(T;Y) (bits)</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    );

    let m = plane.n_epochs();
    let rank = |c: usize| if m > 1 { c as f64 / (m - 1) as f64 } else { 0.0 };

    for (r, layer) in plane.layers.iter().enumerate() {
        let _ = writeln!(s, r#"<g class="layer" data-layer="{layer}">"#);
        if m > 1 {
            let points: Vec<String> = (0..m)
                .map(|c| format!("{:.2},{:.2}", px(plane.itx.get(r, c)), py(plane.ity.get(r, c))))
                .collect();
            let _ = writeln!(
                s,
                r##"<polyline points="{}" fill="none" stroke="#888888" stroke-width="1"/>"##,
                points.join(" ")
            );
        }
        for c in 0..m {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="{}"/>"#,
                px(plane.itx.get(r, c)),
                py(plane.ity.get(r, c)),
                style.marker_radius,
                epoch_color(rank(c))
            );
        }
        let _ = writeln!(s, "</g>");
    }

    // epoch colour bar, by snapshot rank
    let bar_x = style.width - MARGIN_RIGHT + 24.0;
    let steps = 32;
    for i in 0..steps {
        let t = i as f64 / (steps - 1) as f64;
        let y = MARGIN_TOP + plot_h * (1.0 - (i + 1) as f64 / steps as f64);
        let _ = writeln!(
            s,
            r#"<rect x="{bar_x:.2}" y="{y:.2}" width="14" height="{:.2}" fill="{}"/>"#,
            plot_h / steps as f64 + 0.5,
            epoch_color(t)
        );
    }
    let first = plane.epochs.first().copied().unwrap_or(0);
    let last = plane.epochs.last().copied().unwrap_or(0);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}">{last}</text><text x="{:.2}" y="{:.2}">{first}</text><text x="{bar_x:.2}" y="{:.2}">epoch</text>"#,
        bar_x + 18.0,
        MARGIN_TOP + 10.0,
        bar_x + 18.0,
        MARGIN_TOP + plot_h,
        MARGIN_TOP - 8.0
    );
    s.push_str("</svg>\n");
    s
}
