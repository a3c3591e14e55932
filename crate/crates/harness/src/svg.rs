//! Self-contained SVG line chart of entropy against updates.

use std::fmt::Write as _;

use crate::summary::MethodCurve;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];
/// Curves longer than this are thinned before plotting.
const MAX_POINTS: usize = 600;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Round tick step covering `span` in roughly `target` intervals.
fn nice_step(span: f64, target: f64) -> f64 {
    let raw = (span / target).max(f64::MIN_POSITIVE);
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let nice = if f <= 1.0 {
        1.0
    } else if f <= 2.0 {
        2.0
    } else if f <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn ticks(lo: f64, hi: f64, target: f64) -> Vec<f64> {
    let step = nice_step(hi - lo, target);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

fn fmt_tick(x: f64) -> String {
    let s = format!("{x:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn sample_indices(len: usize) -> Vec<usize> {
    if len <= MAX_POINTS {
        return (0..len).collect();
    }
    let mut idx: Vec<usize> = (0..MAX_POINTS)
        .map(|k| k * (len - 1) / (MAX_POINTS - 1))
        .collect();
    idx.dedup();
    idx
}

/// One line per method with a shaded one-standard-deviation band.
/// A dashed reference line is drawn at `reference` when given.
pub fn render(curves: &[MethodCurve], title: &str, reference: Option<(f64, &str)>) -> String {
    let plotted: Vec<(usize, &MethodCurve)> = curves
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.mean.is_empty())
        .collect();
    let x_max = plotted
        .iter()
        .map(|(_, c)| c.mean.len())
        .max()
        .unwrap_or(1)
        .max(2) as f64;
    let mut y_lo = f64::INFINITY;
    let mut y_hi = f64::NEG_INFINITY;
    for (_, c) in &plotted {
        for (m, s) in c.mean.iter().zip(&c.sd) {
            y_lo = y_lo.min(m - s);
            y_hi = y_hi.max(m + s);
        }
    }
    if let Some((r, _)) = reference {
        y_lo = y_lo.min(r);
        y_hi = y_hi.max(r);
    }
    if !y_lo.is_finite() || !y_hi.is_finite() {
        y_lo = 0.0;
        y_hi = 1.0;
    }
    y_lo = y_lo.min(0.0);
    if y_hi - y_lo < 1e-9 {
        y_hi = y_lo + 1.0;
    }
    y_hi += 0.05 * (y_hi - y_lo);

    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - 1.0) / (x_max - 1.0) * pw;
    let sy = |y: f64| TOP + (y_hi - y) / (y_hi - y_lo) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">
<rect width="100%" height="100%" fill="white"/>
<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + pw / 2.0,
        escape(title)
    );

    let _ = writeln!(s, r##"<g stroke="#ddd" stroke-width="1">"##);
    let xt = ticks(1.0, x_max, 6.0);
    let yt = ticks(y_lo, y_hi, 6.0);
    for &t in &yt {
        let _ = writeln!(
            s,
            r#"<line x1="{LEFT}" y1="{0:.2}" x2="{1:.2}" y2="{0:.2}"/>"#,
            sy(t),
            LEFT + pw
        );
    }
    let _ = writeln!(s, "</g>");

    for &(i, c) in &plotted {
        let color = PALETTE[i % PALETTE.len()];
        let idx = sample_indices(c.mean.len());
        let mut band = String::new();
        for &k in &idx {
            let _ = write!(
                band,
                "{:.2},{:.2} ",
                sx((k + 1) as f64),
                sy(c.mean[k] + c.sd[k])
            );
        }
        for &k in idx.iter().rev() {
            let _ = write!(
                band,
                "{:.2},{:.2} ",
                sx((k + 1) as f64),
                sy(c.mean[k] - c.sd[k])
            );
        }
        let _ = writeln!(
            s,
            r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            band.trim_end()
        );
        let mut line = String::new();
        for &k in &idx {
            let _ = write!(line, "{:.2},{:.2} ", sx((k + 1) as f64), sy(c.mean[k]));
        }
        let _ = writeln!(
            s,
            r#"<polyline class="method" data-method="{}" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            escape(&c.label),
            line.trim_end()
        );
    }

    if let Some((r, label)) = reference {
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{0:.2}" x2="{1:.2}" y2="{0:.2}" stroke="#555" stroke-dasharray="6 4"/>
<text x="{2:.2}" y="{3:.2}" text-anchor="end" fill="#555">{4}</text>"##,
            sy(r),
            LEFT + pw,
            LEFT + pw - 4.0,
            sy(r) - 4.0,
            escape(label)
        );
    }

    let _ = writeln!(
        s,
        r#"<g stroke="black" stroke-width="1">
<line x1="{LEFT}" y1="{0:.2}" x2="{1:.2}" y2="{0:.2}"/>
<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{0:.2}"/>"#,
        TOP + ph,
        LEFT + pw
    );
    for &t in &xt {
        let _ = writeln!(
            s,
            r#"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}"/>"#,
            sx(t),
            TOP + ph,
            TOP + ph + 5.0
        );
    }
    for &t in &yt {
        let _ = writeln!(
            s,
            r#"<line x1="{0:.2}" y1="{1:.2}" x2="{LEFT}" y2="{1:.2}"/>"#,
            LEFT - 5.0,
            sy(t)
        );
    }
    let _ = writeln!(s, "</g>");
    for &t in &xt {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            sx(t),
            TOP + ph + 19.0,
            fmt_tick(t)
        );
    }
    for &t in &yt {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 8.0,
            sy(t) + 4.0,
            fmt_tick(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">iterations</text>
<text transform="translate(18,{:.2}) rotate(-90)" text-anchor="middle">entropy (nats)</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 16.0,
        TOP + ph / 2.0
    );

    for (row, &(i, c)) in plotted.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let y = TOP + 10.0 + 20.0 * row as f64;
        let x = LEFT + pw + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="3"/>
<text x="{:.2}" y="{:.2}">{}</text>"#,
            x + 22.0,
            x + 28.0,
            y + 4.0,
            escape(&c.label)
        );
    }
    s.push_str("</svg>\n");
    s
}
