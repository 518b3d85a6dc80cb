//! Minimal SVG emitters for heatmaps and line charts.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 110.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const MAX_CELLS: usize = 128;

fn num(x: f64) -> String {
    format!("{x:.2}")
}

fn tick(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && !(1e-3..1e5).contains(&a) {
        format!("{x:.2e}")
    } else {
        let s = format!("{x:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

// perceptual ramp, dark blue to yellow
const RAMP: [(f64, f64, f64); 5] = [
    (68.0, 1.0, 84.0),
    (59.0, 82.0, 139.0),
    (33.0, 145.0, 140.0),
    (94.0, 201.0, 98.0),
    (253.0, 231.0, 37.0),
];

fn color(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let x = t * (RAMP.len() - 1) as f64;
    let k = (x.floor() as usize).min(RAMP.len() - 2);
    let f = x - k as f64;
    let (a, b) = (RAMP[k], RAMP[k + 1]);
    let c = |u: f64, v: f64| (u + f * (v - u)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", c(a.0, b.0), c(a.1, b.1), c(a.2, b.2))
}

fn frame(svg: &mut String, title: &str, xlabel: &str, ylabel: &str, x: (f64, f64), y: (f64, f64)) {
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, num(LEFT + pw / 2.0), escape(title));
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, num(LEFT + pw / 2.0), num(H - 15.0), escape(xlabel));
    let _ = writeln!(
        svg,
        r#"<text x="20" y="{0}" text-anchor="middle" transform="rotate(-90 20 {0})">{1}</text>"#,
        num(TOP + ph / 2.0),
        escape(ylabel)
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let px = LEFT + f * pw;
        let py = TOP + ph - f * ph;
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, num(px), num(TOP + ph + 18.0), tick(x.0 + f * (x.1 - x.0)));
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, num(LEFT - 6.0), num(py + 4.0), tick(y.0 + f * (y.1 - y.0)));
    }
}

fn border(svg: &mut String) {
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        num(W - LEFT - RIGHT),
        num(H - TOP - BOTTOM)
    );
}

/// Heatmap of `values[ix * ny + iy]` over uniform `x` and `y` axes.
/// Missing cells (`None`) are left blank. Large inputs are decimated.
pub fn heatmap(title: &str, xlabel: &str, ylabel: &str, x: &[f64], y: &[f64], values: &[Option<f64>]) -> String {
    let (nx, ny) = (x.len(), y.len());
    let sx = nx.div_ceil(MAX_CELLS).max(1);
    let sy = ny.div_ceil(MAX_CELLS).max(1);
    let (lo, hi) = values
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let xr = (x[0], x[nx - 1]);
    let yr = (y[0], y[ny - 1]);
    let mut svg = String::new();
    frame(&mut svg, title, xlabel, ylabel, xr, yr);
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let (cx, cy) = (nx.div_ceil(sx), ny.div_ceil(sy));
    let (cw, ch) = (pw / cx as f64, ph / cy as f64);
    for bx in 0..cx {
        for by in 0..cy {
            let mut acc = 0.0;
            let mut n = 0;
            for ix in bx * sx..((bx + 1) * sx).min(nx) {
                for iy in by * sy..((by + 1) * sy).min(ny) {
                    if let Some(v) = values[ix * ny + iy] {
                        acc += v;
                        n += 1;
                    }
                }
            }
            if n == 0 {
                continue;
            }
            let t = (acc / n as f64 - lo) / span;
            let _ = writeln!(
                svg,
                r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{}"/>"#,
                num(LEFT + bx as f64 * cw),
                num(TOP + ph - (by + 1) as f64 * ch),
                num(cw + 0.3),
                num(ch + 0.3),
                color(t)
            );
        }
    }
    // color bar
    for k in 0..50 {
        let t = k as f64 / 49.0;
        let _ = writeln!(
            svg,
            r#"<rect x="{}" y="{}" width="14" height="{}" fill="{}"/>"#,
            num(W - RIGHT + 20.0),
            num(TOP + ph - (k + 1) as f64 * ph / 50.0),
            num(ph / 50.0 + 0.3),
            color(t)
        );
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}">{}</text>"#, num(W - RIGHT + 38.0), num(TOP + 8.0), tick(hi));
    let _ = writeln!(svg, r#"<text x="{}" y="{}">{}</text>"#, num(W - RIGHT + 38.0), num(TOP + ph), tick(lo));
    border(&mut svg);
    svg.push_str("</svg>\n");
    svg
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Line chart; each series is `(name, points)`.
pub fn lines(title: &str, xlabel: &str, ylabel: &str, series: &[(&str, Vec<(f64, f64)>)]) -> String {
    let pts = series.iter().flat_map(|s| s.1.iter()).filter(|p| p.0.is_finite() && p.1.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in pts {
        x0 = x0.min(p.0);
        x1 = x1.max(p.0);
        y0 = y0.min(p.1);
        y1 = y1.max(p.1);
    }
    if !(x1 > x0) {
        x1 = x0 + 1.0;
    }
    if !(y1 > y0) {
        y1 = y0 + 1.0;
    }
    let pad = 0.05 * (y1 - y0);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let mut svg = String::new();
    if !x0.is_finite() {
        frame(&mut svg, title, xlabel, ylabel, (0.0, 1.0), (0.0, 1.0));
        border(&mut svg);
        svg.push_str("</svg>\n");
        return svg;
    }
    frame(&mut svg, title, xlabel, ylabel, (x0, x1), (y0, y1));
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let map = |p: (f64, f64)| (LEFT + (p.0 - x0) / (x1 - x0) * pw, TOP + ph - (p.1 - y0) / (y1 - y0) * ph);
    for (k, (name, points)) in series.iter().enumerate() {
        let c = COLORS[k % COLORS.len()];
        let path: Vec<String> = points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|p| {
                let (a, b) = map(*p);
                format!("{},{}", num(a), num(b))
            })
            .collect();
        if path.len() == 1 {
            let (a, b) = path[0].split_once(',').unwrap();
            let _ = writeln!(svg, r#"<circle cx="{a}" cy="{b}" r="3" fill="{c}"/>"#);
        } else if !path.is_empty() {
            let _ = writeln!(svg, r#"<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
        }
        let ly = TOP + 14.0 + 16.0 * k as f64;
        let _ = writeln!(svg, r#"<text x="{}" y="{}" fill="{c}">{}</text>"#, num(W - RIGHT + 8.0), num(ly), escape(name));
    }
    border(&mut svg);
    svg.push_str("</svg>\n");
    svg
}
