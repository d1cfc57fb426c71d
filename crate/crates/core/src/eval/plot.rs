//! Static SVG rendering of per-parameter metric curves.

use std::fmt::Write as _;

use super::report::Aggregate;

const PANEL_W: f64 = 320.0;
const PANEL_H: f64 = 240.0;
const MARGIN: f64 = 48.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Accuracy, precision, recall and sign mismatch against the swept
/// parameter, one panel per metric and one polyline per method.
pub fn render_metric_panels(aggs: &[Aggregate], x_label: &str) -> String {
    let metrics = ["accuracy", "precision", "recall", "sign_mismatch"];
    let mut groups: Vec<&str> = aggs.iter().map(|a| a.group.as_str()).collect();
    groups.sort_unstable();
    groups.dedup();
    let xs: Vec<f64> = aggs.iter().filter_map(|a| a.param).collect();
    let x_min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let x_max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (x_min, x_max) = if x_min.is_finite() && x_max > x_min { (x_min, x_max) } else { (0.0, 1.0) };

    let width = 2.0 * (PANEL_W + MARGIN) + MARGIN;
    let legend_h = 20.0 * groups.len() as f64 + 10.0;
    let height = 2.0 * (PANEL_H + MARGIN) + MARGIN + legend_h;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);

    for (k, metric) in metrics.iter().enumerate() {
        let ox = MARGIN + (k % 2) as f64 * (PANEL_W + MARGIN);
        let oy = MARGIN + (k / 2) as f64 * (PANEL_H + MARGIN);
        let px = |x: f64| ox + (x - x_min) / (x_max - x_min) * PANEL_W;
        let py = |y: f64| oy + (1.0 - y.clamp(0.0, 1.0)) * PANEL_H;
        let _ = writeln!(
            svg,
            r##"<rect x="{ox}" y="{oy}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="#444"/>"##
        );
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">{metric}</text>"#, ox + PANEL_W / 2.0, oy - 8.0);
        for tick in 0..=4 {
            let y = tick as f64 / 4.0;
            let _ = writeln!(
                svg,
                r##"<line x1="{ox}" x2="{}" y1="{py}" y2="{py}" stroke="#ddd"/><text x="{}" y="{}" text-anchor="end">{y:.2}</text>"##,
                ox + PANEL_W,
                ox - 4.0,
                py(y) + 4.0,
                py = py(y)
            );
            let x = x_min + (x_max - x_min) * tick as f64 / 4.0;
            let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{x:.2}</text>"#, px(x), oy + PANEL_H + 14.0);
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#,
            ox + PANEL_W / 2.0,
            oy + PANEL_H + 30.0
        );
        for (g, group) in groups.iter().enumerate() {
            let mut pts: Vec<(f64, f64)> = aggs
                .iter()
                .filter(|a| a.group == *group && a.metric == *metric && a.mean.is_finite())
                .filter_map(|a| a.param.map(|p| (p, a.mean)))
                .collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            if pts.is_empty() {
                continue;
            }
            let color = PALETTE[g % PALETTE.len()];
            let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
            let _ = writeln!(svg, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, path.join(" "));
            for &(x, y) in &pts {
                let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, px(x), py(y));
            }
        }
    }

    let ly = 2.0 * (PANEL_H + MARGIN) + MARGIN;
    for (g, group) in groups.iter().enumerate() {
        let y = ly + 20.0 * g as f64;
        let color = PALETTE[g % PALETTE.len()];
        let _ = writeln!(
            svg,
            r#"<rect x="{MARGIN}" y="{}" width="14" height="4" fill="{color}"/><text x="{}" y="{}">{}</text>"#,
            y - 4.0,
            MARGIN + 20.0,
            y + 1.0,
            escape(group)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
