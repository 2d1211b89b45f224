//! Hand-written SVG for the ROC plot and the correlation heat map.

use std::fmt::Write;

use crate::eda::CorrelationMatrix;
use crate::eval::RocCurve;

const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// One polyline per `(label, curve)` on the unit square, plus the chance
/// diagonal and a legend with each AUC.
pub fn roc_svg(curves: &[(String, &RocCurve)]) -> String {
    let (size, pad) = (400.0, 50.0);
    let span = size - 2.0 * pad;
    let px = |fpr: f64| pad + fpr * span;
    let py = |tpr: f64| size - pad - tpr * span;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{size}" height="{size}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{pad}" y="{pad}" width="{span}" height="{span}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#999" stroke-dasharray="4 3"/>"##,
        px(0.0),
        py(0.0),
        px(1.0),
        py(1.0)
    );
    for t in 0..=4 {
        let v = t as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{v:.2}</text>"#,
            px(v),
            size - pad + 15.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{v:.2}</text>"#,
            pad - 5.0,
            py(v) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">False positive rate</text>"#,
        size / 2.0,
        size - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">True positive rate</text>"#,
        size / 2.0,
        size / 2.0
    );
    for (i, (label, curve)) in curves.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = curve
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", px(p.fpr), py(p.tpr)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
        let y = size - pad - 12.0 - 14.0 * (curves.len() - 1 - i) as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{y}" text-anchor="end" fill="{colour}">{} (AUC {:.4})</text>"#,
            size - pad - 6.0,
            escape(label),
            curve.auc
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Blue (−1) through white (0) to red (+1).
fn diverging(v: Option<f64>) -> String {
    let v = v.unwrap_or(0.0).clamp(-1.0, 1.0);
    let fade = |t: f64| (255.0 * (1.0 - t)).round() as u8;
    let (r, g, b) = if v >= 0.0 {
        (255, fade(v), fade(v))
    } else {
        (fade(-v), fade(-v), 255)
    };
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Grid of Pearson coefficients with the value printed in each cell.
pub fn heatmap_svg(m: &CorrelationMatrix) -> String {
    let n = m.names.len();
    let cell = 36.0;
    let label_w = 8.0 * m.names.iter().map(String::len).max().unwrap_or(0) as f64 + 10.0;
    let width = label_w + cell * n as f64 + 10.0;
    let height = label_w + cell * n as f64 + 10.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{width}" height="{height}" fill="white"/>"#
    );
    for (i, name) in m.names.iter().enumerate() {
        let c = label_w + cell * (i as f64 + 0.5);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{c}" text-anchor="end" dominant-baseline="middle">{}</text>"#,
            label_w - 4.0,
            escape(name)
        );
        let _ = writeln!(
            s,
            r#"<text x="{c}" y="{}" text-anchor="start" transform="rotate(-90 {c} {})">{}</text>"#,
            label_w - 4.0,
            label_w - 4.0,
            escape(name)
        );
    }
    for (i, row) in m.values.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let (x, y) = (label_w + cell * j as f64, label_w + cell * i as f64);
            let _ = writeln!(
                s,
                r#"<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{}" stroke="white"/>"#,
                diverging(v)
            );
            let text = v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.2}"));
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="middle" dominant-baseline="middle">{text}</text>"#,
                x + cell / 2.0,
                y + cell / 2.0
            );
        }
    }
    s.push_str("</svg>\n");
    s
}
