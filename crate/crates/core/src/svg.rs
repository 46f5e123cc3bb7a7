//! Minimal SVG charts for corpus reports.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 48.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn frame(title: &str, x_label: &str, y_label: &str, body: &str) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    s.push('\n');
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let (x0, y0, x1) = (MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN / 2.0);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{}" stroke="black"/>"#, MARGIN / 2.0 + 8.0);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
    s.push_str(body);
    s.push_str("</svg>\n");
    s
}

/// Vertical bars, one per `(label, value)`.
pub(crate) fn bar_chart(title: &str, x_label: &str, y_label: &str, bars: &[(String, f64)]) -> String {
    let max = bars.iter().map(|b| b.1).fold(0.0, f64::max).max(1e-12);
    let plot_w = WIDTH - 1.5 * MARGIN;
    let plot_h = HEIGHT - 1.5 * MARGIN - 8.0;
    let slot = plot_w / bars.len().max(1) as f64;
    let mut body = String::new();
    for (i, (label, v)) in bars.iter().enumerate() {
        let h = v / max * plot_h;
        let x = MARGIN + i as f64 * slot;
        let _ = writeln!(
            body,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#4477aa"><title>{}: {}</title></rect>"##,
            x + slot * 0.1,
            HEIGHT - MARGIN - h,
            slot * 0.8,
            h,
            escape(label),
            v
        );
        if bars.len() <= 30 || i % (bars.len() / 30 + 1) == 0 {
            let _ = writeln!(
                body,
                r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
                x + slot / 2.0,
                HEIGHT - MARGIN + 14.0,
                escape(label)
            );
        }
    }
    let _ = writeln!(body, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, MARGIN - 4.0, MARGIN / 2.0 + 12.0, max);
    frame(title, x_label, y_label, &body)
}

/// Point cloud with linear axes starting at zero.
pub(crate) fn scatter(title: &str, x_label: &str, y_label: &str, points: &[(f64, f64)]) -> String {
    let max_x = points.iter().map(|p| p.0).fold(0.0, f64::max).max(1.0);
    let max_y = points.iter().map(|p| p.1).fold(0.0, f64::max).max(1.0);
    let plot_w = WIDTH - 1.5 * MARGIN;
    let plot_h = HEIGHT - 1.5 * MARGIN - 8.0;
    let mut body = String::new();
    for &(x, y) in points {
        let _ = writeln!(
            body,
            r##"<circle cx="{:.2}" cy="{:.2}" r="1.5" fill="#aa3377" fill-opacity="0.5"/>"##,
            MARGIN + x / max_x * plot_w,
            HEIGHT - MARGIN - y / max_y * plot_h
        );
    }
    let _ = writeln!(body, r#"<text x="{}" y="{}" text-anchor="end">{max_x}</text>"#, WIDTH - MARGIN / 2.0, HEIGHT - MARGIN + 14.0);
    let _ = writeln!(body, r#"<text x="{}" y="{}" text-anchor="end">{max_y}</text>"#, MARGIN - 4.0, MARGIN / 2.0 + 12.0);
    frame(title, x_label, y_label, &body)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charts_are_well_formed() {
        let s = bar_chart("len <1>", "x", "y", &[("1".into(), 2.0), ("2".into(), 4.0)]);
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert!(s.contains("len &lt;1&gt;"));
        assert_eq!(s.matches("<rect x=").count(), 2);
        let s = scatter("t", "w", "h", &[(1.0, 2.0)]);
        assert_eq!(s.matches("<circle").count(), 1);
        assert!(bar_chart("empty", "x", "y", &[]).contains("</svg>"));
    }
}
