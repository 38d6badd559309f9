//! SVG renderings of results.

use std::fmt::Write;

use crate::pipeline::SegmentationResult;

const PALETTE: [&str; 10] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7",
    "#9c755f", "#bab0ac",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Timeline with activities/transitions on the first lane and primitives coloured
/// by cluster on the second.
pub fn timeline_svg(result: &SegmentationResult) -> String {
    let width = 1000.0;
    let m = result.meta.frames.max(1) as f64;
    let x = |frame: usize| (frame - 1) as f64 / m * width;
    let w = |start: usize, end: usize| ((end - start + 1) as f64 / m * width).max(0.5);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="110" font-family="sans-serif" font-size="11">"#,
        width + 20.0
    );
    let _ = writeln!(s, r#"<g transform="translate(10,10)">"#);
    let _ = writeln!(s, r#"<text x="0" y="10">activities</text>"#);
    for a in &result.activities {
        let _ = writeln!(
            s,
            r##"<rect x="{:.2}" y="15" width="{:.2}" height="20" fill="#555"><title>activity {}-{}</title></rect>"##,
            x(a.start),
            w(a.start, a.end),
            a.start,
            a.end
        );
    }
    for t in &result.transitions {
        let _ = writeln!(
            s,
            r##"<rect x="{:.2}" y="15" width="{:.2}" height="20" fill="#ddd"><title>transition {}-{}</title></rect>"##,
            x(t.start),
            w(t.start, t.end),
            t.start,
            t.end
        );
    }
    let _ = writeln!(s, r#"<text x="0" y="52">primitives</text>"#);
    for p in &result.primitives {
        let _ = writeln!(
            s,
            r##"<rect x="{:.2}" y="57" width="{:.2}" height="20" fill="{}" stroke="#fff" stroke-width="0.5"><title>primitive {} ({}-{}), cluster {}</title></rect>"##,
            x(p.start),
            w(p.start, p.end),
            PALETTE[p.cluster % PALETTE.len()],
            p.id,
            p.start,
            p.end,
            p.cluster
        );
    }
    let _ = writeln!(s, r#"<text x="0" y="95">frames 1-{}</text>"#, result.meta.frames);
    s.push_str("</g>\n</svg>\n");
    s
}

/// Bar chart of bin counts over `[0, 1]`.
pub fn histogram_svg(counts: &[usize], title: &str) -> String {
    let (width, height) = (400.0, 200.0);
    let max = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let bw = width / counts.len().max(1) as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif" font-size="11">"#,
        width + 40.0,
        height + 50.0
    );
    let _ = writeln!(s, r#"<text x="20" y="15">{}</text>"#, escape(title));
    let _ = writeln!(s, r#"<g transform="translate(20,25)">"#);
    for (k, &c) in counts.iter().enumerate() {
        let h = c as f64 / max * height;
        let _ = writeln!(
            s,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#4e79a7"><title>{}</title></rect>"##,
            k as f64 * bw + 1.0,
            height - h,
            bw - 2.0,
            h,
            c
        );
    }
    let _ = writeln!(s, r##"<line x1="0" y1="{height}" x2="{width}" y2="{height}" stroke="#000"/>"##);
    let _ = writeln!(s, r#"<text x="0" y="{}">0</text>"#, height + 15.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}">1</text>"#, width - 6.0, height + 15.0);
    s.push_str("</g>\n</svg>\n");
    s
}

/// Heat map of `values[row][col]` in `[0, 1]`, darker is higher.
pub fn heatmap_svg(values: &[Vec<f64>], row_labels: &[String], col_labels: &[String], title: &str) -> String {
    let cell = 40.0;
    let rows = values.len();
    let cols = values.first().map_or(0, Vec::len);
    let (ox, oy) = (110.0, 40.0);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif" font-size="10">"#,
        ox + cols as f64 * cell + 10.0,
        oy + rows as f64 * cell + 10.0
    );
    let _ = writeln!(s, r#"<text x="5" y="15">{}</text>"#, escape(title));
    for (c, label) in col_labels.iter().enumerate() {
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}">{}</text>"#, ox + c as f64 * cell + 2.0, oy - 5.0, escape(label));
    }
    for (r, row) in values.iter().enumerate() {
        let y = oy + r as f64 * cell;
        if let Some(label) = row_labels.get(r) {
            let _ = writeln!(s, r#"<text x="5" y="{:.1}">{}</text>"#, y + cell / 2.0 + 3.0, escape(label));
        }
        for (c, &v) in row.iter().enumerate() {
            let g = (255.0 * (1.0 - v.clamp(0.0, 1.0))).round() as u8;
            let _ = writeln!(
                s,
                r##"<rect x="{:.1}" y="{:.1}" width="{cell}" height="{cell}" fill="rgb({g},{g},255)" stroke="#fff"><title>{v:.3}</title></rect>"##,
                ox + c as f64 * cell,
                y
            );
        }
    }
    s.push_str("</svg>\n");
    s
}
