//! Group-dependency heatmaps as CSV and SVG.

use std::fmt::Write as _;

use dicca_core::linalg::Matrix;

const CELL: usize = 28;
const LEFT: usize = 90;
const TOP: usize = 40;
/// Color of a fully dependent cell; zero is white.
const DARK_BLUE: (f64, f64, f64) = (8.0, 48.0, 107.0);

/// Rows are views, columns latent dimensions; values already in `[0, 1]`.
pub fn to_csv(values: &Matrix, view_names: &[String], column_prefix: &str) -> String {
    let mut out = String::from("view");
    for j in 0..values.cols() {
        let _ = write!(out, ",{column_prefix}{}", j + 1);
    }
    out.push('\n');
    for (m, name) in view_names.iter().enumerate().take(values.rows()) {
        out.push_str(name);
        for v in values.row(m) {
            let _ = write!(out, ",{v:?}");
        }
        out.push('\n');
    }
    out
}

/// Linear ramp from white at 0 to dark blue at 1.
pub fn ramp(v: f64) -> (u8, u8, u8) {
    let t = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
    let mix = |c: f64| (255.0 + (c - 255.0) * t).round() as u8;
    (mix(DARK_BLUE.0), mix(DARK_BLUE.1), mix(DARK_BLUE.2))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn to_svg(values: &Matrix, view_names: &[String], column_prefix: &str, title: &str) -> String {
    let (rows, cols) = values.shape();
    let width = LEFT + cols * CELL + 10;
    let height = TOP + rows * CELL + 10;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{LEFT}" y="14">{}</text>"#, escape(title));
    for j in 0..cols {
        let x = LEFT + j * CELL + CELL / 2;
        let _ = writeln!(s, r#"<text x="{x}" y="{}" text-anchor="middle">{column_prefix}{}</text>"#, TOP - 6, j + 1);
    }
    for m in 0..rows {
        let y = TOP + m * CELL;
        let name = view_names.get(m).map_or_else(|| format!("view{}", m + 1), |n| escape(n));
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{name}</text>"#, LEFT - 6, y + CELL / 2 + 4);
        for j in 0..cols {
            let v = values[(m, j)];
            let (r, g, b) = ramp(v);
            let _ = writeln!(
                s,
                r##"<rect x="{}" y="{y}" width="{CELL}" height="{CELL}" fill="#{r:02x}{g:02x}{b:02x}" stroke="#cccccc"><title>{v:.4}</title></rect>"##,
                LEFT + j * CELL
            );
        }
    }
    s.push_str("</svg>\n");
    s
}
