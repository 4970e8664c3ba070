use std::cmp::Ordering;
use std::fmt::Write as _;

use crate::experiments::{CurveDataset, CurveId, CurvePanel, Law};

use super::OutputFile;

/// Fixed-width scientific notation with 17 significant digits, enough to
/// round-trip any f64.
pub fn format_number(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV rows kept with a numeric sort key; rows are written in key order.
pub(crate) struct CsvTable {
    header: Vec<&'static str>,
    rows: Vec<(Vec<f64>, Vec<String>)>,
}

impl CsvTable {
    pub(crate) fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, key: Vec<f64>, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push((key, row));
    }

    pub(crate) fn into_file(mut self, name: &str) -> OutputFile {
        self.rows.sort_by(|a, b| compare_keys(&a.0, &b.0));
        let mut contents = self.header.join(",");
        contents.push('\n');
        for (_, row) in &self.rows {
            contents.push_str(&row.join(","));
            contents.push('\n');
        }
        OutputFile {
            name: name.to_string(),
            contents,
        }
    }
}

fn compare_keys(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 300.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 44.0;

/// One panel per (law, n): laws as columns, n values as rows. Sampled curves
/// are light gray, the posterior mean blue and the truth black.
pub fn write_svg(data: &CurveDataset) -> String {
    let mut laws: Vec<Law> = data.panels.iter().map(|p| p.law).collect();
    laws.dedup();
    let mut ns: Vec<f64> = Vec::new();
    for p in &data.panels {
        if !ns.contains(&p.n) {
            ns.push(p.n);
        }
    }
    let cols = laws.len().max(1);
    let rows = ns.len().max(1);
    let width = cols as f64 * PANEL_W;
    let height = rows as f64 * PANEL_H;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{width}" height="{height}" fill="white"/>"#
    );
    for panel in &data.panels {
        let col = laws.iter().position(|&l| l == panel.law).unwrap_or(0);
        let row = ns.iter().position(|&n| n == panel.n).unwrap_or(0);
        draw_panel(
            &mut s,
            &data.xs,
            panel,
            col as f64 * PANEL_W,
            row as f64 * PANEL_H,
        );
    }
    s.push_str("</svg>\n");
    s
}

fn draw_panel(s: &mut String, xs: &[f64], panel: &CurvePanel, ox: f64, oy: f64) {
    let (lo, hi) = value_range(panel);
    let plot_w = PANEL_W - MARGIN_L - MARGIN_R;
    let plot_h = PANEL_H - MARGIN_T - MARGIN_B;
    let left = ox + MARGIN_L;
    let top = oy + MARGIN_T;
    let px = |x: f64| left + x * plot_w;
    let py = |v: f64| top + (hi - v) / (hi - lo) * plot_h;

    let _ = writeln!(
        s,
        r#"<g class="panel" data-law="{}" data-n="{}">"#,
        panel.law.as_str(),
        panel.n
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="13">{}, n = {}</text>"#,
        left + plot_w / 2.0,
        oy + 22.0,
        panel.law.as_str(),
        panel.n
    );
    let _ = writeln!(
        s,
        r##"<rect x="{left:.1}" y="{top:.1}" width="{plot_w:.1}" height="{plot_h:.1}" fill="none" stroke="#444"/>"##
    );
    for k in 0..=4 {
        let x = k as f64 / 4.0;
        let _ = writeln!(
            s,
            r##"<text x="{:.1}" y="{:.1}" text-anchor="middle">{x}</text>"##,
            px(x),
            top + plot_h + 14.0
        );
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r##"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.2}</text>"##,
            left - 4.0,
            py(v) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">x</text>"#,
        left + plot_w / 2.0,
        top + plot_h + 32.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" transform="rotate(-90 {:.1} {:.1})">f(x)</text>"#,
        ox + 16.0,
        top + plot_h / 2.0,
        ox + 16.0,
        top + plot_h / 2.0
    );

    // samples underneath, references on top
    let mut ordered: Vec<_> = panel.samples().collect();
    ordered.extend(panel.reference(CurveId::Mean));
    ordered.extend(panel.reference(CurveId::Truth));
    for curve in ordered {
        let (stroke, w) = match curve.id {
            CurveId::Sample(_) => ("#c8c8c8", 0.8),
            CurveId::Mean => ("#1f4fd8", 1.8),
            CurveId::Truth => ("#000000", 1.8),
        };
        let mut points = String::new();
        for (x, v) in xs.iter().zip(&curve.values) {
            let _ = write!(points, "{:.2},{:.2} ", px(*x), py(*v));
        }
        let _ = writeln!(
            s,
            r#"<polyline data-curve="{}" fill="none" stroke="{stroke}" stroke-width="{w}" points="{}"/>"#,
            curve.id.label(),
            points.trim_end()
        );
    }
    s.push_str("</g>\n");
}

fn value_range(panel: &CurvePanel) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in panel.curves.iter().flat_map(|c| &c.values) {
        if v.is_finite() {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
    }
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(1e-6);
    (lo - pad, hi + pad)
}
