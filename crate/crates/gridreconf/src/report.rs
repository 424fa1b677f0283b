//! Report emission: result JSON, CSV tables and small self-contained SVG
//! plots (Pareto curves, voltage profiles, hosting-capacity distributions).

use crate::audit::{HcRecord, ParetoCurves, ParetoPoint};
use crate::sbb::SolveResult;
use std::fmt::Write as _;
use std::io;
use std::path::Path;

pub fn write_result_json(result: &SolveResult, path: &Path) -> io::Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(result).unwrap())
}

/// `rho_or_cap,dg_mw,loss_mw,verified` rows for one curve.
pub fn pareto_csv(points: &[ParetoPoint]) -> String {
    let mut out = String::from("rho_or_cap,dg_mw,loss_mw,verified\n");
    for p in points {
        let _ = writeln!(out, "{},{},{},{}", p.rho_or_cap, p.dg_mw, p.loss_mw, p.verified);
    }
    out
}

/// `node,K,hc_mw,gap,status` rows.
pub fn hc_csv(records: &[HcRecord]) -> String {
    let mut out = String::from("node,K,hc_mw,gap,status\n");
    for r in records {
        let gap = r.gap.map_or(String::new(), |g| format!("{g:.6}"));
        let _ = writeln!(out, "{},{},{},{},{}", r.node, r.k, r.hc_mw, gap, r.status);
    }
    out
}

/// Minimal line-plot SVG builder.
struct Plot {
    width: f64,
    height: f64,
    margin: f64,
    x_range: (f64, f64),
    y_range: (f64, f64),
    body: String,
}

impl Plot {
    fn new(x_range: (f64, f64), y_range: (f64, f64), title: &str) -> Plot {
        let mut plot = Plot { width: 640.0, height: 420.0, margin: 50.0, x_range, y_range, body: String::new() };
        let _ = write!(
            plot.body,
            r#"<text x="{:.0}" y="20" font-size="14" text-anchor="middle">{}</text>"#,
            plot.width / 2.0,
            title
        );
        let (m, w, h) = (plot.margin, plot.width, plot.height);
        let _ = write!(
            plot.body,
            r#"<rect x="{m}" y="{m}" width="{:.0}" height="{:.0}" fill="none" stroke="black"/>"#,
            w - 2.0 * m,
            h - 2.0 * m
        );
        plot
    }

    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let (x0, x1) = self.x_range;
        let (y0, y1) = self.y_range;
        let fx = if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.5 };
        let fy = if y1 > y0 { (y - y0) / (y1 - y0) } else { 0.5 };
        (
            self.margin + fx * (self.width - 2.0 * self.margin),
            self.height - self.margin - fy * (self.height - 2.0 * self.margin),
        )
    }

    fn polyline(&mut self, points: &[(f64, f64)], color: &str, label: &str, slot: usize) {
        if points.is_empty() {
            return;
        }
        let coords: Vec<String> = points
            .iter()
            .map(|&(x, y)| {
                let (px, py) = self.map(x, y);
                format!("{px:.1},{py:.1}")
            })
            .collect();
        let _ = write!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            coords.join(" ")
        );
        for &(x, y) in points {
            let (px, py) = self.map(x, y);
            let _ = write!(self.body, r#"<circle cx="{px:.1}" cy="{py:.1}" r="2.5" fill="{color}"/>"#);
        }
        let ly = 30.0 + 16.0 * slot as f64;
        let _ = write!(
            self.body,
            r#"<line x1="{:.0}" y1="{ly:.0}" x2="{:.0}" y2="{ly:.0}" stroke="{color}" stroke-width="2"/><text x="{:.0}" y="{:.0}" font-size="12">{label}</text>"#,
            self.width - 180.0,
            self.width - 150.0,
            self.width - 144.0,
            ly + 4.0
        );
    }

    fn axis_labels(&mut self, x_label: &str, y_label: &str) {
        let _ = write!(
            self.body,
            r#"<text x="{:.0}" y="{:.0}" font-size="12" text-anchor="middle">{x_label}</text>"#,
            self.width / 2.0,
            self.height - 12.0
        );
        let _ = write!(
            self.body,
            r#"<text x="14" y="{:.0}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {:.0})">{y_label}</text>"#,
            self.height / 2.0,
            self.height / 2.0
        );
        // Range ticks.
        for (value, at_end) in [(self.x_range.0, false), (self.x_range.1, true)] {
            let (px, _) = self.map(value, self.y_range.0);
            let _ = write!(
                self.body,
                r#"<text x="{px:.0}" y="{:.0}" font-size="10" text-anchor="{}">{value:.3}</text>"#,
                self.height - self.margin + 14.0,
                if at_end { "end" } else { "start" }
            );
        }
        for value in [self.y_range.0, self.y_range.1] {
            let (_, py) = self.map(self.x_range.0, value);
            let _ = write!(
                self.body,
                r#"<text x="{:.0}" y="{py:.0}" font-size="10" text-anchor="end">{value:.3}</text>"#,
                self.margin - 4.0
            );
        }
    }

    fn finish(self) -> String {
        format!(
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {:.0} {:.0}">{}</svg>"#,
            self.width, self.height, self.width, self.height, self.body
        )
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    let pad = 0.05 * (hi - lo).max(1e-9);
    (lo - pad, hi + pad)
}

/// Pareto scatter: total loss against total DG for both model curves.
pub fn pareto_svg(curves: &ParetoCurves) -> String {
    let all = curves.exact.iter().chain(curves.conic.iter());
    let x_range = bounds(all.clone().map(|p| p.loss_mw));
    let y_range = bounds(all.map(|p| p.dg_mw));
    let mut plot = Plot::new(x_range, y_range, "DG / loss trade-off");
    let series = |points: &[ParetoPoint]| -> Vec<(f64, f64)> {
        points.iter().map(|p| (p.loss_mw, p.dg_mw)).collect()
    };
    plot.polyline(&series(&curves.exact), "#1f77b4", "exact", 0);
    plot.polyline(&series(&curves.conic), "#d62728", "conic", 1);
    plot.axis_labels("total loss [MW]", "total DG [MW]");
    plot.finish()
}

/// Voltage profile comparison, e.g. perceived (model) against actual
/// (posterior load flow). One series per labelled profile, voltages in pu.
pub fn voltage_profile_svg(profiles: &[(&str, Vec<f64>)]) -> String {
    let n = profiles.iter().map(|(_, v)| v.len()).max().unwrap_or(0);
    let y_range = bounds(profiles.iter().flat_map(|(_, v)| v.iter().copied()));
    let mut plot = Plot::new((0.0, (n.max(2) - 1) as f64), y_range, "Voltage profile");
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    for (slot, (label, series)) in profiles.iter().enumerate() {
        let points: Vec<(f64, f64)> =
            series.iter().enumerate().map(|(i, &v)| (i as f64, v)).collect();
        plot.polyline(&points, colors[slot % colors.len()], label, slot);
    }
    plot.axis_labels("bus", "voltage [pu]");
    plot.finish()
}

/// Cumulative hosting-capacity increase: share of nodes (x) with an increase
/// of at least y percent, one series per switch budget.
pub fn hc_distribution_svg(series: &[(String, Vec<(f64, f64)>)]) -> String {
    let finite = series
        .iter()
        .flat_map(|(_, pts)| pts.iter().map(|p| p.0))
        .filter(|v| v.is_finite());
    let y_range = bounds(finite);
    let mut plot = Plot::new((0.0, 100.0), y_range, "HC increase from reconfiguration");
    let colors = ["#d62728", "#e6b800", "#1f77b4"];
    for (slot, (label, points)) in series.iter().enumerate() {
        let mapped: Vec<(f64, f64)> = points
            .iter()
            .filter(|p| p.0.is_finite())
            .map(|&(y, share)| (share, y))
            .collect();
        plot.polyline(&mapped, colors[slot % colors.len()], label, slot);
    }
    plot.axis_labels("share of nodes [%]", "HC increase [%]");
    plot.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_headers_are_stable() {
        assert!(pareto_csv(&[]).starts_with("rho_or_cap,dg_mw,loss_mw,verified\n"));
        assert!(hc_csv(&[]).starts_with("node,K,hc_mw,gap,status\n"));
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let svg = voltage_profile_svg(&[
            ("perceived", vec![1.0, 0.99, 0.98]),
            ("actual", vec![1.0, 1.01, 1.04]),
        ]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>"));
        assert!(svg.contains("polyline"));
        assert!(svg.matches("<circle").count() == 6);
    }
}
