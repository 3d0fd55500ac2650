//! Report files: CSV tables, JSON, equations text and small SVG charts.
//!
//! Every writer is deterministic for a given input; wall-clock timing is
//! kept out of these files.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::Result;
use crate::experiments::{CoefficientRow, ErrorSummary, ExperimentReport, Heatmap, IntegratorSweep};
use crate::io::{write_json, write_text};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl Format {
    pub const ALL: [Format; 3] = [Format::Csv, Format::Json, Format::Svg];
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn finite(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        String::new()
    }
}

/// `term,truth,learned,abs_error`; unknown truth leaves two cells empty.
pub fn coefficients_csv(rows: &[CoefficientRow]) -> String {
    let mut s = String::from("term,truth,learned,abs_error\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{}", r.term, opt(r.truth), r.learned, opt(r.abs_error));
    }
    s
}

/// One row per initial state; blow-ups have an empty error and `blowup=1`.
pub fn errors_csv(errors: &ErrorSummary) -> String {
    let mut s = String::from("init,error,blowup\n");
    for (i, e) in errors.per_init.iter().enumerate() {
        let _ = writeln!(s, "{i},{},{}", opt(*e), u8::from(e.is_none()));
    }
    s
}

pub fn sweep_csv(sweep: &IntegratorSweep) -> String {
    let mut s = String::from(
        "integrator,budget,sigma,mean_error,median_error,p90_error,blowups,friction_ratio_mean,active_terms\n",
    );
    for c in &sweep.cells {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            c.integrator,
            c.budget,
            c.sigma,
            opt(c.errors.mean_finite),
            opt(c.errors.median),
            opt(c.errors.p90),
            c.errors.blowups,
            opt(c.friction_ratio_mean),
            c.active_terms
        );
    }
    s
}

/// Score grid with λ_H down the rows and P across the columns. Infinite
/// scores (blow-ups) are left empty.
pub fn heatmap_csv(h: &Heatmap) -> String {
    let mut s = String::from("lambda_h");
    for p in &h.intervals {
        let _ = write!(s, ",P={p}");
    }
    s.push('\n');
    for (lambda, row) in h.lambdas.iter().zip(&h.scores) {
        let _ = write!(s, "{lambda}");
        for v in row {
            let _ = write!(s, ",{}", finite(*v));
        }
        s.push('\n');
    }
    s
}

pub fn heatmap_terms_csv(h: &Heatmap) -> String {
    let mut s = String::from("lambda_h");
    for p in &h.intervals {
        let _ = write!(s, ",P={p}");
    }
    s.push('\n');
    for (lambda, row) in h.lambdas.iter().zip(&h.active_terms) {
        let _ = write!(s, "{lambda}");
        for v in row {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 40.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn svg_open(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{PAD}\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">{}</text>\n",
        escape(title)
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn span(lo: f64, hi: f64) -> (f64, f64) {
    if hi - lo > 1e-12 {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

/// Line chart with one polyline per state component of each trajectory.
/// Truth is drawn solid, every further trajectory dashed.
pub fn trajectory_svg(title: &str, trajectories: &[&Trajectory]) -> String {
    let mut s = svg_open(title);
    let pts = trajectories.iter().flat_map(|tr| tr.times.iter().zip(&tr.states));
    let (mut t0, mut t1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (&t, x) in pts {
        t0 = t0.min(t);
        t1 = t1.max(t);
        for &v in x.iter().filter(|v| v.is_finite()) {
            y0 = y0.min(v);
            y1 = y1.max(v);
        }
    }
    if !t0.is_finite() || !y0.is_finite() {
        s.push_str("</svg>\n");
        return s;
    }
    let (t0, t1) = span(t0, t1);
    let (y0, y1) = span(y0, y1);
    let sx = |t: f64| PAD + (t - t0) / (t1 - t0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let _ = writeln!(
        s,
        "<line x1=\"{PAD}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>",
        b = H - PAD,
        r = W - PAD
    );
    for (k, tr) in trajectories.iter().enumerate() {
        let dim = tr.states.first().map_or(0, Vec::len);
        let dash = if k == 0 { "" } else { " stroke-dasharray=\"6 4\"" };
        for c in 0..dim {
            let points: Vec<String> = tr
                .times
                .iter()
                .zip(&tr.states)
                .filter(|(_, x)| x[c].is_finite())
                .map(|(&t, x)| format!("{:.2},{:.2}", sx(t), sy(x[c])))
                .collect();
            let _ = writeln!(
                s,
                "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"{dash} points=\"{}\"/>",
                COLORS[c % COLORS.len()],
                points.join(" ")
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Bar chart; non-finite values are drawn as empty slots.
pub fn bar_svg(title: &str, labels: &[String], values: &[f64]) -> String {
    let mut s = svg_open(title);
    let top = values.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max);
    let top = if top > 0.0 { top } else { 1.0 };
    let n = values.len().max(1) as f64;
    let slot = (W - 2.0 * PAD) / n;
    for (i, (label, &v)) in labels.iter().zip(values).enumerate() {
        let x = PAD + i as f64 * slot;
        if v.is_finite() {
            let h = v.max(0.0) / top * (H - 2.0 * PAD - 20.0);
            let _ = writeln!(
                s,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{h:.2}\" fill=\"{}\"/>",
                x + 0.1 * slot,
                H - PAD - h,
                0.8 * slot,
                COLORS[0]
            );
        }
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">{}</text>",
            x + 0.5 * slot,
            H - PAD + 14.0,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes the report files for one experiment into `dir`:
/// `coefficients.csv`, `errors.csv`, `equations.txt` (csv), `report.json`
/// (json) and `errors.svg` (svg).
pub fn emit_report(report: &ExperimentReport, dir: &Path, formats: &[Format]) -> Result<()> {
    for f in formats {
        match f {
            Format::Csv => {
                write_text(&dir.join("coefficients.csv"), &coefficients_csv(&report.coefficients))?;
                write_text(&dir.join("errors.csv"), &errors_csv(&report.errors))?;
                if let Some(e) = &report.extrapolation {
                    write_text(&dir.join("extrapolation_errors.csv"), &errors_csv(e))?;
                }
                write_text(&dir.join("equations.txt"), &report.equations)?;
            }
            Format::Json => write_json(&dir.join("report.json"), report)?,
            Format::Svg => {
                let labels: Vec<String> = (0..report.errors.per_init.len()).map(|i| i.to_string()).collect();
                let values: Vec<f64> =
                    report.errors.per_init.iter().map(|e| e.unwrap_or(f64::INFINITY)).collect();
                let title = format!("{} trajectory L2 error per initial state", report.name);
                write_text(&dir.join("errors.svg"), &bar_svg(&title, &labels, &values))?;
            }
        }
    }
    Ok(())
}

pub fn emit_sweep(sweep: &IntegratorSweep, dir: &Path) -> Result<()> {
    write_text(&dir.join("sweep.csv"), &sweep_csv(sweep))?;
    write_json(&dir.join("sweep.json"), sweep)?;
    let labels: Vec<String> = sweep.cells.iter().map(|c| format!("{} {} {}", c.integrator, c.budget, c.sigma)).collect();
    let values: Vec<f64> = sweep.cells.iter().map(|c| c.errors.score()).collect();
    write_text(&dir.join("sweep.svg"), &bar_svg("mean trajectory L2 error", &labels, &values))
}

pub fn emit_heatmap(h: &Heatmap, dir: &Path) -> Result<()> {
    write_text(&dir.join("heatmap.csv"), &heatmap_csv(h))?;
    write_text(&dir.join("heatmap_terms.csv"), &heatmap_terms_csv(h))?;
    write_json(&dir.join("heatmap.json"), h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Benchmark;

    #[test]
    fn empty_tables_are_header_only() {
        let sweep = IntegratorSweep {
            system: Benchmark::Tanks,
            cells: Vec::new(),
        };
        assert_eq!(sweep_csv(&sweep).lines().count(), 1);
        assert_eq!(coefficients_csv(&[]), "term,truth,learned,abs_error\n");
        let h = Heatmap {
            system: Benchmark::Tanks,
            lambdas: vec![],
            intervals: vec![],
            scores: vec![],
            active_terms: vec![],
        };
        assert_eq!(heatmap_csv(&h), "lambda_h\n");
    }

    #[test]
    fn coefficient_rows_render() {
        let rows = vec![
            CoefficientRow {
                term: "c".into(),
                truth: Some(0.3),
                learned: 0.25,
                abs_error: Some(0.05),
            },
            CoefficientRow {
                term: "q^3".into(),
                truth: None,
                learned: 0.1,
                abs_error: None,
            },
        ];
        assert_eq!(coefficients_csv(&rows), "term,truth,learned,abs_error\nc,0.3,0.25,0.05\nq^3,,0.1,\n");
    }

    #[test]
    fn heatmap_blowup_cells_are_empty() {
        let h = Heatmap {
            system: Benchmark::Tanks,
            lambdas: vec![0.0, 0.5],
            intervals: vec![10, 80],
            scores: vec![vec![1.5, f64::INFINITY], vec![0.25, 2.0]],
            active_terms: vec![vec![9, 3], vec![14, 14]],
        };
        assert_eq!(heatmap_csv(&h), "lambda_h,P=10,P=80\n0,1.5,\n0.5,0.25,2\n");
    }

    #[test]
    fn svg_has_one_polyline_per_component() {
        let tr = Trajectory {
            times: vec![0.0, 0.5, 1.0],
            states: vec![vec![0.0, 1.0], vec![0.5, 0.5], vec![1.0, 0.0]],
            dt: 0.5,
        };
        let svg = trajectory_svg("t", &[&tr, &tr]);
        assert_eq!(svg.matches("<polyline").count(), 4);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }
}
