//! CSV round-trip, log-log slope fitting and a minimal SVG renderer.

use std::fmt::Write as _;

use super::RateRow;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "n,replicates,base_seed,seed_scheme,mean_excess_distortion,std_error,\
mean_classif_risk,std_error_classif,clusterable_fraction,lloyd_eligible,lloyd_violations,flag";

/// Replicate seed rule, written into every row.
const SEED_SCHEME: &str = "derive_seed(base_seed;n;r)";

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Header plus one line per row; absent values are empty fields.
pub fn format_rate_csv(rows: &[RateRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.n,
            r.replicates,
            r.base_seed,
            SEED_SCHEME,
            opt(r.mean_excess_distortion),
            opt(r.std_error),
            opt(r.mean_classif_risk),
            opt(r.std_error_classif),
            opt(r.clusterable_fraction),
            opt(r.lloyd_eligible),
            opt(r.lloyd_violations),
            r.flag
        );
    }
    out
}

fn field<T: std::str::FromStr>(line: usize, name: &str, s: &str) -> Result<Option<T>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| Error::parse(line, format!("bad {name} '{s}'")))
}

/// Inverse of [`format_rate_csv`].
pub fn parse_rate_csv(text: &str) -> Result<Vec<RateRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => return Err(Error::parse(1, "missing or unexpected CSV header")),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let ln = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 12 {
            return Err(Error::parse(ln, format!("expected 12 fields, got {}", f.len())));
        }
        let required = |name: &str, s: &str| -> Result<u64> {
            field(ln, name, s)?.ok_or_else(|| Error::parse(ln, format!("missing {name}")))
        };
        rows.push(RateRow {
            n: required("n", f[0])? as usize,
            replicates: required("replicates", f[1])? as usize,
            base_seed: required("base_seed", f[2])?,
            mean_excess_distortion: field(ln, "mean_excess_distortion", f[4])?,
            std_error: field(ln, "std_error", f[5])?,
            mean_classif_risk: field(ln, "mean_classif_risk", f[6])?,
            std_error_classif: field(ln, "std_error_classif", f[7])?,
            clusterable_fraction: field(ln, "clusterable_fraction", f[8])?,
            lloyd_eligible: field(ln, "lloyd_eligible", f[9])?,
            lloyd_violations: field(ln, "lloyd_violations", f[10])?,
            flag: f[11].to_string(),
        });
    }
    Ok(rows)
}

/// A numeric CSV column with its standard-error companion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    MeanExcessDistortion,
    MeanClassifRisk,
    ClusterableFraction,
}

impl Column {
    pub fn name(self) -> &'static str {
        match self {
            Column::MeanExcessDistortion => "mean_excess_distortion",
            Column::MeanClassifRisk => "mean_classif_risk",
            Column::ClusterableFraction => "clusterable_fraction",
        }
    }

    /// `(value, std_error)` of a row.
    pub fn get(self, row: &RateRow) -> Option<(f64, f64)> {
        match self {
            Column::MeanExcessDistortion => row.mean_excess_distortion.map(|v| (v, row.std_error.unwrap_or(0.0))),
            Column::MeanClassifRisk => row.mean_classif_risk.map(|v| (v, row.std_error_classif.unwrap_or(0.0))),
            Column::ClusterableFraction => row.clusterable_fraction.map(|v| (v, 0.0)),
        }
    }
}

impl std::str::FromStr for Column {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Column::MeanExcessDistortion, Column::MeanClassifRisk, Column::ClusterableFraction]
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown column '{s}'")))
    }
}

/// Least-squares slope of `log value` against `log n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard deviation of the slope propagated from the row standard
    /// errors (delta method on `log value`).
    pub std_error: f64,
    /// `slope ∓ 1.96 std_error`.
    pub band: (f64, f64),
    pub rows_used: usize,
    /// Sample sizes of rows dropped for a nonpositive or missing value.
    pub excluded: Vec<usize>,
}

/// Ordinary least squares on `(ln n, ln value)`; needs at least 3 positive rows.
pub fn fit_loglog_slope(rows: &[RateRow], column: Column) -> Result<SlopeFit> {
    let mut pts = Vec::new();
    let mut excluded = Vec::new();
    for r in rows {
        match column.get(r) {
            Some((v, se)) if v > 0.0 && v.is_finite() => pts.push(((r.n as f64).ln(), v.ln(), se / v)),
            _ => excluded.push(r.n),
        }
    }
    if pts.len() < 3 {
        return Err(Error::invalid(format!(
            "slope fit needs at least 3 rows with positive {}, got {}",
            column.name(),
            pts.len()
        )));
    }
    let m = pts.len() as f64;
    let xbar = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let ybar = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - xbar).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("slope fit needs at least two distinct n"));
    }
    let slope = pts.iter().map(|p| (p.0 - xbar) * (p.1 - ybar)).sum::<f64>() / sxx;
    let var: f64 = pts.iter().map(|p| ((p.0 - xbar) / sxx).powi(2) * p.2 * p.2).sum();
    let std_error = var.sqrt();
    Ok(SlopeFit {
        slope,
        intercept: ybar - slope * xbar,
        std_error,
        band: (slope - 1.96 * std_error, slope + 1.96 * std_error),
        rows_used: pts.len(),
        excluded,
    })
}

/// Static log-log plot of one column with ±1 s.e. bars and the fitted line.
pub fn render_loglog_svg(rows: &[RateRow], column: Column, title: &str) -> String {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const PAD: f64 = 60.0;
    let pts: Vec<(f64, f64, f64)> = rows
        .iter()
        .filter_map(|r| column.get(r).filter(|(v, _)| *v > 0.0).map(|(v, se)| (r.n as f64, v, se)))
        .collect();
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    if pts.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }
    let lx: Vec<f64> = pts.iter().map(|p| p.0.log10()).collect();
    let ly: Vec<f64> = pts
        .iter()
        .flat_map(|p| [p.1.log10(), (p.1 + p.2).log10(), (p.1 - p.2).max(p.1 * 0.5).log10()])
        .collect();
    let (x0, x1) = bounds(&lx);
    let (y0, y1) = bounds(&ly);
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let _ = writeln!(
        svg,
        r#"<path d="M{PAD} {PAD} V{b} H{r}" fill="none" stroke="black"/>"#,
        b = H - PAD,
        r = W - PAD
    );
    for p in &pts {
        let x = sx(p.0.log10());
        let _ = writeln!(
            svg,
            r#"<text x="{x:.1}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            H - PAD + 16.0,
            p.0
        );
    }
    for e in (y0.ceil() as i32)..=(y1.floor() as i32) {
        let y = sy(e as f64);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="end">1e{e}</text>"#,
            PAD - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">n</text>"#,
        W / 2.0,
        H - 18.0
    );
    let line: Vec<String> = pts
        .iter()
        .map(|p| format!("{:.1},{:.1}", sx(p.0.log10()), sy(p.1.log10())))
        .collect();
    let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#, line.join(" "));
    for p in &pts {
        let x = sx(p.0.log10());
        let lo = sy((p.1 - p.2).max(p.1 * 0.5).log10());
        let hi = sy((p.1 + p.2).log10());
        let _ = writeln!(svg, r#"<line x1="{x:.1}" y1="{lo:.1}" x2="{x:.1}" y2="{hi:.1}" stroke="steelblue"/>"#);
        let _ = writeln!(svg, r#"<circle cx="{x:.1}" cy="{:.1}" r="3" fill="steelblue"/>"#, sy(p.1.log10()));
    }
    if let Ok(fit) = fit_loglog_slope(rows, column) {
        let f = |x: f64| (fit.intercept + fit.slope * x * std::f64::consts::LN_10) / std::f64::consts::LN_10;
        let (a, b) = (lx[0], lx[lx.len() - 1]);
        let _ = writeln!(
            svg,
            r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="firebrick" stroke-dasharray="5,4"/>"#,
            sx(a),
            sy(f(a)),
            sx(b),
            sy(f(b))
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="end" fill="firebrick">slope {:.3}</text>"#,
            W - PAD,
            PAD - 8.0,
            fit.slope
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn bounds(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < 1e-9 {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
