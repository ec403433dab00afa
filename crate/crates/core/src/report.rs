//! Rendering a [`SpectralComparison`] as JSON, a text table, or a CSV
//! eigenvalue table.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::equivalence::SpectralComparison;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Text,
    Csv,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [ReportFormat::Json, ReportFormat::Text, ReportFormat::Csv];

    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Text => "txt",
            ReportFormat::Csv => "csv",
        }
    }
}

impl std::fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ReportFormat::Json => "json",
            ReportFormat::Text => "text",
            ReportFormat::Csv => "csv",
        })
    }
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "text" => Ok(ReportFormat::Text),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::input(format!("unknown report format {other:?} (json, text, csv)"))),
        }
    }
}

pub fn render(c: &SpectralComparison, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => to_json(c),
        ReportFormat::Text => Ok(to_text(c)),
        ReportFormat::Csv => to_csv(c),
    }
}

/// Pretty JSON with a trailing newline. Identical input gives identical bytes.
pub fn to_json(c: &SpectralComparison) -> Result<String> {
    let mut s = serde_json::to_string_pretty(c)?;
    s.push('\n');
    Ok(s)
}

/// One row per matched pair: `lambda_orig_re,lambda_orig_im,lambda_emb_re,lambda_emb_im,distance`.
pub fn to_csv(c: &SpectralComparison) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["lambda_orig_re", "lambda_orig_im", "lambda_emb_re", "lambda_emb_im", "distance"])?;
    for p in &c.matched_pairs {
        w.write_record(
            [p.lambda_original[0], p.lambda_original[1], p.lambda_embedded[0], p.lambda_embedded[1], p.distance]
                .map(|v| v.to_string()),
        )?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn z(p: [f64; 2]) -> String {
    format!("{:+.12}{:+.12}i", p[0], p[1])
}

pub fn to_text(c: &SpectralComparison) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Koopman spectral comparison: original vs delay-embedded");
    let _ = writeln!(s, "verdict: {}", c.verdict);
    let _ = writeln!(s);
    let _ = writeln!(s, "{:>5} {:>5}  {:<34} {:<34} {:>10}", "orig", "emb", "lambda_orig", "lambda_emb", "distance");
    for p in &c.matched_pairs {
        let _ = writeln!(
            s,
            "{:>5} {:>5}  {:<34} {:<34} {:>10.3e}",
            p.index_original,
            p.index_embedded,
            z(p.lambda_original),
            z(p.lambda_embedded),
            p.distance
        );
    }
    if c.matched_pairs.is_empty() {
        let _ = writeln!(s, "  (no matched pairs)");
    }
    let list = |v: &[usize]| {
        if v.is_empty() {
            "none".to_string()
        } else {
            v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(", ")
        }
    };
    let _ = writeln!(s, "unmatched original:  {}", list(&c.unmatched_original));
    let _ = writeln!(s, "unmatched embedded:  {}", list(&c.unmatched_embedded));
    let _ = writeln!(s);
    let _ = writeln!(s, "hausdorff distance:              {:.3e}", c.hausdorff);
    let _ = writeln!(s, "commutation residual (exact):    {:.3e}", c.commutation_residual_ops);
    let _ = writeln!(s, "commutation defect (finite rank): {:.3e}", c.finite_rank_commutation_defect);
    let worst = c.eigenfunction_pullback_errors.iter().cloned().fold(0.0, f64::max);
    let _ = writeln!(
        s,
        "eigenfunction pullback error:    {:.3e} (max over {} pairs)",
        worst,
        c.eigenfunction_pullback_errors.len()
    );
    let _ = writeln!(s, "unitarity residual original:     {:.3e}", c.unitarity_original);
    let _ = writeln!(s, "unitarity residual embedded:     {:.3e}", c.unitarity_embedded);
    let _ = writeln!(s, "fit residual original:           {:.3e} (rank {})", c.fit_residual_original, c.svd_rank_original);
    let _ = writeln!(s, "fit residual embedded:           {:.3e} (rank {})", c.fit_residual_embedded, c.svd_rank_embedded);
    let _ = writeln!(s);
    let t = &c.tolerances;
    let _ = writeln!(s, "tolerances: match_tol = {:e}, svd_rtol = {:e} / {:e}", t.match_tol, t.svd_rtol_original, t.svd_rtol_embedded);
    let _ = writeln!(s, "criterion: {}", t.criterion);
    if let Some(b) = &c.bounding_box_embedded {
        let _ = writeln!(s, "embedded bounding box: lo = {:?}, hi = {:?}", b.lo, b.hi);
    }
    for note in &c.notes {
        let _ = writeln!(s, "note: {note}");
    }
    s
}

/// Writes the rendered report to `path`.
pub fn emit_report(c: &SpectralComparison, format: ReportFormat, path: &Path) -> Result<()> {
    std::fs::write(path, render(c, format)?)?;
    Ok(())
}
