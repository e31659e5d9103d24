//! Plain-text tables for the JSON reports.

use std::fmt::Write;

use super::harness::EvalReport;
use super::mapping::MappingReport;
use super::similarity::{SimilarityReport, Verdict};

fn pad(s: &str, w: usize) -> String {
    format!("{s:<w$}")
}

pub fn metrics_table(reports: &[&EvalReport]) -> String {
    let rows: Vec<(String, String, String, String)> = reports
        .iter()
        .flat_map(|r| r.heads.iter())
        .map(|h| (h.name.clone(), h.precision.to_string(), h.recall.to_string(), h.f1.to_string()))
        .collect();
    let w = rows.iter().map(|r| r.0.chars().count()).max().unwrap_or(5).max(5);
    let mut out = format!("{}  Precision  Recall     F1\n", pad("Model", w));
    for (n, p, r, f) in rows {
        let _ = writeln!(out, "{}  {}  {}  {}", pad(&n, w), pad(&p, 9), pad(&r, 9), f);
    }
    out
}

pub fn similarity_table(report: &SimilarityReport) -> String {
    let mut out = String::from("Pair                  CL         Score      Verdict\n");
    for r in &report.rows {
        let pair = format!("{}-{}", r.a, r.b);
        let cl = format!("{}-{}", r.labels.0, r.labels.1);
        let verdict = match r.verdict {
            Verdict::Similar => "Similar",
            Verdict::Dissimilar => "Dissimilar",
        };
        let _ = writeln!(out, "{}  {}  {}  {verdict}", pad(&pair, 20), pad(&cl, 9), pad(&r.score.to_string(), 9));
    }
    out
}

pub fn mapping_table(report: &MappingReport) -> String {
    let mut out = format!("{:<11}  {:<9}", "Parameter", "Overall");
    for l in 1..=10 {
        let _ = write!(out, "  {:<9}", format!("L{l}"));
    }
    out.push('\n');
    for r in &report.rows {
        let _ = write!(out, "{:<11}  {:<9}", r.parameter.to_string(), r.accuracy.to_string());
        for m in &r.per_level {
            let _ = write!(out, "  {:<9}", m.to_string());
        }
        out.truncate(out.trim_end().len());
        out.push('\n');
    }
    out
}
