//! Deterministic JSON, CSV and text renderings of outcomes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use spinlab::bounds::{format_sig12, BoundReport, SCHEMA_VERSION};

use crate::pipeline::{Invariant, Outcome};

#[derive(Serialize)]
struct Bundle<'a> {
    schema_version: u32,
    #[serde(flatten)]
    outcome: &'a Outcome,
}

pub fn to_json(outcome: &Outcome) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&Bundle { schema_version: SCHEMA_VERSION, outcome })?;
    s.push('\n');
    Ok(s)
}

/// Report table; rows whose bound fails carry `FAIL` in the status column.
pub fn table(reports: &[BoundReport], margin_tol: f64) -> String {
    let mut out = format!(
        "{:<34} {:<24} {:>22} {:>22} {:>22} {:>22}  {:<6} {}\n",
        "bound", "model", "lambda", "lambda^2", "rhs", "margin", "status", "hypothesis"
    );
    for r in reports {
        let status = if Outcome::report_fails(r, margin_tol) { "FAIL" } else { "ok" };
        let hyp = match &r.violated_clause {
            None => "holds".to_string(),
            Some(c) => format!("violated: {c}"),
        };
        let _ = writeln!(
            out,
            "{:<34} {:<24} {:>22} {:>22} {:>22} {:>22}  {:<6} {}",
            r.bound_kind.name(),
            r.model,
            format_sig12(r.lambda),
            format_sig12(r.lambda_sq),
            format_sig12(r.rhs),
            format_sig12(r.margin),
            status,
            hyp
        );
    }
    out
}

pub fn invariant_lines(invariants: &[Invariant]) -> String {
    let mut out = String::new();
    for i in invariants {
        let _ = writeln!(
            out,
            "{} {}: {} (tolerance {})",
            if i.passed { "PASS" } else { "FAIL" },
            i.name,
            format_sig12(i.value),
            format_sig12(i.tolerance)
        );
    }
    out
}

pub fn summary(outcome: &Outcome, margin_tol: f64) -> String {
    let mut out = format!("experiment {}\n\n", outcome.experiment);
    if !outcome.algebra.is_empty() {
        for r in &outcome.algebra {
            let _ = writeln!(
                out,
                "m={} n={} parity=({},{}) max residual {}",
                r.m,
                r.n,
                r.parity_m,
                r.parity_n,
                format_sig12(r.max_residual)
            );
        }
        out.push('\n');
    } else {
        out.push_str(&table(&outcome.reports, margin_tol));
        out.push('\n');
    }
    out.push_str(&invariant_lines(&outcome.invariants));
    out
}

/// Writes `reports.json`, `summary.txt` and, when present, `spectrum.csv`
/// into `root/<experiment>/`.
pub fn write_outcome(root: &Path, outcome: &Outcome, margin_tol: f64) -> Result<PathBuf> {
    let dir = root.join(&outcome.experiment);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let write = |name: &str, body: &str| {
        let p = dir.join(name);
        std::fs::write(&p, body).with_context(|| format!("writing {}", p.display()))
    };
    write("reports.json", &to_json(outcome)?)?;
    write("summary.txt", &summary(outcome, margin_tol))?;
    if let Some(csv) = &outcome.spectrum_csv {
        write("spectrum.csv", csv)?;
    }
    Ok(dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_table_is_the_header() {
        let t = table(&[], 1e-9);
        assert_eq!(t.lines().count(), 1);
        assert!(t.starts_with("bound"));
    }
}
