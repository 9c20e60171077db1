//! Plain-text tables for the human-oriented output format.

use std::fmt::Write;

use sigpath_core::ito::SeriesSolution;
use sigpath_core::regression::Metrics;
use sigpath_core::{ExperimentReport, TruncatedTensor};

/// Right-aligned columns separated by two spaces.
pub fn table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &[String]| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, &w)| format!("{c:>w$}"))
            .collect();
        out.push_str(parts.join("  ").trim_end());
        out.push('\n');
    };
    line(header);
    for row in rows {
        line(row);
    }
    out
}

pub fn num(x: f64) -> String {
    if x == 0.0 || (1e-3..1e6).contains(&x.abs()) {
        format!("{x:.6}")
    } else {
        format!("{x:.6e}")
    }
}

pub fn experiment(report: &ExperimentReport) -> String {
    let mut header = vec!["index".to_string()];
    header.extend(report.series.keys().cloned());
    let rows: Vec<Vec<String>> = report
        .indices
        .iter()
        .enumerate()
        .map(|(i, idx)| {
            let mut row = vec![idx.to_string()];
            row.extend(report.series.values().map(|s| num(s[i])));
            row
        })
        .collect();
    let mut out = format!("experiment {} (seed {})\n", report.name, report.seed);
    out.push_str(&table(&header, &rows));
    let _ = writeln!(out, "verdict: {}", if report.verdict { "pass" } else { "FAIL" });
    out
}

pub fn tensor(t: &TruncatedTensor) -> String {
    let mut out = format!("dim {}, depth {}\n", t.dim(), t.depth());
    for (k, level) in t.levels().iter().enumerate() {
        let cells: Vec<String> = level.iter().map(|&x| num(x)).collect();
        let _ = writeln!(out, "level {k}: [{}]", cells.join(", "));
    }
    out
}

pub fn solution(s: &SeriesSolution) -> String {
    let vec = |v: &[f64]| v.iter().map(|&x| num(x)).collect::<Vec<_>>().join(", ");
    let mut rows = vec![
        vec!["value".into(), format!("[{}]", vec(&s.value))],
        vec!["terms".into(), s.terms_used.to_string()],
        vec!["error_bound".into(), num(s.error_bound)],
        vec!["constant C".into(), num(s.growth_constant)],
        vec!["length L".into(), num(s.length)],
    ];
    if let Some(o) = &s.oracle_value {
        rows.push(vec!["oracle".into(), format!("[{}]", vec(o))]);
    }
    if let Some(d) = s.discrepancy {
        rows.push(vec!["discrepancy".into(), num(d)]);
        rows.push(vec!["within bound".into(), (d <= s.error_bound).to_string()]);
    }
    let mut out = String::new();
    for row in rows {
        let _ = writeln!(out, "{:<14}{}", row[0], row[1]);
    }
    out
}

pub fn metrics(by_depth: &[Metrics]) -> String {
    let header: Vec<String> = ["depth", "train_rmse", "heldout_rmse", "max_abs_error", "uniform_gap"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows: Vec<Vec<String>> = by_depth
        .iter()
        .map(|m| {
            vec![
                m.depth.to_string(),
                num(m.train_rmse),
                m.heldout_rmse.map_or("-".into(), num),
                num(m.max_abs_error),
                num(m.uniform_gap),
            ]
        })
        .collect();
    table(&header, &rows)
}
