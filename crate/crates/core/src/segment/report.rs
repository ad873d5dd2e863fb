use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use super::{CoefficientRatio, SegmentedComparison};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GapReportFiles {
    pub dominant_primary: PathBuf,
    pub dominant_secondary: PathBuf,
    pub report: PathBuf,
}

fn ratio_csv(rows: &[&CoefficientRatio]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(["variable", "severity_level", "ratio", "primary_coef", "secondary_coef"])
        .expect("in-memory write");
    for r in rows {
        w.write_record([
            r.parameter.clone(),
            r.alternatives.join(";"),
            format!("{:.6}", r.ratio.unwrap_or(f64::NAN)),
            format!("{:.6}", r.primary_coef),
            format!("{:.6}", r.secondary_coef),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

fn table(s: &mut String, title: &str, rows: &[&CoefficientRatio]) {
    let _ = writeln!(s, "{title}");
    if rows.is_empty() {
        let _ = writeln!(s, "  (none)");
    }
    for r in rows {
        let _ = writeln!(
            s,
            "  {:<32} {:<36} {:>8.3} {:>9.3} {:>9.3}",
            r.parameter,
            r.alternatives.join(";"),
            r.ratio.unwrap_or(f64::NAN),
            r.primary_coef,
            r.secondary_coef
        );
    }
    let _ = writeln!(s);
}

/// Plain-text summary: both dominance tables, sign conflicts and dropped terms.
pub fn render_gap_report(c: &SegmentedComparison) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Segment comparison: primary `{}`, secondary `{}`", c.primary_label, c.secondary_label);
    let _ = writeln!(s, "Ratio = primary coefficient / secondary coefficient; |t| threshold {}", c.alpha_t);
    let _ = writeln!(
        s,
        "Sample sizes: {} / {}; converged: {} / {}",
        c.primary_result.sample_size,
        c.secondary_result.sample_size,
        c.primary_result.converged,
        c.secondary_result.converged
    );
    let _ = writeln!(s);
    let _ = writeln!(s, "  {:<32} {:<36} {:>8} {:>9} {:>9}", "variable", "severity level", "ratio", "primary", "secondary");
    table(&mut s, &format!("Higher in `{}`", c.primary_label), &c.primary_dominant());
    table(&mut s, &format!("Higher in `{}`", c.secondary_label), &c.secondary_dominant());
    let _ = writeln!(s, "Sign conflicts");
    let conflicts = c.sign_conflicts();
    if conflicts.is_empty() {
        let _ = writeln!(s, "  (none)");
    }
    for r in conflicts {
        let _ = writeln!(s, "  {:<32} {:>9.3} {:>9.3}", r.parameter, r.primary_coef, r.secondary_coef);
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "Dropped (not significant in `{}`)", c.secondary_label);
    if c.dropped.is_empty() {
        let _ = writeln!(s, "  (none)");
    }
    for d in &c.dropped {
        let _ = writeln!(s, "  {d}");
    }
    s
}

/// Writes `<prefix>_dominant_primary.csv`, `<prefix>_dominant_secondary.csv` and `<prefix>_report.txt`.
pub fn gap_report(c: &SegmentedComparison, prefix: &Path) -> io::Result<GapReportFiles> {
    let with = |suffix: &str| {
        let mut p = prefix.as_os_str().to_owned();
        p.push(suffix);
        PathBuf::from(p)
    };
    let files = GapReportFiles {
        dominant_primary: with("_dominant_primary.csv"),
        dominant_secondary: with("_dominant_secondary.csv"),
        report: with("_report.txt"),
    };
    std::fs::write(&files.dominant_primary, ratio_csv(&c.primary_dominant()))?;
    std::fs::write(&files.dominant_secondary, ratio_csv(&c.secondary_dominant()))?;
    std::fs::write(&files.report, render_gap_report(c))?;
    Ok(files)
}
