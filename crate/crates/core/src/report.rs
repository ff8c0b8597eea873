//! Inequality reports, their CSV rows and the text summary.

use std::fmt::Write as _;
use std::io::Write;

use crate::error::Result;

/// Where a report was evaluated.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReportContext {
    pub scenario: String,
    pub s: f64,
    pub lambda: f64,
    pub n: usize,
    pub nt: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub name: String,
    pub context: ReportContext,
    pub lhs_terms: Vec<(String, f64)>,
    pub rhs_terms: Vec<(String, f64)>,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`
    pub margin: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// `false` when the hypothesis of a conditional statement fails; such
    /// a report is not counted as a failure.
    pub applicable: bool,
    /// Smallest constant making the inequality hold, in calibration mode.
    pub calibrated: Option<f64>,
    pub notes: Vec<String>,
}

/// `1e-8 (|lhs| + |rhs|) + slack |rhs|`
pub fn tolerance(lhs: f64, rhs: f64, slack: f64) -> f64 {
    1e-8 * (lhs.abs() + rhs.abs()) + slack * rhs.abs()
}

impl EstimateReport {
    /// Builds a report; `pass ⇔ rhs - lhs >= -tolerance`.
    pub fn new(
        name: impl Into<String>,
        context: ReportContext,
        lhs_terms: Vec<(String, f64)>,
        rhs_terms: Vec<(String, f64)>,
        lhs: f64,
        rhs: f64,
        tolerance: f64,
    ) -> EstimateReport {
        let margin = rhs - lhs;
        EstimateReport {
            name: name.into(),
            context,
            lhs_terms,
            rhs_terms,
            lhs,
            rhs,
            margin,
            tolerance,
            pass: margin >= -tolerance,
            applicable: true,
            calibrated: None,
            notes: Vec::new(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> EstimateReport {
        self.notes.push(note.into());
        self
    }

    pub fn term(&self, label: &str) -> Option<f64> {
        self.lhs_terms
            .iter()
            .chain(&self.rhs_terms)
            .find(|(l, _)| l == label)
            .map(|(_, v)| *v)
    }
}

pub const CSV_HEADER: [&str; 16] = [
    "name",
    "scenario",
    "s",
    "lambda",
    "n",
    "nt",
    "lhs",
    "rhs",
    "margin",
    "tolerance",
    "pass",
    "applicable",
    "calibrated",
    "lhs_terms",
    "rhs_terms",
    "notes",
];

/// Fixed-width scientific formatting with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

fn fmt_terms(terms: &[(String, f64)]) -> String {
    terms
        .iter()
        .map(|(l, v)| format!("{l}={}", fmt_f64(*v)))
        .collect::<Vec<_>>()
        .join(";")
}

pub fn csv_record(r: &EstimateReport) -> Vec<String> {
    vec![
        r.name.clone(),
        r.context.scenario.clone(),
        fmt_f64(r.context.s),
        fmt_f64(r.context.lambda),
        r.context.n.to_string(),
        r.context.nt.to_string(),
        fmt_f64(r.lhs),
        fmt_f64(r.rhs),
        fmt_f64(r.margin),
        fmt_f64(r.tolerance),
        r.pass.to_string(),
        r.applicable.to_string(),
        r.calibrated.map(fmt_f64).unwrap_or_default(),
        fmt_terms(&r.lhs_terms),
        fmt_terms(&r.rhs_terms),
        r.notes.join(" | "),
    ]
}

/// Writes the header and one row per report.
pub fn write_csv<W: Write>(out: W, reports: &[EstimateReport]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in reports {
        w.write_record(csv_record(r))?;
    }
    w.flush()?;
    Ok(())
}

/// One line per report: verdict, name, scenario, sides and margin.
pub fn summary(reports: &[EstimateReport]) -> String {
    let mut s = String::new();
    for r in reports {
        let verdict = match (r.applicable, r.pass) {
            (false, _) => "N/A ",
            (true, true) => "PASS",
            (true, false) => "FAIL",
        };
        let _ = write!(
            s,
            "{verdict} {:<28} [{}] lhs={:.6e} rhs={:.6e} margin={:.6e}",
            r.name, r.context.scenario, r.lhs, r.rhs, r.margin
        );
        if let Some(c) = r.calibrated {
            let _ = write!(s, " calibrated={c:.6e}");
        }
        for n in &r.notes {
            let _ = write!(s, " ({n})");
        }
        s.push('\n');
    }
    s
}
