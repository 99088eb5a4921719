//! Report rendering (json, csv, markdown) and the strategy summary.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{PipelineReport, PipelineRow, RewriteColumn, RowStatus};
use crate::analysis::{combine_portfolio, AnalysisOutcome, Mode};
use crate::numeric::format::{ln_abs, sci3};
use crate::numeric::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl ReportFormat {
    pub fn from_name(s: &str) -> Option<ReportFormat> {
        match s {
            "json" => Some(ReportFormat::Json),
            "csv" => Some(ReportFormat::Csv),
            "md" | "markdown" => Some(ReportFormat::Markdown),
            _ => None,
        }
    }
}

impl RowStatus {
    pub fn name(self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::AlarmSrc => "alarm_src",
            RowStatus::AlarmRes => "alarm_res",
            RowStatus::TimeoutImprove => "timeout_improve",
            RowStatus::TimeoutAnalyze => "timeout_analyze",
        }
    }
}

const HEADER: [&str; 16] = [
    "benchmark",
    "status",
    "bits_src",
    "bits_res",
    "ia_src",
    "ia_res",
    "subdiv_src",
    "subdiv_res",
    "best_src",
    "best_res",
    "ratio",
    "baseline",
    "daisy",
    "herbie",
    "both",
    "minimum",
];

fn outcome_cell(o: &AnalysisOutcome) -> String {
    match o {
        AnalysisOutcome::Bound { error, .. } => sci3(&error.abs_err),
        AnalysisOutcome::Alarm { kind, .. } => kind.cell_code().to_string(),
        AnalysisOutcome::Timeout => "TO".to_string(),
    }
}

/// Three significant digits, fixed notation.
fn sig3(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let decimals = (2 - x.abs().log10().floor() as i32).max(0) as usize;
    format!("{x:.decimals$}")
}

fn cells(row: &PipelineRow) -> Vec<String> {
    // a missing result outcome means greedy produced nothing to analyse
    let absent = if row.status == RowStatus::TimeoutImprove { "TO" } else { "-" };
    let mode_cell = |m: &BTreeMap<Mode, AnalysisOutcome>, mode| m.get(&mode).map_or(absent.to_string(), outcome_cell);
    let best_cell = |m: &BTreeMap<Mode, AnalysisOutcome>| {
        if m.is_empty() {
            absent.to_string()
        } else {
            outcome_cell(&combine_portfolio(m))
        }
    };
    let bits = |s: &Option<crate::dynamic::SampledError>| s.as_ref().map_or("-".to_string(), |s| sig3(s.avg_bits));
    let mut out = vec![
        row.name.clone(),
        row.status.name().to_string(),
        bits(&row.sampled_src),
        bits(&row.sampled_res),
        mode_cell(&row.bounds_src, Mode::Ia),
        mode_cell(&row.bounds_res, Mode::Ia),
        mode_cell(&row.bounds_src, Mode::Subdiv),
        mode_cell(&row.bounds_res, Mode::Subdiv),
        best_cell(&row.bounds_src),
        best_cell(&row.bounds_res),
        row.improvement_ratio.as_ref().map_or("-".to_string(), |r| sci3(&r.0)),
    ];
    for c in RewriteColumn::ALL {
        out.push(row.rewrite_columns.get(&c).map_or("-".to_string(), outcome_cell));
    }
    out
}

/// Byte-deterministic rendering of `rows`.
pub fn render_report(rows: &[PipelineRow], format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let report = PipelineReport { rows: rows.to_vec() };
            let mut s = serde_json::to_string_pretty(&report).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(HEADER).expect("in-memory write");
            for r in rows {
                w.write_record(cells(r)).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
        }
        ReportFormat::Markdown => {
            let mut s = String::new();
            let line = |s: &mut String, fields: &[String]| {
                let escaped: Vec<String> = fields.iter().map(|f| f.replace('|', "\\|")).collect();
                let _ = writeln!(s, "| {} |", escaped.join(" | "));
            };
            line(&mut s, &HEADER.map(String::from));
            line(&mut s, &HEADER.map(|_| "---".to_string()));
            for r in rows {
                line(&mut s, &cells(r));
            }
            s
        }
    }
}

pub fn parse_report(text: &str) -> Result<PipelineReport, serde_json::Error> {
    serde_json::from_str(text)
}

#[derive(Debug, Default)]
struct Tally {
    tightened: usize,
    equal: usize,
    loosened: usize,
    log_sum: f64,
    logged: usize,
}

impl Tally {
    /// `ratio` is new bound over old bound.
    fn add(&mut self, ratio: &Rational) {
        let one = Rational::from_integer(1.into());
        match ratio.cmp(&one) {
            std::cmp::Ordering::Less => self.tightened += 1,
            std::cmp::Ordering::Equal => self.equal += 1,
            std::cmp::Ordering::Greater => self.loosened += 1,
        }
        // a zero bound has no finite logarithm; it still counts as tightened
        if *ratio > Rational::from_integer(0.into()) {
            self.log_sum += ln_abs(ratio);
            self.logged += 1;
        }
    }

    fn line(&self, label: &str) -> String {
        let n = self.tightened + self.equal + self.loosened;
        if n == 0 {
            return format!("{label}: no comparable rows");
        }
        let mut s = format!("{label}: {n} rows, tightened {}, equal {}, loosened {}", self.tightened, self.equal, self.loosened);
        if self.logged > 0 {
            let mut orders = -self.log_sum / self.logged as f64 / std::f64::consts::LN_10;
            if orders.abs() < 1e-12 {
                orders = 0.0;
            }
            let _ = write!(s, ", mean improvement factor {} ({} orders of magnitude)", sig3(10f64.powf(orders)), sig3(orders));
        }
        s
    }
}

/// Tightened/equal/loosened counts and geometric-mean improvement factors.
/// Only rows where both compared bounds exist contribute.
pub fn summarize(rows: &[PipelineRow]) -> String {
    let mut pipeline = Tally::default();
    let mut per_column: BTreeMap<RewriteColumn, Tally> = BTreeMap::new();
    for r in rows {
        if let Some(q) = &r.improvement_ratio {
            pipeline.add(&q.0);
        }
        let Some(base) = r.rewrite_columns.get(&RewriteColumn::Baseline).and_then(AnalysisOutcome::bound) else {
            continue;
        };
        for c in [RewriteColumn::Daisy, RewriteColumn::Herbie, RewriteColumn::Both, RewriteColumn::Minimum] {
            if let Some(b) = r.rewrite_columns.get(&c).and_then(AnalysisOutcome::bound) {
                let t = per_column.entry(c).or_default();
                if base == &Rational::from_integer(0.into()) {
                    // 0/0 compares equal; anything over a zero baseline loosened
                    if b == base {
                        t.equal += 1;
                    } else {
                        t.loosened += 1;
                    }
                } else {
                    t.add(&(b / base));
                }
            }
        }
    }
    let comparable = pipeline.tightened + pipeline.equal + pipeline.loosened > 0 || !per_column.is_empty();
    if !comparable {
        return "no comparable rows\n".to_string();
    }
    let mut s = String::new();
    let _ = writeln!(s, "{}", pipeline.line("greedy result vs input (best bounds)"));
    for c in [RewriteColumn::Daisy, RewriteColumn::Herbie, RewriteColumn::Both, RewriteColumn::Minimum] {
        let t = per_column.remove(&c).unwrap_or_default();
        let _ = writeln!(s, "{}", t.line(&format!("{} vs baseline", c.name())));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{AlarmKind, ErrorBound};
    use crate::fpcore::ExprPath;
    use crate::numeric::{ExactRational, Interval};

    fn q(s: &str) -> Rational {
        crate::numeric::format::parse_number(s).unwrap()
    }

    fn bound(s: &str) -> AnalysisOutcome {
        AnalysisOutcome::Bound { error: ErrorBound { abs_err: q(s) }, range: Interval::from_ints(0, 1).unwrap() }
    }

    fn row(name: &str, ratio: Option<&str>) -> PipelineRow {
        PipelineRow {
            name: name.into(),
            status: RowStatus::Ok,
            seed: 0,
            src_expr: "x".into(),
            res_expr: Some("x".into()),
            sampled_src: None,
            sampled_res: None,
            bounds_src: BTreeMap::new(),
            bounds_res: BTreeMap::new(),
            best_src: None,
            best_res: None,
            improvement_ratio: ratio.map(|r| ExactRational(q(r))),
            rewrite_columns: BTreeMap::new(),
            final_expr: None,
        }
    }

    #[test]
    fn cell_codes() {
        let mut r = row("b", None);
        r.rewrite_columns.insert(RewriteColumn::Baseline, bound("4.19e-13"));
        r.rewrite_columns.insert(RewriteColumn::Daisy, AnalysisOutcome::Timeout);
        r.rewrite_columns.insert(RewriteColumn::Herbie, AnalysisOutcome::Alarm { kind: AlarmKind::Div0, path: ExprPath(vec![]) });
        r.rewrite_columns.insert(RewriteColumn::Both, AnalysisOutcome::Alarm { kind: AlarmKind::NonIntPow, path: ExprPath(vec![]) });
        let csv = render_report(&[r], ReportFormat::Csv);
        let line = csv.lines().nth(1).unwrap();
        assert!(line.ends_with(",4.19e-13,TO,DIV0,POW,-"), "{line}");
    }

    #[test]
    fn empty_tables_have_only_a_header() {
        assert_eq!(render_report(&[], ReportFormat::Csv).lines().count(), 1);
        assert_eq!(render_report(&[], ReportFormat::Markdown).lines().count(), 2);
        let json = render_report(&[], ReportFormat::Json);
        assert_eq!(parse_report(&json).unwrap().rows.len(), 0);
    }

    #[test]
    fn json_round_trip() {
        let mut r = row("doppler1", Some("1/3"));
        r.rewrite_columns.insert(RewriteColumn::Minimum, bound("1.47e-13"));
        let json = render_report(std::slice::from_ref(&r), ReportFormat::Json);
        assert!(json.contains("\"approx\": \"3.33e-01\""));
        assert_eq!(parse_report(&json).unwrap().rows, vec![r]);
    }

    #[test]
    fn names_with_separators_are_escaped() {
        let csv = render_report(&[row("a, b", None)], ReportFormat::Csv);
        assert!(csv.lines().nth(1).unwrap().starts_with("\"a, b\","));
        let md = render_report(&[row("a|b", None)], ReportFormat::Markdown);
        assert!(md.contains("a\\|b"));
    }

    #[test]
    fn symmetric_ratios_cancel() {
        let s = summarize(&[row("a", Some("0.1")), row("b", Some("10"))]);
        let first = s.lines().next().unwrap();
        assert!(first.contains("tightened 1, equal 0, loosened 1"), "{first}");
        assert!(first.contains("factor 1.00 (0 orders"), "{first}");
    }

    #[test]
    fn single_ratio_factor() {
        let s = summarize(&[row("rigidBody2", Some("1.58e-2"))]);
        // independent: 1/0.0158 = 63.29..., log10 = 1.801...
        assert!(s.lines().next().unwrap().contains("factor 63.3 (1.80 orders"), "{s}");
    }

    #[test]
    fn no_comparable_rows() {
        let mut r = row("alarm", None);
        r.rewrite_columns.insert(RewriteColumn::Baseline, AnalysisOutcome::Alarm { kind: AlarmKind::Div0, path: ExprPath(vec![]) });
        assert_eq!(summarize(&[r]), "no comparable rows\n");
    }

    #[test]
    fn three_significant_digits() {
        assert_eq!(sig3(15.479), "15.5");
        assert_eq!(sig3(0.2994), "0.299");
        assert_eq!(sig3(123.4), "123");
        assert_eq!(sig3(0.0), "0");
    }
}
