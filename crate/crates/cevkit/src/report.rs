//! Per-page reports, corpus aggregates and their JSON/CSV serialization.

use std::collections::BTreeMap;

use cevkit_core::decompose::{CoteComponents, DecompositionReport, TriageVerdict};
use cevkit_core::simulate::{mean, median, CropSample, GranularitySummary, PipelineCell};
use serde::{Deserialize, Serialize};

pub const REPORT_VERSION: &str = "1.0";

/// Direct page-level scores of the prediction against the ground truth.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PageScores {
    pub spacer: Option<f64>,
    pub spacer_micro: Option<f64>,
    pub spacd: Option<f64>,
    pub cdd_jsd: Option<f64>,
    pub cer: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageReport {
    pub page_id: String,
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<PageScores>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decomposition: Option<DecompositionReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cote: Option<CoteComponents>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub triage: Option<TriageVerdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl PageReport {
    pub fn failed(page_id: impl Into<String>, source: impl Into<String>, error: impl Into<String>) -> Self {
        Self {
            page_id: page_id.into(),
            source: source.into(),
            scores: None,
            decomposition: None,
            cote: None,
            triage: None,
            error: Some(error.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    /// Column name to mean over the pages where the value exists.
    pub mean: BTreeMap<String, f64>,
    pub median: BTreeMap<String, f64>,
    /// Pages contributing to each column.
    pub count: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub report_version: String,
    pub command: String,
    pub metric: String,
    pub unit: String,
    pub pages: Vec<PageReport>,
    pub aggregates: Aggregates,
}

/// Numeric CSV columns, in output order.
pub const NUMERIC_COLUMNS: &[&str] = &[
    "spacer", "spacer_micro", "spacd", "cdd_jsd", "cer", "d_pars", "d_ocr", "d_int", "d_total", "coverage", "overlap",
    "trespass", "excess", "cote", "ratio",
];

/// Full CSV header. `row_kind` is `page`, `mean` or `median`.
pub const CSV_COLUMNS: &[&str] = &[
    "row_kind", "page_id", "source", "metric", "unit", "spacer", "spacer_micro", "spacd", "cdd_jsd", "cer", "d_pars",
    "d_ocr", "d_int", "d_total", "coverage", "overlap", "trespass", "excess", "cote", "ratio", "cote_gate",
    "dominant", "flags", "error",
];

impl PageReport {
    pub fn numeric(&self, column: &str) -> Option<f64> {
        let s = self.scores.as_ref();
        let d = self.decomposition.as_ref();
        let c = self.cote.as_ref();
        match column {
            "spacer" => s?.spacer,
            "spacer_micro" => s?.spacer_micro,
            "spacd" => s?.spacd,
            "cdd_jsd" => s?.cdd_jsd,
            "cer" => s?.cer,
            "d_pars" => d?.d_pars,
            "d_ocr" => d?.d_ocr,
            "d_int" => d?.d_int,
            "d_total" => d?.d_total,
            "coverage" => c.map(|c| c.coverage),
            "overlap" => c.map(|c| c.overlap),
            "trespass" => c.map(|c| c.trespass),
            "excess" => c.map(|c| c.excess),
            "cote" => c.map(|c| c.score),
            "ratio" => self.triage.as_ref()?.ratio,
            _ => None,
        }
    }
}

pub fn aggregate(pages: &[PageReport]) -> Aggregates {
    let mut out = Aggregates {
        mean: BTreeMap::new(),
        median: BTreeMap::new(),
        count: BTreeMap::new(),
    };
    for col in NUMERIC_COLUMNS {
        let values: Vec<f64> = pages.iter().filter_map(|p| p.numeric(col)).collect();
        if values.is_empty() {
            continue;
        }
        out.mean.insert(col.to_string(), mean(&values));
        out.median.insert(col.to_string(), median(&values));
        out.count.insert(col.to_string(), values.len());
    }
    out
}

impl ReportDocument {
    pub fn new(command: &str, metric: &str, unit: &str, pages: Vec<PageReport>) -> Self {
        Self {
            report_version: REPORT_VERSION.to_string(),
            command: command.to_string(),
            metric: metric.to_string(),
            unit: unit.to_string(),
            aggregates: aggregate(&pages),
            pages,
        }
    }

    pub fn has_errors(&self) -> bool {
        self.pages.iter().any(|p| p.error.is_some())
    }
}

/// `%g`-style formatting with six significant digits.
pub fn fmt_g(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn opt_g(v: Option<f64>) -> String {
    v.map(fmt_g).unwrap_or_default()
}

fn opt_bool(v: Option<bool>) -> String {
    v.map(|b| b.to_string()).unwrap_or_default()
}

pub fn report_to_json(report: &ReportDocument) -> String {
    serde_json::to_string_pretty(report).expect("reports always serialize")
}

pub fn report_from_json(bytes: &[u8]) -> Result<ReportDocument, serde_json::Error> {
    serde_json::from_slice(bytes)
}

/// One row per page followed by `mean` and `median` rows; empty reports
/// produce the header only.
pub fn report_to_csv(report: &ReportDocument) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS)?;
    for p in &report.pages {
        let mut row = vec!["page".to_string(), p.page_id.clone(), p.source.clone(), report.metric.clone(), report.unit.clone()];
        row.extend(NUMERIC_COLUMNS.iter().map(|c| opt_g(p.numeric(c))));
        row.push(opt_bool(p.triage.as_ref().and_then(|t| t.cote_gate_passed)));
        row.push(p.triage.as_ref().map(|t| t.dominant.as_str().to_string()).unwrap_or_default());
        row.push(p.decomposition.as_ref().map(|d| d.flags.join("; ")).unwrap_or_default());
        row.push(p.error.clone().unwrap_or_default());
        w.write_record(&row)?;
    }
    if !report.pages.is_empty() {
        for (kind, values) in [("mean", &report.aggregates.mean), ("median", &report.aggregates.median)] {
            let mut row = vec![kind.to_string(), String::new(), String::new(), report.metric.clone(), report.unit.clone()];
            row.extend(NUMERIC_COLUMNS.iter().map(|c| opt_g(values.get(*c).copied())));
            row.extend([String::new(), String::new(), String::new(), String::new()]);
            w.write_record(&row)?;
        }
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

pub const GRANULARITY_COLUMNS: &[&str] = &[
    "page", "columns", "alignment", "width_frac", "height_frac", "repeat", "crop_x0", "crop_y0", "crop_x1", "crop_y1",
    "truth_count", "word_error", "line_error", "paragraph_error",
];

pub fn crop_samples_to_csv(samples: &[CropSample]) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(GRANULARITY_COLUMNS)?;
    for s in samples {
        let mut row = vec![
            s.page.to_string(),
            s.columns.to_string(),
            s.alignment.as_str().to_string(),
            fmt_g(s.width_frac),
            fmt_g(s.height_frac),
            s.repeat.to_string(),
            fmt_g(s.crop.x0),
            fmt_g(s.crop.y0),
            fmt_g(s.crop.x1),
            fmt_g(s.crop.y1),
            s.truth_count.to_string(),
        ];
        row.extend(s.errors.iter().map(|e| opt_g(*e)));
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

pub const GRANULARITY_SUMMARY_COLUMNS: &[&str] =
    &["granularity", "width_frac", "height_frac", "mean", "median", "samples", "skipped"];

pub fn granularity_summary_to_csv(summary: &[GranularitySummary]) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(GRANULARITY_SUMMARY_COLUMNS)?;
    for s in summary {
        w.write_record([
            s.granularity.as_str().to_string(),
            fmt_g(s.width_frac),
            fmt_g(s.height_frac),
            fmt_g(s.mean),
            fmt_g(s.median),
            s.samples.to_string(),
            s.skipped.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

/// A pipeline cell with its decomposition and both triage verdicts.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRow {
    pub cell: PipelineCell,
    pub report: DecompositionReport,
    pub verdict: TriageVerdict,
    pub gated: TriageVerdict,
}

pub const PIPELINE_COLUMNS: &[&str] = &[
    "page", "parse", "ocr", "parse_label", "degenerate", "parse_magnitude", "ocr_magnitude", "label", "d_pars", "d_ocr",
    "d_int", "d_total", "ratio", "coverage", "overlap", "trespass", "excess", "cote", "verdict", "verdict_gated",
];

pub fn pipeline_to_csv(rows: &[PipelineRow]) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(PIPELINE_COLUMNS)?;
    for r in rows {
        let c = &r.cell;
        w.write_record([
            c.page.to_string(),
            c.parse.to_string(),
            c.ocr.to_string(),
            c.parse_label.clone(),
            c.degenerate.to_string(),
            fmt_g(c.parse_magnitude),
            fmt_g(c.ocr_magnitude),
            c.label.as_str().to_string(),
            opt_g(r.report.d_pars),
            opt_g(r.report.d_ocr),
            opt_g(r.report.d_int),
            opt_g(r.report.d_total),
            opt_g(r.verdict.ratio),
            fmt_g(c.cote.coverage),
            fmt_g(c.cote.overlap),
            fmt_g(c.cote.trespass),
            fmt_g(c.cote.excess),
            fmt_g(c.cote.score),
            r.verdict.dominant.as_str().to_string(),
            r.gated.dominant.as_str().to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}
