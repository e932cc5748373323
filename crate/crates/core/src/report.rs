//! Rendering of [`EvaluationReport`]s.
//!
//! JSON and CSV are lossless: [`parse_report`] reads either back into the
//! same report. Text and markdown are for people and round every metric to
//! two decimals.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::metrics::MetricReport;
use crate::pipeline::EvaluationReport;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Text,
    Markdown,
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" | "txt" => Ok(ReportFormat::Text),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::Invalid(format!("unknown report format {other:?} (text, markdown, json, csv)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ReportRendering {
    pub format: ReportFormat,
    /// Show BLEU/METEOR/ROUGE-L as percentages in text and markdown.
    pub percent: bool,
}

/// Metric columns, in table order.
pub const METRIC_COLUMNS: [&str; 8] = ["BLEU", "BLEU1", "BLEU2", "BLEU3", "BLEU4", "METEOR", "ROUGE-L", "CIDER"];

fn metric_values(m: &MetricReport) -> [f64; 8] {
    [m.bleu, m.bleu_1, m.bleu_2, m.bleu_3, m.bleu_4, m.meteor, m.rouge_l, m.cider]
}

pub fn render_report(report: &EvaluationReport, how: &ReportRendering) -> Result<String> {
    match how.format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).map_err(|e| Error::Invalid(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
        ReportFormat::Csv => render_csv(report),
        ReportFormat::Text => Ok(render_human(report, how.percent, false)),
        ReportFormat::Markdown => Ok(render_human(report, how.percent, true)),
    }
}

/// Reads a report rendered as JSON or CSV (detected from the first line).
pub fn parse_report(text: &str) -> Result<EvaluationReport> {
    if text.trim_start().starts_with('{') {
        serde_json::from_str(text).map_err(|e| Error::Invalid(format!("report json: {e}")))
    } else {
        parse_csv(text)
    }
}

// CSV: one row per scalar leaf of the JSON form, `path,value`, where the path
// joins object keys and array indices with dots and the value is the JSON
// encoding of the leaf. Empty containers appear as `[]` / `{}` leaves.

fn render_csv(report: &EvaluationReport) -> Result<String> {
    let value = serde_json::to_value(report).map_err(|e| Error::Invalid(e.to_string()))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let bad = |e: csv::Error| Error::Invalid(e.to_string());
    w.write_record(["path", "value"]).map_err(bad)?;
    let mut rows = Vec::new();
    flatten(&value, String::new(), &mut rows);
    for (path, v) in rows {
        w.write_record([path, v]).map_err(bad)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv of utf-8 input"))
}

fn flatten(v: &Value, path: String, out: &mut Vec<(String, String)>) {
    let join = |k: &str| if path.is_empty() { k.to_string() } else { format!("{path}.{k}") };
    match v {
        Value::Object(m) if !m.is_empty() => m.iter().for_each(|(k, x)| flatten(x, join(k), out)),
        Value::Array(a) if !a.is_empty() => a.iter().enumerate().for_each(|(i, x)| flatten(x, join(&i.to_string()), out)),
        leaf => out.push((path, leaf.to_string())),
    }
}

fn parse_csv(text: &str) -> Result<EvaluationReport> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut root = Value::Object(Map::new());
    for (n, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::Invalid(format!("report csv: {e}")))?;
        let line = n + 2;
        let (Some(path), Some(raw)) = (rec.get(0), rec.get(1)) else {
            return Err(Error::Invalid(format!("report csv line {line}: expected path,value")));
        };
        let leaf: Value =
            serde_json::from_str(raw).map_err(|e| Error::Invalid(format!("report csv line {line}: {e}")))?;
        insert(&mut root, path, leaf).map_err(|m| Error::Invalid(format!("report csv line {line}: {m}")))?;
    }
    serde_json::from_value(root).map_err(|e| Error::Invalid(format!("report csv: {e}")))
}

fn insert(root: &mut Value, path: &str, leaf: Value) -> Result<(), String> {
    let parts: Vec<&str> = path.split('.').collect();
    let mut cur = root;
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        let next_is_index = !last && parts[i + 1].parse::<usize>().is_ok();
        let fresh = || if next_is_index { Value::Array(Vec::new()) } else { Value::Object(Map::new()) };
        cur = match cur {
            Value::Object(m) => {
                if last {
                    m.insert(part.to_string(), leaf);
                    return Ok(());
                }
                m.entry(part.to_string()).or_insert_with(fresh)
            }
            Value::Array(a) => {
                let idx: usize = part.parse().map_err(|_| format!("{path}: expected an index at {part:?}"))?;
                if idx != a.len() && idx + 1 != a.len() {
                    return Err(format!("{path}: index {idx} out of order"));
                }
                if last {
                    if idx != a.len() {
                        return Err(format!("{path}: duplicate entry"));
                    }
                    a.push(leaf);
                    return Ok(());
                }
                if idx == a.len() {
                    a.push(fresh());
                }
                &mut a[idx]
            }
            _ => return Err(format!("{path}: conflicts with an earlier scalar")),
        };
    }
    Err(format!("{path}: empty path"))
}

fn render_human(report: &EvaluationReport, percent: bool, markdown: bool) -> String {
    let scale = if percent { 100.0 } else { 1.0 };
    let num = |x: f64| format!("{:.2}", x);
    let mut out = String::new();
    let heading = |out: &mut String, title: &str| {
        if markdown {
            let _ = writeln!(out, "## {title}\n");
        } else {
            let _ = writeln!(out, "{title}\n{}", "-".repeat(title.len()));
        }
    };

    heading(&mut out, "Metrics");
    let _ = writeln!(
        out,
        "test samples: {}, router: {:?} (threshold {:.2})\n",
        report.test_size, report.router.kind, report.router.threshold
    );
    let mut header = vec!["System".to_string()];
    header.extend(METRIC_COLUMNS.iter().map(|c| c.to_string()));
    let rows: Vec<Vec<String>> = report
        .systems
        .iter()
        .map(|r| {
            let mut row = vec![r.system.clone()];
            let vals = metric_values(&r.metrics);
            // CIDEr is not a proportion, so it is never scaled.
            row.extend(vals.iter().enumerate().map(|(i, v)| num(if i == 7 { *v } else { v * scale })));
            row
        })
        .collect();
    out.push_str(&table(&header, &rows, markdown));

    if let Some(c) = &report.classifier {
        out.push('\n');
        heading(&mut out, "Router vs oracle labels");
        let header = ["TP", "FP", "TN", "FN", "Accuracy", "Precision", "Recall", "F1", "Combined BLEU"].map(String::from);
        let m = &c.metrics;
        let row = vec![
            c.confusion.tp.to_string(),
            c.confusion.fp.to_string(),
            c.confusion.tn.to_string(),
            c.confusion.fn_.to_string(),
            num(m.accuracy * scale),
            num(m.precision * scale),
            num(m.recall * scale),
            num(m.f1 * scale),
            num(c.combined_bleu * scale),
        ];
        out.push_str(&table(&header, &[row], markdown));
        if m.degenerate {
            out.push_str("\n(some ratios had a zero denominator and are shown as 0)\n");
        }
    }

    if let Some(p) = &report.partition {
        out.push('\n');
        heading(&mut out, "Partition by better source");
        let names: Vec<String> = report.systems.iter().map(|r| r.system.clone()).collect();
        let mut header = vec!["Partition".to_string(), "Count".to_string()];
        header.extend(names.iter().map(|n| format!("{n} BLEU")));
        let rows: Vec<Vec<String>> = [("IR better", &p.ir_better), ("NMT better", &p.nmt_better)]
            .into_iter()
            .map(|(label, row)| {
                let mut cells = vec![label.to_string(), row.count.to_string()];
                cells.extend(names.iter().map(|n| {
                    row.bleu.iter().find(|b| &b.system == n).map_or("-".to_string(), |b| num(b.bleu * scale))
                }));
                cells
            })
            .collect();
        out.push_str(&table(&header, &rows, markdown));
    }

    out.push('\n');
    heading(&mut out, "Effort");
    let _ = writeln!(
        out,
        "generator calls skipped: {} of {} ({:.2}%)\ngenerator calls for the combined system: {}",
        report.effort.skipped_nmt,
        report.effort.total,
        report.effort.fraction * 100.0,
        report.combined_backend_calls
    );

    if !report.significance.is_empty() {
        out.push('\n');
        heading(&mut out, "Wilcoxon signed-rank (sentence BLEU)");
        let header = ["A", "B", "n", "W", "p", "Method"].map(String::from);
        let rows: Vec<Vec<String>> = report
            .significance
            .iter()
            .map(|s| match &s.result {
                Some(r) => vec![
                    s.system_a.clone(),
                    s.system_b.clone(),
                    r.n.to_string(),
                    format!("{}", r.statistic),
                    format!("{:.4}", r.p_value),
                    format!("{:?}", r.method).to_lowercase(),
                ],
                None => vec![s.system_a.clone(), s.system_b.clone(), "-".into(), "-".into(), "-".into(), "too few pairs".into()],
            })
            .collect();
        out.push_str(&table(&header, &rows, markdown));
    }
    out
}

fn table(header: &[String], rows: &[Vec<String>], markdown: bool) -> String {
    let mut widths: Vec<usize> = header.iter().map(String::len).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: &[String]| -> String {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        if markdown {
            format!("| {} |\n", padded.join(" | "))
        } else {
            format!("{}\n", padded.join("  ").trim_end())
        }
    };
    let mut out = line(header);
    if markdown {
        let rule: Vec<String> =
            widths.iter().enumerate().map(|(i, w)| if i == 0 { "-".repeat(*w) } else { format!("{}:", "-".repeat(w - 1)) }).collect();
        out.push_str(&format!("| {} |\n", rule.join(" | ")));
    } else {
        let total = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
        out.push_str(&"-".repeat(total));
        out.push('\n');
    }
    for r in rows {
        out.push_str(&line(r));
    }
    out
}
