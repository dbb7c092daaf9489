//! Report files. Output bytes depend only on the report.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{Averages, EvalError, RunReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Tsv,
    Markdown,
    Json,
}

pub const SUMMARY_HEADER: &str = "agent\tmode\trun\trr\tma\tla\thr\tspq_seconds";

/// One line of the summary TSV. `run` is a seed, `mean` or `mpe`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub agent: String,
    pub mode: String,
    pub run: String,
    pub rr: f64,
    pub ma: f64,
    pub la: f64,
    pub hr: f64,
    pub spq: Option<f64>,
}

impl SummaryRow {
    pub fn averages(&self) -> Averages {
        Averages {
            rr: self.rr,
            ma: self.ma,
            la: self.la,
            hr: self.hr,
            spq: self.spq.unwrap_or(0.0),
        }
    }
}

fn clean(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn summary_line(out: &mut String, report: &RunReport, run: &str, a: &Averages) {
    let spq = if report.config.timing {
        a.spq.to_string()
    } else {
        "-".into()
    };
    let _ = writeln!(
        out,
        "{}\t{}\t{run}\t{}\t{}\t{}\t{}\t{spq}",
        clean(&report.config.agent_label),
        report.config.mode,
        a.rr,
        a.ma,
        a.la,
        a.hr
    );
}

/// Per-seed averages, their mean and (multi-seed) the MPE, at full precision.
pub fn report_summary_tsv(report: &RunReport) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for run in &report.runs {
        summary_line(&mut out, report, &run.seed.to_string(), &run.averages);
    }
    summary_line(&mut out, report, "mean", &report.averages);
    if let Some(mpe) = &report.mpe {
        summary_line(&mut out, report, "mpe", mpe);
    }
    out
}

pub fn report_items_tsv(report: &RunReport) -> String {
    let mut out = String::from("seed\titem_id\trr\tma\tla\thr\tspq_seconds\tattempts\tfailure\tcalls\tnlr\n");
    for run in &report.runs {
        for r in &run.records {
            let spq = if report.config.timing {
                r.spq_seconds.to_string()
            } else {
                "-".into()
            };
            let failure = match &r.outcome.failure {
                Some(f) => clean(&f.to_string()),
                None => String::new(),
            };
            let calls: Vec<String> = r.outcome.calls.iter().map(|c| c.signature()).collect();
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{spq}\t{}\t{failure}\t{}\t{}",
                run.seed,
                r.item_id,
                r.rr,
                r.ma,
                r.la,
                r.hr,
                r.outcome.attempts,
                clean(&calls.join("; ")),
                clean(&r.outcome.nlr)
            );
        }
    }
    out
}

fn md_row(out: &mut String, label: &str, a: &Averages, timing: bool) {
    let spq = if timing { format!("{:.2}", a.spq) } else { "-".into() };
    let _ = writeln!(
        out,
        "| {label} | {:.2} | {:.2} | {:.2} | {:.2} | {spq} |",
        a.rr, a.ma, a.la, a.hr
    );
}

pub fn report_markdown(report: &RunReport) -> String {
    let c = &report.config;
    let label = clean(&c.agent_label).replace('|', "/");
    let seeds: Vec<String> = c.seeds.iter().map(u64::to_string).collect();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Mode: {}, temperature: {}, seeds: {}, scoring: {}\n",
        c.mode,
        c.temperature,
        seeds.join(", "),
        c.scoring
    );
    out.push_str("| Agent | RR↑ | MA↑ | LA↑ | HR↓ | SPQ↓ |\n");
    out.push_str("|---|---:|---:|---:|---:|---:|\n");
    if report.runs.len() > 1 {
        for run in &report.runs {
            md_row(
                &mut out,
                &format!("{label} (seed {})", run.seed),
                &run.averages,
                c.timing,
            );
        }
        md_row(&mut out, &format!("{label} (mean)"), &report.averages, c.timing);
    } else {
        md_row(&mut out, &label, &report.averages, c.timing);
    }
    if let Some(mpe) = &report.mpe {
        out.push_str("\nMean percentage error across seeds (%):\n\n");
        out.push_str("| Agent | RR | MA | LA | HR | SPQ |\n");
        out.push_str("|---|---:|---:|---:|---:|---:|\n");
        md_row(&mut out, &label, mpe, c.timing);
    }
    out
}

pub fn emit_report(report: &RunReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Tsv => report_summary_tsv(report),
        ReportFormat::Markdown => report_markdown(report),
        ReportFormat::Json => {
            let mut text = serde_json::to_string_pretty(report).unwrap_or_default();
            text.push('\n');
            text
        }
    }
}

/// Writes `summary.tsv`, `items.tsv`, `report.md` and `report.json` into `dir`.
pub fn write_reports(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>, EvalError> {
    let io = |path: &Path, e: std::io::Error| EvalError::Io {
        path: path.display().to_string(),
        source: e,
    };
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let files = [
        ("summary.tsv", report_summary_tsv(report)),
        ("items.tsv", report_items_tsv(report)),
        ("report.md", report_markdown(report)),
        ("report.json", emit_report(report, ReportFormat::Json)),
    ];
    let mut written = Vec::new();
    for (name, text) in files {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

pub fn parse_summary_tsv(text: &str) -> Result<Vec<SummaryRow>, EvalError> {
    let mut lines = text.lines();
    if lines.next() != Some(SUMMARY_HEADER) {
        return Err(EvalError::Report("unexpected summary header".into()));
    }
    let num = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| EvalError::Report(format!("not a number: '{s}'")))
    };
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 8 {
                return Err(EvalError::Report(format!("expected 8 fields, got {}", f.len())));
            }
            Ok(SummaryRow {
                agent: f[0].into(),
                mode: f[1].into(),
                run: f[2].into(),
                rr: num(f[3])?,
                ma: num(f[4])?,
                la: num(f[5])?,
                hr: num(f[6])?,
                spq: if f[7] == "-" { None } else { Some(num(f[7])?) },
            })
        })
        .collect()
}
