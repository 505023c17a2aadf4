use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{RequirementRecord, Verdict};
use crate::model::BehaviorTreeModel;

pub const SCHEMA: &str = "btq-report/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub executions: usize,
    pub satisfied: usize,
    pub violated: usize,
    pub unmonitored: usize,
}

impl Counts {
    fn tally(records: &[RequirementRecord]) -> Self {
        let mut c = Counts {
            executions: records.len(),
            ..Counts::default()
        };
        for r in records {
            match r.verdict {
                Verdict::Satisfied => c.satisfied += 1,
                Verdict::Violated => c.violated += 1,
                Verdict::Unmonitored => c.unmonitored += 1,
            }
        }
        c
    }

    fn add(&mut self, other: Counts) {
        self.executions += other.executions;
        self.satisfied += other.satisfied;
        self.violated += other.violated;
        self.unmonitored += other.unmonitored;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElapsedStats {
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub mean: Option<f64>,
}

impl ElapsedStats {
    fn of(records: &[RequirementRecord]) -> Self {
        if records.is_empty() {
            return ElapsedStats {
                min: None,
                max: None,
                mean: None,
            };
        }
        let values = records.iter().map(|r| r.elapsed_sec);
        let sum: f64 = values.clone().sum();
        ElapsedStats {
            min: values.clone().reduce(f64::min),
            max: values.reduce(f64::max),
            mean: Some(sum / records.len() as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequirementSummary {
    pub id: String,
    pub description: String,
    /// Quality label such as `performance <time-behavior>`, when linked.
    pub quality: Option<String>,
    pub counts: Counts,
    pub elapsed_sec: ElapsedStats,
    pub records: Vec<RequirementRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityGroup {
    pub quality: String,
    pub requirements: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub schema: String,
    pub requirements: Vec<RequirementSummary>,
    pub qualities: Vec<QualityGroup>,
    /// Requirements with no linked quality.
    pub ungrouped: Vec<String>,
    pub totals: Counts,
}

impl QualityReport {
    pub fn requirement(&self, id: &str) -> Option<&RequirementSummary> {
        self.requirements.iter().find(|r| r.id == id)
    }

    pub fn has_violations(&self) -> bool {
        self.totals.violated > 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum ReportFormat {
    #[default]
    Text,
    Json,
}

/// Aggregates records (possibly from several runs) per requirement id.
/// Every declared requirement gets an entry, even without records.
pub fn build_report(records: &[RequirementRecord], model: &BehaviorTreeModel) -> QualityReport {
    let mut by_id: BTreeMap<String, Vec<RequirementRecord>> = model
        .requirements
        .iter()
        .map(|r| (r.id.clone(), Vec::new()))
        .collect();
    for record in records {
        by_id.entry(record.requirement_id.clone()).or_default().push(record.clone());
    }

    let mut requirements = Vec::with_capacity(by_id.len());
    let mut groups: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut ungrouped = Vec::new();
    let mut totals = Counts::default();
    for (id, mut recs) in by_id {
        recs.sort_by_key(|r| r.execution_index);
        let declared = model.requirements.get(&id);
        let quality = declared.and_then(|r| r.quality.as_ref());
        match quality {
            Some(q) => groups.entry(q.name.clone()).or_default().push(id.clone()),
            None => ungrouped.push(id.clone()),
        }
        let counts = Counts::tally(&recs);
        totals.add(counts);
        requirements.push(RequirementSummary {
            description: declared.map(|r| r.description.clone()).unwrap_or_default(),
            quality: quality.map(|q| q.label()),
            counts,
            elapsed_sec: ElapsedStats::of(&recs),
            records: recs,
            id,
        });
    }

    QualityReport {
        schema: SCHEMA.into(),
        requirements,
        qualities: groups
            .into_iter()
            .map(|(quality, requirements)| QualityGroup {
                quality,
                requirements,
            })
            .collect(),
        ungrouped,
        totals,
    }
}

pub fn render_report(report: &QualityReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Text => render_text(report),
    }
}

fn render_text(report: &QualityReport) -> String {
    let header = [
        "requirement", "quality", "executions", "satisfied", "violated", "unmonitored", "min_sec",
        "max_sec", "mean_sec",
    ];
    let secs = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
    let rows: Vec<Vec<String>> = report
        .requirements
        .iter()
        .map(|r| {
            vec![
                r.id.clone(),
                r.quality.clone().unwrap_or_else(|| "-".into()),
                r.counts.executions.to_string(),
                r.counts.satisfied.to_string(),
                r.counts.violated.to_string(),
                r.counts.unmonitored.to_string(),
                secs(r.elapsed_sec.min),
                secs(r.elapsed_sec.max),
                secs(r.elapsed_sec.mean),
            ]
        })
        .collect();

    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &[String]| {
        let mut text = String::new();
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            if i > 0 {
                text.push_str("  ");
            }
            // Text columns are left-aligned, numbers right-aligned.
            if i < 2 {
                write!(text, "{cell:<w$}").unwrap();
            } else {
                write!(text, "{cell:>w$}").unwrap();
            }
        }
        out.push_str(text.trim_end());
        out.push('\n');
    };
    line(&header.map(String::from));
    for row in &rows {
        line(row);
    }
    let t = report.totals;
    writeln!(
        out,
        "total: {} executions, {} satisfied, {} violated, {} unmonitored",
        t.executions, t.satisfied, t.violated, t.unmonitored
    )
    .unwrap();
    out
}
