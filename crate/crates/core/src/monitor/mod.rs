//! Run-time monitoring of quality requirements.
//!
//! Constraints are checked as post-conditions when a node reaches a
//! terminal status. `failure_if` is evaluated first and wins; a requirement
//! without constraints is recorded as `Unmonitored`.

mod report;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::condexpr::{eval_expr, ExprError, Value};
use crate::engine::TickStatus;
use crate::model::{BehaviorTreeModel, QualityRequirement};

pub use report::{
    build_report, render_report, Counts, ElapsedStats, QualityGroup, QualityReport, ReportFormat,
    RequirementSummary,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Satisfied,
    Violated,
    Unmonitored,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequirementRecord {
    pub requirement_id: String,
    pub node_path: String,
    /// 1-based count of completions of this requirement within one run.
    pub execution_index: u32,
    pub started_tick: u64,
    pub finished_tick: u64,
    pub elapsed_sec: f64,
    pub raw_status: TickStatus,
    pub final_status: TickStatus,
    pub verdict: Verdict,
    pub scope_snapshot: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

/// Timing of one node execution, from its Started tick to its Finished tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timing {
    pub started_tick: u64,
    pub finished_tick: u64,
    pub ticks_per_second: f64,
}

impl Timing {
    pub fn elapsed_ticks(&self) -> u64 {
        self.finished_tick - self.started_tick + 1
    }

    pub fn elapsed_sec(&self) -> f64 {
        self.elapsed_ticks() as f64 / self.ticks_per_second
    }
}

/// Per-run monitor state: which requirements hang off which node, how many
/// times each has been checked, and every record produced so far.
#[derive(Debug, Clone)]
pub struct Monitor<'m> {
    by_path: HashMap<&'m str, Vec<&'m QualityRequirement>>,
    executions: HashMap<String, u32>,
    records: Vec<RequirementRecord>,
}

impl<'m> Monitor<'m> {
    pub fn new(model: &'m BehaviorTreeModel) -> Self {
        let by_path = model
            .nodes()
            .filter(|n| !n.satisfies.is_empty())
            .map(|n| {
                let reqs = n
                    .satisfies
                    .iter()
                    .filter_map(|id| model.requirements.get(id))
                    .collect();
                (n.node_path.as_str(), reqs)
            })
            .collect();
        Self {
            by_path,
            executions: HashMap::new(),
            records: Vec::new(),
        }
    }

    /// Checks the node's requirements after it reached `raw_status`.
    /// Returns the possibly overridden status and one record per requirement.
    pub fn on_complete(
        &mut self,
        node_path: &str,
        raw_status: TickStatus,
        timing: Timing,
        blackboard: &BTreeMap<String, Value>,
    ) -> (TickStatus, Vec<RequirementRecord>) {
        let Some(requirements) = self.by_path.get(node_path) else {
            return (raw_status, Vec::new());
        };
        if requirements.is_empty() {
            return (raw_status, Vec::new());
        }

        let mut scope = blackboard.clone();
        scope.insert("elapsed_ticks".into(), Value::Number(timing.elapsed_ticks() as f64));
        scope.insert("elapsed_sec".into(), Value::Number(timing.elapsed_sec()));
        scope.insert("status".into(), Value::Text(raw_status.as_str().into()));

        let mut forced_failure = false;
        let mut forced_success = false;
        let mut evaluated = Vec::with_capacity(requirements.len());
        for req in requirements.iter() {
            let (verdict, force, diagnostic) = check(req, &scope);
            match force {
                Some(TickStatus::Failure) => forced_failure = true,
                Some(TickStatus::Success) => forced_success = true,
                _ => {}
            }
            evaluated.push((req.id.clone(), verdict, diagnostic));
        }
        let final_status = if forced_failure {
            TickStatus::Failure
        } else if forced_success {
            TickStatus::Success
        } else {
            raw_status
        };

        let records: Vec<RequirementRecord> = evaluated
            .into_iter()
            .map(|(id, verdict, diagnostic)| {
                let n = self.executions.entry(id.clone()).or_insert(0);
                *n += 1;
                RequirementRecord {
                    requirement_id: id,
                    node_path: node_path.to_owned(),
                    execution_index: *n,
                    started_tick: timing.started_tick,
                    finished_tick: timing.finished_tick,
                    elapsed_sec: timing.elapsed_sec(),
                    raw_status,
                    final_status,
                    verdict,
                    scope_snapshot: scope.clone(),
                    diagnostic,
                }
            })
            .collect();
        self.records.extend(records.iter().cloned());
        (final_status, records)
    }

    pub fn records(&self) -> &[RequirementRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<RequirementRecord> {
        self.records
    }
}

/// Verdict, forced status, and evaluation diagnostic for one requirement.
fn check(
    req: &QualityRequirement,
    scope: &BTreeMap<String, Value>,
) -> (Verdict, Option<TickStatus>, Option<String>) {
    let failed = |err: ExprError, which: &str| {
        (
            Verdict::Violated,
            None,
            Some(format!("[{}] {which} of `{}` could not be evaluated: {err}", err.code(), req.id)),
        )
    };

    if let Some(constraint) = &req.failure_if {
        match eval_expr(&constraint.expr, scope) {
            Err(err) => return failed(err, "failureIf"),
            Ok(true) => return (Verdict::Violated, Some(TickStatus::Failure), None),
            Ok(false) => {}
        }
    }
    if let Some(constraint) = &req.success_if {
        match eval_expr(&constraint.expr, scope) {
            Err(err) => return failed(err, "successIf"),
            Ok(true) => return (Verdict::Satisfied, Some(TickStatus::Success), None),
            Ok(false) => {}
        }
    }
    match (&req.failure_if, &req.success_if) {
        (None, None) => (Verdict::Unmonitored, None, None),
        (Some(_), _) => (Verdict::Satisfied, None, None),
        (None, Some(_)) => (Verdict::Violated, None, None),
    }
}
