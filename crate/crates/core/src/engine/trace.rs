use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::TickStatus;
use crate::condexpr::Value;
use crate::monitor::RequirementRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", content = "status", rename_all = "lowercase")]
pub enum EventKind {
    Started,
    Ticked(TickStatus),
    Halted,
    Finished(TickStatus),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub tick: u64,
    #[serde(rename = "node")]
    pub node_path: String,
    #[serde(flatten)]
    pub kind: EventKind,
}

impl TraceEvent {
    /// One JSON object, tagged with the 1-based run number.
    pub fn to_json_line(&self, run: usize) -> String {
        #[derive(Serialize)]
        struct Line<'a> {
            run: usize,
            #[serde(flatten)]
            event: &'a TraceEvent,
        }
        serde_json::to_string(&Line { run, event: self }).expect("trace events serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mutation {
    pub tick: u64,
    pub key: String,
    pub old: Option<Value>,
    pub new: Value,
}

/// Key/value store shared by leaves and constraints, with an append-only
/// log of every write.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Blackboard {
    values: BTreeMap<String, Value>,
    log: Vec<Mutation>,
}

impl Blackboard {
    pub fn new(init: BTreeMap<String, Value>) -> Self {
        Self {
            values: init,
            log: Vec::new(),
        }
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.values.get(key)
    }

    pub fn set(&mut self, tick: u64, key: &str, value: Value) {
        let old = self.values.insert(key.to_owned(), value.clone());
        self.log.push(Mutation {
            tick,
            key: key.to_owned(),
            old,
            new: value,
        });
    }

    pub fn values(&self) -> &BTreeMap<String, Value> {
        &self.values
    }

    pub fn log(&self) -> &[Mutation] {
        &self.log
    }
}

/// Everything one `run` produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionTrace {
    pub events: Vec<TraceEvent>,
    /// Root status after each tick, in order.
    pub root_statuses: Vec<TickStatus>,
    /// `Running` when the run hit `max_ticks`.
    pub final_status: TickStatus,
    pub ticks: u64,
    /// Set when `max_ticks` ran out before the root finished.
    pub exhausted: bool,
    pub records: Vec<RequirementRecord>,
    pub blackboard_log: Vec<Mutation>,
}

impl ExecutionTrace {
    pub fn events_for<'a>(&'a self, node_path: &'a str) -> impl Iterator<Item = &'a TraceEvent> + 'a {
        self.events.iter().filter(move |e| e.node_path == node_path)
    }

    pub fn to_json_lines(&self, run: usize) -> String {
        let mut out = String::new();
        for event in &self.events {
            out.push_str(&event.to_json_line(run));
            out.push('\n');
        }
        out
    }
}
