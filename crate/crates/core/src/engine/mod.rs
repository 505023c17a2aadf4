//! Deterministic tick interpreter.
//!
//! Subtree references are expanded into one runtime instance tree, so every
//! occurrence has its own control state. Leaf scripts are keyed by node path
//! and their cursors survive halts.

mod scenario;
mod trace;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::condexpr::{eval_expr, ExprError};
use crate::model::{BehaviorTreeModel, NodeKind, TreeNode};
use crate::monitor::{Monitor, RequirementRecord, Timing};

pub use scenario::{behavior_leaves, load_scenario, load_scenario_named, load_scenario_with, Behavior, ScenarioSpec, Step};
pub use trace::{Blackboard, EventKind, ExecutionTrace, Mutation, TraceEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum TickStatus {
    Success,
    Failure,
    Running,
}

impl TickStatus {
    pub fn is_terminal(self) -> bool {
        self != TickStatus::Running
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TickStatus::Success => "SUCCESS",
            TickStatus::Failure => "FAILURE",
            TickStatus::Running => "RUNNING",
        }
    }
}

impl std::fmt::Display for TickStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("the model is not executable: {0}")]
    InvalidModel(String),
    #[error("no behavior for leaf `{0}` in strict mode")]
    MissingBehavior(String),
    #[error("root already finished; reset before ticking again")]
    TickAfterTerminal,
    #[error("condition `{path}`: {source}")]
    Expression { path: String, source: ExprError },
}

impl EngineError {
    pub fn code(&self) -> &'static str {
        match self {
            EngineError::InvalidModel(_) => "E001",
            EngineError::MissingBehavior(_) => "E403",
            EngineError::TickAfterTerminal => "E404",
            EngineError::Expression { source, .. } => source.code(),
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Cursor {
    step: usize,
    used: u32,
}

#[derive(Debug, Clone)]
struct RNode<'m> {
    node: &'m TreeNode,
    children: Vec<usize>,
    active: bool,
    started_tick: u64,
    /// Sequence/Fallback resume index; Repeat/Retry completed cycles.
    counter: usize,
    /// Parallel: outcome per child once it finished.
    done: Vec<Option<TickStatus>>,
}

pub struct Engine<'m> {
    nodes: Vec<RNode<'m>>,
    behaviors: HashMap<String, Behavior>,
    strict: bool,
    ticks_per_second: f64,
    cursors: HashMap<String, Cursor>,
    blackboard: Blackboard,
    monitor: Monitor<'m>,
    tick: u64,
    root_status: Option<TickStatus>,
    events: Vec<TraceEvent>,
    root_statuses: Vec<TickStatus>,
}

impl<'m> Engine<'m> {
    pub fn new(model: &'m BehaviorTreeModel, scenario: &ScenarioSpec) -> Result<Self, EngineError> {
        if let Some(d) = crate::model::validate(model).into_iter().find(|d| d.is_error()) {
            return Err(EngineError::InvalidModel(d.to_string()));
        }
        let main = model
            .main_tree()
            .ok_or_else(|| EngineError::InvalidModel("no main tree".into()))?;
        let mut nodes = Vec::new();
        expand(model, &main.root, &mut nodes);

        if scenario.strict {
            for n in &nodes {
                if matches!(n.node.kind, NodeKind::Action | NodeKind::Condition)
                    && !scenario.leaf_behaviors.contains_key(&n.node.node_path)
                {
                    return Err(EngineError::MissingBehavior(n.node.node_path.clone()));
                }
            }
        }
        Ok(Self {
            nodes,
            behaviors: scenario.leaf_behaviors.clone().into_iter().collect(),
            strict: scenario.strict,
            ticks_per_second: scenario.ticks_per_second,
            cursors: HashMap::new(),
            blackboard: Blackboard::new(scenario.blackboard_init.clone()),
            monitor: Monitor::new(model),
            tick: 0,
            root_status: None,
            events: Vec::new(),
            root_statuses: Vec::new(),
        })
    }

    /// Propagates one tick from the root.
    pub fn tick_once(&mut self) -> Result<TickStatus, EngineError> {
        if self.root_status.is_some_and(TickStatus::is_terminal) {
            return Err(EngineError::TickAfterTerminal);
        }
        self.tick += 1;
        let status = self.tick_node(0)?;
        self.root_status = Some(status);
        self.root_statuses.push(status);
        Ok(status)
    }

    /// Halts anything still running and allows the root to be ticked again.
    /// The blackboard, leaf scripts, and monitor history carry over.
    pub fn reset(&mut self) {
        self.halt(0);
        self.root_status = None;
    }

    /// Forces a halt of the whole tree, e.g. when a run is abandoned.
    pub fn halt_all(&mut self) {
        self.halt(0);
    }

    pub fn current_tick(&self) -> u64 {
        self.tick
    }

    pub fn blackboard(&self) -> &Blackboard {
        &self.blackboard
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn records(&self) -> &[RequirementRecord] {
        self.monitor.records()
    }

    fn into_trace(self, final_status: TickStatus, exhausted: bool) -> ExecutionTrace {
        ExecutionTrace {
            events: self.events,
            root_statuses: self.root_statuses,
            final_status,
            ticks: self.tick,
            exhausted,
            records: self.monitor.into_records(),
            blackboard_log: self.blackboard.log().to_vec(),
        }
    }

    fn emit(&mut self, id: usize, kind: EventKind) {
        self.events.push(TraceEvent {
            tick: self.tick,
            node_path: self.nodes[id].node.node_path.clone(),
            kind,
        });
    }

    fn tick_node(&mut self, id: usize) -> Result<TickStatus, EngineError> {
        if !self.nodes[id].active {
            let child_count = self.nodes[id].children.len();
            let n = &mut self.nodes[id];
            n.active = true;
            n.started_tick = self.tick;
            n.counter = 0;
            n.done = vec![None; child_count];
            self.emit(id, EventKind::Started);
        }

        let raw = self.step(id)?;
        if !raw.is_terminal() {
            self.emit(id, EventKind::Ticked(TickStatus::Running));
            return Ok(raw);
        }

        let timing = Timing {
            started_tick: self.nodes[id].started_tick,
            finished_tick: self.tick,
            ticks_per_second: self.ticks_per_second,
        };
        let node = self.nodes[id].node;
        let (status, _) = self
            .monitor
            .on_complete(&node.node_path, raw, timing, self.blackboard.values());
        self.halt_children(id, 0);
        self.nodes[id].active = false;
        self.emit(id, EventKind::Ticked(status));
        self.emit(id, EventKind::Finished(status));
        Ok(status)
    }

    fn step(&mut self, id: usize) -> Result<TickStatus, EngineError> {
        use TickStatus::*;
        let kind = self.nodes[id].node.kind;
        let children = self.nodes[id].children.clone();
        let status = match kind {
            NodeKind::Action | NodeKind::Condition => self.leaf(id)?,
            NodeKind::Sequence | NodeKind::Fallback => {
                let (advance, stop) = if kind == NodeKind::Sequence {
                    (Success, Failure)
                } else {
                    (Failure, Success)
                };
                let mut i = self.nodes[id].counter;
                loop {
                    let s = self.tick_node(children[i])?;
                    if s == Running {
                        self.nodes[id].counter = i;
                        break Running;
                    }
                    if s == stop {
                        break stop;
                    }
                    i += 1;
                    if i == children.len() {
                        break advance;
                    }
                }
            }
            NodeKind::ReactiveSequence | NodeKind::ReactiveFallback => {
                let (advance, stop) = if kind == NodeKind::ReactiveSequence {
                    (Success, Failure)
                } else {
                    (Failure, Success)
                };
                let mut result = advance;
                for (i, &child) in children.iter().enumerate() {
                    let s = self.tick_node(child)?;
                    if s == Running {
                        self.halt_children(id, i + 1);
                        result = Running;
                        break;
                    }
                    if s == stop {
                        result = stop;
                        break;
                    }
                }
                result
            }
            NodeKind::Parallel => {
                let threshold = self.nodes[id].node.count().unwrap_or(1) as usize;
                for (i, &child) in children.iter().enumerate() {
                    if self.nodes[id].done[i].is_none() {
                        let s = self.tick_node(child)?;
                        if s.is_terminal() {
                            self.nodes[id].done[i] = Some(s);
                        }
                    }
                }
                let done = &self.nodes[id].done;
                let successes = done.iter().filter(|s| **s == Some(Success)).count();
                let failures = done.iter().filter(|s| **s == Some(Failure)).count();
                if successes >= threshold {
                    Success
                } else if failures > children.len().saturating_sub(threshold) {
                    Failure
                } else {
                    Running
                }
            }
            NodeKind::Inverter => match self.tick_node(children[0])? {
                Success => Failure,
                Failure => Success,
                Running => Running,
            },
            NodeKind::ForceSuccess => match self.tick_node(children[0])? {
                Running => Running,
                _ => Success,
            },
            NodeKind::ForceFailure => match self.tick_node(children[0])? {
                Running => Running,
                _ => Failure,
            },
            NodeKind::KeepRunningUntilFailure => match self.tick_node(children[0])? {
                Failure => Failure,
                _ => Running,
            },
            NodeKind::Repeat | NodeKind::RetryUntilSuccessful => {
                let limit = self.nodes[id].node.count().unwrap_or(1) as usize;
                let (again, exit) = if kind == NodeKind::Repeat {
                    (Success, Failure)
                } else {
                    (Failure, Success)
                };
                let s = self.tick_node(children[0])?;
                if s == exit {
                    exit
                } else if s == again {
                    self.nodes[id].counter += 1;
                    if self.nodes[id].counter >= limit {
                        again
                    } else {
                        Running
                    }
                } else {
                    Running
                }
            }
            NodeKind::SubTreeRef => self.tick_node(children[0])?,
        };
        Ok(status)
    }

    fn leaf(&mut self, id: usize) -> Result<TickStatus, EngineError> {
        let node = self.nodes[id].node;
        let path = &node.node_path;
        let Some(behavior) = self.behaviors.get(path) else {
            return if self.strict {
                Err(EngineError::MissingBehavior(path.clone()))
            } else {
                Ok(TickStatus::Success)
            };
        };
        match behavior {
            Behavior::Expr(expr) => match eval_expr(expr, self.blackboard.values()) {
                Ok(true) => Ok(TickStatus::Success),
                Ok(false) => Ok(TickStatus::Failure),
                Err(source) => Err(EngineError::Expression {
                    path: path.clone(),
                    source,
                }),
            },
            Behavior::Steps(steps) => {
                let cursor = self.cursors.entry(path.clone()).or_default();
                let step = &steps[cursor.step];
                let first_use = cursor.used == 0;
                cursor.used += 1;
                if cursor.used >= step.repeat && cursor.step + 1 < steps.len() {
                    cursor.step += 1;
                    cursor.used = 0;
                }
                if first_use {
                    for (key, value) in &step.set {
                        self.blackboard.set(self.tick, key, value.clone());
                    }
                }
                Ok(step.status)
            }
        }
    }

    /// Halts active children of `id` from index `from` on.
    fn halt_children(&mut self, id: usize, from: usize) {
        let children = self.nodes[id].children.clone();
        for &child in children.iter().skip(from) {
            self.halt(child);
        }
    }

    fn halt(&mut self, id: usize) {
        if !self.nodes[id].active {
            return;
        }
        self.halt_children(id, 0);
        self.nodes[id].active = false;
        self.emit(id, EventKind::Halted);
    }
}

fn expand<'m>(model: &'m BehaviorTreeModel, node: &'m TreeNode, nodes: &mut Vec<RNode<'m>>) -> usize {
    let id = nodes.len();
    nodes.push(RNode {
        node,
        children: Vec::new(),
        active: false,
        started_tick: 0,
        counter: 0,
        done: Vec::new(),
    });
    let children: Vec<usize> = if node.kind == NodeKind::SubTreeRef {
        let tree = model.tree(&node.ref_id).expect("validated subtree reference");
        vec![expand(model, &tree.root, nodes)]
    } else {
        node.children.iter().map(|c| expand(model, c, nodes)).collect()
    };
    nodes[id].children = children;
    id
}

/// Ticks until the root finishes or `max_ticks` runs out. On exhaustion the
/// tree is halted and the trace is flagged.
pub fn run(model: &BehaviorTreeModel, scenario: &ScenarioSpec) -> Result<ExecutionTrace, EngineError> {
    let mut engine = Engine::new(model, scenario)?;
    for _ in 0..scenario.max_ticks {
        let status = engine.tick_once()?;
        if status.is_terminal() {
            return Ok(engine.into_trace(status, false));
        }
    }
    engine.halt_all();
    Ok(engine.into_trace(TickStatus::Running, true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse, SourceFile};
    use TickStatus::*;

    fn model(text: &str) -> BehaviorTreeModel {
        parse(&SourceFile::new("t.btq", text)).unwrap_or_else(|d| panic!("{d:#?}"))
    }

    #[test]
    fn sequence_of_successes() {
        let m = model("BehaviorTree ID = \"T\"\n\t->\n\t\tAction A\n\t\tAction B\n");
        let trace = run(&m, &ScenarioSpec::new(1.0, 5)).unwrap();
        assert_eq!(trace.root_statuses, [Success]);
        assert_eq!(trace.ticks, 1);
    }

    #[test]
    fn sequence_memory() {
        let m = model("BehaviorTree ID = \"T\"\n\t->\n\t\tAction A\n\t\tAction B\n");
        let spec = ScenarioSpec::new(1.0, 10)
            .with_steps("/T/Sequence#1/A#1", vec![Step::new(Success, 1)])
            .with_steps(
                "/T/Sequence#1/B#1",
                vec![Step::new(Running, 2), Step::new(Success, 1)],
            );
        let trace = run(&m, &spec).unwrap();
        assert_eq!(trace.root_statuses, [Running, Running, Success]);
        let a_ticks = trace
            .events_for("/T/Sequence#1/A#1")
            .filter(|e| matches!(e.kind, EventKind::Ticked(_)))
            .count();
        assert_eq!(a_ticks, 1);
    }

    #[test]
    fn failing_root_leaf() {
        let m = model("BehaviorTree ID = \"T\"\n\tAction A\n");
        let spec = ScenarioSpec::new(1.0, 10).with_steps("/T/A#1", vec![Step::new(Failure, 1)]);
        let trace = run(&m, &spec).unwrap();
        assert_eq!((trace.final_status, trace.ticks), (Failure, 1));
    }

    #[test]
    fn exhaustion_is_flagged() {
        let m = model("BehaviorTree ID = \"T\"\n\tAction A\n");
        let spec = ScenarioSpec::new(1.0, 1).with_steps("/T/A#1", vec![Step::new(Running, 1)]);
        let trace = run(&m, &spec).unwrap();
        assert!(trace.exhausted);
        assert_eq!(trace.root_statuses.len(), 1);
        assert_eq!(trace.events.last().unwrap().kind, EventKind::Halted);
    }

    #[test]
    fn tick_after_terminal() {
        let m = model("BehaviorTree ID = \"T\"\n\tAction A\n");
        let spec = ScenarioSpec::new(1.0, 1);
        let mut engine = Engine::new(&m, &spec).unwrap();
        assert_eq!(engine.tick_once().unwrap(), Success);
        let err = engine.tick_once().unwrap_err();
        assert_eq!(err.code(), "E404");
        engine.reset();
        assert_eq!(engine.tick_once().unwrap(), Success);
    }

    #[test]
    fn strict_mode_needs_behaviors() {
        let m = model("BehaviorTree ID = \"T\"\n\tAction A\n");
        let mut spec = ScenarioSpec::new(1.0, 1);
        spec.strict = true;
        assert_eq!(Engine::new(&m, &spec).err().unwrap().code(), "E403");
    }

    #[test]
    fn repeat_counts_cycles() {
        let m = model("BehaviorTree ID = \"T\"\n\tRepeat num_cycles = \"3\"\n\t\tAction A\n");
        let trace = run(&m, &ScenarioSpec::new(1.0, 10)).unwrap();
        assert_eq!(trace.root_statuses, [Running, Running, Success]);
    }

    #[test]
    fn retry_gives_up() {
        let m = model("BehaviorTree ID = \"T\"\n\tRetryUntilSuccessful num_attempts = \"2\"\n\t\tAction A\n");
        let spec = ScenarioSpec::new(1.0, 10)
            .with_steps("/T/RetryUntilSuccessful#1/A#1", vec![Step::new(Failure, 1)]);
        let trace = run(&m, &spec).unwrap();
        assert_eq!(trace.root_statuses, [Running, Failure]);
    }

    #[test]
    fn parallel_thresholds() {
        let text = "BehaviorTree ID = \"T\"\n\t=> (success_count = \"2\")\n\t\tAction A\n\t\tAction B\n\t\tAction C\n";
        let m = model(text);
        let spec = ScenarioSpec::new(1.0, 10)
            .with_steps("/T/Parallel#1/A#1", vec![Step::new(Running, 2), Step::new(Success, 1)])
            .with_steps("/T/Parallel#1/B#1", vec![Step::new(Failure, 1)])
            .with_steps("/T/Parallel#1/C#1", vec![Step::new(Running, 5), Step::new(Success, 1)]);
        let trace = run(&m, &spec).unwrap();
        assert_eq!(trace.root_statuses, [Running, Running, Running, Running, Running, Success]);

        let spec = ScenarioSpec::new(1.0, 10)
            .with_steps("/T/Parallel#1/A#1", vec![Step::new(Failure, 1)])
            .with_steps("/T/Parallel#1/B#1", vec![Step::new(Failure, 1)])
            .with_steps("/T/Parallel#1/C#1", vec![Step::new(Running, 1)]);
        let trace = run(&m, &spec).unwrap();
        assert_eq!(trace.root_statuses, [Failure]);
        let c_events: Vec<_> = trace.events_for("/T/Parallel#1/C#1").map(|e| e.kind).collect();
        assert_eq!(c_events, [EventKind::Started, EventKind::Ticked(Running), EventKind::Halted]);
    }

    #[test]
    fn expression_leaves_and_writes() {
        let text = "BehaviorTree ID = \"T\"\n\t->\n\t\tAction Drain\n\t\tCondition Low\n";
        let m = model(text);
        let spec = ScenarioSpec::new(1.0, 10)
            .with_value("battery_pct", 80.0)
            .with_steps(
                "/T/Sequence#1/Drain#1",
                vec![Step::new(Success, 1).setting("battery_pct", 10.0)],
            )
            .with_expr("/T/Sequence#1/Low#1", "battery_pct < 20");
        let trace = run(&m, &spec).unwrap();
        assert_eq!(trace.final_status, Success);
        assert_eq!(trace.blackboard_log.len(), 1);
        assert_eq!(trace.blackboard_log[0].tick, 1);

        let spec = ScenarioSpec::new(1.0, 10).with_expr("/T/Sequence#1/Low#1", "missing < 20");
        let err = run(&m, &spec).unwrap_err();
        assert_eq!(err.code(), "E302");
    }

    #[test]
    fn keep_running_until_failure() {
        let m = model("BehaviorTree ID = \"T\"\n\tKeepRunningUntilFailure\n\t\tAction A\n");
        let spec = ScenarioSpec::new(1.0, 10).with_steps(
            "/T/KeepRunningUntilFailure#1/A#1",
            vec![Step::new(Success, 2), Step::new(Failure, 1)],
        );
        let trace = run(&m, &spec).unwrap();
        assert_eq!(trace.root_statuses, [Running, Running, Failure]);
    }

    #[test]
    fn trace_json_lines() {
        let m = model("BehaviorTree ID = \"T\"\n\tAction A\n");
        let trace = run(&m, &ScenarioSpec::new(1.0, 1)).unwrap();
        let lines = trace.to_json_lines(1);
        let first = lines.lines().next().unwrap();
        assert_eq!(first, r#"{"run":1,"tick":1,"node":"/T/A#1","event":"started"}"#);
        assert!(lines.contains(r#""event":"finished","status":"SUCCESS""#));
    }
}
