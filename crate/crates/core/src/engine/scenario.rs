//! Scripted scenarios (`.scn.json`) that stand in for real leaf behavior.
//!
//! ```json
//! {
//!   "ticks_per_second": 1,
//!   "max_ticks": 200,
//!   "strict": true,
//!   "blackboard_init": { "battery_pct": 80 },
//!   "nodes": {
//!     "/MainTree/.../MoveBase#1": { "steps": [ { "status": "RUNNING", "repeat": 4 },
//!                                             { "status": "SUCCESS", "set": { "at_station": true } } ] },
//!     "/MainTree/.../BatteryLow#1": { "expr": "battery_pct < 20" }
//!   }
//! }
//! ```

use std::collections::{BTreeMap, HashSet};

use serde::Deserialize;

use super::TickStatus;
use crate::condexpr::{parse_expr, ConditionExpr, Value};
use crate::diagnostic::{Diagnostic, Location};
use crate::model::{BehaviorTreeModel, NodeKind, TreeNode};

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub status: TickStatus,
    pub repeat: u32,
    /// Blackboard writes applied when the step is first consumed.
    pub set: BTreeMap<String, Value>,
}

impl Step {
    pub fn new(status: TickStatus, repeat: u32) -> Self {
        Self {
            status,
            repeat,
            set: BTreeMap::new(),
        }
    }

    pub fn setting(mut self, key: impl Into<String>, value: impl Into<Value>) -> Self {
        self.set.insert(key.into(), value.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Behavior {
    /// Consumed one tick at a time; the last step repeats forever.
    Steps(Vec<Step>),
    /// Condition leaf evaluated against the blackboard every tick.
    Expr(ConditionExpr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub ticks_per_second: f64,
    pub blackboard_init: BTreeMap<String, Value>,
    pub leaf_behaviors: BTreeMap<String, Behavior>,
    pub max_ticks: u64,
    /// When false, leaves without a behavior succeed immediately.
    pub strict: bool,
}

impl ScenarioSpec {
    pub fn new(ticks_per_second: f64, max_ticks: u64) -> Self {
        Self {
            ticks_per_second,
            blackboard_init: BTreeMap::new(),
            leaf_behaviors: BTreeMap::new(),
            max_ticks,
            strict: false,
        }
    }

    pub fn with_steps(mut self, path: impl Into<String>, steps: Vec<Step>) -> Self {
        self.leaf_behaviors.insert(path.into(), Behavior::Steps(steps));
        self
    }

    pub fn with_expr(mut self, path: impl Into<String>, expr: &str) -> Self {
        let expr = parse_expr(expr).expect("valid expression");
        self.leaf_behaviors.insert(path.into(), Behavior::Expr(expr));
        self
    }

    pub fn with_value(mut self, key: impl Into<String>, value: impl Into<Value>) -> Self {
        self.blackboard_init.insert(key.into(), value.into());
        self
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    ticks_per_second: f64,
    #[serde(default)]
    blackboard_init: BTreeMap<String, Value>,
    max_ticks: u64,
    #[serde(default = "default_strict")]
    strict: bool,
    #[serde(default)]
    nodes: BTreeMap<String, BehaviorDoc>,
}

fn default_strict() -> bool {
    true
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BehaviorDoc {
    steps: Option<Vec<StepDoc>>,
    expr: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StepDoc {
    status: TickStatus,
    #[serde(default = "default_repeat")]
    repeat: u32,
    #[serde(default)]
    set: BTreeMap<String, Value>,
}

fn default_repeat() -> u32 {
    1
}

/// Leaves that need a behavior: Action and Condition nodes reachable from
/// the main tree (following subtree references), each path once.
pub fn behavior_leaves(model: &BehaviorTreeModel) -> Vec<&TreeNode> {
    let mut out = Vec::new();
    let mut seen_trees = HashSet::new();
    let mut pending = vec![model.main_tree_id.as_str()];
    while let Some(id) = pending.pop() {
        if !seen_trees.insert(id) {
            continue;
        }
        let Some(tree) = model.tree(id) else { continue };
        for node in tree.root.walk() {
            match node.kind {
                NodeKind::Action | NodeKind::Condition => out.push(node),
                NodeKind::SubTreeRef => pending.push(&node.ref_id),
                _ => {}
            }
        }
    }
    out
}

/// Parses a scenario document and checks it against the model's leaves.
pub fn load_scenario(text: &str, model: &BehaviorTreeModel) -> Result<ScenarioSpec, Vec<Diagnostic>> {
    load_scenario_named("<scenario>", text, model)
}

pub fn load_scenario_named(
    file: &str,
    text: &str,
    model: &BehaviorTreeModel,
) -> Result<ScenarioSpec, Vec<Diagnostic>> {
    load_scenario_with(file, text, model, None)
}

/// Like [`load_scenario_named`], with `strict` overriding the document's flag.
pub fn load_scenario_with(
    file: &str,
    text: &str,
    model: &BehaviorTreeModel,
    strict: Option<bool>,
) -> Result<ScenarioSpec, Vec<Diagnostic>> {
    let at = |line: usize, column: usize| Location::new(file, line.max(1), column.max(1));
    let doc: ScenarioDoc = serde_json::from_str(text).map_err(|e| {
        vec![Diagnostic::error(
            "E402",
            format!("malformed scenario: {e}"),
            at(e.line(), e.column()),
        )]
    })?;

    let strict = strict.unwrap_or(doc.strict);
    let mut diags = Vec::new();
    let mut malformed = |message: String| diags.push(Diagnostic::error("E402", message, at(1, 1)));
    if !(doc.ticks_per_second.is_finite() && doc.ticks_per_second > 0.0) {
        malformed(format!("`ticks_per_second` must be positive, found {}", doc.ticks_per_second));
    }
    if doc.max_ticks == 0 {
        malformed("`max_ticks` must be positive".into());
    }

    let leaves = behavior_leaves(model);
    let mut behaviors = BTreeMap::new();
    for (path, behavior) in doc.nodes {
        let Some(leaf) = leaves.iter().find(|n| n.node_path == path) else {
            let detail = match model.find_node(&path) {
                Some(node) => format!("`{path}` is a {} node, not a scriptable leaf", node.kind),
                None => format!("unknown node path `{path}`"),
            };
            diags.push(Diagnostic::error("E401", detail, at(1, 1)));
            continue;
        };
        match (behavior.steps, behavior.expr) {
            (Some(steps), None) => {
                if steps.is_empty() {
                    diags.push(Diagnostic::error("E402", format!("`{path}`: `steps` is empty"), at(1, 1)));
                    continue;
                }
                let mut converted = Vec::with_capacity(steps.len());
                for step in steps {
                    if step.repeat == 0 {
                        diags.push(Diagnostic::error(
                            "E402",
                            format!("`{path}`: `repeat` must be positive"),
                            at(1, 1),
                        ));
                    }
                    if leaf.kind == NodeKind::Condition && step.status == TickStatus::Running {
                        diags.push(Diagnostic::error(
                            "E402",
                            format!("`{path}`: condition leaves cannot return RUNNING"),
                            at(1, 1),
                        ));
                    }
                    converted.push(Step {
                        status: step.status,
                        repeat: step.repeat,
                        set: step.set,
                    });
                }
                behaviors.insert(path, Behavior::Steps(converted));
            }
            (None, Some(expr)) => {
                if leaf.kind != NodeKind::Condition {
                    diags.push(Diagnostic::error(
                        "E402",
                        format!("`{path}`: `expr` is only valid for Condition leaves"),
                        at(1, 1),
                    ));
                    continue;
                }
                match parse_expr(&expr) {
                    Ok(parsed) => {
                        behaviors.insert(path, Behavior::Expr(parsed));
                    }
                    Err(e) => diags.push(Diagnostic::error(
                        e.code(),
                        format!("`{path}`: in `{expr}`: {e}"),
                        at(1, 1),
                    )),
                }
            }
            _ => diags.push(Diagnostic::error(
                "E402",
                format!("`{path}`: exactly one of `steps` or `expr` is required"),
                at(1, 1),
            )),
        }
    }

    if strict {
        for leaf in &leaves {
            if !behaviors.contains_key(&leaf.node_path) && !diags.iter().any(|d| d.message.contains(&leaf.node_path)) {
                diags.push(Diagnostic::error(
                    "E403",
                    format!("no behavior for leaf `{}` in strict mode", leaf.node_path),
                    at(1, 1),
                ));
            }
        }
    }

    if !diags.is_empty() {
        return Err(diags);
    }
    Ok(ScenarioSpec {
        ticks_per_second: doc.ticks_per_second,
        blackboard_init: doc.blackboard_init,
        leaf_behaviors: behaviors,
        max_ticks: doc.max_ticks,
        strict,
    })
}
