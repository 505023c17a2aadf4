//! A deliberately naive reference interpreter: each node owns its state and
//! children, subtrees are cloned in place, and every rule is spelled out
//! case by case. It shares only the model types and the expression evaluator
//! with the library.

use std::collections::{BTreeMap, HashMap};

use btq::condexpr::{eval_expr, ConditionExpr, Value};
use btq::engine::{Behavior, ScenarioSpec, TickStatus};
use btq::model::{BehaviorTreeModel, NodeKind, TreeNode};

use TickStatus::{Failure as F, Running as R, Success as S};

struct Node {
    kind: NodeKind,
    path: String,
    limit: usize,
    kids: Vec<Node>,
    on: bool,
    since: u64,
    at: usize,
    reps: usize,
    outcome: Vec<Option<TickStatus>>,
}

type Checks = Vec<(Option<ConditionExpr>, Option<ConditionExpr>)>;

struct World {
    now: u64,
    tps: f64,
    tapes: HashMap<String, Vec<TickStatus>>,
    heads: HashMap<String, usize>,
    checks: HashMap<String, Checks>,
    halts: Vec<(u64, String)>,
}

fn build(model: &BehaviorTreeModel, n: &TreeNode) -> Node {
    let kids = if n.kind == NodeKind::SubTreeRef {
        vec![build(model, &model.tree(&n.ref_id).unwrap().root)]
    } else {
        n.children.iter().map(|c| build(model, c)).collect()
    };
    Node {
        kind: n.kind,
        path: n.node_path.clone(),
        limit: n.count().unwrap_or(1) as usize,
        kids,
        on: false,
        since: 0,
        at: 0,
        reps: 0,
        outcome: Vec::new(),
    }
}

impl World {
    fn leaf(&mut self, path: &str) -> TickStatus {
        let Some(tape) = self.tapes.get(path) else { return S };
        let head = self.heads.entry(path.to_string()).or_insert(0);
        let s = tape[(*head).min(tape.len() - 1)];
        *head += 1;
        s
    }

    fn judge(&self, path: &str, raw: TickStatus, since: u64) -> TickStatus {
        let Some(checks) = self.checks.get(path) else { return raw };
        let ticks = self.now - since + 1;
        let mut scope: BTreeMap<String, Value> = BTreeMap::new();
        scope.insert("elapsed_ticks".into(), Value::Number(ticks as f64));
        scope.insert("elapsed_sec".into(), Value::Number(ticks as f64 / self.tps));
        scope.insert(
            "status".into(),
            Value::Text(if raw == S { "SUCCESS" } else { "FAILURE" }.into()),
        );
        let holds = |e: &Option<ConditionExpr>| e.as_ref().is_some_and(|e| eval_expr(e, &scope) == Ok(true));
        let mut forced_fail = false;
        let mut forced_ok = false;
        for (fail, ok) in checks {
            if holds(fail) {
                forced_fail = true;
            } else if holds(ok) {
                forced_ok = true;
            }
        }
        if forced_fail {
            F
        } else if forced_ok {
            S
        } else {
            raw
        }
    }
}

impl Node {
    fn halt(&mut self, w: &mut World) {
        if self.on {
            for k in &mut self.kids {
                k.halt(w);
            }
            self.on = false;
            w.halts.push((w.now, self.path.clone()));
        }
    }

    fn tick(&mut self, w: &mut World) -> TickStatus {
        if !self.on {
            self.on = true;
            self.since = w.now;
            self.at = 0;
            self.reps = 0;
            self.outcome = vec![None; self.kids.len()];
        }
        let raw = match self.kind {
            NodeKind::Action | NodeKind::Condition => w.leaf(&self.path),
            NodeKind::Sequence => {
                let mut res = S;
                while self.at < self.kids.len() {
                    let r = self.kids[self.at].tick(w);
                    if r == S {
                        self.at += 1;
                    } else {
                        res = r;
                        break;
                    }
                }
                res
            }
            NodeKind::Fallback => {
                let mut res = F;
                while self.at < self.kids.len() {
                    let r = self.kids[self.at].tick(w);
                    if r == F {
                        self.at += 1;
                    } else {
                        res = r;
                        break;
                    }
                }
                res
            }
            NodeKind::ReactiveSequence => {
                let mut res = S;
                for i in 0..self.kids.len() {
                    let r = self.kids[i].tick(w);
                    if r == R {
                        for later in &mut self.kids[i + 1..] {
                            later.halt(w);
                        }
                        res = R;
                        break;
                    }
                    if r == F {
                        res = F;
                        break;
                    }
                }
                res
            }
            NodeKind::ReactiveFallback => {
                let mut res = F;
                for i in 0..self.kids.len() {
                    let r = self.kids[i].tick(w);
                    if r == R {
                        for later in &mut self.kids[i + 1..] {
                            later.halt(w);
                        }
                        res = R;
                        break;
                    }
                    if r == S {
                        res = S;
                        break;
                    }
                }
                res
            }
            NodeKind::Parallel => {
                for i in 0..self.kids.len() {
                    if self.outcome[i].is_none() {
                        let r = self.kids[i].tick(w);
                        if r != R {
                            self.outcome[i] = Some(r);
                        }
                    }
                }
                let ok = self.outcome.iter().filter(|o| **o == Some(S)).count();
                let bad = self.outcome.iter().filter(|o| **o == Some(F)).count();
                if ok >= self.limit {
                    S
                } else if bad + self.limit > self.kids.len() {
                    F
                } else {
                    R
                }
            }
            NodeKind::Inverter => match self.kids[0].tick(w) {
                S => F,
                F => S,
                R => R,
            },
            NodeKind::ForceSuccess => match self.kids[0].tick(w) {
                R => R,
                _ => S,
            },
            NodeKind::ForceFailure => match self.kids[0].tick(w) {
                R => R,
                _ => F,
            },
            NodeKind::KeepRunningUntilFailure => match self.kids[0].tick(w) {
                F => F,
                _ => R,
            },
            NodeKind::Repeat => match self.kids[0].tick(w) {
                S => {
                    self.reps += 1;
                    if self.reps == self.limit { S } else { R }
                }
                other => other,
            },
            NodeKind::RetryUntilSuccessful => match self.kids[0].tick(w) {
                F => {
                    self.reps += 1;
                    if self.reps == self.limit { F } else { R }
                }
                other => other,
            },
            NodeKind::SubTreeRef => self.kids[0].tick(w),
        };
        if raw == R {
            return R;
        }
        let done = w.judge(&self.path, raw, self.since);
        for k in &mut self.kids {
            k.halt(w);
        }
        self.on = false;
        done
    }
}

/// Root status after every tick, stopping at the first terminal status or
/// after `max_ticks`.
pub fn reference_statuses(model: &BehaviorTreeModel, scenario: &ScenarioSpec) -> Vec<TickStatus> {
    reference_run(model, scenario).0
}

/// Root statuses plus every (tick, node path) halt, in order. A run that
/// hits `max_ticks` ends with the whole tree halted.
pub fn reference_run(model: &BehaviorTreeModel, scenario: &ScenarioSpec) -> (Vec<TickStatus>, Vec<(u64, String)>) {
    let mut tapes = HashMap::new();
    for (path, behavior) in &scenario.leaf_behaviors {
        let Behavior::Steps(steps) = behavior else {
            panic!("the reference interpreter only replays scripted steps");
        };
        let tape = steps
            .iter()
            .flat_map(|s| std::iter::repeat_n(s.status, s.repeat as usize))
            .collect();
        tapes.insert(path.clone(), tape);
    }
    let mut checks: HashMap<String, Checks> = HashMap::new();
    for node in model.nodes() {
        for id in &node.satisfies {
            let req = model.requirements.get(id).unwrap();
            checks.entry(node.node_path.clone()).or_default().push((
                req.failure_if.as_ref().map(|c| c.expr.clone()),
                req.success_if.as_ref().map(|c| c.expr.clone()),
            ));
        }
    }
    let mut world = World {
        now: 0,
        tps: scenario.ticks_per_second,
        tapes,
        heads: HashMap::new(),
        checks,
        halts: Vec::new(),
    };
    let mut root = build(model, &model.main_tree().unwrap().root);
    let mut out = Vec::new();
    for t in 1..=scenario.max_ticks {
        world.now = t;
        let s = root.tick(&mut world);
        out.push(s);
        if s != R {
            return (out, world.halts);
        }
    }
    root.halt(&mut world);
    (out, world.halts)
}
