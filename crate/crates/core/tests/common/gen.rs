//! Random generators for valid models and executable (model, scenario) pairs.

use btq::diagnostic::Location;
use btq::engine::{ScenarioSpec, Step, TickStatus};
use btq::model::{
    Arity, BehaviorTree, BehaviorTreeModel, NodeKind, Quality, QualityRequirement,
    RequirementRegistry, TreeNode,
};
use rand::seq::SliceRandom;
use rand::Rng;

const IDENTS: &[&str] = &["Go", "Pick", "Place", "MoveBase", "Charge", "Scan", "Dock", "look_2", "A1", "Battery_Low"];
const NAMES: &[&str] = &["BatteryCheck", "Solid Station", "move-tubes", "ünï cödé", "x", "Tab\there", "a \"quoted\" name"];
const PARAM_KEYS: &[&str] = &["goal", "speed", "target_pose"];
const TEXT: &[&str] = &["30 sec", "3%", "back\\slash", "\"q\"", "line\nbreak", "<tag> & 'apos'", "", "plain"];
const EXPRS: &[&str] = &[
    "elapsed_sec > 30",
    "battery_pct < 3",
    "!(a == b) && c != 'x'",
    "status == \"FAILURE\"",
    "x >= -2.5 || y",
    "true",
];

fn qualities() -> Vec<Quality> {
    vec![
        Quality::new("performance"),
        Quality::with_facet("performance", "time-behavior"),
        Quality::with_facet("performance", "resource-utilization"),
        Quality::with_facet("security", "confidentiality"),
        Quality::new("safety"),
    ]
}

fn pick<'a, R: Rng>(rng: &mut R, pool: &[&'a str]) -> &'a str {
    pool.choose(rng).unwrap()
}

fn random_text<R: Rng>(rng: &mut R) -> String {
    let n = rng.gen_range(1..=3);
    (0..n).map(|_| pick(rng, TEXT)).collect::<Vec<_>>().join(" ")
}

const COMPOSITES: &[NodeKind] = &[
    NodeKind::Sequence,
    NodeKind::Fallback,
    NodeKind::Parallel,
    NodeKind::ReactiveSequence,
    NodeKind::ReactiveFallback,
];
const DECORATORS: &[NodeKind] = &[
    NodeKind::Inverter,
    NodeKind::Repeat,
    NodeKind::RetryUntilSuccessful,
    NodeKind::ForceSuccess,
    NodeKind::ForceFailure,
    NodeKind::KeepRunningUntilFailure,
];

/// Structural skeleton shared by both generators. `subtrees` lists tree ids
/// a leaf may reference.
fn skeleton<R: Rng>(
    rng: &mut R,
    budget: &mut usize,
    depth: usize,
    max_depth: usize,
    nest_p: f64,
    subtrees: &[String],
) -> TreeNode {
    *budget -= 1;
    let nest = *budget >= 1 && depth < max_depth && rng.gen_bool(nest_p);
    let mut node = if !nest {
        match rng.gen_range(0..4) {
            0 if !subtrees.is_empty() => TreeNode::subtree(subtrees.choose(rng).unwrap().clone()),
            0 | 1 if rng.gen_bool(0.5) => TreeNode::condition(pick(rng, IDENTS)),
            _ => TreeNode::action(pick(rng, IDENTS)),
        }
    } else if rng.gen_bool(0.5) {
        let kind = *COMPOSITES.choose(rng).unwrap();
        let want = rng.gen_range(1..=(*budget).min(3));
        let mut children = Vec::new();
        for _ in 0..want {
            if *budget == 0 {
                break;
            }
            children.push(skeleton(rng, budget, depth + 1, max_depth, nest_p, subtrees));
        }
        TreeNode::new(kind).with_children(children)
    } else {
        let kind = *DECORATORS.choose(rng).unwrap();
        let child = skeleton(rng, budget, depth + 1, max_depth, nest_p, subtrees);
        TreeNode::new(kind).with_children(vec![child])
    };
    if let Some(param) = node.kind.count_param() {
        let value = match node.kind {
            NodeKind::Parallel => rng.gen_range(1..=node.children.len()),
            _ => rng.gen_range(1..=4),
        };
        node = node.with_param(param, value.to_string());
    }
    node
}

/// Visits every node in pre-order with its running index.
fn visit(node: &mut TreeNode, index: &mut usize, f: &mut impl FnMut(usize, &mut TreeNode)) {
    f(*index, node);
    *index += 1;
    for c in &mut node.children {
        visit(c, index, f);
    }
}

fn for_each_node(roots: &mut [TreeNode], mut f: impl FnMut(usize, &mut TreeNode)) -> usize {
    let mut index = 0;
    for root in roots {
        visit(root, &mut index, &mut f);
    }
    index
}

/// A valid model with at most `max_nodes` nodes over one to three trees,
/// exercising names, parameters, qualities, requirements and constraints.
pub fn valid_model<R: Rng>(rng: &mut R, max_nodes: usize) -> BehaviorTreeModel {
    let n_trees = rng.gen_range(1..=3usize).min(max_nodes);
    let ids: Vec<String> = (0..n_trees).map(|i| if i == 0 { "MainTree".into() } else { format!("Sub{i}") }).collect();
    let mut remaining = max_nodes;
    let mut roots = Vec::new();
    for i in 0..n_trees {
        let reserve = n_trees - i - 1;
        let mut budget = rng.gen_range(1..=remaining - reserve);
        remaining -= budget;
        roots.push(skeleton(rng, &mut budget, 1, 5, 0.6, &ids[i + 1..]));
    }

    let pool = qualities();
    let mut used_qualities: Vec<Quality> = Vec::new();
    let total = for_each_node(&mut roots, |_, node| {
        if rng.gen_bool(0.3) {
            node.display_name = Some(pick(rng, NAMES).to_string());
        }
        if node.kind.arity() == Arity::Leaf && node.kind != NodeKind::SubTreeRef && rng.gen_bool(0.3) {
            node.params.insert(pick(rng, PARAM_KEYS).into(), random_text(rng));
        }
        if rng.gen_bool(0.3) {
            let mut qs = pool.clone();
            qs.shuffle(rng);
            for q in qs.into_iter().take(rng.gen_range(1..=2)) {
                used_qualities.push(q.clone());
                node.satisfices.push(q);
            }
        }
    });

    let mut registry = RequirementRegistry::new();
    let mut links: Vec<(usize, String)> = Vec::new();
    for i in 0..rng.gen_range(0..=4) {
        let mut req = QualityRequirement::new(format!("rq{i}"), format!("req {}", random_text(rng)));
        if !used_qualities.is_empty() && rng.gen_bool(0.6) {
            req = req.with_quality(used_qualities.choose(rng).unwrap().clone());
        }
        if rng.gen_bool(0.4) {
            req = req.with_success_if(pick(rng, EXPRS)).unwrap();
        }
        if rng.gen_bool(0.4) {
            req = req.with_failure_if(pick(rng, EXPRS)).unwrap();
        }
        for _ in 0..rng.gen_range(1..=2) {
            links.push((rng.gen_range(0..total), req.id.clone()));
        }
        registry.declare(req, Location::synthetic());
    }
    for_each_node(&mut roots, |i, node| {
        for (_, id) in links.iter().filter(|(at, _)| *at == i) {
            if !node.satisfies.contains(id) {
                node.satisfies.push(id.clone());
            }
        }
    });

    let trees = ids
        .into_iter()
        .zip(roots)
        .map(|(id, root)| BehaviorTree {
            id,
            root,
            location: Location::synthetic(),
        })
        .collect();
    BehaviorTreeModel::new(trees, registry)
}

/// Actions run for a while more often than not, so multi-tick behavior
/// (memory, interruption, halting) is well covered.
fn random_status<R: Rng>(rng: &mut R, allow_running: bool) -> TickStatus {
    let roll = rng.gen_range(0..10);
    match roll {
        0..=3 if allow_running => TickStatus::Running,
        0..=6 => TickStatus::Success,
        _ => TickStatus::Failure,
    }
}

const MONITOR_EXPRS: &[(Option<&str>, Option<&str>)] = &[
    (Some("elapsed_ticks > 2"), None),
    (None, Some("status == \"FAILURE\"")),
    (Some("elapsed_sec >= 3"), Some("elapsed_ticks == 1")),
    (None, Some("elapsed_ticks > 1")),
    (None, None),
];

/// A single-tree model (at most `max_nodes` nodes, depth at most
/// `max_depth`) plus a scenario scripting every leaf.
pub fn engine_case<R: Rng>(rng: &mut R, max_nodes: usize, max_depth: usize, max_ticks: u64) -> (BehaviorTreeModel, ScenarioSpec) {
    let mut budget = rng.gen_range(max_nodes.min(3)..=max_nodes);
    let mut root = skeleton(rng, &mut budget, 1, max_depth, 0.85, &[]);
    let mut registry = RequirementRegistry::new();
    for_each_node(std::slice::from_mut(&mut root), |i, node| {
        if rng.gen_bool(0.25) {
            let (fail, succ) = *MONITOR_EXPRS.choose(rng).unwrap();
            let mut req = QualityRequirement::new(format!("q{i}"), "generated");
            if let Some(f) = fail {
                req = req.with_failure_if(f).unwrap();
            }
            if let Some(s) = succ {
                req = req.with_success_if(s).unwrap();
            }
            node.satisfies.push(req.id.clone());
            registry.declare(req, Location::synthetic());
        }
    });

    let model = BehaviorTreeModel::new(
        vec![BehaviorTree {
            id: "T".into(),
            root,
            location: Location::synthetic(),
        }],
        registry,
    );
    let mut spec = ScenarioSpec::new(rng.gen_range(1..=4) as f64, max_ticks);
    spec.strict = true;
    let leaves: Vec<(String, NodeKind)> = model
        .nodes()
        .filter(|n| n.is_leaf())
        .map(|n| (n.node_path.clone(), n.kind))
        .collect();
    for (path, kind) in leaves {
        let steps = (0..rng.gen_range(1..=3))
            .map(|_| Step::new(random_status(rng, kind == NodeKind::Action), rng.gen_range(1..=4)))
            .collect();
        spec = spec.with_steps(path, steps);
    }
    (model, spec)
}
