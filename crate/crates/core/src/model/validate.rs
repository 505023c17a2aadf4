use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::{Arity, BehaviorTreeModel, NodeKind, TreeNode};
use crate::diagnostic::{sort_diagnostics, Diagnostic, Location};

/// Checks every structural and registry invariant of the model.
///
/// Returns an empty list iff the model is valid. Ordering is by
/// (file, line, column, code).
pub fn validate(model: &BehaviorTreeModel) -> Vec<Diagnostic> {
    let mut out = Vec::new();

    check_trees(model, &mut out);
    for node in model.nodes() {
        check_node(model, node, &mut out);
    }
    check_requirements(model, &mut out);
    check_subtree_graph(model, &mut out);

    sort_diagnostics(&mut out);
    out
}

fn check_trees(model: &BehaviorTreeModel, out: &mut Vec<Diagnostic>) {
    let mut seen = HashSet::new();
    for tree in &model.trees {
        if !seen.insert(tree.id.as_str()) {
            out.push(Diagnostic::error(
                "E014",
                format!("duplicate tree id `{}`", tree.id),
                tree.location.clone(),
            ));
        }
        if tree.id.is_empty() || tree.id.contains(['/', '#']) || tree.id.contains(char::is_whitespace) {
            out.push(Diagnostic::error(
                "E018",
                format!("invalid tree id `{}`", tree.id),
                tree.location.clone(),
            ));
        }
    }
    if model.main_tree().is_none() {
        let location = model
            .trees
            .first()
            .map(|t| t.location.clone())
            .unwrap_or_else(Location::synthetic);
        out.push(Diagnostic::error(
            "E001",
            format!("main tree `{}` is not defined", model.main_tree_id),
            location,
        ));
    }
}

fn check_node(model: &BehaviorTreeModel, node: &TreeNode, out: &mut Vec<Diagnostic>) {
    let loc = || node.location.clone();
    let n = node.children.len();
    match node.kind.arity() {
        Arity::Composite if n == 0 => out.push(Diagnostic::error(
            "E002",
            format!("{} requires at least one child", node.kind),
            loc(),
        )),
        Arity::Decorator if n != 1 => out.push(Diagnostic::error(
            "E003",
            format!("decorator must have exactly one child ({} has {n})", node.kind),
            loc(),
        )),
        Arity::Leaf if n != 0 => out.push(Diagnostic::error(
            "E004",
            format!("{} `{}` is a leaf and cannot have children", node.kind, node.ref_id),
            loc(),
        )),
        _ => {}
    }

    if node.is_leaf() && node.ref_id.is_empty() {
        out.push(Diagnostic::error(
            "E017",
            format!("{} requires an identifier", node.kind),
            loc(),
        ));
    }
    if let Some(name) = &node.display_name {
        if name.is_empty() || name.contains(['/', '#']) {
            out.push(Diagnostic::error(
                "E018",
                format!("invalid node name `{name}`: must be non-empty without `/` or `#`"),
                loc(),
            ));
        }
    }

    if let Some(key) = node.kind.count_param() {
        match (node.params.get(key), node.count()) {
            (None, _) => out.push(Diagnostic::error(
                "E005",
                format!("{} requires parameter `{key}`", node.kind),
                loc(),
            )),
            (Some(raw), None) | (Some(raw), Some(0)) => out.push(Diagnostic::error(
                "E005",
                format!("`{key}` must be a positive integer, found `{raw}`"),
                loc(),
            )),
            (Some(_), Some(count)) => {
                if node.kind == NodeKind::Parallel && count as usize > n && n > 0 {
                    out.push(Diagnostic::error(
                        "E005",
                        format!("`success_count` {count} exceeds child count {n}"),
                        loc(),
                    ));
                }
            }
        }
    }
    if node.kind.arity() != Arity::Leaf {
        for key in node.params.keys() {
            if Some(key.as_str()) != node.kind.count_param() {
                out.push(Diagnostic::error(
                    "E015",
                    format!("unknown parameter `{key}` for {}", node.kind),
                    loc(),
                ));
            }
        }
    }

    for quality in &node.satisfices {
        if quality.name.trim().is_empty() {
            out.push(Diagnostic::error("E012", "quality name is empty", loc()));
        }
    }
    for id in &node.satisfies {
        if !model.requirements.contains(id) {
            out.push(Diagnostic::error(
                "E006",
                format!("requirement `{id}` is not declared"),
                loc(),
            ));
        }
    }
    if node.kind == NodeKind::SubTreeRef
        && !node.ref_id.is_empty()
        && model.tree(&node.ref_id).is_none()
    {
        out.push(Diagnostic::error(
            "E008",
            format!("subtree `{}` is not defined", node.ref_id),
            loc(),
        ));
    }
}

fn check_requirements(model: &BehaviorTreeModel, out: &mut Vec<Diagnostic>) {
    let satisfied: HashSet<&str> = model
        .nodes()
        .flat_map(|n| n.satisfies.iter().map(String::as_str))
        .collect();
    let mut first: BTreeMap<&str, &super::RequirementDecl> = BTreeMap::new();

    for decl in model.requirements.declarations() {
        let req = &decl.requirement;
        let loc = || decl.location.clone();
        if req.id.is_empty() || req.id.contains(char::is_whitespace) {
            out.push(Diagnostic::error(
                "E011",
                format!("invalid requirement id `{}`", req.id),
                loc(),
            ));
        }
        if req.description.trim().is_empty() {
            out.push(Diagnostic::error(
                "E013",
                format!("requirement `{}` has an empty description", req.id),
                loc(),
            ));
        }
        if let Some(quality) = &req.quality {
            if !model.qualities.contains_key(&quality.name) {
                out.push(Diagnostic::error(
                    "E010",
                    format!(
                        "requirement `{}` refers to quality `{}` which no node satisfices",
                        req.id, quality.name
                    ),
                    loc(),
                ));
            }
        }

        match first.get(req.id.as_str()) {
            None => {
                first.insert(&req.id, decl);
                if !satisfied.contains(req.id.as_str()) {
                    out.push(Diagnostic::error(
                        "E016",
                        format!("requirement `{}` is not satisfied by any node", req.id),
                        loc(),
                    ));
                }
            }
            Some(original) => {
                if !original.requirement.is_consistent_with(req) {
                    out.push(Diagnostic::error(
                        "E007",
                        format!(
                            "cross-cutting requirement `{}` redeclared with a different description or constraint (first declared at {})",
                            req.id, original.location
                        ),
                        loc(),
                    ));
                }
            }
        }
    }
}

fn check_subtree_graph(model: &BehaviorTreeModel, out: &mut Vec<Diagnostic>) {
    let edges: BTreeMap<&str, Vec<&TreeNode>> = model
        .trees
        .iter()
        .map(|t| {
            let refs = t
                .root
                .walk()
                .into_iter()
                .filter(|n| n.kind == NodeKind::SubTreeRef)
                .collect();
            (t.id.as_str(), refs)
        })
        .collect();

    // Depth-first search for back edges; each cycle is reported once at the
    // reference that closes it.
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Active,
        Done,
    }
    fn visit<'a>(
        id: &'a str,
        edges: &BTreeMap<&'a str, Vec<&'a TreeNode>>,
        marks: &mut BTreeMap<&'a str, Mark>,
        out: &mut Vec<Diagnostic>,
    ) {
        marks.insert(id, Mark::Active);
        for node in edges.get(id).into_iter().flatten() {
            let target = node.ref_id.as_str();
            if !edges.contains_key(target) {
                continue;
            }
            match marks.get(target) {
                Some(Mark::Active) => out.push(Diagnostic::error(
                    "E009",
                    format!("subtree reference `{target}` from `{id}` creates a cycle"),
                    node.location.clone(),
                )),
                Some(Mark::Done) => {}
                None => visit(target, edges, marks, out),
            }
        }
        marks.insert(id, Mark::Done);
    }

    let mut marks = BTreeMap::new();
    for tree in &model.trees {
        if !marks.contains_key(tree.id.as_str()) {
            visit(&tree.id, &edges, &mut marks, out);
        }
    }

    // Reachability from the main tree.
    let mut reachable = BTreeSet::new();
    let mut stack = vec![model.main_tree_id.as_str()];
    while let Some(id) = stack.pop() {
        if reachable.insert(id) {
            for node in edges.get(id).into_iter().flatten() {
                stack.push(&node.ref_id);
            }
        }
    }
    for tree in &model.trees {
        if !reachable.contains(tree.id.as_str()) {
            out.push(Diagnostic::warning(
                "W001",
                format!("tree `{}` is not reachable from main tree `{}`", tree.id, model.main_tree_id),
                tree.location.clone(),
            ));
        }
    }
}
