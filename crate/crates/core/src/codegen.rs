//! BehaviorTree.CPP (format 4) XML generation.
//!
//! Qualities and requirements have no native XML notation, so they travel in
//! the node's `_description` attribute, e.g.
//! `satisfices performance; FailureIf: [rq1] ... at most 30 sec`.
//! Hard constraints are additionally emitted as `_failureIf` / `_successIf`.

use std::fmt::Write;

use crate::model::{BehaviorTreeModel, NodeKind, QualityRequirement, TreeNode};

const INDENT: &str = "  ";

pub fn generate(model: &BehaviorTreeModel) -> String {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    writeln!(
        out,
        "<root BTCPP_format=\"4\" main_tree_to_execute=\"{}\">",
        escape(&model.main_tree_id)
    )
    .unwrap();
    for tree in &model.trees {
        writeln!(out, "{INDENT}<BehaviorTree ID=\"{}\">", escape(&tree.id)).unwrap();
        element(model, &tree.root, 2, &mut out);
        writeln!(out, "{INDENT}</BehaviorTree>").unwrap();
    }
    out.push_str("</root>\n");
    out
}

fn element(model: &BehaviorTreeModel, node: &TreeNode, depth: usize, out: &mut String) {
    let pad = INDENT.repeat(depth);
    let mut attrs: Vec<(&str, String)> = Vec::new();
    if matches!(
        node.kind,
        NodeKind::Action | NodeKind::Condition | NodeKind::SubTreeRef
    ) {
        attrs.push(("ID", node.ref_id.clone()));
    }
    if let Some(name) = &node.display_name {
        attrs.push(("name", name.clone()));
    }
    for (key, value) in &node.params {
        attrs.push((key, value.clone()));
    }

    let requirements: Vec<&QualityRequirement> = node
        .satisfies
        .iter()
        .filter_map(|id| model.requirements.get(id))
        .collect();
    let success: Vec<&str> = requirements
        .iter()
        .filter_map(|r| r.success_if.as_ref().map(|c| c.source.as_str()))
        .collect();
    let failure: Vec<&str> = requirements
        .iter()
        .filter_map(|r| r.failure_if.as_ref().map(|c| c.source.as_str()))
        .collect();
    if !success.is_empty() {
        attrs.push(("_successIf", join_conditions(&success)));
    }
    if !failure.is_empty() {
        attrs.push(("_failureIf", join_conditions(&failure)));
    }
    if let Some(description) = description(node, &requirements) {
        attrs.push(("_description", description));
    }

    write!(out, "{pad}<{}", node.kind.name()).unwrap();
    for (key, value) in &attrs {
        write!(out, " {key}=\"{}\"", escape(value)).unwrap();
    }
    if node.children.is_empty() {
        out.push_str("/>\n");
        return;
    }
    out.push_str(">\n");
    for child in &node.children {
        element(model, child, depth + 1, out);
    }
    writeln!(out, "{pad}</{}>", node.kind.name()).unwrap();
}

fn description(node: &TreeNode, requirements: &[&QualityRequirement]) -> Option<String> {
    let mut entries: Vec<String> = node
        .satisfices
        .iter()
        .map(|q| format!("satisfices {}", q.label()))
        .collect();
    for req in requirements {
        let prefix = match (req.failure_if.is_some(), req.success_if.is_some()) {
            (true, true) => "FailureIf/SuccessIf: ",
            (true, false) => "FailureIf: ",
            (false, true) => "SuccessIf: ",
            (false, false) => "",
        };
        entries.push(format!("{prefix}[{}] {}", req.id, req.description));
    }
    (!entries.is_empty()).then(|| entries.join("; "))
}

fn join_conditions(sources: &[&str]) -> String {
    match sources {
        [single] => (*single).to_owned(),
        many => many
            .iter()
            .map(|s| format!("({s})"))
            .collect::<Vec<_>>()
            .join(" || "),
    }
}

/// Escapes text for use inside a double-quoted attribute value.
pub fn escape(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    for c in value.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            '\t' => out.push_str("&#9;"),
            c => out.push(c),
        }
    }
    out
}
