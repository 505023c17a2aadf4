use std::collections::HashMap;
use std::fmt::Write;

use super::lexer::quote;
use crate::model::{Arity, BehaviorTreeModel, NodeKind, QualityRequirement, TreeNode};

/// Where a requirement's single canonical declaration is emitted.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Site {
    /// Nested under the n-th `satisfices` entry of a node.
    Quality(String, usize),
    /// Inline at the n-th `satisfies` entry of a node.
    Satisfies(String, usize),
}

/// Renders a model as canonical `.btq` text (tab indentation, one
/// annotation per line, one declaration per requirement id).
pub fn format_model(model: &BehaviorTreeModel) -> String {
    let sites = declaration_sites(model);
    let mut out = String::new();
    for (i, tree) in model.trees.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        writeln!(out, "BehaviorTree ID = {}", quote(&tree.id)).unwrap();
        format_node(&sites, &tree.root, 1, &mut out);
    }
    out
}

fn declaration_sites(model: &BehaviorTreeModel) -> HashMap<Site, Vec<&QualityRequirement>> {
    let nodes: Vec<&TreeNode> = model.nodes().collect();
    let mut sites: HashMap<Site, Vec<&QualityRequirement>> = HashMap::new();
    for req in model.requirements.iter() {
        let site = req
            .quality
            .as_ref()
            .and_then(|q| {
                let exact = nodes.iter().find_map(|n| {
                    n.satisfices
                        .iter()
                        .position(|s| s == q)
                        .map(|i| Site::Quality(n.node_path.clone(), i))
                });
                exact.or_else(|| {
                    nodes.iter().find_map(|n| {
                        n.satisfices
                            .iter()
                            .position(|s| s.is_same_quality(q))
                            .map(|i| Site::Quality(n.node_path.clone(), i))
                    })
                })
            })
            .or_else(|| {
                nodes.iter().find_map(|n| {
                    n.satisfies
                        .iter()
                        .position(|id| *id == req.id)
                        .map(|i| Site::Satisfies(n.node_path.clone(), i))
                })
            });
        if let Some(site) = site {
            sites.entry(site).or_default().push(req);
        }
    }
    sites
}

fn format_node(
    sites: &HashMap<Site, Vec<&QualityRequirement>>,
    node: &TreeNode,
    depth: usize,
    out: &mut String,
) {
    for _ in 0..depth {
        out.push('\t');
    }
    let params_in_head = node.kind.arity() == Arity::Decorator;
    out.push_str(&head(node));
    if params_in_head {
        for (key, value) in &node.params {
            write!(out, " {key} = {}", quote(value)).unwrap();
        }
    }

    let mut annot: Vec<String> = Vec::new();
    if let Some(name) = &node.display_name {
        annot.push(format!("name = {}", quote(name)));
    }
    if !params_in_head {
        for (key, value) in &node.params {
            annot.push(format!("{key} = {}", quote(value)));
        }
    }
    if !node.satisfices.is_empty() {
        annot.push("satisfices".into());
        for (i, quality) in node.satisfices.iter().enumerate() {
            let mut entry = format!("Quality = {}", quote(&quality.label()));
            if let Some(reqs) = sites.get(&Site::Quality(node.node_path.clone(), i)) {
                let decls: Vec<String> = reqs.iter().map(|r| declaration(r)).collect();
                write!(entry, " ({})", decls.join(" ")).unwrap();
            }
            annot.push(entry);
        }
    }
    if !node.satisfies.is_empty() {
        annot.push("satisfies".into());
        for (i, id) in node.satisfies.iter().enumerate() {
            let inline = sites
                .get(&Site::Satisfies(node.node_path.clone(), i))
                .and_then(|reqs| reqs.first());
            match inline {
                Some(req) => annot.push(declaration(req)),
                None => annot.push(format!("QualityReq ID = {}", quote(id))),
            }
        }
    }
    if !annot.is_empty() {
        write!(out, " ({})", annot.join(" ")).unwrap();
    }
    out.push('\n');

    for child in &node.children {
        format_node(sites, child, depth + 1, out);
    }
}

fn head(node: &TreeNode) -> String {
    match node.kind {
        NodeKind::Sequence => "->".into(),
        NodeKind::Fallback => "?".into(),
        NodeKind::Parallel => "=>".into(),
        NodeKind::ReactiveSequence => "r->".into(),
        NodeKind::ReactiveFallback => "r?".into(),
        NodeKind::Action | NodeKind::Condition | NodeKind::SubTreeRef => {
            format!("{} {}", node.kind.name(), node.ref_id)
        }
        decorator => decorator.name().into(),
    }
}

fn declaration(req: &QualityRequirement) -> String {
    let mut out = format!(
        "QualityReq ID = {} description = {}",
        quote(&req.id),
        quote(&req.description)
    );
    if let Some(c) = &req.success_if {
        write!(out, " successIf = {}", quote(&c.source)).unwrap();
    }
    if let Some(c) = &req.failure_if {
        write!(out, " failureIf = {}", quote(&c.source)).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostic::Location;
    use crate::model::{BehaviorTree, Quality, RequirementRegistry};
    use crate::parser::{parse, SourceFile};

    fn single(root: TreeNode, reg: RequirementRegistry) -> BehaviorTreeModel {
        BehaviorTreeModel::new(
            vec![BehaviorTree {
                id: "T".into(),
                root,
                location: Location::synthetic(),
            }],
            reg,
        )
    }

    fn reparse(model: &BehaviorTreeModel) -> BehaviorTreeModel {
        let text = format_model(model);
        parse(&SourceFile::new("f.btq", &text)).unwrap_or_else(|d| panic!("{text}\n{d:#?}"))
    }

    #[test]
    fn single_action_is_two_lines() {
        let model = single(TreeNode::action("Go"), RequirementRegistry::new());
        assert_eq!(format_model(&model), "BehaviorTree ID = \"T\"\n\tAction Go\n");
    }

    #[test]
    fn repeat_parameters_follow_keyword() {
        let root = TreeNode::new(NodeKind::Repeat)
            .with_param("num_cycles", "6")
            .with_children(vec![TreeNode::action("Pick")]);
        let text = format_model(&single(root, RequirementRegistry::new()));
        assert!(text.contains("\n\tRepeat num_cycles = \"6\"\n\t\tAction Pick\n"), "{text}");
    }

    #[test]
    fn annotations_round_trip() {
        let mut reg = RequirementRegistry::new();
        let perf = Quality::with_facet("performance", "time-behavior");
        reg.declare(
            QualityRequirement::new("rq1", "at most 30 \"sec\"")
                .with_quality(perf.clone())
                .with_failure_if("elapsed_sec > 30")
                .unwrap(),
            Location::synthetic(),
        );
        reg.declare(
            QualityRequirement::new("rq2", "soft\nline")
                .with_success_if("ok == true")
                .unwrap(),
            Location::synthetic(),
        );
        let root = TreeNode::new(NodeKind::Parallel)
            .with_name("Both")
            .with_param("success_count", "1")
            .with_children(vec![
                TreeNode::action("A")
                    .with_param("goal", "x")
                    .satisfying("rq2")
                    .satisfying("rq1"),
                TreeNode::action("B").satisficing(perf).satisfying("rq1"),
            ]);
        let model = single(root, reg);
        let again = reparse(&model);
        assert_eq!(again.canonical(), model.canonical());
        assert_eq!(format_model(&again), format_model(&model));
    }
}
