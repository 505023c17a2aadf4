use std::collections::HashMap;

use super::{BehaviorTreeModel, TreeNode};

/// Gives every node a stable path: `/<tree>/<segment>#<n>/...`, where the
/// segment is the display name, else the referenced id, else the kind name,
/// and `n` counts same-segment siblings from 1.
pub fn assign_node_paths(mut model: BehaviorTreeModel) -> BehaviorTreeModel {
    for tree in &mut model.trees {
        let prefix = format!("/{}", tree.id);
        assign(&mut tree.root, &prefix, 1);
    }
    model
}

fn assign(node: &mut TreeNode, parent: &str, ordinal: usize) {
    node.node_path = format!("{parent}/{}#{ordinal}", node.segment_name());
    let mut seen: HashMap<String, usize> = HashMap::new();
    let path = node.node_path.clone();
    for child in &mut node.children {
        let n = seen.entry(child.segment_name().to_owned()).or_insert(0);
        *n += 1;
        assign(child, &path, *n);
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use proptest::prelude::*;

    use crate::diagnostic::Location;
    use crate::model::*;

    fn single_tree(root: TreeNode) -> BehaviorTreeModel {
        BehaviorTreeModel::new(
            vec![BehaviorTree {
                id: "MainTree".into(),
                root,
                location: Location::synthetic(),
            }],
            RequirementRegistry::new(),
        )
    }

    #[test]
    fn root_path() {
        let model = single_tree(
            TreeNode::new(NodeKind::Sequence)
                .with_name("BatteryCheck")
                .with_children(vec![TreeNode::action("Charge")]),
        );
        assert_eq!(model.trees[0].root.node_path, "/MainTree/BatteryCheck#1");
        assert_eq!(
            model.trees[0].root.children[0].node_path,
            "/MainTree/BatteryCheck#1/Charge#1"
        );
    }

    #[test]
    fn same_named_siblings_get_ordinals() {
        let model = single_tree(TreeNode::new(NodeKind::Sequence).with_children(vec![
            TreeNode::action("MoveBase"),
            TreeNode::action("Pick"),
            TreeNode::action("MoveBase"),
            TreeNode::new(NodeKind::Sequence).with_children(vec![TreeNode::action("X")]),
        ]));
        let paths: Vec<_> = model.trees[0]
            .root
            .children
            .iter()
            .map(|c| c.node_path.as_str())
            .collect();
        assert_eq!(
            paths,
            [
                "/MainTree/Sequence#1/MoveBase#1",
                "/MainTree/Sequence#1/Pick#1",
                "/MainTree/Sequence#1/MoveBase#2",
                "/MainTree/Sequence#1/Sequence#1",
            ]
        );
    }

    #[test]
    fn same_leaf_under_different_tasks() {
        let model = single_tree(TreeNode::new(NodeKind::ReactiveFallback).with_children(vec![
            TreeNode::new(NodeKind::Sequence)
                .with_name("BatteryCheck")
                .with_children(vec![TreeNode::action("MoveBase")]),
            TreeNode::new(NodeKind::Sequence)
                .with_name("SolidStation")
                .with_children(vec![TreeNode::action("MoveBase")]),
        ]));
        let root = &model.trees[0].root;
        let a = &root.children[0].children[0].node_path;
        let b = &root.children[1].children[0].node_path;
        assert_eq!(a, "/MainTree/ReactiveFallback#1/BatteryCheck#1/MoveBase#1");
        assert_eq!(b, "/MainTree/ReactiveFallback#1/SolidStation#1/MoveBase#1");
    }

    fn arb_tree() -> impl Strategy<Value = TreeNode> {
        let leaf = prop_oneof![Just("A"), Just("B"), Just("C")]
            .prop_map(TreeNode::action);
        leaf.prop_recursive(4, 40, 4, |inner| {
            (
                prop::collection::vec(inner, 1..4),
                prop::option::of(prop_oneof![Just("N"), Just("A")]),
            )
                .prop_map(|(children, name)| {
                    let node = TreeNode::new(NodeKind::Sequence).with_children(children);
                    match name {
                        Some(n) => node.with_name(n),
                        None => node,
                    }
                })
        })
    }

    proptest! {
        #[test]
        fn paths_are_unique(root in arb_tree()) {
            let model = single_tree(root);
            let mut seen = HashSet::new();
            for node in model.nodes() {
                prop_assert!(seen.insert(node.node_path.clone()), "duplicate {}", node.node_path);
            }
        }
    }
}
