//! Quality-extended behavior-tree model.
//!
//! Nodes may *satisfice* qualities (early design, unquantified) and *satisfy*
//! quality requirements (late design, identified and optionally
//! machine-checkable through `success_if` / `failure_if` constraints).

mod paths;
mod validate;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::condexpr::{self, ConditionExpr, ExprError};
use crate::diagnostic::Location;

pub use paths::assign_node_paths;
pub use validate::validate;

/// A named quality such as `performance`, with an optional facet such as
/// `time-behavior` (written `performance <time-behavior>`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Quality {
    pub name: String,
    pub facet: Option<String>,
}

impl Quality {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            facet: None,
        }
    }

    pub fn with_facet(name: impl Into<String>, facet: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            facet: Some(facet.into()),
        }
    }

    /// Splits a label like `performance <time-behavior>` into name and facet.
    pub fn from_label(label: &str) -> Self {
        let trimmed = label.trim();
        if let Some(body) = trimmed.strip_suffix('>') {
            if let Some(open) = body.rfind('<') {
                let name = body[..open].trim_end();
                let facet = body[open + 1..].trim();
                if !name.is_empty() {
                    return Self {
                        name: name.to_owned(),
                        facet: Some(facet.to_owned()),
                    };
                }
            }
        }
        Self::new(trimmed)
    }

    pub fn label(&self) -> String {
        match &self.facet {
            Some(facet) => format!("{} <{}>", self.name, facet),
            None => self.name.clone(),
        }
    }

    /// Qualities are identified by name alone; facets refine but do not
    /// distinguish them.
    pub fn is_same_quality(&self, other: &Quality) -> bool {
        self.name == other.name
    }
}

impl fmt::Display for Quality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// A hard-constraint expression together with its source text.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub source: String,
    pub expr: ConditionExpr,
}

impl Constraint {
    pub fn parse(source: &str) -> Result<Self, ExprError> {
        Ok(Self {
            source: source.to_owned(),
            expr: condexpr::parse_expr(source)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityRequirement {
    pub id: String,
    pub description: String,
    pub quality: Option<Quality>,
    pub success_if: Option<Constraint>,
    pub failure_if: Option<Constraint>,
}

impl QualityRequirement {
    pub fn new(id: impl Into<String>, description: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            description: description.into(),
            quality: None,
            success_if: None,
            failure_if: None,
        }
    }

    pub fn with_quality(mut self, quality: Quality) -> Self {
        self.quality = Some(quality);
        self
    }

    pub fn with_success_if(mut self, source: &str) -> Result<Self, ExprError> {
        self.success_if = Some(Constraint::parse(source)?);
        Ok(self)
    }

    pub fn with_failure_if(mut self, source: &str) -> Result<Self, ExprError> {
        self.failure_if = Some(Constraint::parse(source)?);
        Ok(self)
    }

    pub fn is_hard_constraint(&self) -> bool {
        self.success_if.is_some() || self.failure_if.is_some()
    }

    /// Cross-cutting consistency: same description and constraint sources.
    pub fn is_consistent_with(&self, other: &QualityRequirement) -> bool {
        let src = |c: &Option<Constraint>| c.as_ref().map(|c| c.source.clone());
        self.description == other.description
            && src(&self.success_if) == src(&other.success_if)
            && src(&self.failure_if) == src(&other.failure_if)
    }
}

/// One textual declaration of a requirement.
#[derive(Debug, Clone, PartialEq)]
pub struct RequirementDecl {
    pub requirement: QualityRequirement,
    pub location: Location,
}

/// All requirement declarations in document order. The same id may be
/// declared more than once (cross-cutting requirements); the first
/// declaration is canonical.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RequirementRegistry {
    decls: Vec<RequirementDecl>,
}

impl RequirementRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declare(&mut self, requirement: QualityRequirement, location: Location) {
        self.decls.push(RequirementDecl {
            requirement,
            location,
        });
    }

    pub fn get(&self, id: &str) -> Option<&QualityRequirement> {
        self.decls
            .iter()
            .find(|d| d.requirement.id == id)
            .map(|d| &d.requirement)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.get(id).is_some()
    }

    pub fn declarations(&self) -> &[RequirementDecl] {
        &self.decls
    }

    /// Canonical requirements, one per id, in first-declaration order.
    pub fn iter(&self) -> impl Iterator<Item = &QualityRequirement> {
        self.decls.iter().enumerate().filter_map(|(i, d)| {
            let first = self.decls[..i]
                .iter()
                .all(|prev| prev.requirement.id != d.requirement.id);
            first.then_some(&d.requirement)
        })
    }

    pub fn len(&self) -> usize {
        self.iter().count()
    }

    pub fn is_empty(&self) -> bool {
        self.decls.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Sequence,
    ReactiveSequence,
    Fallback,
    ReactiveFallback,
    Parallel,
    Inverter,
    Repeat,
    RetryUntilSuccessful,
    ForceSuccess,
    ForceFailure,
    KeepRunningUntilFailure,
    Action,
    Condition,
    SubTreeRef,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arity {
    Composite,
    Decorator,
    Leaf,
}

impl NodeKind {
    pub const ALL: [NodeKind; 14] = [
        NodeKind::Sequence,
        NodeKind::ReactiveSequence,
        NodeKind::Fallback,
        NodeKind::ReactiveFallback,
        NodeKind::Parallel,
        NodeKind::Inverter,
        NodeKind::Repeat,
        NodeKind::RetryUntilSuccessful,
        NodeKind::ForceSuccess,
        NodeKind::ForceFailure,
        NodeKind::KeepRunningUntilFailure,
        NodeKind::Action,
        NodeKind::Condition,
        NodeKind::SubTreeRef,
    ];

    pub fn arity(self) -> Arity {
        use NodeKind::*;
        match self {
            Sequence | ReactiveSequence | Fallback | ReactiveFallback | Parallel => Arity::Composite,
            Inverter | Repeat | RetryUntilSuccessful | ForceSuccess | ForceFailure
            | KeepRunningUntilFailure => Arity::Decorator,
            Action | Condition | SubTreeRef => Arity::Leaf,
        }
    }

    /// BehaviorTree.CPP element name.
    pub fn name(self) -> &'static str {
        use NodeKind::*;
        match self {
            Sequence => "Sequence",
            ReactiveSequence => "ReactiveSequence",
            Fallback => "Fallback",
            ReactiveFallback => "ReactiveFallback",
            Parallel => "Parallel",
            Inverter => "Inverter",
            Repeat => "Repeat",
            RetryUntilSuccessful => "RetryUntilSuccessful",
            ForceSuccess => "ForceSuccess",
            ForceFailure => "ForceFailure",
            KeepRunningUntilFailure => "KeepRunningUntilFailure",
            Action => "Action",
            Condition => "Condition",
            SubTreeRef => "SubTree",
        }
    }

    /// Parameter that carries this kind's count, if any.
    pub fn count_param(self) -> Option<&'static str> {
        match self {
            NodeKind::Repeat => Some("num_cycles"),
            NodeKind::RetryUntilSuccessful => Some("num_attempts"),
            NodeKind::Parallel => Some("success_count"),
            _ => None,
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub kind: NodeKind,
    /// Behavior or tree identifier for leaves; empty otherwise.
    pub ref_id: String,
    pub display_name: Option<String>,
    pub params: BTreeMap<String, String>,
    pub satisfices: Vec<Quality>,
    pub satisfies: Vec<String>,
    pub children: Vec<TreeNode>,
    /// Filled in by [`assign_node_paths`].
    pub node_path: String,
    pub location: Location,
}

impl TreeNode {
    pub fn new(kind: NodeKind) -> Self {
        Self {
            kind,
            ref_id: String::new(),
            display_name: None,
            params: BTreeMap::new(),
            satisfices: Vec::new(),
            satisfies: Vec::new(),
            children: Vec::new(),
            node_path: String::new(),
            location: Location::synthetic(),
        }
    }

    pub fn action(id: impl Into<String>) -> Self {
        Self::leaf(NodeKind::Action, id)
    }

    pub fn condition(id: impl Into<String>) -> Self {
        Self::leaf(NodeKind::Condition, id)
    }

    pub fn subtree(id: impl Into<String>) -> Self {
        Self::leaf(NodeKind::SubTreeRef, id)
    }

    fn leaf(kind: NodeKind, id: impl Into<String>) -> Self {
        Self {
            ref_id: id.into(),
            ..Self::new(kind)
        }
    }

    pub fn with_children(mut self, children: Vec<TreeNode>) -> Self {
        self.children = children;
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.display_name = Some(name.into());
        self
    }

    pub fn with_param(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.params.insert(key.into(), value.into());
        self
    }

    pub fn satisficing(mut self, quality: Quality) -> Self {
        self.satisfices.push(quality);
        self
    }

    pub fn satisfying(mut self, id: impl Into<String>) -> Self {
        self.satisfies.push(id.into());
        self
    }

    /// Parsed count parameter (num_cycles / num_attempts / success_count).
    pub fn count(&self) -> Option<u32> {
        let key = self.kind.count_param()?;
        self.params.get(key)?.trim().parse().ok()
    }

    /// Path segment before ordinal disambiguation.
    pub fn segment_name(&self) -> &str {
        match &self.display_name {
            Some(name) => name,
            None if !self.ref_id.is_empty() => &self.ref_id,
            None => self.kind.name(),
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.kind.arity() == Arity::Leaf
    }

    /// Pre-order traversal.
    pub fn walk(&self) -> Vec<&TreeNode> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(node) = stack.pop() {
            out.push(node);
            stack.extend(node.children.iter().rev());
        }
        out
    }

    fn walk_mut(&mut self, f: &mut impl FnMut(&mut TreeNode)) {
        f(self);
        for child in &mut self.children {
            child.walk_mut(f);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorTree {
    pub id: String,
    pub root: TreeNode,
    pub location: Location,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorTreeModel {
    /// Trees in declaration order.
    pub trees: Vec<BehaviorTree>,
    pub main_tree_id: String,
    pub requirements: RequirementRegistry,
    /// Qualities by name, first occurrence in document order.
    pub qualities: BTreeMap<String, Quality>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LookupError {
    #[error("no node with path `{0}`")]
    UnknownPath(String),
}

impl BehaviorTreeModel {
    /// Assembles a model; the first tree is the main tree. Node paths are
    /// assigned and the quality registry is collected from the nodes.
    pub fn new(trees: Vec<BehaviorTree>, requirements: RequirementRegistry) -> Self {
        let main_tree_id = trees.first().map(|t| t.id.clone()).unwrap_or_default();
        let mut model = Self {
            trees,
            main_tree_id,
            requirements,
            qualities: BTreeMap::new(),
        };
        model.qualities = model.collect_qualities();
        assign_node_paths(model)
    }

    fn collect_qualities(&self) -> BTreeMap<String, Quality> {
        let mut out = BTreeMap::new();
        for node in self.nodes() {
            for quality in &node.satisfices {
                out.entry(quality.name.clone())
                    .or_insert_with(|| quality.clone());
            }
        }
        out
    }

    pub fn tree(&self, id: &str) -> Option<&BehaviorTree> {
        self.trees.iter().find(|t| t.id == id)
    }

    pub fn main_tree(&self) -> Option<&BehaviorTree> {
        self.tree(&self.main_tree_id)
    }

    /// Every node of every tree, in document order.
    pub fn nodes(&self) -> impl Iterator<Item = &TreeNode> {
        self.trees.iter().flat_map(|t| t.root.walk())
    }

    pub(crate) fn nodes_mut(&mut self, mut f: impl FnMut(&mut TreeNode)) {
        for tree in &mut self.trees {
            tree.root.walk_mut(&mut f);
        }
    }

    pub fn find_node(&self, node_path: &str) -> Option<&TreeNode> {
        self.nodes().find(|n| n.node_path == node_path)
    }

    /// Requirements a node satisfies, in declaration order on the node.
    pub fn requirements_of(
        &self,
        node_path: &str,
    ) -> Result<Vec<&QualityRequirement>, LookupError> {
        let node = self
            .find_node(node_path)
            .ok_or_else(|| LookupError::UnknownPath(node_path.to_owned()))?;
        Ok(node
            .satisfies
            .iter()
            .filter_map(|id| self.requirements.get(id))
            .collect())
    }

    /// Copy with locations replaced by the synthetic placeholder and the
    /// registry reduced to one declaration per id, ordered by id. Two models
    /// that differ only in source layout have equal canonical forms.
    pub fn canonical(&self) -> Self {
        let mut model = self.clone();
        for tree in &mut model.trees {
            tree.location = Location::synthetic();
        }
        model.nodes_mut(|n| n.location = Location::synthetic());
        let mut requirements = RequirementRegistry::new();
        let mut canonical: Vec<_> = self.requirements.iter().collect();
        canonical.sort_by(|a, b| a.id.cmp(&b.id));
        for req in canonical {
            requirements.declare(req.clone(), Location::synthetic());
        }
        model.requirements = requirements;
        model
    }
}
