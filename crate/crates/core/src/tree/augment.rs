use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{GroupNode, GroupType, Node, NodeTree};
use crate::error::TreeError;

/// What the decision variables of a prototype decide.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    /// UNSURE regions and insertion markers.
    Regions,
    /// Truncation at statement boundaries.
    Prefix,
    PrefixPlusRegions,
    /// Selection of predicted call arguments.
    ApiCalls,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Regions => "regions",
            TaskKind::Prefix => "prefix",
            TaskKind::PrefixPlusRegions => "prefix_plus_regions",
            TaskKind::ApiCalls => "api_calls",
        }
    }

    pub fn has_regions(self) -> bool {
        !matches!(self, TaskKind::Prefix)
    }

    pub fn has_truncation(self) -> bool {
        matches!(self, TaskKind::Prefix | TaskKind::PrefixPlusRegions)
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "regions" => Ok(TaskKind::Regions),
            "prefix" => Ok(TaskKind::Prefix),
            "prefix_plus_regions" => Ok(TaskKind::PrefixPlusRegions),
            "api_calls" => Ok(TaskKind::ApiCalls),
            other => Err(format!("unknown task {other:?}")),
        }
    }
}

/// Inserts control nodes for `task` and numbers every decision variable in
/// depth-first order.
///
/// Region boundaries sit at the gaps between the items of a scope (the root,
/// a bracket interior or a string interior), where items are tokens and
/// bracket or string groups and line groups are looked through. A region
/// that starts outside a group must therefore cover all of it, and one that
/// starts inside must end inside. Gaps at statement boundaries may also close
/// an empty region, which marks a place where code is likely missing.
pub fn augment_prototype(tree: &NodeTree, task: TaskKind) -> Result<NodeTree, TreeError> {
    if tree.has_controls() {
        return Err(TreeError::AlreadyAugmented);
    }
    let mut out = match task {
        TaskKind::ApiCalls => return Ok(super::api::extract_api_calls(tree)),
        _ => tree.clone(),
    };
    if task.has_truncation() {
        let mut seen = HashSet::from([0]);
        let total = tree.tokens().len();
        let mut pos = 0;
        out.root = place_truncations(out.root, &mut pos, &mut seen, total);
        if total > 0 {
            // cutting everything off is always an option
            out.root.children.insert(0, Node::Truncation { var: 0 });
        }
    }
    if task.has_regions() {
        let mut placer = RegionPlacer { pending: None };
        let children = std::mem::take(&mut out.root.children);
        out.root.children = placer.scope(children);
    }
    number_variables(&mut out);
    Ok(out)
}

/// Assigns variable ids to control nodes and tokens in depth-first order.
pub(crate) fn number_variables(tree: &mut NodeTree) {
    fn go(nodes: &mut [Node], next: &mut usize) {
        for n in nodes {
            match n {
                Node::Token(t) => {
                    t.var = Some(*next);
                    *next += 1;
                }
                Node::RegionStart { var } | Node::RegionEnd { var, .. } | Node::Truncation { var } => {
                    *var = *next;
                    *next += 1;
                }
                Node::Group(g) => go(&mut g.children, next),
                Node::Decoration(_) => {}
            }
        }
    }
    let mut next = 0;
    go(&mut tree.root.children, &mut next);
}

fn count_tokens(nodes: &[Node]) -> usize {
    nodes
        .iter()
        .map(|n| match n {
            Node::Token(_) => 1,
            Node::Group(g) => count_tokens(&g.children),
            _ => 0,
        })
        .sum()
}

fn is_line(n: &Node) -> bool {
    matches!(n, Node::Group(g) if g.group_type == Some(GroupType::SplitGroup))
}

/// Truncation points go between the lines of every statement sequence and
/// after its last line, except at the very end of the suggestion.
fn place_truncations(
    group: GroupNode,
    pos: &mut usize,
    seen: &mut HashSet<usize>,
    total: usize,
) -> GroupNode {
    let has_lines = group.children.iter().any(is_line);
    let mut children = Vec::with_capacity(group.children.len() + 2);
    let mut first_line = true;
    for n in group.children {
        if has_lines && is_line(&n) {
            if !first_line && *pos < total && seen.insert(*pos) {
                children.push(Node::Truncation { var: 0 });
            }
            first_line = false;
        }
        match n {
            Node::Token(t) => {
                *pos += 1;
                children.push(Node::Token(t));
            }
            Node::Group(g) => children.push(Node::Group(place_truncations(g, pos, seen, total))),
            n => children.push(n),
        }
    }
    if has_lines && *pos < total && seen.insert(*pos) {
        children.push(Node::Truncation { var: 0 });
    }
    GroupNode { group_type: group.group_type, children }
}

struct RegionPlacer {
    /// A gap has been reached but not yet written out; the flag says whether
    /// it may hold an empty region.
    pending: Option<bool>,
}

impl RegionPlacer {
    fn flush(&mut self, out: &mut Vec<Node>) {
        if let Some(allow_empty) = self.pending.take() {
            out.push(Node::RegionStart { var: 0 });
            out.push(Node::RegionEnd { var: 0, allow_empty });
        }
    }

    fn scope(&mut self, children: Vec<Node>) -> Vec<Node> {
        if count_tokens(&children) == 0 {
            return children;
        }
        let saved = self.pending.replace(false);
        let mut out = self.sequence(children);
        self.flush(&mut out);
        self.pending = saved;
        out
    }

    /// Walks one child list of the current scope, looking through line
    /// groups. A gap in front of a line group is written outside it.
    fn sequence(&mut self, children: Vec<Node>) -> Vec<Node> {
        let has_lines = children.iter().any(is_line);
        let mut out = Vec::with_capacity(children.len() + 4);
        for node in children {
            match node {
                Node::Group(g) if g.is_transparent() => {
                    if count_tokens(&g.children) > 0 && self.pending.is_some() {
                        self.pending = Some(true);
                        self.flush(&mut out);
                    }
                    let inner = self.sequence(g.children);
                    out.push(Node::Group(GroupNode { group_type: g.group_type, children: inner }));
                }
                Node::Token(t) => {
                    self.flush(&mut out);
                    out.push(Node::Token(t));
                    self.pending = Some(false);
                }
                Node::Group(g) => {
                    self.flush(&mut out);
                    out.push(Node::Group(self.structural(g)));
                    self.pending = Some(false);
                }
                other => out.push(other),
            }
        }
        if has_lines && self.pending.is_some() {
            self.pending = Some(true);
        }
        out
    }

    fn structural(&mut self, g: GroupNode) -> GroupNode {
        match g.group_type {
            Some(GroupType::MatchInner) => {
                let children = self.scope(g.children);
                GroupNode { group_type: g.group_type, children }
            }
            Some(GroupType::StringLiteral) => {
                let items = g.children.iter().filter(|c| matches!(c, Node::Token(_))).count();
                if items < 3 {
                    return g;
                }
                let mut seen = 0;
                let mut children = Vec::with_capacity(g.children.len() + 2 * items);
                for c in g.children {
                    if let Node::Token(_) = c {
                        if seen > 0 && seen < items {
                            children.push(Node::RegionStart { var: 0 });
                            children.push(Node::RegionEnd { var: 0, allow_empty: false });
                        }
                        seen += 1;
                    }
                    children.push(c);
                }
                GroupNode { group_type: g.group_type, children }
            }
            _ => {
                let children = g
                    .children
                    .into_iter()
                    .map(|c| match c {
                        Node::Group(inner) => Node::Group(self.structural(inner)),
                        c => c,
                    })
                    .collect();
                GroupNode { group_type: g.group_type, children }
            }
        }
    }
}
