use serde::{Deserialize, Serialize};

use super::augment::number_variables;
use super::{GroupNode, GroupType, Node, NodeTree};

/// A statement prefix ending in a call, with its argument list.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiCall {
    pub tokens: Vec<String>,
    /// Index of the opening parenthesis in `tokens`.
    pub paren: usize,
}

impl ApiCall {
    pub fn callee(&self) -> &str {
        &self.tokens[self.paren - 1]
    }

    pub fn text(&self) -> String {
        self.tokens.concat()
    }
}

const EXCLUDED_HEADS: [&str; 2] = ["def", "class"];

/// Calls found in `tree`, in order of appearance. Each comes with its
/// leaves: the statement tokens before the callee, the callee and the
/// flattened parenthesis group.
fn find_calls(tree: &NodeTree) -> Vec<(Vec<Node>, usize)> {
    let mut out = Vec::new();
    scan(&tree.root.children, &mut out);
    out
}

fn scan(nodes: &[Node], out: &mut Vec<(Vec<Node>, usize)>) {
    let is_line = |n: &Node| matches!(n, Node::Group(g) if g.group_type == Some(GroupType::SplitGroup));
    if nodes.iter().any(is_line) {
        for n in nodes {
            match n {
                Node::Group(g) if g.group_type == Some(GroupType::SplitGroup) => scan(&g.children, out),
                Node::Group(g) => scan(&g.children, out),
                _ => {}
            }
        }
        return;
    }
    statement(nodes, out);
}

fn statement(nodes: &[Node], out: &mut Vec<(Vec<Node>, usize)>) {
    let first = nodes.iter().find_map(|n| match n {
        Node::Token(t) => Some(t.lexeme.as_str()),
        _ => None,
    });
    let excluded = first.is_some_and(|f| EXCLUDED_HEADS.contains(&f));
    let mut prefix: Vec<Node> = Vec::new();
    for (i, n) in nodes.iter().enumerate() {
        match n {
            Node::Token(t) => {
                if !excluded {
                    if let Some(paren) = following_paren(&nodes[i + 1..]) {
                        let mut leaves = prefix.clone();
                        leaves.push(Node::Token(t.clone()));
                        let at = leaves.iter().filter(|n| matches!(n, Node::Token(_))).count();
                        flatten(&paren.children, &mut leaves);
                        trim(&mut leaves);
                        out.push((leaves, at));
                    }
                }
                prefix.push(n.clone());
            }
            Node::Decoration(d) if !d.lexeme.contains('\n') && !prefix.is_empty() => prefix.push(n.clone()),
            Node::Group(g) => {
                for c in &g.children {
                    if let Node::Group(inner) = c {
                        scan(&inner.children, out);
                    }
                }
                if g.group_type == Some(GroupType::StringLiteral)
                    || (g.group_type == Some(GroupType::Match) && !starts_block(g))
                {
                    flatten(&g.children, &mut prefix);
                } else {
                    prefix.clear();
                }
            }
            _ => {}
        }
    }
}

/// Indentation blocks open with an empty token.
fn starts_block(g: &GroupNode) -> bool {
    matches!(g.children.first(), Some(Node::Token(t)) if t.lexeme.is_empty())
}

fn following_paren(rest: &[Node]) -> Option<&GroupNode> {
    match rest.first()? {
        Node::Group(g)
            if g.group_type == Some(GroupType::Match)
                && matches!(g.children.first(), Some(Node::Token(t)) if t.lexeme == "(") =>
        {
            Some(g)
        }
        _ => None,
    }
}

fn flatten(nodes: &[Node], out: &mut Vec<Node>) {
    for n in nodes {
        match n {
            Node::Token(_) => out.push(n.clone()),
            Node::Decoration(d) if !d.lexeme.contains('\n') => out.push(n.clone()),
            Node::Decoration(d) => out.push(Node::Decoration(super::DecorationNode {
                lexeme: " ".into(),
                synthetic: true,
                ..d.clone()
            })),
            Node::Group(g) => flatten(&g.children, out),
            _ => {}
        }
    }
}

fn trim(leaves: &mut Vec<Node>) {
    while matches!(leaves.last(), Some(Node::Decoration(_))) {
        leaves.pop();
    }
    while matches!(leaves.first(), Some(Node::Decoration(_))) {
        leaves.remove(0);
    }
}

/// The calls of `tree` in order, as token lexemes.
pub fn api_calls(tree: &NodeTree) -> Vec<ApiCall> {
    find_calls(tree)
        .into_iter()
        .map(|(leaves, at)| ApiCall {
            tokens: leaves
                .iter()
                .filter_map(|n| match n {
                    Node::Token(t) => Some(t.lexeme.clone()),
                    _ => None,
                })
                .collect(),
            paren: at,
        })
        .collect()
}

/// Rearranges the calls of `tree` into one group per call, without control
/// nodes. Intents for the call task take this form.
pub fn call_sequence(tree: &NodeTree) -> NodeTree {
    NodeTree::new(
        find_calls(tree)
            .into_iter()
            .map(|(leaves, _)| Node::Group(GroupNode::new(GroupType::Call, leaves)))
            .collect(),
    )
}

/// Like [`call_sequence`], with region controls inside each call so that a
/// selected region reaches from somewhere in the receiver chain or the
/// assignment up to at least the opening parenthesis.
pub fn extract_api_calls(tree: &NodeTree) -> NodeTree {
    let groups = find_calls(tree)
        .into_iter()
        .map(|(leaves, paren)| {
            let n = leaves.iter().filter(|n| matches!(n, Node::Token(_))).count();
            let mut children = Vec::with_capacity(leaves.len() + n + 1);
            let mut k = 0;
            for leaf in leaves {
                if let Node::Token(_) = leaf {
                    if k < paren {
                        children.push(Node::RegionStart { var: 0 });
                    }
                    children.push(leaf);
                    if k >= paren {
                        children.push(Node::RegionEnd { var: 0, allow_empty: false });
                    }
                    k += 1;
                } else {
                    children.push(leaf);
                }
            }
            Node::Group(GroupNode::new(GroupType::Call, children))
        })
        .collect();
    let mut out = NodeTree::new(groups);
    number_variables(&mut out);
    out
}

#[cfg(test)]
fn group_tokens(g: &GroupNode) -> Vec<&super::TokenNode> {
    g.children
        .iter()
        .filter_map(|n| match n {
            Node::Token(t) => Some(t),
            _ => None,
        })
        .collect()
}
