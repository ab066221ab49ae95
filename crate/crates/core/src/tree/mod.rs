//! Suggestion trees: tokens, decorations, groups and the control nodes that
//! carry decision variables.

mod api;
mod augment;
mod context;
mod layout;

pub use api::{api_calls, call_sequence, extract_api_calls, ApiCall};
pub use augment::{augment_prototype, TaskKind};
pub use context::strip_context;
pub use layout::{
    decode_suggestion, encode_suggestion, layout_variables, AnnotatedSuggestion,
    ConstraintAutomaton, ConstraintState, RegionMode, SuggestionToken, VarKind, VariableInfo, VariableLayout,
    WalkEvent,
};

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Confidence {
    Sure,
    Unsure,
}

/// Tag on a token. Two tokens match only if lexeme and tag agree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TokenTag {
    ContentLeaf,
    MatchLeft,
    MatchRight,
    /// A string literal that has not been split into pieces yet.
    StringLiteral,
    /// A piece of a split string literal.
    StringContent,
}

impl TokenTag {
    pub fn name(self) -> &'static str {
        match self {
            TokenTag::ContentLeaf => "CONTENT_LEAF",
            TokenTag::MatchLeft => "MATCH_LEFT",
            TokenTag::MatchRight => "MATCH_RIGHT",
            TokenTag::StringLiteral => "STRING_LITERAL",
            TokenTag::StringContent => "STRING_CONTENT",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GroupType {
    Root,
    SplitGroup,
    Match,
    MatchInner,
    StringLiteral,
    Call,
}

impl GroupType {
    pub fn name(self) -> &'static str {
        match self {
            GroupType::Root => "ROOT",
            GroupType::SplitGroup => "SPLIT_GROUP",
            GroupType::Match => "MATCH",
            GroupType::MatchInner => "MATCH_INNER",
            GroupType::StringLiteral => "STRING_LITERAL",
            GroupType::Call => "CALL",
        }
    }

    /// Root and line groups are layout only; regions may run across them.
    pub fn is_transparent(self) -> bool {
        matches!(self, GroupType::Root | GroupType::SplitGroup)
    }
}

/// Byte range in the text a tree was parsed from. Synthetic leaves are empty
/// ranges at the point where they were inserted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenNode {
    pub lexeme: String,
    pub tag: Option<TokenTag>,
    pub span: Span,
    pub synthetic: bool,
    /// Indicator variable, set once the tree has been augmented.
    pub var: Option<usize>,
}

impl TokenNode {
    pub fn new(lexeme: impl Into<String>, tag: TokenTag, span: Span) -> Self {
        TokenNode {
            lexeme: lexeme.into(),
            tag: Some(tag),
            span,
            synthetic: false,
            var: None,
        }
    }

    pub fn matches(&self, other: &TokenNode) -> bool {
        self.lexeme == other.lexeme && self.tag == other.tag
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecorationNode {
    pub lexeme: String,
    pub span: Span,
    pub synthetic: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupNode {
    pub group_type: Option<GroupType>,
    pub children: Vec<Node>,
}

impl GroupNode {
    pub fn new(group_type: GroupType, children: Vec<Node>) -> Self {
        GroupNode { group_type: Some(group_type), children }
    }

    pub fn is_transparent(&self) -> bool {
        self.group_type.is_some_and(GroupType::is_transparent)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Node {
    Token(TokenNode),
    Decoration(DecorationNode),
    Group(GroupNode),
    RegionStart { var: usize },
    /// `allow_empty` lets the region close without covering any token,
    /// which encodes an insertion marker.
    RegionEnd { var: usize, allow_empty: bool },
    Truncation { var: usize },
}

impl Node {
    pub fn is_control(&self) -> bool {
        matches!(
            self,
            Node::RegionStart { .. } | Node::RegionEnd { .. } | Node::Truncation { .. }
        )
    }

    /// Span covered by the node's leaves, if it has any.
    pub fn span(&self) -> Option<Span> {
        match self {
            Node::Token(t) => Some(t.span),
            Node::Decoration(d) => Some(d.span),
            Node::Group(g) => {
                let first = g.children.iter().find_map(Node::span)?;
                let last = g.children.iter().rev().find_map(Node::span)?;
                Some(Span::new(first.start, last.end))
            }
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeTree {
    pub root: GroupNode,
}

impl NodeTree {
    pub fn new(children: Vec<Node>) -> Self {
        NodeTree { root: GroupNode::new(GroupType::Root, children) }
    }

    pub fn empty() -> Self {
        Self::new(Vec::new())
    }

    /// Concatenated leaf text, synthetic leaves included.
    pub fn text(&self) -> String {
        let mut s = String::new();
        collect_text(&self.root.children, &mut s, true);
        s
    }

    /// Concatenated text of leaves that came from the source.
    pub fn source_text(&self) -> String {
        let mut s = String::new();
        collect_text(&self.root.children, &mut s, false);
        s
    }

    /// Token nodes in depth-first order.
    pub fn tokens(&self) -> Vec<&TokenNode> {
        let mut out = Vec::new();
        collect_tokens(&self.root.children, &mut out);
        out
    }

    pub fn has_controls(&self) -> bool {
        fn any(nodes: &[Node]) -> bool {
            nodes.iter().any(|n| match n {
                Node::Group(g) => any(&g.children),
                n => n.is_control(),
            })
        }
        any(&self.root.children)
    }

    /// Copy without control nodes and without variable ids.
    pub fn without_controls(&self) -> NodeTree {
        fn strip(nodes: &[Node]) -> Vec<Node> {
            nodes
                .iter()
                .filter(|n| !n.is_control())
                .map(|n| match n {
                    Node::Group(g) => Node::Group(GroupNode {
                        group_type: g.group_type,
                        children: strip(&g.children),
                    }),
                    Node::Token(t) => Node::Token(TokenNode { var: None, ..t.clone() }),
                    n => n.clone(),
                })
                .collect()
        }
        NodeTree {
            root: GroupNode { group_type: self.root.group_type, children: strip(&self.root.children) },
        }
    }

    /// Indented text rendering, one node per line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        render_node(&Node::Group(self.root.clone()), 0, &mut out);
        out
    }
}

fn collect_text(nodes: &[Node], out: &mut String, synthetic: bool) {
    for n in nodes {
        match n {
            Node::Token(t) if synthetic || !t.synthetic => out.push_str(&t.lexeme),
            Node::Decoration(d) if synthetic || !d.synthetic => out.push_str(&d.lexeme),
            Node::Group(g) => collect_text(&g.children, out, synthetic),
            _ => {}
        }
    }
}

fn collect_tokens<'a>(nodes: &'a [Node], out: &mut Vec<&'a TokenNode>) {
    for n in nodes {
        match n {
            Node::Token(t) => out.push(t),
            Node::Group(g) => collect_tokens(&g.children, out),
            _ => {}
        }
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            c => out.push(c),
        }
    }
    out
}

fn render_node(n: &Node, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    match n {
        Node::Token(t) => {
            let tag = t.tag.map_or("", TokenTag::name);
            let _ = writeln!(out, "{pad}TOK({tag}): \"{}\"", escape(&t.lexeme));
        }
        Node::Decoration(d) => {
            let _ = writeln!(out, "{pad}DEC: \"{}\"", escape(&d.lexeme));
        }
        Node::Group(g) => {
            let mut text = String::new();
            collect_text(&g.children, &mut text, true);
            let ty = g.group_type.map_or("", GroupType::name);
            let _ = writeln!(out, "{pad}GROUP({ty}): \"{}\"", escape(&text));
            for c in &g.children {
                render_node(c, depth + 1, out);
            }
        }
        Node::RegionStart { var } => {
            let _ = writeln!(out, "{pad}REGION_START({var})");
        }
        Node::RegionEnd { var, allow_empty } => {
            let e = if *allow_empty { ", empty ok" } else { "" };
            let _ = writeln!(out, "{pad}REGION_END({var}{e})");
        }
        Node::Truncation { var } => {
            let _ = writeln!(out, "{pad}TRUNCATE({var})");
        }
    }
}
