use std::sync::OnceLock;

use regex::Regex;

use crate::tree::{DecorationNode, GroupNode, GroupType, Node, NodeTree, Span, TokenNode, TokenTag};

fn raw_opening() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"\A[A-Za-z0-9]{0,3}R"[^()\\\s]{0,16}\("#).unwrap())
}

fn opening() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"\A[A-Za-z0-9]{0,3}(?:"""|'''|"|'|`)"#).unwrap())
}

fn piece() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\\(?s:.)|[\p{L}\p{N}_]+|\r\n|\n|\r|[^\S\r\n]+|(?s:.)").unwrap())
}

/// The closing delimiter matching an opening one.
fn closing_for(open: &str) -> String {
    if let Some(pos) = open.find("R\"") {
        let delim = &open[pos + 2..open.len() - 1];
        return format!("){delim}\"");
    }
    let quote = open.trim_start_matches(|c: char| c.is_ascii_alphanumeric());
    quote.to_string()
}

fn split(lexeme: &str, span: Span) -> Vec<Node> {
    let mut out = Vec::new();
    let tok = |s: &str, at: usize| {
        Node::Token(TokenNode {
            lexeme: s.to_string(),
            tag: Some(TokenTag::StringContent),
            span: Span::new(at, at + s.len()),
            synthetic: false,
            var: None,
        })
    };
    let Some(open) = raw_opening().find(lexeme).or_else(|| opening().find(lexeme)) else {
        return vec![tok(lexeme, span.start)];
    };
    let open_len = open.end();
    out.push(tok(&lexeme[..open_len], span.start));
    let close = closing_for(open.as_str());
    let body_end = if lexeme.len() >= open_len + close.len() && lexeme[open_len..].ends_with(close.as_str()) {
        lexeme.len() - close.len()
    } else {
        lexeme.len()
    };
    let mut pos = open_len;
    for m in piece().find_iter(&lexeme[open_len..body_end]) {
        let s = m.as_str();
        let at = span.start + pos;
        if s.trim().is_empty() {
            out.push(Node::Decoration(DecorationNode {
                lexeme: s.to_string(),
                span: Span::new(at, at + s.len()),
                synthetic: false,
            }));
        } else {
            out.push(tok(s, at));
        }
        pos += s.len();
    }
    if body_end < lexeme.len() {
        out.push(tok(&lexeme[body_end..], span.start + body_end));
    }
    out
}

fn walk(nodes: &[Node]) -> Vec<Node> {
    nodes
        .iter()
        .map(|n| match n {
            Node::Token(t) if t.tag == Some(TokenTag::StringLiteral) && !t.synthetic => {
                Node::Group(GroupNode::new(GroupType::StringLiteral, split(&t.lexeme, t.span)))
            }
            Node::Group(g) => Node::Group(GroupNode { group_type: g.group_type, children: walk(&g.children) }),
            n => n.clone(),
        })
        .collect()
}

/// Replaces every string literal token by a group of word-level pieces.
/// Pieces are tagged `StringContent`, so a second application changes nothing.
pub fn subtokenize_strings(tree: &NodeTree) -> NodeTree {
    NodeTree {
        root: GroupNode { group_type: tree.root.group_type, children: walk(&tree.root.children) },
    }
}
