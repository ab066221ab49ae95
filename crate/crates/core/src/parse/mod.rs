//! Error-tolerant pseudo-parsing of source fragments.
//!
//! Text is cut into tokens by a per-language regex table, then brackets are
//! matched into nested groups. Missing closers are added as synthetic
//! zero-width tokens and closers with no opener of their kind are kept as
//! plain tokens, so every input produces a tree whose non-synthetic leaves
//! spell out the input exactly.

mod lang;
mod strings;

pub use lang::{Language, LanguageName, LanguageSpec, TokenKind, TokenRule};
pub use strings::subtokenize_strings;

use serde::{Deserialize, Serialize};

use crate::error::ParseError;
use crate::tree::{DecorationNode, GroupNode, GroupType, Node, NodeTree, Span, TokenNode, TokenTag};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawToken {
    pub kind: TokenKind,
    pub lexeme: String,
    pub span: Span,
}

pub fn tokenize(source: &str, lang: &Language) -> Vec<RawToken> {
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < source.len() {
        let rest = &source[pos..];
        let mut hit = None;
        if let Some(caps) = lang.scanner.captures(rest) {
            for (i, &kind) in lang.kinds.iter().enumerate() {
                if let Some(m) = caps.name(&format!("t{i}")) {
                    if !m.as_str().is_empty() {
                        hit = Some((kind, m.end()));
                    }
                    break;
                }
            }
        }
        let (kind, len) = hit.unwrap_or_else(|| {
            let c = rest.chars().next().expect("non-empty");
            (TokenKind::Punc, c.len_utf8())
        });
        out.push(RawToken {
            kind,
            lexeme: rest[..len].to_string(),
            span: Span::new(pos, pos + len),
        });
        pos += len;
    }
    out
}

pub(crate) fn is_newline(s: &str) -> bool {
    matches!(s, "\n" | "\r\n" | "\r")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Role {
    Open(usize),
    Close(usize),
    Content(TokenTag),
    Decoration,
}

#[derive(Clone, Debug)]
struct Item {
    lexeme: String,
    span: Span,
    synthetic: bool,
    role: Role,
}

impl Item {
    fn into_node(self) -> Node {
        match self.role {
            Role::Decoration => Node::Decoration(DecorationNode {
                lexeme: self.lexeme,
                span: self.span,
                synthetic: self.synthetic,
            }),
            Role::Content(tag) => Node::Token(TokenNode {
                lexeme: self.lexeme,
                tag: Some(tag),
                span: self.span,
                synthetic: self.synthetic,
                var: None,
            }),
            Role::Open(_) | Role::Close(_) => unreachable!("brackets become groups"),
        }
    }

    fn bracket_token(self, tag: TokenTag) -> Node {
        Node::Token(TokenNode {
            lexeme: self.lexeme,
            tag: Some(tag),
            span: self.span,
            synthetic: self.synthetic,
            var: None,
        })
    }
}

fn items_from_tokens(tokens: &[RawToken], lang: &Language) -> Vec<Item> {
    tokens
        .iter()
        .map(|t| {
            let role = match t.kind {
                TokenKind::WhiteSpace | TokenKind::Newline | TokenKind::Comment => Role::Decoration,
                TokenKind::String => Role::Content(TokenTag::StringLiteral),
                TokenKind::Brace => match (lang.opener_index(&t.lexeme), lang.closer_index(&t.lexeme)) {
                    (Some(p), _) => Role::Open(p),
                    (None, Some(p)) => Role::Close(p),
                    _ => Role::Content(TokenTag::ContentLeaf),
                },
                _ => Role::Content(TokenTag::ContentLeaf),
            };
            Item { lexeme: t.lexeme.clone(), span: t.span, synthetic: false, role }
        })
        .collect()
}

/// Bracket vocabulary for one matching pass. Pair `lang.brackets.len()` is
/// the empty-string indentation pair when `indent` is set.
struct Pairs<'a> {
    lang: &'a Language,
    indent: bool,
}

impl Pairs<'_> {
    fn indent_pair(&self) -> usize {
        self.lang.brackets.len()
    }

    fn closer(&self, p: usize) -> &str {
        if self.indent && p == self.indent_pair() {
            ""
        } else {
            &self.lang.brackets[p].1
        }
    }

    fn is_block(&self, p: usize) -> bool {
        (self.indent && p == self.indent_pair()) || self.lang.block_brackets.contains(&self.lang.brackets[p].0)
    }
}

struct Frame {
    pair: usize,
    opener: Item,
    outer: Vec<Node>,
}

/// Matches brackets over `items`. With `shape` set, statement sequences
/// are split into lines and a final newline is ensured.
fn match_items(items: Vec<Item>, pairs: &Pairs, end: usize, shape: bool) -> NodeTree {
    let mut stack: Vec<Frame> = Vec::new();
    let mut cur: Vec<Node> = Vec::new();
    let close = |stack: &mut Vec<Frame>, cur: &mut Vec<Node>, closer: Item| {
        let frame = stack.pop().expect("open frame");
        let inner = std::mem::take(cur);
        let inner = if shape && pairs.is_block(frame.pair) { split_block(inner) } else { inner };
        *cur = frame.outer;
        cur.push(Node::Group(GroupNode::new(
            GroupType::Match,
            vec![
                frame.opener.bracket_token(TokenTag::MatchLeft),
                Node::Group(GroupNode::new(GroupType::MatchInner, inner)),
                closer.bracket_token(TokenTag::MatchRight),
            ],
        )));
    };
    for item in items {
        match item.role {
            Role::Open(p) => {
                let outer = std::mem::take(&mut cur);
                stack.push(Frame { pair: p, opener: item, outer });
            }
            Role::Close(p) => {
                if stack.iter().any(|f| f.pair == p) {
                    while stack.last().is_some_and(|f| f.pair != p) {
                        let q = stack.last().unwrap().pair;
                        let synth = Item {
                            lexeme: pairs.closer(q).to_string(),
                            span: Span::new(item.span.start, item.span.start),
                            synthetic: true,
                            role: Role::Close(q),
                        };
                        close(&mut stack, &mut cur, synth);
                    }
                    close(&mut stack, &mut cur, item);
                } else {
                    cur.push(Item { role: Role::Content(TokenTag::ContentLeaf), ..item }.into_node());
                }
            }
            _ => cur.push(item.into_node()),
        }
    }
    while let Some(f) = stack.last() {
        let synth = Item {
            lexeme: pairs.closer(f.pair).to_string(),
            span: Span::new(end, end),
            synthetic: true,
            role: Role::Close(f.pair),
        };
        close(&mut stack, &mut cur, synth);
    }
    if !shape {
        return NodeTree::new(cur);
    }
    let mut tree = NodeTree::new(cur);
    let text = tree.text();
    if !text.is_empty() && !text.ends_with('\n') && !text.ends_with('\r') {
        tree.root.children.push(Node::Decoration(DecorationNode {
            lexeme: "\n".to_string(),
            span: Span::new(end, end),
            synthetic: true,
        }));
    }
    let lines = split_lines(std::mem::take(&mut tree.root.children));
    tree.root.children = match lines.len() {
        0 => Vec::new(),
        1 => vec![Node::Group(GroupNode::new(GroupType::SplitGroup, lines.into_iter().next().unwrap()))],
        _ => vec![Node::Group(GroupNode::new(
            GroupType::SplitGroup,
            lines
                .into_iter()
                .map(|l| Node::Group(GroupNode::new(GroupType::SplitGroup, l)))
                .collect(),
        ))],
    };
    tree
}

fn split_block(children: Vec<Node>) -> Vec<Node> {
    let lines = split_lines(children);
    if lines.len() <= 1 {
        lines.into_iter().flatten().collect()
    } else {
        lines
            .into_iter()
            .map(|l| Node::Group(GroupNode::new(GroupType::SplitGroup, l)))
            .collect()
    }
}

/// Cuts a sequence after each newline decoration. Lines holding only
/// decorations are folded into the following line, or the previous one at
/// the end.
fn split_lines(children: Vec<Node>) -> Vec<Vec<Node>> {
    let mut raw: Vec<Vec<Node>> = Vec::new();
    let mut cur = Vec::new();
    for n in children {
        let nl = matches!(&n, Node::Decoration(d) if is_newline(&d.lexeme));
        cur.push(n);
        if nl {
            raw.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        raw.push(cur);
    }
    let mut lines: Vec<Vec<Node>> = Vec::new();
    let mut pending: Vec<Node> = Vec::new();
    for line in raw {
        let solid = line.iter().any(|n| !matches!(n, Node::Decoration(_)));
        pending.extend(line);
        if solid {
            lines.push(std::mem::take(&mut pending));
        }
    }
    if !pending.is_empty() {
        match lines.last_mut() {
            Some(last) => last.extend(pending),
            None => lines.push(pending),
        }
    }
    lines
}

/// Bracket matching. Python trees come back unshaped; run
/// [`python_indent_pass`] on them to get block structure and line groups.
pub fn pseudo_parse(tokens: &[RawToken], lang: &Language) -> NodeTree {
    let end = tokens.last().map_or(0, |t| t.span.end);
    let items = items_from_tokens(tokens, lang);
    let pairs = Pairs { lang, indent: false };
    match_items(items, &pairs, end, !lang.indent_sensitive)
}

fn flatten(nodes: Vec<Node>, lang: &Language, out: &mut Vec<Item>) {
    for n in nodes {
        match n {
            Node::Token(t) => {
                let role = match t.tag {
                    Some(TokenTag::MatchLeft) => Role::Open(lang.opener_index(&t.lexeme).unwrap_or(0)),
                    Some(TokenTag::MatchRight) => Role::Close(lang.closer_index(&t.lexeme).unwrap_or(0)),
                    tag => Role::Content(tag.unwrap_or(TokenTag::ContentLeaf)),
                };
                out.push(Item { lexeme: t.lexeme, span: t.span, synthetic: t.synthetic, role });
            }
            Node::Decoration(d) => out.push(Item {
                lexeme: d.lexeme,
                span: d.span,
                synthetic: d.synthetic,
                role: Role::Decoration,
            }),
            Node::Group(g) => flatten(g.children, lang, out),
            _ => {}
        }
    }
}

fn indent_width(source: &str, offset: usize) -> usize {
    let line_start = source[..offset].rfind(['\n', '\r']).map_or(0, |i| i + 1);
    let mut col = 0;
    for c in source[line_start..offset].chars() {
        col = if c == '\t' { (col / 8 + 1) * 8 } else { col + 1 };
    }
    col
}

/// Second pass for python: indentation blocks outside brackets become
/// groups delimited by empty-string bracket tokens, then the tree is shaped
/// into lines.
pub fn python_indent_pass(tree: NodeTree, source: &str) -> NodeTree {
    let lang = Language::get(LanguageName::Python);
    let end = source.len();
    let mut items = Vec::new();
    flatten(tree.root.children, lang, &mut items);

    // logical lines: (first item, first solid item, last solid item)
    let mut lines: Vec<(usize, usize, usize)> = Vec::new();
    let mut depth = 0usize;
    let mut line_start = 0;
    let mut first_solid: Option<usize> = None;
    let mut last_solid = 0;
    for (i, it) in items.iter().enumerate() {
        match it.role {
            Role::Open(_) => depth += 1,
            Role::Close(_) => depth = depth.saturating_sub(1),
            _ => {}
        }
        if it.role != Role::Decoration {
            first_solid.get_or_insert(i);
            last_solid = i;
        } else if depth == 0 && is_newline(&it.lexeme) {
            if let Some(f) = first_solid.take() {
                lines.push((line_start, f, last_solid));
            }
            line_start = i + 1;
        }
    }
    if let Some(f) = first_solid {
        lines.push((line_start, f, last_solid));
    }

    let indent_pair = lang.brackets.len();
    // insertions before item index: (index, opener?)
    let mut inserts: Vec<(usize, bool)> = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    let mut prev_last = 0;
    for (k, &(start, solid, last)) in lines.iter().enumerate() {
        let w = indent_width(source, items[solid].span.start);
        if k == 0 {
            stack.push(w);
        } else {
            let mut top = *stack.last().unwrap();
            if w < top {
                while stack.len() > 1 && *stack.last().unwrap() > w {
                    stack.pop();
                    inserts.push((prev_last + 1, false));
                }
                top = *stack.last().unwrap();
            }
            if w > top {
                stack.push(w);
                inserts.push((start, true));
            }
        }
        prev_last = last;
    }
    while stack.len() > 1 {
        stack.pop();
        inserts.push((prev_last + 1, false));
    }
    inserts.sort_by_key(|&(i, opener)| (i, opener));

    let mut merged = Vec::with_capacity(items.len() + inserts.len());
    let mut ins = inserts.into_iter().peekable();
    for (i, it) in items.into_iter().enumerate() {
        while let Some(&(at, opener)) = ins.peek() {
            if at != i {
                break;
            }
            merged.push(indent_item(opener, it.span.start, indent_pair));
            ins.next();
        }
        merged.push(it);
    }
    for (_, opener) in ins {
        merged.push(indent_item(opener, end, indent_pair));
    }
    let pairs = Pairs { lang, indent: true };
    match_items(merged, &pairs, end, true)
}

fn indent_item(opener: bool, at: usize, pair: usize) -> Item {
    Item {
        lexeme: String::new(),
        span: Span::new(at, at),
        synthetic: false,
        role: if opener { Role::Open(pair) } else { Role::Close(pair) },
    }
}

/// Full pipeline: tokenize, match brackets, python blocks, split strings.
pub fn parse_source(source: &str, name: LanguageName) -> NodeTree {
    let lang = Language::get(name);
    let tokens = tokenize(source, lang);
    let tree = pseudo_parse(&tokens, lang);
    let tree = if lang.indent_sensitive { python_indent_pass(tree, source) } else { tree };
    subtokenize_strings(&tree)
}

/// End of the innermost bracket or block group around `cursor`, or the end of
/// the statement the cursor sits in when it is not inside any group.
pub fn heuristic_truncation_point(
    source: &str,
    cursor: usize,
    name: LanguageName,
) -> Result<usize, ParseError> {
    if cursor > source.len() {
        return Err(ParseError::CursorOutOfRange { cursor, len: source.len() });
    }
    let lang = Language::get(name);
    let tree = parse_source(source, name);
    if let Some(end) = innermost_group_end(&tree.root.children, cursor) {
        return Ok(end.min(source.len()).max(cursor));
    }
    let mut leaves = Vec::new();
    top_level_leaves(&tree.root.children, &mut leaves);
    for (lexeme, span, is_token) in leaves {
        if span.start < cursor || span.start == span.end {
            continue;
        }
        let terminates = if is_token {
            lang.statement_terminators.contains(lexeme)
        } else {
            is_newline(lexeme)
        };
        if terminates {
            return Ok(span.end);
        }
    }
    Ok(source.len())
}

fn innermost_group_end(nodes: &[Node], cursor: usize) -> Option<usize> {
    for n in nodes {
        let Node::Group(g) = n else { continue };
        if g.group_type == Some(GroupType::Match) {
            let (left, right) = match (&g.children[0], &g.children[2]) {
                (Node::Token(l), Node::Token(r)) => (l.span, r.span),
                _ => continue,
            };
            if left.end <= cursor && cursor <= right.start && right.end > cursor {
                if let Node::Group(inner) = &g.children[1] {
                    if let Some(deeper) = innermost_group_end(&inner.children, cursor) {
                        return Some(deeper);
                    }
                }
                return Some(right.end);
            }
        } else if let Some(found) = innermost_group_end(&g.children, cursor) {
            return Some(found);
        }
    }
    None
}

fn top_level_leaves<'a>(nodes: &'a [Node], out: &mut Vec<(&'a str, Span, bool)>) {
    for n in nodes {
        match n {
            Node::Token(t) => out.push((&t.lexeme, t.span, true)),
            Node::Decoration(d) => out.push((&d.lexeme, d.span, false)),
            Node::Group(g) if g.group_type != Some(GroupType::Match) => top_level_leaves(&g.children, out),
            _ => {}
        }
    }
}
