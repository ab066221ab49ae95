use super::{GroupNode, Node, NodeTree, Span};

/// Drops every node that lies entirely inside the first `context_len` bytes
/// of `combined`, which was parsed from context and suggestion together.
/// Groups that straddle the boundary keep their suggestion-side children.
/// Spans of the remaining nodes are shifted to be relative to the suggestion.
///
/// Zero-width nodes sitting exactly at the boundary count as suggestion.
pub fn strip_context(context_len: usize, combined: &NodeTree) -> NodeTree {
    NodeTree {
        root: GroupNode {
            group_type: combined.root.group_type,
            children: strip(&combined.root.children, context_len),
        },
    }
}

fn in_context(span: Span, ctx: usize) -> bool {
    span.start < ctx && span.end <= ctx
}

fn shift(span: Span, ctx: usize) -> Span {
    Span::new(span.start.saturating_sub(ctx), span.end.saturating_sub(ctx))
}

fn strip(nodes: &[Node], ctx: usize) -> Vec<Node> {
    let mut out = Vec::new();
    for n in nodes {
        match n {
            Node::Token(t) if !in_context(t.span, ctx) => {
                let mut t = t.clone();
                t.span = shift(t.span, ctx);
                out.push(Node::Token(t));
            }
            Node::Decoration(d) if !in_context(d.span, ctx) => {
                let mut d = d.clone();
                d.span = shift(d.span, ctx);
                out.push(Node::Decoration(d));
            }
            Node::Group(g) => {
                let children = strip(&g.children, ctx);
                if !children.is_empty() {
                    out.push(Node::Group(GroupNode { group_type: g.group_type, children }));
                }
            }
            Node::Token(_) | Node::Decoration(_) => {}
            other => out.push(other.clone()),
        }
    }
    out
}
