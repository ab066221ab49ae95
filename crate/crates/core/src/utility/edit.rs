use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::UtilityConfig;
use crate::diagram::{ArcKind, Diagram, NodeId, OrderedDiagram, PartialAssignment};
use crate::error::BuildError;
use crate::tree::{Confidence, GroupType, Node, NodeTree, TokenNode};

/// Phase of the alignment at a diagram state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EditState {
    /// Stepping over control nodes between two matches.
    ProcessPrototype,
    MayDelete,
    MayInsert,
    Match,
    /// Inside a prototype group that is deleted as a whole.
    RecursivelyDeleting,
    /// Inside an intent group that is inserted as a whole. Insertions carry
    /// no variables, so these states are folded into a single arc.
    RecursivelyInserting,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Ctrl {
    Start,
    End,
    Truncate,
}

#[derive(Clone, Copy, Debug)]
pub(crate) enum Item<'a> {
    Open(GroupType),
    Close,
    Tok(&'a TokenNode, usize),
    Ctrl(Ctrl, usize),
}

/// A tree as a bracketed item sequence. Layout-only groups and bracket
/// interiors are dissolved, decorations dropped.
pub(crate) struct Flat<'a> {
    pub items: Vec<Item<'a>>,
    /// Open groups before each position; one extra entry for the end.
    pub depth: Vec<u32>,
    /// Variables before each position; one extra entry for the end.
    pub level: Vec<usize>,
    /// For an `Open` item, the index of its `Close`.
    pub close_of: Vec<usize>,
    /// For an `Open` item, the weight of all tokens inside.
    pub inner_weight: Vec<f64>,
}

impl<'a> Flat<'a> {
    pub fn new(tree: &'a NodeTree, weight: impl Fn(&TokenNode) -> f64) -> Self {
        let mut items = Vec::new();
        let mut next_var = 0;
        flatten(&tree.root.children, &mut items, &mut next_var);
        let n = items.len();
        let mut depth = Vec::with_capacity(n + 1);
        let mut level = Vec::with_capacity(n + 1);
        let mut close_of = vec![usize::MAX; n];
        let mut inner_weight = vec![0.0; n];
        let mut stack: Vec<usize> = Vec::new();
        let mut vars = 0;
        for (i, it) in items.iter().enumerate() {
            depth.push(stack.len() as u32);
            level.push(vars);
            match it {
                Item::Open(_) => stack.push(i),
                Item::Close => {
                    let open = stack.pop().expect("balanced groups");
                    close_of[open] = i;
                }
                Item::Tok(t, _) => {
                    vars += 1;
                    let w = weight(t);
                    for &o in &stack {
                        inner_weight[o] += w;
                    }
                }
                Item::Ctrl(..) => vars += 1,
            }
        }
        depth.push(0);
        level.push(vars);
        Flat { items, depth, level, close_of, inner_weight }
    }

    pub fn num_vars(&self) -> usize {
        *self.level.last().unwrap_or(&0)
    }
}

fn flatten<'a>(nodes: &'a [Node], out: &mut Vec<Item<'a>>, next_var: &mut usize) {
    for n in nodes {
        let mut var = || {
            *next_var += 1;
            *next_var - 1
        };
        match n {
            Node::Token(t) => out.push(Item::Tok(t, var())),
            Node::RegionStart { .. } => out.push(Item::Ctrl(Ctrl::Start, var())),
            Node::RegionEnd { .. } => out.push(Item::Ctrl(Ctrl::End, var())),
            Node::Truncation { .. } => out.push(Item::Ctrl(Ctrl::Truncate, var())),
            Node::Decoration(_) => {}
            Node::Group(g) => match g.group_type {
                Some(t) if !t.is_transparent() && t != GroupType::MatchInner => {
                    out.push(Item::Open(t));
                    flatten(&g.children, out, next_var);
                    out.push(Item::Close);
                }
                _ => flatten(&g.children, out, next_var),
            },
        }
    }
}

const PP: u8 = 0;
const MD: u8 = 1;
const MI: u8 = 2;
const MT: u8 = 3;
const RD: u8 = 4;

type Key = (u32, u32, u8, u8);

struct Builder<'a, 'c> {
    p: &'c Flat<'a>,
    g: &'c Flat<'a>,
    config: &'c UtilityConfig,
    d: Diagram,
    ids: HashMap<Key, NodeId>,
    todo: Vec<Key>,
    sink: NodeId,
    /// Truncated chain, one node per level; the last one is the sink.
    chain: Vec<Option<NodeId>>,
}

impl Builder<'_, '_> {
    fn node(&mut self, key: Key) -> NodeId {
        if let Some(&id) = self.ids.get(&key) {
            return id;
        }
        let id = self.d.add_node(self.p.level[key.0 as usize]);
        self.ids.insert(key, id);
        self.todo.push(key);
        id
    }

    fn chain(&mut self, level: usize) -> NodeId {
        if let Some(id) = self.chain[level] {
            return id;
        }
        let mut top = level;
        while self.chain[top].is_none() {
            top += 1;
        }
        for l in (level..top).rev() {
            let id = self.d.add_node(l);
            let next = self.chain[l + 1].expect("filled above");
            self.d.add_labeled_arc(id, next, l, 0, 0.0, ArcKind::Truncate);
            self.chain[l] = Some(id);
        }
        self.chain[level].expect("filled")
    }

    fn conf(c: u8) -> Confidence {
        if c == 0 {
            Confidence::Sure
        } else {
            Confidence::Unsure
        }
    }

    fn expand(&mut self, key: Key) {
        let (p, g, st, c) = key;
        let (pi, gi) = (p as usize, g as usize);
        let here = self.ids[&key];
        let costs = *self.config.costs(Self::conf(c));
        let p_item = self.p.items.get(pi).copied();
        let g_item = self.g.items.get(gi).copied();
        let at_ctrl = matches!(p_item, Some(Item::Ctrl(..)));

        // Control nodes: region switches and truncation.
        if let Some(Item::Ctrl(kind, var)) = p_item {
            if matches!(st, PP | MD | RD) {
                let stay = self.node((p + 1, g, st, c));
                self.d.add_labeled_arc(here, stay, var, 0, 0.0, ArcKind::Control);
                match kind {
                    Ctrl::Start if c == 0 => {
                        let t = self.node((p + 1, g, st, 1));
                        self.d.add_labeled_arc(here, t, var, 1, 0.0, ArcKind::Control);
                    }
                    Ctrl::End if c == 1 => {
                        let t = self.node((p + 1, g, st, 0));
                        self.d.add_labeled_arc(here, t, var, 1, 0.0, ArcKind::Control);
                    }
                    Ctrl::Truncate => {
                        let t = self.chain(var + 1);
                        self.d.add_labeled_arc(here, t, var, 1, 0.0, ArcKind::Truncate);
                    }
                    _ => {}
                }
            }
        }

        match st {
            PP => {
                if !at_ctrl {
                    let m = self.node((p, g, MT, c));
                    self.d.add_arc(here, m, 0.0, ArcKind::Plain);
                }
                let md = self.node((p, g, MD, c));
                self.d.add_arc(here, md, -costs.edit_start_penalty, ArcKind::Plain);
            }
            MD => {
                if !at_ctrl {
                    let mi = self.node((p, g, MI, c));
                    self.d.add_arc(here, mi, 0.0, ArcKind::Plain);
                }
                match p_item {
                    Some(Item::Tok(t, var)) => {
                        let w = self.config.token_weight(t);
                        let next = self.node((p + 1, g, MD, c));
                        self.d.add_labeled_arc(here, next, var, c, -costs.delete_cost * w, ArcKind::Delete);
                    }
                    Some(Item::Open(_)) => {
                        let next = self.node((p + 1, g, RD, c));
                        self.d.add_arc(here, next, 0.0, ArcKind::Delete);
                    }
                    _ => {}
                }
            }
            RD => match p_item {
                Some(Item::Tok(t, var)) => {
                    let w = self.config.token_weight(t);
                    let next = self.node((p + 1, g, RD, c));
                    self.d.add_labeled_arc(here, next, var, c, -costs.delete_cost * w, ArcKind::Delete);
                }
                Some(Item::Open(_)) => {
                    let next = self.node((p + 1, g, RD, c));
                    self.d.add_arc(here, next, 0.0, ArcKind::Delete);
                }
                Some(Item::Close) => {
                    let back = if self.p.depth[pi] - 1 == self.g.depth[gi] { MD } else { RD };
                    let next = self.node((p + 1, g, back, c));
                    self.d.add_arc(here, next, 0.0, ArcKind::Delete);
                }
                _ => {}
            },
            MI => {
                let m = self.node((p, g, MT, c));
                self.d.add_arc(here, m, 0.0, ArcKind::Plain);
                let ins = self.config.insert_cost;
                match g_item {
                    Some(Item::Tok(t, _)) => {
                        let w = self.config.token_weight(t);
                        let next = self.node((p, g + 1, MI, c));
                        self.d.add_arc(here, next, -ins * w, ArcKind::Insert);
                    }
                    Some(Item::Open(_)) => {
                        let close = self.g.close_of[gi] as u32;
                        let w = self.g.inner_weight[gi];
                        let next = self.node((p, close + 1, MI, c));
                        self.d.add_arc(here, next, -ins * w, ArcKind::Insert);
                    }
                    _ => {}
                }
            }
            MT => match (p_item, g_item) {
                (None, None) => {
                    let sink = self.sink;
                    self.d.add_arc(here, sink, 0.0, ArcKind::Plain);
                }
                (Some(Item::Tok(a, var)), Some(Item::Tok(b, _))) if a.matches(b) => {
                    let w = self.config.token_weight(a);
                    let next = self.node((p + 1, g + 1, PP, c));
                    self.d.add_labeled_arc(here, next, var, c, costs.match_utility * w, ArcKind::Match);
                }
                (Some(Item::Open(a)), Some(Item::Open(b))) if a == b => {
                    let next = self.node((p + 1, g + 1, PP, c));
                    self.d.add_arc(here, next, 0.0, ArcKind::Match);
                }
                (Some(Item::Close), Some(Item::Close)) => {
                    let next = self.node((p + 1, g + 1, PP, c));
                    self.d.add_arc(here, next, 0.0, ArcKind::Match);
                }
                _ => {}
            },
            _ => unreachable!("unknown state {st}"),
        }
    }
}

/// Edit diagram between an augmented prototype and an intent tree.
///
/// States pair a prototype position with an intent position, an
/// [`EditState`] and the confidence in force. Bracket and string groups can
/// only be matched as a whole against a group of the same type, or deleted
/// or inserted as a whole. Token arcs carry the token's region indicator and
/// are only taken with the value that agrees with the tracked confidence.
pub fn build_hierarchical_edit_diagram(
    prototype: &NodeTree,
    intent: &NodeTree,
    config: &UtilityConfig,
) -> Result<OrderedDiagram, BuildError> {
    let weight = |t: &TokenNode| config.token_weight(t);
    let p = Flat::new(prototype, weight);
    let g = Flat::new(intent, weight);
    let n = p.num_vars();
    let mut d = Diagram::binary(n);
    let sink = d.add_node(n);
    d.set_sink(sink);
    let mut chain = vec![None; n + 1];
    chain[n] = Some(sink);
    let source = d.source();
    let mut b = Builder { p: &p, g: &g, config, d, ids: HashMap::new(), todo: Vec::new(), sink, chain };
    b.ids.insert((0, 0, PP, 0), source);
    b.todo.push((0, 0, PP, 0));
    while let Some(key) = b.todo.pop() {
        b.expand(key);
    }
    let frozen = b.d.freeze()?;
    if frozen.best_path_value(&PartialAssignment::free(n)) == f64::NEG_INFINITY {
        return Err(BuildError::NoSinkPath);
    }
    Ok(frozen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::Assignment;
    use crate::parse::{parse_source, LanguageName};
    use crate::tree::{augment_prototype, encode_suggestion, AnnotatedSuggestion, TaskKind};

    fn unit(esp: f64) -> UtilityConfig {
        let mut c = UtilityConfig::per_token(0.7, 0.3);
        c.sure.edit_start_penalty = esp;
        c
    }

    fn all_sure_value(proto: &str, intent: &str, config: &UtilityConfig, task: TaskKind) -> f64 {
        let p = augment_prototype(&parse_source(proto, LanguageName::Java), task).unwrap();
        let g = parse_source(intent, LanguageName::Java);
        let d = build_hierarchical_edit_diagram(&p, &g, config).unwrap();
        let a = encode_suggestion(&p, &AnnotatedSuggestion::all_sure(&p)).unwrap();
        d.best_path_value(&a.to_partial())
    }

    #[test]
    fn identity_matches_every_character() {
        let c = UtilityConfig::default();
        let v = all_sure_value("foo bar baz", "foo bar baz", &c, TaskKind::Regions);
        assert_eq!(v, 9.0);
    }

    #[test]
    fn single_edit_inside_group() {
        let v = all_sure_value("a [ b ] c", "a [ x ] c", &unit(5.0), TaskKind::Regions);
        // a, [, ], c match; b deleted; one edit start
        assert_eq!(v, 4.0 - 1.0 - 5.0);
    }

    #[test]
    fn missing_group_is_deleted_whole() {
        let v = all_sure_value("a [ b ] c", "a c", &unit(5.0), TaskKind::Regions);
        assert_eq!(v, 2.0 - 3.0 - 5.0);
    }

    #[test]
    fn truncating_everything_is_worth_zero() {
        let p = augment_prototype(&parse_source("a;\nb;\n", LanguageName::Java), TaskKind::Prefix).unwrap();
        let g = parse_source("x;\n", LanguageName::Java);
        let d = build_hierarchical_edit_diagram(&p, &g, &UtilityConfig::default()).unwrap();
        let mut a = Assignment::zeros(p.tokens().len() + 2);
        a.0[0] = 1;
        assert_eq!(d.best_path_value(&a.to_partial()), 0.0);
        assert!(d.best_path_value(&PartialAssignment::free(a.len())) >= 0.0);
    }

    #[test]
    fn empty_prototype_and_intent() {
        let d = build_hierarchical_edit_diagram(&NodeTree::empty(), &NodeTree::empty(), &UtilityConfig::default())
            .unwrap();
        assert_eq!(d.best_path_value(&PartialAssignment::free(0)), 0.0);
    }
}
