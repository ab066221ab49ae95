use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::edit::{Ctrl, Flat, Item};
use crate::diagram::{ArcKind, Diagram, NodeId, OrderedDiagram, PartialAssignment};
use crate::error::BuildError;
use crate::tree::{GroupType, Node, NodeTree};

/// Token weights for the call task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApiWeights {
    /// Base weight of a token whose lexeme occurs in the context.
    pub seen_weight: f64,
    /// Base weight of a token that does not.
    pub novel_weight: f64,
    /// Added to the base weight of the closing parenthesis of a call.
    pub argument_list_bonus: f64,
    /// Utility per base weight of a selected token that the intent confirms.
    pub match_scale: f64,
    /// Cost per base weight of a selected token in a call the intent lacks.
    pub mismatch_scale: f64,
}

impl Default for ApiWeights {
    fn default() -> Self {
        ApiWeights {
            seen_weight: 1.0,
            novel_weight: 10.0,
            argument_list_bonus: 1.0,
            match_scale: 0.7,
            mismatch_scale: 0.3,
        }
    }
}

impl ApiWeights {
    pub fn validate(&self) -> Result<(), String> {
        let all = [
            ("api.seen_weight", self.seen_weight),
            ("api.novel_weight", self.novel_weight),
            ("api.argument_list_bonus", self.argument_list_bonus),
            ("api.match_scale", self.match_scale),
            ("api.mismatch_scale", self.mismatch_scale),
        ];
        for (name, v) in all {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("{name} must be a finite non-negative number, got {v}"));
            }
        }
        Ok(())
    }

    fn base(&self, lexeme: &str, closes_call: bool, seen: &HashSet<String>) -> f64 {
        let w = if seen.contains(lexeme) { self.seen_weight } else { self.novel_weight };
        if closes_call {
            w + self.argument_list_bonus
        } else {
            w
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Step {
    Start(usize),
    End(usize),
    /// Variable, lexeme index into the call, base weight.
    Tok(usize, usize, f64),
}

struct ProtoCall {
    steps: Vec<Step>,
    lexemes: Vec<String>,
    level: usize,
}

fn prototype_calls(prototype: &NodeTree, w: &ApiWeights, seen: &HashSet<String>) -> (Vec<ProtoCall>, usize) {
    let flat = Flat::new(prototype, |_| 1.0);
    let mut calls = Vec::new();
    let mut depth = 0;
    for (i, item) in flat.items.iter().enumerate() {
        match item {
            Item::Open(_) => {
                if depth == 0 {
                    calls.push(ProtoCall { steps: Vec::new(), lexemes: Vec::new(), level: flat.level[i] });
                }
                depth += 1;
            }
            Item::Close => depth -= 1,
            Item::Tok(t, var) => {
                let call = calls.last_mut().expect("tokens sit inside call groups");
                call.steps.push(Step::Tok(*var, call.lexemes.len(), 0.0));
                call.lexemes.push(t.lexeme.clone());
            }
            Item::Ctrl(Ctrl::Start, var) => calls.last_mut().expect("inside call").steps.push(Step::Start(*var)),
            Item::Ctrl(Ctrl::End, var) => calls.last_mut().expect("inside call").steps.push(Step::End(*var)),
            Item::Ctrl(Ctrl::Truncate, _) => unreachable!("call prototypes carry no truncation"),
        }
    }
    for c in &mut calls {
        let last_close = c.lexemes.iter().rposition(|l| l == ")");
        for s in &mut c.steps {
            if let Step::Tok(_, k, b) = s {
                *b = w.base(&c.lexemes[*k], Some(*k) == last_close && *k + 1 == c.lexemes.len(), seen);
            }
        }
    }
    (calls, flat.num_vars())
}

fn intent_calls(intent: &NodeTree) -> Vec<Vec<String>> {
    fn tokens(nodes: &[Node], out: &mut Vec<String>) {
        for n in nodes {
            match n {
                Node::Token(t) => out.push(t.lexeme.clone()),
                Node::Group(g) => tokens(&g.children, out),
                _ => {}
            }
        }
    }
    intent
        .root
        .children
        .iter()
        .filter_map(|n| match n {
            Node::Group(g) if g.group_type == Some(GroupType::Call) => {
                let mut out = Vec::new();
                tokens(&g.children, &mut out);
                Some(out)
            }
            _ => None,
        })
        .collect()
}

const BEFORE: u8 = 0;
const IN: u8 = 1;
const AFTER: u8 = 2;

/// Key of a node inside call `i`: outer intent index, matched intent call
/// (or none), step index, position in the matched call, phase.
type Key = (usize, usize, Option<usize>, usize, usize, u8);

fn node(ids: &mut HashMap<Key, NodeId>, d: &mut Diagram, todo: &mut Vec<Key>, key: Key, level: usize) -> NodeId {
    *ids.entry(key).or_insert_with(|| {
        todo.push(key);
        d.add_node(level)
    })
}

/// Diagram for the call task.
///
/// Prototype calls are aligned monotonically with the intent calls. In an
/// aligned pair, the selected tokens must spell a contiguous piece of the
/// intent call and earn `match_scale` times their base weight. Selected
/// tokens of a call left unaligned cost `mismatch_scale` times their base
/// weight. Unselected tokens and unaligned intent calls are free.
pub fn build_api_diagram(
    prototype: &NodeTree,
    intent: &NodeTree,
    weights: &ApiWeights,
    seen: &HashSet<String>,
) -> Result<OrderedDiagram, BuildError> {
    let (calls, n) = prototype_calls(prototype, weights, seen);
    let goals = intent_calls(intent);
    let mut d = Diagram::binary(n);
    let m = goals.len();

    // outer[i][j]: before prototype call i, j intent calls consumed
    let mut outer: Vec<Vec<NodeId>> = Vec::with_capacity(calls.len() + 1);
    for i in 0..=calls.len() {
        let level = calls.get(i).map_or(n, |c| c.level);
        let row: Vec<NodeId> = (0..=m)
            .map(|j| if i == 0 && j == 0 { d.source() } else { d.add_node(level) })
            .collect();
        for j in 0..m {
            d.add_arc(row[j], row[j + 1], 0.0, ArcKind::Insert);
        }
        outer.push(row);
    }
    d.set_sink(outer[calls.len()][m]);

    for (i, call) in calls.iter().enumerate() {
        let mut ids: HashMap<Key, NodeId> = HashMap::new();
        for j in 0..=m {
            let mut todo: Vec<Key> = Vec::new();
            // unaligned, then aligned with intent call j
            let mut entries = vec![(i, j, None, 0, 0, BEFORE)];
            if j < m {
                entries.push((i, j, Some(j), 0, 0, BEFORE));
            }
            for key in entries {
                let id = node(&mut ids, &mut d, &mut todo, key, call.level);
                d.add_arc(outer[i][j], id, 0.0, ArcKind::Plain);
            }
            while let Some(key) = todo.pop() {
                let (_, _, goal, s, k, phase) = key;
                let here = ids[&key];
                let level = match call.steps.get(s) {
                    Some(Step::Start(v) | Step::End(v) | Step::Tok(v, ..)) => *v,
                    None => call.steps.last().map_or(call.level, |st| match st {
                        Step::Start(v) | Step::End(v) | Step::Tok(v, ..) => v + 1,
                    }),
                };
                let g = goal.map(|x| &goals[x]);
                let Some(&step) = call.steps.get(s) else {
                    if phase != IN {
                        let exit = outer[i + 1][j + usize::from(goal.is_some())];
                        d.add_arc(here, exit, 0.0, ArcKind::Plain);
                    }
                    continue;
                };
                if phase == BEFORE {
                    if let Some(g) = g {
                        if k < g.len() {
                            let t = node(&mut ids, &mut d, &mut todo, (i, j, goal, s, k + 1, BEFORE), level);
                            d.add_arc(here, t, 0.0, ArcKind::Insert);
                        }
                    }
                }
                match step {
                    Step::Start(v) => {
                        let t = node(&mut ids, &mut d, &mut todo, (i, j, goal, s + 1, k, phase), v + 1);
                        d.add_labeled_arc(here, t, v, 0, 0.0, ArcKind::Control);
                        if phase == BEFORE {
                            let t = node(&mut ids, &mut d, &mut todo, (i, j, goal, s + 1, k, IN), v + 1);
                            d.add_labeled_arc(here, t, v, 1, 0.0, ArcKind::Control);
                        }
                    }
                    Step::End(v) => {
                        let t = node(&mut ids, &mut d, &mut todo, (i, j, goal, s + 1, k, phase), v + 1);
                        d.add_labeled_arc(here, t, v, 0, 0.0, ArcKind::Control);
                        if phase == IN {
                            let t = node(&mut ids, &mut d, &mut todo, (i, j, goal, s + 1, k, AFTER), v + 1);
                            d.add_labeled_arc(here, t, v, 1, 0.0, ArcKind::Control);
                        }
                    }
                    Step::Tok(v, lex, base) => {
                        if phase != IN {
                            let t = node(&mut ids, &mut d, &mut todo, (i, j, goal, s + 1, k, phase), v + 1);
                            d.add_labeled_arc(here, t, v, 0, 0.0, ArcKind::Plain);
                        } else if let Some(g) = g {
                            if g.get(k) == Some(&call.lexemes[lex]) {
                                let t = node(&mut ids, &mut d, &mut todo, (i, j, goal, s + 1, k + 1, IN), v + 1);
                                let w = weights.match_scale * base;
                                d.add_labeled_arc(here, t, v, 1, w, ArcKind::Match);
                            }
                        } else {
                            let t = node(&mut ids, &mut d, &mut todo, (i, j, goal, s + 1, k, IN), v + 1);
                            let w = -weights.mismatch_scale * base;
                            d.add_labeled_arc(here, t, v, 1, w, ArcKind::Delete);
                        }
                    }
                }
            }
        }
    }

    let frozen = d.freeze()?;
    if frozen.best_path_value(&PartialAssignment::free(n)) == f64::NEG_INFINITY {
        return Err(BuildError::NoSinkPath);
    }
    Ok(frozen)
}
