use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Confidence, GroupType, Node, NodeTree};
use crate::diagram::Assignment;
use crate::error::TreeError;

/// One step of a depth-first walk over an augmented prototype. Decorations
/// and layout-only groups produce no events.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WalkEvent {
    Enter(GroupType),
    Exit(GroupType),
    Var(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    RegionStart,
    RegionEnd,
    Truncation,
    TokenInRegion,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableInfo {
    pub var: usize,
    pub kind: VarKind,
    pub domain: u8,
    /// Number of tokens that precede the variable's node.
    pub position: usize,
    /// Index of the token for `TokenInRegion` variables.
    pub token_index: Option<usize>,
    /// For region ends: whether the region may close without covering a token.
    pub allow_empty: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableLayout {
    pub variables: Vec<VariableInfo>,
    #[serde(skip)]
    events: Vec<WalkEvent>,
    pub num_tokens: usize,
}

impl VariableLayout {
    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn domains(&self) -> Vec<u8> {
        self.variables.iter().map(|v| v.domain).collect()
    }

    pub fn events(&self) -> &[WalkEvent] {
        &self.events
    }

    pub fn count(&self, kind: VarKind) -> usize {
        self.variables.iter().filter(|v| v.kind == kind).count()
    }

    /// The indicator variable of each token, in token order.
    pub fn token_vars(&self) -> Vec<usize> {
        self.variables
            .iter()
            .filter(|v| v.kind == VarKind::TokenInRegion)
            .map(|v| v.var)
            .collect()
    }

    pub fn truncation_vars(&self) -> Vec<usize> {
        self.variables
            .iter()
            .filter(|v| v.kind == VarKind::Truncation)
            .map(|v| v.var)
            .collect()
    }
}

/// Variables in depth-first order: one per control node and one region
/// indicator per token.
pub fn layout_variables(augmented: &NodeTree) -> VariableLayout {
    let mut layout = VariableLayout::default();
    walk(&augmented.root.children, &mut layout);
    layout
}

fn walk(nodes: &[Node], out: &mut VariableLayout) {
    for n in nodes {
        let var = out.variables.len();
        let position = out.num_tokens;
        let info = |kind, allow_empty| VariableInfo {
            var,
            kind,
            domain: 2,
            position,
            token_index: None,
            allow_empty,
        };
        match n {
            Node::Token(_) => {
                out.variables.push(VariableInfo {
                    token_index: Some(position),
                    ..info(VarKind::TokenInRegion, false)
                });
                out.num_tokens += 1;
            }
            Node::RegionStart { .. } => out.variables.push(info(VarKind::RegionStart, false)),
            Node::RegionEnd { allow_empty, .. } => {
                out.variables.push(info(VarKind::RegionEnd, *allow_empty))
            }
            Node::Truncation { .. } => out.variables.push(info(VarKind::Truncation, false)),
            Node::Decoration(_) => continue,
            Node::Group(g) => {
                let structural = g.group_type.filter(|t| !t.is_transparent());
                if let Some(t) = structural {
                    out.events.push(WalkEvent::Enter(t));
                }
                walk(&g.children, out);
                if let Some(t) = structural {
                    out.events.push(WalkEvent::Exit(t));
                }
                continue;
            }
        }
        out.events.push(WalkEvent::Var(var));
    }
}

/// Coarse view of a [`ConstraintState`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RegionMode {
    OutsideRegion,
    InRegionTemporary,
    InRegionForced,
}

/// State of the region automaton between two variables.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConstraintState {
    pub in_region: bool,
    /// Groups entered since the open region started.
    pub depth: u32,
    /// The open region has not covered a token yet.
    pub empty: bool,
    pub truncated: bool,
    /// A non-empty region closed and no token followed yet. Truncating here
    /// is forbidden so that an UNSURE tail has a single encoding.
    pub closed_since_token: bool,
}

impl ConstraintState {
    pub fn mode(&self) -> RegionMode {
        match (self.in_region, self.depth) {
            (false, _) => RegionMode::OutsideRegion,
            (true, 0) => RegionMode::InRegionTemporary,
            (true, _) => RegionMode::InRegionForced,
        }
    }

    pub fn accepts(&self) -> bool {
        self.truncated || !self.in_region
    }
}

/// Legal region and truncation settings, as a deterministic automaton over
/// the walk events of a layout.
#[derive(Clone, Copy, Debug, Default)]
pub struct ConstraintAutomaton;

impl ConstraintAutomaton {
    pub fn initial(&self) -> ConstraintState {
        ConstraintState::default()
    }

    pub fn enter(&self, s: ConstraintState) -> Option<ConstraintState> {
        if s.in_region && !s.truncated {
            return Some(ConstraintState { depth: s.depth + 1, ..s });
        }
        Some(s)
    }

    pub fn exit(&self, s: ConstraintState) -> Option<ConstraintState> {
        if s.in_region && !s.truncated {
            if s.depth == 0 {
                return None;
            }
            return Some(ConstraintState { depth: s.depth - 1, ..s });
        }
        Some(s)
    }

    pub fn step(&self, s: ConstraintState, info: &VariableInfo, value: u8) -> Option<ConstraintState> {
        if value > 1 {
            return None;
        }
        if s.truncated {
            return (value == 0).then_some(s);
        }
        match (info.kind, value) {
            (VarKind::TokenInRegion, v) => {
                if (v == 1) != s.in_region {
                    return None;
                }
                Some(ConstraintState { empty: false, closed_since_token: false, ..s })
            }
            (_, 0) => Some(s),
            (VarKind::RegionStart, _) => (!s.in_region).then_some(ConstraintState {
                in_region: true,
                depth: 0,
                empty: true,
                ..s
            }),
            (VarKind::RegionEnd, _) => {
                if !s.in_region || s.depth != 0 || (s.empty && !info.allow_empty) {
                    return None;
                }
                Some(ConstraintState {
                    in_region: false,
                    depth: 0,
                    empty: false,
                    closed_since_token: !s.empty,
                    ..s
                })
            }
            (VarKind::Truncation, _) => {
                if s.closed_since_token {
                    return None;
                }
                Some(ConstraintState {
                    truncated: true,
                    depth: 0,
                    empty: false,
                    closed_since_token: false,
                    ..s
                })
            }
        }
    }

    /// Applies the group events that precede variable `var` in `events`,
    /// starting at `cursor`. Returns the new cursor.
    pub fn advance_groups(
        &self,
        events: &[WalkEvent],
        mut cursor: usize,
        mut s: ConstraintState,
    ) -> (usize, Option<ConstraintState>) {
        while let Some(e) = events.get(cursor) {
            let next = match e {
                WalkEvent::Var(_) => break,
                WalkEvent::Enter(_) => self.enter(s),
                WalkEvent::Exit(_) => self.exit(s),
            };
            cursor += 1;
            match next {
                Some(n) => s = n,
                None => return (cursor, None),
            }
        }
        (cursor, Some(s))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuggestionToken {
    pub lexeme: String,
    pub confidence: Confidence,
}

/// A suggestion with confidence annotations.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedSuggestion {
    /// The tokens that are shown, so a truncated suggestion holds only its
    /// prefix.
    pub tokens: Vec<SuggestionToken>,
    /// Token count at which the prototype was cut.
    pub truncation: Option<usize>,
    /// Gaps, as token counts, where code is likely missing.
    pub insertion_markers: BTreeSet<usize>,
}

impl AnnotatedSuggestion {
    /// Every prototype token, all SURE.
    pub fn all_sure(prototype: &NodeTree) -> Self {
        AnnotatedSuggestion {
            tokens: prototype
                .tokens()
                .into_iter()
                .map(|t| SuggestionToken { lexeme: t.lexeme.clone(), confidence: Confidence::Sure })
                .collect(),
            truncation: None,
            insertion_markers: BTreeSet::new(),
        }
    }

    pub fn unsure_count(&self) -> usize {
        self.tokens.iter().filter(|t| t.confidence == Confidence::Unsure).count()
    }

    pub fn text(&self) -> String {
        self.tokens.iter().map(|t| t.lexeme.as_str()).collect()
    }
}

fn check_len(layout: &VariableLayout, a: &Assignment) -> Result<(), TreeError> {
    if a.len() != layout.len() {
        return Err(TreeError::LengthMismatch { expected: layout.len(), got: a.len() });
    }
    Ok(())
}

/// Reads the annotated suggestion off an assignment of the prototype's
/// variables. Tokens inside a region are UNSURE.
pub fn decode_suggestion(augmented: &NodeTree, a: &Assignment) -> Result<AnnotatedSuggestion, TreeError> {
    let layout = layout_variables(augmented);
    decode_with_layout(augmented, &layout, a)
}

pub(crate) fn decode_with_layout(
    augmented: &NodeTree,
    layout: &VariableLayout,
    a: &Assignment,
) -> Result<AnnotatedSuggestion, TreeError> {
    check_len(layout, a)?;
    let lexemes: Vec<&str> = augmented.tokens().into_iter().map(|t| t.lexeme.as_str()).collect();
    let auto = ConstraintAutomaton;
    let mut s = auto.initial();
    let mut out = AnnotatedSuggestion::default();
    let mut cursor = 0;
    let violation = |what: String| TreeError::ConstraintViolation(what);
    for info in &layout.variables {
        let (c, next) = auto.advance_groups(&layout.events, cursor, s);
        cursor = c + 1;
        s = next.ok_or_else(|| violation(format!("region open at depth 0 leaves its group before variable {}", info.var)))?;
        let value = a.get(info.var);
        let before = s;
        s = auto
            .step(s, info, value)
            .ok_or_else(|| violation(format!("{:?} variable {} cannot be {value} here", info.kind, info.var)))?;
        if before.truncated {
            continue;
        }
        match info.kind {
            VarKind::TokenInRegion => {
                let idx = info.token_index.unwrap_or_default();
                out.tokens.push(SuggestionToken {
                    lexeme: lexemes[idx].to_string(),
                    confidence: if value == 1 { Confidence::Unsure } else { Confidence::Sure },
                });
            }
            VarKind::RegionEnd if value == 1 && before.empty => {
                out.insertion_markers.insert(info.position);
            }
            VarKind::Truncation if value == 1 => out.truncation = Some(info.position),
            _ => {}
        }
    }
    let (_, end) = auto.advance_groups(&layout.events, cursor, s);
    let end = end.ok_or_else(|| violation("region leaves its group at the end".into()))?;
    if !end.accepts() {
        return Err(violation("region is never closed".into()));
    }
    Ok(out)
}

/// Whether region end `var` is the last one at its own nesting level before
/// the enclosing group closes, so an open region has to end there.
fn last_end_in_group(layout: &VariableLayout, var: usize) -> bool {
    let events = &layout.events;
    let Some(at) = events.iter().position(|e| *e == WalkEvent::Var(var)) else {
        return false;
    };
    let mut depth = 0u32;
    for e in &events[at + 1..] {
        match *e {
            WalkEvent::Enter(_) => depth += 1,
            WalkEvent::Exit(_) if depth == 0 => return true,
            WalkEvent::Exit(_) => depth -= 1,
            WalkEvent::Var(v) if depth == 0 && layout.variables[v].kind == VarKind::RegionEnd => return false,
            WalkEvent::Var(_) => {}
        }
    }
    false
}

/// The embedding of an annotated suggestion into the prototype's variables.
/// Fails when the suggestion lies outside the space the controls allow.
pub fn encode_suggestion(augmented: &NodeTree, s: &AnnotatedSuggestion) -> Result<Assignment, TreeError> {
    let layout = layout_variables(augmented);
    let protos: Vec<&str> = augmented.tokens().into_iter().map(|t| t.lexeme.as_str()).collect();
    let kept = s.truncation.unwrap_or(protos.len());
    let not_rep = |m: String| TreeError::NotRepresentable(m);
    if s.tokens.len() != kept || kept > protos.len() {
        return Err(not_rep(format!("{} tokens for {kept} kept prototype tokens", s.tokens.len())));
    }
    if let Some(i) = s.tokens.iter().zip(&protos).position(|(t, p)| t.lexeme != *p) {
        return Err(not_rep(format!("token {i} differs from the prototype")));
    }
    let conf = |i: usize| s.tokens.get(i).map(|t| t.confidence);
    let auto = ConstraintAutomaton;
    let mut st = auto.initial();
    let mut cursor = 0;
    let mut markers_done = BTreeSet::new();
    let mut values = vec![0u8; layout.len()];
    let vars = &layout.variables;
    for (k, info) in vars.iter().enumerate() {
        let (c, next) = auto.advance_groups(&layout.events, cursor, st);
        cursor = c + 1;
        st = next.ok_or_else(|| not_rep("a region would have to leave its group".into()))?;
        let want = if st.truncated {
            0
        } else {
            match info.kind {
                VarKind::TokenInRegion => u8::from(st.in_region),
                VarKind::Truncation => {
                    u8::from(s.truncation == Some(info.position) && !st.closed_since_token)
                }
                VarKind::RegionStart => {
                    let next_unsure = conf(info.position) == Some(Confidence::Unsure);
                    let marker = s.insertion_markers.contains(&info.position)
                        && !markers_done.contains(&info.position)
                        && vars.get(k + 1).is_some_and(|e| e.kind == VarKind::RegionEnd && e.allow_empty);
                    u8::from(!st.in_region && (next_unsure || marker))
                }
                VarKind::RegionEnd => {
                    let close = if st.empty {
                        s.insertion_markers.contains(&info.position)
                            && conf(info.position) != Some(Confidence::Unsure)
                            && markers_done.insert(info.position)
                    } else {
                        match conf(info.position) {
                            Some(c) => c == Confidence::Sure,
                            None => s.truncation.is_none(),
                        }
                    };
                    u8::from(st.in_region && st.depth == 0 && (close || last_end_in_group(&layout, info.var)))
                }
            }
        };
        values[info.var] = want;
        st = auto
            .step(st, info, want)
            .ok_or_else(|| not_rep(format!("no legal setting for variable {}", info.var)))?;
    }
    let a = Assignment(values);
    match decode_with_layout(augmented, &layout, &a) {
        Ok(back) if back == *s => Ok(a),
        Ok(_) => Err(not_rep("regions or markers do not fit the allowed boundaries".into())),
        Err(e) => Err(not_rep(e.to_string())),
    }
}
