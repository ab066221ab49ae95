//! Nondeterministic weighted ordered decision diagrams.
//!
//! A [`Diagram`] is the append-only construction form. [`Diagram::freeze`]
//! validates it, drops nodes that lie on no source-to-sink path and groups the
//! arcs by level so that level sweeps are linear passes.
//!
//! Variables are local to a diagram: level `k` sits just before variable `k`
//! of the diagram's scope, and an arc labelled with variable `k` runs from
//! level `k` to level `k + 1`. Unlabelled arcs stay inside a level.

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::DiagramError;

pub type NodeId = usize;

/// What an arc stands for. Only used for path inspection and debug output.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArcKind {
    Plain,
    Match,
    Delete,
    Insert,
    Control,
    Truncate,
}

impl ArcKind {
    fn as_str(self) -> &'static str {
        match self {
            ArcKind::Plain => "plain",
            ArcKind::Match => "match",
            ArcKind::Delete => "delete",
            ArcKind::Insert => "insert",
            ArcKind::Control => "control",
            ArcKind::Truncate => "truncate",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Label {
    pub var: usize,
    pub value: u8,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArcSpec {
    pub head: NodeId,
    pub tail: NodeId,
    pub weight: f64,
    pub label: Option<Label>,
    pub kind: ArcKind,
}

/// A full setting of every variable in a layout.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Assignment(pub Vec<u8>);

impl Assignment {
    pub fn zeros(n: usize) -> Self {
        Assignment(vec![0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, var: usize) -> u8 {
        self.0[var]
    }

    pub fn to_partial(&self) -> PartialAssignment {
        PartialAssignment(self.0.iter().map(|&v| Some(v)).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct PartialAssignment(pub Vec<Option<u8>>);

impl PartialAssignment {
    pub fn free(n: usize) -> Self {
        PartialAssignment(vec![None; n])
    }

    pub fn fix(&mut self, var: usize, value: u8) {
        self.0[var] = Some(value);
    }

    pub fn allows(&self, var: usize, value: u8) -> bool {
        match self.0.get(var) {
            Some(Some(v)) => *v == value,
            _ => true,
        }
    }
}

/// Construction form of a diagram. Nodes and arcs are only ever appended.
#[derive(Clone, Debug)]
pub struct Diagram {
    domains: Vec<u8>,
    scope: Vec<usize>,
    node_level: Vec<usize>,
    arcs: Vec<ArcSpec>,
    source: NodeId,
    sink: Option<NodeId>,
}

impl Diagram {
    /// A diagram over `domains.len()` local variables whose scope is the
    /// identity mapping onto system variables `0..n`.
    pub fn new(domains: Vec<u8>) -> Self {
        let scope = (0..domains.len()).collect();
        Self::with_scope(domains, scope)
    }

    pub fn binary(num_vars: usize) -> Self {
        Self::new(vec![2; num_vars])
    }

    /// `scope[k]` is the system variable that local variable `k` stands for.
    pub fn with_scope(domains: Vec<u8>, scope: Vec<usize>) -> Self {
        assert_eq!(domains.len(), scope.len(), "scope and domains differ in length");
        Diagram {
            domains,
            scope,
            node_level: vec![0],
            arcs: Vec::new(),
            source: 0,
            sink: None,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.domains.len()
    }

    pub fn source(&self) -> NodeId {
        self.source
    }

    pub fn num_nodes(&self) -> usize {
        self.node_level.len()
    }

    pub fn arcs(&self) -> &[ArcSpec] {
        &self.arcs
    }

    pub fn level(&self, node: NodeId) -> usize {
        self.node_level[node]
    }

    pub fn add_node(&mut self, level: usize) -> NodeId {
        self.node_level.push(level);
        self.node_level.len() - 1
    }

    pub fn set_sink(&mut self, node: NodeId) {
        self.sink = Some(node);
    }

    pub fn add_arc(&mut self, head: NodeId, tail: NodeId, weight: f64, kind: ArcKind) {
        self.arcs.push(ArcSpec { head, tail, weight, label: None, kind });
    }

    pub fn add_labeled_arc(
        &mut self,
        head: NodeId,
        tail: NodeId,
        var: usize,
        value: u8,
        weight: f64,
        kind: ArcKind,
    ) {
        self.arcs.push(ArcSpec {
            head,
            tail,
            weight,
            label: Some(Label { var, value }),
            kind,
        });
    }

    /// Checks acyclicity, source/sink placement and the layering rule.
    pub fn validate(&self) -> Result<(), Vec<String>> {
        validate_ordered(self)
    }

    pub fn freeze(self) -> Result<OrderedDiagram, DiagramError> {
        validate_ordered(&self).map_err(DiagramError::Invalid)?;
        Ok(OrderedDiagram::from_valid(self))
    }
}

/// Reports every breach of the layering and source/sink rules.
pub fn validate_ordered(d: &Diagram) -> Result<(), Vec<String>> {
    let mut issues = Vec::new();
    let n = d.node_level.len();
    let depth = d.domains.len();
    let sink = match d.sink {
        Some(s) if s < n => s,
        Some(s) => {
            issues.push(format!("sink node {s} does not exist"));
            return Err(issues);
        }
        None => {
            issues.push("no sink node set".to_string());
            return Err(issues);
        }
    };
    if d.node_level[d.source] != 0 {
        issues.push(format!("source node has level {}", d.node_level[d.source]));
    }
    if d.node_level[sink] != depth {
        issues.push(format!(
            "sink node has level {} but the diagram has {depth} variables",
            d.node_level[sink]
        ));
    }
    for (node, &lvl) in d.node_level.iter().enumerate() {
        if lvl > depth {
            issues.push(format!("node {node} has level {lvl} beyond {depth}"));
        }
    }
    for (idx, a) in d.arcs.iter().enumerate() {
        if a.head >= n || a.tail >= n {
            issues.push(format!("arc {idx} references a missing node"));
            continue;
        }
        if a.tail == d.source {
            issues.push(format!("arc {idx} enters the source"));
        }
        if a.head == sink {
            issues.push(format!("arc {idx} leaves the sink"));
        }
        if a.weight.is_nan() || a.weight == f64::INFINITY {
            issues.push(format!("arc {idx} has weight {}", a.weight));
        }
        let (hl, tl) = (d.node_level[a.head], d.node_level[a.tail]);
        match a.label {
            None => {
                if hl != tl {
                    issues.push(format!(
                        "unlabelled arc {idx} crosses from level {hl} to level {tl}"
                    ));
                }
            }
            Some(Label { var, value }) => {
                if var >= depth {
                    issues.push(format!("arc {idx} assigns unknown variable {var}"));
                } else {
                    if hl != var || tl != var + 1 {
                        issues.push(format!(
                            "arc {idx} assigns variable {var} but runs from level {hl} to level {tl}"
                        ));
                    }
                    if value >= d.domains[var] {
                        issues.push(format!(
                            "arc {idx} assigns value {value} outside the domain of variable {var}"
                        ));
                    }
                }
            }
        }
    }
    if d.source == sink && !d.arcs.is_empty() && depth == 0 {
        // a single node serving as both ends may not carry arcs
        issues.push("source and sink coincide but the diagram has arcs".to_string());
    }
    if let Some(cycle_node) = find_cycle(n, &d.arcs) {
        issues.push(format!("cycle through node {cycle_node}"));
    }
    if issues.is_empty() {
        Ok(())
    } else {
        Err(issues)
    }
}

fn find_cycle(n: usize, arcs: &[ArcSpec]) -> Option<NodeId> {
    let mut indeg = vec![0usize; n];
    let mut out: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    for a in arcs {
        if a.head < n && a.tail < n {
            out[a.head].push(a.tail);
            indeg[a.tail] += 1;
        }
    }
    let mut queue: VecDeque<NodeId> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut seen = 0;
    while let Some(v) = queue.pop_front() {
        seen += 1;
        for &t in &out[v] {
            indeg[t] -= 1;
            if indeg[t] == 0 {
                queue.push_back(t);
            }
        }
    }
    if seen == n {
        None
    } else {
        (0..n).find(|&v| indeg[v] > 0)
    }
}

/// An arc of a frozen diagram. `head` and `tail` are level-local indices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevelArc {
    pub head: u32,
    pub tail: u32,
    pub value: u8,
    pub kind: ArcKind,
    pub weight: f64,
}

/// Position of an arc inside a frozen diagram.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ArcRef {
    Within { level: usize, index: usize },
    Across { var: usize, index: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComputationPath {
    pub arcs: Vec<ArcRef>,
    pub weight: f64,
}

/// A validated, pruned and level-grouped diagram.
///
/// Nodes inside a level are numbered in a topological order of the
/// unlabelled arcs, and those arcs are sorted by head. A forward pass over
/// `within[k]` therefore settles every node before it is used as a head, and a
/// reverse pass settles tails first.
#[derive(Clone, Debug)]
pub struct OrderedDiagram {
    domains: Vec<u8>,
    scope: Vec<usize>,
    level_sizes: Vec<usize>,
    within: Vec<Vec<LevelArc>>,
    across: Vec<Vec<LevelArc>>,
    source: u32,
    sink: u32,
}

impl OrderedDiagram {
    fn from_valid(d: Diagram) -> Self {
        let n = d.node_level.len();
        let depth = d.domains.len();
        let sink = d.sink.expect("validated");
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut inc: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (idx, a) in d.arcs.iter().enumerate() {
            out[a.head].push(idx);
            inc[a.tail].push(idx);
        }
        let fwd = reach(d.source, &out, |i| d.arcs[i].tail, n);
        let bwd = reach(sink, &inc, |i| d.arcs[i].head, n);
        let live: Vec<bool> = (0..n)
            .map(|v| (fwd[v] && bwd[v]) || v == d.source || v == sink)
            .collect();

        // topological order of unlabelled arcs inside each level
        let mut indeg = vec![0usize; n];
        for a in &d.arcs {
            if a.label.is_none() && live[a.head] && live[a.tail] {
                indeg[a.tail] += 1;
            }
        }
        let mut local = vec![u32::MAX; n];
        let mut level_sizes = vec![0usize; depth + 1];
        let mut queue: VecDeque<NodeId> =
            (0..n).filter(|&v| live[v] && indeg[v] == 0).collect();
        // the source must come first in level 0 so it gets index 0
        if let Some(pos) = queue.iter().position(|&v| v == d.source) {
            queue.remove(pos);
            queue.push_front(d.source);
        }
        while let Some(v) = queue.pop_front() {
            let lvl = d.node_level[v];
            local[v] = level_sizes[lvl] as u32;
            level_sizes[lvl] += 1;
            for &ai in &out[v] {
                let a = &d.arcs[ai];
                if a.label.is_none() && live[a.tail] {
                    indeg[a.tail] -= 1;
                    if indeg[a.tail] == 0 {
                        queue.push_back(a.tail);
                    }
                }
            }
        }

        let mut within: Vec<Vec<LevelArc>> = vec![Vec::new(); depth + 1];
        let mut across: Vec<Vec<LevelArc>> = vec![Vec::new(); depth];
        for a in &d.arcs {
            if !(live[a.head] && live[a.tail] && fwd[a.head] && bwd[a.tail]) {
                continue;
            }
            let arc = LevelArc {
                head: local[a.head],
                tail: local[a.tail],
                value: a.label.map_or(0, |l| l.value),
                kind: a.kind,
                weight: a.weight,
            };
            match a.label {
                None => within[d.node_level[a.head]].push(arc),
                Some(l) => across[l.var].push(arc),
            }
        }
        for arcs in within.iter_mut() {
            arcs.sort_by_key(|a| (a.head, a.tail));
        }
        for arcs in across.iter_mut() {
            arcs.sort_by_key(|a| (a.head, a.value, a.tail));
        }
        OrderedDiagram {
            domains: d.domains,
            scope: d.scope,
            level_sizes,
            within,
            across,
            source: local[d.source],
            sink: local[sink],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.domains.len()
    }

    pub fn domains(&self) -> &[u8] {
        &self.domains
    }

    pub fn scope(&self) -> &[usize] {
        &self.scope
    }

    pub fn level_size(&self, level: usize) -> usize {
        self.level_sizes[level]
    }

    pub fn within(&self, level: usize) -> &[LevelArc] {
        &self.within[level]
    }

    pub fn across(&self, var: usize) -> &[LevelArc] {
        &self.across[var]
    }

    pub fn source(&self) -> usize {
        self.source as usize
    }

    pub fn sink(&self) -> usize {
        self.sink as usize
    }

    pub fn num_nodes(&self) -> usize {
        self.level_sizes.iter().sum()
    }

    pub fn num_arcs(&self) -> usize {
        self.within.iter().map(Vec::len).sum::<usize>()
            + self.across.iter().map(Vec::len).sum::<usize>()
    }

    pub fn arc(&self, r: ArcRef) -> &LevelArc {
        match r {
            ArcRef::Within { level, index } => &self.within[level][index],
            ArcRef::Across { var, index } => &self.across[var][index],
        }
    }

    /// Best path weight over paths consistent with `partial` (local indices).
    pub fn best_path_value(&self, partial: &PartialAssignment) -> f64 {
        self.best_path_by(|_, _| 0.0, |var, value| partial.allows(var, value))
            .0
    }

    /// Best path under an additive per-arc adjustment, restricted to allowed
    /// labels. Returns the value and the arcs of one optimal path.
    pub fn best_path_by(
        &self,
        bonus: impl Fn(ArcRef, &LevelArc) -> f64,
        allowed: impl Fn(usize, u8) -> bool,
    ) -> (f64, Option<Vec<ArcRef>>) {
        let depth = self.num_vars();
        let mut values: Vec<Vec<f64>> = Vec::with_capacity(depth + 1);
        let mut back: Vec<Vec<Option<ArcRef>>> = Vec::with_capacity(depth + 1);
        for level in 0..=depth {
            let mut cur = vec![f64::NEG_INFINITY; self.level_sizes[level]];
            let mut bp: Vec<Option<ArcRef>> = vec![None; self.level_sizes[level]];
            if level == 0 {
                if !cur.is_empty() {
                    cur[self.source()] = 0.0;
                }
            } else {
                let var = level - 1;
                let prev = &values[var];
                for (index, a) in self.across[var].iter().enumerate() {
                    if !allowed(var, a.value) {
                        continue;
                    }
                    let base = prev[a.head as usize];
                    if base == f64::NEG_INFINITY {
                        continue;
                    }
                    let r = ArcRef::Across { var, index };
                    let v = base + a.weight + bonus(r, a);
                    if v > cur[a.tail as usize] {
                        cur[a.tail as usize] = v;
                        bp[a.tail as usize] = Some(r);
                    }
                }
            }
            for (index, a) in self.within[level].iter().enumerate() {
                let base = cur[a.head as usize];
                if base == f64::NEG_INFINITY {
                    continue;
                }
                let r = ArcRef::Within { level, index };
                let v = base + a.weight + bonus(r, a);
                if v > cur[a.tail as usize] {
                    cur[a.tail as usize] = v;
                    bp[a.tail as usize] = Some(r);
                }
            }
            values.push(cur);
            back.push(bp);
        }
        let best = values[depth].get(self.sink()).copied().unwrap_or(f64::NEG_INFINITY);
        if best == f64::NEG_INFINITY {
            return (best, None);
        }
        let mut path = Vec::new();
        let (mut level, mut node) = (depth, self.sink());
        while let Some(r) = back[level][node] {
            path.push(r);
            let a = self.arc(r);
            node = a.head as usize;
            if let ArcRef::Across { var, .. } = r {
                level = var;
            }
        }
        path.reverse();
        (best, Some(path))
    }

    /// Every path consistent with the full local assignment `a`.
    pub fn enumerate_paths(
        &self,
        a: &Assignment,
        bound: usize,
    ) -> Result<Vec<ComputationPath>, DiagramError> {
        let mut found = Vec::new();
        let mut stack: Vec<ArcRef> = Vec::new();
        self.walk(0, self.source(), 0.0, a, bound, &mut stack, &mut found)?;
        Ok(found)
    }

    #[allow(clippy::too_many_arguments)]
    fn walk(
        &self,
        level: usize,
        node: usize,
        weight: f64,
        a: &Assignment,
        bound: usize,
        stack: &mut Vec<ArcRef>,
        found: &mut Vec<ComputationPath>,
    ) -> Result<(), DiagramError> {
        if level == self.num_vars() && node == self.sink() {
            if found.len() >= bound {
                return Err(DiagramError::ExplosionGuard(bound));
            }
            found.push(ComputationPath { arcs: stack.clone(), weight });
        }
        for (index, arc) in self.within[level].iter().enumerate() {
            if arc.head as usize == node {
                stack.push(ArcRef::Within { level, index });
                self.walk(level, arc.tail as usize, weight + arc.weight, a, bound, stack, found)?;
                stack.pop();
            }
        }
        if level < self.num_vars() {
            for (index, arc) in self.across[level].iter().enumerate() {
                if arc.head as usize == node && a.0.get(level) == Some(&arc.value) {
                    stack.push(ArcRef::Across { var: level, index });
                    self.walk(level + 1, arc.tail as usize, weight + arc.weight, a, bound, stack, found)?;
                    stack.pop();
                }
            }
        }
        Ok(())
    }

    /// Plain-text dump: one line per level with its nodes, one line per arc.
    pub fn debug_export(&self, names: Option<&dyn Fn(usize) -> String>) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "diagram vars={} nodes={} arcs={}",
            self.num_vars(),
            self.num_nodes(),
            self.num_arcs()
        );
        for (level, &size) in self.level_sizes.iter().enumerate() {
            let mut line = format!("level {level}:");
            for node in 0..size {
                let _ = write!(line, " n{level}.{node}");
                if level == 0 && node == self.source() {
                    line.push_str("[top]");
                }
                if level == self.num_vars() && node == self.sink() {
                    line.push_str("[bottom]");
                }
            }
            let _ = writeln!(out, "{line}");
        }
        let var_name = |v: usize| match names {
            Some(f) => f(self.scope[v]),
            None => format!("x{}", self.scope[v]),
        };
        for level in 0..=self.num_vars() {
            for a in &self.within[level] {
                let _ = writeln!(
                    out,
                    "n{level}.{} -> n{level}.{} w={} {}",
                    a.head,
                    a.tail,
                    fmt_weight(a.weight),
                    a.kind.as_str()
                );
            }
            if level < self.num_vars() {
                for a in &self.across[level] {
                    let _ = writeln!(
                        out,
                        "n{level}.{} -> n{}.{} {}:={} w={} {}",
                        a.head,
                        level + 1,
                        a.tail,
                        var_name(level),
                        a.value,
                        fmt_weight(a.weight),
                        a.kind.as_str()
                    );
                }
            }
        }
        out
    }
}

fn fmt_weight(w: f64) -> String {
    let s = format!("{w:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn reach(
    start: NodeId,
    adj: &[Vec<usize>],
    next: impl Fn(usize) -> NodeId,
    n: usize,
) -> Vec<bool> {
    let mut seen = vec![false; n];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(v) = stack.pop() {
        for &ai in &adj[v] {
            let t = next(ai);
            if !seen[t] {
                seen[t] = true;
                stack.push(t);
            }
        }
    }
    seen
}

/// A multivalued layout turned into indicator variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndicatorMap {
    /// `blocks[i]` lists the indicator variables of original variable `i`,
    /// one per value, of which exactly one is set.
    pub blocks: Vec<Vec<usize>>,
}

impl IndicatorMap {
    pub fn num_indicators(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    /// One-hot expansion of an assignment over the original variables.
    pub fn expand(&self, a: &Assignment) -> Assignment {
        let mut bits = vec![0u8; self.num_indicators()];
        for (var, block) in self.blocks.iter().enumerate() {
            bits[block[a.0[var] as usize]] = 1;
        }
        Assignment(bits)
    }

    /// Inverse of [`IndicatorMap::expand`]; `None` unless every block is one-hot.
    pub fn collapse(&self, bits: &Assignment) -> Option<Assignment> {
        let mut values = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let set: Vec<usize> = (0..block.len()).filter(|&v| bits.0[block[v]] == 1).collect();
            if set.len() != 1 {
                return None;
            }
            values.push(set[0] as u8);
        }
        Some(Assignment(values))
    }
}

/// Replaces each variable of domain size `|V|` by `|V|` binary indicators.
/// Returns the binary domains of the indicators and the block mapping.
pub fn encode_multivalued(domains: &[u8]) -> Result<(Vec<u8>, IndicatorMap), DiagramError> {
    let mut blocks = Vec::with_capacity(domains.len());
    let mut next = 0;
    for (var, &size) in domains.iter().enumerate() {
        if size == 0 {
            return Err(DiagramError::EmptyDomain(var));
        }
        blocks.push((next..next + size as usize).collect());
        next += size as usize;
    }
    Ok((vec![2; next], IndicatorMap { blocks }))
}

/// Diagrams over a shared variable index set, valued as a scaled sum.
#[derive(Clone, Debug)]
pub struct DiagramSystem {
    domains: Vec<u8>,
    diagrams: Vec<OrderedDiagram>,
    scales: Vec<f64>,
    names: Vec<String>,
    /// For every system variable, the (diagram, local variable) pairs that cover it.
    members: Vec<Vec<(usize, usize)>>,
}

impl DiagramSystem {
    pub fn new(domains: Vec<u8>) -> Self {
        let members = vec![Vec::new(); domains.len()];
        DiagramSystem {
            domains,
            diagrams: Vec::new(),
            scales: Vec::new(),
            names: Vec::new(),
            members,
        }
    }

    pub fn push(
        &mut self,
        diagram: OrderedDiagram,
        scale: f64,
        name: impl Into<String>,
    ) -> Result<usize, DiagramError> {
        let j = self.diagrams.len();
        let mut last = None;
        for (local, &var) in diagram.scope().iter().enumerate() {
            if var >= self.domains.len() || self.domains[var] != diagram.domains()[local] {
                return Err(DiagramError::LayoutMismatch(format!(
                    "diagram {j} local variable {local} maps to system variable {var} with a different domain"
                )));
            }
            if last.is_some_and(|l| l >= var) {
                return Err(DiagramError::LayoutMismatch(format!(
                    "diagram {j} scope is not strictly increasing"
                )));
            }
            last = Some(var);
        }
        for (local, &var) in diagram.scope().iter().enumerate() {
            self.members[var].push((j, local));
        }
        self.diagrams.push(diagram);
        self.scales.push(scale);
        self.names.push(name.into());
        Ok(j)
    }

    pub fn num_vars(&self) -> usize {
        self.domains.len()
    }

    pub fn domains(&self) -> &[u8] {
        &self.domains
    }

    pub fn len(&self) -> usize {
        self.diagrams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diagrams.is_empty()
    }

    pub fn diagram(&self, j: usize) -> &OrderedDiagram {
        &self.diagrams[j]
    }

    pub fn diagrams(&self) -> &[OrderedDiagram] {
        &self.diagrams
    }

    pub fn scale(&self, j: usize) -> f64 {
        self.scales[j]
    }

    pub fn name(&self, j: usize) -> &str {
        &self.names[j]
    }

    pub fn members(&self, var: usize) -> &[(usize, usize)] {
        &self.members[var]
    }

    /// Restriction of a system-level partial assignment to diagram `j`.
    pub fn localize(&self, j: usize, partial: &PartialAssignment) -> PartialAssignment {
        PartialAssignment(self.diagrams[j].scope().iter().map(|&v| partial.0[v]).collect())
    }

    /// Unscaled value of diagram `j` under a full system assignment.
    pub fn diagram_value(&self, j: usize, a: &Assignment) -> f64 {
        self.diagrams[j].best_path_value(&self.localize(j, &a.to_partial()))
    }

    /// Scaled sum of member values; `-inf` if any member rejects `a`.
    pub fn value(&self, a: &Assignment) -> f64 {
        let mut total = 0.0;
        for j in 0..self.diagrams.len() {
            let v = self.diagram_value(j, a);
            if v == f64::NEG_INFINITY {
                return v;
            }
            total += self.scales[j] * v;
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_arc(weight: f64) -> OrderedDiagram {
        let mut d = Diagram::binary(1);
        let sink = d.add_node(1);
        d.set_sink(sink);
        d.add_labeled_arc(0, sink, 0, 1, weight, ArcKind::Plain);
        d.freeze().unwrap()
    }

    #[test]
    fn trivial_diagram_validates() {
        let mut d = Diagram::binary(0);
        let sink = d.add_node(0);
        d.set_sink(sink);
        d.add_arc(0, sink, 0.0, ArcKind::Plain);
        assert!(d.validate().is_ok());
        let f = d.freeze().unwrap();
        assert_eq!(f.best_path_value(&PartialAssignment::free(0)), 0.0);
    }

    #[test]
    fn level_breach_is_reported() {
        let mut d = Diagram::binary(3);
        let a = d.add_node(1);
        let sink = d.add_node(3);
        d.set_sink(sink);
        d.add_labeled_arc(0, a, 2, 0, 0.0, ArcKind::Plain);
        let report = d.validate().unwrap_err();
        assert!(report.iter().any(|m| m.contains("assigns variable 2")));
    }

    #[test]
    fn cycles_and_source_entries_are_reported() {
        let mut d = Diagram::binary(0);
        let a = d.add_node(0);
        let b = d.add_node(0);
        d.set_sink(b);
        d.add_arc(0, a, 0.0, ArcKind::Plain);
        d.add_arc(a, 0, 0.0, ArcKind::Plain);
        let report = d.validate().unwrap_err();
        assert!(report.iter().any(|m| m.contains("cycle")));
        assert!(report.iter().any(|m| m.contains("enters the source")));
    }

    #[test]
    fn best_path_respects_partial() {
        let f = single_arc(2.5);
        let mut p = PartialAssignment::free(1);
        assert_eq!(f.best_path_value(&p), 2.5);
        p.fix(0, 0);
        assert_eq!(f.best_path_value(&p), f64::NEG_INFINITY);
    }

    #[test]
    fn enumerate_single_arc() {
        let f = single_arc(-1.0);
        let paths = f.enumerate_paths(&Assignment(vec![1]), 10).unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].weight, -1.0);
        assert!(f.enumerate_paths(&Assignment(vec![0]), 10).unwrap().is_empty());
    }

    #[test]
    fn explosion_guard_trips() {
        let mut d = Diagram::binary(0);
        let sink = d.add_node(0);
        d.set_sink(sink);
        for _ in 0..5 {
            d.add_arc(0, sink, 1.0, ArcKind::Plain);
        }
        let f = d.freeze().unwrap();
        assert!(matches!(
            f.enumerate_paths(&Assignment(vec![]), 3),
            Err(DiagramError::ExplosionGuard(3))
        ));
    }

    #[test]
    fn pruning_drops_dead_ends() {
        let mut d = Diagram::binary(1);
        let dead = d.add_node(1);
        let sink = d.add_node(1);
        d.set_sink(sink);
        d.add_labeled_arc(0, dead, 0, 0, 5.0, ArcKind::Plain);
        d.add_labeled_arc(0, sink, 0, 1, 1.0, ArcKind::Plain);
        let f = d.freeze().unwrap();
        assert_eq!(f.level_size(1), 1);
        assert_eq!(f.across(0).len(), 1);
    }

    #[test]
    fn multivalued_encoding_counts() {
        let (bits, map) = encode_multivalued(&[2]).unwrap();
        assert_eq!(bits.len(), 2);
        assert_eq!(map.blocks, vec![vec![0, 1]]);
        let (bits, map) = encode_multivalued(&[3]).unwrap();
        assert_eq!(bits.len(), 3);
        assert_eq!(map.num_indicators(), 3);
        let (bits, _) = encode_multivalued(&[2, 2, 3]).unwrap();
        assert_eq!(bits.len(), 7);
        assert!(matches!(encode_multivalued(&[2, 0]), Err(DiagramError::EmptyDomain(1))));
    }

    #[test]
    fn indicator_round_trip() {
        let (_, map) = encode_multivalued(&[2, 3, 4]).unwrap();
        let a = Assignment(vec![1, 2, 0]);
        let bits = map.expand(&a);
        assert_eq!(bits.0.iter().filter(|&&b| b == 1).count(), 3);
        assert_eq!(map.collapse(&bits), Some(a));
        assert_eq!(map.collapse(&Assignment(vec![0; 9])), None);
    }

    #[test]
    fn system_rejects_domain_mismatch() {
        let mut sys = DiagramSystem::new(vec![3]);
        assert!(matches!(
            sys.push(single_arc(0.0), 1.0, "d"),
            Err(DiagramError::LayoutMismatch(_))
        ));
    }

    #[test]
    fn debug_export_lists_every_arc() {
        let f = single_arc(0.7);
        let text = f.debug_export(None);
        assert!(text.contains("n0.0 -> n1.0 x0:=1 w=0.7 plain"));
        assert!(text.starts_with("diagram vars=1 nodes=2 arcs=1"));
    }
}
