use std::collections::HashMap;

use crate::diagram::{ArcKind, Diagram, NodeId, OrderedDiagram};
use crate::error::BuildError;
use crate::tree::{layout_variables, ConstraintAutomaton, ConstraintState, NodeTree, VarKind, WalkEvent};

/// Diagram whose paths are exactly the legal settings of the region and
/// truncation variables. Each opened region costs `region_penalty`.
pub fn build_constraint_diagram(prototype: &NodeTree, region_penalty: f64) -> Result<OrderedDiagram, BuildError> {
    let layout = layout_variables(prototype);
    let events = layout.events();
    let n = layout.len();
    let auto = ConstraintAutomaton;

    let mut var_event = vec![0; n];
    for (i, e) in events.iter().enumerate() {
        if let WalkEvent::Var(v) = e {
            var_event[*v] = i;
        }
    }

    let mut d = Diagram::binary(n);
    let (_, first) = auto.advance_groups(events, 0, auto.initial());
    let Some(first) = first else {
        return Err(BuildError::NoSinkPath);
    };
    let mut frontier: HashMap<ConstraintState, NodeId> = HashMap::from([(first, d.source())]);
    for (v, info) in layout.variables.iter().enumerate() {
        let mut next: HashMap<ConstraintState, NodeId> = HashMap::new();
        let mut states: Vec<_> = frontier.into_iter().collect();
        states.sort();
        for (s, head) in states {
            for value in 0..=1u8 {
                let Some(stepped) = auto.step(s, info, value) else { continue };
                let (_, after) = auto.advance_groups(events, var_event[v] + 1, stepped);
                let Some(after) = after else { continue };
                let tail = *next.entry(after).or_insert_with(|| d.add_node(v + 1));
                let opens = info.kind == VarKind::RegionStart && value == 1;
                let w = if opens { -region_penalty } else { 0.0 };
                d.add_labeled_arc(head, tail, v, value, w, ArcKind::Control);
            }
        }
        frontier = next;
    }

    let accepting: Vec<_> = frontier.iter().filter(|(s, _)| s.accepts()).map(|(_, &id)| id).collect();
    if accepting.is_empty() {
        return Err(BuildError::NoSinkPath);
    }
    if n == 0 {
        d.set_sink(d.source());
    } else {
        let sink = d.add_node(n);
        for id in accepting {
            d.add_arc(id, sink, 0.0, ArcKind::Plain);
        }
        d.set_sink(sink);
    }
    Ok(d.freeze()?)
}
