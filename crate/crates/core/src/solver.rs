//! Dual decomposition by max-marginal averaging.
//!
//! Each diagram `j` of a system contributes `scale_j * f_j(b) + <lambda_j, b>`
//! to the Lagrangian; the multipliers of a shared variable sum to zero, so the
//! sum of the per-diagram maxima bounds the system optimum from above.
//! Prefix and suffix tables are cached per level and recomputed lazily after
//! a multiplier changes.

use serde::{Deserialize, Serialize};

use crate::diagram::{Assignment, DiagramSystem, OrderedDiagram};
use crate::error::SolverError;

const NEG_INF: f64 = f64::NEG_INFINITY;
/// Marginal differences below this are treated as ties.
pub const TIE_EPS: f64 = 1e-9;

#[derive(Clone, Debug)]
struct Cache {
    prefix: Vec<Vec<f64>>,
    prefix_ok: Vec<bool>,
    suffix: Vec<Vec<f64>>,
    suffix_ok: Vec<bool>,
}

/// Multipliers, shared pins and per-diagram DP caches.
#[derive(Clone, Debug)]
pub struct DualState {
    /// `lambdas[j][k][v]` for local variable `k` of diagram `j`. Binary
    /// variables only ever move the entry for value 1.
    lambdas: Vec<Vec<Vec<f64>>>,
    /// Values ruled out for every diagram, by system variable.
    forbidden: Vec<Vec<bool>>,
    caches: Vec<Cache>,
}

impl DualState {
    pub fn new(system: &DiagramSystem) -> Self {
        let lambdas = system
            .diagrams()
            .iter()
            .map(|d| d.domains().iter().map(|&n| vec![0.0; n as usize]).collect())
            .collect();
        let forbidden = system.domains().iter().map(|&n| vec![false; n as usize]).collect();
        let caches = system
            .diagrams()
            .iter()
            .map(|d| {
                let levels = d.num_vars() + 1;
                Cache {
                    prefix: (0..levels).map(|l| vec![NEG_INF; d.level_size(l)]).collect(),
                    prefix_ok: vec![false; levels],
                    suffix: (0..levels).map(|l| vec![NEG_INF; d.level_size(l)]).collect(),
                    suffix_ok: vec![false; levels],
                }
            })
            .collect();
        DualState { lambdas, forbidden, caches }
    }

    pub fn lambda(&self, j: usize, local: usize, value: u8) -> f64 {
        self.lambdas[j][local][value as usize]
    }

    /// Sets one multiplier and invalidates the affected cache levels.
    pub fn set_lambda(&mut self, j: usize, local: usize, value: u8, x: f64) {
        self.lambdas[j][local][value as usize] = x;
        invalidate(self, j, local);
    }

    pub fn is_forbidden(&self, var: usize, value: u8) -> bool {
        self.forbidden[var][value as usize]
    }

    pub fn prefix_valid(&self, j: usize, level: usize) -> bool {
        self.caches[j].prefix_ok[level]
    }

    pub fn suffix_valid(&self, j: usize, level: usize) -> bool {
        self.caches[j].suffix_ok[level]
    }

    pub fn prefix(&self, j: usize, level: usize) -> Option<&[f64]> {
        let c = &self.caches[j];
        c.prefix_ok[level].then(|| c.prefix[level].as_slice())
    }

    pub fn suffix(&self, j: usize, level: usize) -> Option<&[f64]> {
        let c = &self.caches[j];
        c.suffix_ok[level].then(|| c.suffix[level].as_slice())
    }

    /// Rules out `value` for system variable `var` in every diagram.
    pub fn forbid(&mut self, system: &DiagramSystem, var: usize, value: u8) {
        if self.forbidden[var][value as usize] {
            return;
        }
        self.forbidden[var][value as usize] = true;
        for &(j, local) in system.members(var) {
            invalidate(self, j, local);
        }
    }
}

fn arc_gain(
    d: &OrderedDiagram,
    scale: f64,
    lambdas: &[Vec<f64>],
    forbidden: &[Vec<bool>],
    local: usize,
    value: u8,
    weight: f64,
) -> Option<f64> {
    if forbidden[d.scope()[local]][value as usize] {
        None
    } else {
        Some(scale * weight + lambdas[local][value as usize])
    }
}

fn compute_prefix(system: &DiagramSystem, state: &mut DualState, j: usize, level: usize) {
    let d = system.diagram(j);
    let scale = system.scale(j);
    let DualState { lambdas, forbidden, caches } = state;
    let cache = &mut caches[j];
    let mut cur = std::mem::take(&mut cache.prefix[level]);
    cur.iter_mut().for_each(|x| *x = NEG_INF);
    if level == 0 {
        if !cur.is_empty() {
            cur[d.source()] = 0.0;
        }
    } else {
        let var = level - 1;
        let prev = &cache.prefix[var];
        for a in d.across(var) {
            let base = prev[a.head as usize];
            if base == NEG_INF {
                continue;
            }
            if let Some(g) = arc_gain(d, scale, &lambdas[j], forbidden, var, a.value, a.weight) {
                let v = base + g;
                if v > cur[a.tail as usize] {
                    cur[a.tail as usize] = v;
                }
            }
        }
    }
    for a in d.within(level) {
        let base = cur[a.head as usize];
        if base == NEG_INF {
            continue;
        }
        let v = base + scale * a.weight;
        if v > cur[a.tail as usize] {
            cur[a.tail as usize] = v;
        }
    }
    cache.prefix[level] = cur;
    cache.prefix_ok[level] = true;
}

fn compute_suffix(system: &DiagramSystem, state: &mut DualState, j: usize, level: usize) {
    let d = system.diagram(j);
    let scale = system.scale(j);
    let DualState { lambdas, forbidden, caches } = state;
    let cache = &mut caches[j];
    let mut cur = std::mem::take(&mut cache.suffix[level]);
    cur.iter_mut().for_each(|x| *x = NEG_INF);
    if level == d.num_vars() {
        if !cur.is_empty() {
            cur[d.sink()] = 0.0;
        }
    } else {
        let next = &cache.suffix[level + 1];
        for a in d.across(level) {
            let base = next[a.tail as usize];
            if base == NEG_INF {
                continue;
            }
            if let Some(g) = arc_gain(d, scale, &lambdas[j], forbidden, level, a.value, a.weight) {
                let v = base + g;
                if v > cur[a.head as usize] {
                    cur[a.head as usize] = v;
                }
            }
        }
    }
    for a in d.within(level).iter().rev() {
        let base = cur[a.tail as usize];
        if base == NEG_INF {
            continue;
        }
        let v = base + scale * a.weight;
        if v > cur[a.head as usize] {
            cur[a.head as usize] = v;
        }
    }
    cache.suffix[level] = cur;
    cache.suffix_ok[level] = true;
}

fn ensure_prefix(system: &DiagramSystem, state: &mut DualState, j: usize, level: usize) {
    let ok = &state.caches[j].prefix_ok;
    let mut start = level;
    while !ok[start] && start > 0 {
        start -= 1;
    }
    if !ok[start] {
        compute_prefix(system, state, j, start);
    }
    for l in start + 1..=level {
        compute_prefix(system, state, j, l);
    }
}

fn ensure_suffix(system: &DiagramSystem, state: &mut DualState, j: usize, level: usize) {
    let depth = system.diagram(j).num_vars();
    let ok = &state.caches[j].suffix_ok;
    let mut start = level;
    while !ok[start] && start < depth {
        start += 1;
    }
    if !ok[start] {
        compute_suffix(system, state, j, start);
    }
    for l in (level..start).rev() {
        compute_suffix(system, state, j, l);
    }
}

/// Drops every cached level and fills prefix level 0 and the last suffix level.
pub fn init_caches(system: &DiagramSystem, state: &mut DualState) {
    for j in 0..system.len() {
        let c = &mut state.caches[j];
        c.prefix_ok.iter_mut().for_each(|f| *f = false);
        c.suffix_ok.iter_mut().for_each(|f| *f = false);
        compute_prefix(system, state, j, 0);
        let depth = system.diagram(j).num_vars();
        compute_suffix(system, state, j, depth);
    }
}

/// Marks the cache levels that depend on local variable `local` of diagram `j`.
pub fn invalidate(state: &mut DualState, j: usize, local: usize) {
    let c = &mut state.caches[j];
    for f in c.prefix_ok.iter_mut().skip(local + 1) {
        *f = false;
    }
    for f in c.suffix_ok.iter_mut().take(local + 1) {
        *f = false;
    }
}

/// Max-marginals of local variable `local` in diagram `j`, one per value.
pub fn local_max_marginals(
    system: &DiagramSystem,
    state: &mut DualState,
    j: usize,
    local: usize,
) -> Vec<f64> {
    ensure_prefix(system, state, j, local);
    ensure_suffix(system, state, j, local + 1);
    let d = system.diagram(j);
    let scale = system.scale(j);
    let mut m = vec![NEG_INF; d.domains()[local] as usize];
    let c = &state.caches[j];
    let (pre, suf) = (&c.prefix[local], &c.suffix[local + 1]);
    for a in d.across(local) {
        let (p, s) = (pre[a.head as usize], suf[a.tail as usize]);
        if p == NEG_INF || s == NEG_INF {
            continue;
        }
        if let Some(g) =
            arc_gain(d, scale, &state.lambdas[j], &state.forbidden, local, a.value, a.weight)
        {
            let v = p + g + s;
            if v > m[a.value as usize] {
                m[a.value as usize] = v;
            }
        }
    }
    m
}

/// Max-marginals of system variable `var` in diagram `j`; `None` when the
/// diagram does not cover `var`.
pub fn max_marginals(
    system: &DiagramSystem,
    state: &mut DualState,
    j: usize,
    var: usize,
) -> Option<Vec<f64>> {
    let local = system.members(var).iter().find(|&&(jj, _)| jj == j)?.1;
    Some(local_max_marginals(system, state, j, local))
}

/// Current value of the perturbed subproblem `j`.
pub fn diagram_bound(system: &DiagramSystem, state: &mut DualState, j: usize) -> f64 {
    let d = system.diagram(j);
    let depth = d.num_vars();
    let c = &state.caches[j];
    let level = (0..=depth)
        .find(|&l| c.prefix_ok[l] && c.suffix_ok[l])
        .unwrap_or(depth);
    ensure_prefix(system, state, j, level);
    ensure_suffix(system, state, j, level);
    let c = &state.caches[j];
    c.prefix[level]
        .iter()
        .zip(&c.suffix[level])
        .map(|(p, s)| if *p == NEG_INF || *s == NEG_INF { NEG_INF } else { p + s })
        .fold(NEG_INF, f64::max)
}

/// The Lagrangian dual value L(lambda).
pub fn dual_value(system: &DiagramSystem, state: &mut DualState) -> f64 {
    (0..system.len()).map(|j| diagram_bound(system, state, j)).sum()
}

/// Max-marginal averaging on system variable `var`.
pub fn block_update(system: &DiagramSystem, state: &mut DualState, var: usize) {
    let members = system.members(var);
    if members.len() < 2 {
        return;
    }
    let marg: Vec<Vec<f64>> = members
        .iter()
        .map(|&(j, local)| local_max_marginals(system, state, j, local))
        .collect();
    let domain = system.domains()[var] as usize;
    let count = members.len() as f64;
    let mut changed = vec![false; members.len()];
    if domain == 2 {
        let deltas: Vec<f64> = marg.iter().map(|m| m[1] - m[0]).collect();
        if deltas.iter().all(|d| d.is_finite()) {
            let avg = deltas.iter().sum::<f64>() / count;
            for (idx, &(j, local)) in members.iter().enumerate() {
                let step = avg - deltas[idx];
                if step != 0.0 {
                    state.lambdas[j][local][1] += step;
                    changed[idx] = true;
                }
            }
        }
    } else {
        for v in 0..domain {
            if !marg.iter().all(|m| m[v].is_finite()) {
                continue;
            }
            let avg = marg.iter().map(|m| m[v]).sum::<f64>() / count;
            for (idx, &(j, local)) in members.iter().enumerate() {
                let step = avg - marg[idx][v];
                if step != 0.0 {
                    state.lambdas[j][local][v] += step;
                    changed[idx] = true;
                }
            }
        }
    }
    for (idx, &(j, local)) in members.iter().enumerate() {
        if changed[idx] {
            invalidate(state, j, local);
        }
    }
}

/// Repeatedly forbids values that no member diagram can realise under the
/// current pins, until nothing changes.
pub fn presolve(system: &DiagramSystem, state: &mut DualState) -> Result<(), SolverError> {
    loop {
        let mut newly = Vec::new();
        for j in 0..system.len() {
            let d = system.diagram(j);
            let usable = usable_values(d, &state.forbidden);
            match usable {
                None => {
                    return Err(SolverError::Infeasible(format!(
                        "diagram {} has no path",
                        system.name(j)
                    )))
                }
                Some(usable) => {
                    for (local, vals) in usable.iter().enumerate() {
                        let var = d.scope()[local];
                        for (v, &ok) in vals.iter().enumerate() {
                            if !ok && !state.forbidden[var][v] {
                                newly.push((var, v as u8));
                            }
                        }
                    }
                }
            }
        }
        if newly.is_empty() {
            break;
        }
        for (var, v) in newly {
            state.forbid(system, var, v);
        }
    }
    for (var, f) in state.forbidden.iter().enumerate() {
        if f.iter().all(|&x| x) {
            return Err(SolverError::Infeasible(format!("variable {var} has no usable value")));
        }
    }
    Ok(())
}

/// Which local (variable, value) pairs lie on some source-to-sink path.
fn usable_values(d: &OrderedDiagram, forbidden: &[Vec<bool>]) -> Option<Vec<Vec<bool>>> {
    let depth = d.num_vars();
    let allowed = |local: usize, v: u8| !forbidden[d.scope()[local]][v as usize];
    let mut fwd: Vec<Vec<bool>> = (0..=depth).map(|l| vec![false; d.level_size(l)]).collect();
    for level in 0..=depth {
        if level == 0 {
            if d.level_size(0) > 0 {
                fwd[0][d.source()] = true;
            }
        } else {
            for a in d.across(level - 1) {
                if fwd[level - 1][a.head as usize] && allowed(level - 1, a.value) {
                    fwd[level][a.tail as usize] = true;
                }
            }
        }
        for a in d.within(level) {
            if fwd[level][a.head as usize] {
                fwd[level][a.tail as usize] = true;
            }
        }
    }
    if !fwd[depth].get(d.sink()).copied().unwrap_or(false) {
        return None;
    }
    let mut bwd: Vec<Vec<bool>> = (0..=depth).map(|l| vec![false; d.level_size(l)]).collect();
    for level in (0..=depth).rev() {
        if level == depth {
            bwd[depth][d.sink()] = true;
        } else {
            for a in d.across(level) {
                if bwd[level + 1][a.tail as usize] && allowed(level, a.value) {
                    bwd[level][a.head as usize] = true;
                }
            }
        }
        for a in d.within(level).iter().rev() {
            if bwd[level][a.tail as usize] {
                bwd[level][a.head as usize] = true;
            }
        }
    }
    let mut usable: Vec<Vec<bool>> = d.domains().iter().map(|&n| vec![false; n as usize]).collect();
    for (local, vals) in usable.iter_mut().enumerate() {
        for a in d.across(local) {
            if allowed(local, a.value) && fwd[local][a.head as usize] && bwd[local + 1][a.tail as usize]
            {
                vals[a.value as usize] = true;
            }
        }
    }
    Some(usable)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub max_sweeps: usize,
    pub tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { max_sweeps: 50, tol: 1e-9 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub dual_bound: f64,
    /// L before the first sweep, then once after every sweep.
    pub dual_trace: Vec<f64>,
    /// Number of variables on which all member diagrams agreed, aligned with `dual_trace`.
    pub agreement_trace: Vec<usize>,
    pub primal_assignment: Assignment,
    pub primal_value: f64,
    pub duality_gap: f64,
    pub agreed: bool,
    pub sweeps_run: usize,
}

impl SolverReport {
    /// One line per trace entry: sweep index, dual value, agreeing variables.
    pub fn trace_text(&self) -> String {
        let mut out = String::new();
        for (i, (l, a)) in self.dual_trace.iter().zip(&self.agreement_trace).enumerate() {
            out.push_str(&format!("sweep {i} L={l:.12} agree={a}\n"));
        }
        out
    }
}

/// Per-variable unique argmax shared by every member diagram, if any.
fn agreed_value(system: &DiagramSystem, state: &mut DualState, var: usize) -> Option<u8> {
    let mut common = None;
    for &(j, local) in system.members(var) {
        let m = local_max_marginals(system, state, j, local);
        let best = argmax_strict(&m)?;
        match common {
            None => common = Some(best),
            Some(c) if c == best => {}
            Some(_) => return None,
        }
    }
    common.or(Some(0))
}

fn argmax_strict(m: &[f64]) -> Option<u8> {
    let mut best = 0;
    for v in 1..m.len() {
        if m[v] > m[best] {
            best = v;
        }
    }
    if m[best] == NEG_INF {
        return None;
    }
    let unique = m
        .iter()
        .enumerate()
        .all(|(v, &x)| v == best || x < m[best] - TIE_EPS);
    unique.then_some(best as u8)
}

fn agreement_count(system: &DiagramSystem, state: &mut DualState) -> usize {
    (0..system.num_vars())
        .filter(|&var| agreed_value(system, state, var).is_some())
        .count()
}

/// Runs alternating sweeps until the dual stalls, then rounds.
pub fn solve(system: &DiagramSystem, opts: SolveOptions) -> Result<SolverReport, SolverError> {
    if system.is_empty() {
        return Err(SolverError::EmptySystem);
    }
    let mut state = DualState::new(system);
    presolve(system, &mut state)?;
    init_caches(system, &mut state);
    let n = system.num_vars();
    let mut trace = vec![dual_value(system, &mut state)];
    let mut agree_trace = vec![agreement_count(system, &mut state)];
    let mut sweeps = 0;
    let mut pair_start = trace[0];
    while sweeps < opts.max_sweeps && agree_trace.last() != Some(&n) {
        if sweeps % 2 == 0 {
            for var in 0..n {
                block_update(system, &mut state, var);
            }
        } else {
            for var in (0..n).rev() {
                block_update(system, &mut state, var);
            }
        }
        sweeps += 1;
        trace.push(dual_value(system, &mut state));
        agree_trace.push(agreement_count(system, &mut state));
        if sweeps % 2 == 0 {
            let l = *trace.last().unwrap();
            if pair_start - l < opts.tol {
                break;
            }
            pair_start = l;
        }
    }
    let dual_bound = *trace.last().unwrap();
    let agreed = *agree_trace.last().unwrap() == n;
    let primal_assignment = round_primal(system, &mut state)?;
    let primal_value = system.value(&primal_assignment);
    Ok(SolverReport {
        dual_bound,
        dual_trace: trace,
        agreement_trace: agree_trace,
        primal_value,
        duality_gap: dual_bound - primal_value,
        primal_assignment,
        agreed,
        sweeps_run: sweeps,
    })
}

/// Summed max-marginals of `var` over its member diagrams, with forbidden
/// values at minus infinity.
fn rounding_totals(system: &DiagramSystem, state: &mut DualState, var: usize) -> Vec<f64> {
    let domain = system.domains()[var] as usize;
    let mut total = vec![0.0f64; domain];
    for v in 0..domain {
        if state.forbidden[var][v] {
            total[v] = NEG_INF;
        }
    }
    for &(j, local) in system.members(var) {
        let m = local_max_marginals(system, state, j, local);
        for v in 0..domain {
            total[v] += m[v];
        }
    }
    total
}

/// Values of `var` worth trying, best first, lower values first among ties.
fn rounding_order(total: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..total.len()).filter(|&v| total[v] != NEG_INF && !total[v].is_nan()).collect();
    // stable selection so that near-ties keep the lowest value in front
    let mut out = Vec::with_capacity(order.len());
    while !order.is_empty() {
        let mut best = 0;
        for i in 1..order.len() {
            if total[order[i]] > total[order[best]] + TIE_EPS {
                best = i;
            }
        }
        out.push(order.remove(best));
    }
    out
}

fn pin(system: &DiagramSystem, state: &mut DualState, var: usize, value: usize) {
    for v in 0..system.domains()[var] as usize {
        if v != value {
            state.forbid(system, var, v as u8);
        }
    }
}

/// Greedy rounding in layout order. Each variable takes the value with the
/// largest summed max-marginal (lowest value on ties) and the other values are
/// forbidden before moving on.
///
/// When several diagrams restrict the same variables the greedy choice can
/// leave no joint completion. Rounding then restarts as a depth-first search
/// in the same value order that re-runs presolve after every pin.
pub fn round_primal(system: &DiagramSystem, state: &mut DualState) -> Result<Assignment, SolverError> {
    let saved = state.clone();
    let n = system.num_vars();
    let mut out = vec![0u8; n];
    for var in 0..n {
        let total = rounding_totals(system, state, var);
        let Some(&best) = rounding_order(&total).first() else {
            *state = saved;
            return round_backtracking(system, state).ok_or(SolverError::RoundingDeadEnd(var));
        };
        out[var] = best as u8;
        pin(system, state, var, best);
    }
    Ok(Assignment(out))
}

fn round_backtracking(system: &DiagramSystem, state: &mut DualState) -> Option<Assignment> {
    fn go(system: &DiagramSystem, state: &mut DualState, var: usize, out: &mut Vec<u8>) -> bool {
        if var == system.num_vars() {
            return true;
        }
        let total = rounding_totals(system, state, var);
        for v in rounding_order(&total) {
            let mut next = state.clone();
            pin(system, &mut next, var, v);
            if presolve(system, &mut next).is_err() {
                continue;
            }
            out.push(v as u8);
            if go(system, &mut next, var + 1, out) {
                *state = next;
                return true;
            }
            out.pop();
        }
        false
    }
    let mut out = Vec::with_capacity(system.num_vars());
    go(system, state, 0, &mut out).then_some(Assignment(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::{ArcKind, Diagram};

    /// Two variables; the path that sets both to `pref` earns 1, others 0.
    fn prefers(pref: u8) -> OrderedDiagram {
        let mut d = Diagram::binary(2);
        let mid_hit = d.add_node(1);
        let mid_miss = d.add_node(1);
        let sink = d.add_node(2);
        d.set_sink(sink);
        d.add_labeled_arc(0, mid_hit, 0, pref, 0.0, ArcKind::Plain);
        d.add_labeled_arc(0, mid_miss, 0, 1 - pref, 0.0, ArcKind::Plain);
        d.add_labeled_arc(mid_hit, sink, 1, pref, 1.0, ArcKind::Plain);
        d.add_labeled_arc(mid_hit, sink, 1, 1 - pref, 0.0, ArcKind::Plain);
        d.add_labeled_arc(mid_miss, sink, 1, 0, 0.0, ArcKind::Plain);
        d.add_labeled_arc(mid_miss, sink, 1, 1, 0.0, ArcKind::Plain);
        d.freeze().unwrap()
    }

    fn system_of(ds: Vec<OrderedDiagram>) -> DiagramSystem {
        let mut sys = DiagramSystem::new(vec![2; ds[0].num_vars()]);
        for (i, d) in ds.into_iter().enumerate() {
            sys.push(d, 1.0, format!("d{i}")).unwrap();
        }
        sys
    }

    #[test]
    fn invalidate_matches_index_trace() {
        let sys = system_of(vec![prefers(1)]);
        let mut st = DualState::new(&sys);
        init_caches(&sys, &mut st);
        for l in 0..=2 {
            ensure_prefix(&sys, &mut st, 0, l);
            ensure_suffix(&sys, &mut st, 0, l);
        }
        invalidate(&mut st, 0, 0);
        assert_eq!(st.caches[0].prefix_ok, vec![true, false, false]);
        assert_eq!(st.caches[0].suffix_ok, vec![false, true, true]);
        invalidate(&mut st, 0, 0);
        assert_eq!(st.caches[0].prefix_ok, vec![true, false, false]);
        invalidate(&mut st, 0, 1);
        assert_eq!(st.caches[0].suffix_ok, vec![false, false, true]);
    }

    #[test]
    fn lambda_shift_moves_one_marginal() {
        let sys = system_of(vec![prefers(1)]);
        let mut st = DualState::new(&sys);
        init_caches(&sys, &mut st);
        let before = max_marginals(&sys, &mut st, 0, 1).unwrap();
        st.set_lambda(0, 1, 1, 0.25);
        let after = max_marginals(&sys, &mut st, 0, 1).unwrap();
        assert_eq!(after[0], before[0]);
        assert_eq!(after[1], before[1] + 0.25);
    }

    #[test]
    fn single_diagram_update_is_noop() {
        let sys = system_of(vec![prefers(1)]);
        let mut st = DualState::new(&sys);
        init_caches(&sys, &mut st);
        block_update(&sys, &mut st, 0);
        assert_eq!(st.lambda(0, 0, 1), 0.0);
    }

    #[test]
    fn identical_diagrams_keep_zero_multipliers() {
        let sys = system_of(vec![prefers(1), prefers(1)]);
        let mut st = DualState::new(&sys);
        init_caches(&sys, &mut st);
        block_update(&sys, &mut st, 0);
        block_update(&sys, &mut st, 1);
        for j in 0..2 {
            for k in 0..2 {
                assert_eq!(st.lambda(j, k, 1), 0.0);
            }
        }
    }

    #[test]
    fn update_equalizes_deltas() {
        let sys = system_of(vec![prefers(1), prefers(0)]);
        let mut st = DualState::new(&sys);
        init_caches(&sys, &mut st);
        block_update(&sys, &mut st, 0);
        let d: Vec<f64> = (0..2)
            .map(|j| {
                let m = max_marginals(&sys, &mut st, j, 0).unwrap();
                m[1] - m[0]
            })
            .collect();
        assert!((d[0] - d[1]).abs() < 1e-9);
        assert!((st.lambda(0, 0, 1) + st.lambda(1, 0, 1)).abs() < 1e-12);
    }

    #[test]
    fn disagreement_respects_sandwich() {
        let sys = system_of(vec![prefers(1), prefers(0)]);
        let rep = solve(&sys, SolveOptions::default()).unwrap();
        let best = crate::oracle::brute_force_optimum(&sys).unwrap().best_value;
        assert!(rep.primal_value <= best + 1e-9);
        assert!(best <= rep.dual_bound + 1e-9);
        assert_eq!(best, 1.0);
    }

    #[test]
    fn rounding_backs_out_of_a_greedy_dead_end() {
        // the first diagram pays 10 for x0 = 1, which forces x1 != x2, while
        // the second needs x1 == x2; only the all-zero path is jointly usable
        let mut d1 = Diagram::binary(3);
        let a0 = d1.add_node(1);
        let a1 = d1.add_node(1);
        let b0 = d1.add_node(2);
        let b1 = d1.add_node(2);
        let b2 = d1.add_node(2);
        let t = d1.add_node(3);
        d1.set_sink(t);
        d1.add_labeled_arc(0, a0, 0, 0, 0.0, ArcKind::Plain);
        d1.add_labeled_arc(0, a1, 0, 1, 10.0, ArcKind::Plain);
        d1.add_labeled_arc(a0, b0, 1, 0, 0.0, ArcKind::Plain);
        d1.add_labeled_arc(a1, b1, 1, 0, 0.0, ArcKind::Plain);
        d1.add_labeled_arc(a1, b2, 1, 1, 0.0, ArcKind::Plain);
        d1.add_labeled_arc(b0, t, 2, 0, 0.0, ArcKind::Plain);
        d1.add_labeled_arc(b1, t, 2, 1, 0.0, ArcKind::Plain);
        d1.add_labeled_arc(b2, t, 2, 0, 0.0, ArcKind::Plain);
        let mut d2 = Diagram::with_scope(vec![2, 2], vec![1, 2]);
        let c0 = d2.add_node(1);
        let c1 = d2.add_node(1);
        let t = d2.add_node(2);
        d2.set_sink(t);
        d2.add_labeled_arc(0, c0, 0, 0, 0.0, ArcKind::Plain);
        d2.add_labeled_arc(0, c1, 0, 1, 0.0, ArcKind::Plain);
        d2.add_labeled_arc(c0, t, 1, 0, 0.0, ArcKind::Plain);
        d2.add_labeled_arc(c1, t, 1, 1, 0.0, ArcKind::Plain);
        let mut sys = DiagramSystem::new(vec![2; 3]);
        sys.push(d1.freeze().unwrap(), 1.0, "a").unwrap();
        sys.push(d2.freeze().unwrap(), 1.0, "b").unwrap();
        let rep = solve(&sys, SolveOptions::default()).unwrap();
        assert_eq!(rep.primal_assignment, Assignment(vec![0, 0, 0]));
        assert_eq!(rep.primal_value, 0.0);
    }

    #[test]
    fn empty_system_is_an_error() {
        let sys = DiagramSystem::new(vec![]);
        assert_eq!(solve(&sys, SolveOptions::default()), Err(SolverError::EmptySystem));
    }

    #[test]
    fn zero_weight_system_rounds_to_zero() {
        let mut d = Diagram::binary(3);
        let mut prev = 0;
        for k in 0..3 {
            let next = d.add_node(k + 1);
            d.add_labeled_arc(prev, next, k, 0, 0.0, ArcKind::Plain);
            d.add_labeled_arc(prev, next, k, 1, 0.0, ArcKind::Plain);
            prev = next;
        }
        d.set_sink(prev);
        let sys = system_of(vec![d.freeze().unwrap()]);
        let rep = solve(&sys, SolveOptions::default()).unwrap();
        assert_eq!(rep.primal_assignment, Assignment(vec![0, 0, 0]));
        assert_eq!(rep.primal_value, 0.0);
    }

    #[test]
    fn trace_lines_are_stable() {
        let sys = system_of(vec![prefers(1), prefers(0)]);
        let rep = solve(&sys, SolveOptions::default()).unwrap();
        let text = rep.trace_text();
        assert!(text.starts_with("sweep 0 L="));
        assert_eq!(text.lines().count(), rep.dual_trace.len());
    }
}
