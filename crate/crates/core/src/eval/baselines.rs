use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::diagram::{ArcRef, Assignment};
use crate::error::EvalError;
use crate::tree::{layout_variables, NodeTree, TaskKind, TokenNode, VarKind, VariableLayout};
use crate::utility::build_constraint_diagram;

/// A piece of model output with its log-probability, as delivered by the
/// sampler. Pieces concatenate to the suggestion text.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogprobPiece {
    pub text: String,
    pub logprob: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredToken {
    pub lexeme: String,
    pub logprob: Option<f64>,
}

/// Prototype tokens with log-probabilities mapped onto them.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoredPrototype {
    pub tokens: Vec<ScoredToken>,
}

impl ScoredPrototype {
    /// Maps pieces onto `tokens` by byte offset. A piece counts towards the
    /// token that holds its first non-blank byte, or the next token if it is
    /// blank. Tokens that receive no piece get log-probability 0.
    pub fn align(tokens: &[&TokenNode], pieces: &[LogprobPiece]) -> Self {
        let real: Vec<&TokenNode> = tokens.iter().copied().filter(|t| !t.synthetic).collect();
        let mut sums = vec![0.0; real.len()];
        let mut at = 0;
        for p in pieces {
            let lead = p.text.len() - p.text.trim_start().len();
            let anchor = at + lead;
            let owner = if lead == p.text.len() {
                real.iter().position(|t| t.span.start >= at)
            } else {
                real.iter().position(|t| t.span.end > anchor && !t.lexeme.is_empty())
            };
            if let Some(i) = owner {
                sums[i] += p.logprob;
            }
            at += p.text.len();
        }
        let mut it = sums.into_iter();
        ScoredPrototype {
            tokens: tokens
                .iter()
                .map(|t| ScoredToken {
                    lexeme: t.lexeme.clone(),
                    logprob: if t.synthetic { Some(0.0) } else { it.next() },
                })
                .collect(),
        }
    }

    fn logprobs(&self) -> Result<Vec<f64>, EvalError> {
        self.tokens.iter().map(|t| t.logprob.ok_or(EvalError::MissingLogprobs)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrefixMode {
    Regions,
    Truncate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedUnit {
    Chars,
    Lines,
}

/// The reference methods an annotation is compared against.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Baseline {
    AllSure,
    MaxUnsure,
    TokenProb { threshold: f64 },
    PrefixProb { threshold: f64, mode: PrefixMode },
    Fixed { unit: FixedUnit, n: usize },
    MaxAvgLogprob,
    /// Stand-in for an editor stopping heuristic: cut before the first
    /// segment whose mean token probability is below `threshold`.
    IntelliCode { threshold: f64 },
    ApiAllCalls,
    ApiNovelCalls,
}

impl Baseline {
    pub fn name(&self) -> String {
        match self {
            Baseline::AllSure => "all_sure".into(),
            Baseline::MaxUnsure => "max_unsure".into(),
            Baseline::TokenProb { threshold } => format!("token_prob_{threshold}"),
            Baseline::PrefixProb { threshold, mode: PrefixMode::Regions } => format!("prefix_prob_{threshold}"),
            Baseline::PrefixProb { threshold, mode: PrefixMode::Truncate } => {
                format!("prefix_prob_trunc_{threshold}")
            }
            Baseline::Fixed { unit: FixedUnit::Chars, n } => format!("fixed_{n}_chars"),
            Baseline::Fixed { unit: FixedUnit::Lines, n } => format!("fixed_{n}_lines"),
            Baseline::MaxAvgLogprob => "max_avg_logprob".into(),
            Baseline::IntelliCode { .. } => "intellicode".into(),
            Baseline::ApiAllCalls => "all_calls".into(),
            Baseline::ApiNovelCalls => "novel_calls".into(),
        }
    }

    pub fn needs_logprobs(&self) -> bool {
        matches!(
            self,
            Baseline::TokenProb { .. }
                | Baseline::PrefixProb { .. }
                | Baseline::MaxAvgLogprob
                | Baseline::IntelliCode { .. }
        )
    }

    /// The methods reported for a task.
    pub fn defaults_for(task: TaskKind) -> Vec<Baseline> {
        let mut out = vec![Baseline::AllSure];
        match task {
            TaskKind::ApiCalls => {
                out.extend([Baseline::ApiAllCalls, Baseline::ApiNovelCalls]);
                return out;
            }
            _ => out.push(Baseline::MaxUnsure),
        }
        if task.has_regions() {
            out.extend([
                Baseline::TokenProb { threshold: 0.5 },
                Baseline::TokenProb { threshold: 0.9 },
                Baseline::PrefixProb { threshold: 0.5, mode: PrefixMode::Regions },
            ]);
        }
        if task.has_truncation() {
            out.push(Baseline::PrefixProb { threshold: 0.5, mode: PrefixMode::Truncate });
            for n in [20, 40, 80, 160] {
                out.push(Baseline::Fixed { unit: FixedUnit::Chars, n });
            }
            for n in [1, 2, 4, 8, 16] {
                out.push(Baseline::Fixed { unit: FixedUnit::Lines, n });
            }
            out.extend([Baseline::MaxAvgLogprob, Baseline::IntelliCode { threshold: 0.5 }]);
        }
        out
    }
}

/// What a baseline may look at.
pub struct BaselineInput<'a> {
    /// Augmented prototype.
    pub prototype: &'a NodeTree,
    /// Suggestion text the prototype spans refer to.
    pub text: &'a str,
    pub task: TaskKind,
    pub scored: Option<&'a ScoredPrototype>,
    pub seen_lexemes: &'a HashSet<String>,
}

pub fn run_baseline(b: Baseline, input: &BaselineInput) -> Result<Assignment, EvalError> {
    let p = input.prototype;
    let layout = layout_variables(p);
    let scored = || input.scored.ok_or(EvalError::MissingLogprobs);
    let n = layout.num_tokens;
    let regions = input.task.has_regions();
    match b {
        Baseline::AllSure => Ok(Assignment::zeros(layout.len())),
        Baseline::MaxUnsure if regions => snap_regions(p, &vec![true; n]),
        Baseline::MaxUnsure => Ok(truncate_at_position(&layout, 0)),
        Baseline::TokenProb { threshold } => token_prob(p, scored()?, threshold),
        Baseline::PrefixProb { threshold, mode } => prefix_prob(p, scored()?, threshold, mode),
        Baseline::Fixed { unit, n } => Ok(fixed(p, input.text, unit, n)),
        Baseline::MaxAvgLogprob => max_avg_logprob(p, scored()?),
        Baseline::IntelliCode { threshold } => intellicode(p, scored()?, threshold),
        Baseline::ApiAllCalls => snap_regions(p, &vec![true; n]),
        Baseline::ApiNovelCalls => {
            let want = call_token_mask(p, |callee| !input.seen_lexemes.contains(callee));
            snap_regions(p, &want)
        }
    }
}

/// The cheapest legal region assignment covering every token in `want`.
/// Extra UNSURE tokens cost 1 each and every opened region a little, so
/// the marked set grows as little as possible. Truncation stays off.
/// Falls back to all-SURE if no legal cover exists.
pub fn snap_regions(prototype: &NodeTree, want: &[bool]) -> Result<Assignment, EvalError> {
    let layout = layout_variables(prototype);
    let d = build_constraint_diagram(prototype, 0.0)?;
    let token_of: Vec<Option<usize>> = layout.variables.iter().map(|v| v.token_index).collect();
    let kinds: Vec<VarKind> = layout.variables.iter().map(|v| v.kind).collect();
    let (value, path) = d.best_path_by(
        |r, arc| match r {
            ArcRef::Across { var, .. } if arc.value == 1 => match kinds[var] {
                VarKind::TokenInRegion if !want[token_of[var].unwrap()] => -1.0,
                VarKind::RegionStart => -1e-3,
                _ => 0.0,
            },
            _ => 0.0,
        },
        |var, value| match kinds[var] {
            VarKind::TokenInRegion if want[token_of[var].unwrap()] => value == 1,
            VarKind::Truncation => value == 0,
            _ => true,
        },
    );
    let Some(path) = path.filter(|_| value.is_finite()) else {
        return Ok(Assignment::zeros(layout.len()));
    };
    let mut a = Assignment::zeros(layout.len());
    for r in path {
        if let ArcRef::Across { var, .. } = r {
            a.0[var] = d.arc(r).value;
        }
    }
    Ok(a)
}

/// Assignment that keeps the first `position` tokens, all SURE. Uses the
/// first truncation variable at that position; keeps everything if there
/// is none.
pub fn truncate_at_position(layout: &VariableLayout, position: usize) -> Assignment {
    let mut a = Assignment::zeros(layout.len());
    if let Some(v) = layout.variables.iter().find(|v| v.kind == VarKind::Truncation && v.position == position) {
        a.0[v.var] = 1;
    }
    a
}

/// Token positions where the suggestion may be cut, in order, followed by
/// the full length.
fn boundaries(layout: &VariableLayout) -> Vec<usize> {
    let mut out: Vec<usize> = layout
        .variables
        .iter()
        .filter(|v| v.kind == VarKind::Truncation)
        .map(|v| v.position)
        .collect();
    out.sort_unstable();
    out.dedup();
    if out.last() != Some(&layout.num_tokens) {
        out.push(layout.num_tokens);
    }
    out
}

fn token_prob(p: &NodeTree, s: &ScoredPrototype, threshold: f64) -> Result<Assignment, EvalError> {
    let want: Vec<bool> = s.logprobs()?.iter().map(|lp| lp.exp() < threshold).collect();
    if !want.contains(&true) {
        return Ok(Assignment::zeros(layout_variables(p).len()));
    }
    snap_regions(p, &want)
}

fn first_drop(s: &ScoredPrototype, threshold: f64) -> Result<Option<usize>, EvalError> {
    let mut total = 0.0;
    for (i, lp) in s.logprobs()?.into_iter().enumerate() {
        total += lp;
        if total.exp() < threshold {
            return Ok(Some(i));
        }
    }
    Ok(None)
}

fn prefix_prob(p: &NodeTree, s: &ScoredPrototype, threshold: f64, mode: PrefixMode) -> Result<Assignment, EvalError> {
    let layout = layout_variables(p);
    let Some(k) = first_drop(s, threshold)? else {
        return Ok(Assignment::zeros(layout.len()));
    };
    match mode {
        PrefixMode::Regions => {
            let want: Vec<bool> = (0..layout.num_tokens).map(|i| i >= k).collect();
            snap_regions(p, &want)
        }
        PrefixMode::Truncate => {
            let cut = boundaries(&layout).into_iter().filter(|&b| b <= k).next_back().unwrap_or(0);
            Ok(truncate_at_position(&layout, cut))
        }
    }
}

fn fixed(p: &NodeTree, text: &str, unit: FixedUnit, n: usize) -> Assignment {
    let layout = layout_variables(p);
    let tokens = p.tokens();
    let offset = |pos: usize| tokens.get(pos).map_or(text.len(), |t| t.span.start.min(text.len()));
    let measure = |pos: usize| {
        let prefix = &text[..offset(pos)];
        match unit {
            FixedUnit::Chars => prefix.chars().count(),
            FixedUnit::Lines => prefix.matches('\n').count(),
        }
    };
    let total = match unit {
        FixedUnit::Chars => text.chars().count(),
        FixedUnit::Lines => text.lines().count(),
    };
    if n >= total {
        return Assignment::zeros(layout.len());
    }
    let best = boundaries(&layout)
        .into_iter()
        .min_by_key(|&b| (measure(b).abs_diff(n), b))
        .unwrap_or(layout.num_tokens);
    truncate_at_position(&layout, best)
}

fn max_avg_logprob(p: &NodeTree, s: &ScoredPrototype) -> Result<Assignment, EvalError> {
    let layout = layout_variables(p);
    let lps = s.logprobs()?;
    let mut best: Option<(f64, usize)> = None;
    for b in boundaries(&layout) {
        if b == 0 {
            continue;
        }
        let avg = lps[..b].iter().sum::<f64>() / b as f64;
        if best.is_none_or(|(v, _)| avg > v) {
            best = Some((avg, b));
        }
    }
    Ok(truncate_at_position(&layout, best.map_or(layout.num_tokens, |(_, b)| b)))
}

fn intellicode(p: &NodeTree, s: &ScoredPrototype, threshold: f64) -> Result<Assignment, EvalError> {
    let layout = layout_variables(p);
    let lps = s.logprobs()?;
    let tokens = p.tokens();
    let bs = boundaries(&layout);
    for w in bs.windows(2) {
        let probs: Vec<f64> = (w[0]..w[1]).filter(|&i| !tokens[i].lexeme.is_empty()).map(|i| lps[i].exp()).collect();
        if probs.is_empty() {
            continue;
        }
        let mean = probs.iter().sum::<f64>() / probs.len() as f64;
        if mean < threshold {
            return Ok(truncate_at_position(&layout, w[0]));
        }
    }
    Ok(Assignment::zeros(layout.len()))
}

/// Marks every token of the top-level calls whose callee passes `keep`.
fn call_token_mask(p: &NodeTree, keep: impl Fn(&str) -> bool) -> Vec<bool> {
    let layout = layout_variables(p);
    let mut out = vec![false; layout.num_tokens];
    let mut at = 0;
    for child in &p.root.children {
        let group = NodeTree::new(vec![child.clone()]);
        let toks = group.tokens();
        let lexemes: Vec<&str> = toks.iter().map(|t| t.lexeme.as_str()).collect();
        let paren = layout_variables(&group)
            .variables
            .iter()
            .filter(|v| v.kind == VarKind::RegionStart)
            .count();
        if paren > 0 && keep(lexemes[paren - 1]) {
            for flag in &mut out[at..at + toks.len()] {
                *flag = true;
            }
        }
        at += toks.len();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::PartialAssignment;
    use crate::parse::{parse_source, LanguageName};
    use crate::tree::{augment_prototype, decode_suggestion};

    fn proto(src: &str, task: TaskKind) -> NodeTree {
        augment_prototype(&parse_source(src, LanguageName::Python), task).unwrap()
    }

    fn scored(p: &NodeTree, probs: &[f64]) -> ScoredPrototype {
        let toks = p.tokens();
        assert_eq!(toks.len(), probs.len(), "{:?}", toks.iter().map(|t| &t.lexeme).collect::<Vec<_>>());
        ScoredPrototype {
            tokens: toks
                .iter()
                .zip(probs)
                .map(|(t, &q)| ScoredToken { lexeme: t.lexeme.clone(), logprob: Some(q.ln()) })
                .collect(),
        }
    }

    fn feasible(p: &NodeTree, a: &Assignment) -> bool {
        build_constraint_diagram(p, 0.0).unwrap().best_path_value(&a.to_partial()).is_finite()
    }

    fn unsure(p: &NodeTree, a: &Assignment) -> Vec<bool> {
        decode_suggestion(p, a).unwrap().tokens.iter().map(|t| t.confidence == crate::Confidence::Unsure).collect()
    }

    #[test]
    fn confident_tokens_stay_sure() {
        let p = proto("x = f(a)\n", TaskKind::Regions);
        let s = scored(&p, &[1.0; 6]);
        let a = token_prob(&p, &s, 0.9).unwrap();
        assert_eq!(a, Assignment::zeros(a.len()));
        let a = token_prob(&p, &s, 0.0).unwrap();
        assert_eq!(a, Assignment::zeros(a.len()));
    }

    #[test]
    fn one_doubtful_token_is_marked_alone() {
        let p = proto("x = f(a)\n", TaskKind::Regions);
        let s = scored(&p, &[1.0, 1.0, 1.0, 1.0, 0.4, 1.0]);
        let a = token_prob(&p, &s, 0.5).unwrap();
        assert!(feasible(&p, &a));
        assert_eq!(unsure(&p, &a), vec![false, false, false, false, true, false]);
    }

    #[test]
    fn prefix_probability_marks_the_tail() {
        let p = proto("a b\n", TaskKind::Regions);
        let s = scored(&p, &[0.9, 0.9]);
        let a = prefix_prob(&p, &s, 0.85, PrefixMode::Regions).unwrap();
        assert_eq!(unsure(&p, &a), vec![false, true]);
        let s = scored(&p, &[1.0, 0.99]);
        let a = prefix_prob(&p, &s, 1.0, PrefixMode::Regions).unwrap();
        assert_eq!(unsure(&p, &a), vec![false, true]);
    }

    #[test]
    fn empty_prototype_gives_empty_assignment() {
        let p = proto("", TaskKind::Regions);
        let a = prefix_prob(&p, &ScoredPrototype::default(), 0.5, PrefixMode::Regions).unwrap();
        assert!(a.is_empty());
    }

    #[test]
    fn missing_logprobs_is_an_error() {
        let p = proto("a\n", TaskKind::Regions);
        let s = ScoredPrototype { tokens: vec![ScoredToken { lexeme: "a".into(), logprob: None }] };
        assert_eq!(token_prob(&p, &s, 0.5), Err(EvalError::MissingLogprobs));
    }

    #[test]
    fn fixed_lengths() {
        let text = "a\nb\nc\n";
        let p = proto(text, TaskKind::Prefix);
        let kept = |a: &Assignment| decode_suggestion(&p, a).unwrap().tokens.len();
        assert_eq!(kept(&fixed(&p, text, FixedUnit::Chars, 0)), 0);
        assert_eq!(kept(&fixed(&p, text, FixedUnit::Chars, 100)), 3);
        let one = fixed(&p, text, FixedUnit::Lines, 1);
        assert_eq!(kept(&one), 1);
        assert_eq!(decode_suggestion(&p, &one).unwrap().truncation, Some(1));
    }

    #[test]
    fn best_average_prefix() {
        let text = "a\nb\nc\n";
        let p = proto(text, TaskKind::Prefix);
        let kept = |a: &Assignment| decode_suggestion(&p, a).unwrap().tokens.len();
        // averages 0.9 > 0.65 > 0.5
        let s = scored(&p, &[0.9, 0.4, 0.2]);
        assert_eq!(kept(&max_avg_logprob(&p, &s).unwrap()), 1);
        // all equal: the earliest non-empty boundary
        let s = scored(&p, &[0.5, 0.5, 0.5]);
        assert_eq!(kept(&max_avg_logprob(&p, &s).unwrap()), 1);
        let single = proto("a\n", TaskKind::Prefix);
        let s = scored(&single, &[0.3]);
        assert_eq!(decode_suggestion(&single, &max_avg_logprob(&single, &s).unwrap()).unwrap().tokens.len(), 1);
    }

    #[test]
    fn intellicode_stand_in() {
        let text = "a\nb\nc\n";
        let p = proto(text, TaskKind::Prefix);
        let kept = |a: &Assignment| decode_suggestion(&p, a).unwrap().tokens.len();
        assert_eq!(kept(&intellicode(&p, &scored(&p, &[0.9, 0.9, 0.9]), 0.5).unwrap()), 3);
        assert_eq!(kept(&intellicode(&p, &scored(&p, &[0.9, 0.3, 0.9]), 0.5).unwrap()), 1);
        assert_eq!(kept(&intellicode(&p, &scored(&p, &[0.1, 0.9, 0.9]), 0.5).unwrap()), 0);
    }

    #[test]
    fn every_baseline_is_feasible() {
        let src = "def f(x):\n    y = g(x, 1)\n    return y\nprint(f(2))\n";
        for task in [TaskKind::Regions, TaskKind::Prefix, TaskKind::PrefixPlusRegions, TaskKind::ApiCalls] {
            let p = augment_prototype(&parse_source(src, LanguageName::Python), task).unwrap();
            let n = p.tokens().len();
            let probs: Vec<f64> = (0..n).map(|i| 0.3 + 0.7 * ((i * 7 % 5) as f64 / 5.0)).collect();
            let s = scored(&p, &probs);
            let seen = HashSet::from(["print".to_string()]);
            let input = BaselineInput { prototype: &p, text: src, task, scored: Some(&s), seen_lexemes: &seen };
            let d = build_constraint_diagram(&p, 0.0).unwrap();
            for b in Baseline::defaults_for(task) {
                let a = run_baseline(b, &input).unwrap();
                assert!(d.best_path_value(&a.to_partial()).is_finite(), "{task} {}", b.name());
            }
            assert!(d.best_path_value(&PartialAssignment::free(d.num_vars())).is_finite());
        }
    }

    #[test]
    fn novel_calls_skip_seen_callees() {
        let p = proto("print(foo(x))\n", TaskKind::ApiCalls);
        let mask = call_token_mask(&p, |c| c != "print");
        // print ( foo ( x ) ) then foo ( x )
        assert_eq!(mask, vec![false, false, false, false, false, false, false, true, true, true, true]);
    }

    #[test]
    fn logprob_pieces_land_on_tokens() {
        let t = parse_source("foo = bar\n", LanguageName::Python);
        let pieces = [
            LogprobPiece { text: "fo".into(), logprob: -0.1 },
            LogprobPiece { text: "o".into(), logprob: -0.2 },
            LogprobPiece { text: " =".into(), logprob: -0.3 },
            LogprobPiece { text: " ".into(), logprob: -0.4 },
            LogprobPiece { text: "bar\n".into(), logprob: -0.5 },
        ];
        let s = ScoredPrototype::align(&t.tokens(), &pieces);
        let lps: Vec<f64> = s.tokens.iter().map(|t| t.logprob.unwrap()).collect();
        assert!((lps[0] + 0.3).abs() < 1e-12);
        assert!((lps[1] + 0.3).abs() < 1e-12);
        assert!((lps[2] + 0.9).abs() < 1e-12);
    }
}
