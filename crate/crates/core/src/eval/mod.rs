//! Baselines and evaluation metrics.

mod baselines;

pub use baselines::{
    run_baseline, snap_regions, truncate_at_position, Baseline, BaselineInput, FixedUnit, LogprobPiece, PrefixMode,
    ScoredPrototype, ScoredToken,
};

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::diagram::{ArcKind, ArcRef, Assignment, DiagramSystem, OrderedDiagram};
use crate::error::EvalError;
use crate::tree::{
    call_sequence, decode_suggestion, layout_variables, Confidence, NodeTree, TaskKind, VariableLayout,
};
use crate::utility::{build_api_diagram, build_constraint_diagram, build_hierarchical_edit_diagram, UtilityConfig};

/// Scores of one annotation. Utilities are relative to leaving the whole
/// suggestion SURE. Ratios with a zero denominator are reported as 1.0 and
/// named in `undefined`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub utility_vs_ground_truth: Option<f64>,
    /// Mean over the optimization samples.
    pub estimated_utility: f64,
    /// Against the held-out sample.
    pub loo_utility: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub f1: Option<f64>,
    pub correct_chars: Option<usize>,
    pub incorrect_chars: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub undefined: Vec<String>,
}

/// Per-token edit flags and confidence flags to classification scores.
/// Returns sensitivity, specificity, F1 and the names of undefined ratios.
pub fn classification(edited: &[bool], flagged: &[bool]) -> (f64, f64, f64, Vec<String>) {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut tn = 0usize;
    let mut fn_ = 0usize;
    for (&e, &f) in edited.iter().zip(flagged) {
        match (e, f) {
            (true, true) => tp += 1,
            (true, false) => fn_ += 1,
            (false, true) => fp += 1,
            (false, false) => tn += 1,
        }
    }
    let mut undefined = Vec::new();
    let mut ratio = |num: usize, den: usize, name: &str| {
        if den == 0 {
            undefined.push(name.to_string());
            1.0
        } else {
            num as f64 / den as f64
        }
    };
    let sensitivity = ratio(tp, tp + fn_, "sensitivity");
    let specificity = ratio(tn, tn + fp, "specificity");
    let precision = ratio(tp, tp + fp, "precision");
    let f1 = if precision + sensitivity == 0.0 {
        0.0
    } else {
        2.0 * precision * sensitivity / (precision + sensitivity)
    };
    (sensitivity, specificity, f1, undefined)
}

struct Reference {
    diagram: OrderedDiagram,
    /// Prototype tokens deleted by the best all-SURE alignment.
    edited: Vec<bool>,
}

/// Scores assignments of one prototype against samples, a held-out sample
/// and the ground truth.
pub struct Evaluator<'a> {
    prototype: &'a NodeTree,
    system: &'a DiagramSystem,
    layout: VariableLayout,
    constraint: OrderedDiagram,
    truth: Option<Reference>,
    holdout: Option<OrderedDiagram>,
    base_estimate: f64,
}

fn build_reference(
    prototype: &NodeTree,
    target: &NodeTree,
    config: &UtilityConfig,
    task: TaskKind,
    seen: &HashSet<String>,
) -> Result<OrderedDiagram, EvalError> {
    Ok(match task {
        TaskKind::ApiCalls => build_api_diagram(prototype, &call_sequence(target), &config.api, seen)?,
        _ => build_hierarchical_edit_diagram(prototype, target, config)?,
    })
}

impl<'a> Evaluator<'a> {
    /// `prototype` is augmented; `truth` and `holdout` are context-stripped
    /// trees without controls.
    pub fn new(
        prototype: &'a NodeTree,
        system: &'a DiagramSystem,
        config: &UtilityConfig,
        task: TaskKind,
        truth: Option<&NodeTree>,
        holdout: Option<&NodeTree>,
        seen: &HashSet<String>,
    ) -> Result<Self, EvalError> {
        let layout = layout_variables(prototype);
        let penalty = if task == TaskKind::ApiCalls { 0.0 } else { config.region_switch_penalty };
        let constraint = build_constraint_diagram(prototype, penalty)?;
        let truth = match truth {
            Some(t) => {
                let diagram = build_reference(prototype, t, config, task, seen)?;
                // calls are judged with every call selected
                let reference = if task == TaskKind::ApiCalls {
                    snap_regions(prototype, &vec![true; layout.num_tokens])?.to_partial()
                } else {
                    Assignment::zeros(layout.len()).to_partial()
                };
                let mut edited = vec![false; layout.num_tokens];
                let (_, path) = diagram.best_path_by(|_, _| 0.0, |var, value| reference.allows(var, value));
                for r in path.unwrap_or_default() {
                    if let ArcRef::Across { var, .. } = r {
                        if diagram.arc(r).kind == ArcKind::Delete {
                            if let Some(k) = layout.variables[var].token_index {
                                edited[k] = true;
                            }
                        }
                    }
                }
                Some(Reference { diagram, edited })
            }
            None => None,
        };
        let holdout = holdout.map(|h| build_reference(prototype, h, config, task, seen)).transpose()?;
        let base_estimate = system.value(&Assignment::zeros(layout.len()));
        Ok(Evaluator { prototype, system, layout, constraint, truth, holdout, base_estimate })
    }

    fn against(&self, d: &OrderedDiagram, a: &Assignment) -> f64 {
        let zero = Assignment::zeros(a.len());
        let v = d.best_path_value(&a.to_partial()) + self.constraint.best_path_value(&a.to_partial());
        let base = d.best_path_value(&zero.to_partial());
        v - base
    }

    /// Tokens flagged by `a`: UNSURE or cut off by truncation.
    pub fn flagged(&self, a: &Assignment) -> Result<Vec<bool>, EvalError> {
        let s = decode_suggestion(self.prototype, a)?;
        let mut out = vec![true; self.layout.num_tokens];
        for (i, t) in s.tokens.iter().enumerate() {
            out[i] = t.confidence == Confidence::Unsure;
        }
        Ok(out)
    }

    pub fn evaluate(&self, a: &Assignment) -> Result<EvalReport, EvalError> {
        let s = decode_suggestion(self.prototype, a)?;
        let estimated_utility = self.system.value(a) - self.base_estimate;
        let loo_utility = self.holdout.as_ref().map(|d| self.against(d, a));
        let mut report = EvalReport {
            utility_vs_ground_truth: None,
            estimated_utility,
            loo_utility,
            sensitivity: None,
            specificity: None,
            f1: None,
            correct_chars: None,
            incorrect_chars: None,
            undefined: Vec::new(),
        };
        if let Some(truth) = &self.truth {
            report.utility_vs_ground_truth = Some(self.against(&truth.diagram, a));
            let flagged = self.flagged(a)?;
            let (sens, spec, f1, undefined) = classification(&truth.edited, &flagged);
            report.sensitivity = Some(sens);
            report.specificity = Some(spec);
            report.f1 = Some(f1);
            report.undefined = undefined;
            let tokens = self.prototype.tokens();
            let (mut good, mut bad) = (0, 0);
            for (i, t) in s.tokens.iter().enumerate() {
                if t.confidence == Confidence::Sure {
                    let chars = tokens[i].lexeme.chars().count();
                    if truth.edited[i] {
                        bad += chars;
                    } else {
                        good += chars;
                    }
                }
            }
            report.correct_chars = Some(good);
            report.incorrect_chars = Some(bad);
        }
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{parse_source, LanguageName};
    use crate::tree::augment_prototype;
    use crate::utility::build_system;

    #[test]
    fn classification_by_hand() {
        // 4 tokens, 2 edited, one of them flagged, plus one false alarm
        let (sens, spec, f1, undefined) = classification(&[true, true, false, false], &[true, false, true, false]);
        assert_eq!(sens, 0.5);
        assert_eq!(spec, 0.5);
        assert_eq!(f1, 0.5);
        assert!(undefined.is_empty());
    }

    #[test]
    fn nothing_edited_nothing_flagged() {
        let (sens, spec, f1, undefined) = classification(&[false; 3], &[false; 3]);
        assert_eq!((sens, spec, f1), (1.0, 1.0, 1.0));
        assert_eq!(undefined, vec!["sensitivity", "precision"]);
    }

    fn setup(proto: &str, truth: &str) -> (NodeTree, DiagramSystem, NodeTree) {
        let p = augment_prototype(&parse_source(proto, LanguageName::Python), TaskKind::Regions).unwrap();
        let t = parse_source(truth, LanguageName::Python);
        let sys = build_system(&p, std::slice::from_ref(&t), &UtilityConfig::default(), TaskKind::Regions).unwrap();
        (p, sys, t)
    }

    #[test]
    fn identical_all_sure() {
        let (p, sys, t) = setup("x = f(a)\n", "x = f(a)\n");
        let ev = Evaluator::new(&p, &sys, &UtilityConfig::default(), TaskKind::Regions, Some(&t), Some(&t), &HashSet::new())
            .unwrap();
        let r = ev.evaluate(&Assignment::zeros(layout_variables(&p).len())).unwrap();
        assert_eq!(r.utility_vs_ground_truth, Some(0.0));
        assert_eq!(r.estimated_utility, 0.0);
        assert_eq!(r.loo_utility, Some(0.0));
        assert_eq!(r.sensitivity, Some(1.0));
        assert_eq!(r.specificity, Some(1.0));
        assert_eq!(r.incorrect_chars, Some(0));
        assert_eq!(r.correct_chars, Some(6));
        assert!(r.undefined.contains(&"sensitivity".to_string()));
    }

    #[test]
    fn everything_unsure() {
        let (p, sys, t) = setup("x = f(a)\n", "x = g(b)\n");
        let ev =
            Evaluator::new(&p, &sys, &UtilityConfig::default(), TaskKind::Regions, Some(&t), None, &HashSet::new()).unwrap();
        let n = p.tokens().len();
        let a = snap_regions(&p, &vec![true; n]).unwrap();
        let r = ev.evaluate(&a).unwrap();
        assert_eq!(r.sensitivity, Some(1.0));
        assert_eq!(r.specificity, Some(0.0));
        assert_eq!(r.correct_chars, Some(0));
    }
}
