//! Compiles prototypes and intent samples into decision diagrams.

mod api;
mod constraint;
mod edit;
mod simple;

pub use api::{build_api_diagram, ApiWeights};
pub use constraint::build_constraint_diagram;
pub use edit::{build_hierarchical_edit_diagram, EditState};
pub use simple::build_simple_edit_diagram;

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagram::DiagramSystem;
use crate::error::{BuildError, DiagramError};
use crate::tree::{call_sequence, layout_variables, Confidence, NodeTree, TaskKind, TokenNode};

/// Costs that depend on the confidence of the suggestion at the edit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceCosts {
    pub match_utility: f64,
    pub delete_cost: f64,
    pub edit_start_penalty: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UtilityConfig {
    pub sure: ConfidenceCosts,
    pub unsure: ConfidenceCosts,
    /// Charged once for every region that is opened.
    pub region_switch_penalty: f64,
    pub insert_cost: f64,
    /// Weigh tokens by character count instead of counting them.
    pub per_char: bool,
    pub api: ApiWeights,
}

impl Default for UtilityConfig {
    fn default() -> Self {
        Self::edit_localization(0.7)
    }
}

impl UtilityConfig {
    /// Edit localization weights with UNSURE match utility `c` and UNSURE
    /// delete cost `1 - c`.
    pub fn edit_localization(c: f64) -> Self {
        UtilityConfig {
            sure: ConfidenceCosts { match_utility: 1.0, delete_cost: 1.0, edit_start_penalty: 5.0 },
            unsure: ConfidenceCosts { match_utility: c, delete_cost: 1.0 - c, edit_start_penalty: 0.25 },
            region_switch_penalty: 0.75,
            insert_cost: 0.0,
            per_char: true,
            api: ApiWeights::default(),
        }
    }

    /// Plain token-level edit distance with the given UNSURE weights and no
    /// localization penalties.
    pub fn per_token(alpha: f64, beta: f64) -> Self {
        UtilityConfig {
            sure: ConfidenceCosts { match_utility: 1.0, delete_cost: 1.0, edit_start_penalty: 0.0 },
            unsure: ConfidenceCosts { match_utility: alpha, delete_cost: beta, edit_start_penalty: 0.0 },
            region_switch_penalty: 0.0,
            insert_cost: 0.0,
            per_char: false,
            api: ApiWeights::default(),
        }
    }

    pub fn costs(&self, c: Confidence) -> &ConfidenceCosts {
        match c {
            Confidence::Sure => &self.sure,
            Confidence::Unsure => &self.unsure,
        }
    }

    /// Weight of one token under the per-char or per-token convention.
    /// Empty tokens stand for indentation and weigh nothing.
    pub fn token_weight(&self, t: &TokenNode) -> f64 {
        if t.lexeme.is_empty() {
            0.0
        } else if self.per_char {
            t.lexeme.chars().count() as f64
        } else {
            1.0
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let penalties = [
            ("sure.delete_cost", self.sure.delete_cost),
            ("sure.edit_start_penalty", self.sure.edit_start_penalty),
            ("unsure.delete_cost", self.unsure.delete_cost),
            ("unsure.edit_start_penalty", self.unsure.edit_start_penalty),
            ("region_switch_penalty", self.region_switch_penalty),
            ("insert_cost", self.insert_cost),
        ];
        for (name, v) in penalties {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("{name} must be a finite non-negative number, got {v}"));
            }
        }
        if !self.sure.match_utility.is_finite() || !self.unsure.match_utility.is_finite() {
            return Err("match utilities must be finite".into());
        }
        self.api.validate()
    }
}

/// Inputs that are not part of the prototype or the samples.
#[derive(Clone, Debug, Default)]
pub struct BuildContext {
    /// Lexemes that already occur before the suggestion. Only the call task
    /// looks at them.
    pub seen_lexemes: HashSet<String>,
}

/// The K edit diagrams, each scaled by 1/K, plus the constraint diagram.
pub fn build_system(
    prototype: &NodeTree,
    samples: &[NodeTree],
    config: &UtilityConfig,
    task: TaskKind,
) -> Result<DiagramSystem, BuildError> {
    build_system_with(prototype, samples, config, task, &BuildContext::default())
}

pub fn build_system_with(
    prototype: &NodeTree,
    samples: &[NodeTree],
    config: &UtilityConfig,
    task: TaskKind,
    ctx: &BuildContext,
) -> Result<DiagramSystem, BuildError> {
    if samples.is_empty() {
        return Err(BuildError::NoSamples);
    }
    if let Some(k) = samples.iter().position(NodeTree::has_controls) {
        return Err(DiagramError::LayoutMismatch(format!("sample {k} carries control nodes")).into());
    }
    let layout = layout_variables(prototype);
    let k = samples.len() as f64;
    let diagrams: Result<Vec<_>, BuildError> = samples
        .par_iter()
        .map(|g| match task {
            TaskKind::ApiCalls => {
                build_api_diagram(prototype, &call_sequence(g), &config.api, &ctx.seen_lexemes)
            }
            _ => build_hierarchical_edit_diagram(prototype, g, config),
        })
        .collect();
    let penalty = match task {
        TaskKind::ApiCalls => 0.0,
        _ => config.region_switch_penalty,
    };
    let mut system = DiagramSystem::new(layout.domains());
    for (i, d) in diagrams?.into_iter().enumerate() {
        system.push(d, 1.0 / k, format!("sample {i}"))?;
    }
    system.push(build_constraint_diagram(prototype, penalty)?, 1.0, "constraints")?;
    Ok(system)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_edit_localization() {
        let c = UtilityConfig::default();
        assert_eq!(c.unsure.match_utility, 0.7);
        assert!((c.unsure.delete_cost - 0.3).abs() < 1e-12);
        assert_eq!(c.sure.edit_start_penalty, 5.0);
        assert_eq!(c.unsure.edit_start_penalty, 0.25);
        assert_eq!(c.region_switch_penalty, 0.75);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn negative_penalty_is_rejected() {
        let mut c = UtilityConfig::default();
        c.region_switch_penalty = -1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_reads_partial_json() {
        let c: UtilityConfig = serde_json::from_str(r#"{"per_char": false}"#).unwrap();
        assert!(!c.per_char);
        assert_eq!(c.sure.edit_start_penalty, 5.0);
        assert!(serde_json::from_str::<UtilityConfig>(r#"{"bogus": 1}"#).is_err());
    }
}
