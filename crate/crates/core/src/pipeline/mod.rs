//! End-to-end processing of one example: parse, build, solve, decode and
//! evaluate.

mod render;

pub use render::{render, Format};

use std::collections::HashSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::diagram::DiagramSystem;
use crate::error::PipelineError;
use crate::eval::{run_baseline, Baseline, BaselineInput, EvalReport, Evaluator, LogprobPiece, ScoredPrototype};
use crate::parse::{parse_source, LanguageName};
use crate::solver::{solve, SolveOptions};
use crate::tree::{augment_prototype, decode_suggestion, strip_context, AnnotatedSuggestion, Confidence, NodeTree, TaskKind};
use crate::utility::{build_system_with, BuildContext, UtilityConfig};

/// A sample, either as bare text or with per-piece log-probabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SampleText {
    Plain(String),
    Scored {
        text: String,
        #[serde(default)]
        logprobs: Option<Vec<LogprobPiece>>,
    },
}

impl SampleText {
    pub fn text(&self) -> &str {
        match self {
            SampleText::Plain(t) | SampleText::Scored { text: t, .. } => t,
        }
    }

    pub fn logprobs(&self) -> Option<&[LogprobPiece]> {
        match self {
            SampleText::Plain(_) => None,
            SampleText::Scored { logprobs, .. } => logprobs.as_deref(),
        }
    }
}

impl From<&str> for SampleText {
    fn from(s: &str) -> Self {
        SampleText::Plain(s.to_string())
    }
}

/// One line of the input corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExampleRecord {
    pub id: String,
    pub language: LanguageName,
    #[serde(default)]
    pub context: String,
    /// Defaults to the first sample.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prototype: Option<SampleText>,
    pub samples: Vec<SampleText>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holdout_sample: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<String>,
}

impl ExampleRecord {
    pub fn prototype(&self) -> Option<&SampleText> {
        self.prototype.as_ref().or(self.samples.first())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfidenceSpan {
    pub start: usize,
    pub end: usize,
    pub confidence: Confidence,
    pub text: String,
}

/// The annotated suggestion as text. Offsets are bytes into `text`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedSuggestion {
    pub text: String,
    pub spans: Vec<ConfidenceSpan>,
    /// Where the prototype was cut, if it was.
    pub truncation_offset: Option<usize>,
    pub insertion_markers: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub num_vars: usize,
    pub num_diagrams: usize,
    pub dual_bound: f64,
    pub primal_value: f64,
    pub duality_gap: f64,
    pub sweeps: usize,
    pub agreed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub build_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve_ms: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<EvalReport>,
    /// Why the method could not run on this example.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub id: String,
    pub task: TaskKind,
    pub language: LanguageName,
    pub suggestion: RenderedSuggestion,
    pub assignment: Vec<u8>,
    pub stats: SolveStats,
    pub eval: Vec<EvalRow>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PipelineOptions {
    pub solve: SolveOptions,
    /// Record wall-clock timings. Off gives byte-identical output across runs.
    pub timings: bool,
    pub baselines: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions { solve: SolveOptions::default(), timings: true, baselines: true }
    }
}

/// Parsed and compiled form of a record, before solving.
pub struct Prepared {
    pub text: String,
    /// Augmented prototype.
    pub prototype: NodeTree,
    pub samples: Vec<NodeTree>,
    pub truth: Option<NodeTree>,
    pub holdout: Option<NodeTree>,
    pub seen_lexemes: HashSet<String>,
    pub scored: Option<ScoredPrototype>,
    pub system: DiagramSystem,
}

fn parse_with_context(context: &str, text: &str, lang: LanguageName) -> NodeTree {
    if context.is_empty() {
        return parse_source(text, lang);
    }
    strip_context(context.len(), &parse_source(&format!("{context}{text}"), lang))
}

pub fn prepare(record: &ExampleRecord, task: TaskKind, config: &UtilityConfig) -> Result<Prepared, PipelineError> {
    config.validate().map_err(PipelineError::Config)?;
    let proto = record.prototype().ok_or(PipelineError::EmptySamples)?;
    if record.samples.is_empty() {
        return Err(PipelineError::EmptySamples);
    }
    let lang = record.language;
    let ctx = &record.context;
    let text = proto.text().to_string();
    let prototype = augment_prototype(&parse_with_context(ctx, &text, lang), task)?;
    let samples: Vec<NodeTree> = record.samples.iter().map(|s| parse_with_context(ctx, s.text(), lang)).collect();
    let truth = record.ground_truth.as_deref().map(|t| parse_with_context(ctx, t, lang));
    let holdout = record.holdout_sample.as_deref().map(|t| parse_with_context(ctx, t, lang));
    let seen_lexemes: HashSet<String> = parse_source(ctx, lang).tokens().iter().map(|t| t.lexeme.clone()).collect();
    let scored = proto.logprobs().map(|pieces| ScoredPrototype::align(&prototype.tokens(), pieces));
    let build_ctx = BuildContext { seen_lexemes: seen_lexemes.clone() };
    let system = build_system_with(&prototype, &samples, config, task, &build_ctx)?;
    Ok(Prepared { text, prototype, samples, truth, holdout, seen_lexemes, scored, system })
}

/// Text, confidence spans, cut and markers of a decoded suggestion.
pub fn rendered_suggestion(prototype: &NodeTree, text: &str, s: &AnnotatedSuggestion) -> RenderedSuggestion {
    let tokens = prototype.tokens();
    let offset = |pos: usize| tokens.get(pos).map_or(text.len(), |t| t.span.start.min(text.len()));
    let cut = s.truncation.map_or(text.len(), offset);
    let emitted = &text[..cut];

    let mut unsure: Vec<(usize, usize)> = s
        .tokens
        .iter()
        .zip(&tokens)
        .filter(|(st, t)| st.confidence == Confidence::Unsure && !t.synthetic && !t.lexeme.is_empty())
        .map(|(_, t)| (t.span.start.min(cut), t.span.end.min(cut)))
        .filter(|(a, b)| a < b)
        .collect();
    unsure.sort_unstable();
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for (a, b) in unsure {
        match merged.last_mut() {
            Some(last) if a <= last.1 || emitted[last.1..a].trim().is_empty() => last.1 = last.1.max(b),
            _ => merged.push((a, b)),
        }
    }

    let mut spans = Vec::new();
    let mut at = 0;
    let mut push = |start: usize, end: usize, confidence| {
        if start < end {
            spans.push(ConfidenceSpan { start, end, confidence, text: emitted[start..end].to_string() });
        }
    };
    for (a, b) in merged {
        push(at, a, Confidence::Sure);
        push(a, b, Confidence::Unsure);
        at = b;
    }
    push(at, cut, Confidence::Sure);

    let mut markers: Vec<usize> = s.insertion_markers.iter().map(|&p| offset(p).min(cut)).collect();
    markers.dedup();
    RenderedSuggestion {
        text: emitted.to_string(),
        spans,
        truncation_offset: s.truncation.map(|_| cut),
        insertion_markers: markers,
    }
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

pub fn run_pipeline(
    record: &ExampleRecord,
    task: TaskKind,
    config: &UtilityConfig,
    opts: &PipelineOptions,
) -> Result<OutputRecord, PipelineError> {
    let t0 = Instant::now();
    let prep = prepare(record, task, config)?;
    let build_ms = ms(t0);
    let t1 = Instant::now();
    let report = solve(&prep.system, opts.solve)?;
    let solve_ms = ms(t1);
    let annotated = decode_suggestion(&prep.prototype, &report.primal_assignment)?;

    let evaluator = Evaluator::new(
        &prep.prototype,
        &prep.system,
        config,
        task,
        prep.truth.as_ref(),
        prep.holdout.as_ref(),
        &prep.seen_lexemes,
    )?;
    let mut eval = vec![EvalRow {
        method: "solver".into(),
        report: Some(evaluator.evaluate(&report.primal_assignment)?),
        skipped: None,
    }];
    if opts.baselines {
        let input = BaselineInput {
            prototype: &prep.prototype,
            text: &prep.text,
            task,
            scored: prep.scored.as_ref(),
            seen_lexemes: &prep.seen_lexemes,
        };
        for b in Baseline::defaults_for(task) {
            let row = match run_baseline(b, &input) {
                Ok(a) => EvalRow { method: b.name(), report: Some(evaluator.evaluate(&a)?), skipped: None },
                Err(e) => EvalRow { method: b.name(), report: None, skipped: Some(e.to_string()) },
            };
            eval.push(row);
        }
    }

    Ok(OutputRecord {
        id: record.id.clone(),
        task,
        language: record.language,
        suggestion: rendered_suggestion(&prep.prototype, &prep.text, &annotated),
        assignment: report.primal_assignment.0.clone(),
        stats: SolveStats {
            num_vars: prep.system.num_vars(),
            num_diagrams: prep.system.len(),
            dual_bound: report.dual_bound,
            primal_value: report.primal_value,
            duality_gap: report.duality_gap,
            sweeps: report.sweeps_run,
            agreed: report.agreed,
            build_ms: opts.timings.then_some(build_ms),
            solve_ms: opts.timings.then_some(solve_ms),
        },
        eval,
    })
}
