use std::fmt::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::OutputRecord;
use crate::tree::Confidence;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Ansi,
    Html,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ansi" => Ok(Format::Ansi),
            "html" => Ok(Format::Html),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format {other:?}, expected ansi, html or json")),
        }
    }
}

const ANSI_UNSURE: &str = "\x1b[30;43m";
const ANSI_MARKER: &str = "\x1b[1;31m";
const ANSI_RESET: &str = "\x1b[0m";
const MARKER: char = '\u{2038}';

fn escape_html(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
}

/// Pieces of the suggestion in order: text with its confidence, or an
/// insertion point.
fn pieces(out: &OutputRecord) -> Vec<(Option<Confidence>, &str)> {
    let s = &out.suggestion;
    let mut markers = s.insertion_markers.iter().peekable();
    let mut res = Vec::new();
    for span in &s.spans {
        let mut at = span.start;
        while let Some(&&m) = markers.peek() {
            if m >= span.end {
                break;
            }
            if m > at {
                res.push((Some(span.confidence), &s.text[at..m]));
                at = m;
            }
            res.push((None, ""));
            markers.next();
        }
        res.push((Some(span.confidence), &s.text[at..span.end]));
    }
    for _ in markers {
        res.push((None, ""));
    }
    res
}

pub fn render(out: &OutputRecord, format: Format) -> String {
    match format {
        Format::Json => serde_json::to_string(out).expect("output records serialize"),
        Format::Ansi => {
            let mut r = String::new();
            for (conf, text) in pieces(out) {
                match conf {
                    None => {
                        let _ = write!(r, "{ANSI_MARKER}{MARKER}{ANSI_RESET}");
                    }
                    Some(Confidence::Unsure) => {
                        // keep newlines outside the highlight so the color does not bleed
                        for (i, line) in text.split('\n').enumerate() {
                            if i > 0 {
                                r.push('\n');
                            }
                            if !line.is_empty() {
                                let _ = write!(r, "{ANSI_UNSURE}{line}{ANSI_RESET}");
                            }
                        }
                    }
                    Some(Confidence::Sure) => r.push_str(text),
                }
            }
            r
        }
        Format::Html => {
            let mut r = String::from("<pre class=\"qualm-suggestion\">");
            for (conf, text) in pieces(out) {
                match conf {
                    None => r.push_str("<span class=\"qualm-insert\"></span>"),
                    Some(Confidence::Unsure) => {
                        r.push_str("<span class=\"qualm-unsure\">");
                        escape_html(text, &mut r);
                        r.push_str("</span>");
                    }
                    Some(Confidence::Sure) => escape_html(text, &mut r),
                }
            }
            r.push_str("</pre>");
            r
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::LanguageName;
    use crate::pipeline::{ConfidenceSpan, RenderedSuggestion, SolveStats};
    use crate::tree::TaskKind;

    fn output(spans: &[(&str, Confidence)], markers: Vec<usize>) -> OutputRecord {
        let mut at = 0;
        let mut text = String::new();
        let spans = spans
            .iter()
            .map(|&(t, confidence)| {
                text.push_str(t);
                let s = ConfidenceSpan { start: at, end: at + t.len(), confidence, text: t.into() };
                at += t.len();
                s
            })
            .collect();
        OutputRecord {
            id: "r".into(),
            task: TaskKind::Regions,
            language: LanguageName::Python,
            suggestion: RenderedSuggestion { text, spans, truncation_offset: None, insertion_markers: markers },
            assignment: vec![],
            stats: SolveStats {
                num_vars: 0,
                num_diagrams: 1,
                dual_bound: 0.0,
                primal_value: 0.0,
                duality_gap: 0.0,
                sweeps: 0,
                agreed: true,
                build_ms: None,
                solve_ms: None,
            },
            eval: vec![],
        }
    }

    #[test]
    fn json_round_trips() {
        let o = output(&[("x = ", Confidence::Sure), ("f(a)", Confidence::Unsure)], vec![0]);
        let back: OutputRecord = serde_json::from_str(&render(&o, Format::Json)).unwrap();
        assert_eq!(back, o);
    }

    #[test]
    fn all_sure_ansi_has_no_escapes() {
        let o = output(&[("x = f(a)\n", Confidence::Sure)], vec![]);
        assert!(!render(&o, Format::Ansi).contains('\x1b'));
        assert_eq!(render(&o, Format::Ansi), "x = f(a)\n");
    }

    #[test]
    fn one_unsure_span_in_html() {
        let o = output(&[("x = ", Confidence::Sure), ("a<b", Confidence::Unsure), ("\n", Confidence::Sure)], vec![]);
        let h = render(&o, Format::Html);
        assert_eq!(h.matches("<span class=\"qualm-unsure\">").count(), 1);
        assert!(h.contains("a&lt;b"));
    }

    #[test]
    fn markers_split_spans() {
        let o = output(&[("ab", Confidence::Sure)], vec![1, 2]);
        assert_eq!(
            render(&o, Format::Html),
            "<pre class=\"qualm-suggestion\">a<span class=\"qualm-insert\"></span>b<span class=\"qualm-insert\"></span></pre>"
        );
    }

    #[test]
    fn unknown_format() {
        assert!("pdf".parse::<Format>().is_err());
        assert_eq!("html".parse::<Format>(), Ok(Format::Html));
    }
}
