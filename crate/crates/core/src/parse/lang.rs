use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::ParseError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LanguageName {
    Python,
    Java,
    Javascript,
    Cpp,
}

impl LanguageName {
    pub const ALL: [LanguageName; 4] =
        [LanguageName::Python, LanguageName::Java, LanguageName::Javascript, LanguageName::Cpp];

    pub fn as_str(self) -> &'static str {
        match self {
            LanguageName::Python => "python",
            LanguageName::Java => "java",
            LanguageName::Javascript => "javascript",
            LanguageName::Cpp => "cpp",
        }
    }
}

impl fmt::Display for LanguageName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LanguageName {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "python" | "py" => Ok(LanguageName::Python),
            "java" => Ok(LanguageName::Java),
            "javascript" | "js" => Ok(LanguageName::Javascript),
            "cpp" | "c++" => Ok(LanguageName::Cpp),
            other => Err(ParseError::Language(format!("unknown language {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TokenKind {
    Id,
    Punc,
    Brace,
    WhiteSpace,
    Newline,
    String,
    Comment,
    Number,
}

/// On-disk form of a language definition.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LanguageSpec {
    pub name: String,
    pub indent_sensitive: bool,
    pub brackets: Vec<(String, String)>,
    /// Openers whose groups hold statements and get split into lines.
    pub block_brackets: Vec<String>,
    pub statement_terminators: Vec<String>,
    pub keywords: Vec<String>,
    /// Tried in order at every position; the first non-empty match wins.
    pub tokens: Vec<TokenRule>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TokenRule {
    pub kind: TokenKind,
    pub pattern: String,
}

/// A compiled language definition.
#[derive(Debug)]
pub struct Language {
    pub name: String,
    pub indent_sensitive: bool,
    pub brackets: Vec<(String, String)>,
    pub block_brackets: HashSet<String>,
    pub statement_terminators: HashSet<String>,
    pub keywords: HashSet<String>,
    pub(crate) kinds: Vec<TokenKind>,
    pub(crate) scanner: Regex,
}

impl Language {
    pub fn from_spec(spec: LanguageSpec) -> Result<Self, ParseError> {
        if spec.tokens.is_empty() {
            return Err(ParseError::Language("no token rules".into()));
        }
        let mut alt = String::from(r"\A(?:");
        for (i, rule) in spec.tokens.iter().enumerate() {
            Regex::new(&rule.pattern)
                .map_err(|e| ParseError::Language(format!("rule {i}: {e}")))?;
            if i > 0 {
                alt.push('|');
            }
            alt.push_str(&format!("(?P<t{i}>{})", rule.pattern));
        }
        alt.push(')');
        let scanner = Regex::new(&alt).map_err(|e| ParseError::Language(e.to_string()))?;
        let openers: HashSet<&String> = spec.brackets.iter().map(|(o, _)| o).collect();
        for b in &spec.block_brackets {
            if !openers.contains(b) {
                return Err(ParseError::Language(format!("block bracket {b:?} is not an opener")));
            }
        }
        Ok(Language {
            name: spec.name,
            indent_sensitive: spec.indent_sensitive,
            brackets: spec.brackets,
            block_brackets: spec.block_brackets.into_iter().collect(),
            statement_terminators: spec.statement_terminators.into_iter().collect(),
            keywords: spec.keywords.into_iter().collect(),
            kinds: spec.tokens.iter().map(|r| r.kind).collect(),
            scanner,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, ParseError> {
        let spec: LanguageSpec =
            serde_json::from_str(text).map_err(|e| ParseError::Language(e.to_string()))?;
        Self::from_spec(spec)
    }

    /// The built-in definition for `name`.
    pub fn get(name: LanguageName) -> &'static Language {
        static CACHE: [OnceLock<Language>; 4] =
            [OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new()];
        let (slot, text) = match name {
            LanguageName::Python => (0, include_str!("languages/python.json")),
            LanguageName::Java => (1, include_str!("languages/java.json")),
            LanguageName::Javascript => (2, include_str!("languages/javascript.json")),
            LanguageName::Cpp => (3, include_str!("languages/cpp.json")),
        };
        CACHE[slot].get_or_init(|| Language::from_json(text).expect("built-in language is valid"))
    }

    pub(crate) fn opener_index(&self, lexeme: &str) -> Option<usize> {
        self.brackets.iter().position(|(o, _)| o == lexeme)
    }

    pub(crate) fn closer_index(&self, lexeme: &str) -> Option<usize> {
        self.brackets.iter().position(|(_, c)| c == lexeme)
    }
}
