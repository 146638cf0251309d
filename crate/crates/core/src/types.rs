use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// One of the four context configurations a comment can be generated under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Setup {
    #[serde(rename = "code")]
    Code,
    #[serde(rename = "code+ast")]
    CodeAst,
    #[serde(rename = "code+doc")]
    CodeDoc,
    #[serde(rename = "code+ast+doc")]
    CodeAstDoc,
}

impl Setup {
    pub const ALL: [Setup; 4] = [Setup::Code, Setup::CodeAst, Setup::CodeDoc, Setup::CodeAstDoc];

    pub fn uses_ast(self) -> bool {
        matches!(self, Setup::CodeAst | Setup::CodeAstDoc)
    }

    pub fn uses_docs(self) -> bool {
        matches!(self, Setup::CodeDoc | Setup::CodeAstDoc)
    }

    pub fn key(self) -> &'static str {
        match self {
            Setup::Code => "code",
            Setup::CodeAst => "code+ast",
            Setup::CodeDoc => "code+doc",
            Setup::CodeAstDoc => "code+ast+doc",
        }
    }

    /// Column-group heading used in rendered tables.
    pub fn title(self) -> &'static str {
        match self {
            Setup::Code => "Code",
            Setup::CodeAst => "Code + AST",
            Setup::CodeDoc => "Code + Design Doc",
            Setup::CodeAstDoc => "Code + AST + Design Doc",
        }
    }
}

impl fmt::Display for Setup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Setup {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Setup::ALL
            .into_iter()
            .find(|v| v.key() == s)
            .ok_or_else(|| format!("unknown setup `{s}` (expected code, code+ast, code+doc or code+ast+doc)"))
    }
}

/// Provider-neutral token estimate: one token per four characters, rounded up.
pub fn estimate_tokens(text: &str) -> usize {
    estimate_tokens_from_chars(text.chars().count())
}

pub fn estimate_tokens_from_chars(chars: usize) -> usize {
    chars.div_ceil(4)
}
