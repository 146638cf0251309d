use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::astx::CondensedAst;
use crate::corpus::{CodeUnit, Language};
use crate::docstore::Hit;
use crate::lexer;
use crate::types::{estimate_tokens, Setup};

use super::{Exemplar, ExemplarPool, Label, PromptError};

pub const PERSONA: &str = "You are a novice software developer intending to maintain this code.";

pub const DEFAULT_INSTRUCTION: &str = "Add a docstring-style comment above every function in the code above. \
Explain what the function does and what a new maintainer needs to know to change it safely. \
Return the complete code with the comments added and change nothing else.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockKind {
    Code,
    Ast,
    DocChunk,
    PriorComments,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextBlock {
    pub kind: BlockKind,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredChunk {
    pub chunk_id: String,
    pub doc_path: String,
    pub text: String,
    pub score: f64,
}

impl From<&Hit> for ScoredChunk {
    fn from(h: &Hit) -> Self {
        ScoredChunk {
            chunk_id: h.chunk.chunk_id.clone(),
            doc_path: h.chunk.doc_path.clone(),
            text: h.chunk.text.clone(),
            score: h.score,
        }
    }
}

/// Optional context for a prompt. Entries not used by the setup are ignored.
#[derive(Debug, Clone, Default)]
pub struct PromptResources {
    /// One condensed AST per target, in target order.
    pub asts: Vec<CondensedAst>,
    pub chunks: Vec<ScoredChunk>,
    /// Comments produced for earlier passes over the same file.
    pub prior_comments: Vec<String>,
    /// Declarations pulled in from project headers, shown above the code.
    pub headers: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub persona: String,
    pub exemplars: Vec<Exemplar>,
    pub doc_chunks: Vec<ScoredChunk>,
    pub asts: Vec<CondensedAst>,
    pub prior_comments: Vec<String>,
    pub code: String,
    pub instruction: String,
    pub targets: Vec<String>,
    pub setup: Setup,
    pub language: Language,
    pub pass_index: usize,
    pub budget: usize,
    pub token_estimate: usize,
}

/// Comment-stripped source of a unit, optionally preceded by header text.
pub fn target_code(unit: &CodeUnit, headers: Option<&str>) -> String {
    let body = lexer::strip_comments(&unit.code).unwrap_or_else(|_| unit.code.clone());
    match headers.map(str::trim).filter(|h| !h.is_empty()) {
        Some(h) => format!("{h}\n\n{body}"),
        None => body,
    }
}

/// Builds the prompt for a single unit.
pub fn build_prompt(
    unit: &CodeUnit,
    pool: &ExemplarPool,
    setup: Setup,
    resources: PromptResources,
    budget: usize,
) -> Result<PromptBundle, PromptError> {
    let code = target_code(unit, resources.headers.as_deref());
    build_pass_prompt(&[unit], code, 0, pool, setup, resources, budget)
}

/// Builds the prompt for one pass covering `units`, whose combined code is
/// `code`. Over budget, doc chunks go first (lowest score first), then AST
/// nodes (lowest priority first), then carried comments (oldest first), then
/// exemplars (last first). The code block is never cut.
pub fn build_pass_prompt(
    units: &[&CodeUnit],
    code: String,
    pass_index: usize,
    pool: &ExemplarPool,
    setup: Setup,
    resources: PromptResources,
    budget: usize,
) -> Result<PromptBundle, PromptError> {
    if setup.uses_ast() && resources.asts.len() < units.len() {
        return Err(PromptError::MissingResource {
            setup,
            missing: "a condensed AST for every target",
        });
    }
    let mut doc_chunks = if setup.uses_docs() { resources.chunks } else { Vec::new() };
    doc_chunks.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.chunk_id.cmp(&b.chunk_id))
    });
    let mut bundle = PromptBundle {
        persona: PERSONA.to_string(),
        exemplars: pool.exemplars().to_vec(),
        doc_chunks,
        asts: if setup.uses_ast() { resources.asts } else { Vec::new() },
        prior_comments: resources.prior_comments,
        code,
        instruction: DEFAULT_INSTRUCTION.to_string(),
        targets: units.iter().map(|u| u.id.clone()).collect(),
        setup,
        language: units.first().map_or(Language::C, |u| u.language),
        pass_index,
        budget,
        token_estimate: 0,
    };
    bundle.fit(budget)?;
    Ok(bundle)
}

impl PromptBundle {
    pub fn exemplars_used(&self) -> Vec<&str> {
        self.exemplars.iter().map(|e| e.id.as_str()).collect()
    }

    /// Context blocks in prompt order (persona, exemplars and instruction are
    /// fields of their own).
    pub fn context_blocks(&self) -> Vec<ContextBlock> {
        let mut out = Vec::new();
        for c in &self.doc_chunks {
            out.push(ContextBlock {
                kind: BlockKind::DocChunk,
                text: c.text.clone(),
            });
        }
        for a in &self.asts {
            out.push(ContextBlock {
                kind: BlockKind::Ast,
                text: a.render(),
            });
        }
        if !self.prior_comments.is_empty() {
            out.push(ContextBlock {
                kind: BlockKind::PriorComments,
                text: self.prior_comments.join("\n\n"),
            });
        }
        out.push(ContextBlock {
            kind: BlockKind::Code,
            text: self.code.clone(),
        });
        out
    }

    pub fn render(&self) -> String {
        let mut sections: Vec<String> = vec![self.persona.clone()];
        if !self.exemplars.is_empty() {
            let mut s = String::from("Examples of good and bad comments:");
            for e in &self.exemplars {
                let tag = match e.label {
                    Label::Positive => "Good",
                    Label::Negative => "Bad",
                };
                s.push_str(&format!("\n\n{tag} comment:\n{}\n{}", e.comment, e.code));
            }
            sections.push(s);
        }
        if !self.doc_chunks.is_empty() {
            let mut s = String::from("Relevant design documentation:");
            for c in &self.doc_chunks {
                s.push_str(&format!("\n\n--- {} ---\n{}", c.doc_path, c.text.trim_end()));
            }
            sections.push(s);
        }
        if !self.asts.is_empty() {
            let mut s = String::from("Condensed syntax tree:");
            for a in &self.asts {
                s.push('\n');
                s.push_str(a.render().trim_end());
            }
            sections.push(s);
        }
        if !self.prior_comments.is_empty() {
            sections.push(format!(
                "Comments already written for earlier parts of this file:\n{}",
                self.prior_comments.join("\n\n")
            ));
        }
        let fence = match self.language {
            Language::C => "c",
            Language::Cpp => "cpp",
        };
        sections.push(format!("Code:\n```{fence}\n{}\n```", self.code.trim_end_matches('\n')));
        sections.push(self.instruction.clone());
        sections.join("\n\n")
    }

    fn estimate(&self) -> usize {
        estimate_tokens(&self.render())
    }

    /// Tokens needed by persona, code and instruction alone.
    pub fn mandatory_tokens(&self) -> usize {
        let bare = PromptBundle {
            exemplars: Vec::new(),
            doc_chunks: Vec::new(),
            asts: Vec::new(),
            prior_comments: Vec::new(),
            ..self.clone()
        };
        bare.estimate()
    }

    /// Drops optional context until the prompt fits `budget`.
    pub fn fit(&mut self, budget: usize) -> Result<(), PromptError> {
        let needed = self.mandatory_tokens();
        if needed > budget {
            return Err(PromptError::MultiPassRequired { needed, budget });
        }
        self.budget = budget;
        loop {
            let est = self.estimate();
            if est <= budget {
                self.token_estimate = est;
                return Ok(());
            }
            if !self.doc_chunks.is_empty() {
                self.doc_chunks.pop();
            } else if !self.asts.is_empty() {
                self.shrink_last_ast(budget);
            } else if !self.prior_comments.is_empty() {
                self.prior_comments.remove(0);
            } else {
                self.exemplars.pop();
            }
        }
    }

    /// Cuts the last AST to the longest prefix that fits, or removes it.
    fn shrink_last_ast(&mut self, budget: usize) {
        let full = self.asts.pop().expect("non-empty");
        let (mut lo, mut hi) = (0usize, full.nodes.len().saturating_sub(1));
        while lo < hi {
            let mid = (lo + hi).div_ceil(2);
            self.asts.push(full.prefix(mid));
            let fits = self.estimate() <= budget;
            self.asts.pop();
            if fits {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        if lo > 0 {
            self.asts.push(full.prefix(lo));
        }
    }
}
