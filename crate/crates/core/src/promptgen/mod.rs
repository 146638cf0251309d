//! Few-shot prompt assembly under a token budget, bias-check variants, and
//! multi-pass planning for files that do not fit one prompt.

mod bundle;
mod passes;
mod variants;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bundle::{
    build_pass_prompt, build_prompt, target_code, BlockKind, ContextBlock, PromptBundle, PromptResources, ScoredChunk,
    DEFAULT_INSTRUCTION, PERSONA,
};
pub use passes::{plan_passes, unit_cost, Pass, PassPlan, SkippedUnit};
pub use variants::{make_variants, VariantKind, VariantSet, PARAPHRASES};

pub const POOL_SIZE: usize = 30;
pub const MIN_PER_LABEL: usize = 10;

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("exemplar pool has {0} entries; exactly {POOL_SIZE} are required")]
    PoolSize(usize),
    #[error("exemplar pool has {positive} positive and {negative} negative entries; at least {MIN_PER_LABEL} of each are required")]
    PoolBalance { positive: usize, negative: usize },
    #[error("duplicate exemplar id `{0}`")]
    DuplicateExemplar(String),
    #[error("exemplar line {line}: {message}")]
    BadExemplar { line: usize, message: String },
    #[error("setup {setup} needs {missing}, which was not provided")]
    MissingResource { setup: crate::Setup, missing: &'static str },
    #[error("persona, code and instruction alone need {needed} tokens but the budget is {budget}; split the file into passes")]
    MultiPassRequired { needed: usize, budget: usize },
    #[error("unit {unit} does not belong to {file}")]
    ForeignUnit { unit: String, file: String },
    #[error("variant count must be at least 1")]
    ZeroVariants,
    #[error("cannot read {0}: {1}")]
    Io(PathBuf, std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub id: String,
    pub label: Label,
    pub code: String,
    pub comment: String,
}

/// The fixed set of good and bad comment examples shown to the model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExemplarPool {
    exemplars: Vec<Exemplar>,
    pub seed: u64,
}

const BUILTIN_POOL: &str = include_str!("exemplars.jsonl");

impl ExemplarPool {
    pub fn new(exemplars: Vec<Exemplar>, seed: u64) -> Result<Self, PromptError> {
        if exemplars.len() != POOL_SIZE {
            return Err(PromptError::PoolSize(exemplars.len()));
        }
        let positive = exemplars.iter().filter(|e| e.label == Label::Positive).count();
        let negative = exemplars.len() - positive;
        if positive < MIN_PER_LABEL || negative < MIN_PER_LABEL {
            return Err(PromptError::PoolBalance { positive, negative });
        }
        let mut ids = std::collections::HashSet::new();
        if let Some(dup) = exemplars.iter().find(|e| !ids.insert(e.id.as_str())) {
            return Err(PromptError::DuplicateExemplar(dup.id.clone()));
        }
        Ok(ExemplarPool { exemplars, seed })
    }

    pub fn builtin() -> Self {
        Self::from_jsonl(BUILTIN_POOL, 0).expect("built-in exemplar pool is valid")
    }

    pub fn from_jsonl(text: &str, seed: u64) -> Result<Self, PromptError> {
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let e: Exemplar = serde_json::from_str(line).map_err(|e| PromptError::BadExemplar {
                line: i + 1,
                message: e.to_string(),
            })?;
            out.push(e);
        }
        Self::new(out, seed)
    }

    pub fn load(path: &Path, seed: u64) -> Result<Self, PromptError> {
        let text = fs::read_to_string(path).map_err(|e| PromptError::Io(path.to_path_buf(), e))?;
        Self::from_jsonl(&text, seed)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn exemplars(&self) -> &[Exemplar] {
        &self.exemplars
    }
}
