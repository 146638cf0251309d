//! Automated comment metrics, the variant-robustness gate and the χ² test.

mod stats;

use std::collections::{BTreeSet, HashMap};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::Category;
use crate::embed::Embedder;
use crate::lexer::{self, LexError};
use crate::llmclient::{Client, GeneratedComment, RequestMeta, JUDGE_MARKER};
use crate::types::Setup;

pub use stats::{chi_square_sf, chi_square_two_tailed, gamma_q, ChiSquare};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("reference text has no tokens")]
    EmptyReference,
    #[error("original file is empty after removing comments and whitespace")]
    EmptyOriginal,
    #[error("bias gate needs at least one variant")]
    NoVariants,
    #[error("metric unavailable: {0}")]
    Unavailable(String),
    #[error("contingency table: {0}")]
    BadTable(String),
    #[error("contingency table has an all-zero {axis} at index {index}")]
    ZeroMarginal { axis: &'static str, index: usize },
    #[error(transparent)]
    Lex(#[from] LexError),
}

/// A metric value, or why it could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Score {
    Value(f64),
    Unavailable { reason: String },
}

impl Score {
    pub fn value(&self) -> Option<f64> {
        match self {
            Score::Value(v) => Some(*v),
            Score::Unavailable { .. } => None,
        }
    }

    fn unavailable(reason: impl Into<String>) -> Score {
        Score::Unavailable { reason: reason.into() }
    }
}

static TOKEN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[A-Za-z0-9_]+").unwrap());

/// Lowercased word tokens; punctuation and whitespace separate them.
pub fn text_tokens(text: &str) -> Vec<String> {
    TOKEN.find_iter(text).map(|m| m.as_str().to_lowercase()).collect()
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    for x in a {
        let mut cur = vec![0usize; b.len() + 1];
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        prev = cur;
    }
    prev[b.len()]
}

/// LCS-based F-measure.
pub fn rouge_l(candidate: &str, reference: &str) -> Result<f64, EvalError> {
    let r = text_tokens(reference);
    if r.is_empty() {
        return Err(EvalError::EmptyReference);
    }
    let c = text_tokens(candidate);
    if c.is_empty() {
        return Ok(0.0);
    }
    let l = lcs_len(&c, &r) as f64;
    let (p, rec) = (l / c.len() as f64, l / r.len() as f64);
    Ok(if p + rec == 0.0 { 0.0 } else { 2.0 * p * rec / (p + rec) })
}

pub const BLEU_EPSILON: f64 = 1e-9;

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut m = HashMap::new();
    for g in tokens.windows(n) {
        *m.entry(g).or_default() += 1;
    }
    m
}

/// Sentence BLEU up to 4-grams. Orders longer than the candidate are left out
/// of the geometric mean; zero matches at an order count as ε/total.
pub fn bleu_4(candidate: &str, reference: &str) -> Result<f64, EvalError> {
    let r = text_tokens(reference);
    if r.is_empty() {
        return Err(EvalError::EmptyReference);
    }
    let c = text_tokens(candidate);
    if c.is_empty() {
        return Ok(0.0);
    }
    let max_n = c.len().min(4);
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let cand = ngram_counts(&c, n);
        let refc = ngram_counts(&r, n);
        let total: usize = cand.values().sum();
        let matched: usize = cand
            .iter()
            .map(|(g, &k)| k.min(refc.get(g).copied().unwrap_or(0)))
            .sum();
        let p = if matched == 0 {
            BLEU_EPSILON / total as f64
        } else {
            matched as f64 / total as f64
        };
        log_sum += p.ln();
    }
    let bp = if c.len() < r.len() {
        (1.0 - r.len() as f64 / c.len() as f64).exp()
    } else {
        1.0
    };
    Ok((bp * (log_sum / max_n as f64).exp()).clamp(0.0, 1.0))
}

/// Greedy token matching over embeddings (BERTScore F).
pub fn embed_similarity(candidate: &str, reference: &str, embedder: Option<&dyn Embedder>) -> Score {
    let Some(e) = embedder else {
        return Score::unavailable("no embedder configured");
    };
    let (c, r) = (text_tokens(candidate), text_tokens(reference));
    if c.is_empty() || r.is_empty() {
        return Score::Value(if c == r { 1.0 } else { 0.0 });
    }
    let (cv, rv) = match (e.embed_tokens(&c), e.embed_tokens(&r)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(err), _) | (_, Err(err)) => return Score::unavailable(err.to_string()),
    };
    // Dot products only over non-zero entries; same value as `cosine`.
    let norm = |v: &Vec<f64>| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nonzero = |v: &Vec<f64>| v.iter().enumerate().filter(|(_, x)| **x != 0.0).map(|(i, x)| (i, *x)).collect::<Vec<_>>();
    let best = |from: &[Vec<f64>], to: &[Vec<f64>]| {
        let to_norms: Vec<f64> = to.iter().map(norm).collect();
        from.iter()
            .map(|x| {
                let (nx, sx) = (norm(x), nonzero(x));
                to.iter()
                    .zip(&to_norms)
                    .map(|(y, ny)| {
                        if nx == 0.0 || *ny == 0.0 {
                            0.0
                        } else {
                            sx.iter().map(|(i, v)| v * y[*i]).sum::<f64>() / (nx * ny)
                        }
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .sum::<f64>()
            / from.len() as f64
    };
    let p = best(&cv, &rv);
    let rec = best(&rv, &cv);
    let f = if p + rec <= 0.0 { 0.0 } else { 2.0 * p * rec / (p + rec) };
    Score::Value(f.clamp(0.0, 1.0))
}

pub fn judge_prompt(candidate: &str, code: &str) -> String {
    format!(
        "{JUDGE_MARKER} for a developer who has to maintain the code below, on a scale from 0 (useless) to 100 (essential). Consider correctness, whether it adds information the code does not state, and clarity. Reply with the number only.\n\nComment:\n{candidate}\n\nCode:\n{code}\n"
    )
}

static NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b(\d{1,3}(?:\.\d+)?)\b").unwrap());

/// Rubric score from a judge model, mapped to [0, 1].
pub fn judge_score(candidate: &str, code: &str, judge: Option<&Client>) -> Score {
    let Some(judge) = judge else {
        return Score::unavailable("no judge configured");
    };
    let reply = match judge.complete_prompt(&judge_prompt(candidate, code), &RequestMeta::default()) {
        Ok(c) => c.text,
        Err(e) => return Score::unavailable(e.to_string()),
    };
    match NUMBER
        .captures(&reply)
        .and_then(|c| c[1].parse::<f64>().ok())
        .filter(|v| (0.0..=100.0).contains(v))
    {
        Some(v) => Score::Value(v / 100.0),
        None => Score::unavailable(format!("unparseable judge reply: {reply}")),
    }
}

/// Byte count of `src` once comments and whitespace are removed.
pub fn normalized_size(src: &str) -> Result<usize, EvalError> {
    let code = lexer::strip_comments(src)?;
    Ok(code.bytes().filter(|b| !b.is_ascii_whitespace()).count())
}

/// Size of the generated file relative to the original once comments and
/// whitespace are removed from both.
pub fn completeness_ratio(generated: &str, original: &str) -> Result<f64, EvalError> {
    let o = normalized_size(original)?;
    if o == 0 {
        return Err(EvalError::EmptyOriginal);
    }
    Ok(normalized_size(generated)? as f64 / o as f64)
}

pub const GATE_THRESHOLD: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateResult {
    pub similarity: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub fraction_passing: f64,
    pub per_variant: Vec<GateResult>,
}

/// Share of prompt variants whose comment stays within the similarity
/// threshold of the base comment.
pub fn bias_gate(
    base: &GeneratedComment,
    variants: &[GeneratedComment],
    embedder: Option<&dyn Embedder>,
) -> Result<GateReport, EvalError> {
    if variants.is_empty() {
        return Err(EvalError::NoVariants);
    }
    let per_variant = variants
        .iter()
        .map(|v| match embed_similarity(&base.text, &v.text, embedder) {
            Score::Value(s) => Ok(GateResult {
                similarity: s,
                pass: s >= GATE_THRESHOLD,
            }),
            Score::Unavailable { reason } => Err(EvalError::Unavailable(reason)),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let passing = per_variant.iter().filter(|r| r.pass).count();
    Ok(GateReport {
        fraction_passing: passing as f64 / per_variant.len() as f64,
        per_variant,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub unit_id: String,
    pub model: String,
    pub setup: Setup,
    pub rouge_l: f64,
    pub bleu_4: f64,
    pub embed_sim: Score,
    pub judge_score: Score,
    /// `None` when the reply held no code listing to compare.
    pub completeness: Option<f64>,
    /// Normalized byte size of the original file, used for the size curve.
    pub original_size: usize,
    pub categories: BTreeSet<Category>,
}
