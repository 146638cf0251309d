use std::collections::HashSet;

use sha2::{Digest, Sha256};

use crate::corpus::{extract_pairs, SourceFile};
use crate::docstore::tokenize;
use crate::types::Setup;

use super::{ChatRequest, LlmError, Provider};

/// Judge prompts contain this phrase; the mock answers them with a number.
pub const JUDGE_MARKER: &str = "Rate how useful the comment is";

/// Offline stand-in for a model. It returns the code block of the prompt with
/// a `/** @brief ... */` comment inserted above every function, so the only
/// edits it makes are comments. Output depends only on the prompt.
#[derive(Debug, Clone, Default)]
pub struct MockProvider {
    fail: HashSet<(String, Setup)>,
    fixed: Option<String>,
}

impl MockProvider {
    /// Always answers with `reply`.
    pub fn fixed(reply: &str) -> Self {
        MockProvider {
            fixed: Some(reply.to_string()),
            ..Default::default()
        }
    }

    /// Fails any request that targets `unit` under `setup`.
    pub fn fail_on(mut self, unit: &str, setup: Setup) -> Self {
        self.fail.insert((unit.to_string(), setup));
        self
    }
}

impl Provider for MockProvider {
    fn complete(&self, req: &ChatRequest) -> Result<String, LlmError> {
        if let Some(setup) = req.meta.setup {
            if let Some(t) = req.meta.targets.iter().find(|t| self.fail.contains(&((*t).clone(), setup))) {
                return Err(LlmError::Provider {
                    status: 500,
                    body: format!("mock failure for {t} under {setup}"),
                });
            }
        }
        if let Some(r) = &self.fixed {
            return Ok(r.clone());
        }
        if req.prompt.contains(JUDGE_MARKER) {
            let d = Sha256::digest(req.prompt.as_bytes());
            return Ok(format!("{}", 50 + d[0] as u32 % 46));
        }
        let Some((lang, code)) = last_code_block(&req.prompt) else {
            return Ok("/* nothing to comment */".to_string());
        };
        Ok(format!("```{lang}\n{}\n```", annotate(code, lang, &req.prompt)))
    }
}

fn last_code_block(prompt: &str) -> Option<(&str, &str)> {
    let start = prompt.rfind("Code:\n```")? + "Code:\n```".len();
    let rest = &prompt[start..];
    let nl = rest.find('\n')?;
    let lang = &rest[..nl];
    let body = &rest[nl + 1..];
    let end = body.rfind("\n```")?;
    Some((lang, &body[..end]))
}

fn section<'a>(prompt: &'a str, header: &str) -> Option<&'a str> {
    let start = prompt.find(header)? + header.len();
    Some(&prompt[start..])
}

fn doc_paths(prompt: &str) -> Vec<String> {
    let Some(s) = section(prompt, "Relevant design documentation:") else { return Vec::new() };
    let end = ["\n\nCondensed syntax tree:", "\n\nComments already written", "\n\nCode:\n```"]
        .iter()
        .filter_map(|h| s.find(h))
        .min()
        .unwrap_or(s.len());
    let mut seen = HashSet::new();
    s[..end]
        .lines()
        .filter_map(|l| l.strip_prefix("--- ")?.strip_suffix(" ---"))
        .filter(|p| seen.insert(p.to_string()))
        .map(str::to_string)
        .collect()
}

fn ast_callees(prompt: &str) -> Vec<String> {
    let Some(s) = section(prompt, "Condensed syntax tree:") else { return Vec::new() };
    let end = s.find("\n\n").unwrap_or(s.len());
    let mut seen = HashSet::new();
    s[..end]
        .lines()
        .filter_map(|l| l.trim_start().strip_prefix("call "))
        .map(|c| c.split_whitespace().next().unwrap_or(c).to_string())
        .filter(|c| seen.insert(c.clone()))
        .collect()
}

fn brief(name: &str) -> String {
    let short = name.rsplit("::").next().unwrap_or(name);
    let toks = tokenize(short);
    let words = if toks.len() > 1 { &toks[1..] } else { &toks[..] };
    let mut s = words.join(" ");
    if let Some(c) = s.get(..1) {
        s = c.to_uppercase() + &s[1..];
    }
    if s.is_empty() {
        s = "Operator".to_string();
    }
    s
}

fn annotate(code: &str, lang: &str, prompt: &str) -> String {
    let name = if lang == "cpp" { "mock.cpp" } else { "mock.c" };
    let file = SourceFile::in_memory("mock", name, code);
    let Ok(units) = extract_pairs(&file) else { return code.to_string() };
    let docs = doc_paths(prompt);
    let callees = ast_callees(prompt);
    let mut out = String::with_capacity(code.len() * 2);
    let mut pos = 0;
    for u in &units {
        let line_start = code[..u.sig_start].rfind('\n').map_or(0, |p| p + 1);
        if line_start < pos {
            continue;
        }
        let indent: String = code[line_start..u.sig_start]
            .chars()
            .take_while(|c| c.is_whitespace())
            .collect();
        out.push_str(&code[pos..line_start]);
        out.push_str(&format!("{indent}/**\n{indent} * @brief {}.\n", brief(&u.name)));
        if !callees.is_empty() {
            out.push_str(&format!("{indent} * Calls {}.\n", callees.join(", ")));
        }
        if let Some(d) = docs.first() {
            out.push_str(&format!("{indent} * See {d} for the design background.\n"));
        }
        out.push_str(&format!("{indent} */\n"));
        pos = line_start;
    }
    out.push_str(&code[pos..]);
    out
}
