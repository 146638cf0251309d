use std::sync::LazyLock;

use regex::Regex;

use crate::corpus::{comment_text, extract_pairs, CodeUnit, SourceFile};
use crate::lexer::{self, SegmentKind};

use super::LlmError;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Extracted {
    /// Delimiter-free comment text, `None` when the model wrote none.
    pub comment: Option<String>,
    pub raw_comment: Option<String>,
    pub annotated_file: Option<String>,
}

static FENCE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?s)```[A-Za-z0-9+#_.-]*[ \t]*\r?\n(.*?)\r?\n?```").unwrap());

/// Pulls the comment for `unit` out of a model reply.
///
/// A fenced (or bare) listing containing the unit yields the comment above its
/// signature plus the listing itself. A reply that is just a comment yields
/// that comment. Listings that lack the unit give no comment, which is how
/// dropped functions show up.
pub fn extract_comment(raw: &str, unit: &CodeUnit) -> Result<Extracted, LlmError> {
    let blocks: Vec<&str> = FENCE
        .captures_iter(raw)
        .map(|c| c.get(1).map_or("", |m| m.as_str()))
        .collect();
    let candidates: Vec<&str> = if blocks.is_empty() { vec![raw] } else { blocks.clone() };

    for code in &candidates {
        if let Some(found) = find_unit(code, unit) {
            return Ok(Extracted {
                comment: found.as_ref().map(|(_, text)| text.clone()),
                raw_comment: found.map(|(raw, _)| raw),
                annotated_file: Some(code.to_string()),
            });
        }
    }
    for code in &candidates {
        if let Some(raw_comment) = leading_comment_only(code) {
            return Ok(Extracted {
                comment: Some(comment_text(&raw_comment)),
                raw_comment: Some(raw_comment),
                annotated_file: None,
            });
        }
    }
    match blocks.iter().max_by_key(|b| b.len()) {
        Some(b) => Ok(Extracted {
            comment: None,
            raw_comment: None,
            annotated_file: Some(b.to_string()),
        }),
        None => Err(LlmError::Extraction { raw: raw.to_string() }),
    }
}

/// `Some(None)` when the unit is present without a comment.
fn find_unit(code: &str, unit: &CodeUnit) -> Option<Option<(String, String)>> {
    let file = SourceFile::in_memory(&unit.repo_id, &unit.path, code);
    let units = extract_pairs(&file).ok()?;
    let sig = normalize(&unit.signature);
    let hit = units
        .iter()
        .find(|u| u.name == unit.name && normalize(&u.signature) == sig)
        .or_else(|| units.iter().find(|u| u.name == unit.name))?;
    Some(
        hit.leading_comment
            .as_ref()
            .filter(|c| !c.text.trim().is_empty())
            .map(|c| (c.raw.clone(), c.text.clone())),
    )
}

fn normalize(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// The text is one or more comments and nothing else.
fn leading_comment_only(text: &str) -> Option<String> {
    let t = text.trim();
    if !(t.starts_with("/*") || t.starts_with("//")) {
        return None;
    }
    let segs = lexer::segments(t).ok()?;
    let only_comments = segs
        .iter()
        .all(|s| s.kind.is_comment() || (s.kind == SegmentKind::Code && t[s.start..s.end].trim().is_empty()));
    only_comments.then(|| t.to_string())
}
