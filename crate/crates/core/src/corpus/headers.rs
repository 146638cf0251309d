use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use crate::lexer;

use super::{CorpusError, SourceFile};

#[derive(Debug, Clone)]
pub struct ExpandOptions {
    pub search_paths: Vec<PathBuf>,
    pub max_depth: usize,
}

impl Default for ExpandOptions {
    fn default() -> Self {
        ExpandOptions {
            search_paths: Vec::new(),
            max_depth: 8,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Expansion {
    pub text: String,
    pub warnings: Vec<String>,
}

struct Expander<'a> {
    opts: &'a ExpandOptions,
    stack: Vec<PathBuf>,
    guarded_done: HashSet<PathBuf>,
    warnings: Vec<String>,
}

/// Returns `file` with comments removed and every quoted `#include` replaced
/// by the (comment-stripped, recursively expanded) header text. System
/// includes stay as they are.
pub fn expand_headers(file: &SourceFile, opts: &ExpandOptions) -> Result<Expansion, CorpusError> {
    let stripped = lexer::strip_comments(&file.content).map_err(|source| CorpusError::Lex {
        path: file.path.clone(),
        source,
    })?;
    let root = canonical(&file.abs_path);
    let dir = file.abs_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut ex = Expander {
        opts,
        stack: vec![root],
        guarded_done: HashSet::new(),
        warnings: Vec::new(),
    };
    let text = ex.expand(&stripped, &dir, 0);
    Ok(Expansion {
        text,
        warnings: ex.warnings,
    })
}

fn canonical(p: &Path) -> PathBuf {
    p.canonicalize().unwrap_or_else(|_| p.to_path_buf())
}

impl Expander<'_> {
    fn expand(&mut self, text: &str, dir: &Path, depth: usize) -> String {
        let mut out = String::with_capacity(text.len());
        for line in text.split_inclusive('\n') {
            let Some(name) = quoted_include(line) else {
                out.push_str(line);
                continue;
            };
            let Some(path) = self.resolve(name, dir) else {
                self.warnings.push(format!("header \"{name}\" not found; directive kept"));
                out.push_str(line);
                continue;
            };
            if self.stack.contains(&path) {
                self.warnings.push(format!("include cycle through \"{name}\""));
                out.push_str(&format!("#pragma include_cycle \"{name}\"\n"));
                continue;
            }
            if self.guarded_done.contains(&path) {
                continue;
            }
            if depth + 1 > self.opts.max_depth {
                self.warnings.push(format!(
                    "include depth limit {} reached at \"{name}\"; directive kept",
                    self.opts.max_depth
                ));
                out.push_str(line);
                continue;
            }
            let header = match fs::read_to_string(&path) {
                Ok(h) => h,
                Err(e) => {
                    self.warnings.push(format!("cannot read \"{name}\": {e}; directive kept"));
                    out.push_str(line);
                    continue;
                }
            };
            let stripped = match lexer::strip_comments(&header) {
                Ok(s) => s,
                Err(e) => {
                    self.warnings.push(format!("\"{name}\": {e}; directive kept"));
                    out.push_str(line);
                    continue;
                }
            };
            if is_guarded(&stripped) {
                self.guarded_done.insert(path.clone());
            }
            let body: String = stripped
                .split_inclusive('\n')
                .filter(|l| !is_pragma_once(l))
                .collect();
            let hdir = path.parent().map(Path::to_path_buf).unwrap_or_default();
            self.stack.push(path);
            let expanded = self.expand(&body, &hdir, depth + 1);
            self.stack.pop();
            out.push_str(&expanded);
            if !expanded.ends_with('\n') {
                out.push('\n');
            }
        }
        out
    }

    fn resolve(&self, name: &str, dir: &Path) -> Option<PathBuf> {
        std::iter::once(dir)
            .chain(self.opts.search_paths.iter().map(PathBuf::as_path))
            .map(|d| d.join(name))
            .find(|p| p.is_file())
            .map(|p| canonical(&p))
    }
}

fn directive(line: &str) -> Option<(&str, &str)> {
    let rest = line.trim_start().strip_prefix('#')?.trim_start();
    let end = rest
        .find(|c: char| !c.is_ascii_alphanumeric() && c != '_')
        .unwrap_or(rest.len());
    Some((&rest[..end], rest[end..].trim()))
}

fn quoted_include(line: &str) -> Option<&str> {
    let (name, arg) = directive(line)?;
    if name != "include" {
        return None;
    }
    let inner = arg.strip_prefix('"')?;
    let close = inner.find('"')?;
    Some(&inner[..close])
}

fn is_pragma_once(line: &str) -> bool {
    matches!(directive(line), Some(("pragma", arg)) if arg == "once")
}

/// `#pragma once`, or an `#ifndef X` / `#define X` pair opening the file with
/// the final directive being `#endif`.
fn is_guarded(stripped: &str) -> bool {
    let directives: Vec<(&str, &str)> = stripped
        .lines()
        .filter(|l| !l.trim().is_empty())
        .filter_map(directive)
        .collect();
    if directives.iter().any(|&(n, a)| n == "pragma" && a == "once") {
        return true;
    }
    let first_code = stripped.lines().find(|l| !l.trim().is_empty());
    let opens_with_ifndef = first_code.and_then(directive).is_some_and(|(n, _)| n == "ifndef");
    match (directives.first(), directives.get(1), directives.last()) {
        (Some(("ifndef", g)), Some(("define", d)), Some(("endif", _))) if opens_with_ifndef => {
            d.split_whitespace().next() == Some(*g)
        }
        _ => false,
    }
}
