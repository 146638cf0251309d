//! Mining C/C++ repositories into code–comment pairs.

mod dataset;
mod extract;
mod headers;

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use globset::{Glob, GlobSet, GlobSetBuilder};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

use crate::lexer::LexError;

pub use dataset::{export_dataset, import_dataset, DatasetRecord};
pub use extract::{comment_text, extract_pairs};
pub use headers::{expand_headers, ExpandOptions, Expansion};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read repository root {path}: {source}")]
    RootUnreadable { path: PathBuf, source: io::Error },
    #[error("invalid ignore glob `{glob}`: {source}")]
    BadGlob { glob: String, source: globset::Error },
    #[error("{path}: {source}")]
    Lex { path: String, source: LexError },
    #[error("{path}: unbalanced braces after lexing, first offending brace at byte {offset}")]
    Unbalanced { path: String, offset: usize },
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("dataset line {line}: {source}")]
    Record { line: usize, source: serde_json::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Language {
    C,
    #[serde(rename = "CPP")]
    Cpp,
}

impl Language {
    /// `.c`/`.h` are C; `.cc`/`.cpp`/`.cxx`/`.hpp`/`.hh`/`.hxx` are C++.
    pub fn from_path(path: &Path) -> Option<Language> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "c" | "h" => Some(Language::C),
            "cc" | "cpp" | "cxx" | "hpp" | "hh" | "hxx" => Some(Language::Cpp),
            _ => None,
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Language::C => "C",
            Language::Cpp => "CPP",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceFile {
    pub repo_id: String,
    /// Path relative to the repository root, `/`-separated.
    pub path: String,
    pub abs_path: PathBuf,
    pub language: Language,
    pub content: String,
    pub size_bytes: u64,
}

impl SourceFile {
    /// Builds an in-memory file, mostly for tests and model output parsing.
    pub fn in_memory(repo_id: &str, path: &str, content: &str) -> SourceFile {
        SourceFile {
            repo_id: repo_id.to_string(),
            path: path.to_string(),
            abs_path: PathBuf::from(path),
            language: Language::from_path(Path::new(path)).unwrap_or(Language::C),
            content: content.to_string(),
            size_bytes: content.len() as u64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CommentStyle {
    Line,
    Block,
    Doxygen,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommentBlock {
    /// Exact source bytes of the comment (several `//` lines are one block).
    pub raw: String,
    /// Delimiter-stripped text.
    pub text: String,
    pub style: CommentStyle,
    pub span: (usize, usize),
}

/// A function definition mined from a source file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeUnit {
    pub id: String,
    pub repo_id: String,
    pub path: String,
    pub language: Language,
    pub name: String,
    pub signature: String,
    /// Byte offset where the signature starts.
    pub sig_start: usize,
    /// `[open brace, close brace + 1)`.
    pub body_span: (usize, usize),
    pub leading_comment: Option<CommentBlock>,
    pub loc: usize,
    /// Source text from the signature through the closing brace.
    pub code: String,
}

impl CodeUnit {
    pub fn has_comment(&self) -> bool {
        self.leading_comment.is_some()
    }

    pub fn comment_text(&self) -> Option<&str> {
        self.leading_comment.as_ref().map(|c| c.text.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct ScanConfig {
    pub repo_id: Option<String>,
    pub ignore: Vec<String>,
}

pub const DEFAULT_IGNORES: [&str; 7] = [
    "**/build/**",
    "**/cmake-build-*/**",
    "**/third_party/**",
    "**/third-party/**",
    "**/thirdparty/**",
    "**/vendor/**",
    "**/.git/**",
];

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            repo_id: None,
            ignore: DEFAULT_IGNORES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl ScanConfig {
    pub fn with_extra_ignores<I: IntoIterator<Item = String>>(mut self, extra: I) -> Self {
        self.ignore.extend(extra);
        self
    }

    fn globset(&self) -> Result<GlobSet, CorpusError> {
        let mut builder = GlobSetBuilder::new();
        for g in &self.ignore {
            let glob = Glob::new(g).map_err(|source| CorpusError::BadGlob {
                glob: g.clone(),
                source,
            })?;
            builder.add(glob);
        }
        builder.build().map_err(|source| CorpusError::BadGlob {
            glob: self.ignore.join(","),
            source,
        })
    }
}

#[derive(Debug, Default)]
pub struct ScanReport {
    pub files: Vec<SourceFile>,
    pub warnings: Vec<String>,
}

/// Repository id used when the caller does not supply one: the root's
/// directory name.
pub fn default_repo_id(root: &Path) -> String {
    root.canonicalize()
        .ok()
        .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "repo".to_string())
}

pub fn scan_repo(root: &Path, config: &ScanConfig) -> Result<ScanReport, CorpusError> {
    fs::read_dir(root).map_err(|source| CorpusError::RootUnreadable {
        path: root.to_path_buf(),
        source,
    })?;
    let ignores = config.globset()?;
    let repo_id = config.repo_id.clone().unwrap_or_else(|| default_repo_id(root));

    let mut warnings = Vec::new();
    let mut candidates: Vec<(String, PathBuf, Language)> = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = match entry {
            Ok(e) => e,
            Err(e) => {
                warnings.push(format!("skipping unreadable entry: {e}"));
                continue;
            }
        };
        if !entry.file_type().is_file() {
            continue;
        }
        let Some(language) = Language::from_path(entry.path()) else {
            continue;
        };
        let rel = relative_path(root, entry.path());
        if ignores.is_match(&rel) {
            continue;
        }
        candidates.push((rel, entry.path().to_path_buf(), language));
    }
    candidates.sort_by(|a, b| a.0.cmp(&b.0));

    let read: Vec<Result<SourceFile, String>> = candidates
        .into_par_iter()
        .map(|(rel, abs, language)| {
            let bytes = fs::read(&abs).map_err(|e| format!("skipping {rel}: {e}"))?;
            let size_bytes = bytes.len() as u64;
            let content = match String::from_utf8(bytes) {
                Ok(s) => s,
                Err(e) => String::from_utf8_lossy(e.as_bytes()).into_owned(),
            };
            Ok(SourceFile {
                repo_id: repo_id.clone(),
                path: rel,
                abs_path: abs,
                language,
                content,
                size_bytes,
            })
        })
        .collect();

    let mut files = Vec::with_capacity(read.len());
    for r in read {
        match r {
            Ok(f) => files.push(f),
            Err(w) => warnings.push(w),
        }
    }
    Ok(ScanReport { files, warnings })
}

fn relative_path(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

/// Outcome of mining a whole repository.
#[derive(Debug, Default)]
pub struct MineReport {
    pub files: usize,
    pub units: Vec<CodeUnit>,
    pub diagnostics: Vec<String>,
}

/// Scans `root` and extracts every function definition. Files whose braces do
/// not balance are skipped with a diagnostic.
pub fn mine_repo(root: &Path, config: &ScanConfig) -> Result<MineReport, CorpusError> {
    let scan = scan_repo(root, config)?;
    let per_file: Vec<Result<Vec<CodeUnit>, CorpusError>> =
        scan.files.par_iter().map(extract_pairs).collect();
    let mut report = MineReport {
        files: scan.files.len(),
        units: Vec::new(),
        diagnostics: scan.warnings,
    };
    for r in per_file {
        match r {
            Ok(units) => report.units.extend(units),
            Err(e) => report.diagnostics.push(e.to_string()),
        }
    }
    Ok(report)
}
