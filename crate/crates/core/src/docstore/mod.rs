//! Design-document classification, chunking and retrieval.

mod chunk;
mod classify;
mod index;
mod tokenize;

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

pub use chunk::{chunk_doc, reassemble, DocChunk, DEFAULT_CHUNK_SIZE, DEFAULT_OVERLAP};
pub use classify::classify_doc;
pub use index::{
    build_index, okapi_idf, query_for_unit, EmbeddingRetriever, Hit, Index, OkapiParams, Posting,
    Retriever, INDEX_MAGIC, INDEX_VERSION,
};
pub use tokenize::tokenize;

#[derive(Debug, Error)]
pub enum DocError {
    #[error("document {0} is empty after text extraction")]
    EmptyContent(String),
    #[error("chunk overlap {overlap} must be smaller than chunk size {size}")]
    BadChunking { size: usize, overlap: usize },
    #[error("cannot build an index from zero chunks")]
    NoChunks,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("i/o error on {0}: {1}")]
    Io(PathBuf, io::Error),
    #[error("not an index file (bad magic)")]
    BadMagic,
    #[error("unsupported index format version {0}")]
    BadVersion(u8),
    #[error("corrupt index: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Embed(#[from] crate::embed::EmbedError),
}

/// Documentation taxonomy, ordered as in the reference table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DocType {
    Requirements,
    Architecture,
    DetailedDesign,
    Implementation,
    Test,
    ProjectManagement,
    ConfigurationManagement,
    ProjectInfrastructure,
    UserSoftware,
}

impl DocType {
    pub const ALL: [DocType; 9] = [
        DocType::Requirements,
        DocType::Architecture,
        DocType::DetailedDesign,
        DocType::Implementation,
        DocType::Test,
        DocType::ProjectManagement,
        DocType::ConfigurationManagement,
        DocType::ProjectInfrastructure,
        DocType::UserSoftware,
    ];

    /// Percentage of surveyed repositories containing this kind of document.
    pub fn frequency_prior(self) -> u32 {
        match self {
            DocType::Requirements => 24,
            DocType::Architecture => 62,
            DocType::DetailedDesign => 16,
            DocType::Implementation => 72,
            DocType::Test => 48,
            DocType::ProjectManagement => 28,
            DocType::ConfigurationManagement => 64,
            DocType::ProjectInfrastructure => 22,
            DocType::UserSoftware => 96,
        }
    }

    pub fn code(self) -> u8 {
        DocType::ALL.iter().position(|&t| t == self).unwrap() as u8
    }

    pub fn from_code(c: u8) -> Option<DocType> {
        DocType::ALL.get(c as usize).copied()
    }

    pub fn key(self) -> &'static str {
        match self {
            DocType::Requirements => "requirements",
            DocType::Architecture => "architecture",
            DocType::DetailedDesign => "detailed-design",
            DocType::Implementation => "implementation",
            DocType::Test => "test",
            DocType::ProjectManagement => "project-management",
            DocType::ConfigurationManagement => "configuration-management",
            DocType::ProjectInfrastructure => "project-infrastructure",
            DocType::UserSoftware => "user-software",
        }
    }
}

impl fmt::Display for DocType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for DocType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.to_ascii_lowercase().replace(['_', ' '], "-");
        DocType::ALL
            .into_iter()
            .find(|t| t.key() == norm || format!("{t:?}").to_ascii_lowercase() == norm.replace('-', ""))
            .ok_or_else(|| format!("unknown document type `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignDoc {
    pub doc_id: String,
    pub path: String,
    pub doc_type: DocType,
    pub title: String,
    pub content: String,
}

impl DesignDoc {
    /// Extracts text (stripping HTML where needed) and classifies it.
    pub fn new(path: &str, raw: &str) -> Result<DesignDoc, DocError> {
        let content = extract_text(path, raw);
        let doc_type = classify_doc(path, &content)?;
        Ok(DesignDoc {
            doc_id: path.to_string(),
            path: path.to_string(),
            doc_type,
            title: title_of(path, &content),
            content,
        })
    }
}

const DOC_EXTENSIONS: &[&str] = &["md", "markdown", "txt", "rst", "adoc", "html", "htm", "text"];

fn is_doc_file(path: &Path) -> bool {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) => DOC_EXTENSIONS.contains(&ext.to_ascii_lowercase().as_str()),
        None => path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.chars().all(|c| c.is_ascii_uppercase() || c == '_' || c == '-')),
    }
}

/// Loads every text-like document below `dir`. Documents that come out empty
/// are skipped with a warning.
pub fn load_docs(dir: &Path) -> Result<(Vec<DesignDoc>, Vec<String>), DocError> {
    let mut docs = Vec::new();
    let mut warnings = Vec::new();
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let p = e.path().map(Path::to_path_buf).unwrap_or_else(|| dir.to_path_buf());
            DocError::Io(p, e.into())
        })?;
        if !entry.file_type().is_file() || !is_doc_file(entry.path()) {
            continue;
        }
        let bytes = fs::read(entry.path()).map_err(|e| DocError::Io(entry.path().to_path_buf(), e))?;
        let raw = String::from_utf8_lossy(&bytes);
        let rel = entry
            .path()
            .strip_prefix(dir)
            .unwrap_or(entry.path())
            .to_string_lossy()
            .replace('\\', "/");
        match DesignDoc::new(&rel, &raw) {
            Ok(d) => docs.push(d),
            Err(e) => warnings.push(format!("{rel}: {e}; skipped")),
        }
    }
    Ok((docs, warnings))
}

pub fn extract_text(path: &str, raw: &str) -> String {
    let lower = path.to_ascii_lowercase();
    if lower.ends_with(".html") || lower.ends_with(".htm") {
        strip_html(raw)
    } else {
        raw.replace("\r\n", "\n")
    }
}

pub fn strip_html(html: &str) -> String {
    let blocks = Regex::new(r"(?is)<(script|style)\b.*?</(script|style)\s*>").unwrap();
    let comments = Regex::new(r"(?s)<!--.*?-->").unwrap();
    let breaks = Regex::new(r"(?i)</?(p|div|br|li|h[1-6]|tr|pre|ul|ol|table)\b[^>]*>").unwrap();
    let tags = Regex::new(r"(?s)<[^>]*>").unwrap();
    let blank_runs = Regex::new(r"\n[ \t]*(\n[ \t]*)+").unwrap();
    let s = blocks.replace_all(html, "");
    let s = comments.replace_all(&s, "");
    let s = breaks.replace_all(&s, "\n");
    let s = tags.replace_all(&s, "");
    let s = s
        .replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&quot;", "\"")
        .replace("&#39;", "'")
        .replace("&nbsp;", " ")
        .replace("&amp;", "&");
    blank_runs.replace_all(s.trim(), "\n\n").into_owned()
}

fn title_of(path: &str, content: &str) -> String {
    content
        .lines()
        .map(|l| l.trim().trim_start_matches('#').trim())
        .find(|l| !l.is_empty())
        .map(|l| l.chars().take(120).collect())
        .unwrap_or_else(|| path.rsplit('/').next().unwrap_or(path).to_string())
}
