use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CodeUnit, CommentBlock, CommentStyle, CorpusError, Language};

/// One JSONL line of the pairs dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub repo: String,
    pub path: String,
    pub signature: String,
    pub code: String,
    pub comment: Option<String>,
    pub loc: usize,
    pub name: String,
    pub language: Language,
    pub sig_start: usize,
    pub start_byte: usize,
    pub end_byte: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment_block: Option<CommentMeta>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommentMeta {
    pub raw: String,
    pub style: CommentStyle,
    pub start: usize,
    pub end: usize,
}

impl From<&CodeUnit> for DatasetRecord {
    fn from(u: &CodeUnit) -> Self {
        DatasetRecord {
            id: u.id.clone(),
            repo: u.repo_id.clone(),
            path: u.path.clone(),
            signature: u.signature.clone(),
            code: u.code.clone(),
            comment: u.leading_comment.as_ref().map(|c| c.text.clone()),
            loc: u.loc,
            name: u.name.clone(),
            language: u.language,
            sig_start: u.sig_start,
            start_byte: u.body_span.0,
            end_byte: u.body_span.1,
            comment_block: u.leading_comment.as_ref().map(|c| CommentMeta {
                raw: c.raw.clone(),
                style: c.style,
                start: c.span.0,
                end: c.span.1,
            }),
        }
    }
}

impl From<DatasetRecord> for CodeUnit {
    fn from(r: DatasetRecord) -> Self {
        let leading_comment = match (r.comment, r.comment_block) {
            (Some(text), Some(meta)) => Some(CommentBlock {
                raw: meta.raw,
                text,
                style: meta.style,
                span: (meta.start, meta.end),
            }),
            (Some(text), None) => Some(CommentBlock {
                raw: text.clone(),
                text,
                style: CommentStyle::Block,
                span: (r.sig_start, r.sig_start),
            }),
            (None, _) => None,
        };
        CodeUnit {
            id: r.id,
            repo_id: r.repo,
            path: r.path,
            language: r.language,
            name: r.name,
            signature: r.signature,
            sig_start: r.sig_start,
            body_span: (r.start_byte, r.end_byte),
            leading_comment,
            loc: r.loc,
            code: r.code,
        }
    }
}

/// Writes one JSON record per unit, ordered by `(repo, path, start_byte)`.
pub fn export_dataset(units: &[CodeUnit], out: &Path) -> Result<usize, CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: out.to_path_buf(),
        source,
    };
    let mut sorted: Vec<&CodeUnit> = units.iter().collect();
    sorted.sort_by(|a, b| {
        (&a.repo_id, &a.path, a.body_span.0).cmp(&(&b.repo_id, &b.path, b.body_span.0))
    });
    let mut w = BufWriter::new(File::create(out).map_err(io_err)?);
    for u in &sorted {
        let line = serde_json::to_string(&DatasetRecord::from(*u)).expect("records serialize");
        writeln!(w, "{line}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    Ok(sorted.len())
}

pub fn import_dataset(path: &Path) -> Result<Vec<CodeUnit>, CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    let mut units = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DatasetRecord =
            serde_json::from_str(&line).map_err(|source| CorpusError::Record { line: n + 1, source })?;
        units.push(rec.into());
    }
    Ok(units)
}
