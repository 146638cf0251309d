use serde::{Deserialize, Serialize};

use super::{DesignDoc, DocError, DocType};

pub const DEFAULT_CHUNK_SIZE: usize = 1600;
pub const DEFAULT_OVERLAP: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocChunk {
    pub chunk_id: String,
    pub doc_id: String,
    pub doc_path: String,
    pub doc_type: DocType,
    pub ordinal: u32,
    /// Character offset of the chunk in the document.
    pub start: usize,
    /// Leading characters shared with the previous chunk.
    pub overlap: usize,
    pub text: String,
}

impl DocChunk {
    pub fn terms(&self) -> Vec<String> {
        super::tokenize(&self.text)
    }
}

/// Splits a document into windows of at most `size` characters, each
/// overlapping the previous one by `overlap` characters. Cuts prefer a
/// paragraph break, then a sentence end, inside the second half of the window.
pub fn chunk_doc(doc: &DesignDoc, size: usize, overlap: usize) -> Result<Vec<DocChunk>, DocError> {
    if overlap >= size {
        return Err(DocError::BadChunking { size, overlap });
    }
    let chars: Vec<char> = doc.content.chars().collect();
    let mut byte_at: Vec<usize> = doc.content.char_indices().map(|(b, _)| b).collect();
    byte_at.push(doc.content.len());

    let mut chunks = Vec::new();
    let mut start = 0;
    loop {
        let end = if chars.len() - start <= size {
            chars.len()
        } else {
            cut_point(&chars, start, size, overlap)
        };
        let ordinal = chunks.len() as u32;
        chunks.push(DocChunk {
            chunk_id: format!("{}#{:04}", doc.doc_id, ordinal),
            doc_id: doc.doc_id.clone(),
            doc_path: doc.path.clone(),
            doc_type: doc.doc_type,
            ordinal,
            start,
            overlap: if ordinal == 0 { 0 } else { overlap },
            text: doc.content[byte_at[start]..byte_at[end]].to_string(),
        });
        if end == chars.len() {
            break;
        }
        start = end - overlap;
    }
    Ok(chunks)
}

fn cut_point(chars: &[char], start: usize, size: usize, overlap: usize) -> usize {
    let hard = start + size;
    let lowest = (start + overlap + 1).max(start + size / 2);
    let paragraph = (lowest..=hard).rev().find(|&p| p >= 2 && chars[p - 2] == '\n' && chars[p - 1] == '\n');
    let sentence = || {
        (lowest..=hard)
            .rev()
            .find(|&p| p >= 2 && chars[p - 1].is_whitespace() && matches!(chars[p - 2], '.' | '!' | '?'))
    };
    paragraph.or_else(sentence).unwrap_or(hard)
}

/// Inverse of [`chunk_doc`] for the chunks of one document in ordinal order.
pub fn reassemble(chunks: &[DocChunk]) -> String {
    let mut out = String::new();
    for c in chunks {
        out.extend(c.text.chars().skip(c.overlap));
    }
    out
}
