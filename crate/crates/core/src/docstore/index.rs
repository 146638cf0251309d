use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::CodeUnit;
use crate::embed::{cosine, mean_vector, Embedder};
use crate::lexer;

use super::{tokenize, DocChunk, DocError, DocType};

pub const INDEX_MAGIC: &[u8; 8] = b"CCMTIDX\0";
pub const INDEX_VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OkapiParams {
    pub k1: f64,
    pub b: f64,
}

impl Default for OkapiParams {
    fn default() -> Self {
        OkapiParams { k1: 1.2, b: 0.75 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    /// Position of the chunk in [`Index::chunks`].
    pub chunk: u32,
    pub tf: u32,
}

/// Inverted index over chunks sorted by `chunk_id`.
#[derive(Debug, Clone, PartialEq)]
pub struct Index {
    pub params: OkapiParams,
    pub chunks: Vec<DocChunk>,
    pub postings: BTreeMap<String, Vec<Posting>>,
    pub chunk_len: Vec<u32>,
    pub avg_len: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hit {
    pub chunk: DocChunk,
    pub score: f64,
}

pub trait Retriever {
    /// Top-`k` chunks for `query`, best first. Chunks sharing nothing with the
    /// query are never returned.
    fn retrieve(&self, query: &str, k: usize, filter: Option<DocType>) -> Result<Vec<Hit>, DocError>;
}

pub fn okapi_idf(n: usize, df: usize) -> f64 {
    let (n, df) = (n as f64, df as f64);
    ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
}

pub fn build_index(mut chunks: Vec<DocChunk>, params: OkapiParams) -> Result<Index, DocError> {
    if chunks.is_empty() {
        return Err(DocError::NoChunks);
    }
    chunks.sort_by(|a, b| a.chunk_id.cmp(&b.chunk_id).then_with(|| a.text.cmp(&b.text)));
    let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
    let mut chunk_len = Vec::with_capacity(chunks.len());
    for (i, c) in chunks.iter().enumerate() {
        let terms = c.terms();
        chunk_len.push(terms.len() as u32);
        let mut tf: BTreeMap<String, u32> = BTreeMap::new();
        for t in terms {
            *tf.entry(t).or_default() += 1;
        }
        for (t, n) in tf {
            postings.entry(t).or_default().push(Posting { chunk: i as u32, tf: n });
        }
    }
    let avg_len = chunk_len.iter().map(|&l| l as f64).sum::<f64>() / chunk_len.len() as f64;
    Ok(Index {
        params,
        chunks,
        postings,
        chunk_len,
        avg_len,
    })
}

/// Best-first order: score, then the more common document type, then id.
pub(crate) fn rank(a: &Hit, b: &Hit) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then_with(|| b.chunk.doc_type.frequency_prior().cmp(&a.chunk.doc_type.frequency_prior()))
        .then_with(|| a.chunk.chunk_id.cmp(&b.chunk.chunk_id))
}

impl Index {
    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    /// Distinct query terms in sorted order; each counts once.
    pub fn query_terms(query: &str) -> Vec<String> {
        tokenize(query).into_iter().collect::<BTreeSet<_>>().into_iter().collect()
    }

    /// Scores every chunk containing at least one query term.
    pub fn scores(&self, query: &str) -> BTreeMap<u32, f64> {
        let n = self.chunks.len();
        let OkapiParams { k1, b } = self.params;
        let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
        for term in Self::query_terms(query) {
            let Some(list) = self.postings.get(&term) else { continue };
            let idf = okapi_idf(n, list.len());
            for p in list {
                let tf = p.tf as f64;
                let len = self.chunk_len[p.chunk as usize] as f64;
                let norm = k1 * (1.0 - b + b * len / self.avg_len);
                *acc.entry(p.chunk).or_insert(0.0) += idf * tf * (k1 + 1.0) / (tf + norm);
            }
        }
        acc
    }

    pub fn save(&self, path: &Path) -> Result<(), DocError> {
        let io = |e| DocError::Io(path.to_path_buf(), e);
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        self.write_to(&mut w).map_err(io)?;
        w.flush().map_err(io)
    }

    pub fn load(path: &Path) -> Result<Index, DocError> {
        let f = File::open(path).map_err(|e| DocError::Io(path.to_path_buf(), e))?;
        Index::read_from(&mut BufReader::new(f))
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(INDEX_MAGIC)?;
        w.write_u8(INDEX_VERSION)?;
        w.write_f64::<LittleEndian>(self.params.k1)?;
        w.write_f64::<LittleEndian>(self.params.b)?;
        w.write_u32::<LittleEndian>(self.chunks.len() as u32)?;
        for (c, &len) in self.chunks.iter().zip(&self.chunk_len) {
            for s in [&c.chunk_id, &c.doc_id, &c.doc_path, &c.text] {
                write_str(w, s)?;
            }
            w.write_u8(c.doc_type.code())?;
            w.write_u32::<LittleEndian>(c.ordinal)?;
            w.write_u64::<LittleEndian>(c.start as u64)?;
            w.write_u64::<LittleEndian>(c.overlap as u64)?;
            w.write_u32::<LittleEndian>(len)?;
        }
        w.write_u32::<LittleEndian>(self.postings.len() as u32)?;
        for (term, list) in &self.postings {
            write_str(w, term)?;
            w.write_u32::<LittleEndian>(list.len() as u32)?;
            for p in list {
                w.write_u32::<LittleEndian>(p.chunk)?;
                w.write_u32::<LittleEndian>(p.tf)?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Index, DocError> {
        let corrupt = |e: std::io::Error| DocError::Corrupt(e.to_string());
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| DocError::BadMagic)?;
        if &magic != INDEX_MAGIC {
            return Err(DocError::BadMagic);
        }
        let version = r.read_u8().map_err(corrupt)?;
        if version != INDEX_VERSION {
            return Err(DocError::BadVersion(version));
        }
        let k1 = r.read_f64::<LittleEndian>().map_err(corrupt)?;
        let b = r.read_f64::<LittleEndian>().map_err(corrupt)?;
        let n = r.read_u32::<LittleEndian>().map_err(corrupt)? as usize;
        let mut chunks = Vec::with_capacity(n.min(1 << 16));
        let mut chunk_len = Vec::with_capacity(n.min(1 << 16));
        for _ in 0..n {
            let chunk_id = read_str(r)?;
            let doc_id = read_str(r)?;
            let doc_path = read_str(r)?;
            let text = read_str(r)?;
            let code = r.read_u8().map_err(corrupt)?;
            let doc_type =
                DocType::from_code(code).ok_or_else(|| DocError::Corrupt(format!("document type code {code}")))?;
            chunks.push(DocChunk {
                chunk_id,
                doc_id,
                doc_path,
                doc_type,
                ordinal: r.read_u32::<LittleEndian>().map_err(corrupt)?,
                start: r.read_u64::<LittleEndian>().map_err(corrupt)? as usize,
                overlap: r.read_u64::<LittleEndian>().map_err(corrupt)? as usize,
                text,
            });
            chunk_len.push(r.read_u32::<LittleEndian>().map_err(corrupt)?);
        }
        if n == 0 {
            return Err(DocError::Corrupt("index has no chunks".into()));
        }
        let terms = r.read_u32::<LittleEndian>().map_err(corrupt)?;
        let mut postings = BTreeMap::new();
        for _ in 0..terms {
            let term = read_str(r)?;
            let m = r.read_u32::<LittleEndian>().map_err(corrupt)?;
            let mut list = Vec::with_capacity((m as usize).min(n));
            for _ in 0..m {
                let chunk = r.read_u32::<LittleEndian>().map_err(corrupt)?;
                let tf = r.read_u32::<LittleEndian>().map_err(corrupt)?;
                if chunk as usize >= n {
                    return Err(DocError::Corrupt(format!("posting for `{term}` points past the chunk table")));
                }
                list.push(Posting { chunk, tf });
            }
            postings.insert(term, list);
        }
        let avg_len = chunk_len.iter().map(|&l| l as f64).sum::<f64>() / n as f64;
        Ok(Index {
            params: OkapiParams { k1, b },
            chunks,
            postings,
            chunk_len,
            avg_len,
        })
    }
}

impl Retriever for Index {
    fn retrieve(&self, query: &str, k: usize, filter: Option<DocType>) -> Result<Vec<Hit>, DocError> {
        if k == 0 {
            return Err(DocError::ZeroK);
        }
        let mut hits: Vec<Hit> = self
            .scores(query)
            .into_iter()
            .map(|(i, score)| Hit {
                chunk: self.chunks[i as usize].clone(),
                score,
            })
            .filter(|h| filter.is_none_or(|t| h.chunk.doc_type == t))
            .collect();
        hits.sort_by(rank);
        hits.truncate(k);
        Ok(hits)
    }
}

fn write_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w.write_u32::<LittleEndian>(s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn read_str<R: Read>(r: &mut R) -> Result<String, DocError> {
    let len = r
        .read_u32::<LittleEndian>()
        .map_err(|e| DocError::Corrupt(e.to_string()))? as usize;
    let mut buf = Vec::new();
    r.take(len as u64)
        .read_to_end(&mut buf)
        .map_err(|e| DocError::Corrupt(e.to_string()))?;
    if buf.len() != len {
        return Err(DocError::Corrupt("truncated string".into()));
    }
    String::from_utf8(buf).map_err(|e| DocError::Corrupt(e.to_string()))
}

/// Dense alternative to [`Index`]: chunks and queries are embedded as the mean
/// of their token vectors and ranked by cosine similarity.
pub struct EmbeddingRetriever {
    embedder: Arc<dyn Embedder>,
    chunks: Vec<DocChunk>,
    vectors: Vec<Vec<f64>>,
}

impl EmbeddingRetriever {
    pub fn new(chunks: Vec<DocChunk>, embedder: Arc<dyn Embedder>) -> Result<Self, DocError> {
        if chunks.is_empty() {
            return Err(DocError::NoChunks);
        }
        let vectors = chunks
            .iter()
            .map(|c| embedder.embed_tokens(&c.terms()).map(|v| mean_vector(&v)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(EmbeddingRetriever {
            embedder,
            chunks,
            vectors,
        })
    }
}

impl Retriever for EmbeddingRetriever {
    fn retrieve(&self, query: &str, k: usize, filter: Option<DocType>) -> Result<Vec<Hit>, DocError> {
        if k == 0 {
            return Err(DocError::ZeroK);
        }
        let terms = tokenize(query);
        if terms.is_empty() {
            return Ok(Vec::new());
        }
        let q = mean_vector(&self.embedder.embed_tokens(&terms)?);
        let mut hits: Vec<Hit> = self
            .chunks
            .iter()
            .zip(&self.vectors)
            .filter(|(c, _)| filter.is_none_or(|t| c.doc_type == t))
            .map(|(c, v)| Hit {
                chunk: c.clone(),
                score: cosine(&q, v),
            })
            .filter(|h| h.score > 0.0)
            .collect();
        hits.sort_by(rank);
        hits.truncate(k);
        Ok(hits)
    }
}

const C_KEYWORDS: &[&str] = &[
    "auto", "bool", "break", "case", "char", "class", "const", "constexpr", "continue", "default",
    "delete", "do", "double", "else", "enum", "extern", "false", "float", "for", "goto", "if",
    "inline", "int", "long", "namespace", "new", "nullptr", "private", "protected", "public",
    "register", "return", "short", "signed", "sizeof", "static", "struct", "switch", "template",
    "this", "true", "typedef", "typename", "union", "unsigned", "using", "virtual", "void",
    "volatile", "while", "NULL",
];

/// Retrieval query for a code unit: its signature, the identifiers used in
/// its body (first occurrence order, keywords dropped) and its file name.
pub fn query_for_unit(unit: &CodeUnit) -> String {
    let ident = Regex::new(r"[A-Za-z_][A-Za-z0-9_]*").unwrap();
    let masked = lexer::code_mask(&unit.code)
        .map(|m| String::from_utf8_lossy(&m).into_owned())
        .unwrap_or_else(|_| unit.code.clone());
    let body_from = unit.body_span.0.saturating_sub(unit.sig_start).min(masked.len());
    let body = masked.get(body_from..).unwrap_or(&masked);
    let mut seen = HashSet::new();
    let idents: Vec<&str> = ident
        .find_iter(body)
        .map(|m| m.as_str())
        .filter(|w| !C_KEYWORDS.contains(w) && seen.insert(*w))
        .collect();
    let file = unit.path.rsplit('/').next().unwrap_or(&unit.path);
    let mut q = unit.signature.clone();
    for part in idents.iter().copied().chain([file]) {
        q.push(' ');
        q.push_str(part);
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::HashedOneHot;

    fn chunk(id: &str, t: DocType, text: &str) -> DocChunk {
        DocChunk {
            chunk_id: id.into(),
            doc_id: id.into(),
            doc_path: id.into(),
            doc_type: t,
            ordinal: 0,
            start: 0,
            overlap: 0,
            text: text.into(),
        }
    }

    fn sample() -> Vec<DocChunk> {
        vec![
            chunk("a", DocType::Architecture, "the timer heap orders timers by timeout"),
            chunk("b", DocType::Implementation, "dump_escaped method writes escaped output"),
            chunk("c", DocType::Test, "tests for the timer heap"),
            chunk("d", DocType::UserSoftware, "install with make install"),
        ]
    }

    #[test]
    fn postings_contain_identifier_parts() {
        let idx = build_index(sample(), OkapiParams::default()).unwrap();
        for t in ["dump_escaped", "dump", "escaped", "method"] {
            assert_eq!(idx.doc_freq(t), 1, "{t}");
        }
    }

    #[test]
    fn avg_len_is_mean() {
        let idx = build_index(
            vec![
                chunk("x", DocType::Test, &"w ".repeat(10)),
                chunk("y", DocType::Test, &"w ".repeat(20)),
            ],
            OkapiParams::default(),
        )
        .unwrap();
        assert_eq!(idx.avg_len, 15.0);
    }

    #[test]
    fn exact_term_comes_first() {
        let idx = build_index(sample(), OkapiParams::default()).unwrap();
        let hits = idx.retrieve("dump_escaped", 3, None).unwrap();
        assert_eq!(hits[0].chunk.chunk_id, "b");
        assert!(idx.retrieve("zebra quux", 3, None).unwrap().is_empty());
        assert!(idx.retrieve("", 3, None).unwrap().is_empty());
        assert!(matches!(idx.retrieve("x", 0, None), Err(DocError::ZeroK)));
    }

    #[test]
    fn equal_scores_prefer_frequent_type_then_id() {
        let idx = build_index(
            vec![
                chunk("a", DocType::Test, "alpha"),
                chunk("b", DocType::UserSoftware, "alpha"),
                chunk("c", DocType::UserSoftware, "alpha"),
            ],
            OkapiParams::default(),
        )
        .unwrap();
        let ids: Vec<_> = idx.retrieve("alpha", 3, None).unwrap().into_iter().map(|h| h.chunk.chunk_id).collect();
        assert_eq!(ids, ["b", "c", "a"]);
    }

    #[test]
    fn filter_by_type() {
        let idx = build_index(sample(), OkapiParams::default()).unwrap();
        let hits = idx.retrieve("timer heap", 5, Some(DocType::Test)).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].chunk.chunk_id, "c");
    }

    #[test]
    fn insertion_order_does_not_matter() {
        let mut rev = sample();
        rev.reverse();
        let a = build_index(sample(), OkapiParams::default()).unwrap();
        let b = build_index(rev, OkapiParams::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn persistence_round_trip() {
        let idx = build_index(sample(), OkapiParams::default()).unwrap();
        let mut buf = Vec::new();
        idx.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..8], INDEX_MAGIC);
        assert_eq!(buf[8], INDEX_VERSION);
        assert_eq!(Index::read_from(&mut buf.as_slice()).unwrap(), idx);

        let mut bad = buf.clone();
        bad[8] = 9;
        assert!(matches!(Index::read_from(&mut bad.as_slice()), Err(DocError::BadVersion(9))));
        assert!(matches!(Index::read_from(&mut &b"nope"[..]), Err(DocError::BadMagic)));
        assert!(matches!(Index::read_from(&mut &buf[..buf.len() - 3]), Err(DocError::Corrupt(_))));
    }

    #[test]
    fn embedding_backend_ranks_by_overlap() {
        let r = EmbeddingRetriever::new(sample(), Arc::new(HashedOneHot::default())).unwrap();
        let hits = r.retrieve("dump_escaped method", 2, None).unwrap();
        assert_eq!(hits[0].chunk.chunk_id, "b");
        assert!(r.retrieve("???", 2, None).unwrap().is_empty());
    }

    #[test]
    fn unit_query_has_signature_body_idents_and_file() {
        let code = "static int timer_less_than(const struct heap_node* ha) {\n  return a->timeout < b->timeout; // cmp\n}";
        let unit = CodeUnit {
            id: "r:src/timer.c:timer_less_than:0".into(),
            repo_id: "r".into(),
            path: "src/timer.c".into(),
            language: crate::corpus::Language::C,
            name: "timer_less_than".into(),
            signature: "static int timer_less_than(const struct heap_node* ha)".into(),
            sig_start: 100,
            body_span: (155, 100 + code.len()),
            leading_comment: None,
            loc: 3,
            code: code.into(),
        };
        let q = query_for_unit(&unit);
        assert!(q.starts_with("static int timer_less_than("));
        assert!(q.ends_with(" a timeout b timer.c"), "{q}");
        assert!(!q.contains("cmp"));
    }
}
