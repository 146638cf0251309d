use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use ccomment_core::docstore::{
    build_index, chunk_doc, load_docs, tokenize, DocChunk, Index, OkapiParams, Retriever, DEFAULT_CHUNK_SIZE,
    DEFAULT_OVERLAP,
};
use proptest::prelude::*;

fn fixture_index() -> Index {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/docs");
    let (docs, warnings) = load_docs(&dir).unwrap();
    assert!(warnings.is_empty(), "{warnings:?}");
    let chunks: Vec<DocChunk> = docs
        .iter()
        .flat_map(|d| chunk_doc(d, DEFAULT_CHUNK_SIZE, DEFAULT_OVERLAP).unwrap())
        .collect();
    build_index(chunks, OkapiParams::default()).unwrap()
}

/// Scores every chunk from scratch, with no postings.
fn brute_force(index: &Index, query: &str, k: usize) -> Vec<(String, f64)> {
    let (k1, b) = (1.2, 0.75);
    let docs: Vec<Vec<String>> = index.chunks.iter().map(|c| tokenize(&c.text)).collect();
    let n = docs.len() as f64;
    let avg = docs.iter().map(|d| d.len() as f64).sum::<f64>() / n;
    let mut terms: Vec<String> = Vec::new();
    for t in tokenize(query) {
        if !terms.contains(&t) {
            terms.push(t);
        }
    }
    let mut scored: Vec<(usize, f64)> = Vec::new();
    for (i, d) in docs.iter().enumerate() {
        let mut s = 0.0;
        let mut any = false;
        for t in &terms {
            let tf = d.iter().filter(|w| *w == t).count() as f64;
            if tf == 0.0 {
                continue;
            }
            any = true;
            let df = docs.iter().filter(|d| d.contains(t)).count() as f64;
            let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
            s += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * d.len() as f64 / avg));
        }
        if any {
            scored.push((i, s));
        }
    }
    let prior = |i: usize| index.chunks[i].doc_type.frequency_prior();
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap()
            .then(prior(b.0).cmp(&prior(a.0)))
            .then(index.chunks[a.0].chunk_id.cmp(&index.chunks[b.0].chunk_id))
    });
    scored
        .into_iter()
        .take(k)
        .map(|(i, s)| (index.chunks[i].chunk_id.clone(), s))
        .collect()
}

fn vocabulary(index: &Index) -> Vec<String> {
    index.postings.keys().cloned().collect()
}

#[test]
fn fixture_has_fifty_chunks() {
    assert_eq!(fixture_index().chunks.len(), 50);
}

#[test]
fn doc_freq_matches_recount() {
    let index = fixture_index();
    let sets: Vec<BTreeSet<String>> = index.chunks.iter().map(|c| tokenize(&c.text).into_iter().collect()).collect();
    let mut df: HashMap<&str, usize> = HashMap::new();
    for s in &sets {
        for t in s {
            *df.entry(t).or_default() += 1;
        }
    }
    for (t, n) in df {
        assert_eq!(index.doc_freq(t), n, "{t}");
    }
}

#[test]
fn rare_identifier_ranks_its_chunk_first() {
    let index = fixture_index();
    let hits = index.retrieve("dump_escaped", 5, None).unwrap();
    assert_eq!(hits.len(), 1);
    assert!(hits[0].chunk.text.contains("dump_escaped"));
}

#[test]
fn matches_exhaustive_scoring() {
    let index = fixture_index();
    for q in ["timer heap start_id", "ring buffer full", "configuration workers backlog", "test cases", "the"] {
        for k in [1, 3, 5, 10] {
            let got: Vec<(String, f64)> = index
                .retrieve(q, k, None)
                .unwrap()
                .into_iter()
                .map(|h| (h.chunk.chunk_id, h.score))
                .collect();
            let want = brute_force(&index, q, k);
            assert_eq!(got.len(), want.len(), "{q} k={k}");
            for (g, w) in got.iter().zip(&want) {
                assert_eq!(g.0, w.0, "{q} k={k}");
                assert!((g.1 - w.1).abs() < 1e-9);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn retrieval_prefix_property(picks in prop::collection::vec(0usize..10_000, 1..6), k in 1usize..12) {
        let index = fixture_index();
        let vocab = vocabulary(&index);
        let q: Vec<&str> = picks.iter().map(|i| vocab[i % vocab.len()].as_str()).collect();
        let q = q.join(" ");
        let a = index.retrieve(&q, k, None).unwrap();
        let b = index.retrieve(&q, k + 1, None).unwrap();
        prop_assert!(a.len() <= b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(&x.chunk.chunk_id, &y.chunk.chunk_id);
        }
    }
}
