use std::fs;
use std::path::{Path, PathBuf};

use ccomment_core::corpus::{extract_pairs, mine_repo, ScanConfig, SourceFile};
use ccomment_core::lexer::strip_comments;
use walkdir::WalkDir;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

#[test]
fn timer_fixture_yields_timer_less_than() {
    let text = fs::read_to_string(fixtures().join("timer.c")).unwrap();
    let units = extract_pairs(&SourceFile::in_memory("libuv", "src/timer.c", &text)).unwrap();
    let u = units.iter().find(|u| u.name == "timer_less_than").expect("unit mined");
    assert!(u.signature.contains("heap_node"), "{}", u.signature);
    assert!(u.signature.starts_with("static int timer_less_than"));
    assert!(u.comment_text().unwrap().contains("start_id"));
}

#[test]
fn stripping_is_idempotent_on_every_fixture_source() {
    let mut n = 0;
    for e in WalkDir::new(fixtures()).into_iter().filter_map(Result::ok) {
        let p = e.path();
        let ext = p.extension().and_then(|x| x.to_str()).unwrap_or("");
        if !["c", "h", "cpp"].contains(&ext) {
            continue;
        }
        let src = fs::read_to_string(p).unwrap();
        let once = strip_comments(&src).unwrap();
        assert_eq!(strip_comments(&once).unwrap(), once, "{}", p.display());
        n += 1;
    }
    assert!(n >= 40, "only {n} sources found");
}

#[test]
fn literals_with_comment_markers_survive() {
    let src = fs::read_to_string(fixtures().join("timer.c")).unwrap();
    let out = strip_comments(&src).unwrap();
    assert!(out.contains("\"// not a comment /* either */\""));
    assert!(!out.contains("Orders timers by deadline"));
}

#[test]
fn fixture_corpus_has_thirty_files() {
    let r = mine_repo(&fixtures().join("corpus"), &ScanConfig::default()).unwrap();
    assert_eq!(r.files, 30);
    assert!(r.diagnostics.is_empty(), "{:?}", r.diagnostics);
    assert!(r.units.iter().filter(|u| u.has_comment()).count() >= 60);
    // ids are unique
    let mut ids: Vec<&str> = r.units.iter().map(|u| u.id.as_str()).collect();
    ids.sort();
    ids.dedup();
    assert_eq!(ids.len(), r.units.len());
}

/// Needs a libuv checkout; point `LIBUV_ROOT` at it and run with `--ignored`.
#[test]
#[ignore]
fn libuv_checkout_has_127_source_files() {
    let root = std::env::var("LIBUV_ROOT").expect("LIBUV_ROOT not set");
    let scan = ccomment_core::corpus::scan_repo(Path::new(&root), &ScanConfig::default()).unwrap();
    assert_eq!(scan.files.len(), 127);
}
