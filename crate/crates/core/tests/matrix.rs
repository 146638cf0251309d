use std::fs;
use std::path::Path;
use std::sync::Arc;

use ccomment_core::astx::{AstKind, AstNode, CondensedAst};
use ccomment_core::corpus::{export_dataset, extract_pairs, SourceFile};
use ccomment_core::docstore::{build_index, chunk_doc, DesignDoc, OkapiParams};
use ccomment_core::llmclient::MockProvider;
use ccomment_core::report::{run_matrix, Manifest, RunOptions};
use ccomment_core::Setup;

const A: &str = "/* Adds two counters. */\nint add(int a, int b) {\n  return a + b;\n}\n";
const B: &str = "// Drains the timer queue.\nvoid drain(int* q) {\n  while (*q > 0)\n    (*q)--;\n}\n";

fn workspace(dir: &Path) -> (Manifest, Vec<String>) {
    let mut units = extract_pairs(&SourceFile::in_memory("r", "src/a.c", A)).unwrap();
    units.extend(extract_pairs(&SourceFile::in_memory("r", "src/b.c", B)).unwrap());
    assert_eq!(units.len(), 2);
    export_dataset(&units, &dir.join("pairs.jsonl")).unwrap();

    let asts: Vec<CondensedAst> = units
        .iter()
        .map(|u| CondensedAst {
            unit_id: u.id.clone(),
            nodes: vec![AstNode {
                origin: "0x1".into(),
                kind: AstKind::Function,
                name: Some(u.name.clone()),
                type_text: None,
                depth: 0,
                children: Vec::new(),
            }],
            callees: Vec::new(),
            token_estimate: 4,
        })
        .collect();
    fs::write(dir.join("asts.json"), serde_json::to_string(&asts).unwrap()).unwrap();

    let doc = DesignDoc::new("design-timers.md", "# Detailed design\n\nThe add function sums two counters. The drain function empties the timer queue q once per loop iteration.\n").unwrap();
    let index = build_index(chunk_doc(&doc, 1600, 200).unwrap(), OkapiParams::default()).unwrap();
    index.save(&dir.join("index.bin")).unwrap();

    let m: Manifest = serde_json::from_value(serde_json::json!({
        "pairs": dir.join("pairs.jsonl"),
        "index": dir.join("index.bin"),
        "asts": dir.join("asts.json"),
        "models": ["mock"],
        "out_dir": dir.join("runs"),
        "embedder": "hashed",
    }))
    .unwrap();
    (m, units.into_iter().map(|u| u.id).collect())
}

fn opts(p: MockProvider) -> RunOptions {
    RunOptions {
        provider: Some(Arc::new(p)),
    }
}

#[test]
fn two_units_four_setups_give_eight_reports() {
    let d = tempfile::tempdir().unwrap();
    let (m, _) = workspace(d.path());
    let out = run_matrix(&m, &opts(MockProvider::default())).unwrap();
    assert_eq!(out.reports.len(), 8);
    assert_eq!(out.run.counts.cache_hits, 0, "every setup renders a distinct prompt");
    assert!(out.failures.is_empty(), "{:?}", out.failures);
    assert!(out.reports.iter().all(|r| r.completeness == Some(1.0)));
    assert_eq!(out.run.counts.cells, 8);
}

#[test]
fn rerun_is_served_from_cache() {
    let d = tempfile::tempdir().unwrap();
    let (m, _) = workspace(d.path());
    let first = run_matrix(&m, &opts(MockProvider::default())).unwrap();
    assert_eq!(first.run.counts.cache_hits, 0);
    let second = run_matrix(&m, &opts(MockProvider::default())).unwrap();
    assert_eq!(second.run.counts.cache_hits, second.run.counts.requests);
    assert!(second.generated.iter().all(|g| g.cached));
    assert_eq!(
        serde_json::to_string(&first.reports).unwrap(),
        serde_json::to_string(&second.reports).unwrap()
    );
}

#[test]
fn one_failing_cell_leaves_the_rest() {
    let d = tempfile::tempdir().unwrap();
    let (m, ids) = workspace(d.path());
    let provider = MockProvider::default().fail_on(&ids[0], Setup::CodeDoc);
    let out = run_matrix(&m, &opts(provider)).unwrap();
    assert_eq!(out.reports.len(), 7);
    assert_eq!(out.failures.len(), 1);
    let f = &out.failures[0];
    assert_eq!((f.unit_id.as_str(), f.setup, f.stage.as_str()), (ids[0].as_str(), Setup::CodeDoc, "complete"));
}

#[test]
fn saved_run_round_trips() {
    let d = tempfile::tempdir().unwrap();
    let (m, _) = workspace(d.path());
    let out = run_matrix(&m, &opts(MockProvider::default())).unwrap();
    let dir = m.run_dir();
    out.save(&dir).unwrap();
    let files = ccomment_core::report::write_report(&dir, &d.path().join("rep"), None, Default::default()).unwrap();
    assert_eq!(files.len(), 6);
    let sim = fs::read_to_string(d.path().join("rep/similarity.csv")).unwrap();
    assert_eq!(sim.lines().count(), 1 + 4 * 4);
}

