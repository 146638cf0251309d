//! Acceptance criteria. Each check prints one PASS/FAIL line; the process
//! exits non-zero if any check fails.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use ccomment_core::astx::{condense, dump_ast, BuildFlags, ToolTemplate};
use ccomment_core::classify::{classify_rules, Category};
use ccomment_core::corpus::{comment_text, extract_pairs, scan_repo, ScanConfig};
use ccomment_core::docstore::{
    build_index, chunk_doc, load_docs, tokenize, Index, OkapiParams, Retriever, DEFAULT_CHUNK_SIZE, DEFAULT_OVERLAP,
};
use ccomment_core::embed::HashedOneHot;
use ccomment_core::evalkit::{
    bias_gate, bleu_4, chi_square_sf, chi_square_two_tailed, completeness_ratio, rouge_l, Score, BLEU_EPSILON,
};
use ccomment_core::lexer::strip_comments;
use ccomment_core::llmclient::GeneratedComment;
use ccomment_core::report::{table_similarity, Aggregate, TimeRow};
use ccomment_core::Setup;
use ccomment_core::evalkit::MetricReport;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type CheckFn = Box<dyn FnMut() -> Check>;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

// ---------------------------------------------------------------- metrics

fn oracle_tokens(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in s.chars() {
        if ch.is_ascii_alphanumeric() || ch == '_' {
            cur.push(ch.to_ascii_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Full (m+1)×(n+1) LCS table.
fn oracle_rouge(c: &str, r: &str) -> f64 {
    let (c, r) = (oracle_tokens(c), oracle_tokens(r));
    if c.is_empty() {
        return 0.0;
    }
    let mut t = vec![vec![0usize; r.len() + 1]; c.len() + 1];
    for i in 1..=c.len() {
        for j in 1..=r.len() {
            t[i][j] = if c[i - 1] == r[j - 1] {
                t[i - 1][j - 1] + 1
            } else {
                t[i - 1][j].max(t[i][j - 1])
            };
        }
    }
    let l = t[c.len()][r.len()] as f64;
    if l == 0.0 {
        return 0.0;
    }
    let (p, rec) = (l / c.len() as f64, l / r.len() as f64);
    2.0 * p * rec / (p + rec)
}

/// Explicit n-gram lists with clipped counting.
fn oracle_bleu(c: &str, r: &str) -> f64 {
    let (c, r) = (oracle_tokens(c), oracle_tokens(r));
    if c.is_empty() {
        return 0.0;
    }
    let grams = |t: &[String], n: usize| -> Vec<Vec<String>> { (0..=t.len() - n).map(|i| t[i..i + n].to_vec()).collect() };
    let orders = c.len().min(4);
    let mut log_sum = 0.0;
    for n in 1..=orders {
        let cg = grams(&c, n);
        let rg = if r.len() >= n { grams(&r, n) } else { Vec::new() };
        let mut distinct: Vec<&Vec<String>> = Vec::new();
        for g in &cg {
            if !distinct.contains(&g) {
                distinct.push(g);
            }
        }
        let mut matched = 0;
        for g in distinct {
            let in_c = cg.iter().filter(|x| *x == g).count();
            let in_r = rg.iter().filter(|x| *x == g).count();
            matched += in_c.min(in_r);
        }
        let p = if matched == 0 {
            BLEU_EPSILON / cg.len() as f64
        } else {
            matched as f64 / cg.len() as f64
        };
        log_sum += p.ln();
    }
    let bp = if c.len() < r.len() { (1.0 - r.len() as f64 / c.len() as f64).exp() } else { 1.0 };
    bp * (log_sum / orders as f64).exp()
}

fn random_text(rng: &mut ChaCha8Rng, min: usize) -> String {
    const WORDS: &[&str] = &[
        "the", "timer", "heap", "returns", "node", "queue", "is", "a", "of", "loop", "start_id", "Heap", "fires",
        "first", "when", "full", "buffer",
    ];
    const SEPS: &[&str] = &[" ", "  ", ", ", ". ", "; ", "\n", " (", ") "];
    let n = rng.gen_range(min..18);
    let mut s = String::new();
    for i in 0..n {
        if i > 0 {
            s.push_str(SEPS.choose(rng).unwrap());
        }
        s.push_str(WORDS.choose(rng).unwrap());
    }
    s
}

fn metric_oracle() -> Check {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for i in 0..200 {
        let c = random_text(&mut rng, if i % 20 == 0 { 0 } else { 1 });
        let r = random_text(&mut rng, 1);
        let dr = (rouge_l(&c, &r).map_err(|e| e.to_string())? - oracle_rouge(&c, &r)).abs();
        let db = (bleu_4(&c, &r).map_err(|e| e.to_string())? - oracle_bleu(&c, &r)).abs();
        ensure(dr <= 1e-9 && db <= 1e-9, format!("pair {i}: ΔROUGE={dr:e} ΔBLEU={db:e}\n  c={c:?}\n  r={r:?}"))?;
        worst = worst.max(dr).max(db);
    }
    let t = started.elapsed();
    ensure(t < Duration::from_secs(5), format!("took {t:?}"))?;
    Ok(format!("200 pairs, max |Δ| = {worst:e}, {t:.2?}"))
}

// ---------------------------------------------------------------- completeness

fn inject_noise(rng: &mut ChaCha8Rng, atoms: &[String]) -> String {
    let mut s = String::new();
    for a in atoms {
        s.push_str(a);
        match rng.gen_range(0..5) {
            0 => s.push_str(" /* note: x = y; */ "),
            1 => s.push_str(" // trailing remark\n"),
            2 => s.push_str("\n\t  "),
            _ => s.push(' '),
        }
    }
    s
}

fn completeness_exact() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..20 {
        let nfun = rng.gen_range(2..8);
        let mut funcs: Vec<Vec<String>> = Vec::new();
        for k in 0..nfun {
            let body = rng.gen_range(1..6);
            let mut atoms = vec!["int".to_string(), format!("f{case}_{k}(void)"), "{".to_string()];
            for j in 0..body {
                atoms.push(format!("x{j}=\"a//b/*c*/\"[{j}];"));
            }
            atoms.push("return".into());
            atoms.push("0;".into());
            atoms.push("}".into());
            funcs.push(atoms);
        }
        let size = |fs: &[Vec<String>]| fs.iter().flatten().map(|a| a.chars().filter(|c| !c.is_whitespace()).count()).sum::<usize>();
        let keep = rng.gen_range(1..=nfun);
        let original: Vec<String> = funcs.iter().flatten().cloned().collect();
        let generated: Vec<String> = funcs[..keep].iter().flatten().cloned().collect();
        let want = size(&funcs[..keep]) as f64 / size(&funcs) as f64;
        let got = completeness_ratio(&generated.join(" "), &original.join(" ")).map_err(|e| e.to_string())?;
        ensure((got - want).abs() <= 1e-12, format!("case {case}: {got} vs {want}"))?;
        let noisy = completeness_ratio(&inject_noise(&mut rng, &generated), &inject_noise(&mut rng, &original))
            .map_err(|e| e.to_string())?;
        ensure(noisy == got, format!("case {case}: noise changed {got} to {noisy}"))?;
    }
    Ok("20 constructed pairs exact; comment/whitespace injection changes nothing".into())
}

// ---------------------------------------------------------------- stripper

fn stripper_safety() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    const LITERALS: &[&str] = &[
        r#""// not a comment""#,
        r#""/* nor this */""#,
        r#""a\"//b""#,
        r#""end /*""#,
        "'/'",
        r"'\''",
        r#"'"'"#,
        r#""http://x/*y*/""#,
        r#""\\""#,
    ];
    const COMMENTS: &[&str] = &["/* plain */", "// line\n", "/** doc \"quoted\" */", "//\n", "/* 'x' */"];
    for case in 0..1000 {
        let mut src = String::new();
        let mut lits = Vec::new();
        for i in 0..rng.gen_range(1..8) {
            if rng.gen_bool(0.5) {
                src.push_str(COMMENTS.choose(&mut rng).unwrap());
            }
            let lit = *LITERALS.choose(&mut rng).unwrap();
            src.push_str(&format!("v{i} = {lit};\n"));
            lits.push(format!("v{i} = {lit};"));
        }
        let out = strip_comments(&src).map_err(|e| format!("case {case}: {e}"))?;
        for l in &lits {
            ensure(out.contains(l.as_str()), format!("case {case}: literal `{l}` corrupted\n{src}\n---\n{out}"))?;
        }
        ensure(!out.contains("plain") && !out.contains("doc \""), format!("case {case}: comment survived\n{out}"))?;
    }
    let mut files = 0;
    for e in walkdir::WalkDir::new(fixtures()).into_iter().filter_map(Result::ok) {
        let ext = e.path().extension().and_then(|x| x.to_str()).unwrap_or("");
        if !["c", "h", "cpp"].contains(&ext) {
            continue;
        }
        let src = fs::read_to_string(e.path()).map_err(|x| x.to_string())?;
        let once = strip_comments(&src).map_err(|x| x.to_string())?;
        ensure(strip_comments(&once).map_err(|x| x.to_string())? == once, format!("not idempotent: {}", e.path().display()))?;
        files += 1;
    }
    Ok(format!("1000 generated cases intact; idempotent on {files} fixture files"))
}

// ---------------------------------------------------------------- retrieval

fn fixture_index() -> Result<Index, String> {
    let (docs, _) = load_docs(&fixtures().join("docs")).map_err(|e| e.to_string())?;
    let mut chunks = Vec::new();
    for d in &docs {
        chunks.extend(chunk_doc(d, DEFAULT_CHUNK_SIZE, DEFAULT_OVERLAP).map_err(|e| e.to_string())?);
    }
    build_index(chunks, OkapiParams::default()).map_err(|e| e.to_string())
}

fn exhaustive(index: &Index, query: &str, k: usize) -> Vec<(String, f64)> {
    let docs: Vec<Vec<String>> = index.chunks.iter().map(|c| tokenize(&c.text)).collect();
    let n = docs.len() as f64;
    let avg = docs.iter().map(Vec::len).sum::<usize>() as f64 / n;
    let terms: BTreeSet<String> = tokenize(query).into_iter().collect();
    let mut scored = Vec::new();
    for (i, d) in docs.iter().enumerate() {
        let mut s = 0.0;
        let mut hit = false;
        for t in &terms {
            let tf = d.iter().filter(|w| *w == t).count() as f64;
            if tf > 0.0 {
                hit = true;
                let df = docs.iter().filter(|x| x.contains(t)).count() as f64;
                let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
                s += idf * tf * 2.2 / (tf + 1.2 * (0.25 + 0.75 * d.len() as f64 / avg));
            }
        }
        if hit {
            scored.push((i, s));
        }
    }
    let c = &index.chunks;
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap()
            .then(c[b.0].doc_type.frequency_prior().cmp(&c[a.0].doc_type.frequency_prior()))
            .then(c[a.0].chunk_id.cmp(&c[b.0].chunk_id))
    });
    scored.into_iter().take(k).map(|(i, s)| (c[i].chunk_id.clone(), s)).collect()
}

fn retrieval() -> Check {
    let index = fixture_index()?;
    ensure(index.chunks.len() == 50, format!("{} chunks", index.chunks.len()))?;
    let vocab: Vec<&String> = index.postings.keys().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut queries: Vec<String> = ["timer heap start_id", "ring buffer full", "test cases verify", "dump_escaped", "the loop"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for _ in 0..100 {
        let n = rng.gen_range(1..6);
        queries.push((0..n).map(|_| vocab.choose(&mut rng).unwrap().as_str()).collect::<Vec<_>>().join(" "));
    }
    for q in &queries {
        for k in [1, 3, 5, 10] {
            let got = index.retrieve(q, k, None).map_err(|e| e.to_string())?;
            let want = exhaustive(&index, q, k);
            ensure(got.len() == want.len(), format!("{q:?} k={k}: {} vs {} hits", got.len(), want.len()))?;
            for (g, w) in got.iter().zip(&want) {
                ensure(g.chunk.chunk_id == w.0 && (g.score - w.1).abs() < 1e-9, format!("{q:?} k={k}: {} vs {}", g.chunk.chunk_id, w.0))?;
            }
        }
    }
    for q in &queries[5..] {
        for k in 1..12 {
            let a = index.retrieve(q, k, None).map_err(|e| e.to_string())?;
            let b = index.retrieve(q, k + 1, None).map_err(|e| e.to_string())?;
            ensure(
                a.iter().zip(&b).all(|(x, y)| x.chunk.chunk_id == y.chunk.chunk_id) && a.len() <= b.len(),
                format!("prefix property broken for {q:?} at k={k}"),
            )?;
        }
    }
    Ok(format!("{} queries × k∈{{1,3,5,10}} match exhaustive scoring; prefix property on 100 random queries", queries.len()))
}

// ---------------------------------------------------------------- AST

fn ast_bounds() -> Check {
    let files = scan_repo(&fixtures().join("ast"), &ScanConfig::default()).map_err(|e| e.to_string())?.files;
    ensure(files.len() == 10, format!("{} translation units", files.len()))?;
    let mut units = 0;
    for f in &files {
        let raw = dump_ast(f, &BuildFlags::empty(), &ToolTemplate::default(), None).map_err(|e| format!("{}: {e}", f.path))?;
        for u in extract_pairs(f).map_err(|e| e.to_string())? {
            let mut prev: Option<ccomment_core::astx::CondensedAst> = None;
            for budget in [256, 1024, 4096] {
                let a = condense(&raw, &u, budget).map_err(|e| format!("{}: {e}", u.id))?;
                ensure(a.token_estimate <= budget, format!("{} at {budget}: {} tokens", u.id, a.token_estimate))?;
                if let Some(p) = &prev {
                    ensure(
                        p.nodes.len() <= a.nodes.len() && p.nodes[..] == a.nodes[..p.nodes.len()],
                        format!("{}: budget {budget} is not a superset", u.id),
                    )?;
                }
                prev = Some(a);
            }
            units += 1;
        }
    }
    Ok(format!("10 translation units, {units} functions, budgets 256/1024/4096 bounded and nested"))
}

// ---------------------------------------------------------------- pipeline

fn ccomment(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_ccomment"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("ccomment {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

struct Prepared {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// mine, index and ast over the 30-file corpus.
fn prepare() -> Result<Prepared, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path().to_path_buf();
    let corpus = fixtures().join("corpus");
    ccomment(&["mine", "--root", p(&corpus), "--out", p(&root.join("pairs.jsonl"))])?;
    ccomment(&["index", "--docs", p(&fixtures().join("docs")), "--out", p(&root.join("index.bin"))])?;
    ccomment(&[
        "ast",
        "--root",
        p(&corpus),
        "--makefile",
        p(&corpus.join("Makefile")),
        "--budget",
        "512",
        "--out",
        p(&root.join("asts.json")),
    ])?;
    Ok(Prepared { _dir: dir, root })
}

fn run_and_report(prep: &Prepared, tag: &str) -> Result<PathBuf, String> {
    let out_dir = prep.root.join(format!("runs-{tag}"));
    let manifest = serde_json::json!({
        "pairs": "pairs.jsonl",
        "index": "index.bin",
        "asts": "asts.json",
        "models": ["mock"],
        "seed": 42,
        "embedder": "hashed",
        "judge": "mock",
        "out_dir": out_dir,
    });
    let mpath = prep.root.join(format!("run-{tag}.json"));
    fs::write(&mpath, manifest.to_string()).map_err(|e| e.to_string())?;
    let id = ccomment(&["run", "--manifest", p(&mpath)])?.trim().to_string();
    let rep = prep.root.join(format!("report-{tag}"));
    ccomment(&["report", "--run", &id, "--runs-dir", p(&out_dir), "--out", p(&rep)])?;
    Ok(rep)
}

fn determinism(prep: &Prepared) -> Check {
    let mut first: Option<HashMap<&str, Vec<u8>>> = None;
    for i in 0..3 {
        let rep = run_and_report(prep, &format!("det{i}"))?;
        let mut files = HashMap::new();
        for name in ["similarity.csv", "completeness.csv", "categories.csv", "times.csv"] {
            files.insert(name, fs::read(rep.join(name)).map_err(|e| e.to_string())?);
        }
        match &first {
            None => first = Some(files),
            Some(f) => {
                for (name, bytes) in &files {
                    ensure(f[name] == *bytes, format!("run {i}: {name} differs"))?;
                }
            }
        }
    }
    // every mock-annotated file only gained comments
    let curve = String::from_utf8(first.unwrap()["completeness.csv"].clone()).unwrap();
    let mut buckets = 0;
    for line in curve.lines().skip(1) {
        let mean: f64 = line.rsplit(',').next().unwrap().parse().map_err(|_| line.to_string())?;
        ensure(mean == 1.0, format!("completeness bucket {line}"))?;
        buckets += 1;
    }
    let dir = fs::read_dir(prep.root.join("runs-det0")).map_err(|e| e.to_string())?;
    let mut per_report = 0;
    for e in dir.filter_map(Result::ok) {
        let f = e.path().join("reports.jsonl");
        if !f.is_file() {
            continue;
        }
        for line in fs::read_to_string(&f).map_err(|e| e.to_string())?.lines() {
            let r: MetricReport = serde_json::from_str(line).map_err(|e| e.to_string())?;
            ensure(r.completeness == Some(1.0), format!("{} {}: completeness {:?}", r.unit_id, r.setup, r.completeness))?;
            per_report += 1;
        }
    }
    ensure(per_report > 0, "no reports found")?;
    Ok(format!("3 runs byte-identical; completeness 1.0 for {per_report} reports in {buckets} size buckets"))
}

fn runtime() -> Check {
    let started = Instant::now();
    let prep = prepare()?;
    let r = &prep.root;
    for setup in Setup::ALL {
        let k = setup.key();
        let prompts = r.join(format!("prompts-{k}.jsonl"));
        let gen = r.join(format!("gen-{k}.jsonl"));
        let (pairs, index, asts) = (r.join("pairs.jsonl"), r.join("index.bin"), r.join("asts.json"));
        ccomment(&["prompt", "--pairs", p(&pairs), "--index", p(&index), "--ast", p(&asts), "--setup", k, "--out", p(&prompts)])?;
        ccomment(&["generate", "--pairs", p(&r.join("pairs.jsonl")), "--prompts", p(&prompts), "--model", "mock", "--out", p(&gen)])?;
        ccomment(&[
            "evaluate",
            "--pairs",
            p(&r.join("pairs.jsonl")),
            "--generated",
            p(&gen),
            "--out",
            p(&r.join(format!("report-{k}.csv"))),
            "--embedder",
            "hashed",
            "--judge",
            "mock",
        ])?;
    }
    run_and_report(&prep, "timed")?;
    let t = started.elapsed();
    ensure(t < Duration::from_secs(60), format!("took {t:.1?}"))?;
    Ok(format!("30-file corpus, mine → index → ast → prompt → generate → evaluate (4 setups) → run → report in {t:.1?}"))
}

// ---------------------------------------------------------------- bias gate

fn gen(text: &str) -> GeneratedComment {
    GeneratedComment {
        unit_id: "u".into(),
        model: "mock".into(),
        setup: Setup::Code,
        pass_index: 0,
        text: text.into(),
        empty: false,
        raw_comment: None,
        annotated_file: None,
        latency_ms: 0,
        cached: false,
    }
}

fn bias_gate_mechanics() -> Check {
    let e = HashedOneHot::default();
    let base = gen("Orders timers by deadline and breaks ties by start id.");
    let same = bias_gate(&base, &[gen(&base.text), gen(&base.text), gen(&base.text)], Some(&e)).map_err(|e| e.to_string())?;
    ensure(same.fraction_passing == 1.0, format!("identical variants: {}", same.fraction_passing))?;
    let other = bias_gate(&base, &[gen(&base.text), gen("Allocates a zeroed buffer for pixels.")], Some(&e)).map_err(|e| e.to_string())?;
    let o = &other.per_variant[1];
    ensure(o.similarity < 0.95 && !o.pass, format!("orthogonal variant: {:?}", o))?;
    ensure(other.fraction_passing == 0.5, format!("fraction {}", other.fraction_passing))?;
    Ok(format!("identical → 1.0; orthogonal variant similarity {:.3} fails", o.similarity))
}

// ---------------------------------------------------------------- chi-square

/// P(X ≥ x) for one degree of freedom by Simpson's rule on the normal density
/// after substituting u = √x.
fn chi1_tail_by_integration(x: f64) -> f64 {
    let (a, b, n) = (x.sqrt(), x.sqrt() + 40.0, 200_000);
    let h = (b - a) / n as f64;
    let f = |u: f64| (-u * u / 2.0).exp();
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    2.0 * (s * h / 3.0) / (2.0 * std::f64::consts::PI).sqrt()
}

fn chi_square() -> Check {
    let t = chi_square_two_tailed(&[vec![20.0, 5.0], vec![5.0, 20.0]]).map_err(|e| e.to_string())?;
    ensure(t.statistic == 18.0 && t.dof == 1, format!("{t:?}"))?;
    let p = chi_square_sf(3.841, 1);
    let oracle = chi1_tail_by_integration(3.841);
    ensure((p - oracle).abs() <= 1e-3 && (p - 0.05).abs() <= 1e-3, format!("p={p}, oracle={oracle}"))?;
    Ok(format!("statistic 18, dof 1; p(3.841) = {p:.5} (integration {oracle:.5})"))
}

// ---------------------------------------------------------------- tables

const SIMILARITY_ROWS: [&str; 5] = [
    r"\texttt{OpenAI o3} & 0.32 & 0.14 & 0.71 & 0.75 & 0.16 & 0.09 & 0.55 & 0.58 & 0.38 & 0.22 & 0.81 & 0.83 & 0.27 & 0.11 & 0.55 & 0.60 \\",
    r"\texttt{OpenAI o4-mini} & 0.31 & 0.14 & 0.69 & 0.70 & 0.16 & 0.09 & 0.52 & 0.50 & 0.39 & 0.24 & 0.79 & 0.79 & 0.23 & 0.10 & 0.52 & 0.54\\",
    r"\texttt{Codestral 25.01} & 0.27 & 0.12 & 0.67 & 0.70 & 0.15 & 0.08 & 0.49 & 0.47 & 0.34 & 0.18 & 0.73 & 0.70 & 0.21 & 0.12 & 0.46 & 0.46 \\",
    r"\texttt{DeepSeek-R1} & 0.29 & 0.10 & 0.66 & 0.70 & 0.14 & 0.06 & 0.46 & 0.51 & 0.36 & 0.20 & 0.69 & 0.73 & 0.19 & 0.10 & 0.52 & 0.50  \\",
    r"\texttt{GPT-4o} & 0.34 & 0.15 & 0.63 & 0.69 & 0.12 & 0.05 & 0.40 & 0.42 & 0.31 & 0.14 & 0.69 & 0.65 & 0.13 & 0.05 & 0.42 & 0.41 \\",
];
const SIMILARITY_HEADER: &str = "Model & ROUGE-L & BLEU-4 & CodeBERTScore & GPTScore & ROUGE-L & BLEU-4 & CodeBERTScore & GPTScore & ROUGE-L & BLEU-4 & CodeBERTScore & GPTScore & ROUGE-L & BLEU-4 & CodeBERTScore & GPTScore";
const SIMILARITY_GROUPS: [&str; 5] = ["Context", "Code", "Code + AST", "Code + Design Doc", "Code + AST + Design Doc"];

fn latex_cells(row: &str) -> Vec<String> {
    row.trim().trim_end_matches("\\\\").split('&').map(|c| c.trim().to_string()).collect()
}

fn table_fidelity() -> Check {
    let models = ["o3", "o4-mini", "codestral-25.01", "deepseek-r1", "gpt-4o"];
    let mut reports = Vec::new();
    for (m, row) in models.iter().zip(SIMILARITY_ROWS) {
        let cells = latex_cells(row);
        for (s, setup) in Setup::ALL.into_iter().enumerate() {
            let v: Vec<f64> = cells[1 + 4 * s..5 + 4 * s].iter().map(|c| c.parse().unwrap()).collect();
            reports.push(MetricReport {
                unit_id: format!("{m}-{setup}"),
                model: m.to_string(),
                setup,
                rouge_l: v[0],
                bleu_4: v[1],
                embed_sim: Score::Value(v[2]),
                judge_score: Score::Value(v[3]),
                completeness: None,
                original_size: 0,
                categories: Default::default(),
            });
        }
    }
    reports.reverse();
    let t = table_similarity(&reports, Aggregate::Mean);
    ensure(t.groups == SIMILARITY_GROUPS, format!("groups {:?}", t.groups))?;
    ensure(t.header.join(" & ") == SIMILARITY_HEADER, format!("header {:?}", t.header))?;
    let rendered = t.render_latex_rows();
    ensure(rendered.len() == 5, format!("{} rows", rendered.len()))?;
    let mut cells = 0;
    for (got, want) in rendered.iter().zip(SIMILARITY_ROWS) {
        let (g, w) = (latex_cells(got), latex_cells(want));
        ensure(g == w, format!("row differs:\n  got  {got}\n  want {want}"))?;
        cells += g.len();
    }
    ensure(rendered[0].contains("0.38 & 0.22 & 0.81 & 0.83"), rendered[0].clone())?;

    let o3 = TimeRow {
        model: "o3".into(),
        cells: [Some(19.77), Some(24.68), Some(17.14), Some(24.0)],
        starred: [false, false, true, false],
    };
    ensure(o3.summary() == "19.77 / 24.68 / 17.14* / 24", o3.summary())?;
    Ok(format!("similarity table: {cells} cells identical; time row \"{}\"", o3.summary()))
}

// ---------------------------------------------------------------- classifier

fn classifier() -> Check {
    let cases = [
        ("// using calloc to create 0-initialization", "int *p=(int*)calloc(N, sizeof(int));", Category::Consistency),
        ("// Returns number of threads needed", "int num_threads(int num_processes, char allocation_type, task* processes);", Category::Irrelevance),
        ("/** Changes L-D orientation of amino acid by mirroring the bonds */", "void _flip_amino_acid(amino *A);", Category::DomainMapping),
        ("// no bounds checking on addr.", "int oapv_bsw_write_direct(void *addr, uint32_t val, int len);", Category::PossibleExceptions),
        ("/* Alternative: use memcpy when bytes>=4. */", "static int bsw_flush(oapv_bs_t *bs, int bytes);", Category::AlternativeSolutions),
        ("// dump_escaped defined in json.hpp:8514", "s.dump_escaped(original, ensure_ascii);", Category::Links),
        (
            "/* This function tests the dump_escaped method of the json::serializer class to ensure that strings are properly escaped as per JSON standards. */",
            "void check_escaped(const char* original, const char* escaped, const bool ensure_ascii);",
            Category::AlgorithmicDetails,
        ),
        ("// O(k log n) for k expired timers", "void uv__run_timers(uv_loop_t* loop);", Category::Complexity),
    ];
    let mut ok = 0;
    for (raw, code, want) in cases {
        let got = classify_rules(&comment_text(raw), code);
        ensure(got.contains(&want), format!("{raw:?} → {got:?}, expected {want:?}"))?;
        ok += 1;
    }
    Ok(format!("{ok}/8 examples labelled with their category"))
}

fn main() {
    // libtest flags such as --nocapture are accepted and ignored
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut prepared: Option<Result<Prepared, String>> = None;
    let mut checks: Vec<(&str, CheckFn)> = vec![
        ("metric oracle equivalence", Box::new(metric_oracle)),
        ("completeness ratio exactness", Box::new(completeness_exact)),
        ("comment stripper safety", Box::new(stripper_safety)),
        ("retrieval correctness", Box::new(retrieval)),
        ("AST condensation bounds", Box::new(ast_bounds)),
        (
            "end-to-end determinism",
            Box::new(move || match prepared.get_or_insert_with(prepare) {
                Ok(p) => determinism(p),
                Err(e) => Err(e.clone()),
            }),
        ),
        ("bias-gate mechanics", Box::new(bias_gate_mechanics)),
        ("chi-square fixture", Box::new(chi_square)),
        ("table fidelity", Box::new(table_fidelity)),
        ("classifier fixtures", Box::new(classifier)),
        ("desk-scale runtime", Box::new(runtime)),
    ];
    let mut failed = 0;
    let mut ran = 0;
    for (name, check) in checks.iter_mut() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let started = Instant::now();
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail} [{:.2?}]", started.elapsed()),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
