use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use log::{info, warn};

use ccomment_core::astx::{condense, dump_many, recover_flags, AstCache, BuildFlags, CondensedAst, ToolTemplate};
use ccomment_core::classify::{classify_comment, CategoryLabel, Classifier, CommentSource, Method};
use ccomment_core::corpus::{
    default_repo_id, export_dataset, extract_pairs, import_dataset, mine_repo, scan_repo, CodeUnit, ScanConfig,
};
use ccomment_core::docstore::{
    build_index, chunk_doc, load_docs, DocType, Index, OkapiParams, Retriever, DEFAULT_CHUNK_SIZE, DEFAULT_OVERLAP,
};
use ccomment_core::evalkit::{normalized_size, MetricReport, Score};
use ccomment_core::llmclient::{provider_for, Client, GeneratedComment, Limiter, Registry, ResponseCache};
use ccomment_core::promptgen::{ExemplarPool, PromptBundle};
use ccomment_core::report::{
    evaluate_comment, file_prompts, group_by_file, load_asts, make_embedder, pass_code, read_jsonl, read_times,
    run_matrix, time_analysis, write_jsonl, write_report, Binning, Manifest, PromptContext, RunOptions,
};
use ccomment_core::Setup;

#[derive(Parser)]
#[command(name = "ccomment", version, about = "Generate and evaluate C/C++ code comments with design-document context")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Mine function/comment pairs from a repository.
    Mine {
        #[arg(long)]
        root: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Extra ignore globs, on top of build/ and vendored directories.
        #[arg(long)]
        ignore: Vec<String>,
        #[arg(long)]
        repo_id: Option<String>,
        /// Keep uncommented functions too.
        #[arg(long)]
        all_units: bool,
    },
    /// Dump and condense the AST of every function.
    Ast {
        #[arg(long, default_value = ".")]
        root: PathBuf,
        /// Restrict to these files (relative to the root or absolute).
        #[arg(long)]
        file: Vec<PathBuf>,
        #[arg(long)]
        makefile: Option<PathBuf>,
        /// CFLAGS used instead of a makefile, e.g. for CMake projects.
        #[arg(long = "override")]
        override_flags: Option<String>,
        #[arg(long, default_value_t = 1024)]
        budget: usize,
        #[arg(long, default_value = ccomment_core::astx::DEFAULT_TOOL)]
        tool: String,
        #[arg(long)]
        cache: Option<PathBuf>,
        #[arg(long)]
        repo_id: Option<String>,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Chunk and index a directory of design documents.
    Index {
        #[arg(long)]
        docs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_CHUNK_SIZE)]
        chunk_size: usize,
        #[arg(long, default_value_t = DEFAULT_OVERLAP)]
        overlap: usize,
    },
    /// Query an index.
    Query {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        text: String,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long)]
        doc_type: Option<DocType>,
    },
    /// Build pass prompts for one setup.
    Prompt {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long)]
        ast: Option<PathBuf>,
        #[arg(long)]
        setup: Setup,
        #[arg(long, default_value_t = 8000)]
        budget: usize,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        exemplars: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Send prompts to a model.
    Generate {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        prompts: PathBuf,
        #[arg(long)]
        model: String,
        /// Model registry JSON; the built-in registry is used otherwise.
        #[arg(long)]
        models: Option<PathBuf>,
        #[arg(long)]
        cache: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        parallelism: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score generated comments against the originals.
    Evaluate {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        generated: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        embedder: Option<String>,
        #[arg(long)]
        judge: Option<String>,
        #[arg(long)]
        models: Option<PathBuf>,
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Assign usefulness categories to comments.
    Classify {
        #[arg(long)]
        generated: PathBuf,
        /// Needed for the code the rules compare against.
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long, default_value = "rules")]
        method: Method,
        #[arg(long)]
        judge: Option<String>,
        #[arg(long)]
        models: Option<PathBuf>,
        #[arg(long)]
        cache: Option<PathBuf>,
        /// Also label the original comments.
        #[arg(long)]
        originals: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Significance tests over user-study times.
    Stats {
        #[arg(long)]
        times: PathBuf,
        #[arg(long, default_value = "chi2")]
        test: String,
        #[arg(long, default_value = "no-comment-median")]
        binning: Binning,
    },
    /// Run a whole experiment matrix.
    Run {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Render tables and CSVs of a saved run.
    Report {
        #[arg(long)]
        run: String,
        #[arg(long, default_value = "runs")]
        runs_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        times: Option<PathBuf>,
        #[arg(long, default_value = "no-comment-median")]
        binning: Binning,
    },
}

fn registry(path: Option<&Path>) -> Result<Registry> {
    Ok(match path {
        Some(p) => Registry::load(p)?,
        None => Registry::builtin(),
    })
}

fn client(reg: &Registry, name: &str, cache: Option<&Path>) -> Result<Client> {
    let spec = reg.get(name)?.clone();
    let provider = provider_for(&spec)?;
    let mut c = Client::new(spec, provider);
    if let Some(dir) = cache {
        c = c.with_cache(ResponseCache::new(dir));
    }
    Ok(c)
}

fn units_by_id(pairs: &Path) -> Result<HashMap<String, CodeUnit>> {
    let units = import_dataset(pairs).with_context(|| format!("reading {}", pairs.display()))?;
    Ok(units.into_iter().map(|u| (u.id.clone(), u)).collect())
}

fn write_csv(out: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(out).with_context(|| format!("creating {}", out.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

fn score_cell(s: &Score) -> String {
    s.value().map_or(String::new(), |v| format!("{v:.6}"))
}

/// Columns of `evaluate`'s CSV.
const REPORT_COLUMNS: [&str; 10] = [
    "unit_id",
    "model",
    "setup",
    "rouge_l",
    "bleu_4",
    "embed_sim",
    "judge_score",
    "completeness",
    "original_size",
    "categories",
];

fn report_row(r: &MetricReport) -> Vec<String> {
    vec![
        r.unit_id.clone(),
        r.model.clone(),
        r.setup.key().to_string(),
        format!("{:.6}", r.rouge_l),
        format!("{:.6}", r.bleu_4),
        score_cell(&r.embed_sim),
        score_cell(&r.judge_score),
        r.completeness.map_or(String::new(), |c| format!("{c:.6}")),
        r.original_size.to_string(),
        r.categories.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(";"),
    ]
}

fn cmd_mine(root: &Path, out: &Path, ignore: Vec<String>, repo_id: Option<String>, all_units: bool) -> Result<()> {
    let config = ScanConfig {
        repo_id,
        ..ScanConfig::default().with_extra_ignores(ignore)
    };
    let report = mine_repo(root, &config)?;
    for d in &report.diagnostics {
        warn!("{d}");
    }
    let units: Vec<CodeUnit> = if all_units {
        report.units
    } else {
        report.units.into_iter().filter(CodeUnit::has_comment).collect()
    };
    let n = export_dataset(&units, out)?;
    println!("{} files, {n} pairs -> {}", report.files, out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_ast(
    root: &Path,
    only: &[PathBuf],
    makefile: Option<&Path>,
    override_flags: Option<&str>,
    budget: usize,
    tool: String,
    cache: Option<&Path>,
    repo_id: Option<String>,
    jobs: usize,
    out: &Path,
) -> Result<()> {
    let flags = match (makefile, override_flags) {
        (Some(m), _) => {
            let r = recover_flags(m);
            for w in &r.warnings {
                warn!("{w}");
            }
            r.flags
        }
        (None, Some(o)) => {
            let (f, warnings) = BuildFlags::from_override(o, "");
            for w in &warnings {
                warn!("{w}");
            }
            f
        }
        (None, None) => BuildFlags::empty(),
    };
    let config = ScanConfig {
        repo_id,
        ..ScanConfig::default()
    };
    let mut files = scan_repo(root, &config)?.files;
    if !only.is_empty() {
        let wanted: Vec<PathBuf> = only
            .iter()
            .map(|p| {
                let p = if p.is_absolute() { p.clone() } else { root.join(p) };
                p.canonicalize().unwrap_or(p)
            })
            .collect();
        files.retain(|f| {
            let abs = f.abs_path.canonicalize().unwrap_or_else(|_| f.abs_path.clone());
            wanted.contains(&abs)
        });
        if files.is_empty() {
            bail!("none of the given files is a C/C++ source under {}", root.display());
        }
    }
    let cache = cache.map(AstCache::new);
    let dumps = dump_many(&files, &flags, &ToolTemplate(tool), cache.as_ref(), jobs);
    let mut asts: Vec<CondensedAst> = Vec::new();
    let mut failed = 0;
    for (file, dump) in files.iter().zip(dumps) {
        let raw = match dump {
            Ok(r) => r,
            Err(e) => {
                warn!("{}: {e}", file.path);
                failed += 1;
                continue;
            }
        };
        for unit in extract_pairs(file)? {
            match condense(&raw, &unit, budget) {
                Ok(a) => asts.push(a),
                Err(e) => warn!("{}: {e}", unit.id),
            }
        }
    }
    asts.sort_by(|a, b| a.unit_id.cmp(&b.unit_id));
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(out, serde_json::to_string(&asts)?)?;
    println!("{} condensed ASTs from {} files ({failed} failed) -> {}", asts.len(), files.len(), out.display());
    Ok(())
}

fn cmd_index(docs: &Path, out: &Path, size: usize, overlap: usize) -> Result<()> {
    let (docs, warnings) = load_docs(docs)?;
    for w in &warnings {
        warn!("{w}");
    }
    let mut chunks = Vec::new();
    for d in &docs {
        chunks.extend(chunk_doc(d, size, overlap)?);
    }
    let n = chunks.len();
    let index = build_index(chunks, OkapiParams::default())?;
    index.save(out)?;
    println!("{} documents, {n} chunks -> {}", docs.len(), out.display());
    Ok(())
}

fn cmd_query(index: &Path, text: &str, k: usize, doc_type: Option<DocType>) -> Result<()> {
    let index = Index::load(index)?;
    for h in index.retrieve(text, k, doc_type)? {
        let preview: String = h.chunk.text.chars().take(80).collect();
        println!("{:.4}\t{}\t{}\t{}", h.score, h.chunk.chunk_id, h.chunk.doc_type, preview.replace('\n', " "));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_prompt(
    pairs: &Path,
    index: Option<&Path>,
    ast: Option<&Path>,
    setup: Setup,
    budget: usize,
    k: usize,
    seed: u64,
    exemplars: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let units = import_dataset(pairs)?;
    let pool = match exemplars {
        Some(p) => ExemplarPool::load(p, seed)?,
        None => ExemplarPool::builtin().with_seed(seed),
    };
    let index = match (index, setup.uses_docs()) {
        (Some(p), true) => Some(Index::load(p)?),
        (None, true) => bail!("setup {setup} needs --index (build it with `ccomment index`)"),
        _ => None,
    };
    let asts = match (ast, setup.uses_ast()) {
        (Some(p), true) => load_asts(p)?,
        (None, true) => bail!("setup {setup} needs --ast (build it with `ccomment ast`)"),
        _ => HashMap::new(),
    };
    let ctx = PromptContext {
        pool: &pool,
        index: index.as_ref().map(|i| i as &dyn Retriever),
        asts: &asts,
        k,
        budget,
    };
    let mut bundles = Vec::new();
    for file in group_by_file(&units).values() {
        let (b, failures) = file_prompts(file, setup, &ctx);
        for f in failures {
            warn!("{} [{}]: {}", f.unit_id, f.stage, f.message);
        }
        bundles.extend(b);
    }
    write_jsonl(out, &bundles)?;
    println!("{} prompts -> {}", bundles.len(), out.display());
    Ok(())
}

fn cmd_generate(
    pairs: &Path,
    prompts: &Path,
    model: &str,
    models: Option<&Path>,
    cache: Option<&Path>,
    parallelism: usize,
    out: &Path,
) -> Result<()> {
    use rayon::prelude::*;

    let units = units_by_id(pairs)?;
    let bundles: Vec<PromptBundle> = read_jsonl(prompts)?;
    let reg = registry(models)?;
    let client = client(&reg, model, cache)?.with_limiter(Limiter::new(parallelism.max(1)));
    let results: Vec<Result<Vec<GeneratedComment>>> = bundles
        .par_iter()
        .map(|b| {
            let targets = b
                .targets
                .iter()
                .map(|id| units.get(id).with_context(|| format!("unit {id} is not in the pairs file")))
                .collect::<Result<Vec<_>>>()?;
            Ok(client.complete(b, &targets)?)
        })
        .collect();
    let mut generated = Vec::new();
    let mut failed = 0;
    for (b, r) in bundles.iter().zip(results) {
        match r {
            Ok(g) => generated.extend(g),
            Err(e) => {
                failed += 1;
                warn!("pass {} of {}: {e:#}", b.pass_index, b.targets.join(","));
            }
        }
    }
    write_jsonl(out, &generated)?;
    println!("{} comments from {} prompts ({failed} failed) -> {}", generated.len(), bundles.len(), out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_evaluate(
    pairs: &Path,
    generated: &Path,
    out: &Path,
    embedder: Option<&str>,
    judge: Option<&str>,
    models: Option<&Path>,
    cache: Option<&Path>,
) -> Result<()> {
    let all = import_dataset(pairs)?;
    let units: HashMap<&str, &CodeUnit> = all.iter().map(|u| (u.id.as_str(), u)).collect();
    let file_sizes: HashMap<(String, String), usize> = group_by_file(&all)
        .into_iter()
        .map(|(k, us)| {
            let size = normalized_size(&pass_code(&us.iter().collect::<Vec<_>>())).unwrap_or(0);
            (k, size)
        })
        .collect();
    let gens: Vec<GeneratedComment> = read_jsonl(generated)?;
    let embedder = make_embedder(embedder)?;
    let judge = match judge {
        Some(name) => Some(client(&registry(models)?, name, cache)?),
        None => None,
    };

    // Passes are recovered from (model, setup, file, pass index).
    let mut passes: BTreeMap<(String, Setup, String, String, usize), Vec<&CodeUnit>> = BTreeMap::new();
    for g in &gens {
        let Some(u) = units.get(g.unit_id.as_str()) else {
            bail!("unit {} is not in the pairs file", g.unit_id);
        };
        passes
            .entry((g.model.clone(), g.setup, u.repo_id.clone(), u.path.clone(), g.pass_index))
            .or_default()
            .push(u);
    }
    let mut codes: HashMap<(String, Setup, String, String, usize), String> = HashMap::new();
    for (k, us) in passes.iter_mut() {
        us.sort_by_key(|u| u.body_span.0);
        codes.insert(k.clone(), pass_code(us));
    }

    let mut rows = Vec::new();
    for g in &gens {
        let u = units[g.unit_id.as_str()];
        let key = (g.model.clone(), g.setup, u.repo_id.clone(), u.path.clone(), g.pass_index);
        let size = file_sizes[&(u.repo_id.clone(), u.path.clone())];
        match evaluate_comment(g, u, &codes[&key], size, embedder.as_deref(), judge.as_ref()) {
            Ok(r) => rows.push(report_row(&r)),
            Err(e) => warn!("{}: {e}", g.unit_id),
        }
    }
    let n = rows.len();
    write_csv(out, &REPORT_COLUMNS, rows)?;
    println!("{n} reports -> {}", out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_classify(
    generated: &Path,
    pairs: &Path,
    method: Method,
    judge: Option<&str>,
    models: Option<&Path>,
    cache: Option<&Path>,
    originals: bool,
    out: &Path,
) -> Result<()> {
    let units = units_by_id(pairs)?;
    let gens: Vec<GeneratedComment> = read_jsonl(generated)?;
    let judge_client = match method {
        Method::Rules => None,
        Method::Judge => {
            let name = judge.context("--method judge needs --judge <model>")?;
            Some(client(&registry(models)?, name, cache)?)
        }
    };
    let classifier = match &judge_client {
        Some(c) => Classifier::Judge(c),
        None => Classifier::Rules,
    };
    let mut labels: Vec<CategoryLabel> = Vec::new();
    if originals {
        let mut ids: Vec<&String> = units.keys().collect();
        ids.sort();
        for id in ids {
            let u = &units[id];
            if let Some(c) = u.comment_text() {
                labels.push(classify_comment(id, CommentSource::Original, c, &u.code, classifier)?);
            }
        }
    }
    for g in gens.iter().filter(|g| !g.empty) {
        let u = units
            .get(&g.unit_id)
            .with_context(|| format!("unit {} is not in the pairs file", g.unit_id))?;
        let mut l = classify_comment(&g.unit_id, CommentSource::Generated, &g.text, &u.code, classifier)?;
        l.setup = Some(g.setup);
        l.model = Some(g.model.clone());
        labels.push(l);
    }
    let n = labels.len();
    write_csv(
        out,
        &["unit_id", "source", "model", "setup", "method", "categories"],
        labels.into_iter().map(|l| {
            vec![
                l.unit_id.clone(),
                format!("{:?}", l.source).to_lowercase(),
                l.model.clone().unwrap_or_default(),
                l.setup.map_or(String::new(), |s| s.key().to_string()),
                format!("{:?}", l.method).to_lowercase(),
                l.categories.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(";"),
            ]
        }),
    )?;
    println!("{n} labels -> {}", out.display());
    Ok(())
}

fn cmd_stats(times: &Path, test: &str, binning: Binning) -> Result<()> {
    if test != "chi2" {
        bail!("unknown test `{test}` (supported: chi2)");
    }
    for t in time_analysis(&read_times(times)?, binning) {
        println!("{}\n{}", t.task, t.render_text());
    }
    Ok(())
}

fn cmd_run(manifest: &Path) -> Result<()> {
    let m = Manifest::load(manifest)?;
    let out = run_matrix(&m, &RunOptions::default())?;
    let dir = m.run_dir();
    out.save(&dir)?;
    let c = &out.run.counts;
    info!(
        "{} units, {} prompts, {} requests ({} cached), {} failures",
        c.units, c.prompts, c.requests, c.cache_hits, c.failures
    );
    println!("{}", out.run.run_id);
    Ok(())
}

fn cmd_report(run: &str, runs_dir: &Path, out: &Path, times: Option<&Path>, binning: Binning) -> Result<()> {
    let dir = runs_dir.join(run);
    if !dir.join("run.json").is_file() {
        bail!("no run {run} under {} (start one with `ccomment run --manifest <file>`)", runs_dir.display());
    }
    for p in write_report(&dir, out, times, binning)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().cmd {
        Cmd::Mine {
            root,
            out,
            ignore,
            repo_id,
            all_units,
        } => cmd_mine(&root, &out, ignore, repo_id.or_else(|| Some(default_repo_id(&root))), all_units),
        Cmd::Ast {
            root,
            file,
            makefile,
            override_flags,
            budget,
            tool,
            cache,
            repo_id,
            jobs,
            out,
        } => cmd_ast(
            &root,
            &file,
            makefile.as_deref(),
            override_flags.as_deref(),
            budget,
            tool,
            cache.as_deref(),
            repo_id,
            jobs,
            &out,
        ),
        Cmd::Index {
            docs,
            out,
            chunk_size,
            overlap,
        } => cmd_index(&docs, &out, chunk_size, overlap),
        Cmd::Query { index, text, k, doc_type } => cmd_query(&index, &text, k, doc_type),
        Cmd::Prompt {
            pairs,
            index,
            ast,
            setup,
            budget,
            k,
            seed,
            exemplars,
            out,
        } => cmd_prompt(&pairs, index.as_deref(), ast.as_deref(), setup, budget, k, seed, exemplars.as_deref(), &out),
        Cmd::Generate {
            pairs,
            prompts,
            model,
            models,
            cache,
            parallelism,
            out,
        } => cmd_generate(&pairs, &prompts, &model, models.as_deref(), cache.as_deref(), parallelism, &out),
        Cmd::Evaluate {
            pairs,
            generated,
            out,
            embedder,
            judge,
            models,
            cache,
        } => cmd_evaluate(
            &pairs,
            &generated,
            &out,
            embedder.as_deref(),
            judge.as_deref(),
            models.as_deref(),
            cache.as_deref(),
        ),
        Cmd::Classify {
            generated,
            pairs,
            method,
            judge,
            models,
            cache,
            originals,
            out,
        } => cmd_classify(
            &generated,
            &pairs,
            method,
            judge.as_deref(),
            models.as_deref(),
            cache.as_deref(),
            originals,
            &out,
        ),
        Cmd::Stats { times, test, binning } => cmd_stats(&times, &test, binning),
        Cmd::Run { manifest } => cmd_run(&manifest),
        Cmd::Report {
            run,
            runs_dir,
            out,
            times,
            binning,
        } => cmd_report(&run, &runs_dir, &out, times.as_deref(), binning),
    }
}
