//! Experiment matrix orchestration and the aggregate tables, curves and CSVs
//! derived from it.

mod curve;
mod tables;
mod times;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::astx::CondensedAst;
use crate::classify::{classify_rules, CategoryLabel, CommentSource, Method};
use crate::corpus::{import_dataset, CodeUnit, CorpusError, SourceFile};
use crate::docstore::{query_for_unit, DocError, Index, Retriever};
use crate::embed::{Embedder, HashedOneHot};
use crate::evalkit::{
    bleu_4, completeness_ratio, embed_similarity, judge_score, normalized_size, rouge_l, EvalError, MetricReport,
};
use crate::llmclient::{
    provider_for, Client, GenParams, GeneratedComment, Limiter, LlmError, Provider, Registry, ResponseCache,
};
use crate::promptgen::{
    build_pass_prompt, plan_passes, target_code, ExemplarPool, PromptBundle, PromptError, PromptResources,
};
use crate::types::Setup;

pub use curve::{completeness_curve, curve_csv, curve_svg, CurvePoint};
pub use tables::{
    categories_csv, model_label, render_categories, similarity_csv, table_similarity, Aggregate, SimilarityTable,
    METRIC_LABELS,
};
pub use times::{
    format_minutes, read_times, time_analysis, times_csv, Binning, Reduction, StarTest, TimeRecord, TimeRow, TimeTable,
    TIME_COLUMNS,
};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("missing {what} at {path}; rebuild it with:\n  {rebuild}")]
    MissingArtifact {
        what: &'static str,
        path: String,
        rebuild: String,
    },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("{path}: missing column(s) {missing:?}; found {found:?}")]
    MissingColumns {
        path: String,
        missing: Vec<String>,
        found: Vec<String>,
    },
    #[error("{path}: {message}")]
    BadInput { path: String, message: String },
    #[error("i/o error on {0}: {1}")]
    Io(PathBuf, io::Error),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Doc(#[from] DocError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn default_setups() -> Vec<Setup> {
    Setup::ALL.to_vec()
}
fn default_budget() -> usize {
    8000
}
fn default_k() -> usize {
    5
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("runs")
}
fn default_parallelism() -> usize {
    4
}

/// Everything needed to reproduce a run. Relative paths are resolved against
/// the manifest's directory when loaded from a file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    /// Dataset written by `mine`.
    pub pairs: PathBuf,
    /// Index written by `index`; needed by the design-doc setups.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<PathBuf>,
    /// File or directory of condensed ASTs written by `ast`; needed by the AST setups.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asts: Option<PathBuf>,
    /// Only used to print rebuild commands.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repo_root: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub docs_dir: Option<PathBuf>,
    pub models: Vec<String>,
    #[serde(default = "default_setups")]
    pub setups: Vec<Setup>,
    /// Prompt budget in tokens.
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default)]
    pub seed: u64,
    /// Doc chunks retrieved per pass.
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub params: GenParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub registry: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exemplars: Option<PathBuf>,
    /// `hashed` selects the non-semantic test embedder; unset leaves the
    /// embedding score unavailable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedder: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judge: Option<String>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Manifest, ReportError> {
        let text = fs::read_to_string(path).map_err(|e| ReportError::Io(path.to_path_buf(), e))?;
        let mut m: Manifest =
            serde_json::from_str(&text).map_err(|e| ReportError::Manifest(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut m.pairs);
        fix(&mut m.out_dir);
        for p in [
            &mut m.index,
            &mut m.asts,
            &mut m.repo_root,
            &mut m.docs_dir,
            &mut m.registry,
            &mut m.exemplars,
            &mut m.cache_dir,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        Ok(m)
    }

    /// Digest of the manifest contents.
    pub fn run_id(&self) -> String {
        let json = serde_json::to_string(self).expect("manifest serializes");
        hex::encode(&Sha256::digest(json.as_bytes())[..6])
    }

    pub fn run_dir(&self) -> PathBuf {
        self.out_dir.join(self.run_id())
    }

    fn validate(&self) -> Result<(), ReportError> {
        if self.models.is_empty() {
            return Err(ReportError::Manifest("no models listed".into()));
        }
        if self.setups.is_empty() {
            return Err(ReportError::Manifest("no setups listed".into()));
        }
        if self.budget == 0 || self.k == 0 {
            return Err(ReportError::Manifest("budget and k must be positive".into()));
        }
        Ok(())
    }

    fn shown(p: &Option<PathBuf>, placeholder: &str) -> String {
        p.as_ref().map_or(placeholder.to_string(), |p| p.display().to_string())
    }

    /// Fails with the command that rebuilds the first missing artifact.
    pub fn check_artifacts(&self) -> Result<(), ReportError> {
        let root = Self::shown(&self.repo_root, "<repo>");
        if !self.pairs.is_file() {
            return Err(ReportError::MissingArtifact {
                what: "pairs dataset",
                path: self.pairs.display().to_string(),
                rebuild: format!("ccomment mine --root {root} --out {}", self.pairs.display()),
            });
        }
        if self.setups.iter().any(|s| s.uses_docs()) && !self.index.as_ref().is_some_and(|p| p.is_file()) {
            let out = Self::shown(&self.index, "index.bin");
            return Err(ReportError::MissingArtifact {
                what: "design-document index",
                path: out.clone(),
                rebuild: format!("ccomment index --docs {} --out {out}", Self::shown(&self.docs_dir, "<docs>")),
            });
        }
        if self.setups.iter().any(|s| s.uses_ast()) && !self.asts.as_ref().is_some_and(|p| p.exists()) {
            let out = Self::shown(&self.asts, "asts.json");
            return Err(ReportError::MissingArtifact {
                what: "condensed ASTs",
                path: out.clone(),
                rebuild: format!("ccomment ast --root {root} --budget {} --out {out}", self.budget / 4),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellFailure {
    pub model: String,
    pub setup: Setup,
    pub unit_id: String,
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounts {
    pub units: usize,
    pub cells: usize,
    pub prompts: usize,
    pub requests: usize,
    pub cache_hits: usize,
    pub reports: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRun {
    pub run_id: String,
    pub manifest: Manifest,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub counts: StageCounts,
}

/// Everything a run produced, in a deterministic order.
#[derive(Debug, Clone)]
pub struct MatrixOutput {
    pub run: ExperimentRun,
    pub generated: Vec<GeneratedComment>,
    pub reports: Vec<MetricReport>,
    pub labels: Vec<CategoryLabel>,
    pub failures: Vec<CellFailure>,
}

/// Overrides used by tests and offline runs.
#[derive(Default, Clone)]
pub struct RunOptions {
    /// Replaces the provider of every model in the matrix.
    pub provider: Option<Arc<dyn Provider>>,
}

fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis())
}

/// Loads condensed ASTs from a JSON file (a list) or a directory of them.
pub fn load_asts(path: &Path) -> Result<HashMap<String, CondensedAst>, ReportError> {
    let mut files = Vec::new();
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| ReportError::Io(path.to_path_buf(), e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        entries.sort();
        files.extend(entries);
    } else {
        files.push(path.to_path_buf());
    }
    let mut out = HashMap::new();
    for f in files {
        let text = fs::read_to_string(&f).map_err(|e| ReportError::Io(f.clone(), e))?;
        let asts: Vec<CondensedAst> = serde_json::from_str(&text).map_err(|e| ReportError::BadInput {
            path: f.display().to_string(),
            message: e.to_string(),
        })?;
        for a in asts {
            out.insert(a.unit_id.clone(), a);
        }
    }
    Ok(out)
}

/// The code block shown for a pass: comment-stripped units in file order.
pub fn pass_code(units: &[&CodeUnit]) -> String {
    units
        .iter()
        .map(|u| target_code(u, None))
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Groups units by (repo, path), keeping dataset order inside each file.
pub fn group_by_file(units: &[CodeUnit]) -> BTreeMap<(String, String), Vec<CodeUnit>> {
    let mut files: BTreeMap<(String, String), Vec<CodeUnit>> = BTreeMap::new();
    for u in units {
        files.entry((u.repo_id.clone(), u.path.clone())).or_default().push(u.clone());
    }
    for v in files.values_mut() {
        v.sort_by_key(|u| u.body_span.0);
    }
    files
}

pub fn make_embedder(name: Option<&str>) -> Result<Option<Arc<dyn Embedder>>, ReportError> {
    match name {
        None => Ok(None),
        Some("hashed") => Ok(Some(Arc::new(HashedOneHot::default()))),
        Some(other) => Err(ReportError::Manifest(format!(
            "unknown embedder `{other}` (only the non-semantic `hashed` test embedder is built in)"
        ))),
    }
}

/// Scores one generated comment against its unit's original comment.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_comment(
    g: &GeneratedComment,
    unit: &CodeUnit,
    pass_code: &str,
    file_size: usize,
    embedder: Option<&dyn Embedder>,
    judge: Option<&Client>,
) -> Result<MetricReport, EvalError> {
    let reference = unit.comment_text().unwrap_or("");
    let completeness = match &g.annotated_file {
        Some(a) => Some(completeness_ratio(a, pass_code)?),
        None => None,
    };
    let code = target_code(unit, None);
    Ok(MetricReport {
        unit_id: g.unit_id.clone(),
        model: g.model.clone(),
        setup: g.setup,
        rouge_l: rouge_l(&g.text, reference)?,
        bleu_4: bleu_4(&g.text, reference)?,
        embed_sim: embed_similarity(&g.text, reference, embedder),
        judge_score: judge_score(&g.text, &code, judge),
        completeness,
        original_size: file_size,
        categories: if g.empty {
            BTreeSet::new()
        } else {
            classify_rules(&g.text, &unit.code)
        },
    })
}

/// Room left for code once persona, fences and instruction are in, less a
/// tenth kept for context blocks.
pub fn code_budget(pool: &ExemplarPool, budget: usize) -> usize {
    let overhead = build_pass_prompt(&[], String::new(), 0, pool, Setup::Code, PromptResources::default(), usize::MAX)
        .map(|b| b.mandatory_tokens())
        .unwrap_or(0);
    budget.saturating_sub(overhead) * 9 / 10
}

/// Context sources for [`file_prompts`].
pub struct PromptContext<'a> {
    pub pool: &'a ExemplarPool,
    pub index: Option<&'a dyn Retriever>,
    pub asts: &'a HashMap<String, CondensedAst>,
    pub k: usize,
    pub budget: usize,
}

/// Builds every pass prompt of one file without running a model, so prior
/// comments are never carried. Units that cannot be prompted come back as
/// failures with the model left empty.
pub fn file_prompts(
    file_units: &[CodeUnit],
    setup: Setup,
    ctx: &PromptContext<'_>,
) -> (Vec<PromptBundle>, Vec<CellFailure>) {
    let mut bundles = Vec::new();
    let mut failures = Vec::new();
    let fail = |failures: &mut Vec<CellFailure>, units: &[&CodeUnit], stage: &str, message: String| {
        failures.extend(units.iter().map(|u| CellFailure {
            model: String::new(),
            setup,
            unit_id: u.id.clone(),
            stage: stage.to_string(),
            message: message.clone(),
        }))
    };
    let Some(first) = file_units.first() else {
        return (bundles, failures);
    };
    let file = SourceFile::in_memory(&first.repo_id, &first.path, "");
    let plan = match plan_passes(&file, file_units, code_budget(ctx.pool, ctx.budget)) {
        Ok(p) => p,
        Err(e) => {
            fail(&mut failures, &file_units.iter().collect::<Vec<_>>(), "plan", e.to_string());
            return (bundles, failures);
        }
    };
    for s in &plan.skipped {
        if let Some(u) = file_units.iter().find(|u| u.id == s.unit) {
            fail(&mut failures, &[u], "plan", s.diagnostic.clone());
        }
    }
    let by_id: HashMap<&str, &CodeUnit> = file_units.iter().map(|u| (u.id.as_str(), u)).collect();
    for pass in &plan.passes {
        let units: Vec<&CodeUnit> = pass.units.iter().map(|id| by_id[id.as_str()]).collect();
        let mut res = PromptResources::default();
        if setup.uses_ast() {
            match units.iter().map(|u| ctx.asts.get(&u.id).cloned()).collect::<Option<Vec<_>>>() {
                Some(a) => res.asts = a,
                None => {
                    fail(&mut failures, &units, "ast", "no condensed AST for a unit of this pass".into());
                    continue;
                }
            }
        }
        if setup.uses_docs() {
            let Some(index) = ctx.index else {
                fail(&mut failures, &units, "retrieve", "no index given".into());
                continue;
            };
            let query = units.iter().map(|u| query_for_unit(u)).collect::<Vec<_>>().join(" ");
            match index.retrieve(&query, ctx.k, None) {
                Ok(hits) => res.chunks = hits.iter().map(Into::into).collect(),
                Err(e) => {
                    fail(&mut failures, &units, "retrieve", e.to_string());
                    continue;
                }
            }
        }
        match build_pass_prompt(&units, pass_code(&units), pass.index, ctx.pool, setup, res, ctx.budget) {
            Ok(b) => bundles.push(b),
            Err(e) => fail(&mut failures, &units, "prompt", e.to_string()),
        }
    }
    (bundles, failures)
}

struct Cell<'a> {
    model: usize,
    setup: Setup,
    file: &'a [CodeUnit],
}

#[derive(Default)]
struct CellOutput {
    generated: Vec<GeneratedComment>,
    reports: Vec<MetricReport>,
    failures: Vec<CellFailure>,
    prompts: usize,
    requests: usize,
    cache_hits: usize,
}

struct Shared<'a> {
    clients: Vec<Client>,
    pool: ExemplarPool,
    index: Option<Index>,
    asts: HashMap<String, CondensedAst>,
    embedder: Option<Arc<dyn Embedder>>,
    judge: Option<Client>,
    manifest: &'a Manifest,
    code_budget: usize,
}

impl Shared<'_> {
    fn run_cell(&self, cell: &Cell<'_>) -> CellOutput {
        let client = &self.clients[cell.model];
        let model = client.spec.name.clone();
        let mut out = CellOutput::default();
        let fail = |out: &mut CellOutput, units: &[&CodeUnit], stage: &str, message: String| {
            for u in units {
                out.failures.push(CellFailure {
                    model: model.clone(),
                    setup: cell.setup,
                    unit_id: u.id.clone(),
                    stage: stage.to_string(),
                    message: message.clone(),
                });
            }
        };
        let first = &cell.file[0];
        let file = SourceFile::in_memory(&first.repo_id, &first.path, "");
        let file_size = normalized_size(&pass_code(&cell.file.iter().collect::<Vec<_>>())).unwrap_or(0);
        let plan = match plan_passes(&file, cell.file, self.code_budget) {
            Ok(p) => p,
            Err(e) => {
                fail(&mut out, &cell.file.iter().collect::<Vec<_>>(), "plan", e.to_string());
                return out;
            }
        };
        for s in &plan.skipped {
            if let Some(u) = cell.file.iter().find(|u| u.id == s.unit) {
                fail(&mut out, &[u], "plan", s.diagnostic.clone());
            }
        }
        let by_id: HashMap<&str, &CodeUnit> = cell.file.iter().map(|u| (u.id.as_str(), u)).collect();
        let judge = self.judge.as_ref();
        let embedder = self.embedder.as_deref();
        let mut prior: Vec<String> = Vec::new();
        for pass in &plan.passes {
            let units: Vec<&CodeUnit> = pass.units.iter().map(|id| by_id[id.as_str()]).collect();
            let code = pass_code(&units);
            let mut res = PromptResources {
                prior_comments: prior.clone(),
                ..Default::default()
            };
            if cell.setup.uses_ast() {
                match units.iter().map(|u| self.asts.get(&u.id).cloned()).collect::<Option<Vec<_>>>() {
                    Some(a) => res.asts = a,
                    None => {
                        let missing: Vec<&CodeUnit> =
                            units.iter().copied().filter(|u| !self.asts.contains_key(&u.id)).collect();
                        fail(&mut out, &missing, "ast", "no condensed AST for this unit".into());
                        let ok: Vec<&CodeUnit> =
                            units.iter().copied().filter(|u| self.asts.contains_key(&u.id)).collect();
                        fail(&mut out, &ok, "ast", "pass skipped: another unit lacks a condensed AST".into());
                        continue;
                    }
                }
            }
            if cell.setup.uses_docs() {
                let index = self.index.as_ref().expect("checked before the run");
                let query = units.iter().map(|u| query_for_unit(u)).collect::<Vec<_>>().join(" ");
                match index.retrieve(&query, self.manifest.k, None) {
                    Ok(hits) => res.chunks = hits.iter().map(Into::into).collect(),
                    Err(e) => {
                        fail(&mut out, &units, "retrieve", e.to_string());
                        continue;
                    }
                }
            }
            let bundle = match build_pass_prompt(&units, code.clone(), pass.index, &self.pool, cell.setup, res, self.manifest.budget) {
                Ok(b) => b,
                Err(e) => {
                    fail(&mut out, &units, "prompt", e.to_string());
                    continue;
                }
            };
            out.prompts += 1;
            let gens = match client.complete(&bundle, &units) {
                Ok(g) => g,
                Err(e) => {
                    fail(&mut out, &units, "complete", e.to_string());
                    continue;
                }
            };
            out.requests += 1;
            if gens.first().is_some_and(|g| g.cached) {
                out.cache_hits += 1;
            }
            for (g, u) in gens.into_iter().zip(&units) {
                if !g.empty {
                    prior.push(g.raw_comment.clone().unwrap_or_else(|| g.text.clone()));
                }
                match evaluate_comment(&g, u, &code, file_size, embedder, judge) {
                    Ok(r) => out.reports.push(r),
                    Err(e) => fail(&mut out, &[u], "evaluate", e.to_string()),
                }
                out.generated.push(g);
            }
        }
        out
    }
}

/// Runs every (model, setup, unit) cell of the manifest. Cell failures are
/// recorded and never stop the matrix; missing artifacts are fatal.
pub fn run_matrix(manifest: &Manifest, opts: &RunOptions) -> Result<MatrixOutput, ReportError> {
    let started = now_ms();
    manifest.validate()?;
    manifest.check_artifacts()?;

    let units: Vec<CodeUnit> = import_dataset(&manifest.pairs)?;
    let files = group_by_file(&units);
    let registry = match &manifest.registry {
        Some(p) => Registry::load(p)?,
        None => Registry::builtin(),
    };
    let cache_dir = manifest.cache_dir.clone().unwrap_or_else(|| manifest.out_dir.join("cache"));
    let cache = ResponseCache::new(cache_dir);
    let limiter = Limiter::new(manifest.parallelism);
    let make_client = |name: &str| -> Result<Client, ReportError> {
        let spec = registry.get(name)?.clone();
        let provider = match &opts.provider {
            Some(p) => p.clone(),
            None => provider_for(&spec)?,
        };
        Ok(Client::new(spec, provider)
            .with_cache(cache.clone())
            .with_limiter(limiter.clone())
            .with_params(manifest.params))
    };
    let clients = manifest.models.iter().map(|m| make_client(m)).collect::<Result<Vec<_>, _>>()?;
    let judge = manifest.judge.as_deref().map(make_client).transpose()?;
    let pool = match &manifest.exemplars {
        Some(p) => ExemplarPool::load(p, manifest.seed)?,
        None => ExemplarPool::builtin().with_seed(manifest.seed),
    };
    let index = match (&manifest.index, manifest.setups.iter().any(|s| s.uses_docs())) {
        (Some(p), true) => Some(Index::load(p)?),
        _ => None,
    };
    let asts = match (&manifest.asts, manifest.setups.iter().any(|s| s.uses_ast())) {
        (Some(p), true) => load_asts(p)?,
        _ => HashMap::new(),
    };

    let code_budget = code_budget(&pool, manifest.budget);

    let shared = Shared {
        clients,
        pool,
        index,
        asts,
        embedder: make_embedder(manifest.embedder.as_deref())?,
        judge,
        manifest,
        code_budget,
    };
    let mut cells = Vec::new();
    for model in 0..manifest.models.len() {
        for &setup in &manifest.setups {
            for file in files.values() {
                cells.push(Cell { model, setup, file });
            }
        }
    }
    let threads = rayon::ThreadPoolBuilder::new()
        .num_threads(manifest.parallelism.max(1))
        .build()
        .map_err(|e| ReportError::Manifest(e.to_string()))?;
    let outputs: Vec<CellOutput> = threads.install(|| cells.par_iter().map(|c| shared.run_cell(c)).collect());

    let mut counts = StageCounts {
        units: units.len(),
        cells: units.len() * manifest.models.len() * manifest.setups.len(),
        ..Default::default()
    };
    let (mut generated, mut reports, mut failures) = (Vec::new(), Vec::new(), Vec::new());
    for o in outputs {
        counts.prompts += o.prompts;
        counts.requests += o.requests;
        counts.cache_hits += o.cache_hits;
        generated.extend(o.generated);
        reports.extend(o.reports);
        failures.extend(o.failures);
    }
    generated.sort_by(|a, b| (&a.model, a.setup, &a.unit_id).cmp(&(&b.model, b.setup, &b.unit_id)));
    reports.sort_by(|a, b| (&a.model, a.setup, &a.unit_id).cmp(&(&b.model, b.setup, &b.unit_id)));
    failures.sort_by(|a, b| (&a.model, a.setup, &a.unit_id).cmp(&(&b.model, b.setup, &b.unit_id)));
    counts.reports = reports.len();
    counts.failures = failures.len();

    let mut labels: Vec<CategoryLabel> = units
        .iter()
        .filter_map(|u| {
            u.comment_text().map(|c| CategoryLabel {
                unit_id: u.id.clone(),
                source: CommentSource::Original,
                setup: None,
                model: None,
                categories: classify_rules(c, &u.code),
                method: Method::Rules,
            })
        })
        .collect();
    labels.sort_by(|a, b| a.unit_id.cmp(&b.unit_id));
    labels.extend(reports.iter().map(|r| CategoryLabel {
        unit_id: r.unit_id.clone(),
        source: CommentSource::Generated,
        setup: Some(r.setup),
        model: Some(r.model.clone()),
        categories: r.categories.clone(),
        method: Method::Rules,
    }));

    Ok(MatrixOutput {
        run: ExperimentRun {
            run_id: manifest.run_id(),
            manifest: manifest.clone(),
            started_unix_ms: started,
            finished_unix_ms: now_ms(),
            counts,
        },
        generated,
        reports,
        labels,
        failures,
    })
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), ReportError> {
    let err = |e| ReportError::Io(path.to_path_buf(), e);
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(err)?;
    }
    let mut w = io::BufWriter::new(fs::File::create(path).map_err(err)?);
    for it in items {
        writeln!(w, "{}", serde_json::to_string(it).expect("records serialize")).map_err(err)?;
    }
    w.flush().map_err(err)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, ReportError> {
    let f = fs::File::open(path).map_err(|e| ReportError::Io(path.to_path_buf(), e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| ReportError::Io(path.to_path_buf(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| ReportError::BadInput {
            path: path.display().to_string(),
            message: format!("line {}: {e}", i + 1),
        })?);
    }
    Ok(out)
}

impl MatrixOutput {
    /// Writes run.json and the per-record JSONL files into `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), ReportError> {
        fs::create_dir_all(dir).map_err(|e| ReportError::Io(dir.to_path_buf(), e))?;
        let run = serde_json::to_string_pretty(&self.run).expect("run serializes");
        fs::write(dir.join("run.json"), run).map_err(|e| ReportError::Io(dir.join("run.json"), e))?;
        write_jsonl(&dir.join("generated.jsonl"), &self.generated)?;
        write_jsonl(&dir.join("reports.jsonl"), &self.reports)?;
        write_jsonl(&dir.join("labels.jsonl"), &self.labels)?;
        write_jsonl(&dir.join("failures.jsonl"), &self.failures)
    }
}

/// Output files of `write_report`.
pub const REPORT_FILES: [&str; 4] = ["similarity.csv", "completeness.csv", "categories.csv", "times.csv"];

/// Renders the CSVs, the completeness plot and the plain-text tables of a
/// saved run into `out`.
pub fn write_report(
    run_dir: &Path,
    out: &Path,
    times: Option<&Path>,
    binning: Binning,
) -> Result<Vec<PathBuf>, ReportError> {
    let reports: Vec<MetricReport> = read_jsonl(&run_dir.join("reports.jsonl"))?;
    let labels: Vec<CategoryLabel> = read_jsonl(&run_dir.join("labels.jsonl"))?;
    let time_tables = match times {
        Some(p) => time_analysis(&read_times(p)?, binning),
        None => Vec::new(),
    };
    fs::create_dir_all(out).map_err(|e| ReportError::Io(out.to_path_buf(), e))?;
    let curve = completeness_curve(&reports);
    let mean = table_similarity(&reports, Aggregate::Mean);
    let median = table_similarity(&reports, Aggregate::Median);
    let mut text = format!(
        "Similarity (mean)\n{}\nSimilarity (median)\n{}\nComment categories (%)\n{}",
        mean.render_text(),
        median.render_text(),
        render_categories(&labels)
    );
    for t in &time_tables {
        text.push_str(&format!("\nTime taken, {} (mean minutes)\n{}", t.task, t.render_text()));
    }
    let files: [(&str, String); 6] = [
        ("similarity.csv", similarity_csv(&reports)?),
        ("completeness.csv", curve_csv(&curve)?),
        ("categories.csv", categories_csv(&labels)?),
        ("times.csv", times_csv(&time_tables)?),
        ("completeness.svg", curve_svg(&curve)),
        ("tables.txt", text),
    ];
    let mut written = Vec::new();
    for (name, body) in files {
        let p = out.join(name);
        fs::write(&p, body).map_err(|e| ReportError::Io(p.clone(), e))?;
        written.push(p);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_pairs_names_rebuild_command() {
        let m: Manifest = serde_json::from_str(
            r#"{"pairs": "/nope/pairs.jsonl", "repo_root": "/src/libuv", "models": ["mock"]}"#,
        )
        .unwrap();
        let err = run_matrix(&m, &RunOptions::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("ccomment mine --root /src/libuv --out /nope/pairs.jsonl"), "{msg}");
    }

    #[test]
    fn missing_index_for_doc_setups() {
        let d = tempfile::tempdir().unwrap();
        let pairs = d.path().join("pairs.jsonl");
        fs::write(&pairs, "").unwrap();
        let m = Manifest {
            setups: vec![Setup::CodeDoc],
            ..serde_json::from_value(serde_json::json!({"pairs": pairs, "models": ["mock"]})).unwrap()
        };
        match m.check_artifacts() {
            Err(ReportError::MissingArtifact { what, rebuild, .. }) => {
                assert_eq!(what, "design-document index");
                assert!(rebuild.starts_with("ccomment index --docs"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn run_id_tracks_manifest() {
        let a: Manifest = serde_json::from_str(r#"{"pairs": "p", "models": ["mock"]}"#).unwrap();
        let b = Manifest { seed: 1, ..a.clone() };
        assert_eq!(a.run_id(), a.clone().run_id());
        assert_ne!(a.run_id(), b.run_id());
        assert_eq!(a.run_id().len(), 12);
    }
}
