use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::LazyLock;

use rayon::prelude::*;
use regex::Regex;
use sha2::{Digest, Sha256};

use crate::corpus::SourceFile;

use super::{AstError, BuildFlags};

/// Reference invocation for a clang-compatible frontend.
pub const DEFAULT_TOOL: &str = "clang -Xclang -ast-dump=json -fsyntax-only {flags} {file}";

/// Command template with `{file}` and `{flags}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolTemplate(pub String);

impl Default for ToolTemplate {
    fn default() -> Self {
        ToolTemplate(DEFAULT_TOOL.to_string())
    }
}

impl ToolTemplate {
    pub fn argv(&self, file: &Path, flags: &BuildFlags) -> Result<Vec<String>, AstError> {
        let words = shlex::split(&self.0).ok_or_else(|| AstError::BadTemplate(self.0.clone()))?;
        if words.is_empty() {
            return Err(AstError::BadTemplate(self.0.clone()));
        }
        let file = file.to_string_lossy();
        let mut argv = Vec::new();
        for w in words {
            if w == "{flags}" {
                argv.extend(flags.all());
            } else {
                argv.push(w.replace("{file}", &file));
            }
        }
        Ok(argv)
    }
}

/// A frontend's JSON dump for one translation unit.
#[derive(Debug, Clone)]
pub struct RawAst {
    pub text: String,
    pub root: serde_json::Value,
}

impl RawAst {
    pub fn parse(text: String) -> Result<RawAst, AstError> {
        match serde_json::from_str(&text) {
            Ok(root) => Ok(RawAst { text, root }),
            Err(e) => Err(AstError::MalformedDump {
                offset: byte_offset(&text, e.line(), e.column()),
                message: e.to_string(),
            }),
        }
    }
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let line_start: usize = text
        .split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

/// On-disk store of raw dumps keyed by (file digest, flags digest).
#[derive(Debug, Clone)]
pub struct AstCache {
    dir: PathBuf,
}

impl AstCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        AstCache { dir: dir.into() }
    }

    pub fn key(content: &str, argv_without_file: &[String]) -> String {
        let file_digest = hex::encode(Sha256::digest(content.as_bytes()));
        let mut h = Sha256::new();
        for a in argv_without_file {
            h.update(a.as_bytes());
            h.update([0u8]);
        }
        format!("{}-{}", &file_digest[..32], &hex::encode(h.finalize())[..32])
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Option<String> {
        fs::read_to_string(self.path(key)).ok()
    }

    pub fn put(&self, key: &str, text: &str) -> Result<(), AstError> {
        fs::create_dir_all(&self.dir).map_err(|e| AstError::Io(self.dir.clone(), e))?;
        let tmp = self.dir.join(format!(".{key}.tmp{}", std::process::id()));
        fs::write(&tmp, text).map_err(|e| AstError::Io(tmp.clone(), e))?;
        fs::rename(&tmp, self.path(key)).map_err(|e| AstError::Io(self.path(key), e))
    }
}

/// Runs the frontend on `file` and parses its JSON dump.
pub fn dump_ast(
    file: &SourceFile,
    flags: &BuildFlags,
    tool: &ToolTemplate,
    cache: Option<&AstCache>,
) -> Result<RawAst, AstError> {
    let abs = file.abs_path.canonicalize().unwrap_or_else(|_| file.abs_path.clone());
    let argv = tool.argv(&abs, flags)?;
    let file_str = abs.to_string_lossy().to_string();
    let key_argv: Vec<String> = argv.iter().filter(|a| !a.contains(&file_str)).cloned().collect();
    let key = AstCache::key(&file.content, &key_argv);
    if let Some(text) = cache.and_then(|c| c.get(&key)) {
        if let Ok(raw) = RawAst::parse(text) {
            return Ok(raw);
        }
    }

    let workdir = flags
        .workdir
        .clone()
        .or_else(|| abs.parent().map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from("."));
    let output = Command::new(&argv[0])
        .args(&argv[1..])
        .current_dir(&workdir)
        .output()
        .map_err(|e| AstError::ToolUnavailable(argv[0].clone(), e.to_string()))?;
    if !output.status.success() {
        return Err(AstError::ToolFailed {
            status: output.status.code(),
            stderr: String::from_utf8_lossy(&output.stderr).into_owned(),
        });
    }
    let text = renumber_ids(&String::from_utf8_lossy(&output.stdout));
    let raw = RawAst::parse(text)?;
    if let Some(c) = cache {
        c.put(&key, &raw.text)?;
    }
    Ok(raw)
}

static ADDRESS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#""0x[0-9a-f]+""#).unwrap());

/// Node ids in a clang dump are heap addresses, which change from run to run.
/// They are replaced by sequence numbers in order of first appearance, which
/// keeps references between nodes intact.
pub fn renumber_ids(text: &str) -> String {
    let mut seen: HashMap<String, usize> = HashMap::new();
    ADDRESS
        .replace_all(text, |c: &regex::Captures<'_>| {
            let m = c.get(0).unwrap().as_str();
            let n = seen.len() + 1;
            let id = *seen.entry(m.to_string()).or_insert(n);
            format!("\"0x{id:x}\"")
        })
        .into_owned()
}

/// Dumps many files with at most `parallelism` frontend processes at once
/// (0 = number of logical CPUs). Results keep input order.
pub fn dump_many(
    files: &[SourceFile],
    flags: &BuildFlags,
    tool: &ToolTemplate,
    cache: Option<&AstCache>,
    parallelism: usize,
) -> Vec<Result<RawAst, AstError>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .expect("thread pool");
    pool.install(|| files.par_iter().map(|f| dump_ast(f, flags, tool, cache)).collect())
}
