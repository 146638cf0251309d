use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlagSource {
    Makefile,
    Override,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildFlags {
    pub cflags: Vec<String>,
    pub cppflags: Vec<String>,
    pub source: FlagSource,
    /// Directory the compiler should run in so relative `-I` paths resolve.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workdir: Option<PathBuf>,
}

impl BuildFlags {
    pub fn empty() -> Self {
        BuildFlags {
            cflags: Vec::new(),
            cppflags: Vec::new(),
            source: FlagSource::Override,
            workdir: None,
        }
    }

    /// Flags given by hand, e.g. for projects not built with make.
    pub fn from_override(cflags: &str, cppflags: &str) -> (Self, Vec<String>) {
        let mut warnings = Vec::new();
        let flags = BuildFlags {
            cflags: tokenize_flags(cflags, &mut warnings),
            cppflags: tokenize_flags(cppflags, &mut warnings),
            source: FlagSource::Override,
            workdir: None,
        };
        (flags, warnings)
    }

    /// Preprocessor flags first, then compiler flags, as make's implicit C rule does.
    pub fn all(&self) -> Vec<String> {
        self.cppflags.iter().chain(&self.cflags).cloned().collect()
    }
}

#[derive(Debug, Clone)]
pub struct FlagRecovery {
    pub flags: BuildFlags,
    pub warnings: Vec<String>,
}

const PRINT_TARGET: &str = "__ccomment_print_flags";
const CFLAGS_MARK: &str = "__CCOMMENT_CFLAGS__=";
const CPPFLAGS_MARK: &str = "__CCOMMENT_CPPFLAGS__=";

/// Recovers the effective `CFLAGS`/`CPPFLAGS` of a makefile.
///
/// A print target is injected next to the makefile and `make -n` is run on
/// it, so variable expansion, `+=` and includes behave exactly as in a build.
/// If make cannot run, assignments are scraped statically instead.
pub fn recover_flags(makefile: &Path) -> FlagRecovery {
    let mut warnings = Vec::new();
    if !makefile.is_file() {
        warnings.push(format!("no makefile at {}; using empty flags", makefile.display()));
        return FlagRecovery {
            flags: BuildFlags::empty(),
            warnings,
        };
    }
    let workdir = makefile
        .canonicalize()
        .ok()
        .and_then(|p| p.parent().map(Path::to_path_buf));

    let (cflags_raw, cppflags_raw) = match run_make_print(makefile) {
        Ok(v) => v,
        Err(reason) => {
            warnings.push(format!("make dry run failed ({reason}); scraping variables statically"));
            match fs::read_to_string(makefile) {
                Ok(text) => {
                    let vars = scrape_variables(&text);
                    (expand_var(&vars, "CFLAGS"), expand_var(&vars, "CPPFLAGS"))
                }
                Err(e) => {
                    warnings.push(format!("cannot read makefile: {e}"));
                    (String::new(), String::new())
                }
            }
        }
    };
    let flags = BuildFlags {
        cflags: tokenize_flags(&cflags_raw, &mut warnings),
        cppflags: tokenize_flags(&cppflags_raw, &mut warnings),
        source: FlagSource::Makefile,
        workdir,
    };
    FlagRecovery { flags, warnings }
}

fn run_make_print(makefile: &Path) -> Result<(String, String), String> {
    let makefile = makefile.canonicalize().map_err(|e| e.to_string())?;
    let dir = makefile.parent().ok_or("makefile has no parent directory")?;
    let extra = print_rule_path();
    let rule = format!(
        ".PHONY: {PRINT_TARGET}\n{PRINT_TARGET}:\n\t$(info {CFLAGS_MARK}$(CFLAGS))\n\t$(info {CPPFLAGS_MARK}$(CPPFLAGS))\n\t@:\n"
    );
    fs::write(&extra, rule).map_err(|e| e.to_string())?;
    let output = Command::new("make")
        .arg("-n")
        .arg("-s")
        .arg("--no-print-directory")
        .arg("-C")
        .arg(dir)
        .arg("-f")
        .arg(&makefile)
        .arg("-f")
        .arg(&extra)
        .arg(PRINT_TARGET)
        .output();
    let _ = fs::remove_file(&extra);
    let output = output.map_err(|e| format!("cannot run make: {e}"))?;
    if !output.status.success() {
        return Err(String::from_utf8_lossy(&output.stderr).trim().to_string());
    }
    let stdout = String::from_utf8_lossy(&output.stdout);
    let find = |mark: &str| {
        stdout
            .lines()
            .find_map(|l| l.strip_prefix(mark))
            .map(str::to_string)
    };
    match (find(CFLAGS_MARK), find(CPPFLAGS_MARK)) {
        (Some(c), Some(p)) => Ok((c, p)),
        _ => Err("print target produced no output".to_string()),
    }
}

fn print_rule_path() -> PathBuf {
    use std::sync::atomic::{AtomicUsize, Ordering};
    static COUNTER: AtomicUsize = AtomicUsize::new(0);
    let n = COUNTER.fetch_add(1, Ordering::Relaxed);
    std::env::temp_dir().join(format!("ccomment-print-{}-{n}.mk", std::process::id()))
}

#[derive(Debug, Clone)]
enum Assign {
    Recursive(String),
    Simple(String),
}

/// Collects `VAR = value` style assignments, honoring `:=`, `?=`, `+=`,
/// `export`/`override` prefixes and backslash continuations. Conditionals are
/// not evaluated.
fn scrape_variables(text: &str) -> HashMap<String, Assign> {
    let mut vars: HashMap<String, Assign> = HashMap::new();
    let joined = text.replace("\\\r\n", " ").replace("\\\n", " ");
    for line in joined.lines() {
        if line.starts_with('\t') {
            continue;
        }
        let line = match line.find('#') {
            Some(p) => &line[..p],
            None => line,
        };
        let mut line = line.trim();
        for prefix in ["export ", "override "] {
            if let Some(rest) = line.strip_prefix(prefix) {
                line = rest.trim_start();
            }
        }
        let Some(eq) = line.find('=') else { continue };
        let (lhs, value) = (&line[..eq], line[eq + 1..].trim());
        let (name, op) = match lhs.chars().last() {
            Some(c @ (':' | '?' | '+' | '!')) => (lhs[..lhs.len() - 1].trim(), Some(c)),
            _ => (lhs.trim(), None),
        };
        let name = name.trim_end_matches(':').trim();
        if name.is_empty() || name.contains(char::is_whitespace) {
            continue;
        }
        match op {
            Some(':') => {
                let v = expand(&vars, value, 0);
                vars.insert(name.to_string(), Assign::Simple(v));
            }
            Some('?') => {
                vars.entry(name.to_string())
                    .or_insert_with(|| Assign::Recursive(value.to_string()));
            }
            Some('+') => {
                let next = match vars.get(name) {
                    Some(Assign::Simple(old)) => Assign::Simple(join(old, &expand(&vars, value, 0))),
                    Some(Assign::Recursive(old)) => Assign::Recursive(join(old, value)),
                    None => Assign::Recursive(value.to_string()),
                };
                vars.insert(name.to_string(), next);
            }
            Some(_) => {}
            None => {
                vars.insert(name.to_string(), Assign::Recursive(value.to_string()));
            }
        }
    }
    vars
}

fn join(a: &str, b: &str) -> String {
    match (a.is_empty(), b.is_empty()) {
        (true, _) => b.to_string(),
        (_, true) => a.to_string(),
        _ => format!("{a} {b}"),
    }
}

fn expand_var(vars: &HashMap<String, Assign>, name: &str) -> String {
    lookup(vars, name, 0)
}

fn lookup(vars: &HashMap<String, Assign>, name: &str, depth: usize) -> String {
    match vars.get(name) {
        Some(Assign::Simple(v)) => v.clone(),
        Some(Assign::Recursive(v)) => expand(vars, v, depth + 1),
        None => std::env::var(name).unwrap_or_default(),
    }
}

fn expand(vars: &HashMap<String, Assign>, value: &str, depth: usize) -> String {
    if depth > 16 {
        return String::new();
    }
    let mut out = String::new();
    let mut chars = value.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if c != '$' {
            out.push(c);
            continue;
        }
        match chars.peek().map(|&(_, n)| n) {
            Some('$') => {
                chars.next();
                out.push('$');
            }
            Some(open @ ('(' | '{')) => {
                let close = if open == '(' { ')' } else { '}' };
                let rest = &value[i + 2..];
                match rest.find(close) {
                    Some(end) => {
                        let name = &rest[..end];
                        if !name.contains(char::is_whitespace) {
                            out.push_str(&lookup(vars, name, depth));
                        }
                        for _ in 0..end + 2 {
                            chars.next();
                        }
                    }
                    None => out.push(c),
                }
            }
            Some(n) if n.is_ascii_alphanumeric() => {
                chars.next();
                out.push_str(&lookup(vars, &n.to_string(), depth));
            }
            _ => out.push(c),
        }
    }
    out
}

/// Splits a flag string with shell rules and drops tokens that still carry
/// shell metacharacters.
fn tokenize_flags(raw: &str, warnings: &mut Vec<String>) -> Vec<String> {
    let tokens = shlex::split(raw).unwrap_or_else(|| {
        warnings.push(format!("unbalanced quotes in flags `{raw}`; splitting on whitespace"));
        raw.split_whitespace().map(str::to_string).collect()
    });
    tokens
        .into_iter()
        .filter(|t| {
            let unsafe_tok = t.chars().any(|c| matches!(c, ';' | '|' | '&' | '<' | '>' | '`' | '$' | '\n'));
            if unsafe_tok {
                warnings.push(format!("dropping flag token with shell metacharacters: {t}"));
            }
            !unsafe_tok
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn makefile(body: &str) -> (tempfile::TempDir, PathBuf) {
        let d = tempfile::tempdir().unwrap();
        let p = d.path().join("Makefile");
        fs::write(&p, body).unwrap();
        (d, p)
    }

    #[test]
    fn literal_assignment() {
        let (_d, p) = makefile("CFLAGS = -O2 -Ideps\nall:\n\t$(CC) $(CFLAGS) -c a.c\n");
        let r = recover_flags(&p);
        assert_eq!(r.flags.cflags, vec!["-O2", "-Ideps"]);
        assert!(r.flags.cppflags.is_empty());
        assert_eq!(r.flags.source, FlagSource::Makefile);
    }

    #[test]
    fn appended_variable_reference_expands() {
        let (_d, p) = makefile("EXTRA = -DX\nCFLAGS = -O2\nCFLAGS += $(EXTRA)\nCPPFLAGS := -Iinc\nall:\n\ttrue\n");
        let r = recover_flags(&p);
        assert!(r.flags.cflags.contains(&"-DX".to_string()), "{:?}", r.flags);
        assert_eq!(r.flags.cppflags, vec!["-Iinc"]);
    }

    #[test]
    fn missing_makefile_gives_empty_override() {
        let r = recover_flags(Path::new("/no/such/Makefile"));
        assert_eq!(r.flags, BuildFlags::empty());
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn broken_makefile_falls_back_to_scraping() {
        let (_d, p) = makefile("include does-not-exist.mk\nBASE = -Wall\nCFLAGS = $(BASE) \\\n  -DFOO=1\n");
        let r = recover_flags(&p);
        assert_eq!(r.flags.cflags, vec!["-Wall", "-DFOO=1"]);
        assert!(r.warnings.iter().any(|w| w.contains("scraping")));
    }

    #[test]
    fn static_scraper_semantics() {
        let vars = scrape_variables("A = 1\nB := $(A) 2\nA = 3\nC = $(A)\nC += 4\nD ?= 5\nD ?= 6\n");
        assert_eq!(expand_var(&vars, "B"), "1 2");
        assert_eq!(expand_var(&vars, "C"), "3 4");
        assert_eq!(expand_var(&vars, "D"), "5");
    }

    #[test]
    fn quoted_flags_and_metacharacters() {
        let mut w = Vec::new();
        let toks = tokenize_flags("-DNAME='\"x y\"' -O2 ; rm", &mut w);
        assert_eq!(toks, vec!["-DNAME=\"x y\"", "-O2", "rm"]);
        assert_eq!(w.len(), 1);
    }
}
