use std::collections::{BTreeSet, HashSet};
use std::sync::LazyLock;

use regex::Regex;

use crate::docstore::tokenize;

use super::Category;

static LINKS: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)(\b[\w./-]+\.(h|hh|hpp|hxx|c|cc|cpp|cxx|inl|ipp|md|markdown|txt|rst|adoc|html?)(:\d+)?\b|https?://\S+|\b(defined|declared|implemented|documented|described) in\b|\bsee (also )?(the )?[\w./-]+/)",
    )
    .unwrap()
});

static EXCEPTIONS: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)\b(limitations?|no bounds? check\w*|bounds?|overflows?|overflowing|underflows?|out of range|undefined behaviou?r|not thread[- ]safe|race conditions?|deadlocks?|relies on|rely on|assumes?|must not|must be|never wraps?|wrapping|wraps? around|may fail|can fail|fails? if|null pointers?|dangling|leaks?|caveat|unchecked|truncat\w*|division by zero|invalid input)\b",
    )
    .unwrap()
});

static COMPLEXITY: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"\bO\([^()]*(\([^()]*\))?[^()]*\)|(?i)\b(time|space|memory) complexity\b|(?i)\b(linear|quadratic|logarithmic|constant|amortized|exponential) (time|space)\b",
    )
    .unwrap()
});

static ALTERNATIVE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)\b(alternatives?|alternatively|instead|could use|could be replaced|can be replaced|consider using|better to use|would be faster|a faster way|one could)\b",
    )
    .unwrap()
});

static WORD: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[A-Za-z_][A-Za-z0-9_]*(?:::[A-Za-z_][A-Za-z0-9_]*)*").unwrap());

static SENTENCE_END: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[.!?](\s|$)").unwrap());

const BEHAVIOUR_VERBS: &[&str] = &[
    "test", "check", "compute", "calculate", "iterate", "walk", "traverse", "ensure", "return", "update",
    "remove", "insert", "sort", "build", "parse", "convert", "scan", "loop", "allocate", "initialize",
    "read", "write", "copy", "compare", "find", "search", "validate", "emit", "process", "handle",
    "perform", "apply", "create", "run", "invoke", "call", "free", "merge", "split", "store", "fill",
    "advance", "collect", "escape", "encode", "decode", "flush", "push", "pop", "append", "reset",
];

// Words a developer would use about any program; they never signal an
// application-domain concept.
const GENERAL_VOCAB: &[&str] = &[
    "about", "above", "accept", "access", "actual", "address", "after", "again", "algorithm", "all",
    "allocate", "allocation", "allow", "already", "also", "alternative", "always", "another", "any",
    "append", "apply", "argument", "array", "ascii", "assert", "assign", "assume", "available", "avoid",
    "back", "background", "base", "before", "begin", "behavior", "behaviour", "being", "below", "better",
    "between", "bit", "block", "body", "bool", "boolean", "both", "bound", "bounds", "brief", "buffer",
    "build", "byte", "cache", "call", "caller", "callback", "can", "case", "cast", "change", "char",
    "character", "check", "class", "clean", "clear", "close", "code", "collect", "compare", "complexity",
    "compute", "condition", "config", "const", "constant", "construct", "constructor", "contain",
    "content", "context", "continue", "convert", "copy", "correct", "correctly", "could", "count",
    "counter", "create", "current", "data", "debug", "decode", "default", "define", "defined", "delete",
    "depend", "design", "destroy", "detail", "different", "direct", "directly", "documentation", "does",
    "done", "double", "during", "each", "either", "element", "else", "empty", "encode", "end", "ensure",
    "entry", "enum", "equal", "error", "escape", "escaped", "even", "every", "exactly", "example",
    "exist", "exit", "expected", "expire", "expired", "fail", "false", "fast", "faster", "field", "file",
    "fill", "final", "find", "first", "flag", "float", "flush", "following", "format", "found", "free",
    "from", "full", "function", "get", "given", "global", "handle", "handler", "hash", "have", "header",
    "heap", "helper", "here", "hold", "however", "ignore", "implementation", "include", "index",
    "initial", "initialization", "initialize", "input", "insert", "instance", "instead", "int",
    "integer", "internal", "into", "invalid", "invoke", "item", "iterate", "iterator", "itself", "json",
    "just", "keep", "key", "last", "later", "length", "less", "level", "library", "limit", "limitation",
    "line", "linear", "link", "list", "load", "local", "lock", "log", "long", "lookup", "loop", "main",
    "make", "many", "map", "mark", "match", "maximum", "may", "member", "memory", "merge", "message",
    "method", "might", "minimum", "mode", "module", "more", "most", "move", "much", "must", "name",
    "need", "needed", "never", "new", "next", "node", "none", "normal", "not", "note", "null",
    "number", "object", "occur", "offset", "once", "only", "open", "operation", "option", "order",
    "other", "otherwise", "output", "over", "overflow", "own", "parameter", "parse", "parser", "part",
    "pass", "path", "perform", "pointer", "pop", "position", "possible", "previous", "print",
    "private", "process", "program", "properly", "property", "provide", "public", "push", "queue",
    "range", "rather", "raw", "read", "reason", "record", "recursive", "reference", "release", "rely",
    "relies", "remove", "replace", "request", "require", "reset", "resource", "result", "return",
    "reuse", "run", "safe", "same", "scan", "search", "second", "see", "serialize", "serializer", "set",
    "should", "side", "signed", "simple", "since", "single", "size", "skip", "slot", "some", "sort",
    "source", "space", "special", "stack", "standard", "start", "state", "static", "status", "step",
    "still", "store", "stream", "string", "struct", "structure", "success", "such", "support", "swap",
    "switch", "system", "table", "take", "target", "task", "temporary", "test", "than", "that", "the",
    "their", "them", "then", "there", "these", "they", "this", "those", "thread", "through", "time",
    "total", "true", "type", "under", "unique", "unit", "unsigned", "until", "update", "upon", "usage",
    "use", "used", "user", "using", "valid", "validate", "value", "variable", "vector", "version", "via",
    "void", "wait", "want", "was", "what", "when", "where", "whether", "which", "while", "will", "with",
    "within", "without", "word", "work", "would", "wrap", "write", "wrong", "zero",
    // common C/C++ library names
    "calloc", "malloc", "realloc", "memcpy", "memmove", "memset", "memcmp", "strlen", "strcpy",
    "strncpy", "strcmp", "printf", "fprintf", "sprintf", "snprintf", "fopen", "fclose", "sizeof",
    "std", "stl", "posix", "libc",
];

// Stop words and verbs that carry no concept of their own.
const FILLER: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "by", "for", "from", "get", "gets", "has", "if", "in",
    "is", "it", "its", "needed", "of", "on", "or", "return", "returns", "set", "sets", "so", "the",
    "this", "to", "using", "use", "with", "function", "method", "value", "brief", "param", "returns",
];

fn stem_forms(w: &str) -> Vec<String> {
    let mut forms = vec![w.to_string()];
    for suf in ["s", "es", "ed", "ing", "ly", "d"] {
        if let Some(base) = w.strip_suffix(suf) {
            if base.len() >= 3 {
                forms.push(base.to_string());
                forms.push(format!("{base}e"));
            }
        }
    }
    forms
}

fn in_list(list: &[&str], w: &str) -> bool {
    stem_forms(w).iter().any(|f| list.contains(&f.as_str()))
}

fn looks_like_identifier(w: &str) -> bool {
    w.contains('_')
        || w.contains("::")
        || w.chars().any(|c| c.is_ascii_digit())
        || w.chars().skip(1).any(|c| c.is_ascii_uppercase()) && w.chars().any(|c| c.is_ascii_lowercase())
}

/// True when `w` names (or abbreviates into) something among the code tokens.
fn in_code(w: &str, code_tokens: &HashSet<String>) -> bool {
    code_tokens.contains(w)
        || code_tokens
            .iter()
            .any(|t| t.len() >= 3 && w.len() >= 3 && (w.starts_with(t.as_str()) || t.starts_with(w)))
}

/// Rule-based multi-label classification of one comment against its code.
pub fn classify_rules(comment: &str, code: &str) -> BTreeSet<Category> {
    let mut out = BTreeSet::new();
    let code_tokens: HashSet<String> = tokenize(code).into_iter().collect();
    let raw_words: Vec<&str> = WORD.find_iter(comment).map(|m| m.as_str()).collect();
    let words: Vec<String> = raw_words.iter().map(|w| w.to_lowercase()).collect();

    if LINKS.is_match(comment) {
        out.insert(Category::Links);
    }
    if EXCEPTIONS.is_match(comment) {
        out.insert(Category::PossibleExceptions);
    }
    if COMPLEXITY.is_match(comment) {
        out.insert(Category::Complexity);
    }
    if ALTERNATIVE.is_match(comment) {
        out.insert(Category::AlternativeSolutions);
    }

    let references_code = raw_words
        .iter()
        .any(|w| looks_like_identifier(w) || w.len() >= 4 && in_code(&w.to_lowercase(), &code_tokens));
    let has_verb = words.iter().any(|w| in_list(BEHAVIOUR_VERBS, w));
    let sentences = SENTENCE_END.find_iter(comment.trim_end()).count().max(1);
    if words.len() >= 12 && has_verb && references_code || sentences >= 2 && references_code && has_verb {
        out.insert(Category::AlgorithmicDetails);
    }

    let path_words: HashSet<String> = LINKS
        .find_iter(comment)
        .flat_map(|m| tokenize(m.as_str()))
        .collect();
    let domain = words
        .iter()
        .zip(&raw_words)
        .filter(|(w, raw)| {
            w.len() >= 4
                && !looks_like_identifier(raw)
                && !path_words.contains(*w)
                && !in_list(GENERAL_VOCAB, w)
                && !in_list(FILLER, w)
                && !in_code(w, &code_tokens)
        })
        .map(|(w, _)| w.as_str())
        .collect::<BTreeSet<_>>();
    if domain.len() >= 2 {
        out.insert(Category::DomainMapping);
    }

    if out.is_empty() {
        let content: Vec<&String> = words
            .iter()
            .filter(|w| w.len() >= 2 && !in_list(FILLER, w))
            .collect();
        let shared = content.iter().filter(|w| in_code(w, &code_tokens)).count();
        if !content.is_empty() && shared > 0 {
            if 2 * shared >= content.len() && content.len() <= 8 {
                out.insert(Category::Irrelevance);
            } else {
                out.insert(Category::Consistency);
            }
        }
    }
    out
}
