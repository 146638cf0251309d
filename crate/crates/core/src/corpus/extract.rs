use crate::lexer::{self, Segment, SegmentKind};

use super::{CodeUnit, CommentBlock, CommentStyle, CorpusError, SourceFile};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scope {
    Namespace,
    Class,
    Extern,
    Function,
    /// Aggregate initializers, enums, and other braces whose close does not
    /// end a declaration.
    Aggregate,
    Block,
}

impl Scope {
    fn is_declaration_scope(self) -> bool {
        matches!(self, Scope::Namespace | Scope::Class | Scope::Extern)
    }
}

#[derive(Debug, Clone)]
struct Tok {
    text: String,
    start: usize,
    end: usize,
}

impl Tok {
    fn is_ident(&self) -> bool {
        self.text
            .bytes()
            .next()
            .is_some_and(|c| c.is_ascii_alphabetic() || c == b'_' || c >= 0x80)
    }
}

#[derive(Debug, Clone)]
struct FnHead {
    name: String,
    sig_start: usize,
    sig_end: usize,
}

struct Open {
    scope: Scope,
    at: usize,
    head: Option<FnHead>,
}

/// Finds every top-level or class-scope function definition in `file`.
pub fn extract_pairs(file: &SourceFile) -> Result<Vec<CodeUnit>, CorpusError> {
    let content = &file.content;
    let segs = lexer::segments(content).map_err(|source| CorpusError::Lex {
        path: file.path.clone(),
        source,
    })?;
    let mask = lexer::code_mask(content).map_err(|source| CorpusError::Lex {
        path: file.path.clone(),
        source,
    })?;
    lexer::check_braces(&mask).map_err(|offset| CorpusError::Unbalanced {
        path: file.path.clone(),
        offset,
    })?;

    let comments: Vec<Segment> = segs.into_iter().filter(|s| s.kind.is_comment()).collect();
    let mut units = Vec::new();
    let mut stack: Vec<Open> = Vec::new();
    let mut head_start = 0usize;

    for (i, &c) in mask.iter().enumerate() {
        let at_decl_scope = stack.iter().all(|o| o.scope.is_declaration_scope());
        match c {
            b'{' => {
                if !at_decl_scope {
                    stack.push(Open {
                        scope: Scope::Block,
                        at: i,
                        head: None,
                    });
                    continue;
                }
                let toks = tokenize(&mask, head_start, i);
                let (scope, head) = classify_head(&toks);
                if scope.is_declaration_scope() {
                    head_start = i + 1;
                }
                stack.push(Open { scope, at: i, head });
            }
            b'}' => {
                let open = stack.pop().expect("braces were checked");
                let now_decl_scope = stack.iter().all(|o| o.scope.is_declaration_scope());
                if !now_decl_scope {
                    continue;
                }
                if let (Scope::Function, Some(head)) = (open.scope, open.head) {
                    units.push(make_unit(file, &mask, &comments, head, (open.at, i + 1)));
                }
                if open.scope != Scope::Aggregate {
                    head_start = i + 1;
                }
            }
            b';' if at_decl_scope => head_start = i + 1,
            _ => {}
        }
    }
    Ok(units)
}

fn tokenize(mask: &[u8], from: usize, to: usize) -> Vec<Tok> {
    let mut toks = Vec::new();
    let mut i = from;
    while i < to {
        let c = mask[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_alphanumeric() || c == b'_' || c >= 0x80 {
            while i < to && (mask[i].is_ascii_alphanumeric() || mask[i] == b'_' || mask[i] >= 0x80) {
                i += 1;
            }
        } else if i + 1 < to && matches!(&mask[i..i + 2], b"::" | b"->" | b"&&") {
            i += 2;
        } else {
            i += 1;
        }
        toks.push(Tok {
            text: String::from_utf8_lossy(&mask[start..i]).into_owned(),
            start,
            end: i,
        });
    }
    toks
}

const NOT_A_NAME: [&str; 18] = [
    "if",
    "while",
    "for",
    "switch",
    "catch",
    "return",
    "sizeof",
    "decltype",
    "__attribute__",
    "__declspec",
    "alignas",
    "_Alignas",
    "typeof",
    "__typeof__",
    "defined",
    "noexcept",
    "throw",
    "static_assert",
];

const TAIL_QUALIFIERS: [&str; 12] = [
    "const",
    "volatile",
    "noexcept",
    "override",
    "final",
    "throw",
    "try",
    "mutable",
    "__attribute__",
    "requires",
    "restrict",
    "__restrict",
];

fn classify_head(toks: &[Tok]) -> (Scope, Option<FnHead>) {
    let mut toks = toks;
    while toks.len() >= 2
        && matches!(toks[0].text.as_str(), "public" | "private" | "protected")
        && toks[1].text == ":"
    {
        toks = &toks[2..];
    }
    if toks.is_empty() {
        return (Scope::Block, None);
    }
    let first = toks[0].text.as_str();
    if first == "namespace" || (first == "inline" && toks.get(1).is_some_and(|t| t.text == "namespace")) {
        return (Scope::Namespace, None);
    }
    if first == "extern" && toks.iter().any(|t| t.text == "\"") && !toks.iter().any(|t| t.text == "(") {
        return (Scope::Extern, None);
    }
    match function_head(toks) {
        Some(HeadMatch::Function(head)) => return (Scope::Function, Some(head)),
        Some(HeadMatch::MemberInit) => return (Scope::Aggregate, None),
        None => {}
    }
    if has_depth0(toks, "=") {
        return (Scope::Aggregate, None);
    }
    if toks.iter().any(|t| matches!(t.text.as_str(), "class" | "struct" | "union")) {
        return (Scope::Class, None);
    }
    (Scope::Aggregate, None)
}

fn has_depth0(toks: &[Tok], what: &str) -> bool {
    let mut depth = 0i32;
    for t in toks {
        match t.text.as_str() {
            "(" | "[" => depth += 1,
            ")" | "]" => depth -= 1,
            s if s == what && depth == 0 => return true,
            _ => {}
        }
    }
    false
}

fn matching_close(toks: &[Tok], open: usize) -> Option<usize> {
    let (o, c) = match toks[open].text.as_str() {
        "(" => ("(", ")"),
        "[" => ("[", "]"),
        _ => return None,
    };
    let mut depth = 0;
    for (j, t) in toks.iter().enumerate().skip(open) {
        if t.text == o {
            depth += 1;
        } else if t.text == c {
            depth -= 1;
            if depth == 0 {
                return Some(j);
            }
        }
    }
    None
}

enum HeadMatch {
    Function(FnHead),
    /// A brace-initialized member inside a constructor initializer list.
    MemberInit,
}

fn skip_template(toks: &[Tok]) -> usize {
    if toks.first().is_none_or(|t| t.text != "template") || toks.get(1).is_none_or(|t| t.text != "<") {
        return 0;
    }
    let mut depth = 0;
    for (j, t) in toks.iter().enumerate().skip(1) {
        match t.text.as_str() {
            "<" => depth += 1,
            ">" => {
                depth -= 1;
                if depth == 0 {
                    return j + 1;
                }
            }
            _ => {}
        }
    }
    0
}

fn function_head(toks: &[Tok]) -> Option<HeadMatch> {
    let mut depth = 0i32;
    let from = skip_template(toks);
    for (idx, t) in toks.iter().enumerate().skip(from) {
        match t.text.as_str() {
            "(" => {
                if depth == 0 && idx > from {
                    if let Some(head) = try_candidate(toks, idx) {
                        return Some(head);
                    }
                }
                depth += 1;
            }
            ")" => depth -= 1,
            "=" if depth == 0 => {
                // `operator=` is the only legitimate `=` before a parameter list.
                if idx == 0 || toks[idx - 1].text != "operator" && !is_operator_tail(toks, idx) {
                    return None;
                }
            }
            ";" | "{" | "}" => return None,
            _ => {}
        }
    }
    None
}

fn is_operator_tail(toks: &[Tok], idx: usize) -> bool {
    (1..=3).any(|back| idx >= back && toks[idx - back].text == "operator")
}

fn try_candidate(toks: &[Tok], open: usize) -> Option<HeadMatch> {
    let name = candidate_name(toks, open)?;
    let close = matching_close(toks, open)?;
    let tail = &toks[close + 1..];
    if !valid_tail(tail) {
        return None;
    }
    let last = toks.last()?;
    let init_list = tail.iter().take_while(|t| t.text != "->").any(|t| t.text == ":");
    if init_list && (last.is_ident() || last.text == ">") {
        return Some(HeadMatch::MemberInit);
    }
    Some(HeadMatch::Function(FnHead {
        name,
        sig_start: toks[0].start,
        sig_end: last.end,
    }))
}

fn candidate_name(toks: &[Tok], open: usize) -> Option<String> {
    let prev = &toks[open - 1];
    if prev.is_ident() {
        if NOT_A_NAME.contains(&prev.text.as_str()) {
            return None;
        }
        if open >= 2 && toks[open - 2].text == "operator" {
            return Some(format!("operator {}", prev.text));
        }
        if prev.text == "operator" {
            return None;
        }
        let mut name = prev.text.clone();
        let mut j = open - 1;
        if j >= 1 && toks[j - 1].text == "~" {
            name = format!("~{name}");
            j -= 1;
        }
        while j >= 2 && toks[j - 1].text == "::" && toks[j - 2].is_ident() {
            name = format!("{}::{}", toks[j - 2].text, name);
            j -= 2;
        }
        return Some(name);
    }
    // operator symbols: `operator==`, `operator()`, `operator[]`, `operator<<`
    let back = (1..=3).find(|&b| open > b && toks[open - b - 1].text == "operator")?;
    let sym: String = toks[open - back..open].iter().map(|t| t.text.as_str()).collect();
    if sym.chars().any(|c| c.is_alphanumeric()) {
        return None;
    }
    Some(format!("operator{sym}"))
}

/// What may follow the parameter list before the body brace.
fn valid_tail(tail: &[Tok]) -> bool {
    let mut i = 0;
    while i < tail.len() {
        let t = tail[i].text.as_str();
        if t == "->" || t == ":" {
            return true;
        }
        let qualifier = TAIL_QUALIFIERS.contains(&t) || is_macro_like(t);
        if qualifier || t == "&" || t == "&&" {
            i += 1;
            if qualifier && tail.get(i).is_some_and(|n| n.text == "(") {
                match matching_close(tail, i) {
                    Some(c) => i = c + 1,
                    None => return false,
                }
            }
            continue;
        }
        if t == "[" && tail.get(i + 1).is_some_and(|n| n.text == "[") {
            match matching_close(tail, i) {
                Some(c) => {
                    i = c + 1;
                    continue;
                }
                None => return false,
            }
        }
        return false;
    }
    true
}

fn is_macro_like(t: &str) -> bool {
    t.len() > 1
        && t.bytes().all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == b'_')
        && t.bytes().any(|c| c.is_ascii_uppercase())
}

fn make_unit(
    file: &SourceFile,
    mask: &[u8],
    comments: &[Segment],
    head: FnHead,
    body_span: (usize, usize),
) -> CodeUnit {
    let content = &file.content;
    let signature = String::from_utf8_lossy(&mask[head.sig_start..head.sig_end])
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ");
    let code = content[head.sig_start..body_span.1].to_string();
    let loc = code.matches('\n').count() + 1;
    CodeUnit {
        id: format!("{}:{}:{}:{}", file.repo_id, file.path, head.name, body_span.0),
        repo_id: file.repo_id.clone(),
        path: file.path.clone(),
        language: file.language,
        leading_comment: leading_comment(content, comments, head.sig_start),
        name: head.name,
        signature,
        sig_start: head.sig_start,
        body_span,
        loc,
        code,
    }
}

/// The comment block ending at most one blank line above `sig_start`. A run of
/// `//` comments on consecutive lines forms one block.
fn leading_comment(content: &str, comments: &[Segment], sig_start: usize) -> Option<CommentBlock> {
    let idx = comments.iter().rposition(|s| s.end <= sig_start)?;
    let last = comments[idx];
    let gap = &content[last.end..sig_start];
    if !gap.chars().all(char::is_whitespace) || gap.matches('\n').count() > 2 {
        return None;
    }
    if last.kind == SegmentKind::LineComment && gap.matches('\n').count() == 0 {
        return None;
    }
    if !starts_own_line(content, last.start) {
        return None;
    }
    let mut first = last;
    if last.kind == SegmentKind::LineComment {
        let mut j = idx;
        while j > 0 {
            let prev = comments[j - 1];
            let between = &content[prev.end..first.start];
            if prev.kind != SegmentKind::LineComment
                || !between.chars().all(char::is_whitespace)
                || between.matches('\n').count() != 1
                || !starts_own_line(content, prev.start)
            {
                break;
            }
            first = prev;
            j -= 1;
        }
    }
    let raw = content[first.start..last.end].to_string();
    let style = comment_style(&raw, last.kind);
    Some(CommentBlock {
        text: comment_text(&raw),
        raw,
        style,
        span: (first.start, last.end),
    })
}

fn starts_own_line(content: &str, pos: usize) -> bool {
    content[..pos]
        .rsplit('\n')
        .next()
        .is_some_and(|before| before.chars().all(char::is_whitespace))
}

fn comment_style(raw: &str, kind: SegmentKind) -> CommentStyle {
    let doxy_block = (raw.starts_with("/**") && !raw.starts_with("/**/")) || raw.starts_with("/*!");
    let doxy_line = (raw.starts_with("///") && !raw.starts_with("////")) || raw.starts_with("//!");
    match kind {
        _ if doxy_block || doxy_line => CommentStyle::Doxygen,
        SegmentKind::LineComment => CommentStyle::Line,
        _ => CommentStyle::Block,
    }
}

/// Strips comment delimiters, leading `*` gutters, and decoration-only lines.
pub fn comment_text(raw: &str) -> String {
    let mut lines: Vec<String> = Vec::new();
    let mut rest = raw.trim();
    while !rest.is_empty() {
        if let Some(body) = rest.strip_prefix("/*") {
            let (inner, after) = match body.find("*/") {
                Some(p) => (&body[..p], &body[p + 2..]),
                None => (body, ""),
            };
            let inner = inner.strip_prefix(['*', '!']).unwrap_or(inner);
            for line in inner.lines() {
                let l = line.trim();
                let l = l.trim_start_matches('*').trim();
                lines.push(l.to_string());
            }
            rest = after.trim_start();
        } else if let Some(body) = rest.strip_prefix("//") {
            let (line, after) = match body.find('\n') {
                Some(p) => (&body[..p], &body[p + 1..]),
                None => (body, ""),
            };
            let line = line.trim_start_matches(['/', '!']);
            lines.push(line.trim().to_string());
            rest = after.trim_start();
        } else {
            // Not a comment start: keep verbatim up to the next comment.
            let next = rest.find("/*").into_iter().chain(rest.find("//")).min().unwrap_or(rest.len());
            let next = if next == 0 { rest.len() } else { next };
            lines.extend(rest[..next].lines().map(|l| l.trim().to_string()));
            rest = rest[next..].trim_start();
        }
    }
    let kept: Vec<&str> = lines
        .iter()
        .map(String::as_str)
        .filter(|l| !is_decoration(l))
        .collect();
    let first = kept.iter().position(|l| !l.is_empty()).unwrap_or(kept.len());
    let last = kept.iter().rposition(|l| !l.is_empty()).map_or(first, |p| p + 1);
    kept[first..last].join("\n")
}

fn is_decoration(line: &str) -> bool {
    !line.is_empty() && line.chars().all(|c| "-=*#~_+/".contains(c))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn units(src: &str) -> Vec<CodeUnit> {
        extract_pairs(&SourceFile::in_memory("r", "f.c", src)).unwrap()
    }

    #[test]
    fn single_function_with_block_comment() {
        let u = units("/* doc */\nint f(void){return 0;}");
        assert_eq!(u.len(), 1);
        assert_eq!(u[0].name, "f");
        assert_eq!(u[0].signature, "int f(void)");
        assert_eq!(u[0].leading_comment.as_ref().unwrap().text, "doc");
        assert_eq!(u[0].leading_comment.as_ref().unwrap().style, CommentStyle::Block);
    }

    #[test]
    fn comment_only_on_first_function() {
        let u = units("// first\nint a(void) { return 1; }\n\nint b(void) { return 2; }\n");
        assert_eq!(u.len(), 2);
        assert_eq!(u[0].comment_text(), Some("first"));
        assert!(u[1].leading_comment.is_none());
    }

    #[test]
    fn blank_line_window() {
        let one = units("/* near */\n\nint f(void) { return 0; }");
        assert!(one[0].leading_comment.is_some());
        let two = units("/* far */\n\n\nint f(void) { return 0; }");
        assert!(two[0].leading_comment.is_none());
    }

    #[test]
    fn trailing_comment_of_previous_line_is_not_leading() {
        let u = units("int x; // about x\nint f(void) { return x; }");
        assert!(u[0].leading_comment.is_none());
    }

    #[test]
    fn consecutive_line_comments_merge() {
        let src = "/// Adds.\n/// Twice.\nint add(int a) { return a + a; }";
        let u = units(src);
        let c = u[0].leading_comment.as_ref().unwrap();
        assert_eq!(c.text, "Adds.\nTwice.");
        assert_eq!(c.style, CommentStyle::Doxygen);
        assert_eq!(&src[c.span.0..c.span.1], c.raw);
    }

    #[test]
    fn skips_structs_initializers_and_prototypes() {
        let src = "struct s { int a; };\nint g(void);\nstatic const int t[] = { 1, 2 };\nenum e { A, B };\nint h(int x) { if (x) { return 1; } return 0; }\n";
        let u = units(src);
        assert_eq!(u.iter().map(|u| u.name.as_str()).collect::<Vec<_>>(), vec!["h"]);
    }

    #[test]
    fn cpp_scopes_and_methods() {
        let src = r#"
namespace ns {
extern "C" {
int c_api(void) { return 0; }
}
class Widget : public Base {
public:
    /// Builds it.
    Widget() : a_(1), b_{2} { init(); }
    ~Widget() override {}
    int size() const noexcept { return a_; }
    bool operator==(const Widget& o) const { return a_ == o.a_; }
private:
    int a_;
};
template <typename T>
T Widget::get(T x) const -> T { return x; }
}
"#;
        let u = units(src);
        let names: Vec<_> = u.iter().map(|u| u.name.as_str()).collect();
        assert_eq!(
            names,
            vec!["c_api", "Widget", "~Widget", "size", "operator==", "Widget::get"]
        );
        assert_eq!(u[1].comment_text(), Some("Builds it."));
        assert!(u[4].signature.contains("operator=="));
    }

    #[test]
    fn attribute_macros_are_not_names() {
        let u = units("__attribute__((noreturn)) void die(int code) { for (;;) {} }\nJSON_NON_NULL(1) void put(const char* s) { (void)s; }");
        let names: Vec<_> = u.iter().map(|u| u.name.as_str()).collect();
        assert_eq!(names, vec!["die", "put"]);
    }

    #[test]
    fn unbalanced_file_is_rejected_with_offset() {
        let err = extract_pairs(&SourceFile::in_memory("r", "bad.c", "int f() {\n  if (x) {\n}\n")).unwrap_err();
        match err {
            CorpusError::Unbalanced { offset, .. } => assert_eq!(offset, 8),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn body_span_and_loc() {
        let src = "int f(void)\n{\n  return 0;\n}\n";
        let u = &units(src)[0];
        assert_eq!(&src[u.body_span.0..u.body_span.1], "{\n  return 0;\n}");
        assert_eq!(u.loc, 4);
    }

    #[test]
    fn comment_text_handles_gutters_and_rules() {
        let raw = "/*-------------------*\n *  static int f(void)\n *  LIMITATION: wraps.\n *-------------------*/";
        assert_eq!(comment_text(raw), "static int f(void)\nLIMITATION: wraps.");
        assert_eq!(comment_text("/**\n * @brief Checks.\n */"), "@brief Checks.");
        assert_eq!(comment_text("// a\n   // b"), "a\nb");
    }
}
