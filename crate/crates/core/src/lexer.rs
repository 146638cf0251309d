//! Comment- and literal-aware segmentation of C/C++ source text.
//!
//! The lexer does not tokenize C; it only splits text into code, comments,
//! and string/char literals so that callers can strip comments, blank out
//! literals, or check brace balance without being fooled by `//` inside a
//! string.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    Code,
    LineComment,
    BlockComment,
    StringLit,
    CharLit,
}

impl SegmentKind {
    pub fn is_comment(self) -> bool {
        matches!(self, SegmentKind::LineComment | SegmentKind::BlockComment)
    }

    pub fn is_literal(self) -> bool {
        matches!(self, SegmentKind::StringLit | SegmentKind::CharLit)
    }
}

/// A half-open byte range `[start, end)` of the input with its kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub kind: SegmentKind,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LexError {
    #[error("unterminated block comment opened at byte {0}")]
    UnterminatedBlockComment(usize),
}

const RAW_PREFIXES: [&[u8]; 5] = [b"R", b"LR", b"uR", b"UR", b"u8R"];

/// Splits `src` into contiguous segments covering every byte.
pub fn segments(src: &str) -> Result<Vec<Segment>, LexError> {
    let b = src.as_bytes();
    let mut out: Vec<Segment> = Vec::new();
    let mut code_start = 0usize;
    let mut i = 0usize;

    let flush_code = |out: &mut Vec<Segment>, from: usize, to: usize| {
        if to > from {
            out.push(Segment {
                kind: SegmentKind::Code,
                start: from,
                end: to,
            });
        }
    };

    while i < b.len() {
        let c = b[i];
        if c == b'/' && b.get(i + 1) == Some(&b'/') {
            flush_code(&mut out, code_start, i);
            let end = line_comment_end(b, i + 2);
            out.push(Segment {
                kind: SegmentKind::LineComment,
                start: i,
                end,
            });
            i = end;
            code_start = i;
        } else if c == b'/' && b.get(i + 1) == Some(&b'*') {
            flush_code(&mut out, code_start, i);
            let end = match find(b, i + 2, b"*/") {
                Some(p) => p + 2,
                None => return Err(LexError::UnterminatedBlockComment(i)),
            };
            out.push(Segment {
                kind: SegmentKind::BlockComment,
                start: i,
                end,
            });
            i = end;
            code_start = i;
        } else if c == b'"' {
            let raw_prefix = RAW_PREFIXES
                .iter()
                .find(|p| i >= p.len() && &b[i - p.len()..i] == **p && ident_boundary(b, i - p.len()));
            flush_code(&mut out, code_start, i);
            let end = match raw_prefix {
                Some(_) => raw_string_end(b, i),
                None => quoted_end(b, i, b'"'),
            };
            out.push(Segment {
                kind: SegmentKind::StringLit,
                start: i,
                end,
            });
            i = end;
            code_start = i;
        } else if c == b'\'' {
            flush_code(&mut out, code_start, i);
            let end = quoted_end(b, i, b'\'');
            out.push(Segment {
                kind: SegmentKind::CharLit,
                start: i,
                end,
            });
            i = end;
            code_start = i;
        } else if c.is_ascii_digit() && ident_boundary(b, i) {
            i = pp_number_end(b, i);
        } else if is_ident_byte(c) {
            while i < b.len() && is_ident_byte(b[i]) {
                i += 1;
            }
        } else {
            i += 1;
        }
    }
    flush_code(&mut out, code_start, b.len());
    Ok(out)
}

fn is_ident_byte(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_' || c >= 0x80
}

/// True when the byte before `pos` cannot continue an identifier.
fn ident_boundary(b: &[u8], pos: usize) -> bool {
    pos == 0 || !is_ident_byte(b[pos - 1])
}

fn find(b: &[u8], from: usize, pat: &[u8]) -> Option<usize> {
    if from > b.len() {
        return None;
    }
    b[from..]
        .windows(pat.len())
        .position(|w| w == pat)
        .map(|p| p + from)
}

/// End of a `//` comment: the newline that terminates it (exclusive), honoring
/// backslash-newline continuations.
fn line_comment_end(b: &[u8], mut i: usize) -> usize {
    while i < b.len() {
        if b[i] == b'\n' {
            let mut j = i;
            if j > 0 && b[j - 1] == b'\r' {
                j -= 1;
            }
            if j > 0 && b[j - 1] == b'\\' {
                i += 1;
                continue;
            }
            return i;
        }
        i += 1;
    }
    b.len()
}

/// End of a quoted literal starting at `start`. An unescaped newline ends an
/// unterminated literal, mirroring how compilers recover.
fn quoted_end(b: &[u8], start: usize, quote: u8) -> usize {
    let mut i = start + 1;
    while i < b.len() {
        match b[i] {
            b'\\' => i += 2,
            b'\n' => return i,
            c if c == quote => return i + 1,
            _ => i += 1,
        }
    }
    b.len()
}

fn raw_string_end(b: &[u8], quote: usize) -> usize {
    let open = match b[quote + 1..].iter().position(|&c| c == b'(') {
        Some(p) if p <= 16 => quote + 1 + p,
        _ => return quoted_end(b, quote, b'"'),
    };
    let delim = &b[quote + 1..open];
    let mut close = Vec::with_capacity(delim.len() + 2);
    close.push(b')');
    close.extend_from_slice(delim);
    close.push(b'"');
    match find(b, open + 1, &close) {
        Some(p) => p + close.len(),
        None => b.len(),
    }
}

/// Consumes a preprocessing number, including C++14 digit separators so that
/// `1'000` is not mistaken for a char literal.
fn pp_number_end(b: &[u8], mut i: usize) -> usize {
    while i < b.len() {
        let c = b[i];
        let sign = (c == b'+' || c == b'-') && matches!(b[i - 1], b'e' | b'E' | b'p' | b'P');
        let digit_sep = c == b'\'' && b.get(i + 1).is_some_and(|n| n.is_ascii_alphanumeric());
        if !(sign || digit_sep || c.is_ascii_alphanumeric() || c == b'_' || c == b'.') {
            break;
        }
        i += 1;
    }
    i
}

/// Removes every comment while leaving literals untouched. Block comments
/// become a single space; line comments lose the remainder of their line but
/// keep the terminating newline (and any continued newlines).
pub fn strip_comments(src: &str) -> Result<String, LexError> {
    let segs = segments(src)?;
    let mut out = String::with_capacity(src.len());
    for s in segs {
        match s.kind {
            SegmentKind::BlockComment => out.push(' '),
            SegmentKind::LineComment => {
                out.extend(src[s.start..s.end].chars().filter(|&c| c == '\n'));
            }
            _ => out.push_str(&src[s.start..s.end]),
        }
    }
    Ok(out)
}

/// Produces a same-length copy of `src` where comments, literal contents, and
/// preprocessor directives are replaced by spaces (newlines kept). Literal
/// delimiters survive so `extern "C"` remains recognizable.
pub fn code_mask(src: &str) -> Result<Vec<u8>, LexError> {
    let segs = segments(src)?;
    let mut mask = src.as_bytes().to_vec();
    for s in &segs {
        match s.kind {
            SegmentKind::Code => {}
            SegmentKind::LineComment | SegmentKind::BlockComment => blank(&mut mask, s.start, s.end),
            SegmentKind::StringLit | SegmentKind::CharLit => {
                if s.end - s.start >= 2 {
                    blank(&mut mask, s.start + 1, s.end - 1);
                }
            }
        }
    }
    blank_directives(&mut mask);
    Ok(mask)
}

fn blank(mask: &mut [u8], from: usize, to: usize) {
    for c in &mut mask[from..to] {
        if *c != b'\n' {
            *c = b' ';
        }
    }
}

/// Blanks `#...` lines (with continuations) in an already comment-masked buffer.
fn blank_directives(mask: &mut [u8]) {
    let mut i = 0;
    let mut at_line_start = true;
    while i < mask.len() {
        let c = mask[i];
        if c == b'\n' {
            at_line_start = true;
            i += 1;
            continue;
        }
        if at_line_start && c == b'#' {
            let mut j = i;
            while j < mask.len() {
                if mask[j] == b'\n' {
                    let mut k = j;
                    while k > i && (mask[k - 1] == b' ' || mask[k - 1] == b'\r') {
                        k -= 1;
                    }
                    if k > i && mask[k - 1] == b'\\' {
                        j += 1;
                        continue;
                    }
                    break;
                }
                j += 1;
            }
            blank(mask, i, j);
            i = j;
            continue;
        }
        if !c.is_ascii_whitespace() {
            at_line_start = false;
        }
        i += 1;
    }
}

/// Checks brace balance over masked code. Returns the offset of the first
/// offending brace on failure (an unmatched `}` or the last unclosed `{`).
pub fn check_braces(mask: &[u8]) -> Result<(), usize> {
    let mut stack = Vec::new();
    for (i, &c) in mask.iter().enumerate() {
        match c {
            b'{' => stack.push(i),
            b'}' if stack.pop().is_none() => return Err(i),
            _ => {}
        }
    }
    match stack.pop() {
        Some(open) => Err(open),
        None => Ok(()),
    }
}
