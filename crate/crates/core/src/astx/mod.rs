//! Build-flag recovery, compiler AST dumps, and budgeted condensation.

mod condense;
mod dump;
mod flags;

use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub use condense::{condense, AstKind, AstNode, CondensedAst};
pub use dump::{dump_ast, dump_many, renumber_ids, AstCache, RawAst, ToolTemplate, DEFAULT_TOOL};
pub use flags::{recover_flags, BuildFlags, FlagRecovery, FlagSource};

#[derive(Debug, Error)]
pub enum AstError {
    #[error("invalid tool template `{0}`")]
    BadTemplate(String),
    #[error("cannot run `{0}`: {1}")]
    ToolUnavailable(String, String),
    #[error("frontend exited with status {status:?}: {stderr}")]
    ToolFailed { status: Option<i32>, stderr: String },
    #[error("malformed AST dump at byte {offset}: {message}")]
    MalformedDump { offset: usize, message: String },
    #[error("function `{0}` has no definition in the dump (unit/translation unit mismatch)")]
    UnitNotInDump(String),
    #[error("i/o error on {0}: {1}")]
    Io(PathBuf, io::Error),
}
