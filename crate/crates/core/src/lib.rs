//! Design-document-aware comment generation and evaluation for C/C++ code.

pub mod astx;
pub mod corpus;
pub mod classify;
pub mod docstore;
pub mod embed;
pub mod evalkit;
pub mod lexer;
pub mod llmclient;
pub mod promptgen;
pub mod report;
pub mod types;

pub use types::{estimate_tokens, Setup};
