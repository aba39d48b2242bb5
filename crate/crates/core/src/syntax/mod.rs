//! Front end for the Java-like mini-language: tokens, AST and a
//! recursive-descent parser.
//!
//! The statement core is `v = e`, `return e` and bare expressions, with
//! access paths and calls as expressions. Around it sit enough class-level
//! syntax (package, import, class, extends, fields, methods, typed locals)
//! to carry declared types for every identifier.

mod ast;
mod lexer;
mod parser;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ast::*;
pub use lexer::{tokenize, Token, TokenKind};
pub use parser::{parse_compilation, parse_unit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SyntaxError {
    #[error("{pos}: {message}")]
    Lexical { pos: Pos, message: String },
    #[error("{pos}: expected {expected}, found `{found}`")]
    Unexpected { pos: Pos, expected: String, found: String },
    #[error("{pos}: duplicate declaration `{name}` in scope `{scope}`")]
    Duplicate { pos: Pos, name: String, scope: String },
    #[error("expected exactly one top-level class, found {0}")]
    ClassCount(usize),
}

impl SyntaxError {
    pub fn pos(&self) -> Option<Pos> {
        match self {
            SyntaxError::Lexical { pos, .. }
            | SyntaxError::Unexpected { pos, .. }
            | SyntaxError::Duplicate { pos, .. } => Some(*pos),
            SyntaxError::ClassCount(_) => None,
        }
    }
}
