use std::fmt;

use super::{Pos, SyntaxError};

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Ident(String),
    Int(i64),
    Float(f64),
    Str(String),
    Char(char),
    /// Operators and punctuation, stored verbatim (`+=`, `(`, `...`).
    Punct(&'static str),
    Eof,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Ident(s) => write!(f, "{}", s),
            TokenKind::Int(v) => write!(f, "{}", v),
            TokenKind::Float(v) => write!(f, "{}", v),
            TokenKind::Str(s) => write!(f, "\"{}\"", s),
            TokenKind::Char(c) => write!(f, "'{}'", c),
            TokenKind::Punct(p) => write!(f, "{}", p),
            TokenKind::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub pos: Pos,
}

// Longest first so that maximal munch works with a linear scan.
const PUNCTS: &[&str] = &[
    "...", "+=", "-=", "*=", "/=", "%=", "==", "!=", "<=", ">=", "&&", "||", "++", "--", "{", "}",
    "(", ")", "[", "]", ";", ",", ".", "=", "+", "-", "*", "/", "%", "<", ">", "!", "?", ":", "&",
    "|", "@",
];

pub fn tokenize(text: &str) -> Result<Vec<Token>, SyntaxError> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    let mut line = 1u32;
    let mut col = 1u32;

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            bump!();
            continue;
        }
        // comments
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            let start = Pos { line, col };
            bump!();
            bump!();
            loop {
                if i >= chars.len() {
                    return Err(SyntaxError::Lexical {
                        pos: start,
                        message: "unterminated block comment".into(),
                    });
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    bump!();
                    bump!();
                    break;
                }
                bump!();
            }
            continue;
        }

        let pos = Pos { line, col };
        if c.is_alphabetic() || c == '_' || c == '$' {
            let mut s = String::new();
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '$')
            {
                s.push(chars[i]);
                bump!();
            }
            tokens.push(Token { kind: TokenKind::Ident(s), pos });
            continue;
        }
        if c.is_ascii_digit() {
            let mut s = String::new();
            let mut is_float = false;
            while i < chars.len() && chars[i].is_ascii_digit() {
                s.push(chars[i]);
                bump!();
            }
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                is_float = true;
                s.push('.');
                bump!();
                while i < chars.len() && chars[i].is_ascii_digit() {
                    s.push(chars[i]);
                    bump!();
                }
            }
            // Java numeric suffixes carry no information here.
            if i < chars.len() && matches!(chars[i], 'L' | 'l' | 'f' | 'F' | 'd' | 'D') {
                is_float |= matches!(chars[i], 'f' | 'F' | 'd' | 'D');
                bump!();
            }
            let kind = if is_float {
                TokenKind::Float(s.parse().map_err(|_| SyntaxError::Lexical {
                    pos,
                    message: format!("bad number `{}`", s),
                })?)
            } else {
                TokenKind::Int(s.parse().map_err(|_| SyntaxError::Lexical {
                    pos,
                    message: format!("integer literal `{}` out of range", s),
                })?)
            };
            tokens.push(Token { kind, pos });
            continue;
        }
        if c == '"' {
            bump!();
            let mut s = String::new();
            loop {
                if i >= chars.len() || chars[i] == '\n' {
                    return Err(SyntaxError::Lexical {
                        pos,
                        message: "unterminated string literal".into(),
                    });
                }
                if chars[i] == '"' {
                    bump!();
                    break;
                }
                if chars[i] == '\\' && i + 1 < chars.len() {
                    bump!();
                }
                s.push(chars[i]);
                bump!();
            }
            tokens.push(Token { kind: TokenKind::Str(s), pos });
            continue;
        }
        if c == '\'' {
            bump!();
            if i < chars.len() && chars[i] == '\\' {
                bump!();
            }
            if i + 1 >= chars.len() || chars[i + 1] != '\'' {
                return Err(SyntaxError::Lexical {
                    pos,
                    message: "malformed character literal".into(),
                });
            }
            let ch = chars[i];
            bump!();
            bump!();
            tokens.push(Token { kind: TokenKind::Char(ch), pos });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
        match PUNCTS.iter().find(|p| rest.starts_with(**p)) {
            Some(p) => {
                for _ in 0..p.chars().count() {
                    bump!();
                }
                tokens.push(Token { kind: TokenKind::Punct(p), pos });
            }
            None => {
                return Err(SyntaxError::Lexical {
                    pos,
                    message: format!("unexpected character `{}`", c),
                })
            }
        }
    }
    tokens.push(Token { kind: TokenKind::Eof, pos: Pos { line, col } });
    Ok(tokens)
}
