//! Tokenizer shared by field paths and condition expressions.

use std::fmt;

use thiserror::Error;

/// Malformed path or condition text.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at position {position}: expected {expected}")]
pub struct SyntaxError {
    pub position: usize,
    pub expected: String,
}

impl SyntaxError {
    pub(crate) fn new(position: usize, expected: impl Into<String>) -> Self {
        Self {
            position,
            expected: expected.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "<>",
            CmpOp::Lt => "<",
            CmpOp::Gt => ">",
            CmpOp::Le => "<=",
            CmpOp::Ge => ">=",
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Dollar,
    At,
    Dot,
    LBracket,
    RBracket,
    LParen,
    RParen,
    Question,
    Comma,
    Cmp(CmpOp),
    Ident(String),
    Str(String),
    Int(i64),
    Float(f64),
}

impl Tok {
    pub(crate) fn is_keyword(&self, kw: &str) -> bool {
        matches!(self, Tok::Ident(s) if s.eq_ignore_ascii_case(kw))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub pos: usize,
}

pub(crate) const KEYWORDS: &[&str] = &[
    "AND", "OR", "NOT", "BETWEEN", "IN", "LIKE", "IS", "NULL", "TRUE", "FALSE",
];

pub(crate) fn is_keyword(ident: &str) -> bool {
    KEYWORDS.iter().any(|k| k.eq_ignore_ascii_case(ident))
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, SyntaxError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < src.len() {
        let c = src[i..].chars().next().unwrap();
        let start = i;
        if c.is_whitespace() {
            i += c.len_utf8();
            continue;
        }
        let simple = match c {
            '$' => Some(Tok::Dollar),
            '@' => Some(Tok::At),
            '.' if !bytes.get(i + 1).is_some_and(u8::is_ascii_digit) => Some(Tok::Dot),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '?' => Some(Tok::Question),
            ',' => Some(Tok::Comma),
            '=' => Some(Tok::Cmp(CmpOp::Eq)),
            '≠' => Some(Tok::Cmp(CmpOp::Ne)),
            '≤' => Some(Tok::Cmp(CmpOp::Le)),
            '≥' => Some(Tok::Cmp(CmpOp::Ge)),
            _ => None,
        };
        if let Some(tok) = simple {
            out.push(Token { tok, pos: start });
            i += c.len_utf8();
            continue;
        }
        match c {
            '<' => {
                let (op, len) = match bytes.get(i + 1) {
                    Some(b'=') => (CmpOp::Le, 2),
                    Some(b'>') => (CmpOp::Ne, 2),
                    _ => (CmpOp::Lt, 1),
                };
                out.push(Token { tok: Tok::Cmp(op), pos: start });
                i += len;
            }
            '>' => {
                let (op, len) = match bytes.get(i + 1) {
                    Some(b'=') => (CmpOp::Ge, 2),
                    _ => (CmpOp::Gt, 1),
                };
                out.push(Token { tok: Tok::Cmp(op), pos: start });
                i += len;
            }
            '!' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    out.push(Token {
                        tok: Tok::Cmp(CmpOp::Ne),
                        pos: start,
                    });
                    i += 2;
                } else {
                    return Err(SyntaxError::new(start, "'!='"));
                }
            }
            '\'' => {
                let mut s = String::new();
                i += 1;
                loop {
                    let Some(ch) = src[i..].chars().next() else {
                        return Err(SyntaxError::new(src.len(), "closing quote"));
                    };
                    if ch == '\'' {
                        if bytes.get(i + 1) == Some(&b'\'') {
                            s.push('\'');
                            i += 2;
                            continue;
                        }
                        i += 1;
                        break;
                    }
                    s.push(ch);
                    i += ch.len_utf8();
                }
                out.push(Token { tok: Tok::Str(s), pos: start });
            }
            c if c.is_ascii_digit() || c == '-' || c == '.' => {
                let tok = lex_number(src, &mut i)?;
                out.push(Token { tok, pos: start });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                while i < src.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push(Token {
                    tok: Tok::Ident(src[start..i].to_string()),
                    pos: start,
                });
            }
            _ => return Err(SyntaxError::new(start, "a token")),
        }
    }
    Ok(out)
}

fn lex_number(src: &str, i: &mut usize) -> Result<Tok, SyntaxError> {
    let bytes = src.as_bytes();
    let start = *i;
    let mut is_float = false;
    if bytes[*i] == b'-' {
        *i += 1;
    }
    let digits_start = *i;
    while *i < src.len() {
        match bytes[*i] {
            b'0'..=b'9' => *i += 1,
            b'.' => {
                is_float = true;
                *i += 1;
            }
            b'e' | b'E' => {
                is_float = true;
                *i += 1;
                if *i < src.len() && (bytes[*i] == b'-' || bytes[*i] == b'+') {
                    *i += 1;
                }
            }
            _ => break,
        }
    }
    if *i == digits_start {
        return Err(SyntaxError::new(start, "a number"));
    }
    let text = &src[start..*i];
    if is_float {
        text.parse::<f64>()
            .map(Tok::Float)
            .map_err(|_| SyntaxError::new(start, "a number"))
    } else {
        text.parse::<i64>()
            .map(Tok::Int)
            .map_err(|_| SyntaxError::new(start, "a 64-bit integer"))
    }
}
