//! Tokenizer shared by model files and policy files.
//!
//! `#` starts a comment that runs to the end of the line. Lexical errors are
//! reported as diagnostics and the offending character is skipped, so the
//! token stream always ends with [`TokenKind::Eof`].

use crate::diagnostic::{Code, Diagnostic, Location, SourceSpan};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Ident(String),
    Int(u32),
    Str(String),
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Semi,
    Colon,
    Comma,
    Dot,
    Slash,
    Arrow,
    FatArrow,
    Eq,
    Bang,
    Eof,
}

impl TokenKind {
    pub fn describe(&self) -> String {
        match self {
            TokenKind::Ident(s) => format!("`{s}`"),
            TokenKind::Int(n) => format!("`{n}`"),
            TokenKind::Str(_) => "string".to_string(),
            TokenKind::LBrace => "`{`".to_string(),
            TokenKind::RBrace => "`}`".to_string(),
            TokenKind::LBracket => "`[`".to_string(),
            TokenKind::RBracket => "`]`".to_string(),
            TokenKind::Semi => "`;`".to_string(),
            TokenKind::Colon => "`:`".to_string(),
            TokenKind::Comma => "`,`".to_string(),
            TokenKind::Dot => "`.`".to_string(),
            TokenKind::Slash => "`/`".to_string(),
            TokenKind::Arrow => "`->`".to_string(),
            TokenKind::FatArrow => "`=>`".to_string(),
            TokenKind::Eq => "`=`".to_string(),
            TokenKind::Bang => "`!`".to_string(),
            TokenKind::Eof => "end of input".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: SourceSpan,
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: u32,
    column: u32,
}

impl Cursor<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }
}

pub fn tokenize(text: &str) -> (Vec<Token>, Vec<Diagnostic>) {
    let mut cur = Cursor {
        chars: text.chars().peekable(),
        line: 1,
        column: 1,
    };
    let mut tokens = Vec::new();
    let mut diags = Vec::new();

    while let Some(c) = cur.peek() {
        let (line, column) = (cur.line, cur.column);
        let span = |len: u32| SourceSpan::new(line, column, len);
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        if c == '#' {
            while cur.peek().is_some_and(|c| c != '\n') {
                cur.bump();
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while let Some(c) = cur.peek().filter(|c| c.is_ascii_alphanumeric() || *c == '_') {
                s.push(c);
                cur.bump();
            }
            let len = s.len() as u32;
            tokens.push(Token {
                kind: TokenKind::Ident(s),
                span: span(len),
            });
            continue;
        }
        if c.is_ascii_digit() {
            let mut s = String::new();
            while let Some(c) = cur.peek().filter(char::is_ascii_digit) {
                s.push(c);
                cur.bump();
            }
            let len = s.len() as u32;
            match s.parse::<u32>() {
                Ok(n) => tokens.push(Token {
                    kind: TokenKind::Int(n),
                    span: span(len),
                }),
                Err(_) => diags.push(
                    Diagnostic::error(Code::LexIntOverflow, format!("integer `{s}` is too large"))
                        .at(Location::Span(span(len))),
                ),
            }
            continue;
        }
        if c == '"' {
            cur.bump();
            let mut s = String::new();
            let mut len = 1;
            let mut closed = false;
            while let Some(c) = cur.peek() {
                if c == '\n' {
                    break;
                }
                cur.bump();
                len += 1;
                match c {
                    '"' => {
                        closed = true;
                        break;
                    }
                    '\\' => match cur.peek() {
                        Some(e @ ('"' | '\\')) => {
                            cur.bump();
                            len += 1;
                            s.push(e);
                        }
                        Some('n') => {
                            cur.bump();
                            len += 1;
                            s.push('\n');
                        }
                        _ => s.push('\\'),
                    },
                    c => s.push(c),
                }
            }
            if closed {
                tokens.push(Token {
                    kind: TokenKind::Str(s),
                    span: span(len),
                });
            } else {
                diags.push(
                    Diagnostic::error(Code::LexUnterminatedString, "unterminated string literal")
                        .at(Location::Span(span(len))),
                );
            }
            continue;
        }

        cur.bump();
        let (kind, len) = match c {
            '{' => (TokenKind::LBrace, 1),
            '}' => (TokenKind::RBrace, 1),
            '[' => (TokenKind::LBracket, 1),
            ']' => (TokenKind::RBracket, 1),
            ';' => (TokenKind::Semi, 1),
            ':' => (TokenKind::Colon, 1),
            ',' => (TokenKind::Comma, 1),
            '.' => (TokenKind::Dot, 1),
            '/' => (TokenKind::Slash, 1),
            '!' => (TokenKind::Bang, 1),
            '-' if cur.peek() == Some('>') => {
                cur.bump();
                (TokenKind::Arrow, 2)
            }
            '=' if cur.peek() == Some('>') => {
                cur.bump();
                (TokenKind::FatArrow, 2)
            }
            '=' => (TokenKind::Eq, 1),
            other => {
                diags.push(
                    Diagnostic::error(
                        Code::LexInvalidChar,
                        format!("unexpected character {:?}", other),
                    )
                    .at(Location::Span(span(1))),
                );
                continue;
            }
        };
        tokens.push(Token {
            kind,
            span: span(len),
        });
    }

    tokens.push(Token {
        kind: TokenKind::Eof,
        span: SourceSpan::new(cur.line, cur.column, 0),
    });
    (tokens, diags)
}
