//! Indentation-sensitive tokenizer.
//!
//! One indentation unit is a tab, or a run of N spaces where N is fixed by
//! the first indented line of the file. Indentation and newlines are not
//! significant between parentheses.

use std::fmt;

use crate::diagnostic::{Diagnostic, Location};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    /// `->`
    Arrow,
    /// `?`
    Question,
    /// `=>`
    Parallel,
    /// `r->`
    RArrow,
    /// `r?`
    RQuestion,
    Keyword,
    Ident,
    Str,
    Equals,
    LParen,
    RParen,
    Indent,
    Dedent,
    Newline,
    Eof,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TokenKind::Arrow => "`->`",
            TokenKind::Question => "`?`",
            TokenKind::Parallel => "`=>`",
            TokenKind::RArrow => "`r->`",
            TokenKind::RQuestion => "`r?`",
            TokenKind::Keyword => "keyword",
            TokenKind::Ident => "identifier",
            TokenKind::Str => "string",
            TokenKind::Equals => "`=`",
            TokenKind::LParen => "`(`",
            TokenKind::RParen => "`)`",
            TokenKind::Indent => "indentation",
            TokenKind::Dedent => "dedent",
            TokenKind::Newline => "end of line",
            TokenKind::Eof => "end of file",
        };
        f.write_str(s)
    }
}

pub const KEYWORDS: &[&str] = &[
    "BehaviorTree",
    "ID",
    "name",
    "satisfices",
    "satisfies",
    "Quality",
    "QualityReq",
    "description",
    "successIf",
    "failureIf",
    "Action",
    "Condition",
    "SubTree",
    "Inverter",
    "Repeat",
    "RetryUntilSuccessful",
    "ForceSuccess",
    "ForceFailure",
    "KeepRunningUntilFailure",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    /// Keyword/identifier text, or the unescaped string value.
    pub text: String,
    pub line: usize,
    pub column: usize,
}

impl Token {
    pub fn is_keyword(&self, word: &str) -> bool {
        self.kind == TokenKind::Keyword && self.text == word
    }
}

/// A DSL document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceFile {
    pub path: String,
    pub text: String,
}

impl SourceFile {
    pub fn new(path: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Unit {
    Tab,
    Spaces(usize),
}

struct Lexer<'a> {
    file: &'a str,
    tokens: Vec<Token>,
    diagnostics: Vec<Diagnostic>,
    unit: Option<Unit>,
    level: usize,
    paren_depth: usize,
}

pub fn tokenize(src: &SourceFile) -> Result<Vec<Token>, Vec<Diagnostic>> {
    let mut lx = Lexer {
        file: &src.path,
        tokens: Vec::new(),
        diagnostics: Vec::new(),
        unit: None,
        level: 0,
        paren_depth: 0,
    };
    for (idx, line) in src.text.split('\n').enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        lx.line(idx + 1, line);
    }
    let last_line = src.text.split('\n').count().max(1);
    if lx.paren_depth > 0 {
        lx.error("E106", "unclosed `(` at end of file", last_line, 1);
    }
    if lx.tokens.last().is_some_and(|t| t.kind != TokenKind::Newline) {
        lx.push(TokenKind::Newline, "", last_line, 1);
    }
    for _ in 0..lx.level {
        lx.push(TokenKind::Dedent, "", last_line, 1);
    }
    lx.push(TokenKind::Eof, "", last_line, 1);

    if lx.diagnostics.is_empty() {
        Ok(lx.tokens)
    } else {
        Err(lx.diagnostics)
    }
}

impl Lexer<'_> {
    fn push(&mut self, kind: TokenKind, text: impl Into<String>, line: usize, column: usize) {
        self.tokens.push(Token {
            kind,
            text: text.into(),
            line,
            column,
        });
    }

    fn error(&mut self, code: &'static str, message: impl Into<String>, line: usize, column: usize) {
        self.diagnostics
            .push(Diagnostic::error(code, message, Location::new(self.file, line, column)));
    }

    fn line(&mut self, lineno: usize, line: &str) {
        let chars: Vec<char> = line.chars().collect();
        let indent_len = chars.iter().take_while(|c| **c == ' ' || **c == '\t').count();
        let rest_blank = chars[indent_len..].is_empty() || chars[indent_len] == '#';

        if self.paren_depth == 0 {
            if rest_blank {
                return;
            }
            if !self.indentation(lineno, &chars[..indent_len]) {
                return;
            }
        }
        self.scan(lineno, &chars, indent_len);
        if self.paren_depth == 0 {
            self.push(TokenKind::Newline, "", lineno, chars.len() + 1);
        }
    }

    /// Emits INDENT/DEDENT tokens; returns false when the line is unusable.
    fn indentation(&mut self, lineno: usize, ws: &[char]) -> bool {
        let tabs = ws.iter().filter(|c| **c == '\t').count();
        let spaces = ws.len() - tabs;
        if tabs > 0 && spaces > 0 {
            self.error("E101", "indentation mixes tabs and spaces", lineno, 1);
            return false;
        }
        let level = if ws.is_empty() {
            0
        } else {
            let unit = *self.unit.get_or_insert(if tabs > 0 {
                Unit::Tab
            } else {
                Unit::Spaces(spaces)
            });
            match unit {
                Unit::Tab if spaces > 0 => {
                    self.error("E101", "space indentation in a tab-indented file", lineno, 1);
                    return false;
                }
                Unit::Spaces(_) if tabs > 0 => {
                    self.error("E101", "tab indentation in a space-indented file", lineno, 1);
                    return false;
                }
                Unit::Tab => tabs,
                Unit::Spaces(n) => {
                    if !spaces.is_multiple_of(n) {
                        self.error(
                            "E102",
                            format!("indentation of {spaces} spaces is not a multiple of the {n}-space unit"),
                            lineno,
                            spaces + 1,
                        );
                        return false;
                    }
                    spaces / n
                }
            }
        };
        let column = ws.len() + 1;
        while self.level < level {
            self.level += 1;
            self.push(TokenKind::Indent, "", lineno, column);
        }
        while self.level > level {
            self.level -= 1;
            self.push(TokenKind::Dedent, "", lineno, column);
        }
        true
    }

    fn scan(&mut self, lineno: usize, chars: &[char], start: usize) {
        let mut i = start;
        while i < chars.len() {
            let c = chars[i];
            let col = i + 1;
            let next = chars.get(i + 1).copied();
            match c {
                ' ' | '\t' => i += 1,
                '#' => break,
                '(' => {
                    self.paren_depth += 1;
                    self.push(TokenKind::LParen, "(", lineno, col);
                    i += 1;
                }
                ')' => {
                    if self.paren_depth == 0 {
                        self.error("E106", "unmatched `)`", lineno, col);
                    } else {
                        self.paren_depth -= 1;
                    }
                    self.push(TokenKind::RParen, ")", lineno, col);
                    i += 1;
                }
                '-' if next == Some('>') => {
                    self.push(TokenKind::Arrow, "->", lineno, col);
                    i += 2;
                }
                '?' => {
                    self.push(TokenKind::Question, "?", lineno, col);
                    i += 1;
                }
                '=' if next == Some('>') => {
                    self.push(TokenKind::Parallel, "=>", lineno, col);
                    i += 2;
                }
                '=' => {
                    self.push(TokenKind::Equals, "=", lineno, col);
                    i += 1;
                }
                'r' if next == Some('?') => {
                    self.push(TokenKind::RQuestion, "r?", lineno, col);
                    i += 2;
                }
                'r' if next == Some('-') && chars.get(i + 2) == Some(&'>') => {
                    self.push(TokenKind::RArrow, "r->", lineno, col);
                    i += 3;
                }
                '"' => match self.string(lineno, chars, i) {
                    Some((value, end)) => {
                        self.push(TokenKind::Str, value, lineno, col);
                        i = end;
                    }
                    None => return,
                },
                c if c.is_ascii_alphabetic() || c == '_' => {
                    let begin = i;
                    while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                        i += 1;
                    }
                    let word: String = chars[begin..i].iter().collect();
                    let kind = if is_keyword(&word) {
                        TokenKind::Keyword
                    } else {
                        TokenKind::Ident
                    };
                    self.push(kind, word, lineno, col);
                }
                other => {
                    self.error("E104", format!("unexpected character `{other}`"), lineno, col);
                    i += 1;
                }
            }
        }
    }

    /// Scans a string starting at the opening quote; returns the unescaped
    /// value and the index after the closing quote.
    fn string(&mut self, lineno: usize, chars: &[char], open: usize) -> Option<(String, usize)> {
        let mut value = String::new();
        let mut i = open + 1;
        while i < chars.len() {
            match chars[i] {
                '"' => return Some((value, i + 1)),
                '\\' => {
                    match chars.get(i + 1) {
                        Some('"') => value.push('"'),
                        Some('\\') => value.push('\\'),
                        Some('n') => value.push('\n'),
                        Some('t') => value.push('\t'),
                        _ => {
                            self.error("E105", "invalid escape sequence", lineno, i + 1);
                        }
                    }
                    i += 2;
                }
                c => {
                    value.push(c);
                    i += 1;
                }
            }
        }
        self.error("E103", "unterminated string", lineno, open + 1);
        None
    }
}

/// Quotes a value using the DSL's escape rules.
pub fn quote(value: &str) -> String {
    let mut out = String::with_capacity(value.len() + 2);
    out.push('"');
    for c in value.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}
