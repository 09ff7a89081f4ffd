//! S-expression text form of programs.
//!
//! Applications print as `(name arg ...)`, the input variable as `IMG` and integer constants
//! as decimal literals. Symbols print bare unless they contain whitespace, parentheses, quotes
//! or could be mistaken for another atom, in which case they are double-quoted with `\"` and
//! `\\` escapes. `var0` is accepted as an alias of `IMG` when parsing.

use thiserror::Error;

use super::program::{Expr, Program, Symbol};
use super::types::{Builtin, Catalog, SemanticType};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at byte {offset}")]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("unbalanced parentheses")]
    Unbalanced,
    #[error("unterminated string")]
    UnterminatedString,
    #[error("unknown primitive `{0}`")]
    UnknownPrimitive(String),
    #[error("`{name}` expects {expected} arguments, got {found}")]
    ArityMismatch { name: String, expected: usize, found: usize },
    #[error("expected {expected}, found {found}")]
    TypeMismatch { expected: SemanticType, found: String },
    #[error("unexpected `)`")]
    UnexpectedClose,
    #[error("trailing input")]
    TrailingInput,
    #[error("empty input")]
    Empty,
}

const IMG: &str = "IMG";
const IMG_ALIAS: &str = "var0";

pub fn serialize(program: &Program) -> String {
    serialize_expr(program.root())
}

pub fn serialize_expr(expr: &Expr) -> String {
    let mut out = String::new();
    write_expr(expr, &mut out);
    out
}

fn write_expr(expr: &Expr, out: &mut String) {
    match expr {
        Expr::App(b, args) => {
            out.push('(');
            out.push_str(b.name());
            for a in args {
                out.push(' ');
                write_expr(a, out);
            }
            out.push(')');
        }
        Expr::Symbol(_, s) => write_symbol(s.as_str(), out),
        Expr::Int(i) => out.push_str(&i.to_string()),
        Expr::Img => out.push_str(IMG),
    }
}

pub(crate) fn write_symbol(s: &str, out: &mut String) {
    if symbol_needs_quotes(s) {
        out.push('"');
        for c in s.chars() {
            if c == '"' || c == '\\' {
                out.push('\\');
            }
            out.push(c);
        }
        out.push('"');
    } else {
        out.push_str(s);
    }
}

fn symbol_needs_quotes(s: &str) -> bool {
    s.is_empty()
        || s == IMG
        || s == IMG_ALIAS
        || s.parse::<i64>().is_ok()
        || s.chars().any(|c| c.is_whitespace() || matches!(c, '(' | ')' | '"' | '\\'))
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Open,
    Close,
    Atom(String),
    Quoted(String),
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let mut toks = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(i, c)) = chars.peek() {
        match c {
            c if c.is_whitespace() => {
                chars.next();
            }
            '(' => {
                chars.next();
                toks.push((i, Tok::Open));
            }
            ')' => {
                chars.next();
                toks.push((i, Tok::Close));
            }
            '"' => {
                chars.next();
                let mut s = String::new();
                let mut closed = false;
                while let Some((_, c)) = chars.next() {
                    match c {
                        '\\' => match chars.next() {
                            Some((_, e)) => s.push(e),
                            None => break,
                        },
                        '"' => {
                            closed = true;
                            break;
                        }
                        c => s.push(c),
                    }
                }
                if !closed {
                    return Err(ParseError { offset: text.len(), kind: ParseErrorKind::UnterminatedString });
                }
                toks.push((i, Tok::Quoted(s)));
            }
            _ => {
                let mut s = String::new();
                while let Some(&(_, c)) = chars.peek() {
                    if c.is_whitespace() || matches!(c, '(' | ')' | '"') {
                        break;
                    }
                    s.push(c);
                    chars.next();
                }
                toks.push((i, Tok::Atom(s)));
            }
        }
    }
    Ok(toks)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    len: usize,
    catalog: &'a Catalog,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&(usize, Tok)> {
        self.toks.get(self.pos)
    }

    fn eof(&self) -> ParseError {
        ParseError { offset: self.len, kind: ParseErrorKind::Unbalanced }
    }

    fn expr(&mut self, expected: SemanticType) -> Result<Expr, ParseError> {
        let (offset, tok) = self.peek().cloned().ok_or_else(|| self.eof())?;
        self.pos += 1;
        let expr = match tok {
            Tok::Close => {
                return Err(ParseError { offset, kind: ParseErrorKind::UnexpectedClose });
            }
            Tok::Open => {
                let (head_off, head) = self.peek().cloned().ok_or_else(|| self.eof())?;
                self.pos += 1;
                let name = match head {
                    Tok::Atom(name) => name,
                    Tok::Quoted(name) => name,
                    Tok::Close => {
                        return Err(ParseError { offset: head_off, kind: ParseErrorKind::UnexpectedClose })
                    }
                    Tok::Open => {
                        return Err(ParseError {
                            offset: head_off,
                            kind: ParseErrorKind::UnknownPrimitive("(".into()),
                        })
                    }
                };
                let builtin = Builtin::from_name(&name)
                    .filter(|b| self.catalog.contains(*b))
                    .ok_or(ParseError { offset: head_off, kind: ParseErrorKind::UnknownPrimitive(name) })?;
                let sig = builtin.signature();
                let mut args = Vec::with_capacity(sig.args.len());
                for (i, arg_ty) in sig.args.iter().enumerate() {
                    match self.peek() {
                        None => return Err(self.eof()),
                        Some((off, Tok::Close)) => {
                            return Err(ParseError {
                                offset: *off,
                                kind: ParseErrorKind::ArityMismatch {
                                    name: builtin.name().into(),
                                    expected: sig.args.len(),
                                    found: i,
                                },
                            })
                        }
                        Some(_) => args.push(self.expr(*arg_ty)?),
                    }
                }
                match self.peek() {
                    None => return Err(self.eof()),
                    Some((_, Tok::Close)) => self.pos += 1,
                    Some((off, _)) => {
                        let off = *off;
                        let extra = self.count_remaining_args()?;
                        return Err(ParseError {
                            offset: off,
                            kind: ParseErrorKind::ArityMismatch {
                                name: builtin.name().into(),
                                expected: sig.args.len(),
                                found: sig.args.len() + extra,
                            },
                        });
                    }
                }
                Expr::App(builtin, args)
            }
            Tok::Atom(a) if a == IMG || a == IMG_ALIAS => Expr::Img,
            Tok::Atom(a) => match a.parse::<i64>() {
                Ok(i) => Expr::Int(i),
                Err(_) => self.symbol(offset, a, expected)?,
            },
            Tok::Quoted(s) => self.symbol(offset, s, expected)?,
        };
        if expr.ty() != expected {
            return Err(ParseError {
                offset,
                kind: ParseErrorKind::TypeMismatch { expected, found: expr.ty().to_string() },
            });
        }
        Ok(expr)
    }

    fn symbol(&self, offset: usize, text: String, expected: SemanticType) -> Result<Expr, ParseError> {
        match expected.symbol_kind() {
            Some(kind) => Ok(Expr::Symbol(kind, Symbol::new(&text))),
            None => Err(ParseError {
                offset,
                kind: ParseErrorKind::TypeMismatch { expected, found: format!("symbol `{text}`") },
            }),
        }
    }

    // Counts surplus sibling arguments up to the closing paren, for error reporting.
    fn count_remaining_args(&mut self) -> Result<usize, ParseError> {
        let mut n = 0;
        let mut depth = 0usize;
        while let Some((_, t)) = self.peek().cloned() {
            self.pos += 1;
            match t {
                Tok::Open => {
                    if depth == 0 {
                        n += 1;
                    }
                    depth += 1;
                }
                Tok::Close if depth == 0 => return Ok(n),
                Tok::Close => depth -= 1,
                _ if depth == 0 => n += 1,
                _ => {}
            }
        }
        Err(self.eof())
    }
}

/// Parses a BOOL-rooted program over the primitives of `catalog`.
pub fn parse_program(text: &str, catalog: &Catalog) -> Result<Program, ParseError> {
    parse_expr(text, catalog, SemanticType::Bool).map(Program::new)
}

pub fn parse_expr(text: &str, catalog: &Catalog, expected: SemanticType) -> Result<Expr, ParseError> {
    let toks = tokenize(text)?;
    if toks.is_empty() {
        return Err(ParseError { offset: 0, kind: ParseErrorKind::Empty });
    }
    let mut parser = Parser { toks, pos: 0, len: text.len(), catalog };
    let expr = parser.expr(expected)?;
    if let Some((off, tok)) = parser.peek() {
        let kind = if *tok == Tok::Close { ParseErrorKind::UnexpectedClose } else { ParseErrorKind::TrailingInput };
        return Err(ParseError { offset: *off, kind });
    }
    Ok(expr)
}
