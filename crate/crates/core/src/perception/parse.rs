//! Parsing of Python list literals returned by the model, with repair of truncated or looping
//! output.
//!
//! Repairs run only when strict parsing fails, in this order:
//! 1. close an unterminated string, then the open inner list, then the outer list;
//! 2. on an unexpected token, drop the incomplete trailing row and close what remains;
//! 3. collapse immediately repeated rows left behind by generation loops.

use serde::{Deserialize, Serialize};

use crate::dsl::normalize_symbol;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Item {
    Str(String),
    List(Vec<Item>),
}

/// A repair step that fired while parsing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Repair {
    CloseString,
    CloseList,
    TruncateRow,
    CollapseRepeats,
    Reshape,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedListResponse {
    pub rows: Vec<Vec<String>>,
    pub parse_ok: bool,
    pub repaired: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub repairs: Vec<Repair>,
    pub raw_text: String,
}

/// Expected shape of the assigned list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    /// `name = ['a', 'b']`; each item becomes a one-element row.
    Flat,
    /// `name = [['a', 'b'], ['c']]`.
    Nested,
}

/// Text between the first code fence and the next one, or the whole text without a fence.
fn fenced_body(raw: &str) -> &str {
    let Some(start) = raw.find("```") else {
        return raw;
    };
    let after = &raw[start + 3..];
    let body = match after.find('\n') {
        Some(nl) if !after[..nl].contains('[') => &after[nl + 1..],
        _ => after,
    };
    match body.find("```") {
        Some(end) => &body[..end],
        None => body,
    }
}

/// Start of the list literal: the first `[` after an assignment, or the first `[` at all.
fn list_start(body: &str) -> Option<usize> {
    match body.find('=') {
        Some(eq) if body[..eq].trim().chars().all(|c| c.is_alphanumeric() || c == '_') => {
            body[eq..].find('[').map(|i| eq + i)
        }
        _ => body.find('['),
    }
}

struct Strict<'a> {
    s: &'a [u8],
    text: &'a str,
    i: usize,
}

impl Strict<'_> {
    fn ws(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn value(&mut self) -> Option<Item> {
        self.ws();
        match *self.s.get(self.i)? {
            b'[' => {
                self.i += 1;
                let mut items = Vec::new();
                loop {
                    self.ws();
                    if *self.s.get(self.i)? == b']' {
                        self.i += 1;
                        return Some(Item::List(items));
                    }
                    items.push(self.value()?);
                    self.ws();
                    match *self.s.get(self.i)? {
                        b',' => self.i += 1,
                        b']' => {
                            self.i += 1;
                            return Some(Item::List(items));
                        }
                        _ => return None,
                    }
                }
            }
            q @ (b'\'' | b'"') => {
                let (s, closed, next) = read_string(self.text, self.i + 1, q as char);
                self.i = next;
                closed.then_some(Item::Str(s))
            }
            _ => None,
        }
    }
}

/// Reads a quoted string starting after the opening quote. Returns the content, whether the
/// closing quote was found and the byte offset after it.
fn read_string(text: &str, from: usize, quote: char) -> (String, bool, usize) {
    let mut out = String::new();
    let mut chars = text[from..].char_indices();
    while let Some((off, c)) = chars.next() {
        match c {
            '\\' => match chars.next() {
                Some((_, 'n')) => out.push('\n'),
                Some((_, 't')) => out.push('\t'),
                Some((_, e)) => out.push(e),
                None => return (out, false, text.len()),
            },
            c if c == quote => return (out, true, from + off + c.len_utf8()),
            c => out.push(c),
        }
    }
    (out, false, text.len())
}

fn parse_lenient(text: &str, repairs: &mut Vec<Repair>) -> Option<Item> {
    let bytes = text.as_bytes();
    let mut stack: Vec<Vec<Item>> = Vec::new();
    let mut i = 0;
    let mut junk = false;
    // Set after a complete item; the next token must be `,` or `]`.
    let mut need_sep = false;
    while i < bytes.len() {
        match bytes[i] {
            b if b.is_ascii_whitespace() => i += 1,
            b',' if need_sep => {
                need_sep = false;
                i += 1;
            }
            b'[' if !need_sep => {
                stack.push(Vec::new());
                i += 1;
            }
            b']' => {
                let done = Item::List(stack.pop()?);
                match stack.last_mut() {
                    Some(parent) => parent.push(done),
                    None => return Some(done),
                }
                need_sep = true;
                i += 1;
            }
            q @ (b'\'' | b'"') if !stack.is_empty() && !need_sep => {
                let (s, closed, next) = read_string(text, i + 1, q as char);
                if !closed {
                    repairs.push(Repair::CloseString);
                }
                stack.last_mut()?.push(Item::Str(s));
                need_sep = true;
                i = next;
            }
            _ => {
                junk = true;
                break;
            }
        }
    }
    if stack.is_empty() {
        return None;
    }
    if junk {
        repairs.push(Repair::TruncateRow);
        if stack.len() >= 2 {
            stack.pop();
        }
    }
    while let Some(top) = stack.pop() {
        repairs.push(Repair::CloseList);
        let done = Item::List(top);
        match stack.last_mut() {
            Some(parent) => parent.push(done),
            None => return Some(done),
        }
    }
    None
}

fn collapse_repeats(items: Vec<Item>, repairs: &mut Vec<Repair>) -> Vec<Item> {
    let before = items.len();
    let mut out: Vec<Item> = Vec::with_capacity(before);
    for it in items {
        if out.last() != Some(&it) {
            out.push(it);
        }
    }
    if out.len() != before {
        repairs.push(Repair::CollapseRepeats);
    }
    out
}

fn to_rows(items: Vec<Item>, shape: Shape, repairs: &mut Vec<Repair>) -> Option<Vec<Vec<String>>> {
    let mut rows = Vec::new();
    let mut reshaped = false;
    for it in items {
        let row = match (shape, it) {
            (Shape::Flat, Item::Str(s)) => vec![s],
            (Shape::Nested, Item::List(cells)) => {
                let mut row = Vec::with_capacity(cells.len());
                for c in cells {
                    match c {
                        Item::Str(s) => row.push(s),
                        Item::List(_) => return None,
                    }
                }
                row
            }
            (Shape::Nested, Item::Str(s)) => {
                reshaped = true;
                vec![s]
            }
            (Shape::Flat, Item::List(cells)) => {
                reshaped = true;
                for c in cells {
                    match c {
                        Item::Str(s) => rows.push(vec![s]),
                        Item::List(_) => return None,
                    }
                }
                continue;
            }
        };
        rows.push(row);
    }
    if reshaped {
        repairs.push(Repair::Reshape);
    }
    let rows = rows
        .into_iter()
        .map(|r| r.iter().map(|s| normalize_symbol(s)).filter(|s| !s.is_empty()).collect::<Vec<_>>())
        .filter(|r| !r.is_empty())
        .collect();
    Some(rows)
}

/// Parses a model answer containing `name = [...]`, optionally inside a code fence.
pub fn parse_list_response(raw: &str, shape: Shape) -> ParsedListResponse {
    let failed = || ParsedListResponse {
        rows: Vec::new(),
        parse_ok: false,
        repaired: false,
        repairs: Vec::new(),
        raw_text: raw.to_string(),
    };
    let body = fenced_body(raw);
    let Some(start) = list_start(body) else {
        return failed();
    };
    let body = &body[start..];
    let mut repairs = Vec::new();
    let strict = Strict { s: body.as_bytes(), text: body, i: 0 }.value();
    let (item, repaired) = match strict {
        Some(item) => (item, false),
        None => match parse_lenient(body, &mut repairs) {
            Some(item) => (item, true),
            None => return failed(),
        },
    };
    let Item::List(mut items) = item else {
        return failed();
    };
    if repaired {
        items = collapse_repeats(items, &mut repairs);
    }
    match to_rows(items, shape, &mut repairs) {
        Some(rows) => {
            if !repairs.is_empty() {
                log::info!("repaired model output with {repairs:?}");
            }
            ParsedListResponse { rows, parse_ok: true, repaired: !repairs.is_empty(), repairs, raw_text: raw.to_string() }
        }
        None => failed(),
    }
}

/// Reads a leading YES or NO, ignoring case, punctuation and markup.
pub fn parse_yes_no(raw: &str) -> Option<bool> {
    let word: String = raw
        .trim_start_matches(|c: char| !c.is_alphanumeric())
        .chars()
        .take_while(|c| c.is_alphabetic())
        .collect();
    match word.to_ascii_uppercase().as_str() {
        "YES" => Some(true),
        "NO" => Some(false),
        _ => None,
    }
}
