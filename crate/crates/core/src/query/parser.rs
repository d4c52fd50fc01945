use std::fmt;

use thiserror::Error;

use super::{CompareOp, CompareTarget, Query, TextField};
use crate::model::Dimension;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    /// Byte offset into the query string.
    pub position: usize,
    pub expected: Vec<String>,
    pub found: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "query parse error at position {}: expected {}, found {}",
            self.position,
            self.expected.join(" or "),
            self.found
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    LParen,
    RParen,
    Colon,
    Op(CompareOp),
    Word(String),
    Quoted(String),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::LParen => "\"(\"".into(),
            Tok::RParen => "\")\"".into(),
            Tok::Colon => "\":\"".into(),
            Tok::Op(op) => format!("{:?}", op.as_str()),
            Tok::Word(w) => format!("{w:?}"),
            Tok::Quoted(q) => format!("quoted {q:?}"),
            Tok::Eof => "end of query".into(),
        }
    }

    fn keyword(&self, kw: &str) -> bool {
        matches!(self, Tok::Word(w) if w.eq_ignore_ascii_case(kw))
    }
}

fn is_word_char(c: char) -> bool {
    !c.is_whitespace() && !matches!(c, '(' | ')' | '"' | ':' | '<' | '>' | '=')
}

/// True when `term` can be written without quotes after `field:`.
pub(crate) fn is_plain_word(term: &str) -> bool {
    !term.is_empty() && term.chars().all(is_word_char)
}

fn lex(input: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let mut toks = Vec::new();
    let mut chars = input.char_indices().peekable();
    while let Some(&(pos, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        let tok = match c {
            '(' => {
                chars.next();
                Tok::LParen
            }
            ')' => {
                chars.next();
                Tok::RParen
            }
            ':' => {
                chars.next();
                Tok::Colon
            }
            '=' => {
                chars.next();
                Tok::Op(CompareOp::Eq)
            }
            '<' | '>' => {
                chars.next();
                let or_equal = matches!(chars.peek(), Some(&(_, '=')));
                if or_equal {
                    chars.next();
                }
                Tok::Op(match (c, or_equal) {
                    ('<', false) => CompareOp::Lt,
                    ('<', true) => CompareOp::Le,
                    ('>', false) => CompareOp::Gt,
                    _ => CompareOp::Ge,
                })
            }
            '"' => {
                chars.next();
                let mut s = String::new();
                let mut closed = false;
                while let Some((_, c)) = chars.next() {
                    match c {
                        '"' => {
                            closed = true;
                            break;
                        }
                        '\\' => {
                            if let Some((_, escaped)) = chars.next() {
                                s.push(escaped);
                            }
                        }
                        c => s.push(c),
                    }
                }
                if !closed {
                    return Err(ParseError {
                        position: input.len(),
                        expected: vec!["closing '\"'".into()],
                        found: "end of query".into(),
                    });
                }
                Tok::Quoted(s)
            }
            _ => {
                let mut s = String::new();
                while let Some(&(_, c)) = chars.peek() {
                    if !is_word_char(c) {
                        break;
                    }
                    s.push(c);
                    chars.next();
                }
                Tok::Word(s)
            }
        };
        toks.push((pos, tok));
    }
    toks.push((input.len(), Tok::Eof));
    Ok(toks)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn peek_at(&self, ahead: usize) -> &Tok {
        let i = (self.pos + ahead).min(self.toks.len() - 1);
        &self.toks[i].1
    }

    fn advance(&mut self) -> Tok {
        let tok = self.toks[self.pos].1.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        tok
    }

    fn error(&self, expected: &[&str]) -> ParseError {
        ParseError {
            position: self.toks[self.pos].0,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().describe(),
        }
    }

    fn starts_operand(&self) -> bool {
        match self.peek() {
            Tok::LParen | Tok::Quoted(_) => true,
            t @ Tok::Word(_) => !t.keyword("AND") && !t.keyword("OR"),
            _ => false,
        }
    }

    fn parse_or(&mut self) -> Result<Query, ParseError> {
        let mut children = vec![self.parse_and()?];
        while self.peek().keyword("OR") {
            self.advance();
            children.push(self.parse_and()?);
        }
        Ok(collapse(children, Query::Or))
    }

    fn parse_and(&mut self) -> Result<Query, ParseError> {
        let mut children = vec![self.parse_not()?];
        loop {
            if self.peek().keyword("AND") {
                self.advance();
                children.push(self.parse_not()?);
            } else if self.starts_operand() {
                children.push(self.parse_not()?);
            } else {
                break;
            }
        }
        Ok(collapse(children, Query::And))
    }

    fn parse_not(&mut self) -> Result<Query, ParseError> {
        if self.peek().keyword("NOT") {
            self.advance();
            return Ok(Query::Not(Box::new(self.parse_not()?)));
        }
        self.parse_primary()
    }

    fn parse_primary(&mut self) -> Result<Query, ParseError> {
        const OPERAND: &[&str] = &["\"(\"", "NOT", "term", "field:term", "comparison"];
        match self.peek().clone() {
            Tok::LParen => {
                self.advance();
                let inner = self.parse_or()?;
                if *self.peek() != Tok::RParen {
                    return Err(self.error(&["\")\"", "AND", "OR", "NOT", "term"]));
                }
                self.advance();
                Ok(inner)
            }
            Tok::Quoted(term) => {
                self.advance();
                Ok(Query::text(TextField::Any, term))
            }
            t @ Tok::Word(_) if t.keyword("AND") || t.keyword("OR") => Err(self.error(OPERAND)),
            Tok::Word(word) => match self.peek_at(1).clone() {
                Tok::Op(op) => {
                    self.advance();
                    self.advance();
                    self.parse_comparison(&word, op)
                }
                Tok::Colon => {
                    let Some(field) = TextField::parse(&word) else {
                        return Err(self.error(&[
                            "author", "title", "keyword", "abstract", "comment", "any",
                        ]));
                    };
                    self.advance();
                    self.advance();
                    match self.peek().clone() {
                        Tok::Word(term) | Tok::Quoted(term) => {
                            self.advance();
                            Ok(Query::text(field, term))
                        }
                        _ => Err(self.error(&["term"])),
                    }
                }
                _ => {
                    self.advance();
                    Ok(Query::text(TextField::Any, word))
                }
            },
            _ => Err(self.error(OPERAND)),
        }
    }

    fn parse_comparison(&mut self, name: &str, op: CompareOp) -> Result<Query, ParseError> {
        let name = name.to_ascii_lowercase();
        let reviewers = name == "reviewers";
        let expected: &[&str] = if reviewers {
            &["non-negative integer"]
        } else {
            &["grade between 1.0 and 5.0 with at most one decimal"]
        };
        let Tok::Word(number) = self.peek().clone() else {
            return Err(self.error(expected));
        };
        let value = if reviewers {
            parse_count(&number)
        } else {
            parse_tenths(&number).filter(|t| (10..=50).contains(t))
        };
        let Some(value) = value else {
            return Err(self.error(expected));
        };
        let target = if reviewers {
            CompareTarget::Reviewers
        } else {
            let back = self.pos - 2;
            let dim = Dimension::new(name).map_err(|_| ParseError {
                position: self.toks[back].0,
                expected: vec!["dimension name".into()],
                found: self.toks[back].1.describe(),
            })?;
            CompareTarget::Dimension(dim)
        };
        self.advance();
        Ok(Query::Compare { target, op, value })
    }
}

fn collapse(mut children: Vec<Query>, make: fn(Vec<Query>) -> Query) -> Query {
    if children.len() == 1 {
        children.pop().expect("one child")
    } else {
        make(children)
    }
}

fn parse_count(s: &str) -> Option<u64> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

/// "4" -> 40, "3.5" -> 35
fn parse_tenths(s: &str) -> Option<u64> {
    let (whole, frac) = match s.split_once('.') {
        Some((w, f)) => (w, f),
        None => (s, "0"),
    };
    if frac.len() != 1 {
        return None;
    }
    Some(parse_count(whole)?.checked_mul(10)? + parse_count(frac)?)
}

pub fn parse_query(text: &str) -> Result<Query, ParseError> {
    let mut parser = Parser {
        toks: lex(text)?,
        pos: 0,
    };
    let query = parser.parse_or()?;
    if *parser.peek() != Tok::Eof {
        return Err(parser.error(&["AND", "OR", "NOT", "term", "end of query"]));
    }
    Ok(query)
}
