//! Reader-facing selection: a small query language that mixes ordinal
//! constraints on judgements (`soundness>=4`, `reviewers>2`) with whole-word
//! text matches on content fields (`keyword:context`, `"bounded rationality"`).
//!
//! ```text
//! query   := or
//! or      := and ("OR" and)*
//! and     := not (("AND")? not)*        juxtaposition is AND
//! not     := "NOT" not | primary
//! primary := "(" or ")" | cmp | field ":" (word | quoted) | word | quoted
//! cmp     := name ("<" | "<=" | "=" | ">=" | ">") number
//! ```
//!
//! Keywords are case-insensitive. A bare word or quoted phrase searches every
//! text field.

mod eval;
mod index;
mod parser;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::Dimension;

pub use eval::{evaluate, evaluate_with_warnings, text_tokens, EvalWarning};
pub use index::{index_record, search, SearchIndex, SearchPage, SearchResult};
pub use parser::{parse_query, ParseError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CompareOp {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl CompareOp {
    pub fn as_str(self) -> &'static str {
        match self {
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Eq => "=",
            CompareOp::Ge => ">=",
            CompareOp::Gt => ">",
        }
    }

    pub fn holds<T: Ord>(self, lhs: T, rhs: T) -> bool {
        match self {
            CompareOp::Lt => lhs < rhs,
            CompareOp::Le => lhs <= rhs,
            CompareOp::Eq => lhs == rhs,
            CompareOp::Ge => lhs >= rhs,
            CompareOp::Gt => lhs > rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CompareTarget {
    /// Value is in tenths of a grade.
    Dimension(Dimension),
    /// Value is a reviewer count.
    Reviewers,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TextField {
    Author,
    Title,
    Keyword,
    Abstract,
    Comment,
    Any,
}

impl TextField {
    pub const ALL: [TextField; 6] = [
        TextField::Author,
        TextField::Title,
        TextField::Keyword,
        TextField::Abstract,
        TextField::Comment,
        TextField::Any,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TextField::Author => "author",
            TextField::Title => "title",
            TextField::Keyword => "keyword",
            TextField::Abstract => "abstract",
            TextField::Comment => "comment",
            TextField::Any => "any",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let lower = s.to_ascii_lowercase();
        Self::ALL.into_iter().find(|f| f.as_str() == lower)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Query {
    /// At least two children.
    And(Vec<Query>),
    /// At least two children.
    Or(Vec<Query>),
    Not(Box<Query>),
    Compare {
        target: CompareTarget,
        op: CompareOp,
        value: u64,
    },
    Text {
        field: TextField,
        term: String,
    },
}

impl Query {
    pub fn compare_dimension(dim: &str, op: CompareOp, tenths: u64) -> Self {
        Query::Compare {
            target: CompareTarget::Dimension(Dimension::new(dim).expect("valid dimension name")),
            op,
            value: tenths,
        }
    }

    pub fn compare_reviewers(op: CompareOp, count: u64) -> Self {
        Query::Compare {
            target: CompareTarget::Reviewers,
            op,
            value: count,
        }
    }

    pub fn text(field: TextField, term: impl Into<String>) -> Self {
        Query::Text {
            field,
            term: term.into(),
        }
    }

    /// Renders a query string that parses back to this exact tree.
    pub fn render(&self) -> String {
        self.to_string()
    }

    fn is_compound(&self) -> bool {
        matches!(self, Query::And(_) | Query::Or(_))
    }

    fn fmt_operand(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_compound() {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Query::And(children) | Query::Or(children) => {
                let sep = if matches!(self, Query::And(_)) { " AND " } else { " OR " };
                for (i, child) in children.iter().enumerate() {
                    if i > 0 {
                        f.write_str(sep)?;
                    }
                    child.fmt_operand(f)?;
                }
                Ok(())
            }
            Query::Not(inner) => {
                f.write_str("NOT ")?;
                inner.fmt_operand(f)
            }
            Query::Compare { target, op, value } => match target {
                CompareTarget::Dimension(d) => {
                    write!(f, "{d}{}{}.{}", op.as_str(), value / 10, value % 10)
                }
                CompareTarget::Reviewers => write!(f, "reviewers{}{value}", op.as_str()),
            },
            Query::Text { field, term } => {
                write!(f, "{}:", field.as_str())?;
                if parser::is_plain_word(term) {
                    f.write_str(term)
                } else {
                    f.write_str("\"")?;
                    for c in term.chars() {
                        if matches!(c, '"' | '\\') {
                            f.write_str("\\")?;
                        }
                        write!(f, "{c}")?;
                    }
                    f.write_str("\"")
                }
            }
        }
    }
}
