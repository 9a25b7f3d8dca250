// SPDX-License-Identifier: Apache-2.0

//! Recursive-descent parser for monotone policies.
//!
//! ```text
//! policy := and ( ("|" | "OR") and )*
//! and    := atom ( ("&" | "AND") atom )*
//! atom   := IDENT | "(" policy ")"
//! ```

use thiserror::Error;

use super::AccessTree;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolicyError {
    #[error("empty policy")]
    Empty,
    #[error("negation is not allowed in monotone policies (offset {offset})")]
    Negation { offset: usize },
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    And,
    Or,
    Open,
    Close,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("attribute `{s}`"),
            Tok::And => "AND".into(),
            Tok::Or => "OR".into(),
            Tok::Open => "`(`".into(),
            Tok::Close => "`)`".into(),
        }
    }
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '-' | '.' | ':' | '/')
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>, PolicyError> {
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(i, c)) = chars.peek() {
        match c {
            c if c.is_whitespace() => {
                chars.next();
            }
            '&' => {
                chars.next();
                out.push((i, Tok::And));
            }
            '|' => {
                chars.next();
                out.push((i, Tok::Or));
            }
            '(' => {
                chars.next();
                out.push((i, Tok::Open));
            }
            ')' => {
                chars.next();
                out.push((i, Tok::Close));
            }
            '!' | '~' | '¬' => return Err(PolicyError::Negation { offset: i }),
            c if is_ident_char(c) => {
                let mut end = i;
                while let Some(&(j, d)) = chars.peek() {
                    if !is_ident_char(d) {
                        break;
                    }
                    end = j + d.len_utf8();
                    chars.next();
                }
                let word = &text[i..end];
                let tok = match word {
                    "AND" => Tok::And,
                    "OR" => Tok::Or,
                    "NOT" => return Err(PolicyError::Negation { offset: i }),
                    _ => Tok::Ident(word.to_owned()),
                };
                out.push((i, tok));
            }
            other => {
                return Err(PolicyError::Syntax {
                    offset: i,
                    message: format!("unexpected character `{other}`"),
                })
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    /// Offset for an error at the cursor; at end of input, the last token.
    fn offset(&self) -> usize {
        match self.toks.get(self.pos) {
            Some((o, _)) => *o,
            None => self.toks.last().map_or(0, |(o, _)| *o),
        }
    }

    fn error(&self, message: impl Into<String>) -> PolicyError {
        PolicyError::Syntax {
            offset: self.offset(),
            message: message.into(),
        }
    }

    fn policy(&mut self) -> Result<AccessTree, PolicyError> {
        let mut left = self.conjunction()?;
        while self.peek() == Some(&Tok::Or) {
            self.pos += 1;
            let right = self.conjunction()?;
            left = AccessTree::Or(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn conjunction(&mut self) -> Result<AccessTree, PolicyError> {
        let mut left = self.atom()?;
        while self.peek() == Some(&Tok::And) {
            self.pos += 1;
            let right = self.atom()?;
            left = AccessTree::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn atom(&mut self) -> Result<AccessTree, PolicyError> {
        match self.peek().cloned() {
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                Ok(AccessTree::Leaf(name))
            }
            Some(Tok::Open) => {
                self.pos += 1;
                let inner = self.policy()?;
                match self.peek() {
                    Some(Tok::Close) => {
                        self.pos += 1;
                        Ok(inner)
                    }
                    Some(t) => Err(self.error(format!("expected `)`, found {}", t.describe()))),
                    None => Err(self.error("expected `)` before end of input")),
                }
            }
            Some(t) => Err(self.error(format!("expected attribute or `(`, found {}", t.describe()))),
            None => Err(self.error("expected attribute or `(` before end of input")),
        }
    }
}

pub fn parse_policy(text: &str) -> Result<AccessTree, PolicyError> {
    let toks = tokenize(text)?;
    if toks.is_empty() {
        return Err(PolicyError::Empty);
    }
    let mut p = Parser { toks, pos: 0 };
    let tree = p.policy()?;
    if let Some(t) = p.peek() {
        return Err(p.error(format!("unexpected {}", t.describe())));
    }
    Ok(tree)
}
