//! Deterministic S-expression dump of a tree, one form per node:
//!
//! ```text
//! (w=0 keys=[4] children=[(w=1 keys=[1,2,3] children=[]) (w=1 keys=[4,5,6] children=[])])
//! ```
//!
//! Leaves are the forms with an empty `children` list. Data handles are not
//! part of the dump. [`parse_dump`] reads the format back for `u64` keys,
//! using each key as its own data handle.

use std::fmt::{self, Display, Write};

use thiserror::Error;

use crate::node::NodeId;
use crate::tree::{Config, ConfigError, Shape, Tree};

impl<K: Ord + Clone + Display, V> Tree<K, V> {
    pub fn dump(&self) -> String {
        let mut out = String::new();
        self.dump_node(self.root, &mut out).expect("writing to a String");
        out
    }

    fn dump_node(&self, id: NodeId, out: &mut String) -> fmt::Result {
        let node = &self.arena[id];
        write!(out, "(w={} keys=[", node.weight)?;
        for (i, k) in node.keys.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write!(out, "{k}")?;
        }
        out.push_str("] children=[");
        for (i, &c) in node.children().iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            self.dump_node(c, out)?;
        }
        out.push_str("])");
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DumpError {
    #[error("unexpected input at byte {0}")]
    Syntax(usize),
    #[error("leaf with weight zero at byte {0}")]
    WeightZeroLeaf(usize),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

pub fn parse_dump(text: &str) -> Result<Shape<u64, u64>, DumpError> {
    let mut p = Parser {
        s: text.as_bytes(),
        pos: 0,
    };
    p.ws();
    let shape = p.node()?;
    p.ws();
    if p.pos != p.s.len() {
        return Err(DumpError::Syntax(p.pos));
    }
    Ok(shape)
}

impl Tree<u64, u64> {
    pub fn from_dump(config: Config, text: &str) -> Result<Self, DumpError> {
        Ok(Tree::from_shape(config, parse_dump(text)?)?)
    }
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn expect(&mut self, lit: &str) -> Result<(), DumpError> {
        self.ws();
        if self.s[self.pos..].starts_with(lit.as_bytes()) {
            self.pos += lit.len();
            Ok(())
        } else {
            Err(DumpError::Syntax(self.pos))
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.ws();
        self.s.get(self.pos).copied()
    }

    fn number(&mut self) -> Result<u64, DumpError> {
        self.ws();
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.s[start..self.pos])
            .ok()
            .and_then(|t| t.parse().ok())
            .ok_or(DumpError::Syntax(start))
    }

    fn node(&mut self) -> Result<Shape<u64, u64>, DumpError> {
        let start = self.pos;
        self.expect("(")?;
        self.expect("w=")?;
        let weight = self.number()?;
        if weight > 1 {
            return Err(DumpError::Syntax(start));
        }
        self.expect("keys=[")?;
        let mut keys = Vec::new();
        if self.peek() != Some(b']') {
            keys.push(self.number()?);
            while self.peek() == Some(b',') {
                self.pos += 1;
                keys.push(self.number()?);
            }
        }
        self.expect("]")?;
        self.expect("children=[")?;
        let mut children = Vec::new();
        while self.peek() == Some(b'(') {
            children.push(self.node()?);
        }
        self.expect("]")?;
        self.expect(")")?;
        if children.is_empty() {
            if weight == 0 {
                return Err(DumpError::WeightZeroLeaf(start));
            }
            Ok(Shape::Leaf(keys.into_iter().map(|k| (k, k)).collect()))
        } else {
            Ok(Shape::Internal {
                weight: weight as u8,
                keys,
                children,
            })
        }
    }
}
