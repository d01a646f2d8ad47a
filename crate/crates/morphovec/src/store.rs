//! Persistent token→vector maps in the word2vec text format.
//!
//! The format is line-oriented UTF-8: a `V D` header followed by `V` rows of
//! `token v1 ... vD`, space-separated and newline-terminated. Values are
//! written with Rust's shortest round-trip float rendering, so a
//! save/load/save cycle is byte-stable and `load(save(store)) == store`
//! under exact numeric comparison.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// An immutable-after-build token→vector map with insertion order.
#[derive(Debug, Clone)]
pub struct VectorStore {
    dim: usize,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f32>,
    duplicates_replaced: usize,
}

/// Content equality: dimension, tokens in order, and exact vector values.
/// The duplicate-replacement counter is build metadata and excluded.
impl PartialEq for VectorStore {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.tokens == other.tokens && self.data == other.data
    }
}

impl VectorStore {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "vector dimension must be positive");
        VectorStore {
            dim,
            tokens: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
            duplicates_replaced: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Number of duplicate tokens replaced while building (last wins).
    pub fn duplicates_replaced(&self) -> usize {
        self.duplicates_replaced
    }

    /// Inserts a token vector. A repeated token keeps its original position
    /// but takes the new vector; the replacement is counted.
    pub fn push(&mut self, token: &str, vector: &[f32]) -> Result<()> {
        if token.is_empty() || token.chars().any(char::is_whitespace) {
            return Err(Error::data(format!(
                "invalid store token {token:?}: tokens must be non-empty and whitespace-free"
            )));
        }
        if vector.len() != self.dim {
            return Err(Error::data(format!(
                "vector for {token:?} has {} values, store dimension is {}",
                vector.len(),
                self.dim
            )));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::data(format!(
                "vector for {token:?} contains a non-finite value"
            )));
        }
        match self.index.get(token) {
            Some(&pos) => {
                self.data[pos * self.dim..(pos + 1) * self.dim].copy_from_slice(vector);
                self.duplicates_replaced += 1;
            }
            None => {
                self.index.insert(token.to_string(), self.tokens.len());
                self.tokens.push(token.to_string());
                self.data.extend_from_slice(vector);
            }
        }
        Ok(())
    }

    /// Exact, case-sensitive lookup.
    pub fn lookup(&self, token: &str) -> Option<&[f32]> {
        self.index
            .get(token)
            .map(|&pos| &self.data[pos * self.dim..(pos + 1) * self.dim])
    }

    pub fn position(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, pos: usize) -> &str {
        &self.tokens[pos]
    }

    pub fn vector(&self, pos: usize) -> &[f32] {
        &self.data[pos * self.dim..(pos + 1) * self.dim]
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.tokens
            .iter()
            .zip(self.data.chunks_exact(self.dim))
            .map(|(t, v)| (t.as_str(), v))
    }

    /// Flat row-major view of all vectors, insertion order.
    pub(crate) fn raw(&self) -> &[f32] {
        &self.data
    }

    pub fn save_text(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        self.write_text(&mut out).map_err(|e| Error::io(path, e))
    }

    pub fn write_text(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "{} {}", self.len(), self.dim)?;
        for (token, vector) in self.iter() {
            out.write_all(token.as_bytes())?;
            for v in vector {
                write!(out, " {v}")?;
            }
            out.write_all(b"\n")?;
        }
        out.flush()
    }

    pub fn load_text(path: impl AsRef<Path>) -> Result<VectorStore> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        VectorStore::read_text(BufReader::new(file), &path.display().to_string())
    }

    pub fn read_text(reader: impl BufRead, source: &str) -> Result<VectorStore> {
        let mut lines = reader.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(source, 1, "empty file, expected `V D` header"))?;
        let header = header.map_err(|e| Error::io(source, e))?;
        let mut fields = header.split_whitespace();
        let expected: usize = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| Error::parse(source, 1, "malformed header, expected `V D`"))?;
        let dim: usize = fields
            .next()
            .and_then(|f| f.parse().ok())
            .filter(|&d| d > 0)
            .ok_or_else(|| Error::parse(source, 1, "malformed header, expected `V D`"))?;
        if fields.next().is_some() {
            return Err(Error::parse(source, 1, "malformed header, expected `V D`"));
        }

        let mut store = VectorStore::new(dim);
        let mut rows = 0usize;
        for (idx, line) in lines {
            let line_no = idx + 1;
            let line = line.map_err(|e| Error::io(source, e))?;
            if line.trim().is_empty() {
                continue;
            }
            rows += 1;
            if rows > expected {
                return Err(Error::parse(
                    source,
                    line_no,
                    format!("more rows than the declared {expected}"),
                ));
            }
            let mut fields = line.split_whitespace();
            let token = fields.next().expect("non-blank line has a first field");
            let mut vector = Vec::with_capacity(dim);
            for field in fields {
                let value: f32 = field.parse().map_err(|_| {
                    Error::parse(source, line_no, format!("invalid number {field:?}"))
                })?;
                if !value.is_finite() {
                    return Err(Error::parse(
                        source,
                        line_no,
                        format!("non-finite value {field:?} rejected"),
                    ));
                }
                vector.push(value);
            }
            if vector.len() != dim {
                return Err(Error::parse(
                    source,
                    line_no,
                    format!("expected {dim} values, found {}", vector.len()),
                ));
            }
            store.push(token, &vector).map_err(|e| match e {
                Error::Data(msg) => Error::parse(source, line_no, msg),
                other => other,
            })?;
        }
        if rows != expected {
            return Err(Error::parse(
                source,
                0,
                format!("header declared {expected} rows, file has {rows}"),
            ));
        }
        Ok(store)
    }
}
