//! Corpus ingestion and morphological rendering.
//!
//! Two input layouts are supported:
//!
//! * annotated corpus: UTF-8 text, one token per line as
//!   `surface<TAB>lemma<TAB>suffix_id`, blank line = sentence boundary;
//! * raw corpus: UTF-8 plain text, one sentence per line,
//!   whitespace-tokenized.
//!
//! Annotated sentences are rendered into training-token streams under one
//! of four forms: the surface text itself, lemmas only, lemma plus a
//! `>>`-prefixed suffix-id token per word, or BPE pieces of each surface
//! form. Suffix ids are opaque integers from an upstream inventory; id 0
//! marks an uninflected word.

mod vocab;

pub use vocab::{build_vocab, subsample_keep_prob, Vocabulary};

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::subword::BpeModel;

/// A corpus token with its morphological analysis.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AnnotatedToken {
    /// Inflected form exactly as it appears in text.
    pub surface: String,
    /// Base form with inflection removed.
    pub lemma: String,
    /// Index into the upstream suffix inventory; 0 = no suffix.
    pub suffix_id: u32,
}

impl AnnotatedToken {
    pub fn new(surface: impl Into<String>, lemma: impl Into<String>, suffix_id: u32) -> Self {
        AnnotatedToken {
            surface: surface.into(),
            lemma: lemma.into(),
            suffix_id,
        }
    }

    /// Token used for the suffix slot in the lemma+suffix rendering.
    pub fn suffix_token(&self) -> String {
        suffix_token(self.suffix_id)
    }
}

/// Spelling of a suffix id as a corpus token.
pub fn suffix_token(suffix_id: u32) -> String {
    format!(">>{suffix_id}")
}

/// The training form a corpus is rendered into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MorphForm {
    /// Inflected forms as-is.
    Surface,
    /// Every word replaced by its lemma.
    Lemma,
    /// Two tokens per word: the lemma and its `>>`-prefixed suffix id.
    LemmaSuffix,
    /// BPE pieces of each surface form, concatenated across the sentence.
    Pieces,
}

impl MorphForm {
    pub fn parse(name: &str) -> Result<MorphForm> {
        match name {
            "surface" => Ok(MorphForm::Surface),
            "lemma" => Ok(MorphForm::Lemma),
            "lemma-suffix" => Ok(MorphForm::LemmaSuffix),
            "pieces" => Ok(MorphForm::Pieces),
            other => Err(Error::usage(format!(
                "unknown form {other:?} (expected surface, lemma, lemma-suffix or pieces)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MorphForm::Surface => "surface",
            MorphForm::Lemma => "lemma",
            MorphForm::LemmaSuffix => "lemma-suffix",
            MorphForm::Pieces => "pieces",
        }
    }
}

/// Renders one annotated sentence into training tokens.
///
/// `bpe` is required for [`MorphForm::Pieces`] and ignored otherwise.
pub fn render_form(
    sentence: &[AnnotatedToken],
    form: MorphForm,
    bpe: Option<&BpeModel>,
) -> Result<Vec<String>> {
    match form {
        MorphForm::Surface => Ok(sentence.iter().map(|t| t.surface.clone()).collect()),
        MorphForm::Lemma => Ok(sentence.iter().map(|t| t.lemma.clone()).collect()),
        MorphForm::LemmaSuffix => {
            let mut out = Vec::with_capacity(sentence.len() * 2);
            for token in sentence {
                out.push(token.lemma.clone());
                out.push(token.suffix_token());
            }
            Ok(out)
        }
        MorphForm::Pieces => {
            let bpe = bpe.ok_or_else(|| {
                Error::usage("rendering the pieces form requires a trained BPE model")
            })?;
            let mut out = Vec::new();
            for token in sentence {
                out.extend(bpe.encode(&token.surface));
            }
            Ok(out)
        }
    }
}

fn parse_annotated_line(path: &str, line_no: usize, line: &str) -> Result<AnnotatedToken> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 3 {
        return Err(Error::parse(
            path,
            line_no,
            format!(
                "expected `surface<TAB>lemma<TAB>suffix_id`, found {} field(s)",
                fields.len()
            ),
        ));
    }
    let surface = fields[0];
    let lemma = fields[1];
    for (name, value) in [("surface", surface), ("lemma", lemma)] {
        if value.is_empty() || value.chars().any(char::is_whitespace) {
            return Err(Error::parse(
                path,
                line_no,
                format!("{name} form {value:?} must be non-empty and whitespace-free"),
            ));
        }
    }
    let suffix_id: u32 = fields[2].trim().parse().map_err(|_| {
        Error::parse(
            path,
            line_no,
            format!("suffix_id {:?} is not a non-negative integer", fields[2]),
        )
    })?;
    Ok(AnnotatedToken::new(surface, lemma, suffix_id))
}

/// Streaming reader over an annotated corpus, yielding one sentence at a
/// time. Blank lines end a sentence; a trailing unterminated sentence is
/// still yielded. Runs of blank lines produce no empty sentences.
pub struct AnnotatedReader<R: BufRead> {
    source: String,
    lines: std::iter::Enumerate<std::io::Lines<R>>,
    done: bool,
}

impl<R: BufRead> AnnotatedReader<R> {
    pub fn from_reader(reader: R, source: &str) -> Self {
        AnnotatedReader {
            source: source.to_string(),
            lines: reader.lines().enumerate(),
            done: false,
        }
    }
}

impl AnnotatedReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(AnnotatedReader::from_reader(
            BufReader::new(file),
            &path.display().to_string(),
        ))
    }
}

impl<R: BufRead> Iterator for AnnotatedReader<R> {
    type Item = Result<Vec<AnnotatedToken>>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let mut sentence = Vec::new();
        loop {
            match self.lines.next() {
                Some((idx, Ok(line))) => {
                    if line.trim().is_empty() {
                        if !sentence.is_empty() {
                            return Some(Ok(sentence));
                        }
                        continue;
                    }
                    match parse_annotated_line(&self.source, idx + 1, &line) {
                        Ok(token) => sentence.push(token),
                        Err(e) => {
                            self.done = true;
                            return Some(Err(e));
                        }
                    }
                }
                Some((_, Err(e))) => {
                    self.done = true;
                    return Some(Err(Error::io(&self.source, e)));
                }
                None => {
                    self.done = true;
                    if sentence.is_empty() {
                        return None;
                    }
                    return Some(Ok(sentence));
                }
            }
        }
    }
}

/// Opens an annotated corpus as a sentence stream.
pub fn read_annotated(path: impl AsRef<Path>) -> Result<AnnotatedReader<BufReader<File>>> {
    AnnotatedReader::open(path)
}

/// Reads a whole annotated corpus into memory.
pub fn read_annotated_all(path: impl AsRef<Path>) -> Result<Vec<Vec<AnnotatedToken>>> {
    read_annotated(path)?.collect()
}

/// Streaming reader over a raw corpus: one whitespace-tokenized sentence per
/// line, blank lines skipped.
pub struct RawReader<R: BufRead> {
    source: String,
    lines: std::io::Lines<R>,
    done: bool,
}

impl RawReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(RawReader {
            source: path.display().to_string(),
            lines: BufReader::new(file).lines(),
            done: false,
        })
    }
}

impl<R: BufRead> RawReader<R> {
    pub fn from_reader(reader: R, source: &str) -> Self {
        RawReader {
            source: source.to_string(),
            lines: reader.lines(),
            done: false,
        }
    }
}

impl<R: BufRead> Iterator for RawReader<R> {
    type Item = Result<Vec<String>>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        loop {
            match self.lines.next() {
                Some(Ok(line)) => {
                    let tokens: Vec<String> =
                        line.split_whitespace().map(str::to_string).collect();
                    if !tokens.is_empty() {
                        return Some(Ok(tokens));
                    }
                }
                Some(Err(e)) => {
                    self.done = true;
                    return Some(Err(Error::io(&self.source, e)));
                }
                None => {
                    self.done = true;
                    return None;
                }
            }
        }
    }
}

pub fn read_raw(path: impl AsRef<Path>) -> Result<RawReader<BufReader<File>>> {
    RawReader::open(path)
}

/// One distinct analysis observed in an annotated corpus, with its
/// occurrence count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedTypeCount {
    pub surface: String,
    pub lemma: String,
    pub suffix_id: u32,
    pub count: u64,
}

/// Counts distinct (surface, lemma, suffix_id) analyses over an annotated
/// corpus, in descending count order with lexicographic tie-breaks.
pub fn collect_annotated_types(
    sentences: impl IntoIterator<Item = Result<Vec<AnnotatedToken>>>,
) -> Result<Vec<AnnotatedTypeCount>> {
    let mut counts: HashMap<AnnotatedToken, u64> = HashMap::new();
    for sentence in sentences {
        for token in sentence? {
            *counts.entry(token).or_insert(0) += 1;
        }
    }
    let mut types: Vec<AnnotatedTypeCount> = counts
        .into_iter()
        .map(|(t, count)| AnnotatedTypeCount {
            surface: t.surface,
            lemma: t.lemma,
            suffix_id: t.suffix_id,
            count,
        })
        .collect();
    types.sort_by(|a, b| {
        b.count
            .cmp(&a.count)
            .then_with(|| a.surface.cmp(&b.surface))
            .then_with(|| a.lemma.cmp(&b.lemma))
            .then_with(|| a.suffix_id.cmp(&b.suffix_id))
    });
    Ok(types)
}

/// Surface-form lexicon: the most frequent (lemma, suffix_id) analysis per
/// surface token. Lets the evaluation harnesses annotate plain question
/// words for the lemma-based composition schemes.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: HashMap<String, (String, u32)>,
}

impl Lexicon {
    /// Builds the lexicon from counted analyses. Ties on count resolve to
    /// the lexicographically smallest (lemma, suffix_id).
    pub fn from_types(types: &[AnnotatedTypeCount]) -> Lexicon {
        fn beats(candidate: &AnnotatedTypeCount, held: &(u64, String, u32)) -> bool {
            let (count, lemma, suffix) = held;
            candidate.count > *count
                || (candidate.count == *count
                    && (candidate.lemma.as_str(), candidate.suffix_id) < (lemma.as_str(), *suffix))
        }

        let mut best: HashMap<String, (u64, String, u32)> = HashMap::new();
        for t in types {
            let replace = best.get(&t.surface).is_none_or(|held| beats(t, held));
            if replace {
                best.insert(t.surface.clone(), (t.count, t.lemma.clone(), t.suffix_id));
            }
        }
        Lexicon {
            entries: best
                .into_iter()
                .map(|(surface, (_, lemma, suffix))| (surface, (lemma, suffix)))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Resolves a surface token to its annotated form, if known.
    pub fn analyze(&self, surface: &str) -> Option<AnnotatedToken> {
        self.entries.get(surface).map(|(lemma, suffix)| {
            AnnotatedToken::new(surface, lemma.clone(), *suffix)
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let mut surfaces: Vec<&String> = self.entries.keys().collect();
        surfaces.sort();
        for surface in surfaces {
            let (lemma, suffix) = &self.entries[surface];
            writeln!(out, "{surface}\t{lemma}\t{suffix}").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Lexicon> {
        let path = path.as_ref();
        let source = path.display().to_string();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut entries = HashMap::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let token = parse_annotated_line(&source, idx + 1, &line)?;
            entries.insert(token.surface, (token.lemma, token.suffix_id));
        }
        Ok(Lexicon { entries })
    }
}
