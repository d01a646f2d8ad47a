//! Hashed character n-gram vectors and the BPE piece tokenizer.
//!
//! Words are wrapped in `<` and `>` boundary markers before n-gram
//! extraction, so the word "her" and the subword "her" (from e.g. "where")
//! hash differently. Each word's bag holds every character n-gram of the
//! wrapped form for n in `[n_min, n_max]` plus the wrapped word itself as
//! the final entry; n-grams are mapped into a fixed bucket table with
//! 64-bit FNV-1a so out-of-vocabulary words still compose to a vector.

mod bpe;
mod train;

pub use bpe::{bpe_encode, train_bpe, BpeModel};
pub use train::{train_subword, SubwordModel};

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::store::VectorStore;

/// Preferred n-gram span: 3..=6.
pub const DEFAULT_N_MIN: usize = 3;
pub const DEFAULT_N_MAX: usize = 6;
/// Default hash space for n-gram vectors.
pub const DEFAULT_BUCKETS: usize = 2_000_000;

const BOUNDARY_OPEN: char = '<';
const BOUNDARY_CLOSE: char = '>';

/// Extraction rules plus the word vocabulary whose entries also get
/// dedicated (non-hashed) vectors.
#[derive(Debug, Clone)]
pub struct SubwordIndex {
    pub n_min: usize,
    pub n_max: usize,
    pub buckets: usize,
    pub word_vocab: Vocabulary,
}

impl SubwordIndex {
    pub fn new(n_min: usize, n_max: usize, buckets: usize, word_vocab: Vocabulary) -> Result<Self> {
        if n_min < 1 || n_min > n_max {
            return Err(Error::usage(format!(
                "invalid n-gram range {n_min}..={n_max}"
            )));
        }
        if buckets == 0 {
            return Err(Error::usage("bucket count must be positive"));
        }
        Ok(SubwordIndex {
            n_min,
            n_max,
            buckets,
            word_vocab,
        })
    }

    /// Hashed bucket ids for a word's n-grams, in bag order.
    pub fn bucket_ids(&self, word: &str) -> Result<Vec<usize>> {
        let bag = extract_ngrams(word, self.n_min, self.n_max)?;
        let (_, ngrams) = bag.split_last().expect("bag always holds the word entry");
        Ok(ngrams
            .iter()
            .map(|g| hash_ngram(g, self.buckets))
            .collect())
    }
}

/// Emits the bag of character n-grams of `<word>` for each n in
/// `[n_min, n_max]` in position order, followed by the wrapped word itself.
/// An n-gram spanning the entire wrapped word is left to the final word
/// entry rather than emitted twice; other duplicates are kept.
pub fn extract_ngrams(word: &str, n_min: usize, n_max: usize) -> Result<Vec<String>> {
    if word.is_empty() {
        return Err(Error::data("cannot extract n-grams of an empty word"));
    }
    if word.contains([BOUNDARY_OPEN, BOUNDARY_CLOSE]) {
        return Err(Error::data(format!(
            "word {word:?} contains a reserved boundary marker"
        )));
    }
    let mut wrapped: Vec<char> = Vec::with_capacity(word.chars().count() + 2);
    wrapped.push(BOUNDARY_OPEN);
    wrapped.extend(word.chars());
    wrapped.push(BOUNDARY_CLOSE);

    let mut bag = Vec::new();
    for n in n_min..=n_max.min(wrapped.len()) {
        if n == wrapped.len() {
            continue;
        }
        for window in wrapped.windows(n) {
            bag.push(window.iter().collect());
        }
    }
    bag.push(wrapped.iter().collect());
    Ok(bag)
}

/// 64-bit FNV-1a over the n-gram's UTF-8 bytes, reduced modulo `buckets`.
/// Stable across runs and platforms.
pub fn hash_ngram(ngram: &str, buckets: usize) -> usize {
    assert!(buckets > 0, "bucket count must be positive");
    (fnv1a64(ngram.as_bytes()) % buckets as u64) as usize
}

pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Dense bucket→vector table backing the hashed n-gram vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct BucketTable {
    dim: usize,
    data: Vec<f32>,
}

impl BucketTable {
    pub fn zeros(buckets: usize, dim: usize) -> Self {
        BucketTable {
            dim,
            data: vec![0.0; buckets * dim],
        }
    }

    pub(crate) fn from_raw(dim: usize, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len() % dim, 0);
        BucketTable { dim, data }
    }

    pub fn buckets(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, bucket: usize) -> &[f32] {
        &self.data[bucket * self.dim..(bucket + 1) * self.dim]
    }

    pub fn row_mut(&mut self, bucket: usize) -> &mut [f32] {
        &mut self.data[bucket * self.dim..(bucket + 1) * self.dim]
    }
}

/// Composes a word vector as the sum of its hashed n-gram vectors, plus the
/// dedicated word vector when the word is in the store. Out-of-vocabulary
/// words still yield the n-gram sum.
pub fn fasttext_word_vector(
    word: &str,
    word_store: &VectorStore,
    ngram_table: &BucketTable,
    index: &SubwordIndex,
) -> Result<Vec<f32>> {
    if ngram_table.buckets() != index.buckets {
        return Err(Error::data(format!(
            "n-gram table has {} rows but the index hashes into {} buckets",
            ngram_table.buckets(),
            index.buckets
        )));
    }
    let mut vector = vec![0.0f32; ngram_table.dim()];
    for bucket in index.bucket_ids(word)? {
        for (acc, v) in vector.iter_mut().zip(ngram_table.row(bucket)) {
            *acc += v;
        }
    }
    if let Some(dedicated) = word_store.lookup(word) {
        for (acc, v) in vector.iter_mut().zip(dedicated) {
            *acc += v;
        }
    }
    Ok(vector)
}

/// A finished, queryable subword model: dedicated word vectors plus the
/// hashed n-gram table.
#[derive(Debug, Clone)]
pub struct SubwordVectors {
    pub index: SubwordIndex,
    pub words: VectorStore,
    pub ngrams: BucketTable,
}

impl SubwordVectors {
    pub fn dim(&self) -> usize {
        self.ngrams.dim()
    }

    pub fn word_vector(&self, word: &str) -> Result<Vec<f32>> {
        fasttext_word_vector(word, &self.words, &self.ngrams, &self.index)
    }

    /// Persists the model as three files next to `stem`: `<stem>.meta`
    /// (extraction rules), `<stem>.words.vec` and `<stem>.ngrams.vec`
    /// (both in the standard vector text format; n-gram rows are keyed by
    /// their decimal bucket index).
    pub fn save(&self, stem: impl AsRef<Path>) -> Result<()> {
        let stem = stem.as_ref();
        let meta_path = with_suffix(stem, ".meta");
        let file = File::create(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let mut out = BufWriter::new(file);
        writeln!(
            out,
            "subword {} {} {}",
            self.index.n_min, self.index.n_max, self.index.buckets
        )
        .map_err(|e| Error::io(&meta_path, e))?;
        out.flush().map_err(|e| Error::io(&meta_path, e))?;

        self.words.save_text(with_suffix(stem, ".words.vec"))?;

        let ngram_path = with_suffix(stem, ".ngrams.vec");
        let file = File::create(&ngram_path).map_err(|e| Error::io(&ngram_path, e))?;
        let mut out = BufWriter::new(file);
        writeln!(out, "{} {}", self.ngrams.buckets(), self.ngrams.dim())
            .map_err(|e| Error::io(&ngram_path, e))?;
        for bucket in 0..self.ngrams.buckets() {
            write!(out, "{bucket}").map_err(|e| Error::io(&ngram_path, e))?;
            for v in self.ngrams.row(bucket) {
                write!(out, " {v}").map_err(|e| Error::io(&ngram_path, e))?;
            }
            writeln!(out).map_err(|e| Error::io(&ngram_path, e))?;
        }
        out.flush().map_err(|e| Error::io(&ngram_path, e))
    }

    pub fn load(stem: impl AsRef<Path>) -> Result<SubwordVectors> {
        let stem = stem.as_ref();
        let meta_path = with_suffix(stem, ".meta");
        let file = File::open(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let mut header = String::new();
        BufReader::new(file)
            .read_line(&mut header)
            .map_err(|e| Error::io(&meta_path, e))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let parsed: Option<(usize, usize, usize)> = match fields.as_slice() {
            ["subword", n_min, n_max, buckets] => match (
                n_min.parse(),
                n_max.parse(),
                buckets.parse(),
            ) {
                (Ok(a), Ok(b), Ok(c)) => Some((a, b, c)),
                _ => None,
            },
            _ => None,
        };
        let (n_min, n_max, buckets) = parsed.ok_or_else(|| {
            Error::parse(&meta_path, 1, "expected `subword <n_min> <n_max> <buckets>`")
        })?;

        let words = VectorStore::load_text(with_suffix(stem, ".words.vec"))?;
        let ngram_path = with_suffix(stem, ".ngrams.vec");
        let ngram_store = VectorStore::load_text(&ngram_path)?;
        if ngram_store.len() != buckets {
            return Err(Error::data(format!(
                "{}: expected {buckets} bucket rows, found {}",
                ngram_path.display(),
                ngram_store.len()
            )));
        }
        let dim = ngram_store.dim();
        let mut data = vec![0.0f32; buckets * dim];
        for (token, vector) in ngram_store.iter() {
            let bucket: usize = token.parse().map_err(|_| {
                Error::data(format!(
                    "{}: bucket token {token:?} is not an index",
                    ngram_path.display()
                ))
            })?;
            if bucket >= buckets {
                return Err(Error::data(format!(
                    "{}: bucket index {bucket} out of range",
                    ngram_path.display()
                )));
            }
            data[bucket * dim..(bucket + 1) * dim].copy_from_slice(vector);
        }

        let word_vocab = Vocabulary::from_counts(
            words.tokens().map(|t| (t.to_string(), 1)),
            1,
        );
        Ok(SubwordVectors {
            index: SubwordIndex::new(n_min, n_max, buckets, word_vocab)?,
            words,
            ngrams: BucketTable::from_raw(dim, data),
        })
    }
}

fn with_suffix(stem: &Path, suffix: &str) -> std::path::PathBuf {
    let mut s = stem.as_os_str().to_os_string();
    s.push(suffix);
    std::path::PathBuf::from(s)
}
