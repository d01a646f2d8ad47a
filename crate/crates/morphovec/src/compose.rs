//! Per-word vector composition under the toolkit's representation schemes.
//!
//! A scheme decides how an annotated word maps onto trained stores: direct
//! surface/lemma lookups, the lemma+suffix average, a lemma vector shifted
//! by a derived suffix offset, the mean of BPE piece vectors, or the hashed
//! subword sum. [`compose`] is pure; missing stores are configuration
//! errors, per-word misses are out-of-vocabulary outcomes.

use std::collections::BTreeMap;
use std::path::Path;

use crate::corpus::{suffix_token, AnnotatedToken, AnnotatedTypeCount, Lexicon};
use crate::error::{Error, Result};
use crate::store::VectorStore;
use crate::subword::SubwordVectors;
use crate::subword::BpeModel;

/// The six composition schemes (lemma+suffix is tested two ways).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Surface-form lookup in the surface store.
    Surface,
    /// Lemma lookup in the lemma store.
    Lemma,
    /// Lemma lookup in the lemma+suffix store.
    LemmaSuffixLemmaOnly,
    /// Mean of the lemma vector and the `>>id` suffix token vector, both
    /// from the lemma+suffix store.
    LemmaSuffixAverage,
    /// Lemma-store vector plus the derived offset for the word's suffix.
    DerivedSuffix,
    /// Mean of piece vectors over the BPE encoding of the surface form.
    PieceAverage,
    /// Hashed subword sum; never out-of-vocabulary.
    FastText,
}

impl Scheme {
    pub fn parse(name: &str) -> Result<Scheme> {
        match name {
            "surface" => Ok(Scheme::Surface),
            "lemma" => Ok(Scheme::Lemma),
            "lemma-suffix-lemma" => Ok(Scheme::LemmaSuffixLemmaOnly),
            "lemma-suffix-average" => Ok(Scheme::LemmaSuffixAverage),
            "derived-suffix" => Ok(Scheme::DerivedSuffix),
            "piece-average" => Ok(Scheme::PieceAverage),
            "fasttext" => Ok(Scheme::FastText),
            other => Err(Error::usage(format!(
                "unknown scheme {other:?} (expected surface, lemma, lemma-suffix-lemma, \
                 lemma-suffix-average, derived-suffix, piece-average or fasttext)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Surface => "surface",
            Scheme::Lemma => "lemma",
            Scheme::LemmaSuffixLemmaOnly => "lemma-suffix-lemma",
            Scheme::LemmaSuffixAverage => "lemma-suffix-average",
            Scheme::DerivedSuffix => "derived-suffix",
            Scheme::PieceAverage => "piece-average",
            Scheme::FastText => "fasttext",
        }
    }

    /// Whether the scheme needs a morphological analysis of the query word
    /// (as opposed to operating on the raw surface string).
    pub fn needs_analysis(self) -> bool {
        matches!(
            self,
            Scheme::Lemma
                | Scheme::LemmaSuffixLemmaOnly
                | Scheme::LemmaSuffixAverage
                | Scheme::DerivedSuffix
        )
    }
}

/// Mean (surface - lemma) vector difference per suffix id.
#[derive(Debug, Clone, PartialEq)]
pub struct SuffixOffsetTable {
    dim: usize,
    offsets: BTreeMap<u32, Vec<f32>>,
    support: BTreeMap<u32, usize>,
}

impl SuffixOffsetTable {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn offset(&self, suffix_id: u32) -> Option<&[f32]> {
        self.offsets.get(&suffix_id).map(Vec::as_slice)
    }

    /// Number of (surface, lemma) pairs averaged into a suffix's offset.
    pub fn support(&self, suffix_id: u32) -> usize {
        self.support.get(&suffix_id).copied().unwrap_or(0)
    }

    /// Offsets as a store with `>>id` tokens, in ascending id order.
    pub fn to_store(&self) -> VectorStore {
        let mut store = VectorStore::new(self.dim);
        for (&suffix_id, offset) in &self.offsets {
            store
                .push(&suffix_token(suffix_id), offset)
                .expect("suffix tokens are valid store tokens");
        }
        store
    }

    /// Reads a table back from a `>>id`-keyed store. Support counts are not
    /// persisted; entries reload with support 1.
    pub fn from_store(store: &VectorStore) -> Result<SuffixOffsetTable> {
        let mut offsets = BTreeMap::new();
        let mut support = BTreeMap::new();
        for (token, vector) in store.iter() {
            let id: u32 = token
                .strip_prefix(">>")
                .and_then(|rest| rest.parse().ok())
                .ok_or_else(|| {
                    Error::data(format!(
                        "offset token {token:?} is not a `>>`-prefixed suffix id"
                    ))
                })?;
            offsets.insert(id, vector.to_vec());
            support.insert(id, 1);
        }
        Ok(SuffixOffsetTable {
            dim: store.dim(),
            offsets,
            support,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_store().save_text(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<SuffixOffsetTable> {
        SuffixOffsetTable::from_store(&VectorStore::load_text(path)?)
    }
}

/// Derives per-suffix offsets as the mean of (surface - lemma) differences
/// over annotated types whose both vectors resolve.
///
/// Both vectors come from `surface_store` unless `lemma_store` supplies the
/// lemma side. Pairs with either vector missing are skipped but counted;
/// suffixes with no usable pair are absent from the table.
pub fn derive_suffix_offsets(
    types: &[AnnotatedTypeCount],
    surface_store: &VectorStore,
    lemma_store: Option<&VectorStore>,
) -> Result<SuffixOffsetTable> {
    let lemma_side = lemma_store.unwrap_or(surface_store);
    if lemma_side.dim() != surface_store.dim() {
        return Err(Error::data(format!(
            "store dimensions differ: surface {} vs lemma {}",
            surface_store.dim(),
            lemma_side.dim()
        )));
    }
    let dim = surface_store.dim();
    let mut sums: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    let mut support: BTreeMap<u32, usize> = BTreeMap::new();
    let mut skipped = 0usize;

    for t in types {
        let (Some(surface_vec), Some(lemma_vec)) = (
            surface_store.lookup(&t.surface),
            lemma_side.lookup(&t.lemma),
        ) else {
            skipped += 1;
            continue;
        };
        let sum = sums.entry(t.suffix_id).or_insert_with(|| vec![0.0; dim]);
        for ((s, &w), &l) in sum.iter_mut().zip(surface_vec).zip(lemma_vec) {
            *s += w as f64 - l as f64;
        }
        *support.entry(t.suffix_id).or_insert(0) += 1;
    }

    if sums.is_empty() {
        return Err(Error::data(format!(
            "no (surface, lemma) pair resolved in the store ({skipped} skipped); \
             cannot derive any suffix offset"
        )));
    }
    let offsets = sums
        .into_iter()
        .map(|(id, sum)| {
            let n = support[&id] as f64;
            (id, sum.into_iter().map(|v| (v / n) as f32).collect())
        })
        .collect();
    Ok(SuffixOffsetTable {
        dim,
        offsets,
        support,
    })
}

/// The designated out-of-vocabulary vector: a constant fill, zeros by
/// default.
pub fn oov_vector(dim: usize, fill: f32) -> Vec<f32> {
    vec![fill; dim]
}

pub const DEFAULT_OOV_FILL: f32 = 0.0;

/// Everything a scheme may need at composition time.
#[derive(Debug, Default)]
pub struct StoreBundle {
    pub surface: Option<VectorStore>,
    pub lemma: Option<VectorStore>,
    pub lemma_suffix: Option<VectorStore>,
    pub offsets: Option<SuffixOffsetTable>,
    pub pieces: Option<VectorStore>,
    pub bpe: Option<BpeModel>,
    pub fasttext: Option<SubwordVectors>,
}

impl StoreBundle {
    /// Checks that every store the scheme needs is present, and returns the
    /// composed vector dimension.
    pub fn require(&self, scheme: Scheme) -> Result<usize> {
        fn need<T>(slot: &Option<T>, what: &str, dim: impl Fn(&T) -> usize) -> Result<usize> {
            slot.as_ref()
                .map(&dim)
                .ok_or_else(|| Error::usage(format!("scheme requires {what}")))
        }
        match scheme {
            Scheme::Surface => need(&self.surface, "a surface store", VectorStore::dim),
            Scheme::Lemma => need(&self.lemma, "a lemma store", VectorStore::dim),
            Scheme::LemmaSuffixLemmaOnly | Scheme::LemmaSuffixAverage => {
                need(&self.lemma_suffix, "a lemma+suffix store", VectorStore::dim)
            }
            Scheme::DerivedSuffix => {
                let dim = need(&self.lemma, "a lemma store", VectorStore::dim)?;
                let offsets_dim =
                    need(&self.offsets, "a suffix offset table", SuffixOffsetTable::dim)?;
                if dim != offsets_dim {
                    return Err(Error::data(format!(
                        "lemma store dimension {dim} differs from offset dimension {offsets_dim}"
                    )));
                }
                Ok(dim)
            }
            Scheme::PieceAverage => {
                need(&self.bpe, "a BPE model", |_| 0)?;
                need(&self.pieces, "a piece store", VectorStore::dim)
            }
            Scheme::FastText => need(&self.fasttext, "a subword model", SubwordVectors::dim),
        }
    }
}

/// Composes one annotated word under a scheme. `Ok(None)` marks an
/// out-of-vocabulary word; a missing store is an error.
pub fn compose(
    word: &AnnotatedToken,
    scheme: Scheme,
    stores: &StoreBundle,
) -> Result<Option<Vec<f32>>> {
    stores.require(scheme)?;
    match scheme {
        Scheme::Surface => Ok(stores
            .surface
            .as_ref()
            .unwrap()
            .lookup(&word.surface)
            .map(<[f32]>::to_vec)),
        Scheme::Lemma => Ok(stores
            .lemma
            .as_ref()
            .unwrap()
            .lookup(&word.lemma)
            .map(<[f32]>::to_vec)),
        Scheme::LemmaSuffixLemmaOnly => Ok(stores
            .lemma_suffix
            .as_ref()
            .unwrap()
            .lookup(&word.lemma)
            .map(<[f32]>::to_vec)),
        Scheme::LemmaSuffixAverage => {
            let store = stores.lemma_suffix.as_ref().unwrap();
            let (Some(lemma_vec), Some(suffix_vec)) = (
                store.lookup(&word.lemma),
                store.lookup(&word.suffix_token()),
            ) else {
                return Ok(None);
            };
            Ok(Some(
                lemma_vec
                    .iter()
                    .zip(suffix_vec)
                    .map(|(&l, &s)| (l + s) / 2.0)
                    .collect(),
            ))
        }
        Scheme::DerivedSuffix => {
            let (Some(lemma_vec), Some(offset)) = (
                stores.lemma.as_ref().unwrap().lookup(&word.lemma),
                stores.offsets.as_ref().unwrap().offset(word.suffix_id),
            ) else {
                return Ok(None);
            };
            Ok(Some(
                lemma_vec.iter().zip(offset).map(|(&l, &o)| l + o).collect(),
            ))
        }
        Scheme::PieceAverage => {
            let store = stores.pieces.as_ref().unwrap();
            let pieces = stores.bpe.as_ref().unwrap().encode(&word.surface);
            let mut sum = vec![0.0f32; store.dim()];
            let mut found = 0usize;
            for piece in &pieces {
                if let Some(vector) = store.lookup(piece) {
                    for (s, &v) in sum.iter_mut().zip(vector) {
                        *s += v;
                    }
                    found += 1;
                }
            }
            if found == 0 {
                return Ok(None); // every piece missing
            }
            let scale = 1.0 / found as f32;
            for s in sum.iter_mut() {
                *s *= scale;
            }
            Ok(Some(sum))
        }
        Scheme::FastText => {
            let subword = stores.fasttext.as_ref().unwrap();
            subword.word_vector(&word.surface).map(Some)
        }
    }
}

/// Query-side view over a token→vector source. Implemented by plain stores
/// (exact lookup) and by scheme composers. Embedding is read-only, so
/// implementors are shareable across evaluation workers.
pub trait Embedder: Sync {
    fn dim(&self) -> usize;
    /// `None` marks an out-of-vocabulary token.
    fn embed(&self, token: &str) -> Option<Vec<f32>>;
}

impl Embedder for VectorStore {
    fn dim(&self) -> usize {
        self.dim()
    }

    fn embed(&self, token: &str) -> Option<Vec<f32>> {
        self.lookup(token).map(<[f32]>::to_vec)
    }
}

/// Composes raw query tokens under a scheme, annotating them through an
/// optional lexicon first. Schemes that need a morphological analysis treat
/// tokens missing from the lexicon as out-of-vocabulary.
pub struct SchemeEmbedder<'a> {
    scheme: Scheme,
    stores: &'a StoreBundle,
    lexicon: Option<&'a Lexicon>,
    dim: usize,
}

impl<'a> SchemeEmbedder<'a> {
    pub fn new(
        scheme: Scheme,
        stores: &'a StoreBundle,
        lexicon: Option<&'a Lexicon>,
    ) -> Result<Self> {
        let dim = stores.require(scheme)?;
        if scheme.needs_analysis() && lexicon.is_none() {
            return Err(Error::usage(format!(
                "scheme {} needs a lexicon to analyze raw tokens",
                scheme.name()
            )));
        }
        Ok(SchemeEmbedder {
            scheme,
            stores,
            lexicon,
            dim,
        })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    fn analyze(&self, token: &str) -> Option<AnnotatedToken> {
        if self.scheme.needs_analysis() {
            self.lexicon.and_then(|lex| lex.analyze(token))
        } else {
            Some(AnnotatedToken::new(token, token, 0))
        }
    }
}

impl Embedder for SchemeEmbedder<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, token: &str) -> Option<Vec<f32>> {
        let word = self.analyze(token)?;
        compose(&word, self.scheme, self.stores).ok().flatten()
    }
}
