//! CBOW and Skip-Gram training with negative sampling.
//!
//! The trainer consumes vocabulary-indexed sentences, applies frequent-word
//! subsampling per occurrence, shrinks the context window per position, and
//! updates paired input/context matrices by SGD against k sampled negatives.
//! The learning rate decays linearly over the expected token count. With one
//! thread the result is a bit-reproducible function of (corpus, vocabulary,
//! config); with more threads, shards update the shared matrices lock-free
//! and only finiteness and quality properties are guaranteed.

mod noise;
pub(crate) mod sgd;

#[cfg(feature = "parallel")]
pub(crate) mod hogwild;

pub use noise::{build_noise_table, default_noise_table_size, NoiseTable};
pub use sgd::{
    negative_sampling_step, sigmoid, train_sentence_cbow, train_sentence_skipgram, SgdBuffers,
};

use crate::corpus::{subsample_keep_prob, Vocabulary};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::store::VectorStore;

/// Architecture choice: predict the center from averaged context (CBOW) or
/// each context word from the center (Skip-Gram).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Cbow,
    SkipGram,
}

impl ModelKind {
    pub fn parse(name: &str) -> Result<ModelKind> {
        match name {
            "cbow" => Ok(ModelKind::Cbow),
            "skipgram" | "skip-gram" => Ok(ModelKind::SkipGram),
            other => Err(Error::usage(format!(
                "unknown model {other:?} (expected cbow or skipgram)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Cbow => "cbow",
            ModelKind::SkipGram => "skipgram",
        }
    }

    pub(crate) fn default_lr(self) -> f32 {
        match self {
            ModelKind::Cbow => 0.05,
            ModelKind::SkipGram => 0.025,
        }
    }
}

/// Training hyperparameters. `window` counts context tokens per side, so a
/// total sliding span of 9 tokens corresponds to `window = 4`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub model: ModelKind,
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub lr_start: f32,
    pub lr_min: f32,
    /// Subsampling threshold; `None` disables subsampling.
    pub subsample_t: Option<f64>,
    pub min_count: u64,
    pub seed: u64,
    pub threads: usize,
}

impl TrainConfig {
    pub fn new(model: ModelKind) -> Self {
        let lr_start = model.default_lr();
        TrainConfig {
            model,
            dim: 100,
            window: 5,
            negatives: 5,
            epochs: 5,
            lr_start,
            lr_min: lr_start * 1e-4,
            subsample_t: Some(1e-3),
            min_count: 5,
            seed: 1,
            threads: 1,
        }
    }

    /// Keeps `lr_min` tied to `lr_start` at the default ratio.
    pub fn set_lr_start(&mut self, lr: f32) {
        self.lr_start = lr;
        self.lr_min = lr * 1e-4;
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.window == 0 || self.negatives == 0 || self.threads == 0 {
            return Err(Error::usage(
                "dim, window, negatives and threads must all be positive",
            ));
        }
        if self.lr_start.is_nan() || self.lr_start <= 0.0 || self.lr_min < 0.0 || self.lr_min > self.lr_start
        {
            return Err(Error::usage(
                "learning rates must satisfy 0 < lr_min <= lr_start",
            ));
        }
        if let Some(t) = self.subsample_t {
            if t.is_nan() || t <= 0.0 {
                return Err(Error::usage("subsample threshold must be positive"));
            }
        }
        Ok(())
    }
}

/// Row-major dense matrix of f32 parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Entries drawn i.i.d. uniform from [-0.5/cols, +0.5/cols).
    pub fn uniform_init(rows: usize, cols: usize, rng: &mut Rng) -> Self {
        let scale = 1.0 / cols as f32;
        let data = (0..rows * cols)
            .map(|_| (rng.next_f32() - 0.5) * scale)
            .collect();
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f32] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Paired parameter matrices plus the vocabulary they index.
#[derive(Debug, Clone)]
pub struct EmbeddingModel {
    pub vocab: Vocabulary,
    /// First-layer word vectors, one row per vocabulary entry.
    pub input: Matrix,
    /// Second-layer context vectors, same shape.
    pub context: Matrix,
    pub config: TrainConfig,
}

impl EmbeddingModel {
    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    /// Finished word vectors (the input matrix) as a persistable store.
    pub fn to_store(&self) -> VectorStore {
        let mut store = VectorStore::new(self.config.dim);
        for idx in 0..self.vocab.len() {
            store
                .push(self.vocab.token(idx), self.input.row(idx))
                .expect("vocabulary tokens are valid store tokens");
        }
        store
    }
}

/// Allocates a model: input entries uniform in [-0.5/dim, +0.5/dim) from the
/// config seed, context all zeros. Deterministic given (vocab, config).
pub fn init_model(vocab: &Vocabulary, config: &TrainConfig) -> Result<EmbeddingModel> {
    config.validate()?;
    if vocab.is_empty() {
        return Err(Error::data("cannot initialize a model on an empty vocabulary"));
    }
    let mut rng = Rng::fork(config.seed, 0);
    Ok(EmbeddingModel {
        input: Matrix::uniform_init(vocab.len(), config.dim, &mut rng),
        context: Matrix::zeros(vocab.len(), config.dim),
        vocab: vocab.clone(),
        config: config.clone(),
    })
}

/// Per-epoch diagnostics from a training run.
#[derive(Debug, Clone, Default)]
pub struct TrainStats {
    /// Mean negative-sampling loss per trained position, one entry per epoch.
    pub epoch_losses: Vec<f64>,
    /// Token occurrences processed (before subsampling), all epochs.
    pub processed_tokens: u64,
}

/// Linear decay from `lr_start` to `lr_min` across the expected token count.
pub(crate) fn lr_at(config: &TrainConfig, processed: u64, total_expected: u64) -> f32 {
    if total_expected == 0 {
        return config.lr_start;
    }
    let progress = (processed as f64 / total_expected as f64).min(1.0) as f32;
    (config.lr_start - (config.lr_start - config.lr_min) * progress).max(config.lr_min)
}

/// Subsamples one sentence occurrence-by-occurrence. Always draws once per
/// token so the random stream is independent of the keep decisions.
pub(crate) fn subsample_sentence(
    sentence: &[u32],
    vocab: &Vocabulary,
    threshold: Option<f64>,
    rng: &mut Rng,
    out: &mut Vec<u32>,
) {
    out.clear();
    match threshold {
        None => out.extend_from_slice(sentence),
        Some(t) => {
            let total = vocab.total_count();
            for &idx in sentence {
                let keep = subsample_keep_prob(vocab.count(idx as usize), total, t);
                if rng.next_f64() < keep {
                    out.push(idx);
                }
            }
        }
    }
}

fn train_sequential(
    model: &mut EmbeddingModel,
    sentences: &[Vec<u32>],
    noise: &NoiseTable,
    total_expected: u64,
) -> TrainStats {
    let config = model.config.clone();
    let mut rng = Rng::fork(config.seed, 1);
    let mut buffers = SgdBuffers::new(config.dim);
    let mut kept = Vec::new();
    let mut stats = TrainStats::default();
    let mut processed = 0u64;

    for _epoch in 0..config.epochs {
        let mut epoch_loss = 0.0f64;
        let mut epoch_positions = 0u64;
        for sentence in sentences {
            let lr = lr_at(&config, processed, total_expected);
            subsample_sentence(sentence, &model.vocab, config.subsample_t, &mut rng, &mut kept);
            let loss = match config.model {
                ModelKind::Cbow => {
                    sgd::cbow_sentence(&mut model.input, &mut model.context, &kept, &config, noise, lr, &mut rng, &mut buffers)
                }
                ModelKind::SkipGram => {
                    sgd::skipgram_sentence(&mut model.input, &mut model.context, &kept, &config, noise, lr, &mut rng, &mut buffers)
                }
            };
            epoch_loss += loss;
            epoch_positions += kept.len() as u64;
            processed += sentence.len() as u64;
        }
        stats
            .epoch_losses
            .push(epoch_loss / epoch_positions.max(1) as f64);
    }
    stats.processed_tokens = processed;
    stats
}

/// Trains a model over vocabulary-indexed sentences. The slice is replayed
/// once per epoch. With `threads == 1` the result is deterministic; with
/// more threads (and the `parallel` feature) contiguous sentence shards are
/// trained lock-free over the shared matrices.
pub fn train(
    sentences: &[Vec<u32>],
    vocab: &Vocabulary,
    config: &TrainConfig,
) -> Result<(EmbeddingModel, TrainStats)> {
    let mut model = init_model(vocab, config)?;
    if config.epochs == 0 {
        return Ok((model, TrainStats::default()));
    }
    let noise = build_noise_table(vocab, 0.75, default_noise_table_size(vocab.len()))?;
    let tokens_per_epoch: u64 = sentences.iter().map(|s| s.len() as u64).sum();
    let total_expected = tokens_per_epoch * config.epochs as u64;

    #[cfg(feature = "parallel")]
    if config.threads > 1 {
        let stats = hogwild::train_hogwild(&mut model, sentences, &noise, total_expected)?;
        if !model.input.is_finite() || !model.context.is_finite() {
            return Err(Error::data("training produced non-finite parameters"));
        }
        return Ok((model, stats));
    }

    let stats = train_sequential(&mut model, sentences, &noise, total_expected);
    debug_assert!(model.input.is_finite() && model.context.is_finite());
    Ok((model, stats))
}

/// Exact softmax distribution over the vocabulary for one input word, from
/// the model's two layers. Diagnostic only; training never computes it.
pub fn softmax_distribution(model: &EmbeddingModel, word: usize) -> Vec<f64> {
    let input = model.input.row(word);
    let scores: Vec<f64> = (0..model.vocab.len())
        .map(|w| {
            model
                .context
                .row(w)
                .iter()
                .zip(input)
                .map(|(&c, &i)| c as f64 * i as f64)
                .sum::<f64>()
                .exp()
        })
        .collect();
    let denom: f64 = scores.iter().sum();
    scores.into_iter().map(|s| s / denom).collect()
}
