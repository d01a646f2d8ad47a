//! Training of hashed-subword embeddings on top of the SGD core.
//!
//! A word's representation during training is the average of its dedicated
//! word row and its hashed n-gram rows. Composition at query time sums the
//! same rows instead; see [`super::fasttext_word_vector`].

use super::{BucketTable, SubwordIndex, SubwordVectors};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::store::VectorStore;
use crate::trainer::sgd::{self, SgdBuffers};
use crate::trainer::{
    build_noise_table, default_noise_table_size, lr_at, subsample_sentence, Matrix, ModelKind,
    NoiseTable, TrainConfig, TrainStats,
};

/// Subword model parameters: dedicated word rows, hashed n-gram rows and the
/// shared context layer over words.
#[derive(Debug, Clone)]
pub struct SubwordModel {
    pub index: SubwordIndex,
    pub word_input: Matrix,
    pub ngram_input: Matrix,
    pub context: Matrix,
    pub config: TrainConfig,
    /// Bucket ids per vocabulary word, fixed at initialization.
    word_buckets: Vec<Vec<u32>>,
}

impl SubwordModel {
    pub fn init(index: SubwordIndex, config: &TrainConfig) -> Result<SubwordModel> {
        config.validate()?;
        if index.word_vocab.is_empty() {
            return Err(Error::data(
                "cannot initialize a subword model on an empty vocabulary",
            ));
        }
        let vocab_size = index.word_vocab.len();
        let mut word_buckets = Vec::with_capacity(vocab_size);
        for i in 0..vocab_size {
            let buckets = index
                .bucket_ids(index.word_vocab.token(i))
                .map_err(|e| Error::data(format!("vocabulary token {i}: {e}")))?;
            word_buckets.push(buckets.into_iter().map(|b| b as u32).collect());
        }
        let mut rng = Rng::fork(config.seed, 0);
        Ok(SubwordModel {
            word_input: Matrix::uniform_init(vocab_size, config.dim, &mut rng),
            ngram_input: Matrix::uniform_init(index.buckets, config.dim, &mut rng),
            context: Matrix::zeros(vocab_size, config.dim),
            config: config.clone(),
            index,
            word_buckets,
        })
    }

    /// Query-side vectors: words as a store, n-grams as a bucket table.
    pub fn to_vectors(&self) -> SubwordVectors {
        let mut words = VectorStore::new(self.config.dim);
        for i in 0..self.index.word_vocab.len() {
            words
                .push(self.index.word_vocab.token(i), self.word_input.row(i))
                .expect("vocabulary tokens are valid store tokens");
        }
        SubwordVectors {
            index: self.index.clone(),
            words,
            ngrams: BucketTable::from_raw(self.config.dim, self.ngram_input.data().to_vec()),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.word_input.is_finite() && self.ngram_input.is_finite() && self.context.is_finite()
    }

    /// Adds word row + n-gram rows into `hidden`, returns the row count.
    fn gather(&self, word: usize, hidden: &mut [f32]) -> usize {
        for (h, &v) in hidden.iter_mut().zip(self.word_input.row(word)) {
            *h += v;
        }
        for &bucket in &self.word_buckets[word] {
            for (h, &v) in hidden.iter_mut().zip(self.ngram_input.row(bucket as usize)) {
                *h += v;
            }
        }
        1 + self.word_buckets[word].len()
    }

    /// Applies the lr-scaled hidden gradient to every row behind `word`.
    fn apply(&mut self, word: usize, grad: &[f32], lr: f32) {
        for (v, &g) in self.word_input.row_mut(word).iter_mut().zip(grad) {
            *v += lr * g;
        }
        for bi in 0..self.word_buckets[word].len() {
            let bucket = self.word_buckets[word][bi] as usize;
            for (v, &g) in self.ngram_input.row_mut(bucket).iter_mut().zip(grad) {
                *v += lr * g;
            }
        }
    }

    #[allow(clippy::needless_range_loop)]
    fn train_sentence(
        &mut self,
        sentence: &[u32],
        noise: &NoiseTable,
        lr: f32,
        rng: &mut Rng,
        buf: &mut SgdBuffers,
    ) -> f64 {
        let mut loss = 0.0f64;
        for t in 0..sentence.len() {
            let b = 1 + rng.below(self.config.window as u64) as usize;
            let start = t.saturating_sub(b);
            let stop = (t + b + 1).min(sentence.len());
            match self.config.model {
                ModelKind::Cbow => {
                    if stop - start - 1 == 0 {
                        continue;
                    }
                    buf.hidden.fill(0.0);
                    let mut rows = 0usize;
                    for c in start..stop {
                        if c == t {
                            continue;
                        }
                        rows += self.gather(sentence[c] as usize, &mut buf.hidden);
                    }
                    let scale = 1.0 / rows as f32;
                    for h in buf.hidden.iter_mut() {
                        *h *= scale;
                    }
                    let target = sentence[t] as usize;
                    sgd::sample_negatives(noise, target, self.config.negatives, rng, &mut buf.negatives);
                    loss += sgd::ns_step(
                        &mut self.context,
                        &buf.hidden,
                        target,
                        &buf.negatives,
                        lr,
                        &mut buf.hidden_grad,
                    );
                    for c in start..stop {
                        if c == t {
                            continue;
                        }
                        self.apply(sentence[c] as usize, &buf.hidden_grad, lr);
                    }
                }
                ModelKind::SkipGram => {
                    let center = sentence[t] as usize;
                    for c in start..stop {
                        if c == t {
                            continue;
                        }
                        buf.hidden.fill(0.0);
                        let rows = self.gather(center, &mut buf.hidden);
                        let scale = 1.0 / rows as f32;
                        for h in buf.hidden.iter_mut() {
                            *h *= scale;
                        }
                        let target = sentence[c] as usize;
                        sgd::sample_negatives(noise, target, self.config.negatives, rng, &mut buf.negatives);
                        loss += sgd::ns_step(
                            &mut self.context,
                            &buf.hidden,
                            target,
                            &buf.negatives,
                            lr,
                            &mut buf.hidden_grad,
                        );
                        self.apply(center, &buf.hidden_grad, lr);
                    }
                }
            }
        }
        loss
    }
}

/// Trains subword embeddings over vocabulary-indexed sentences. Same
/// replay, subsampling, decay and threading contract as [`crate::trainer::train`].
pub fn train_subword(
    sentences: &[Vec<u32>],
    index: SubwordIndex,
    config: &TrainConfig,
) -> Result<(SubwordModel, TrainStats)> {
    let mut model = SubwordModel::init(index, config)?;
    if config.epochs == 0 {
        return Ok((model, TrainStats::default()));
    }
    let vocab = model.index.word_vocab.clone();
    let noise = build_noise_table(&vocab, 0.75, default_noise_table_size(vocab.len()))?;
    let tokens_per_epoch: u64 = sentences.iter().map(|s| s.len() as u64).sum();
    let total_expected = tokens_per_epoch * config.epochs as u64;

    #[cfg(feature = "parallel")]
    if config.threads > 1 {
        let stats = train_subword_hogwild(&mut model, sentences, &noise, total_expected)?;
        if !model.is_finite() {
            return Err(Error::data("training produced non-finite parameters"));
        }
        return Ok((model, stats));
    }

    let mut rng = Rng::fork(config.seed, 1);
    let mut buf = SgdBuffers::new(config.dim);
    let mut kept = Vec::new();
    let mut stats = TrainStats::default();
    let mut processed = 0u64;
    for _epoch in 0..config.epochs {
        let mut epoch_loss = 0.0f64;
        let mut positions = 0u64;
        for sentence in sentences {
            let lr = lr_at(config, processed, total_expected);
            subsample_sentence(sentence, &vocab, config.subsample_t, &mut rng, &mut kept);
            epoch_loss += model.train_sentence(&kept, &noise, lr, &mut rng, &mut buf);
            positions += kept.len() as u64;
            processed += sentence.len() as u64;
        }
        stats.epoch_losses.push(epoch_loss / positions.max(1) as f64);
    }
    stats.processed_tokens = processed;
    debug_assert!(model.is_finite());
    Ok((model, stats))
}

#[cfg(feature = "parallel")]
fn train_subword_hogwild(
    model: &mut SubwordModel,
    sentences: &[Vec<u32>],
    noise: &NoiseTable,
    total_expected: u64,
) -> Result<TrainStats> {
    use crate::trainer::hogwild::RacyCell;
    use rayon::prelude::*;
    use std::sync::atomic::{AtomicU64, Ordering};

    let config = model.config.clone();
    let vocab = model.index.word_vocab.clone();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::data(format!("failed to build a {}-thread pool: {e}", config.threads)))?;

    let shards: Vec<&[Vec<u32>]> = {
        let n = config.threads.min(sentences.len()).max(1);
        let base = sentences.len() / n;
        let extra = sentences.len() % n;
        let mut out = Vec::with_capacity(n);
        let mut start = 0;
        for s in 0..n {
            let len = base + usize::from(s < extra);
            out.push(&sentences[start..start + len]);
            start += len;
        }
        out
    };
    let processed = AtomicU64::new(0);
    let shared = RacyCell::new(model);

    let mut stats = TrainStats::default();
    for epoch in 0..config.epochs {
        let totals: Vec<(f64, u64)> = pool.install(|| {
            shards
                .par_iter()
                .enumerate()
                .map(|(worker, shard)| {
                    let mut rng =
                        Rng::fork(config.seed, 2 + (epoch * config.threads + worker) as u64);
                    let mut buf = SgdBuffers::new(config.dim);
                    let mut kept = Vec::new();
                    let mut loss = 0.0f64;
                    let mut positions = 0u64;
                    for sentence in shard.iter() {
                        let done = processed.load(Ordering::Relaxed);
                        let lr = lr_at(&config, done, total_expected);
                        subsample_sentence(sentence, &vocab, config.subsample_t, &mut rng, &mut kept);
                        let m = unsafe { shared.get_mut() };
                        loss += m.train_sentence(&kept, noise, lr, &mut rng, &mut buf);
                        positions += kept.len() as u64;
                        processed.fetch_add(sentence.len() as u64, Ordering::Relaxed);
                    }
                    (loss, positions)
                })
                .collect()
        });
        let (loss, positions) = totals
            .into_iter()
            .fold((0.0, 0u64), |(l, p), (dl, dp)| (l + dl, p + dp));
        stats.epoch_losses.push(loss / positions.max(1) as f64);
    }
    stats.processed_tokens = processed.into_inner();
    Ok(stats)
}
