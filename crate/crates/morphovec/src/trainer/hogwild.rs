//! Lock-free multi-threaded training over shared parameter matrices.
//!
//! Worker streams own disjoint sentence shards but update the same input and
//! context matrices without synchronization, in the established hogwild
//! style: concurrent f32 writes may race and individual updates may be lost.
//! The training contract under `threads > 1` is therefore only finiteness
//! and embedding quality, not reproducibility; tests that need bit-stable
//! output run with one thread.

use std::cell::UnsafeCell;
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;

use super::{lr_at, subsample_sentence, EmbeddingModel, ModelKind, NoiseTable, TrainStats};
use super::sgd::{self, SgdBuffers};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Shared mutable handle workers alias the model through.
pub(crate) struct RacyCell<T>(UnsafeCell<T>);

unsafe impl<T> Sync for RacyCell<T> {}

impl<T> RacyCell<T> {
    pub(crate) fn new(value: T) -> Self {
        RacyCell(UnsafeCell::new(value))
    }

    /// Caller accepts racy access: multiple workers hold this mutably at
    /// once and writes may interleave at f32 granularity.
    #[allow(clippy::mut_from_ref)]
    pub(crate) unsafe fn get_mut(&self) -> &mut T {
        &mut *self.0.get()
    }

    pub(crate) fn into_inner(self) -> T {
        self.0.into_inner()
    }
}

/// Splits sentences into `shards` contiguous blocks, one per worker stream.
fn shard_sentences(sentences: &[Vec<u32>], shards: usize) -> Vec<&[Vec<u32>]> {
    let shards = shards.min(sentences.len()).max(1);
    let base = sentences.len() / shards;
    let extra = sentences.len() % shards;
    let mut out = Vec::with_capacity(shards);
    let mut start = 0;
    for s in 0..shards {
        let len = base + usize::from(s < extra);
        out.push(&sentences[start..start + len]);
        start += len;
    }
    out
}

pub(crate) fn train_hogwild(
    model: &mut EmbeddingModel,
    sentences: &[Vec<u32>],
    noise: &NoiseTable,
    total_expected: u64,
) -> Result<TrainStats> {
    let config = model.config.clone();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::data(format!("failed to build a {}-thread pool: {e}", config.threads)))?;

    let shards = shard_sentences(sentences, config.threads);
    let processed = AtomicU64::new(0);
    let vocab = model.vocab.clone();
    let shared = RacyCell::new(model);

    let mut stats = TrainStats::default();
    for epoch in 0..config.epochs {
        let epoch_totals: Vec<(f64, u64)> = pool.install(|| {
            shards
                .par_iter()
                .enumerate()
                .map(|(worker, shard)| {
                    let mut rng = Rng::fork(
                        config.seed,
                        2 + (epoch * config.threads + worker) as u64,
                    );
                    let mut buf = SgdBuffers::new(config.dim);
                    let mut kept = Vec::new();
                    let mut loss = 0.0f64;
                    let mut positions = 0u64;
                    for sentence in shard.iter() {
                        let done = processed.load(Ordering::Relaxed);
                        let lr = lr_at(&config, done, total_expected);
                        subsample_sentence(sentence, &vocab, config.subsample_t, &mut rng, &mut kept);
                        // Racy by contract: all workers update one model.
                        let m = unsafe { shared.get_mut() };
                        loss += match config.model {
                            ModelKind::Cbow => sgd::cbow_sentence(
                                &mut m.input, &mut m.context, &kept, &config, noise, lr, &mut rng, &mut buf,
                            ),
                            ModelKind::SkipGram => sgd::skipgram_sentence(
                                &mut m.input, &mut m.context, &kept, &config, noise, lr, &mut rng, &mut buf,
                            ),
                        };
                        positions += kept.len() as u64;
                        processed.fetch_add(sentence.len() as u64, Ordering::Relaxed);
                    }
                    (loss, positions)
                })
                .collect()
        });
        let (loss, positions) = epoch_totals
            .into_iter()
            .fold((0.0, 0u64), |(l, p), (dl, dp)| (l + dl, p + dp));
        stats.epoch_losses.push(loss / positions.max(1) as f64);
    }
    stats.processed_tokens = processed.into_inner();
    let _ = shared.into_inner();
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sharding_covers_everything_contiguously() {
        let sentences: Vec<Vec<u32>> = (0..10).map(|i| vec![i]).collect();
        for shards in 1..=12 {
            let parts = shard_sentences(&sentences, shards);
            let flat: Vec<u32> = parts
                .iter()
                .flat_map(|p| p.iter().map(|s| s[0]))
                .collect();
            assert_eq!(flat, (0..10).collect::<Vec<_>>(), "shards = {shards}");
        }
    }
}
