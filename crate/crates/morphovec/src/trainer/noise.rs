//! Precomputed negative-sampling table over the unigram^power distribution.

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Largest table allocated by default.
const MAX_DEFAULT_SIZE: usize = 10_000_000;
/// Floor for tiny vocabularies so allocation proportions stay accurate.
const MIN_DEFAULT_SIZE: usize = 100_000;

/// Default table size: 10^7 slots at full scale, shrunk for small
/// vocabularies (roughly 100 slots per token, at least 10^5) and never
/// below the vocabulary size itself.
pub fn default_noise_table_size(vocab_size: usize) -> usize {
    let scaled = vocab_size
        .saturating_mul(100)
        .clamp(MIN_DEFAULT_SIZE, MAX_DEFAULT_SIZE);
    scaled.max(vocab_size)
}

/// Vocabulary indices laid out so that token w fills a fraction of the
/// table proportional to count(w)^power, within one slot.
#[derive(Debug, Clone)]
pub struct NoiseTable {
    table: Vec<u32>,
    power: f64,
}

impl NoiseTable {
    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    /// One draw from the noise distribution.
    #[inline]
    pub fn sample(&self, rng: &mut Rng) -> usize {
        self.table[rng.below(self.table.len() as u64) as usize] as usize
    }

    /// Slots assigned to a vocabulary index, for distribution checks.
    pub fn slots_of(&self, index: usize) -> usize {
        self.table.iter().filter(|&&w| w as usize == index).count()
    }
}

/// Builds the table by a cumulative sweep over count^power mass.
pub fn build_noise_table(vocab: &Vocabulary, power: f64, size: usize) -> Result<NoiseTable> {
    if vocab.is_empty() {
        return Err(Error::data("cannot build a noise table on an empty vocabulary"));
    }
    if size < vocab.len() {
        return Err(Error::data(format!(
            "noise table size {size} is below the vocabulary size {}",
            vocab.len()
        )));
    }
    let total_mass: f64 = (0..vocab.len())
        .map(|i| (vocab.count(i) as f64).powf(power))
        .sum();

    let mut table = Vec::with_capacity(size);
    let mut word = 0usize;
    let mut cumulative = (vocab.count(0) as f64).powf(power) / total_mass;
    for slot in 0..size {
        table.push(word as u32);
        if (slot + 1) as f64 / size as f64 >= cumulative && word + 1 < vocab.len() {
            word += 1;
            cumulative += (vocab.count(word) as f64).powf(power) / total_mass;
        }
    }
    Ok(NoiseTable { table, power })
}
