//! Token vocabulary with counts and frequent-word subsampling.

use std::collections::HashMap;

/// Token↔index map with occurrence counts.
///
/// Tokens are ordered by descending count (lexicographic tie-break), so the
/// index assignment is a deterministic function of the counted multiset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    counts: Vec<u64>,
    total_count: u64,
    min_count: u64,
}

impl Vocabulary {
    /// Builds a vocabulary from (token, count) pairs, dropping tokens with
    /// count below `min_count`.
    pub fn from_counts(counts: impl IntoIterator<Item = (String, u64)>, min_count: u64) -> Self {
        let mut retained: Vec<(String, u64)> = counts
            .into_iter()
            .filter(|(_, count)| *count >= min_count)
            .collect();
        retained.sort_by(|(ta, ca), (tb, cb)| cb.cmp(ca).then_with(|| ta.cmp(tb)));

        let mut tokens = Vec::with_capacity(retained.len());
        let mut index = HashMap::with_capacity(retained.len());
        let mut count_list = Vec::with_capacity(retained.len());
        let mut total = 0u64;
        for (token, count) in retained {
            index.insert(token.clone(), tokens.len());
            tokens.push(token);
            count_list.push(count);
            total += count;
        }
        Vocabulary {
            tokens,
            index,
            counts: count_list,
            total_count: total,
            min_count,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, idx: usize) -> &str {
        &self.tokens[idx]
    }

    pub fn count(&self, idx: usize) -> u64 {
        self.counts[idx]
    }

    /// Sum of retained token counts.
    pub fn total_count(&self) -> u64 {
        self.total_count
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }

    /// Maps a token sentence onto vocabulary indices, dropping unknowns.
    pub fn index_sentence<S: AsRef<str>>(&self, sentence: &[S]) -> Vec<u32> {
        sentence
            .iter()
            .filter_map(|t| self.get(t.as_ref()).map(|i| i as u32))
            .collect()
    }
}

/// Counts a finite token stream and builds the vocabulary.
pub fn build_vocab<I, S>(stream: I, min_count: u64) -> Vocabulary
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut counts: HashMap<String, u64> = HashMap::new();
    for token in stream {
        match counts.get_mut(token.as_ref()) {
            Some(c) => *c += 1,
            None => {
                counts.insert(token.as_ref().to_string(), 1);
            }
        }
    }
    Vocabulary::from_counts(counts, min_count)
}

/// Probability of keeping one occurrence of a token during subsampling:
/// `min(1, sqrt(t / f))` with `f = token_count / total`. Tokens at or below
/// the threshold frequency are always kept.
pub fn subsample_keep_prob(token_count: u64, total: u64, threshold: f64) -> f64 {
    assert!(total > 0, "subsampling requires a nonzero total count");
    assert!(token_count <= total, "token count exceeds total");
    assert!(threshold > 0.0, "subsampling threshold must be positive");
    let frequency = token_count as f64 / total as f64;
    (threshold / frequency).sqrt().min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn counts_and_orders_tokens() {
        let vocab = build_vocab(["a", "a", "b"], 1);
        assert_eq!(vocab.tokens().collect::<Vec<_>>(), ["a", "b"]);
        assert_eq!(vocab.count(0), 2);
        assert_eq!(vocab.count(1), 1);
        assert_eq!(vocab.total_count(), 3);
    }

    #[test]
    fn min_count_filters() {
        let vocab = build_vocab(["a", "a", "b"], 2);
        assert_eq!(vocab.tokens().collect::<Vec<_>>(), ["a"]);
        assert_eq!(vocab.total_count(), 2);
        assert!(vocab.get("b").is_none());
    }

    #[test]
    fn empty_stream_is_empty_vocab() {
        let vocab = build_vocab(Vec::<String>::new(), 5);
        assert!(vocab.is_empty());
        assert_eq!(vocab.total_count(), 0);
    }

    #[test]
    fn ties_break_lexicographically() {
        let vocab = build_vocab(["zeta", "alpha", "zeta", "alpha", "mid"], 1);
        assert_eq!(vocab.tokens().collect::<Vec<_>>(), ["alpha", "zeta", "mid"]);
    }

    #[test]
    fn lemma_suffix_stream_mixes_token_kinds() {
        // Ten rendered lemma+suffix sentences, counted by hand:
        // "ev >>3" x6, "git >>0" x4  →  ev:6, >>3:6, git:4, >>0:4.
        let mut stream = Vec::new();
        for _ in 0..6 {
            stream.extend(["ev", ">>3"]);
        }
        for _ in 0..4 {
            stream.extend(["git", ">>0"]);
        }
        let vocab = build_vocab(stream, 1);
        assert_eq!(
            vocab.tokens().collect::<Vec<_>>(),
            [">>3", "ev", ">>0", "git"]
        );
        assert_eq!(vocab.count(vocab.get(">>3").unwrap()), 6);
        assert_eq!(vocab.count(vocab.get("git").unwrap()), 4);
    }

    #[test]
    fn index_sentence_drops_unknowns() {
        let vocab = build_vocab(["a", "b", "a"], 1);
        let indices = vocab.index_sentence(&["a", "x", "b"]);
        assert_eq!(indices.len(), 2);
        assert_eq!(indices[0], vocab.get("a").unwrap() as u32);
    }

    #[test]
    fn keep_prob_boundary_cases() {
        // f == t keeps everything.
        assert_eq!(subsample_keep_prob(1, 1000, 1e-3), 1.0);
        // f == 4t halves.
        assert!((subsample_keep_prob(4, 1000, 1e-3) - 0.5).abs() < 1e-12);
        // f == t/2 clamps to 1.
        assert_eq!(subsample_keep_prob(1, 2000, 1e-3), 1.0);
    }

    proptest! {
        #[test]
        fn vocab_is_deterministic_under_permutation(
            mut tokens in proptest::collection::vec("[a-d]{1,3}", 1..60),
            seed in 0u64..1000
        ) {
            let reference = build_vocab(tokens.iter(), 1);
            let mut rng = crate::rng::Rng::seed_from_u64(seed);
            rng.shuffle(&mut tokens);
            let shuffled = build_vocab(tokens.iter(), 1);
            prop_assert_eq!(reference, shuffled);
        }

        #[test]
        fn keep_prob_in_unit_interval_and_monotone(
            count_a in 1u64..=10_000,
            count_b in 1u64..=10_000,
            threshold in 1e-6f64..1.0
        ) {
            let total = 10_000u64;
            let pa = subsample_keep_prob(count_a.min(total), total, threshold);
            let pb = subsample_keep_prob(count_b.min(total), total, threshold);
            prop_assert!((0.0..=1.0).contains(&pa));
            prop_assert!((0.0..=1.0).contains(&pb));
            if count_a <= count_b {
                prop_assert!(pa >= pb);
            }
        }
    }
}
