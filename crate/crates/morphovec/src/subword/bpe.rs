//! Greedy byte-pair-encoding piece tokenizer.
//!
//! Trained on whitespace-pretokenized word counts: starting from single
//! characters, the most frequent adjacent symbol pair is merged until the
//! piece inventory reaches the target size or no pair occurs twice. Encoding
//! applies the learned merges in order, so `join(encode(w)) == w` always.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BpeModel {
    merges: Vec<(String, String)>,
    merge_rank: HashMap<(String, String), usize>,
    piece_vocab: Vocabulary,
    target_size: usize,
}

impl BpeModel {
    fn new(merges: Vec<(String, String)>, piece_vocab: Vocabulary, target_size: usize) -> Self {
        let merge_rank = merges
            .iter()
            .enumerate()
            .map(|(rank, pair)| (pair.clone(), rank))
            .collect();
        BpeModel {
            merges,
            merge_rank,
            piece_vocab,
            target_size,
        }
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn piece_vocab(&self) -> &Vocabulary {
        &self.piece_vocab
    }

    pub fn target_size(&self) -> usize {
        self.target_size
    }

    /// Splits a word into pieces by replaying merges in learned order
    /// (lowest-rank pair first, leftmost occurrence on ties). Unseen
    /// characters pass through as single-character pieces.
    pub fn encode(&self, word: &str) -> Vec<String> {
        let mut symbols: Vec<String> = word.chars().map(String::from).collect();
        if symbols.len() < 2 {
            return symbols;
        }
        loop {
            let mut best: Option<(usize, usize)> = None; // (rank, position)
            for i in 0..symbols.len() - 1 {
                let key = (symbols[i].clone(), symbols[i + 1].clone());
                if let Some(&rank) = self.merge_rank.get(&key) {
                    if best.is_none_or(|(r, _)| rank < r) {
                        best = Some((rank, i));
                    }
                }
            }
            match best {
                Some((_, i)) => {
                    let right = symbols.remove(i + 1);
                    symbols[i].push_str(&right);
                }
                None => break,
            }
        }
        symbols
    }

    /// Text format: `bpe <target_size>` header, then one `left right` merge
    /// per line in learned order.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        writeln!(out, "bpe {}", self.target_size).map_err(|e| Error::io(path, e))?;
        for (left, right) in &self.merges {
            writeln!(out, "{left} {right}").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<BpeModel> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "empty file, expected `bpe <target_size>`"))?;
        let header = header.map_err(|e| Error::io(path, e))?;
        let target_size = match header.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["bpe", size] => size
                .parse::<usize>()
                .map_err(|_| Error::parse(path, 1, "invalid target size"))?,
            _ => return Err(Error::parse(path, 1, "expected `bpe <target_size>`")),
        };
        let mut merges = Vec::new();
        for (idx, line) in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            match line.split(' ').collect::<Vec<_>>().as_slice() {
                [left, right] if !left.is_empty() && !right.is_empty() => {
                    merges.push((left.to_string(), right.to_string()));
                }
                _ => {
                    return Err(Error::parse(
                        path,
                        idx + 1,
                        "expected `left<SPACE>right` merge",
                    ))
                }
            }
        }
        // Piece counts are not persisted; pieces reload with unit counts.
        let piece_vocab = Vocabulary::from_counts(
            merges.iter().map(|(l, r)| (format!("{l}{r}"), 1)),
            1,
        );
        Ok(BpeModel::new(merges, piece_vocab, target_size))
    }
}

/// Trains a BPE model on (word, count) pairs.
pub fn train_bpe<I>(word_counts: I, target_size: usize) -> Result<BpeModel>
where
    I: IntoIterator<Item = (String, u64)>,
{
    // Deterministic word order regardless of the caller's container.
    let mut words: Vec<(Vec<String>, u64)> = {
        let mut merged: HashMap<String, u64> = HashMap::new();
        for (word, count) in word_counts {
            *merged.entry(word).or_insert(0) += count;
        }
        let mut words: Vec<(String, u64)> = merged.into_iter().collect();
        words.sort();
        words
            .into_iter()
            .map(|(word, count)| (word.chars().map(String::from).collect(), count))
            .collect()
    };
    if words.is_empty() {
        return Err(Error::data("cannot train BPE on an empty stream"));
    }

    let mut pieces: std::collections::BTreeSet<String> = words
        .iter()
        .flat_map(|(symbols, _)| symbols.iter().cloned())
        .collect();
    if target_size < pieces.len() {
        return Err(Error::usage(format!(
            "target size {target_size} is below the {} distinct characters in the stream",
            pieces.len()
        )));
    }

    let mut merges: Vec<(String, String)> = Vec::new();
    while pieces.len() < target_size {
        let mut pair_counts: HashMap<(&str, &str), u64> = HashMap::new();
        for (symbols, count) in &words {
            for pair in symbols.windows(2) {
                *pair_counts
                    .entry((pair[0].as_str(), pair[1].as_str()))
                    .or_insert(0) += count;
            }
        }
        // Most frequent pair; ties break to the lexicographically smallest.
        let best = pair_counts
            .into_iter()
            .filter(|(_, count)| *count >= 2)
            .max_by(|(pa, ca), (pb, cb)| ca.cmp(cb).then_with(|| pb.cmp(pa)));
        let Some(((left, right), _)) = best else {
            break; // no pair repeats
        };
        let (left, right) = (left.to_string(), right.to_string());
        let merged = format!("{left}{right}");
        for (symbols, _) in &mut words {
            merge_in_place(symbols, &left, &right);
        }
        merges.push((left, right));
        pieces.insert(merged);
    }

    // Piece counts over the final segmentation of the stream. Alphabet
    // characters and merge outputs keep a floor count of 1 even when later
    // merges absorb them completely: encode can still emit them for words
    // outside the training stream.
    let mut piece_counts: HashMap<String, u64> = HashMap::new();
    for (symbols, count) in &words {
        for symbol in symbols {
            *piece_counts.entry(symbol.clone()).or_insert(0) += count;
        }
    }
    for piece in pieces {
        piece_counts.entry(piece).or_insert(1);
    }
    Ok(BpeModel::new(
        merges,
        Vocabulary::from_counts(piece_counts, 1),
        target_size,
    ))
}

/// Single left-to-right pass replacing adjacent (left, right) by their
/// concatenation; overlapping occurrences merge greedily from the left.
fn merge_in_place(symbols: &mut Vec<String>, left: &str, right: &str) {
    let mut i = 0;
    while i + 1 < symbols.len() {
        if symbols[i] == left && symbols[i + 1] == right {
            let r = symbols.remove(i + 1);
            symbols[i].push_str(&r);
        }
        i += 1;
    }
}

/// Splits a word with a trained model; free-function form of
/// [`BpeModel::encode`].
pub fn bpe_encode(model: &BpeModel, word: &str) -> Vec<String> {
    model.encode(word)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn counts(pairs: &[(&str, u64)]) -> Vec<(String, u64)> {
        pairs.iter().map(|(w, c)| (w.to_string(), *c)).collect()
    }

    #[test]
    fn aaab_learns_aa_first() {
        // "aa" appears twice per word, "ab" once: (a,a) merges first.
        let model = train_bpe(counts(&[("aaab", 100)]), 4).unwrap();
        assert_eq!(model.merges()[0], ("a".to_string(), "a".to_string()));
    }

    #[test]
    fn target_at_alphabet_size_means_no_merges() {
        let model = train_bpe(counts(&[("abc", 10)]), 3).unwrap();
        assert!(model.merges().is_empty());
        assert_eq!(model.encode("abc"), ["a", "b", "c"]);
    }

    #[test]
    fn target_below_alphabet_rejected() {
        assert!(train_bpe(counts(&[("abc", 10)]), 2).is_err());
    }

    #[test]
    fn empty_stream_rejected() {
        assert!(train_bpe(Vec::new(), 10).is_err());
    }

    #[test]
    fn encode_traces_single_merge() {
        let model = train_bpe(counts(&[("aaab", 100)]), 3).unwrap();
        assert_eq!(
            model.merges(),
            [("a".to_string(), "a".to_string())]
        );
        assert_eq!(model.encode("aaab"), ["aa", "a", "b"]);
    }

    #[test]
    fn full_word_in_vocab_encodes_to_itself() {
        let model = train_bpe(counts(&[("abab", 50)]), 5).unwrap();
        assert_eq!(model.encode("abab"), ["abab"]);
    }

    #[test]
    fn empty_word_encodes_empty() {
        let model = train_bpe(counts(&[("ab", 5)]), 3).unwrap();
        assert!(model.encode("").is_empty());
    }

    #[test]
    fn unseen_characters_pass_through() {
        let model = train_bpe(counts(&[("aa", 5)]), 2).unwrap();
        assert_eq!(model.encode("axa"), ["a", "x", "a"]);
    }

    #[test]
    fn stops_when_no_pair_repeats() {
        let model = train_bpe(counts(&[("ab", 1), ("cd", 1)]), 100).unwrap();
        assert!(model.merges().is_empty());
    }

    #[test]
    fn absorbed_merge_outputs_stay_in_piece_vocab() {
        // "ab" merges first, then "ab"+"c": the final segmentation of the
        // stream never shows "ab" alone, but encode can emit it.
        let model = train_bpe(counts(&[("abc", 50)]), 5).unwrap();
        assert_eq!(model.encode("abc"), ["abc"]);
        assert_eq!(model.encode("abd"), ["ab", "d"]);
        assert!(model.piece_vocab().get("ab").is_some());
        assert!(model.piece_vocab().get("abc").is_some());
    }

    #[test]
    fn save_load_round_trip_preserves_encoding() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pieces.bpe");
        let model = train_bpe(counts(&[("banana", 20), ("bandana", 11)]), 10).unwrap();
        model.save(&path).unwrap();
        let reloaded = BpeModel::load(&path).unwrap();
        assert_eq!(model.merges(), reloaded.merges());
        assert_eq!(model.target_size(), reloaded.target_size());
        for word in ["banana", "bandana", "ananas", "xyz"] {
            assert_eq!(model.encode(word), reloaded.encode(word));
        }
    }

    proptest! {
        #[test]
        fn encode_is_lossless(
            train_words in proptest::collection::vec(("[a-f]{1,10}", 1u64..50), 1..20),
            probe in "[a-h]{0,12}",
            target in 6usize..40
        ) {
            let stream: Vec<(String, u64)> = train_words
                .iter()
                .map(|(w, c)| (w.clone(), *c))
                .collect();
            let model = train_bpe(stream, target).unwrap();
            prop_assert_eq!(model.encode(&probe).concat(), probe);
        }

        #[test]
        fn training_is_deterministic(
            train_words in proptest::collection::vec(("[a-d]{1,8}", 1u64..20), 1..15),
            target in 4usize..30
        ) {
            let stream: Vec<(String, u64)> = train_words
                .iter()
                .map(|(w, c)| (w.clone(), *c))
                .collect();
            let first = train_bpe(stream.clone(), target).unwrap();
            let mut reversed = stream;
            reversed.reverse();
            let second = train_bpe(reversed, target).unwrap();
            prop_assert_eq!(first.merges(), second.merges());
        }
    }
}
