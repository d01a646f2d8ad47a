//! Negative-sampling SGD steps and per-sentence training loops.

use super::{EmbeddingModel, Matrix, NoiseTable, TrainConfig};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Dot products are clamped to this magnitude inside updates.
const MAX_EXP: f32 = 6.0;
/// Redraw budget for a negative sample colliding with the target.
const NEGATIVE_RETRIES: usize = 8;

/// Logistic function, computed exactly on the clamped input.
#[inline]
pub fn sigmoid(x: f32) -> f32 {
    let x = x.clamp(-MAX_EXP, MAX_EXP);
    1.0 / (1.0 + (-x).exp())
}

/// -log sigmoid(x) on the clamped input, in f64 for stable accumulation.
#[inline]
fn log_sigmoid_loss(x: f32) -> f64 {
    let x = x.clamp(-MAX_EXP, MAX_EXP) as f64;
    (1.0 + (-x).exp()).ln()
}

/// Scratch space reused across steps.
#[derive(Debug)]
pub struct SgdBuffers {
    pub(crate) hidden: Vec<f32>,
    pub(crate) hidden_grad: Vec<f32>,
    pub(crate) negatives: Vec<usize>,
}

impl SgdBuffers {
    pub fn new(dim: usize) -> Self {
        SgdBuffers {
            hidden: vec![0.0; dim],
            hidden_grad: vec![0.0; dim],
            negatives: Vec::new(),
        }
    }
}

/// One positive pair plus its negatives against the context matrix.
///
/// For each (word, label) pair the error is `label - sigmoid(u . h)` with
/// `u` the word's context row; the error-weighted pre-update row accumulates
/// into `hidden_grad`, and the row itself moves by `lr * e * h`. Returns the
/// loss summed over pairs, computed before each pair's update.
pub(crate) fn ns_step(
    context: &mut Matrix,
    hidden: &[f32],
    target: usize,
    negatives: &[usize],
    lr: f32,
    hidden_grad: &mut [f32],
) -> f64 {
    hidden_grad.fill(0.0);

    fn pair(
        context: &mut Matrix,
        hidden: &[f32],
        hidden_grad: &mut [f32],
        word: usize,
        label: f32,
        lr: f32,
    ) -> f64 {
        let row = context.row_mut(word);
        let dot: f32 = row.iter().zip(hidden).map(|(&u, &h)| u * h).sum();
        let pair_loss = if label == 1.0 {
            log_sigmoid_loss(dot)
        } else {
            log_sigmoid_loss(-dot)
        };
        let e = label - sigmoid(dot);
        // hidden_grad picks up the pre-update row; the row then moves by
        // lr * e * h.
        for ((g, u), &h) in hidden_grad.iter_mut().zip(row.iter_mut()).zip(hidden) {
            *g += e * *u;
            *u += lr * e * h;
        }
        pair_loss
    }

    let mut loss = pair(context, hidden, hidden_grad, target, 1.0, lr);
    for &negative in negatives {
        loss += pair(context, hidden, hidden_grad, negative, 0.0, lr);
    }
    loss
}

/// Public entry point over a full model; validates indices.
pub fn negative_sampling_step(
    model: &mut EmbeddingModel,
    hidden: &[f32],
    target: usize,
    negatives: &[usize],
    lr: f32,
) -> Result<(f64, Vec<f32>)> {
    let rows = model.context.rows();
    if target >= rows || negatives.iter().any(|&n| n >= rows) {
        return Err(Error::data(format!(
            "negative-sampling index out of range (vocabulary size {rows})"
        )));
    }
    let mut hidden_grad = vec![0.0; hidden.len()];
    let loss = ns_step(
        &mut model.context,
        hidden,
        target,
        negatives,
        lr,
        &mut hidden_grad,
    );
    Ok((loss, hidden_grad))
}

/// Draws k negatives from the noise table, redrawing target collisions a
/// bounded number of times before giving the slot up.
pub(crate) fn sample_negatives(
    noise: &NoiseTable,
    target: usize,
    k: usize,
    rng: &mut Rng,
    out: &mut Vec<usize>,
) {
    out.clear();
    for _ in 0..k {
        for _ in 0..=NEGATIVE_RETRIES {
            let candidate = noise.sample(rng);
            if candidate != target {
                out.push(candidate);
                break;
            }
        }
    }
}

/// Context positions for a center at `t` with per-side reach `b`.
#[inline]
fn window_bounds(t: usize, b: usize, len: usize) -> (usize, usize) {
    (t.saturating_sub(b), (t + b + 1).min(len))
}

#[allow(clippy::too_many_arguments, clippy::needless_range_loop)]
pub(crate) fn cbow_sentence(
    input: &mut Matrix,
    context: &mut Matrix,
    sentence: &[u32],
    config: &TrainConfig,
    noise: &NoiseTable,
    lr: f32,
    rng: &mut Rng,
    buf: &mut SgdBuffers,
) -> f64 {
    let dim = input.cols();
    let mut loss = 0.0f64;
    for t in 0..sentence.len() {
        let b = 1 + rng.below(config.window as u64) as usize;
        let (start, stop) = window_bounds(t, b, sentence.len());
        let count = stop - start - 1;
        if count == 0 {
            continue; // no context, nothing to train
        }
        buf.hidden.fill(0.0);
        for c in start..stop {
            if c == t {
                continue;
            }
            let row = input.row(sentence[c] as usize);
            for (h, &v) in buf.hidden.iter_mut().zip(row) {
                *h += v;
            }
        }
        let scale = 1.0 / count as f32;
        for h in buf.hidden.iter_mut() {
            *h *= scale;
        }

        let target = sentence[t] as usize;
        sample_negatives(noise, target, config.negatives, rng, &mut buf.negatives);
        loss += ns_step(
            context,
            &buf.hidden,
            target,
            &buf.negatives,
            lr,
            &mut buf.hidden_grad,
        );

        // The averaged-context gradient goes to every context word in full.
        for c in start..stop {
            if c == t {
                continue;
            }
            let row = input.row_mut(sentence[c] as usize);
            for (v, &g) in row.iter_mut().zip(&buf.hidden_grad) {
                *v += lr * g;
            }
        }
    }
    debug_assert_eq!(buf.hidden.len(), dim);
    loss
}

#[allow(clippy::too_many_arguments, clippy::needless_range_loop)]
pub(crate) fn skipgram_sentence(
    input: &mut Matrix,
    context: &mut Matrix,
    sentence: &[u32],
    config: &TrainConfig,
    noise: &NoiseTable,
    lr: f32,
    rng: &mut Rng,
    buf: &mut SgdBuffers,
) -> f64 {
    let mut loss = 0.0f64;
    for t in 0..sentence.len() {
        let b = 1 + rng.below(config.window as u64) as usize;
        let (start, stop) = window_bounds(t, b, sentence.len());
        let center = sentence[t] as usize;
        for c in start..stop {
            if c == t {
                continue;
            }
            let target = sentence[c] as usize;
            // Re-read the center row each pair: the previous pair moved it.
            buf.hidden.copy_from_slice(input.row(center));
            sample_negatives(noise, target, config.negatives, rng, &mut buf.negatives);
            loss += ns_step(
                context,
                &buf.hidden,
                target,
                &buf.negatives,
                lr,
                &mut buf.hidden_grad,
            );
            let row = input.row_mut(center);
            for (v, &g) in row.iter_mut().zip(&buf.hidden_grad) {
                *v += lr * g;
            }
        }
    }
    loss
}

/// Trains one sentence with the CBOW objective using the model's own config.
pub fn train_sentence_cbow(
    model: &mut EmbeddingModel,
    sentence: &[u32],
    noise: &NoiseTable,
    lr: f32,
    rng: &mut Rng,
) -> f64 {
    let config = model.config.clone();
    let mut buf = SgdBuffers::new(config.dim);
    cbow_sentence(
        &mut model.input,
        &mut model.context,
        sentence,
        &config,
        noise,
        lr,
        rng,
        &mut buf,
    )
}

/// Trains one sentence with the Skip-Gram objective.
pub fn train_sentence_skipgram(
    model: &mut EmbeddingModel,
    sentence: &[u32],
    noise: &NoiseTable,
    lr: f32,
    rng: &mut Rng,
) -> f64 {
    let config = model.config.clone();
    let mut buf = SgdBuffers::new(config.dim);
    skipgram_sentence(
        &mut model.input,
        &mut model.context,
        sentence,
        &config,
        noise,
        lr,
        rng,
        &mut buf,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocab, Vocabulary};
    use crate::trainer::{build_noise_table, init_model, ModelKind};

    fn vocab_n(n: usize) -> Vocabulary {
        build_vocab((0..n).map(|i| format!("w{i}")), 1)
    }

    fn model_with(vocab: &Vocabulary, dim: usize, kind: ModelKind) -> EmbeddingModel {
        let mut config = TrainConfig::new(kind);
        config.dim = dim;
        config.min_count = 1;
        config.window = 1;
        config.subsample_t = None;
        init_model(vocab, &config).unwrap()
    }

    #[test]
    fn zero_context_rows_give_log2_loss() {
        // context starts all-zero, so sigma = 0.5 for both pair kinds.
        let vocab = vocab_n(3);
        let mut model = model_with(&vocab, 4, ModelKind::Cbow);
        let hidden = vec![0.3, -0.2, 0.1, 0.05];
        let (loss_pos, _) = negative_sampling_step(&mut model, &hidden, 0, &[], 0.01).unwrap();
        assert!((loss_pos - std::f64::consts::LN_2).abs() < 1e-9);

        let mut model = model_with(&vocab, 4, ModelKind::Cbow);
        let (loss_both, _) = negative_sampling_step(&mut model, &hidden, 0, &[1], 0.01).unwrap();
        assert!((loss_both - 2.0 * std::f64::consts::LN_2).abs() < 1e-9);
    }

    #[test]
    fn out_of_range_indices_rejected() {
        let vocab = vocab_n(3);
        let mut model = model_with(&vocab, 4, ModelKind::Cbow);
        let hidden = vec![0.0; 4];
        assert!(negative_sampling_step(&mut model, &hidden, 3, &[], 0.01).is_err());
        assert!(negative_sampling_step(&mut model, &hidden, 0, &[9], 0.01).is_err());
    }

    #[test]
    fn step_moves_context_toward_positive() {
        let vocab = vocab_n(2);
        let mut model = model_with(&vocab, 2, ModelKind::Cbow);
        let hidden = vec![1.0, 0.0];
        negative_sampling_step(&mut model, &hidden, 0, &[1], 0.5).unwrap();
        // positive target moves along +h, negative along -h
        assert!(model.context.row(0)[0] > 0.0);
        assert!(model.context.row(1)[0] < 0.0);
    }

    #[test]
    fn one_token_sentence_is_a_no_op() {
        let vocab = vocab_n(3);
        let mut model = model_with(&vocab, 4, ModelKind::Cbow);
        let noise = build_noise_table(&vocab, 0.75, 100).unwrap();
        let before = model.input.clone();
        let mut rng = Rng::seed_from_u64(1);
        let loss = train_sentence_cbow(&mut model, &[1], &noise, 0.05, &mut rng);
        assert_eq!(loss, 0.0);
        assert_eq!(model.input, before);

        let loss = train_sentence_skipgram(&mut model, &[1], &noise, 0.05, &mut rng);
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn two_token_cbow_trains_each_against_the_other() {
        // window 1 makes the other token the whole context; both input rows
        // must move, tracked at dim 2 against a hand-run of the update rule.
        let vocab = vocab_n(2);
        let mut model = model_with(&vocab, 2, ModelKind::Cbow);
        let noise = build_noise_table(&vocab, 0.75, 100).unwrap();
        let before0 = model.input.row(0).to_vec();
        let before1 = model.input.row(1).to_vec();

        // Hand-trace with the same rng stream to predict updates.
        let mut rng = Rng::seed_from_u64(7);
        let mut expected_input = model.input.clone();
        let mut expected_context = model.context.clone();
        {
            let sentence = [0u32, 1u32];
            let lr = 0.1f32;
            for t in 0..2usize {
                let _b = 1 + rng.below(1) as usize; // always 1
                let ctx = 1 - t;
                let hidden: Vec<f32> = expected_input.row(sentence[ctx] as usize).to_vec();
                let target = sentence[t] as usize;
                let mut negatives = Vec::new();
                sample_negatives(&noise, target, 5, &mut rng, &mut negatives);
                let mut grad = vec![0.0; 2];
                ns_step(&mut expected_context, &hidden, target, &negatives, lr, &mut grad);
                let row = expected_input.row_mut(sentence[ctx] as usize);
                for (v, g) in row.iter_mut().zip(&grad) {
                    *v += lr * g;
                }
            }
        }

        let mut rng = Rng::seed_from_u64(7);
        train_sentence_cbow(&mut model, &[0, 1], &noise, 0.1, &mut rng);
        assert_eq!(model.input.data(), expected_input.data());
        assert_eq!(model.context.data(), expected_context.data());
        assert_ne!(model.input.row(0), before0.as_slice());
        assert_ne!(model.input.row(1), before1.as_slice());
    }

    #[test]
    fn skipgram_two_tokens_trains_both_directions() {
        let vocab = vocab_n(2);
        let mut model = model_with(&vocab, 3, ModelKind::SkipGram);
        let noise = build_noise_table(&vocab, 0.75, 100).unwrap();
        let before = model.input.clone();
        let mut rng = Rng::seed_from_u64(3);
        let loss = train_sentence_skipgram(&mut model, &[0, 1], &noise, 0.1, &mut rng);
        assert!(loss > 0.0);
        // Both centers were trained: both input rows moved.
        assert_ne!(model.input.row(0), before.row(0));
        assert_ne!(model.input.row(1), before.row(1));
    }

    #[test]
    fn epoch_loss_trends_down_on_tiny_corpus() {
        let vocab = vocab_n(2);
        let mut model = model_with(&vocab, 8, ModelKind::Cbow);
        let noise = build_noise_table(&vocab, 0.75, 100).unwrap();
        let mut rng = Rng::seed_from_u64(13);
        let sentence = [0u32, 1, 0, 1, 0, 1, 0, 1];
        let mut losses = Vec::new();
        for _ in 0..20 {
            losses.push(train_sentence_cbow(&mut model, &sentence, &noise, 0.1, &mut rng));
        }
        let first: f64 = losses[..5].iter().sum();
        let last: f64 = losses[15..].iter().sum();
        assert!(
            last < first,
            "loss should trend down: first window {first}, last window {last}"
        );
    }

    #[test]
    fn negatives_never_hit_target() {
        let vocab = vocab_n(2);
        let noise = build_noise_table(&vocab, 0.75, 100).unwrap();
        let mut rng = Rng::seed_from_u64(2);
        let mut negatives = Vec::new();
        for target in 0..2 {
            for _ in 0..200 {
                sample_negatives(&noise, target, 5, &mut rng, &mut negatives);
                assert!(negatives.iter().all(|&n| n != target));
            }
        }
    }

    #[test]
    fn sigmoid_clamps_and_centers() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(sigmoid(100.0), sigmoid(6.0));
        assert_eq!(sigmoid(-100.0), sigmoid(-6.0));
        assert!(sigmoid(2.0) > 0.5 && sigmoid(-2.0) < 0.5);
    }
}
