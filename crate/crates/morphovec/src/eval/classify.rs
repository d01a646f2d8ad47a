//! Document classification over averaged word vectors.
//!
//! Each document becomes the mean of its composed word vectors (misses
//! contribute the designated out-of-vocabulary vector); a multinomial
//! logistic regression is then fit by full-batch gradient descent from a
//! zero initialization, so results are deterministic.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::map_items;
use crate::compose::{oov_vector, Embedder, DEFAULT_OOV_FILL};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledDoc {
    pub label: String,
    pub tokens: Vec<String>,
}

/// Loads `label<TAB>token token ...` lines.
pub fn load_labeled_docs(path: impl AsRef<Path>) -> Result<Vec<LabeledDoc>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let Some((label, text)) = line.split_once('\t') else {
            return Err(Error::parse(
                path,
                idx + 1,
                "expected `label<TAB>token token ...`",
            ));
        };
        if label.is_empty() {
            return Err(Error::parse(path, idx + 1, "empty label"));
        }
        docs.push(LabeledDoc {
            label: label.to_string(),
            tokens: text.split_whitespace().map(str::to_string).collect(),
        });
    }
    Ok(docs)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyOptions {
    pub epochs: usize,
    pub lr: f64,
    pub oov_fill: f32,
    pub parallel: bool,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            epochs: 200,
            lr: 0.1,
            oov_fill: DEFAULT_OOV_FILL,
            parallel: false,
        }
    }
}

/// Mean of composed token vectors; OOV tokens contribute the designated
/// vector, and an empty document is all zeros.
pub fn document_vector(tokens: &[String], embedder: &dyn Embedder, oov_fill: f32) -> Vec<f64> {
    let dim = embedder.dim();
    let mut sum = vec![0.0f64; dim];
    if tokens.is_empty() {
        return sum;
    }
    let oov = oov_vector(dim, oov_fill);
    for token in tokens {
        let vector = embedder.embed(token);
        let values = vector.as_deref().unwrap_or(&oov);
        for (s, &v) in sum.iter_mut().zip(values) {
            *s += v as f64;
        }
    }
    let scale = 1.0 / tokens.len() as f64;
    for s in sum.iter_mut() {
        *s *= scale;
    }
    sum
}

struct SoftmaxRegression {
    classes: usize,
    dim: usize,
    weights: Vec<f64>, // classes x dim
    bias: Vec<f64>,
}

impl SoftmaxRegression {
    fn zeros(classes: usize, dim: usize) -> Self {
        SoftmaxRegression {
            classes,
            dim,
            weights: vec![0.0; classes * dim],
            bias: vec![0.0; classes],
        }
    }

    fn scores(&self, x: &[f64], out: &mut [f64]) {
        for (k, slot) in out.iter_mut().enumerate() {
            let row = &self.weights[k * self.dim..(k + 1) * self.dim];
            *slot = self.bias[k] + row.iter().zip(x).map(|(&w, &v)| w * v).sum::<f64>();
        }
    }

    fn softmax_in_place(scores: &mut [f64]) {
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut denom = 0.0;
        for s in scores.iter_mut() {
            *s = (*s - max).exp();
            denom += *s;
        }
        for s in scores.iter_mut() {
            *s /= denom;
        }
    }

    fn fit(&mut self, xs: &[Vec<f64>], ys: &[usize], epochs: usize, lr: f64) {
        let n = xs.len() as f64;
        let mut probs = vec![0.0f64; self.classes];
        let mut grad_w = vec![0.0f64; self.classes * self.dim];
        let mut grad_b = vec![0.0f64; self.classes];
        for _ in 0..epochs {
            grad_w.fill(0.0);
            grad_b.fill(0.0);
            for (x, &y) in xs.iter().zip(ys) {
                self.scores(x, &mut probs);
                Self::softmax_in_place(&mut probs);
                probs[y] -= 1.0;
                for (k, &p) in probs.iter().enumerate() {
                    let row = &mut grad_w[k * self.dim..(k + 1) * self.dim];
                    for (g, &v) in row.iter_mut().zip(x) {
                        *g += p * v;
                    }
                    grad_b[k] += p;
                }
            }
            for (w, &g) in self.weights.iter_mut().zip(&grad_w) {
                *w -= lr * g / n;
            }
            for (b, &g) in self.bias.iter_mut().zip(&grad_b) {
                *b -= lr * g / n;
            }
        }
    }

    /// Argmax class, lowest index on ties.
    fn predict(&self, x: &[f64]) -> usize {
        let mut scores = vec![0.0f64; self.classes];
        self.scores(x, &mut scores);
        let mut best = 0usize;
        for (k, &s) in scores.iter().enumerate().skip(1) {
            if s > scores[best] {
                best = k;
            }
        }
        best
    }
}

/// Trains the classifier on `train` and returns accuracy on `test`. Labels
/// unseen in training can never be predicted and count as wrong.
pub fn classify_docs(
    train: &[LabeledDoc],
    test: &[LabeledDoc],
    embedder: &dyn Embedder,
    options: ClassifyOptions,
) -> Result<f64> {
    if train.is_empty() || test.is_empty() {
        return Err(Error::data("both train and test splits must be non-empty"));
    }
    let mut labels: Vec<&str> = train.iter().map(|d| d.label.as_str()).collect();
    labels.sort_unstable();
    labels.dedup();
    if labels.len() < 2 {
        return Err(Error::data(
            "classification needs at least two distinct training labels",
        ));
    }
    let label_index = |label: &str| labels.binary_search(&label).ok();

    let train_xs: Vec<Vec<f64>> = map_items(train, options.parallel, |d| {
        document_vector(&d.tokens, embedder, options.oov_fill)
    });
    let train_ys: Vec<usize> = train
        .iter()
        .map(|d| label_index(&d.label).expect("training labels index themselves"))
        .collect();

    let mut model = SoftmaxRegression::zeros(labels.len(), embedder.dim());
    model.fit(&train_xs, &train_ys, options.epochs, options.lr);

    let test_xs: Vec<Vec<f64>> = map_items(test, options.parallel, |d| {
        document_vector(&d.tokens, embedder, options.oov_fill)
    });
    let correct = test_xs
        .iter()
        .zip(test)
        .filter(|(x, doc)| label_index(&doc.label) == Some(model.predict(x)))
        .count();
    Ok(correct as f64 / test.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use crate::store::VectorStore;

    fn doc(label: &str, tokens: &[&str]) -> LabeledDoc {
        LabeledDoc {
            label: label.to_string(),
            tokens: tokens.iter().map(|t| t.to_string()).collect(),
        }
    }

    fn polar_store() -> VectorStore {
        let mut store = VectorStore::new(2);
        store.push("up", &[0.0, 1.0]).unwrap();
        store.push("down", &[0.0, -1.0]).unwrap();
        store.push("left", &[-1.0, 0.0]).unwrap();
        store.push("right", &[1.0, 0.0]).unwrap();
        store
    }

    #[test]
    fn separable_two_class_problem_reaches_full_accuracy() {
        // +y-leaning docs vs +x-leaning docs: linearly separable.
        let store = polar_store();
        let train: Vec<LabeledDoc> = (0..10)
            .flat_map(|_| {
                [
                    doc("vertical", &["up", "up", "down"]),
                    doc("horizontal", &["right", "left", "right"]),
                ]
            })
            .collect();
        let test = vec![
            doc("vertical", &["up"]),
            doc("vertical", &["down", "up", "up"]),
            doc("horizontal", &["right", "right"]),
            doc("horizontal", &["left", "right", "right"]),
        ];
        let accuracy = classify_docs(&train, &test, &store, ClassifyOptions::default()).unwrap();
        assert_eq!(accuracy, 1.0);
    }

    #[test]
    fn shuffled_labels_score_at_chance() {
        // Random doc vectors with random labels over 3 balanced classes;
        // 500 test docs should land near 1/3.
        let mut rng = Rng::seed_from_u64(41);
        let dim = 8;
        let mut store = VectorStore::new(dim);
        for i in 0..60 {
            let v: Vec<f32> = (0..dim).map(|_| rng.next_f32() * 2.0 - 1.0).collect();
            store.push(&format!("t{i}"), &v).unwrap();
        }
        let labels = ["l0", "l1", "l2"];
        let mut make_doc = |i: u64| {
            let tokens: Vec<String> = (0..6)
                .map(|_| format!("t{}", rng.next_u64() % 60))
                .collect();
            LabeledDoc {
                label: labels[(i % 3) as usize].to_string(),
                tokens,
            }
        };
        let train: Vec<LabeledDoc> = (0..300).map(&mut make_doc).collect();
        let test: Vec<LabeledDoc> = (0..500).map(&mut make_doc).collect();
        let accuracy = classify_docs(&train, &test, &store, ClassifyOptions::default()).unwrap();
        assert!(
            (accuracy - 1.0 / 3.0).abs() <= 0.1,
            "chance-level accuracy expected, got {accuracy}"
        );
    }

    #[test]
    fn single_label_training_rejected() {
        let store = polar_store();
        let train = vec![doc("only", &["up"]), doc("only", &["down"])];
        let test = vec![doc("only", &["up"])];
        assert!(classify_docs(&train, &test, &store, ClassifyOptions::default()).is_err());
    }

    #[test]
    fn oov_tokens_use_the_designated_vector() {
        let store = polar_store();
        let v = document_vector(
            &["up".to_string(), "missing".to_string()],
            &store,
            0.0,
        );
        assert_eq!(v, [0.0, 0.5]);

        let v = document_vector(&["missing".to_string()], &store, 0.25);
        assert_eq!(v, [0.25, 0.25]);

        let empty: Vec<String> = Vec::new();
        assert_eq!(document_vector(&empty, &store, 0.0), [0.0, 0.0]);
    }

    #[test]
    fn doc_file_parsing_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("docs.tsv");
        std::fs::write(&path, "sports\ttop goal match\n\neconomy\tmarket rates\n").unwrap();
        let docs = load_labeled_docs(&path).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].label, "sports");
        assert_eq!(docs[0].tokens.len(), 3);

        std::fs::write(&path, "no-tab-here\n").unwrap();
        assert!(load_labeled_docs(&path).is_err());
    }
}
