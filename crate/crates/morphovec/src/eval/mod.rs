//! Intrinsic evaluation: cosine ranking, analogy, odd-one-out.
//!
//! Analogy questions are scored with the additive offset query
//! `v(b) - v(a) + v(c)` ranked by cosine over a candidate store; a question
//! is skipped as out-of-vocabulary when any of its three query words fails
//! to resolve, and accuracies are reported both over evaluated questions
//! and strictly over all questions. Ranking ties break by candidate store
//! order, so results are independent of parallel scheduling.

pub mod classify;

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::compose::Embedder;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::store::VectorStore;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Standard report columns.
pub const DEFAULT_NS: [usize; 6] = [1, 3, 5, 10, 20, 40];

/// Runs a closure over items, on the rayon pool when requested and built
/// with the `parallel` feature. Output order always matches input order.
pub(crate) fn map_items<I, O, F>(items: &[I], parallel: bool, f: F) -> Vec<O>
where
    I: Sync,
    O: Send,
    F: Fn(&I) -> O + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel {
        return items.par_iter().map(&f).collect();
    }
    let _ = parallel;
    items.iter().map(f).collect()
}

fn dot64(u: &[f32], v: &[f32]) -> f64 {
    u.iter().zip(v).map(|(&a, &b)| a as f64 * b as f64).sum()
}

fn norm64(u: &[f32]) -> f64 {
    dot64(u, u).sqrt()
}

/// Cosine similarity in [-1, 1]. Zero-norm vectors are an error.
pub fn cosine(u: &[f32], v: &[f32]) -> Result<f32> {
    if u.len() != v.len() {
        return Err(Error::data(format!(
            "cosine of vectors with different dimensions {} and {}",
            u.len(),
            v.len()
        )));
    }
    let nu = norm64(u);
    let nv = norm64(v);
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::data("cosine of a zero vector is undefined"));
    }
    Ok((dot64(u, v) / (nu * nv)) as f32)
}

/// A ranked candidate. Ordering is similarity-descending with store-order
/// tie-breaks, which makes rankings unique.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ranked {
    pub position: usize,
    pub similarity: f32,
}

impl Eq for Ranked {}

impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .similarity
            .total_cmp(&self.similarity)
            .then_with(|| self.position.cmp(&other.position))
    }
}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Bounded best-k selection under the [`Ranked`] order.
struct TopK {
    k: usize,
    heap: std::collections::BinaryHeap<Ranked>,
}

impl TopK {
    fn new(k: usize) -> Self {
        TopK {
            k,
            heap: std::collections::BinaryHeap::with_capacity(k + 1),
        }
    }

    fn push(&mut self, entry: Ranked) {
        if self.k == 0 {
            return;
        }
        if self.heap.len() < self.k {
            self.heap.push(entry);
        } else if let Some(worst) = self.heap.peek() {
            if entry < *worst {
                self.heap.pop();
                self.heap.push(entry);
            }
        }
    }

    #[cfg(feature = "parallel")]
    fn merge(mut self, other: TopK) -> TopK {
        for entry in other.heap {
            self.push(entry);
        }
        self
    }

    fn into_sorted(self) -> Vec<Ranked> {
        let mut entries: Vec<Ranked> = self.heap.into_vec();
        entries.sort_unstable();
        entries
    }
}

fn candidate_similarity(
    query: &[f32],
    query_norm: f64,
    store: &VectorStore,
    position: usize,
) -> Option<f32> {
    let dim = store.dim();
    let row = &store.raw()[position * dim..(position + 1) * dim];
    let norm = norm64(row);
    if norm == 0.0 {
        return None; // unrankable candidate
    }
    Some((dot64(query, row) / (query_norm * norm)) as f32)
}

/// Top-n store entries by cosine to the query, excluding the listed tokens.
/// The query must have nonzero norm.
pub fn rank_by_similarity(
    query: &[f32],
    store: &VectorStore,
    top_n: usize,
    exclude: &[&str],
    parallel: bool,
) -> Result<Vec<Ranked>> {
    if query.len() != store.dim() {
        return Err(Error::data(format!(
            "query dimension {} does not match store dimension {}",
            query.len(),
            store.dim()
        )));
    }
    let query_norm = norm64(query);
    if query_norm == 0.0 {
        return Err(Error::data("cannot rank against a zero-norm query"));
    }
    let excluded: HashSet<usize> = exclude.iter().filter_map(|t| store.position(t)).collect();

    let select = |range: std::ops::Range<usize>| {
        let mut top = TopK::new(top_n);
        for position in range {
            if excluded.contains(&position) {
                continue;
            }
            if let Some(similarity) = candidate_similarity(query, query_norm, store, position) {
                top.push(Ranked {
                    position,
                    similarity,
                });
            }
        }
        top
    };

    #[cfg(feature = "parallel")]
    if parallel && store.len() >= 1024 {
        const CHUNK: usize = 4096;
        let chunks: Vec<std::ops::Range<usize>> = (0..store.len())
            .step_by(CHUNK)
            .map(|start| start..(start + CHUNK).min(store.len()))
            .collect();
        let top = chunks
            .into_par_iter()
            .map(select)
            .reduce(|| TopK::new(top_n), TopK::merge);
        return Ok(top.into_sorted());
    }

    let _ = parallel;
    Ok(select(0..store.len()).into_sorted())
}

/// A four-word analogy: a is to b as c is to d.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalogyQuestion {
    pub a: String,
    pub b: String,
    pub c: String,
    pub d: String,
}

/// Loads `a b c d` lines; `:`-prefixed section headers and blank lines are
/// skipped.
pub fn load_analogy_questions(path: impl AsRef<Path>) -> Result<Vec<AnalogyQuestion>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut questions = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with(':') {
            continue;
        }
        let words: Vec<&str> = trimmed.split_whitespace().collect();
        let [a, b, c, d] = words.as_slice() else {
            return Err(Error::parse(
                path,
                idx + 1,
                format!("expected four words, found {}", words.len()),
            ));
        };
        questions.push(AnalogyQuestion {
            a: a.to_string(),
            b: b.to_string(),
            c: c.to_string(),
            d: d.to_string(),
        });
    }
    Ok(questions)
}

/// Ranked predictions for the offset query `v(b) - v(a) + v(c)`, or `None`
/// when the question must be skipped (an unresolvable query word, or a
/// degenerate zero query vector).
#[allow(clippy::too_many_arguments)]
pub fn analogy_predict(
    a: &str,
    b: &str,
    c: &str,
    embedder: &dyn Embedder,
    candidates: &VectorStore,
    top_n: usize,
    exclude_inputs: bool,
    parallel: bool,
) -> Result<Option<Vec<(String, f32)>>> {
    let (Some(va), Some(vb), Some(vc)) = (embedder.embed(a), embedder.embed(b), embedder.embed(c))
    else {
        return Ok(None);
    };
    let query: Vec<f32> = vb
        .iter()
        .zip(&va)
        .zip(&vc)
        .map(|((&b, &a), &c)| b - a + c)
        .collect();
    if norm64(&query) == 0.0 {
        return Ok(None);
    }
    let exclude: Vec<&str> = if exclude_inputs { vec![a, b, c] } else { Vec::new() };
    let ranked = rank_by_similarity(&query, candidates, top_n, &exclude, parallel)?;
    Ok(Some(
        ranked
            .into_iter()
            .map(|r| (candidates.token(r.position).to_string(), r.similarity))
            .collect(),
    ))
}

/// Both default off: query words stay among the candidates, questions run
/// sequentially.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AnalogyOptions {
    pub exclude_inputs: bool,
    pub parallel: bool,
}

/// Occurrence-in-first-n accuracies for one question set.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalogyReport {
    pub ns: Vec<usize>,
    /// Questions whose target appeared within the first n predictions.
    pub hits: Vec<u64>,
    pub evaluated: u64,
    pub skipped: u64,
}

impl AnalogyReport {
    pub fn total(&self) -> u64 {
        self.evaluated + self.skipped
    }

    /// Accuracy over evaluated questions (skipped ones leave the
    /// denominator).
    pub fn accuracy_at(&self, i: usize) -> f64 {
        if self.evaluated == 0 {
            0.0
        } else {
            self.hits[i] as f64 / self.evaluated as f64
        }
    }

    /// Accuracy with skipped questions counted as wrong.
    pub fn strict_accuracy_at(&self, i: usize) -> f64 {
        if self.total() == 0 {
            0.0
        } else {
            self.hits[i] as f64 / self.total() as f64
        }
    }

    pub fn oov_rate(&self) -> f64 {
        if self.total() == 0 {
            0.0
        } else {
            self.skipped as f64 / self.total() as f64
        }
    }
}

/// Evaluates a question set at every n in `ns`.
pub fn analogy_accuracy(
    questions: &[AnalogyQuestion],
    embedder: &dyn Embedder,
    candidates: &VectorStore,
    ns: &[usize],
    options: AnalogyOptions,
) -> Result<AnalogyReport> {
    if questions.is_empty() {
        return Err(Error::data("empty analogy question set"));
    }
    if ns.is_empty() || ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::data("ranks must be strictly increasing"));
    }
    let top_n = *ns.last().unwrap();

    // None = skipped; Some(rank) = 0-based position of d, if present.
    let outcomes: Vec<Result<Option<Option<usize>>>> = map_items(questions, options.parallel, |q| {
        let predictions = analogy_predict(
            &q.a,
            &q.b,
            &q.c,
            embedder,
            candidates,
            top_n,
            options.exclude_inputs,
            false, // parallelism lives at the question level here
        )?;
        Ok(predictions.map(|preds| preds.iter().position(|(token, _)| *token == q.d)))
    });

    let mut report = AnalogyReport {
        ns: ns.to_vec(),
        hits: vec![0; ns.len()],
        evaluated: 0,
        skipped: 0,
    };
    for outcome in outcomes {
        match outcome? {
            None => report.skipped += 1,
            Some(rank_of_d) => {
                report.evaluated += 1;
                if let Some(rank) = rank_of_d {
                    for (slot, &n) in report.hits.iter_mut().zip(ns) {
                        if rank < n {
                            *slot += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(report)
}

/// An odd-one-out question with the intruder's position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupQuestion {
    pub members: Vec<String>,
    pub odd_index: usize,
}

/// Loads group questions: members space-separated with the odd one first in
/// the file; member order is shuffled here with the run seed.
pub fn load_group_questions(path: impl AsRef<Path>, seed: u64) -> Result<Vec<GroupQuestion>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rng = Rng::seed_from_u64(seed);
    let mut questions = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let members: Vec<String> = line.split_whitespace().map(str::to_string).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < 3 {
            return Err(Error::parse(
                path,
                idx + 1,
                format!("group questions need at least 3 members, found {}", members.len()),
            ));
        }
        let mut order: Vec<usize> = (0..members.len()).collect();
        rng.shuffle(&mut order);
        let odd_index = order.iter().position(|&o| o == 0).unwrap();
        let members = order.into_iter().map(|o| members[o].clone()).collect();
        questions.push(GroupQuestion { members, odd_index });
    }
    Ok(questions)
}

/// Predicts the member least similar to the group's mean vector; `None`
/// skips the question when fewer than three members resolve (or the mean
/// degenerates to zero). Ties return the earliest member.
pub fn odd_one_out(members: &[String], embedder: &dyn Embedder) -> Option<usize> {
    let resolved: Vec<(usize, Vec<f32>)> = members
        .iter()
        .enumerate()
        .filter_map(|(i, m)| {
            embedder
                .embed(m)
                .filter(|v| norm64(v) > 0.0)
                .map(|v| (i, v))
        })
        .collect();
    if resolved.len() < 3 {
        return None;
    }
    let dim = resolved[0].1.len();
    let mut mean = vec![0.0f32; dim];
    for (_, v) in &resolved {
        for (m, &x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    let scale = 1.0 / resolved.len() as f32;
    for m in mean.iter_mut() {
        *m *= scale;
    }
    if norm64(&mean) == 0.0 {
        return None;
    }

    let mut best: Option<(usize, f32)> = None;
    for (index, vector) in &resolved {
        let similarity = cosine(vector, &mean).expect("nonzero norms checked above");
        let replace = match best {
            None => true,
            Some((_, held)) => similarity < held,
        };
        if replace {
            best = Some((*index, similarity));
        }
    }
    best.map(|(index, _)| index)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupReport {
    pub correct: u64,
    pub evaluated: u64,
    pub skipped: u64,
}

impl GroupReport {
    pub fn total(&self) -> u64 {
        self.evaluated + self.skipped
    }

    pub fn accuracy(&self) -> f64 {
        if self.evaluated == 0 {
            0.0
        } else {
            self.correct as f64 / self.evaluated as f64
        }
    }

    pub fn strict_accuracy(&self) -> f64 {
        if self.total() == 0 {
            0.0
        } else {
            self.correct as f64 / self.total() as f64
        }
    }

    pub fn oov_rate(&self) -> f64 {
        if self.total() == 0 {
            0.0
        } else {
            self.skipped as f64 / self.total() as f64
        }
    }
}

pub fn group_accuracy(
    questions: &[GroupQuestion],
    embedder: &dyn Embedder,
    parallel: bool,
) -> Result<GroupReport> {
    if questions.is_empty() {
        return Err(Error::data("empty group question set"));
    }
    let outcomes = map_items(questions, parallel, |q| {
        odd_one_out(&q.members, embedder).map(|predicted| predicted == q.odd_index)
    });
    let mut report = GroupReport {
        correct: 0,
        evaluated: 0,
        skipped: 0,
    };
    for outcome in outcomes {
        match outcome {
            None => report.skipped += 1,
            Some(correct) => {
                report.evaluated += 1;
                report.correct += u64::from(correct);
            }
        }
    }
    Ok(report)
}

/// Umbrella result for the CLI: whichever sections a run produced.
#[derive(Debug, Clone, Default)]
pub struct EvalReport {
    pub label: String,
    pub analogy: Option<AnalogyReport>,
    pub group: Option<GroupReport>,
    pub classification_accuracy: Option<f64>,
}

impl EvalReport {
    /// Fixed-layout table: one row per section, occurrence-in-first-n
    /// columns for analogy rows.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        if let Some(analogy) = &self.analogy {
            out.push_str("Occurrence in the first n prediction\n");
            out.push_str("model");
            for n in &analogy.ns {
                out.push_str(&format!("\t{n}"));
            }
            out.push('\n');
            out.push_str(&self.label);
            for i in 0..analogy.ns.len() {
                out.push_str(&format!("\t{:.4}", analogy.accuracy_at(i)));
            }
            out.push('\n');
            out.push_str(&format!("{} (strict)", self.label));
            for i in 0..analogy.ns.len() {
                out.push_str(&format!("\t{:.4}", analogy.strict_accuracy_at(i)));
            }
            out.push('\n');
            out.push_str(&format!(
                "questions\t{}\tevaluated\t{}\tskipped\t{}\n",
                analogy.total(),
                analogy.evaluated,
                analogy.skipped
            ));
        }
        if let Some(group) = &self.group {
            out.push_str(&format!(
                "group accuracy\t{:.4}\ngroup accuracy (strict)\t{:.4}\nquestions\t{}\tevaluated\t{}\tskipped\t{}\n",
                group.accuracy(),
                group.strict_accuracy(),
                group.total(),
                group.evaluated,
                group.skipped
            ));
        }
        if let Some(accuracy) = self.classification_accuracy {
            out.push_str(&format!("classification accuracy\t{accuracy:.4}\n"));
        }
        out
    }

    /// Flat machine-readable metrics.
    pub fn metrics(&self) -> Vec<(String, f64)> {
        let mut metrics = Vec::new();
        if let Some(analogy) = &self.analogy {
            for (i, n) in analogy.ns.iter().enumerate() {
                metrics.push((format!("analogy_top{n}"), analogy.accuracy_at(i)));
            }
            for (i, n) in analogy.ns.iter().enumerate() {
                metrics.push((format!("analogy_top{n}_strict"), analogy.strict_accuracy_at(i)));
            }
            metrics.push(("analogy_oov_rate".into(), analogy.oov_rate()));
            metrics.push(("analogy_evaluated".into(), analogy.evaluated as f64));
            metrics.push(("analogy_skipped".into(), analogy.skipped as f64));
        }
        if let Some(group) = &self.group {
            metrics.push(("group_accuracy".into(), group.accuracy()));
            metrics.push(("group_accuracy_strict".into(), group.strict_accuracy()));
            metrics.push(("group_oov_rate".into(), group.oov_rate()));
        }
        if let Some(accuracy) = self.classification_accuracy {
            metrics.push(("classification_accuracy".into(), accuracy));
        }
        metrics
    }

    pub fn write_metrics(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for (metric, value) in self.metrics() {
            writeln!(out, "{metric}\t{value}").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}
