//! End-to-end pipeline tests through the `morphovec` binary: preprocess →
//! bpe-train → train → derive-suffix → evaluate, plus exit-code and
//! determinism contracts.

use std::path::{Path, PathBuf};
use std::process::Output;

use morphovec::eval::cosine;
use morphovec::rng::Rng;
use morphovec::store::VectorStore;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_morphovec")
}

fn run(args: &[&str]) -> Output {
    std::process::Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_code(output: &Output, expected: i32, context: &str) {
    let code = output.status.code().unwrap_or(-1);
    assert_eq!(
        code,
        expected,
        "{context}: exit {code}, stderr:\n{}",
        String::from_utf8_lossy(&output.stderr)
    );
}

/// Tiny synthetic agglutinative corpus: surfaces are lemma + suffix string,
/// annotated with stable suffix ids.
fn write_fixture_corpus(path: &Path) {
    let lemmas = ["ev", "sokak", "yol", "kapı", "araba", "şarkı"];
    let suffixes: [(u32, &str); 3] = [(0, ""), (3, "ler"), (7, "de")];
    let mut rng = Rng::seed_from_u64(0xC0FFEE);
    let mut out = String::new();
    for _ in 0..200 {
        let len = 4 + rng.below(5);
        for _ in 0..len {
            let lemma = lemmas[rng.below(lemmas.len() as u64) as usize];
            let (suffix_id, suffix) = suffixes[rng.below(3) as usize];
            out.push_str(&format!("{lemma}{suffix}\t{lemma}\t{suffix_id}\n"));
        }
        out.push('\n');
    }
    std::fs::write(path, out).unwrap();
}

struct Pipeline {
    dir: tempfile::TempDir,
}

impl Pipeline {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        write_fixture_corpus(&dir.path().join("corpus.tsv"));
        Pipeline { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn arg(&self, name: &str) -> String {
        self.path(name).to_str().unwrap().to_string()
    }
}

#[test]
fn full_pipeline_runs_and_artifacts_line_up() {
    let p = Pipeline::new();
    let corpus = p.arg("corpus.tsv");

    // preprocess each form + lexicon
    let out = run(&[
        "preprocess",
        "--input", &corpus,
        "--format", "annotated",
        "--form", "surface",
        "--output", &p.arg("surface.txt"),
        "--lexicon-out", &p.arg("lexicon.tsv"),
    ]);
    assert_code(&out, 0, "preprocess surface");
    assert!(p.path("surface.txt").exists());
    assert!(p.path("lexicon.tsv").exists());

    for form in ["lemma", "lemma-suffix"] {
        let out = run(&[
            "preprocess",
            "--input", &corpus,
            "--format", "annotated",
            "--form", form,
            "--output", &p.arg(&format!("{form}.txt")),
        ]);
        assert_code(&out, 0, form);
    }

    // the lemma-suffix rendering doubles the surface token count
    let surface_tokens: usize = std::fs::read_to_string(p.path("surface.txt"))
        .unwrap()
        .lines()
        .map(|l| l.split_whitespace().count())
        .sum();
    let ls_tokens: usize = std::fs::read_to_string(p.path("lemma-suffix.txt"))
        .unwrap()
        .lines()
        .map(|l| l.split_whitespace().count())
        .sum();
    assert_eq!(ls_tokens, 2 * surface_tokens);

    // BPE model, then the pieces rendering
    let out = run(&[
        "bpe-train",
        "--input", &corpus,
        "--format", "annotated",
        "--target-size", "40",
        "--output", &p.arg("pieces.bpe"),
    ]);
    assert_code(&out, 0, "bpe-train");
    let out = run(&[
        "preprocess",
        "--input", &corpus,
        "--format", "annotated",
        "--form", "pieces",
        "--bpe-model", &p.arg("pieces.bpe"),
        "--output", &p.arg("pieces.txt"),
    ]);
    assert_code(&out, 0, "preprocess pieces");

    // train each embedding set
    for (input, store, extra) in [
        ("surface.txt", "surface.vec", Vec::new()),
        ("lemma.txt", "lemma.vec", Vec::new()),
        // total sliding span of 9 tokens = 4 context tokens per side
        ("lemma-suffix.txt", "lemma-suffix.vec", vec!["--window", "4"]),
        ("pieces.txt", "pieces.vec", Vec::new()),
    ] {
        let input = p.arg(input);
        let output = p.arg(store);
        let mut args = vec![
            "train",
            "--input", &input,
            "--output", &output,
            "--dim", "16",
            "--epochs", "2",
            "--min-count", "1",
            "--seed", "5",
        ];
        args.extend(extra);
        let out = run(&args);
        assert_code(&out, 0, store);
    }

    // the lemma+suffix store holds both lemmas and `>>` suffix tokens
    let ls_store = VectorStore::load_text(p.path("lemma-suffix.vec")).unwrap();
    assert!(ls_store.lookup("ev").is_some());
    assert!(ls_store.lookup(">>7").is_some());
    assert!(ls_store.lookup(">>0").is_some());

    // hashed-subword model
    let out = run(&[
        "train-subword",
        "--input", &corpus,
        "--format", "annotated",
        "--form", "surface",
        "--output", &p.arg("ft"),
        "--buckets", "2000",
        "--dim", "16",
        "--epochs", "1",
        "--min-count", "1",
    ]);
    assert_code(&out, 0, "train-subword");
    assert!(p.path("ft.meta").exists());
    assert!(p.path("ft.words.vec").exists());
    assert!(p.path("ft.ngrams.vec").exists());

    // derived suffix offsets from the surface store
    let out = run(&[
        "derive-suffix",
        "--annotated", &corpus,
        "--surface-store", &p.arg("surface.vec"),
        "--output", &p.arg("offsets.vec"),
    ]);
    assert_code(&out, 0, "derive-suffix");
    let offsets = VectorStore::load_text(p.path("offsets.vec")).unwrap();
    assert!(offsets.lookup(">>7").is_some());

    // analogy over the surface store: plural analogies evde:ev :: sokakta:sokak etc.
    std::fs::write(
        p.path("analogy.txt"),
        ": plural-like\nevde ev sokakta sokak\nevler ev sokaklar sokak\nyolda yol kapıda kapı\n",
    )
    .unwrap();
    let out = run(&[
        "eval-analogy",
        "--store", &p.arg("surface.vec"),
        "--questions", &p.arg("analogy.txt"),
        "--ns", "1,3,5,10",
        "--metrics", &p.arg("analogy-metrics.tsv"),
    ]);
    assert_code(&out, 0, "eval-analogy");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("Occurrence in the first n prediction"), "{stdout}");
    let metrics = std::fs::read_to_string(p.path("analogy-metrics.tsv")).unwrap();
    assert!(metrics.lines().any(|l| l.starts_with("analogy_top1\t")), "{metrics}");
    assert!(metrics.lines().any(|l| l.starts_with("analogy_oov_rate\t")));

    // scheme-based evaluation: derived suffix composition over raw tokens
    let out = run(&[
        "eval-analogy",
        "--store", &p.arg("surface.vec"),
        "--questions", &p.arg("analogy.txt"),
        "--scheme", "derived-suffix",
        "--lexicon", &p.arg("lexicon.tsv"),
        "--lemma-store", &p.arg("lemma.vec"),
        "--offsets", &p.arg("offsets.vec"),
    ]);
    assert_code(&out, 0, "eval-analogy derived-suffix");

    // fasttext scheme never reports OOV, even for unseen words
    std::fs::write(p.path("analogy-oov.txt"), "evde ev zzzunseen sokak\n").unwrap();
    let out = run(&[
        "eval-analogy",
        "--store", &p.arg("surface.vec"),
        "--questions", &p.arg("analogy-oov.txt"),
        "--scheme", "fasttext",
        "--subword", &p.arg("ft"),
        "--metrics", &p.arg("ft-metrics.tsv"),
    ]);
    assert_code(&out, 0, "eval-analogy fasttext");
    let metrics = std::fs::read_to_string(p.path("ft-metrics.tsv")).unwrap();
    assert!(
        metrics.lines().any(|l| l == "analogy_skipped\t0"),
        "fasttext queries must never skip: {metrics}"
    );

    // odd-one-out groups (odd member listed first in the file)
    std::fs::write(
        p.path("groups.txt"),
        "şarkı evde sokakta yolda\nkapı ev sokak yol\n",
    )
    .unwrap();
    let out = run(&[
        "eval-group",
        "--store", &p.arg("surface.vec"),
        "--questions", &p.arg("groups.txt"),
        "--seed", "3",
    ]);
    assert_code(&out, 0, "eval-group");
    assert!(String::from_utf8_lossy(&out.stdout).contains("group accuracy"));

    // classification docs built from class-exclusive fixture tokens
    let mut train_docs = String::new();
    let mut test_docs = String::new();
    for i in 0..30 {
        let (label, tokens) = if i % 2 == 0 {
            ("housing", "evde evler ev kapıda")
        } else {
            ("travel", "yolda yollar araba sokakta")
        };
        if i < 24 {
            train_docs.push_str(&format!("{label}\t{tokens}\n"));
        } else {
            test_docs.push_str(&format!("{label}\t{tokens}\n"));
        }
    }
    std::fs::write(p.path("train-docs.tsv"), train_docs).unwrap();
    std::fs::write(p.path("test-docs.tsv"), test_docs).unwrap();
    let out = run(&[
        "eval-classify",
        "--store", &p.arg("surface.vec"),
        "--train-docs", &p.arg("train-docs.tsv"),
        "--test-docs", &p.arg("test-docs.tsv"),
    ]);
    assert_code(&out, 0, "eval-classify");
    assert!(String::from_utf8_lossy(&out.stdout).contains("classification accuracy"));

    // info summarizes stores and BPE models
    let out = run(&["info", "--store", &p.arg("surface.vec"), "--bpe", &p.arg("pieces.bpe")]);
    assert_code(&out, 0, "info");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("tokens\t") && stdout.contains("dim\t16"));
    assert!(stdout.contains("merges\t"));
}

#[test]
fn nn_output_matches_brute_force_ranking() {
    let p = Pipeline::new();
    let corpus = p.arg("corpus.tsv");
    let out = run(&[
        "preprocess",
        "--input", &corpus,
        "--format", "annotated",
        "--form", "surface",
        "--output", &p.arg("surface.txt"),
    ]);
    assert_code(&out, 0, "preprocess");
    let out = run(&[
        "train",
        "--input", &p.arg("surface.txt"),
        "--output", &p.arg("surface.vec"),
        "--dim", "12",
        "--epochs", "1",
        "--min-count", "1",
        "--seed", "9",
    ]);
    assert_code(&out, 0, "train");

    let out = run(&["nn", "--store", &p.arg("surface.vec"), "--token", "evde", "--top-n", "4"]);
    assert_code(&out, 0, "nn");
    let stdout = String::from_utf8(out.stdout).unwrap();
    let printed: Vec<(String, String)> = stdout
        .lines()
        .map(|l| {
            let (token, sim) = l.split_once('\t').expect("token<TAB>similarity");
            (token.to_string(), sim.to_string())
        })
        .collect();
    assert_eq!(printed.len(), 4);

    // independent ranking: full sort by cosine, query token excluded
    let store = VectorStore::load_text(p.path("surface.vec")).unwrap();
    let query = store.lookup("evde").unwrap().to_vec();
    let mut scored: Vec<(usize, f32)> = (0..store.len())
        .filter(|&i| store.token(i) != "evde")
        .map(|i| (i, cosine(&query, store.vector(i)).unwrap()))
        .collect();
    scored.sort_by(|(pa, sa), (pb, sb)| sb.total_cmp(sa).then_with(|| pa.cmp(pb)));
    let expected: Vec<(String, String)> = scored
        .into_iter()
        .take(4)
        .map(|(i, s)| (store.token(i).to_string(), format!("{s:.6}")))
        .collect();
    assert_eq!(printed, expected);

    // top-n beyond the vocabulary yields the full ranking, no padding
    let out = run(&["nn", "--store", &p.arg("surface.vec"), "--token", "evde", "--top-n", "100000"]);
    assert_code(&out, 0, "nn full");
    let lines = String::from_utf8(out.stdout).unwrap().lines().count();
    assert_eq!(lines, store.len() - 1);

    // unresolvable token is a data error
    let out = run(&["nn", "--store", &p.arg("surface.vec"), "--token", "nope", "--top-n", "3"]);
    assert_code(&out, 2, "nn unresolvable");
}

#[test]
fn identical_invocations_produce_identical_artifacts() {
    let p = Pipeline::new();
    let corpus = p.arg("corpus.tsv");
    for store in ["a.vec", "b.vec"] {
        let out = run(&[
            "train",
            "--input", &corpus,
            "--format", "annotated",
            "--form", "lemma-suffix",
            "--window", "4",
            "--output", &p.arg(store),
            "--dim", "16",
            "--epochs", "2",
            "--min-count", "1",
            "--seed", "77",
            "--threads", "1",
        ]);
        assert_code(&out, 0, store);
    }
    let a = std::fs::read(p.path("a.vec")).unwrap();
    let b = std::fs::read(p.path("b.vec")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b, "same flags, files, seed and threads=1 must be byte-identical");
}

#[test]
fn config_file_is_overridden_by_flags() {
    let p = Pipeline::new();
    let corpus = p.arg("corpus.tsv");
    std::fs::write(p.path("train.cfg"), "dim = 8\nepochs = 1\nmin_count = 1\n").unwrap();

    let out = run(&[
        "train",
        "--input", &corpus,
        "--format", "annotated",
        "--form", "surface",
        "--config", &p.arg("train.cfg"),
        "--output", &p.arg("from-config.vec"),
    ]);
    assert_code(&out, 0, "train from config");
    let store = VectorStore::load_text(p.path("from-config.vec")).unwrap();
    assert_eq!(store.dim(), 8);

    let out = run(&[
        "train",
        "--input", &corpus,
        "--format", "annotated",
        "--form", "surface",
        "--config", &p.arg("train.cfg"),
        "--dim", "16",
        "--output", &p.arg("flag-wins.vec"),
    ]);
    assert_code(&out, 0, "train flag override");
    let store = VectorStore::load_text(p.path("flag-wins.vec")).unwrap();
    assert_eq!(store.dim(), 16, "command-line flags override the config file");

    // the resolved configuration is logged before work starts
    let out = run(&[
        "train",
        "--input", &corpus,
        "--format", "annotated",
        "--form", "surface",
        "--config", &p.arg("train.cfg"),
        "--dim", "16",
        "--output", &p.arg("logged.vec"),
    ]);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("# resolved configuration"), "{stderr}");
    assert!(stderr.contains("dim = 16"), "{stderr}");
}

#[test]
fn exit_codes_match_error_classes() {
    let p = Pipeline::new();

    // usage: no subcommand
    let out = run(&[]);
    assert_code(&out, 1, "no subcommand");

    // usage: refusing to overwrite without the flag
    std::fs::write(p.path("existing.vec"), "1 1\na 0.5\n").unwrap();
    let out = run(&[
        "train",
        "--input", &p.arg("corpus.tsv"),
        "--format", "annotated",
        "--output", &p.arg("existing.vec"),
        "--min-count", "1",
        "--epochs", "1",
    ]);
    assert_code(&out, 1, "overwrite refusal");

    // data: malformed store content
    std::fs::write(p.path("broken.vec"), "2 2\na 1 2\nb 1\n").unwrap();
    let out = run(&["info", "--store", &p.arg("broken.vec")]);
    assert_code(&out, 2, "malformed store");

    // data: NaN rejected at load
    std::fs::write(p.path("nan.vec"), "1 2\na NaN 1\n").unwrap();
    let out = run(&["info", "--store", &p.arg("nan.vec")]);
    assert_code(&out, 2, "NaN store");

    // runtime: missing input file
    let out = run(&["info", "--store", &p.arg("missing.vec")]);
    assert_code(&out, 3, "missing file");

    // usage: scheme without its stores
    std::fs::write(p.path("qs.txt"), "a b c d\n").unwrap();
    std::fs::write(p.path("tiny.vec"), "1 1\na 0.5\n").unwrap();
    let out = run(&[
        "eval-analogy",
        "--store", &p.arg("tiny.vec"),
        "--questions", &p.arg("qs.txt"),
        "--scheme", "derived-suffix",
    ]);
    assert_code(&out, 1, "scheme missing stores");
}

#[test]
fn inputs_validated_before_outputs_are_touched() {
    let p = Pipeline::new();
    let out = run(&[
        "preprocess",
        "--input", &p.arg("does-not-exist.tsv"),
        "--format", "annotated",
        "--form", "lemma",
        "--output", &p.arg("never-written.txt"),
    ]);
    assert_code(&out, 3, "missing input");
    assert!(
        !p.path("never-written.txt").exists(),
        "no output may be created when an input is missing"
    );

    // scheme stores are validated up front too
    std::fs::write(p.path("tiny.vec"), "1 1\na 0.5\n").unwrap();
    std::fs::write(p.path("qs.txt"), "a b c d\n").unwrap();
    let out = run(&[
        "eval-analogy",
        "--store", &p.arg("tiny.vec"),
        "--questions", &p.arg("qs.txt"),
        "--scheme", "fasttext",
        "--subword", &p.arg("no-such-stem"),
    ]);
    assert_code(&out, 3, "missing subword stem");
}

#[test]
fn config_file_supplies_seed_for_evaluation() {
    let p = Pipeline::new();
    std::fs::write(p.path("tiny.vec"), "3 1\na 1\nb 0.9\nc -1\n").unwrap();
    std::fs::write(p.path("groups.txt"), "c a b a\n").unwrap();
    std::fs::write(p.path("run.cfg"), "seed = 123\n").unwrap();
    let out = run(&[
        "eval-group",
        "--store", &p.arg("tiny.vec"),
        "--questions", &p.arg("groups.txt"),
        "--config", &p.arg("run.cfg"),
    ]);
    assert_code(&out, 0, "eval-group with config seed");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("seed = 123"), "{stderr}");
}

#[test]
fn bad_question_files_are_data_errors() {
    let p = Pipeline::new();
    std::fs::write(p.path("tiny.vec"), "1 1\na 0.5\n").unwrap();

    // analogy line with the wrong word count
    std::fs::write(p.path("bad.txt"), "a b c\n").unwrap();
    let out = run(&[
        "eval-analogy",
        "--store", &p.arg("tiny.vec"),
        "--questions", &p.arg("bad.txt"),
    ]);
    assert_code(&out, 2, "three-word analogy line");

    // group line with too few members
    std::fs::write(p.path("badgroup.txt"), "a b\n").unwrap();
    let out = run(&[
        "eval-group",
        "--store", &p.arg("tiny.vec"),
        "--questions", &p.arg("badgroup.txt"),
    ]);
    assert_code(&out, 2, "two-member group line");

    // ranks must increase
    std::fs::write(p.path("qs.txt"), "a b c d\n").unwrap();
    let out = run(&[
        "eval-analogy",
        "--store", &p.arg("tiny.vec"),
        "--questions", &p.arg("qs.txt"),
        "--ns", "5,3,1",
    ]);
    assert_code(&out, 2, "non-increasing ns");
}

#[test]
fn nn_resolves_queries_through_the_fasttext_scheme() {
    let p = Pipeline::new();
    let out = run(&[
        "train-subword",
        "--input", &p.arg("corpus.tsv"),
        "--format", "annotated",
        "--form", "surface",
        "--output", &p.arg("ft"),
        "--buckets", "512",
        "--dim", "8",
        "--epochs", "1",
        "--min-count", "1",
    ]);
    assert_code(&out, 0, "train-subword");
    let out = run(&[
        "nn",
        "--store", &p.arg("ft.words.vec"),
        "--token", "tamamengörülmemiş",
        "--top-n", "3",
        "--scheme", "fasttext",
        "--subword", &p.arg("ft"),
    ]);
    assert_code(&out, 0, "nn through fasttext composes unseen words");
    let lines = String::from_utf8_lossy(&out.stdout).lines().count();
    assert_eq!(lines, 3);
}

#[test]
fn overwrite_flag_allows_replacement() {
    let p = Pipeline::new();
    std::fs::write(p.path("out.txt"), "old").unwrap();
    let out = run(&[
        "preprocess",
        "--input", &p.arg("corpus.tsv"),
        "--format", "annotated",
        "--form", "lemma",
        "--output", &p.arg("out.txt"),
        "--overwrite",
    ]);
    assert_code(&out, 0, "overwrite allowed");
    let content = std::fs::read_to_string(p.path("out.txt")).unwrap();
    assert!(content.len() > 3, "file was replaced");
}
