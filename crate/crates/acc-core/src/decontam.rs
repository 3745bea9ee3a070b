//! Corpus-overlap analysis between training questions and benchmark
//! questions.
//!
//! The analysis runs in three stages: extract the bare question text from
//! each record (dropping attached documents, files, and tables), embed the
//! questions as unit vectors, then measure overlap three ways — mean
//! nearest-neighbor cosine similarity, cosine distance between set
//! centroids, and the AUC of a logistic classifier separating the two sets.
//! An AUC near 1 means the sets are distributionally distinct; an AUC near
//! 0.5 means they are indistinguishable.
//!
//! Embeddings normally come from an external encoder via JSONL files. A
//! built-in hashed character-trigram encoder keeps the analysis runnable
//! offline; its absolute similarity values are not comparable to those of a
//! neural encoder, and reports carry an encoder label for that reason.

use std::collections::BTreeMap;
use std::io::BufRead;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compile::SEARCH_INSTRUCTION;
use crate::rng::fnv1a64;
use crate::trajectory::Trajectory;

/// Extracted question text is capped at this many characters.
pub const QUESTION_CHAR_LIMIT: usize = 3_000;

/// Dimension of the built-in hashed-trigram encoder.
pub const FALLBACK_DIM: usize = 256;

/// Which corpus a question belongs to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuestionSource {
    Train,
    Benchmark(String),
}

/// One extracted question, whitespace-normalized and length-capped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub id: String,
    pub source: QuestionSource,
    pub text: String,
}

/// One embedded question; the vector is unit L2 norm by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub id: String,
    pub vector: Vec<f64>,
}

/// Errors from overlap analysis.
#[derive(Debug, Error)]
pub enum DecontamError {
    #[error("record {id}: no user content after stripping evidence blocks")]
    NoUserContent { id: String },
    #[error("embedding {id}: vector norm below 1e-12, cannot normalize")]
    ZeroVector { id: String },
    #[error("embedding dimensions disagree: {expected} vs {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{which} embedding set is empty")]
    EmptySet { which: &'static str },
    #[error("centroid of {which} set has norm below 1e-12")]
    ZeroCentroid { which: &'static str },
    #[error("embeddings line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

// ---------------------------------------------------------------------------
// Question extraction
// ---------------------------------------------------------------------------

/// Strips evidence blocks and boilerplate from prompt-like text, leaving the
/// core question: whitespace-normalized, at most [`QUESTION_CHAR_LIMIT`]
/// characters. Returns `None` when nothing survives.
///
/// The rules target the compiled-record layout: everything from the first
/// `Documents:` or `Context:` section header on is dropped, as are the
/// retrieval instruction line, `[Doc …]`/`[File …]`/`[Table: …]` blocks, and
/// table rows (`| …` lines).
pub fn extract_question_text(raw: &str) -> Option<String> {
    let mut kept = Vec::new();
    for line in raw.lines() {
        let trimmed = line.trim();
        if trimmed == "Documents:" || trimmed == "Context:" {
            break;
        }
        if trimmed == SEARCH_INSTRUCTION
            || trimmed.starts_with("[Doc ")
            || trimmed.starts_with("[File ")
            || trimmed.starts_with("[Table: ")
            || trimmed.starts_with('|')
        {
            continue;
        }
        kept.push(trimmed);
    }
    let joined = kept.join(" ");
    let normalized: String = joined.split_whitespace().collect::<Vec<_>>().join(" ");
    if normalized.is_empty() {
        return None;
    }
    Some(normalized.chars().take(QUESTION_CHAR_LIMIT).collect())
}

/// Extracts a question record from raw text (a compiled prompt, a bare
/// question, or concatenated user turns).
pub fn extract_question(
    id: &str,
    source: QuestionSource,
    raw: &str,
) -> Result<QuestionRecord, DecontamError> {
    let text = extract_question_text(raw).ok_or_else(|| DecontamError::NoUserContent {
        id: id.to_string(),
    })?;
    Ok(QuestionRecord {
        id: id.to_string(),
        source,
        text,
    })
}

/// Extracts the question of a training trajectory.
pub fn extract_question_from_trajectory(
    traj: &Trajectory,
) -> Result<QuestionRecord, DecontamError> {
    extract_question(&traj.id, QuestionSource::Train, &traj.question)
}

// ---------------------------------------------------------------------------
// Embeddings
// ---------------------------------------------------------------------------

impl EmbeddingRecord {
    /// Normalizes `vector` to unit L2 norm. Vectors with norm below 1e-12
    /// are rejected rather than silently zeroed.
    pub fn new(id: impl Into<String>, mut vector: Vec<f64>) -> Result<Self, DecontamError> {
        let id = id.into();
        let norm = l2_norm(&vector);
        if norm < 1e-12 {
            return Err(DecontamError::ZeroVector { id });
        }
        for v in &mut vector {
            *v /= norm;
        }
        Ok(Self { id, vector })
    }
}

fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Deserialize)]
struct EmbeddingLine {
    id: String,
    vec: Vec<f64>,
}

/// Reads embeddings from JSONL lines of `{id, vec}`, normalizing each vector
/// to unit length (external encoders are not trusted to have done so).
pub fn read_embeddings(input: impl BufRead) -> Result<Vec<EmbeddingRecord>, DecontamError> {
    let mut records = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: EmbeddingLine =
            serde_json::from_str(&line).map_err(|e| DecontamError::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?;
        records.push(EmbeddingRecord::new(parsed.id, parsed.vec)?);
    }
    Ok(records)
}

/// Built-in offline encoder: hashed character-trigram counts over the
/// lowercased text, L2-normalized, [`FALLBACK_DIM`] dimensions. Texts
/// shorter than one trigram (after padding with one space on each side)
/// cannot be embedded.
pub fn trigram_embedding(id: &str, text: &str) -> Result<EmbeddingRecord, DecontamError> {
    let padded: Vec<char> = std::iter::once(' ')
        .chain(text.to_lowercase().chars())
        .chain(std::iter::once(' '))
        .collect();
    let mut counts = vec![0.0f64; FALLBACK_DIM];
    for window in padded.windows(3) {
        let gram: String = window.iter().collect();
        let bucket = (fnv1a64(gram.as_bytes()) % FALLBACK_DIM as u64) as usize;
        counts[bucket] += 1.0;
    }
    EmbeddingRecord::new(id, counts)
}

/// Embeds a batch of extracted questions with the built-in encoder.
pub fn embed_questions(
    questions: &[QuestionRecord],
) -> Result<Vec<EmbeddingRecord>, DecontamError> {
    questions
        .iter()
        .map(|q| trigram_embedding(&q.id, &q.text))
        .collect()
}

// ---------------------------------------------------------------------------
// Similarity metrics
// ---------------------------------------------------------------------------

fn check_sets(
    bench: &[EmbeddingRecord],
    train: &[EmbeddingRecord],
) -> Result<(), DecontamError> {
    if train.is_empty() {
        return Err(DecontamError::EmptySet { which: "training" });
    }
    if bench.is_empty() {
        return Err(DecontamError::EmptySet { which: "benchmark" });
    }
    let expected = train[0].vector.len();
    for record in train.iter().chain(bench) {
        if record.vector.len() != expected {
            return Err(DecontamError::DimensionMismatch {
                expected,
                got: record.vector.len(),
            });
        }
    }
    Ok(())
}

/// For each benchmark item, the maximum cosine similarity against all
/// training items; parallelized over benchmark items.
pub fn nn_cosines(
    bench: &[EmbeddingRecord],
    train: &[EmbeddingRecord],
) -> Result<Vec<f64>, DecontamError> {
    check_sets(bench, train)?;
    Ok(bench
        .par_iter()
        .map(|b| {
            train
                .iter()
                .map(|t| dot(&b.vector, &t.vector))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect())
}

/// Mean over benchmark items of the nearest-neighbor cosine similarity.
pub fn avg_nn_cosine(
    bench: &[EmbeddingRecord],
    train: &[EmbeddingRecord],
) -> Result<f64, DecontamError> {
    let sims = nn_cosines(bench, train)?;
    Ok(sims.iter().sum::<f64>() / sims.len() as f64)
}

/// Cosine distance between the renormalized mean vectors of two sets:
/// 0 for identical directions, 2 for antipodal ones.
pub fn centroid_cosine_distance(
    a: &[EmbeddingRecord],
    b: &[EmbeddingRecord],
) -> Result<f64, DecontamError> {
    check_sets(a, b)?;
    let centroid = |set: &[EmbeddingRecord], which: &'static str| {
        let dim = set[0].vector.len();
        let mut mean = vec![0.0f64; dim];
        for record in set {
            for (m, v) in mean.iter_mut().zip(&record.vector) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= set.len() as f64;
        }
        let norm = l2_norm(&mean);
        if norm < 1e-12 {
            return Err(DecontamError::ZeroCentroid { which });
        }
        for m in &mut mean {
            *m /= norm;
        }
        Ok(mean)
    };
    let ca = centroid(a, "first")?;
    let cb = centroid(b, "second")?;
    Ok(1.0 - dot(&ca, &cb))
}

// ---------------------------------------------------------------------------
// Linear-classifier AUC
// ---------------------------------------------------------------------------

/// A logistic classifier over embedding vectors.
#[derive(Debug, Clone)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

const LOGISTIC_LEARNING_RATE: f64 = 0.1;
const LOGISTIC_ITERATIONS: usize = 500;
const LOGISTIC_L2: f64 = 1e-4;

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl LogisticModel {
    /// Classifier score in (0, 1); higher means more benchmark-like.
    pub fn score(&self, vector: &[f64]) -> f64 {
        sigmoid(dot(&self.weights, vector) + self.bias)
    }
}

/// Fits a logistic classifier labeling training items 0 and benchmark items
/// 1: full-batch gradient descent on the mean log-loss, zero-initialized,
/// with L2 regularization on the weights only. Deterministic.
pub fn fit_logistic(
    train: &[EmbeddingRecord],
    bench: &[EmbeddingRecord],
) -> Result<LogisticModel, DecontamError> {
    check_sets(bench, train)?;
    let dim = train[0].vector.len();
    let n = (train.len() + bench.len()) as f64;
    let samples: Vec<(&[f64], f64)> = train
        .iter()
        .map(|r| (r.vector.as_slice(), 0.0))
        .chain(bench.iter().map(|r| (r.vector.as_slice(), 1.0)))
        .collect();

    let mut weights = vec![0.0f64; dim];
    let mut bias = 0.0f64;
    for _ in 0..LOGISTIC_ITERATIONS {
        let mut grad_w = vec![0.0f64; dim];
        let mut grad_b = 0.0f64;
        for (x, y) in &samples {
            let residual = sigmoid(dot(&weights, x) + bias) - y;
            for (g, xi) in grad_w.iter_mut().zip(*x) {
                *g += residual * xi;
            }
            grad_b += residual;
        }
        for (w, g) in weights.iter_mut().zip(&grad_w) {
            *w -= LOGISTIC_LEARNING_RATE * (g / n + LOGISTIC_L2 * *w);
        }
        bias -= LOGISTIC_LEARNING_RATE * grad_b / n;
    }
    Ok(LogisticModel { weights, bias })
}

/// AUC by the rank statistic (Mann–Whitney U): the probability that a
/// positive scores above a negative, with ties counting one half. Equals
/// trapezoidal integration of the ROC curve on the same scores.
pub fn rank_auc(negative_scores: &[f64], positive_scores: &[f64]) -> f64 {
    let mut all: Vec<(f64, bool)> = negative_scores
        .iter()
        .map(|&s| (s, false))
        .chain(positive_scores.iter().map(|&s| (s, true)))
        .collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("scores are comparable"));

    // Average ranks across tied scores, then apply the U statistic.
    let mut positive_rank_sum = 0.0f64;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        let avg_rank = (i + 1 + j) as f64 / 2.0; // mean of ranks i+1 ..= j
        positive_rank_sum += avg_rank * all[i..j].iter().filter(|(_, p)| *p).count() as f64;
        i = j;
    }
    let n_pos = positive_scores.len() as f64;
    let n_neg = negative_scores.len() as f64;
    (positive_rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg)
}

/// Fits the logistic classifier and returns the in-sample AUC separating
/// training (label 0) from benchmark (label 1) embeddings.
pub fn linear_auc(
    train: &[EmbeddingRecord],
    bench: &[EmbeddingRecord],
) -> Result<f64, DecontamError> {
    let model = fit_logistic(train, bench)?;
    let neg: Vec<f64> = train.iter().map(|r| model.score(&r.vector)).collect();
    let pos: Vec<f64> = bench.iter().map(|r| model.score(&r.vector)).collect();
    Ok(rank_auc(&neg, &pos))
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

/// Overlap metrics for one benchmark against the training set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub name: String,
    pub n_questions: usize,
    /// Mean nearest-neighbor cosine similarity to training questions.
    pub nn_similarity: f64,
    /// Cosine distance between the benchmark and training centroids.
    pub center_distance: f64,
    /// Classifier AUC separating this benchmark from the training set.
    pub auc: f64,
}

/// Full overlap report across benchmarks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecontamReport {
    pub train_questions: usize,
    pub benchmarks: Vec<BenchmarkReport>,
    /// AUC separating the training set from all benchmarks pooled.
    pub overall_auc: f64,
    /// Classifier scores are in-sample (no held-out split).
    pub scoring: String,
    /// Which encoder produced the embeddings.
    pub encoder: String,
}

impl DecontamReport {
    /// Pretty-printed JSON with a trailing newline.
    pub fn to_json_pretty(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }
}

/// Computes the per-benchmark and pooled overlap metrics. Benchmarks are
/// reported in the order given; `encoder_label` names the embedding source.
pub fn decontam_report(
    train: &[EmbeddingRecord],
    benchmarks: &BTreeMap<String, Vec<EmbeddingRecord>>,
    encoder_label: &str,
) -> Result<DecontamReport, DecontamError> {
    let mut reports = Vec::with_capacity(benchmarks.len());
    let mut pooled: Vec<EmbeddingRecord> = Vec::new();
    for (name, bench) in benchmarks {
        reports.push(BenchmarkReport {
            name: name.clone(),
            n_questions: bench.len(),
            nn_similarity: avg_nn_cosine(bench, train)?,
            center_distance: centroid_cosine_distance(bench, train)?,
            auc: linear_auc(train, bench)?,
        });
        pooled.extend(bench.iter().cloned());
    }
    let overall_auc = linear_auc(train, &pooled)?;
    Ok(DecontamReport {
        train_questions: train.len(),
        benchmarks: reports,
        overall_auc,
        scoring: "in-sample".to_string(),
        encoder: encoder_label.to_string(),
    })
}
