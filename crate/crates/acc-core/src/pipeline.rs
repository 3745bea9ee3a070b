//! End-to-end corpus compilation: parse trajectories, extract evidence,
//! compile contexts, optionally attach teacher-verified rationales, and
//! write the dataset artifacts.
//!
//! The pipeline is deterministic: each example's permutation seed is derived
//! from the run seed and the trajectory id, extraction and compilation run
//! in parallel but commit in input order, and teacher calls (when
//! configured) run sequentially in that same order. Without a teacher, the
//! trajectory's own final reasoning serves as the rationale, since
//! trajectories carry verified answers by construction.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;

use rayon::prelude::*;
use serde_json::json;
use thiserror::Error;

use crate::compile::{compile_context, CompileError, CompileOptions, CompiledExample, DistractorPolicy};
use crate::dataset::{
    emit_dataset, length_histogram, DatasetError, DatasetRecord, Manifest,
};
use crate::evidence::{extract_evidence, EvidenceError};
use crate::rng::example_seed;
use crate::tokens::TokenCounter;
use crate::trajectory::{
    parse_trajectories, AgentType, ParseIssue, ParseOptions, Strictness, Trajectory,
    TrajectoryError,
};
use crate::verify::{
    attach_rationale, pass_rate_report, DecodeParams, RetryPolicy, TeacherClient,
    VerificationResult, VerifyError, DEFAULT_ANSWER_MARKER,
};

/// File names written into the output directory.
pub const DATASET_FILE: &str = "dataset.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const HISTOGRAM_FILE: &str = "histogram.csv";

/// Resolved configuration for one compilation run.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// Run seed; each example derives its own seed from this and its id.
    pub seed: u64,
    pub budget: u64,
    pub policy: DistractorPolicy,
    /// Render with another agent family's template instead of each
    /// trajectory's own.
    pub template: Option<AgentType>,
    /// Expected agent type for all input records, if any.
    pub agent_type_hint: Option<AgentType>,
    pub strictness: Strictness,
    /// Derive `visited`/`opened`/`in_patch` flags from the action log.
    pub derive_flags: bool,
    pub histogram_bins: usize,
    /// Candidate rationales requested per example when a teacher runs.
    pub n_candidates: u32,
    pub decode: DecodeParams,
    pub answer_marker: String,
    pub retry: RetryPolicy,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            budget: crate::compile::DEFAULT_BUDGET,
            policy: DistractorPolicy::default(),
            template: None,
            agent_type_hint: None,
            strictness: Strictness::default(),
            derive_flags: false,
            histogram_bins: 32,
            n_candidates: 4,
            decode: DecodeParams::default(),
            answer_marker: DEFAULT_ANSWER_MARKER.to_string(),
            retry: RetryPolicy::default(),
        }
    }
}

impl PipelineConfig {
    /// The manifest's `config` block: everything needed to reproduce a run.
    pub fn to_manifest_config(&self) -> serde_json::Value {
        json!({
            "seed": self.seed,
            "budget": self.budget,
            "distractor_policy": self.policy.to_string(),
            "template": self.template.map(|t| t.to_string()),
            "agent_type": self.agent_type_hint.map(|t| t.to_string()),
            "strict": matches!(self.strictness, Strictness::Strict),
            "derive_flags": self.derive_flags,
            "histogram_bins": self.histogram_bins,
            "n_candidates": self.n_candidates,
            "temperature": self.decode.temperature,
            "max_tokens": self.decode.max_tokens,
            "answer_marker": self.answer_marker,
        })
    }
}

/// A trajectory that parsed but could not be turned into a record.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RecordFailure {
    pub trajectory_id: String,
    /// Pipeline stage that failed: `extract` or `compile`.
    pub stage: &'static str,
    pub message: String,
}

/// Everything a run produced, before any files are written.
#[derive(Debug, Default)]
pub struct PipelineOutcome {
    /// Emitted records, in input order.
    pub records: Vec<DatasetRecord>,
    /// Input lines the lenient parser skipped.
    pub skipped: Vec<ParseIssue>,
    /// Trajectories that failed extraction or compilation (lenient mode).
    pub failures: Vec<RecordFailure>,
    /// Example ids excluded because no candidate rationale verified.
    pub unverified: Vec<String>,
    /// Example ids deferred because the teacher stayed unavailable.
    pub deferred: Vec<String>,
    /// Verification pass rate per agent type, when a teacher ran.
    pub pass_rates: Option<BTreeMap<AgentType, f64>>,
}

impl PipelineOutcome {
    /// True when the run succeeded but left work behind (skipped inputs,
    /// per-example failures, or deferred teacher calls).
    pub fn has_warnings(&self) -> bool {
        !self.skipped.is_empty() || !self.failures.is_empty() || !self.deferred.is_empty()
    }
}

/// Errors that abort a run.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Parse(#[from] TrajectoryError),
    #[error(transparent)]
    Evidence(#[from] EvidenceError),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Stats(#[from] DatasetError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Compiles a trajectory stream into dataset records.
///
/// With a teacher, each compiled example gets up to `n_candidates` candidate
/// rationales and is emitted only if one verifies; examples whose teacher
/// calls keep failing are deferred rather than dropped as wrong. Without a
/// teacher, the trajectory's final reasoning is attached directly.
pub fn compile_corpus(
    input: impl BufRead,
    config: &PipelineConfig,
    counter: &TokenCounter,
    mut teacher: Option<&mut dyn TeacherClient>,
) -> Result<PipelineOutcome, PipelineError> {
    let parse_opts = ParseOptions {
        agent_type_hint: config.agent_type_hint,
        strictness: config.strictness,
        derive_flags: config.derive_flags,
    };
    let parsed = parse_trajectories(input, &parse_opts)?;

    let compiled: Vec<Result<(CompiledExample, String), RecordFailure>> = parsed
        .trajectories
        .par_iter()
        .map(|traj| compile_one(traj, config, counter))
        .collect();

    let mut outcome = PipelineOutcome {
        skipped: parsed.skipped,
        ..PipelineOutcome::default()
    };
    let mut verifications: Vec<(AgentType, VerificationResult)> = Vec::new();
    for result in compiled {
        let (example, own_reasoning) = match result {
            Ok(pair) => pair,
            Err(failure) => match config.strictness {
                Strictness::Strict => {
                    return Err(PipelineError::Parse(TrajectoryError::Schema {
                        line: 0,
                        message: format!(
                            "trajectory {}: {} failed: {}",
                            failure.trajectory_id, failure.stage, failure.message
                        ),
                    }))
                }
                Strictness::Lenient => {
                    outcome.failures.push(failure);
                    continue;
                }
            },
        };
        match teacher {
            Some(ref mut t) => {
                match attach_rationale(
                    &example,
                    &mut **t,
                    config.n_candidates,
                    &config.decode,
                    &config.answer_marker,
                    &config.retry,
                ) {
                    Ok(verification) => {
                        if let Some(rationale) = verification.retained_rationale.clone() {
                            outcome
                                .records
                                .push(DatasetRecord::from_compiled(example.clone(), rationale));
                        } else {
                            outcome.unverified.push(example.example_id.clone());
                        }
                        verifications.push((example.agent_type, verification));
                    }
                    Err(VerifyError::TeacherUnavailable { example_id, .. }) => {
                        outcome.deferred.push(example_id);
                    }
                }
            }
            None => outcome
                .records
                .push(DatasetRecord::from_compiled(example, own_reasoning)),
        }
    }
    if !verifications.is_empty() {
        outcome.pass_rates = Some(pass_rate_report(
            verifications.iter().map(|(t, v)| (*t, v)),
        ));
    }
    Ok(outcome)
}

/// Extraction + compilation for one trajectory; pure and parallel-safe.
fn compile_one(
    traj: &Trajectory,
    config: &PipelineConfig,
    counter: &TokenCounter,
) -> Result<(CompiledExample, String), RecordFailure> {
    let evidence = extract_evidence(traj, counter).map_err(|e| RecordFailure {
        trajectory_id: traj.id.clone(),
        stage: "extract",
        message: e.to_string(),
    })?;
    let opts = CompileOptions {
        seed: example_seed(config.seed, &traj.id),
        budget: config.budget,
        policy: config.policy,
        template: config.template,
    };
    let example = compile_context(
        &evidence,
        &traj.question,
        traj.final_answer(),
        traj.agent_type,
        &opts,
    )
    .map_err(|e| RecordFailure {
        trajectory_id: traj.id.clone(),
        stage: "compile",
        message: e.to_string(),
    })?;
    Ok((example, traj.final_reasoning().to_string()))
}

/// Builds the manifest for a finished run.
pub fn build_manifest(outcome: &PipelineOutcome, config: &PipelineConfig) -> Manifest {
    let mut manifest = Manifest::tally(&outcome.records, config.budget, config.seed);
    manifest.skipped = outcome
        .skipped
        .iter()
        .map(|issue| serde_json::to_value(issue).expect("issue serializes"))
        .collect();
    manifest.failures = outcome
        .failures
        .iter()
        .map(|failure| serde_json::to_value(failure).expect("failure serializes"))
        .collect();
    manifest.deferred = outcome.deferred.clone();
    manifest.unverified = outcome.unverified.clone();
    manifest.pass_rates = outcome.pass_rates.as_ref().map(|rates| {
        rates
            .iter()
            .map(|(agent_type, rate)| (agent_type.to_string(), *rate))
            .collect()
    });
    manifest.config = config.to_manifest_config();
    manifest
}

/// Writes `dataset.jsonl`, `manifest.json`, and `histogram.csv` into
/// `out_dir`, creating it if needed. An empty corpus still writes all three
/// files (the histogram is header-only).
pub fn write_outputs(
    outcome: &PipelineOutcome,
    config: &PipelineConfig,
    out_dir: &Path,
) -> Result<(), PipelineError> {
    fs::create_dir_all(out_dir)?;

    let mut dataset = std::io::BufWriter::new(fs::File::create(out_dir.join(DATASET_FILE))?);
    emit_dataset(&outcome.records, &mut dataset)?;
    dataset.flush()?;

    fs::write(
        out_dir.join(MANIFEST_FILE),
        build_manifest(outcome, config).to_json_pretty(),
    )?;

    let histogram = if outcome.records.is_empty() {
        "agent_type,bin_start,bin_end,count\n".to_string()
    } else {
        length_histogram(&outcome.records, config.histogram_bins)?.to_csv()
    };
    fs::write(out_dir.join(HISTOGRAM_FILE), histogram)?;
    Ok(())
}
