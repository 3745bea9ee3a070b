//! Answer verification and teacher-generated rationales.
//!
//! A compiled example keeps only rationales whose final answer matches the
//! trajectory's verified answer. The teacher is any endpoint implementing
//! [`TeacherClient`]; candidates are requested one at a time and the first
//! one that verifies is retained. Matching is agent-type-aware: normalized
//! exact match for search, numeric-tolerant token match for SQL, and
//! change-set equality for patches.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::Serialize;
use thiserror::Error;

use crate::compile::{render_prompt, CompiledExample};
use crate::patch::patches_equivalent;
use crate::trajectory::AgentType;

/// Marker the answer extractor looks for in teacher output.
pub const DEFAULT_ANSWER_MARKER: &str = "Answer:";

/// Normalizes a short answer: lowercase, collapsed whitespace, no terminal
/// punctuation, no leading article.
pub fn normalize_short_answer(text: &str) -> String {
    let lowered = text.to_lowercase();
    let collapsed = lowered.split_whitespace().collect::<Vec<_>>().join(" ");
    let stripped = collapsed
        .trim_end_matches(['.', ',', '!', '?', ';', ':'])
        .trim();
    for article in ["a ", "an ", "the "] {
        if let Some(rest) = stripped.strip_prefix(article) {
            return rest.to_string();
        }
    }
    stripped.to_string()
}

/// Compares two numeric tokens at relative tolerance 1e-6.
fn numeric_tokens_match(a: f64, b: f64) -> bool {
    let scale = a.abs().max(b.abs());
    (a - b).abs() <= 1e-6 * scale
}

fn sql_answers_match(candidate: &str, gold: &str) -> bool {
    let c = normalize_short_answer(candidate);
    let g = normalize_short_answer(gold);
    let c_tokens: Vec<&str> = c.split(' ').collect();
    let g_tokens: Vec<&str> = g.split(' ').collect();
    if c_tokens.len() != g_tokens.len() {
        return false;
    }
    c_tokens.iter().zip(&g_tokens).all(|(ct, gt)| {
        match (ct.parse::<f64>(), gt.parse::<f64>()) {
            (Ok(cn), Ok(gn)) => numeric_tokens_match(cn, gn),
            _ => ct == gt,
        }
    })
}

/// Checks whether a candidate answer matches the verified answer under the
/// agent type's comparison rule.
pub fn verify_answer(candidate: &str, gold: &str, agent_type: AgentType) -> bool {
    match agent_type {
        AgentType::Search => normalize_short_answer(candidate) == normalize_short_answer(gold),
        AgentType::Sql => sql_answers_match(candidate, gold),
        AgentType::Swe => patches_equivalent(candidate, gold),
    }
}

/// Pulls the final answer out of teacher output: the text after the last
/// occurrence of `marker`, or the last non-empty line when the marker is
/// absent. The result is trimmed.
pub fn extract_final_answer(text: &str, marker: &str) -> String {
    if let Some(pos) = text.rfind(marker) {
        return text[pos + marker.len()..].trim().to_string();
    }
    text.lines()
        .rev()
        .map(str::trim)
        .find(|line| !line.is_empty())
        .unwrap_or("")
        .to_string()
}

/// Decoding parameters forwarded to the teacher.
#[derive(Debug, Clone, Serialize)]
pub struct DecodeParams {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for DecodeParams {
    fn default() -> Self {
        Self {
            temperature: 0.8,
            max_tokens: 4096,
        }
    }
}

/// One candidate-generation request.
#[derive(Debug, Clone, Serialize)]
pub struct TeacherRequest {
    pub example_id: String,
    /// Rendered prompt without the answer.
    pub prompt: String,
    pub n_candidates: u32,
    pub decode_params: DecodeParams,
}

/// Teacher-side failures.
#[derive(Debug, Error)]
pub enum TeacherError {
    #[error("teacher unavailable: {0}")]
    Unavailable(String),
}

/// A source of candidate rationales. Implementations may be stateful (a
/// scripted stub advances through its candidate list).
pub trait TeacherClient {
    /// Generates one candidate for the request.
    fn generate(&mut self, request: &TeacherRequest) -> Result<String, TeacherError>;
}

/// Outcome of verifying one example.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationResult {
    pub example_id: String,
    pub candidates_tried: u32,
    /// The full text of the first verifying candidate.
    pub retained_rationale: Option<String>,
    pub passed: bool,
}

/// Retry schedule for teacher calls: up to `attempts` tries per candidate
/// with exponential backoff starting at `base_delay`.
#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            base_delay: Duration::from_millis(250),
        }
    }
}

impl RetryPolicy {
    /// Single attempt, no delay; for tests and scripted teachers.
    pub fn none() -> Self {
        Self {
            attempts: 1,
            base_delay: Duration::ZERO,
        }
    }
}

/// Errors that defer an example rather than failing it.
#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("example {example_id}: teacher unavailable after {attempts} attempts: {message}")]
    TeacherUnavailable {
        example_id: String,
        attempts: u32,
        message: String,
    },
}

/// Requests up to `n` candidates for the example and returns the first one
/// whose extracted answer verifies. `passed = false` with all candidates
/// tried means the example should be excluded from the emitted dataset.
pub fn attach_rationale(
    example: &CompiledExample,
    teacher: &mut dyn TeacherClient,
    n: u32,
    decode_params: &DecodeParams,
    marker: &str,
    retry: &RetryPolicy,
) -> Result<VerificationResult, VerifyError> {
    debug_assert!(example.rationale.is_none(), "example already has a rationale");
    let request = TeacherRequest {
        example_id: example.example_id.clone(),
        prompt: render_prompt(example),
        n_candidates: n,
        decode_params: decode_params.clone(),
    };
    for candidate_idx in 1..=n {
        let text = generate_with_retry(teacher, &request, retry)?;
        let answer = extract_final_answer(&text, marker);
        if verify_answer(&answer, &example.answer, example.agent_type) {
            return Ok(VerificationResult {
                example_id: example.example_id.clone(),
                candidates_tried: candidate_idx,
                retained_rationale: Some(text),
                passed: true,
            });
        }
    }
    Ok(VerificationResult {
        example_id: example.example_id.clone(),
        candidates_tried: n,
        retained_rationale: None,
        passed: false,
    })
}

fn generate_with_retry(
    teacher: &mut dyn TeacherClient,
    request: &TeacherRequest,
    retry: &RetryPolicy,
) -> Result<String, VerifyError> {
    let attempts = retry.attempts.max(1);
    let mut delay = retry.base_delay;
    let mut last_error = String::new();
    for attempt in 1..=attempts {
        match teacher.generate(request) {
            Ok(text) => return Ok(text),
            Err(TeacherError::Unavailable(message)) => {
                last_error = message;
                if attempt < attempts && !delay.is_zero() {
                    std::thread::sleep(delay);
                    delay *= 2;
                }
            }
        }
    }
    Err(VerifyError::TeacherUnavailable {
        example_id: request.example_id.clone(),
        attempts,
        message: last_error,
    })
}

/// A teacher that replays candidates from a script, keyed by example id.
/// Generation fails once an example's candidates are exhausted.
#[derive(Debug, Default)]
pub struct ScriptedTeacher {
    responses: BTreeMap<String, std::collections::VecDeque<String>>,
}

#[derive(Debug, serde::Deserialize)]
struct ScriptRecord {
    example_id: String,
    candidates: Vec<String>,
}

impl ScriptedTeacher {
    /// Loads a script from JSONL rows `{"example_id", "candidates": [...]}`.
    /// Repeated rows for one id append.
    pub fn from_reader(input: impl std::io::BufRead) -> Result<Self, TeacherError> {
        let mut teacher = Self::default();
        for (idx, line) in input.lines().enumerate() {
            let line =
                line.map_err(|e| TeacherError::Unavailable(format!("script read: {e}")))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: ScriptRecord = serde_json::from_str(&line).map_err(|e| {
                TeacherError::Unavailable(format!("script line {}: {e}", idx + 1))
            })?;
            teacher.add(record.example_id, record.candidates);
        }
        Ok(teacher)
    }

    /// Appends candidates for an example.
    pub fn add(&mut self, example_id: impl Into<String>, candidates: Vec<String>) {
        self.responses
            .entry(example_id.into())
            .or_default()
            .extend(candidates);
    }
}

impl TeacherClient for ScriptedTeacher {
    fn generate(&mut self, request: &TeacherRequest) -> Result<String, TeacherError> {
        self.responses
            .get_mut(&request.example_id)
            .and_then(|queue| queue.pop_front())
            .ok_or_else(|| {
                TeacherError::Unavailable(format!(
                    "script exhausted for example {}",
                    request.example_id
                ))
            })
    }
}

/// Pass rate per agent type. Agent types with no results are absent.
pub fn pass_rate_report<'a>(
    results: impl IntoIterator<Item = (AgentType, &'a VerificationResult)>,
) -> BTreeMap<AgentType, f64> {
    let mut totals: BTreeMap<AgentType, (u64, u64)> = BTreeMap::new();
    for (agent_type, result) in results {
        let entry = totals.entry(agent_type).or_insert((0, 0));
        entry.1 += 1;
        if result.passed {
            entry.0 += 1;
        }
    }
    totals
        .into_iter()
        .map(|(agent_type, (passed, total))| (agent_type, passed as f64 / total as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compile::{compile_context, CompileOptions};
    use crate::evidence::{EvidenceKind, EvidencePiece, EvidenceRole, EvidenceSet};

    fn example(agent_type: AgentType, answer: &str) -> CompiledExample {
        let evidence = EvidenceSet {
            trajectory_id: "ex-1".into(),
            gold: vec![EvidencePiece {
                piece_id: "p1".into(),
                kind: EvidenceKind::WebPage,
                title: None,
                content: "content".into(),
                role: EvidenceRole::Gold,
                origin_turn: Some(1),
                token_estimate: 2,
            }],
            distractors: vec![],
        };
        compile_context(&evidence, "q?", answer, agent_type, &CompileOptions::new(1)).unwrap()
    }

    #[test]
    fn search_normalization_rules() {
        assert!(verify_answer("les tzars.", "Les Tzars", AgentType::Search));
        assert!(verify_answer("  The   Answer ", "answer", AgentType::Search));
        assert!(verify_answer("An apple", "apple!", AgentType::Search));
        assert!(!verify_answer("wrong", "right", AgentType::Search));
        // Only one leading article is dropped.
        assert!(!verify_answer("the the end", "end", AgentType::Search));
    }

    #[test]
    fn sql_compares_numbers_with_tolerance() {
        assert!(verify_answer("u_ea8952bc", "u_ea8952bc", AgentType::Sql));
        assert!(verify_answer("3.0000001", "3.0", AgentType::Sql));
        assert!(!verify_answer("3.1", "3.0", AgentType::Sql));
        assert!(verify_answer("ada 42.00000001", "Ada 42", AgentType::Sql));
        assert!(!verify_answer("1 2", "1", AgentType::Sql));
        // Zero only matches zero under relative tolerance.
        assert!(verify_answer("0", "0.0", AgentType::Sql));
        assert!(!verify_answer("0", "1e-12", AgentType::Sql));
    }

    #[test]
    fn swe_compares_change_sets() {
        let gold = "--- a/f.rs\n+++ b/f.rs\n@@\n-old()\n+new()\n";
        let candidate = "<patch>\n--- a/f.rs\n+++ b/f.rs\n@@ -3,1 +3,1 @@\n+new()\n-old()\n</patch>";
        assert!(verify_answer(candidate, gold, AgentType::Swe));
        assert!(!verify_answer("+other()", gold, AgentType::Swe));
    }

    #[test]
    fn verify_is_reflexive_for_all_types() {
        for text in ["Les Tzars", "u_ea8952bc", "--- a/x\n+++ b/x\n+line\n", "plain"] {
            for agent_type in [AgentType::Search, AgentType::Swe, AgentType::Sql] {
                assert!(verify_answer(text, text, agent_type), "{text} {agent_type}");
            }
        }
    }

    #[test]
    fn answer_extraction_prefers_last_marker() {
        let text = "thinking...\nAnswer: draft\nmore thoughts\nAnswer: final one\n";
        assert_eq!(extract_final_answer(text, "Answer:"), "final one");
        let unmarked = "step one\nstep two\n\n  result line \n\n";
        assert_eq!(extract_final_answer(unmarked, "Answer:"), "result line");
        assert_eq!(extract_final_answer("", "Answer:"), "");
    }

    #[test]
    fn first_verifying_candidate_is_retained() {
        let ex = example(AgentType::Search, "Les Tzars");
        let mut teacher = ScriptedTeacher::default();
        teacher.add(
            "ex-1",
            vec![
                "I think...\nAnswer: Les Paul".into(),
                "Reconsidering the documents.\nAnswer: les tzars".into(),
                "Never reached\nAnswer: Les Tzars".into(),
            ],
        );
        let result = attach_rationale(
            &ex,
            &mut teacher,
            4,
            &DecodeParams::default(),
            DEFAULT_ANSWER_MARKER,
            &RetryPolicy::none(),
        )
        .unwrap();
        assert!(result.passed);
        assert_eq!(result.candidates_tried, 2);
        assert!(result
            .retained_rationale
            .as_deref()
            .unwrap()
            .starts_with("Reconsidering"));
    }

    #[test]
    fn exhausting_wrong_candidates_fails_cleanly() {
        let ex = example(AgentType::Search, "right");
        let mut teacher = ScriptedTeacher::default();
        teacher.add(
            "ex-1",
            (0..4).map(|i| format!("Answer: wrong {i}")).collect(),
        );
        let result = attach_rationale(
            &ex,
            &mut teacher,
            4,
            &DecodeParams::default(),
            DEFAULT_ANSWER_MARKER,
            &RetryPolicy::none(),
        )
        .unwrap();
        assert!(!result.passed);
        assert_eq!(result.candidates_tried, 4);
        assert!(result.retained_rationale.is_none());
    }

    #[test]
    fn unavailable_teacher_defers_after_retries() {
        let ex = example(AgentType::Search, "x");
        // Empty script: always unavailable.
        let mut teacher = ScriptedTeacher::default();
        let err = attach_rationale(
            &ex,
            &mut teacher,
            2,
            &DecodeParams::default(),
            DEFAULT_ANSWER_MARKER,
            &RetryPolicy {
                attempts: 3,
                base_delay: Duration::ZERO,
            },
        )
        .unwrap_err();
        match err {
            VerifyError::TeacherUnavailable { attempts, .. } => assert_eq!(attempts, 3),
        }
    }

    #[test]
    fn script_loader_round_trips() {
        let script = concat!(
            "{\"example_id\":\"e1\",\"candidates\":[\"Answer: a\"]}\n",
            "{\"example_id\":\"e1\",\"candidates\":[\"Answer: b\"]}\n",
        );
        let mut teacher = ScriptedTeacher::from_reader(script.as_bytes()).unwrap();
        let request = TeacherRequest {
            example_id: "e1".into(),
            prompt: String::new(),
            n_candidates: 1,
            decode_params: DecodeParams::default(),
        };
        assert_eq!(teacher.generate(&request).unwrap(), "Answer: a");
        assert_eq!(teacher.generate(&request).unwrap(), "Answer: b");
        assert!(teacher.generate(&request).is_err());
    }

    #[test]
    fn pass_rates_group_by_agent_type() {
        let make = |id: &str, passed: bool| VerificationResult {
            example_id: id.into(),
            candidates_tried: 1,
            retained_rationale: passed.then(|| "r".into()),
            passed,
        };
        let results = [
            (AgentType::Search, make("s1", true)),
            (AgentType::Search, make("s2", true)),
            (AgentType::Sql, make("q1", true)),
            (AgentType::Sql, make("q2", false)),
        ];
        let report = pass_rate_report(results.iter().map(|(t, r)| (*t, r)));
        assert_eq!(report[&AgentType::Search], 1.0);
        assert_eq!(report[&AgentType::Sql], 0.5);
        assert!(!report.contains_key(&AgentType::Swe));

        // Weighted average over groups equals the global rate.
        let global = results.iter().filter(|(_, r)| r.passed).count() as f64
            / results.len() as f64;
        let weighted: f64 = report
            .iter()
            .map(|(t, rate)| {
                let n = results.iter().filter(|(rt, _)| rt == t).count() as f64;
                rate * n
            })
            .sum::<f64>()
            / results.len() as f64;
        assert!((weighted - global).abs() < 1e-12);
    }
}
