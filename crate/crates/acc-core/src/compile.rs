//! Packing evidence into a budgeted, seed-shuffled context and rendering
//! the single-shot prompt.
//!
//! The compiler takes the gold pieces plus whatever distractors the policy
//! admits, draws one seeded permutation over the candidates, and drops
//! distractors from the highest permuted position downward until the token
//! estimate fits the budget. Gold is never dropped: if gold alone exceeds
//! the budget the example is uncompilable. The surviving pieces are rendered
//! in permuted order, one block per piece, blocks separated by one blank
//! line.

use serde::Serialize;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

use crate::evidence::{EvidencePiece, EvidenceRole, EvidenceSet};
use crate::rng::permute;
use crate::trajectory::AgentType;

/// Default token budget per compiled example.
pub const DEFAULT_BUDGET: u64 = 131_072;

/// Instruction line opening every compiled search prompt.
pub const SEARCH_INSTRUCTION: &str =
    "Please reason based on the following documents and answer the question.";

/// How many distractors enter the candidate pool.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub enum DistractorPolicy {
    /// All extracted distractors (budget still applies).
    #[default]
    KeepAll,
    /// No distractors: gold-only contexts.
    DropAll,
    /// At most `N` distractors, taken in extraction order.
    Max(usize),
}

impl fmt::Display for DistractorPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistractorPolicy::KeepAll => f.write_str("keep"),
            DistractorPolicy::DropAll => f.write_str("drop"),
            DistractorPolicy::Max(n) => write!(f, "max:{n}"),
        }
    }
}

impl FromStr for DistractorPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "keep" | "keep-all" => Ok(DistractorPolicy::KeepAll),
            "drop" | "drop-all" => Ok(DistractorPolicy::DropAll),
            other => match other.strip_prefix("max:") {
                Some(n) => n
                    .parse::<usize>()
                    .map(DistractorPolicy::Max)
                    .map_err(|e| format!("bad distractor cap {n:?}: {e}")),
                None => Err(format!(
                    "unknown distractor policy {other:?} (expected keep, drop, or max:N)"
                )),
            },
        }
    }
}

/// Per-example compilation parameters.
#[derive(Debug, Clone)]
pub struct CompileOptions {
    /// Seed for this example's permutation (already mixed per example).
    pub seed: u64,
    pub budget: u64,
    pub policy: DistractorPolicy,
    /// Render blocks with another agent family's template instead of the
    /// trajectory's own.
    pub template: Option<AgentType>,
}

impl CompileOptions {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            budget: DEFAULT_BUDGET,
            policy: DistractorPolicy::default(),
            template: None,
        }
    }
}

/// A trajectory compiled into a single-shot QA record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompiledExample {
    pub example_id: String,
    pub agent_type: AgentType,
    pub question: String,
    /// Concatenated evidence blocks in permuted order.
    pub context: String,
    pub answer: String,
    /// Reasoning to train on; attached later by teacher verification or
    /// taken from the trajectory itself.
    pub rationale: Option<String>,
    /// `permutation[p]` is the 1-based index into `pieces_included` of the
    /// piece rendered at position `p`.
    pub permutation: Vec<usize>,
    pub pieces_included: Vec<String>,
    pub pieces_dropped: Vec<String>,
    /// Estimated tokens of the context (sum over included pieces).
    pub token_count: u64,
    pub seed: u64,
    pub budget: u64,
}

/// Errors from compilation.
#[derive(Debug, Error)]
pub enum CompileError {
    #[error("example {id}: gold evidence alone needs {gold_tokens} tokens, over budget {budget}")]
    BudgetExceeded {
        id: String,
        gold_tokens: u64,
        budget: u64,
    },
    #[error("example {id}: evidence set has no gold pieces")]
    NoGoldEvidence { id: String },
    #[error("example {id}: budget must be positive")]
    ZeroBudget { id: String },
}

/// Compiles one example from its evidence.
pub fn compile_context(
    evidence: &EvidenceSet,
    question: &str,
    answer: &str,
    agent_type: AgentType,
    opts: &CompileOptions,
) -> Result<CompiledExample, CompileError> {
    let id = &evidence.trajectory_id;
    if opts.budget == 0 {
        return Err(CompileError::ZeroBudget { id: id.clone() });
    }
    if evidence.gold.is_empty() {
        return Err(CompileError::NoGoldEvidence { id: id.clone() });
    }

    let gold_tokens: u64 = evidence.gold.iter().map(|p| p.token_estimate).sum();
    if gold_tokens > opts.budget {
        return Err(CompileError::BudgetExceeded {
            id: id.clone(),
            gold_tokens,
            budget: opts.budget,
        });
    }

    let admitted: &[EvidencePiece] = &evidence.distractors;
    let admitted = match opts.policy {
        DistractorPolicy::KeepAll => admitted,
        DistractorPolicy::DropAll => &[],
        DistractorPolicy::Max(n) => &admitted[..n.min(admitted.len())],
    };
    let candidates: Vec<&EvidencePiece> = evidence.gold.iter().chain(admitted).collect();
    let m = candidates.len();

    // One permutation drives both the render order and the drop priority:
    // order[p] is the candidate at position p, and overflow evicts the
    // distractor sitting at the highest position first.
    let order = permute(m, opts.seed);
    let mut alive = vec![true; m];
    let mut total: u64 = candidates.iter().map(|p| p.token_estimate).sum();
    let mut pieces_dropped = Vec::new();
    while total > opts.budget {
        let victim_pos = (0..m)
            .rev()
            .find(|&p| {
                let candidate = candidates[order[p] - 1];
                alive[order[p] - 1] && candidate.role == EvidenceRole::Distractor
            })
            .expect("overflow with no droppable distractor despite gold fitting budget");
        let idx = order[victim_pos] - 1;
        alive[idx] = false;
        total -= candidates[idx].token_estimate;
        pieces_dropped.push(candidates[idx].piece_id.clone());
    }

    let pieces_included: Vec<String> = candidates
        .iter()
        .enumerate()
        .filter(|(i, _)| alive[*i])
        .map(|(_, p)| p.piece_id.clone())
        .collect();
    // Candidate index -> 1-based rank among survivors.
    let mut rank = vec![0usize; m];
    let mut next = 0usize;
    for (i, is_alive) in alive.iter().enumerate() {
        if *is_alive {
            next += 1;
            rank[i] = next;
        }
    }
    let mut permutation = Vec::with_capacity(pieces_included.len());
    let mut ordered_pieces = Vec::with_capacity(pieces_included.len());
    for &orig in &order {
        if alive[orig - 1] {
            permutation.push(rank[orig - 1]);
            ordered_pieces.push(candidates[orig - 1]);
        }
    }

    let template = opts.template.unwrap_or(agent_type);
    let blocks: Vec<String> = ordered_pieces
        .iter()
        .map(|p| render_block(p, template))
        .collect();

    Ok(CompiledExample {
        example_id: id.clone(),
        agent_type,
        question: question.to_string(),
        context: blocks.join("\n\n"),
        answer: answer.to_string(),
        rationale: None,
        permutation,
        pieces_included,
        pieces_dropped,
        token_count: total,
        seed: opts.seed,
        budget: opts.budget,
    })
}

fn render_block(piece: &EvidencePiece, template: AgentType) -> String {
    match template {
        AgentType::Search => format!("[Doc {}] {}", piece.piece_id, piece.content),
        AgentType::Swe => format!("[File {}] {}", piece.piece_id, piece.content),
        AgentType::Sql => format!("[Table: {}]\n{}", piece.piece_id, piece.content),
    }
}

/// Renders the model input (no answer) using the example's own agent type.
pub fn render_prompt(example: &CompiledExample) -> String {
    render_prompt_as(example, example.agent_type)
}

/// Renders the model input with an explicit template choice.
pub fn render_prompt_as(example: &CompiledExample, template: AgentType) -> String {
    match template {
        AgentType::Search => format!(
            "{SEARCH_INSTRUCTION}\n{}\n\nDocuments:\n{}",
            example.question, example.context
        ),
        AgentType::Swe | AgentType::Sql => format!(
            "{}\n\nContext:\n{}",
            example.question, example.context
        ),
    }
}

/// Renders prompt plus answer: the complete example text.
pub fn render_example(example: &CompiledExample) -> String {
    format!("{}\n\nAnswer: {}", render_prompt(example), example.answer)
}
