//! Token-level supervision masks for the two training modes.
//!
//! A [`SegmentedChat`] labels contiguous token spans of a flattened training
//! sequence (question, per-turn reasoning/action/observation, compiled
//! context, final reasoning, answer). Masks mark which tokens carry loss:
//!
//! * agent mode supervises every reasoning and action span plus the final
//!   reasoning and answer, masking the question and all tool observations;
//! * compiled mode supervises only the final reasoning and answer, masking
//!   the question and the entire compiled context.
//!
//! The module is tokenizer-agnostic: it sees span lengths, never text.
//! [`loss_term_report`] groups per-token losses into one local term per
//! interaction turn plus a final term, which is how the training objective
//! decomposes in agent mode.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// What a token span contains. Turn-scoped labels carry the 1-based turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SegmentLabel {
    Question,
    Reasoning(u32),
    Action(u32),
    Observation(u32),
    FinalReasoning,
    Answer,
    CompiledContext,
}

/// A labeled half-open token span `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Segment {
    pub label: SegmentLabel,
    pub start: usize,
    pub end: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

/// Errors from layout validation or loss aggregation.
#[derive(Debug, Error)]
pub enum MaskError {
    #[error("invalid chat layout: {0}")]
    Layout(String),
    #[error("per-token loss length {got} does not match total tokens {expected}")]
    LengthMismatch { expected: usize, got: usize },
}

fn layout_err<T>(message: impl Into<String>) -> Result<T, MaskError> {
    Err(MaskError::Layout(message.into()))
}

/// An ordered, validated segmentation of one training sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedChat {
    segments: Vec<Segment>,
    total_tokens: usize,
}

impl SegmentedChat {
    /// Validates that spans are contiguous from zero, non-overlapping, and
    /// ordered with the question first and the answer last.
    pub fn new(segments: Vec<Segment>) -> Result<Self, MaskError> {
        if segments.is_empty() {
            return layout_err("chat has no segments");
        }
        let mut cursor = 0usize;
        for (i, seg) in segments.iter().enumerate() {
            if seg.start != cursor {
                return layout_err(format!(
                    "segment {i} starts at {} but previous span ended at {cursor}",
                    seg.start
                ));
            }
            if seg.end < seg.start {
                return layout_err(format!("segment {i} has negative length"));
            }
            cursor = seg.end;
        }
        if segments[0].label != SegmentLabel::Question {
            return layout_err("first segment must be the question");
        }
        if segments[segments.len() - 1].label != SegmentLabel::Answer {
            return layout_err("last segment must be the answer");
        }
        Ok(Self {
            segments,
            total_tokens: cursor,
        })
    }

    /// Builds a chat from (label, length) pairs laid out back to back.
    pub fn from_lengths(parts: &[(SegmentLabel, usize)]) -> Result<Self, MaskError> {
        let mut segments = Vec::with_capacity(parts.len());
        let mut cursor = 0usize;
        for &(label, len) in parts {
            segments.push(Segment {
                label,
                start: cursor,
                end: cursor + len,
            });
            cursor += len;
        }
        Self::new(segments)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn total_tokens(&self) -> usize {
        self.total_tokens
    }

    /// Checks the agent-mode grammar: question, then for each turn `t`
    /// (numbered contiguously from 1) reasoning, action, observation, then
    /// final reasoning and answer. No compiled-context span.
    fn check_agent_layout(&self) -> Result<(), MaskError> {
        let mut iter = self.segments.iter().peekable();
        match iter.next() {
            Some(s) if s.label == SegmentLabel::Question => {}
            _ => return layout_err("agent layout must start with the question"),
        }
        let mut turn = 0u32;
        while let Some(SegmentLabel::Reasoning(t)) = iter.peek().map(|s| s.label) {
            if t != turn + 1 {
                return layout_err(format!(
                    "turn {t} out of order, expected turn {}",
                    turn + 1
                ));
            }
            turn = t;
            iter.next();
            match iter.next().map(|s| s.label) {
                Some(SegmentLabel::Action(a)) if a == t => {}
                other => {
                    return layout_err(format!("turn {t}: expected action span, found {other:?}"))
                }
            }
            match iter.next().map(|s| s.label) {
                Some(SegmentLabel::Observation(o)) if o == t => {}
                other => {
                    return layout_err(format!(
                        "turn {t}: expected observation span, found {other:?}"
                    ))
                }
            }
        }
        match iter.next().map(|s| s.label) {
            Some(SegmentLabel::FinalReasoning) => {}
            other => return layout_err(format!("expected final reasoning, found {other:?}")),
        }
        match iter.next().map(|s| s.label) {
            Some(SegmentLabel::Answer) => {}
            other => return layout_err(format!("expected answer, found {other:?}")),
        }
        if let Some(extra) = iter.next() {
            return layout_err(format!("unexpected segment after answer: {:?}", extra.label));
        }
        Ok(())
    }

    /// Checks the compiled-mode grammar: question, compiled context, final
    /// reasoning, answer.
    fn check_compiled_layout(&self) -> Result<(), MaskError> {
        let labels: Vec<SegmentLabel> = self.segments.iter().map(|s| s.label).collect();
        let expected = [
            SegmentLabel::Question,
            SegmentLabel::CompiledContext,
            SegmentLabel::FinalReasoning,
            SegmentLabel::Answer,
        ];
        if labels != expected {
            return layout_err(format!(
                "compiled layout must be question, compiled context, final reasoning, answer; found {labels:?}"
            ));
        }
        Ok(())
    }
}

/// Which objective a mask realizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaskMode {
    #[serde(rename = "agent")]
    AgentSft,
    #[serde(rename = "acc")]
    Acc,
}

/// A per-token supervision mask.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisionMask {
    pub bits: Vec<bool>,
    pub mode: MaskMode,
}

impl SupervisionMask {
    /// Number of supervised tokens.
    pub fn ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Run-length encoding as (bit, length) pairs.
    pub fn to_runs(&self) -> Vec<(u8, usize)> {
        let mut runs: Vec<(u8, usize)> = Vec::new();
        for &bit in &self.bits {
            let bit = u8::from(bit);
            match runs.last_mut() {
                Some((b, len)) if *b == bit => *len += 1,
                _ => runs.push((bit, 1)),
            }
        }
        runs
    }
}

fn fill(mask: &mut [bool], seg: &Segment) {
    for bit in &mut mask[seg.start..seg.end] {
        *bit = true;
    }
}

/// Builds the agent-mode mask: ones on every reasoning and action span plus
/// final reasoning and answer; zeros on the question and all observations.
pub fn build_agent_mask(chat: &SegmentedChat) -> Result<SupervisionMask, MaskError> {
    chat.check_agent_layout()?;
    let mut bits = vec![false; chat.total_tokens()];
    for seg in chat.segments() {
        match seg.label {
            SegmentLabel::Reasoning(_)
            | SegmentLabel::Action(_)
            | SegmentLabel::FinalReasoning
            | SegmentLabel::Answer => fill(&mut bits, seg),
            SegmentLabel::Question | SegmentLabel::Observation(_) => {}
            SegmentLabel::CompiledContext => unreachable!("rejected by layout check"),
        }
    }
    Ok(SupervisionMask {
        bits,
        mode: MaskMode::AgentSft,
    })
}

/// Builds the compiled-mode mask: ones on final reasoning and answer only.
pub fn build_acc_mask(chat: &SegmentedChat) -> Result<SupervisionMask, MaskError> {
    chat.check_compiled_layout()?;
    let mut bits = vec![false; chat.total_tokens()];
    for seg in chat.segments() {
        match seg.label {
            SegmentLabel::FinalReasoning | SegmentLabel::Answer => fill(&mut bits, seg),
            _ => {}
        }
    }
    Ok(SupervisionMask {
        bits,
        mode: MaskMode::Acc,
    })
}

/// Supervised loss decomposed into one local term per interaction turn plus
/// the final term.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossTermReport {
    /// `local_terms[t-1]` sums the loss over turn `t`'s reasoning and action.
    pub local_terms: Vec<f64>,
    /// Sum over final reasoning and answer.
    pub final_term: f64,
}

impl LossTermReport {
    pub fn total(&self) -> f64 {
        self.local_terms.iter().sum::<f64>() + self.final_term
    }
}

/// Groups per-token losses by turn under the agent-mode objective. Masked
/// tokens (question, observations) contribute to no term.
pub fn loss_term_report(
    chat: &SegmentedChat,
    per_token_loss: &[f64],
) -> Result<LossTermReport, MaskError> {
    chat.check_agent_layout()?;
    if per_token_loss.len() != chat.total_tokens() {
        return Err(MaskError::LengthMismatch {
            expected: chat.total_tokens(),
            got: per_token_loss.len(),
        });
    }
    let span_sum =
        |seg: &Segment| -> f64 { per_token_loss[seg.start..seg.end].iter().sum() };
    let n_turns = chat
        .segments()
        .iter()
        .filter(|s| matches!(s.label, SegmentLabel::Reasoning(_)))
        .count();
    let mut local_terms = vec![0.0; n_turns];
    let mut final_term = 0.0;
    for seg in chat.segments() {
        match seg.label {
            SegmentLabel::Reasoning(t) | SegmentLabel::Action(t) => {
                local_terms[(t - 1) as usize] += span_sum(seg);
            }
            SegmentLabel::FinalReasoning | SegmentLabel::Answer => final_term += span_sum(seg),
            _ => {}
        }
    }
    Ok(LossTermReport {
        local_terms,
        final_term,
    })
}

/// Wire form of one exported mask: run-length encoded bits.
#[derive(Debug, Serialize, Deserialize)]
pub struct MaskRecord {
    pub example_id: String,
    pub mode: MaskMode,
    /// `[bit, run_length]` pairs covering the sequence.
    pub runs: Vec<(u8, usize)>,
}

impl MaskRecord {
    pub fn new(example_id: impl Into<String>, mask: &SupervisionMask) -> Self {
        Self {
            example_id: example_id.into(),
            mode: mask.mode,
            runs: mask.to_runs(),
        }
    }
}

/// Writes masks as JSONL, one record per line.
pub fn export_masks(
    records: &[MaskRecord],
    mut writer: impl Write,
) -> Result<(), std::io::Error> {
    for record in records {
        serde_json::to_writer(&mut writer, record)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Wire form of a segmented chat, for feeding externally tokenized
/// sequences to the mask builders: `{"example_id": ..., "segments":
/// [{"label": "reasoning", "turn": 1, "len": 42}, ...]}`.
#[derive(Debug, Deserialize)]
struct ChatWire {
    example_id: String,
    segments: Vec<SegmentWire>,
}

#[derive(Debug, Deserialize)]
struct SegmentWire {
    label: String,
    #[serde(default)]
    turn: Option<u32>,
    len: usize,
}

/// Parses segmented chats from JSONL. Returns (example_id, chat) pairs in
/// input order.
pub fn parse_segmented_chats(
    input: impl std::io::BufRead,
) -> Result<Vec<(String, SegmentedChat)>, MaskError> {
    let mut out = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line.map_err(|e| MaskError::Layout(format!("line {}: {e}", idx + 1)))?;
        if line.trim().is_empty() {
            continue;
        }
        let wire: ChatWire = serde_json::from_str(&line)
            .map_err(|e| MaskError::Layout(format!("line {}: {e}", idx + 1)))?;
        let mut parts = Vec::with_capacity(wire.segments.len());
        for seg in &wire.segments {
            let turn = || {
                seg.turn.ok_or_else(|| {
                    MaskError::Layout(format!(
                        "line {}: label {:?} needs a turn number",
                        idx + 1,
                        seg.label
                    ))
                })
            };
            let label = match seg.label.as_str() {
                "question" => SegmentLabel::Question,
                "reasoning" => SegmentLabel::Reasoning(turn()?),
                "action" => SegmentLabel::Action(turn()?),
                "observation" => SegmentLabel::Observation(turn()?),
                "final_reasoning" => SegmentLabel::FinalReasoning,
                "answer" => SegmentLabel::Answer,
                "compiled_context" => SegmentLabel::CompiledContext,
                other => {
                    return Err(MaskError::Layout(format!(
                        "line {}: unknown segment label {other:?}",
                        idx + 1
                    )))
                }
            };
            parts.push((label, seg.len));
        }
        out.push((wire.example_id, SegmentedChat::from_lengths(&parts)?));
    }
    Ok(out)
}
