//! Extraction of gold evidence and distractor pools from trajectories.
//!
//! Gold evidence is what the agent actually used: visited search results,
//! files touched by the final patch, tables touched by a query. Distractors
//! are material the agent saw but did not use — unvisited search hits,
//! untouched snapshot files. Concatenated gold must suffice to answer the
//! question, so contents are carried byte-for-byte with no truncation.
//!
//! Deduplication key is the item id (search), file path, or table name;
//! the first occurrence wins, so a result revisited in a later turn is not
//! listed twice.

use serde::Serialize;
use thiserror::Error;

use crate::tokens::TokenCounter;
use crate::trajectory::{AgentType, Trajectory};

/// What kind of artifact an evidence piece is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EvidenceKind {
    WebPage,
    SourceFile,
    Table,
}

/// Whether a piece is required to answer the question or is padding the
/// agent ignored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EvidenceRole {
    Gold,
    Distractor,
}

/// One unit of context material extracted from a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvidencePiece {
    pub piece_id: String,
    pub kind: EvidenceKind,
    pub title: Option<String>,
    pub content: String,
    pub role: EvidenceRole,
    /// Turn the piece first came from; `None` for snapshot-derived pieces.
    pub origin_turn: Option<u32>,
    /// Token count used for budget packing, fixed at extraction time.
    pub token_estimate: u64,
}

/// All evidence extracted from one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvidenceSet {
    pub trajectory_id: String,
    pub gold: Vec<EvidencePiece>,
    pub distractors: Vec<EvidencePiece>,
}

impl EvidenceSet {
    /// Gold followed by distractors, in extraction order.
    pub fn all_pieces(&self) -> impl Iterator<Item = &EvidencePiece> {
        self.gold.iter().chain(self.distractors.iter())
    }
}

/// Errors from evidence extraction.
#[derive(Debug, Error)]
pub enum EvidenceError {
    #[error("trajectory {id}: no gold evidence ({reason})")]
    EmptyEvidence { id: String, reason: String },
    #[error("trajectory {id}: extractor for {expected} called on a {found} trajectory")]
    WrongAgentType {
        id: String,
        expected: AgentType,
        found: AgentType,
    },
}

/// Extracts evidence using the rule set for the trajectory's agent type.
pub fn extract_evidence(
    traj: &Trajectory,
    counter: &TokenCounter,
) -> Result<EvidenceSet, EvidenceError> {
    match traj.agent_type {
        AgentType::Search => extract_search_evidence(traj, counter),
        AgentType::Swe => extract_swe_evidence(traj, counter),
        AgentType::Sql => extract_sql_evidence(traj, counter),
    }
}

/// Search rule: every visited observation item is gold (deduplicated by
/// item id, content taken from the first visited occurrence); every item
/// that was returned but never visited anywhere is a distractor.
pub fn extract_search_evidence(
    traj: &Trajectory,
    counter: &TokenCounter,
) -> Result<EvidenceSet, EvidenceError> {
    expect_agent(traj, AgentType::Search)?;

    let mut visited_ids = std::collections::BTreeSet::new();
    for turn in &traj.turns {
        for item in &turn.observation.items {
            if item.visited {
                visited_ids.insert(item.item_id.as_str());
            }
        }
    }

    let mut gold = Vec::new();
    let mut distractors = Vec::new();
    let mut taken_gold = std::collections::BTreeSet::new();
    let mut taken_distractor = std::collections::BTreeSet::new();
    for turn in &traj.turns {
        for item in &turn.observation.items {
            let id = item.item_id.as_str();
            if item.visited {
                if taken_gold.insert(id) {
                    gold.push(piece_from_item(item, EvidenceRole::Gold, turn.index, counter));
                }
            } else if !visited_ids.contains(id) && taken_distractor.insert(id) {
                distractors.push(piece_from_item(
                    item,
                    EvidenceRole::Distractor,
                    turn.index,
                    counter,
                ));
            }
        }
    }

    if gold.is_empty() {
        return Err(EvidenceError::EmptyEvidence {
            id: traj.id.clone(),
            reason: "no visited observation items".into(),
        });
    }
    Ok(EvidenceSet {
        trajectory_id: traj.id.clone(),
        gold,
        distractors,
    })
}

fn piece_from_item(
    item: &crate::trajectory::ObsItem,
    role: EvidenceRole,
    turn: u32,
    counter: &TokenCounter,
) -> EvidencePiece {
    EvidencePiece {
        piece_id: item.item_id.clone(),
        kind: EvidenceKind::WebPage,
        title: item.title.clone(),
        content: item.content.clone(),
        role,
        origin_turn: Some(turn),
        token_estimate: counter.count_piece(&item.item_id, &item.content),
    }
}

/// Software-engineering rule: snapshot files touched by the final patch are
/// gold; every other snapshot file — opened or not — is a distractor.
pub fn extract_swe_evidence(
    traj: &Trajectory,
    counter: &TokenCounter,
) -> Result<EvidenceSet, EvidenceError> {
    expect_agent(traj, AgentType::Swe)?;
    let files = traj.env.as_ref().map(|e| e.files.as_slice()).unwrap_or(&[]);

    let mut gold = Vec::new();
    let mut distractors = Vec::new();
    let mut taken = std::collections::BTreeSet::new();
    for file in files {
        if !taken.insert(file.path.as_str()) {
            continue;
        }
        let role = if file.in_patch {
            EvidenceRole::Gold
        } else {
            EvidenceRole::Distractor
        };
        let piece = EvidencePiece {
            piece_id: file.path.clone(),
            kind: EvidenceKind::SourceFile,
            title: None,
            content: file.content.clone(),
            role,
            origin_turn: None,
            token_estimate: counter.count_piece(&file.path, &file.content),
        };
        match role {
            EvidenceRole::Gold => gold.push(piece),
            EvidenceRole::Distractor => distractors.push(piece),
        }
    }

    if gold.is_empty() {
        return Err(EvidenceError::EmptyEvidence {
            id: traj.id.clone(),
            reason: "no snapshot files marked in_patch".into(),
        });
    }
    Ok(EvidenceSet {
        trajectory_id: traj.id.clone(),
        gold,
        distractors,
    })
}

/// SQL rule: one gold piece per queried table carrying the complete rendered
/// table (header plus all rows); unqueried tables are excluded entirely, so
/// there are no distractors.
pub fn extract_sql_evidence(
    traj: &Trajectory,
    counter: &TokenCounter,
) -> Result<EvidenceSet, EvidenceError> {
    expect_agent(traj, AgentType::Sql)?;
    let tables = traj.env.as_ref().map(|e| e.tables.as_slice()).unwrap_or(&[]);

    let mut gold = Vec::new();
    let mut taken = std::collections::BTreeSet::new();
    for table in tables {
        if !table.queried || !taken.insert(table.name.as_str()) {
            continue;
        }
        let content = render_table(&table.header, &table.rows);
        let token_estimate = counter.count_piece(&table.name, &content);
        gold.push(EvidencePiece {
            piece_id: table.name.clone(),
            kind: EvidenceKind::Table,
            title: None,
            content,
            role: EvidenceRole::Gold,
            origin_turn: None,
            token_estimate,
        });
    }

    if gold.is_empty() {
        return Err(EvidenceError::EmptyEvidence {
            id: traj.id.clone(),
            reason: "no queried tables in snapshot".into(),
        });
    }
    Ok(EvidenceSet {
        trajectory_id: traj.id.clone(),
        gold,
        distractors: Vec::new(),
    })
}

/// Renders a table as pipe-delimited rows, header first:
/// `| col_a | col_b |` followed by one line per row.
pub fn render_table(header: &[String], rows: &[Vec<String>]) -> String {
    if header.is_empty() && rows.is_empty() {
        return String::new();
    }
    let mut lines = Vec::with_capacity(rows.len() + 1);
    lines.push(render_row(header));
    for row in rows {
        lines.push(render_row(row));
    }
    lines.join("\n")
}

fn render_row(cells: &[String]) -> String {
    format!("| {} |", cells.join(" | "))
}

fn expect_agent(traj: &Trajectory, expected: AgentType) -> Result<(), EvidenceError> {
    if traj.agent_type != expected {
        return Err(EvidenceError::WrongAgentType {
            id: traj.id.clone(),
            expected,
            found: traj.agent_type,
        });
    }
    Ok(())
}
