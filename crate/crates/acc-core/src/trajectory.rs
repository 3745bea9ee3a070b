//! Canonical trajectory data model and JSONL parsing.
//!
//! One wire schema covers all three agent families; agent-specific payloads
//! live in observation items (search results, file views) and in the optional
//! environment snapshot (codebase files, database tables). A trajectory is
//! `question`, an ordered list of interaction turns — each reasoning, action,
//! observation — and a final turn holding the closing reasoning and answer.
//!
//! Records arrive one JSON object per line. Unknown fields are ignored so
//! that producer-side extensions do not break older readers, but missing
//! required fields are schema errors reported with their line number.

use std::collections::BTreeSet;
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

/// Which agent family produced a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AgentType {
    #[serde(rename = "search", alias = "Search", alias = "SEARCH")]
    Search,
    #[serde(rename = "swe", alias = "SWE", alias = "Swe")]
    Swe,
    #[serde(rename = "sql", alias = "SQL", alias = "Sql")]
    Sql,
}

impl fmt::Display for AgentType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            AgentType::Search => "search",
            AgentType::Swe => "swe",
            AgentType::Sql => "sql",
        };
        f.write_str(name)
    }
}

impl FromStr for AgentType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "search" => Ok(AgentType::Search),
            "swe" => Ok(AgentType::Swe),
            "sql" => Ok(AgentType::Sql),
            other => Err(format!("unknown agent type {other:?} (expected search, swe, or sql)")),
        }
    }
}

/// What kind of tool call a turn performed.
///
/// Producers should tag anything outside the known set as `Other`; as a
/// safety net, unrecognized kind strings also deserialize to `Other` instead
/// of failing the record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActionKind {
    SearchQuery,
    VisitDoc,
    OpenFile,
    ModifyFile,
    #[serde(rename = "ExecuteSQL")]
    ExecuteSql,
    #[serde(other)]
    Other,
}

/// A single tool call: the kind plus its free-form payload (query string,
/// file path, SQL text, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub kind: ActionKind,
    #[serde(default)]
    pub payload: String,
}

/// One item returned by a tool call, e.g. a search result or a file view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObsItem {
    pub item_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default)]
    pub content: String,
    /// Whether the agent subsequently engaged with this item (followed the
    /// search hit). Drives gold/distractor classification for search.
    #[serde(default)]
    pub visited: bool,
}

/// The tool response for one turn.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    #[serde(default)]
    pub items: Vec<ObsItem>,
}

/// One (reasoning, action, observation) triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionTurn {
    /// 1-based position of the turn.
    pub index: u32,
    #[serde(default)]
    pub reasoning: String,
    pub action: Action,
    #[serde(default)]
    pub observation: Observation,
}

/// A file in the environment snapshot of a software-engineering trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotFile {
    pub path: String,
    #[serde(default)]
    pub content: String,
    /// Whether the agent opened the file at any point.
    #[serde(default)]
    pub opened: bool,
    /// Whether the final patch touches the file.
    #[serde(default)]
    pub in_patch: bool,
}

/// A table in the environment snapshot of a SQL trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotTable {
    pub name: String,
    #[serde(default)]
    pub header: Vec<String>,
    /// Row values. Scalar JSON cells (numbers, booleans, null) are accepted
    /// and converted to their text form at parse time.
    #[serde(default, deserialize_with = "rows_from_scalars")]
    pub rows: Vec<Vec<String>>,
    /// Whether any query in the trajectory touched this table.
    #[serde(default)]
    pub queried: bool,
}

/// The world state a trajectory ran against, for agent families whose
/// evidence lives outside the observations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSnapshot {
    #[serde(default)]
    pub files: Vec<SnapshotFile>,
    #[serde(default)]
    pub tables: Vec<SnapshotTable>,
}

/// The closing turn: final reasoning and the verified answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalTurn {
    #[serde(default)]
    pub reasoning: String,
    pub answer: String,
}

/// A complete multi-turn agent trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub id: String,
    pub agent_type: AgentType,
    pub question: String,
    #[serde(default)]
    pub turns: Vec<InteractionTurn>,
    #[serde(rename = "final")]
    pub final_turn: FinalTurn,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env: Option<EnvironmentSnapshot>,
}

impl Trajectory {
    /// Closing reasoning text.
    pub fn final_reasoning(&self) -> &str {
        &self.final_turn.reasoning
    }

    /// Verified final answer.
    pub fn final_answer(&self) -> &str {
        &self.final_turn.answer
    }

    /// Total turn count including the final turn.
    pub fn turn_count(&self) -> usize {
        self.turns.len() + 1
    }

    /// The interaction history before 1-based turn `t`: exactly `t - 1`
    /// (reasoning, action, observation) triples.
    pub fn history_prefix(&self, t: usize) -> &[InteractionTurn] {
        assert!(t >= 1, "turn indices are 1-based");
        let end = (t - 1).min(self.turns.len());
        &self.turns[..end]
    }
}

fn rows_from_scalars<'de, D>(deserializer: D) -> Result<Vec<Vec<String>>, D::Error>
where
    D: Deserializer<'de>,
{
    use serde::de::Error;
    let raw: Vec<Vec<serde_json::Value>> = Vec::deserialize(deserializer)?;
    raw.into_iter()
        .enumerate()
        .map(|(i, row)| {
            row.into_iter()
                .map(|cell| match cell {
                    serde_json::Value::String(s) => Ok(s),
                    serde_json::Value::Number(n) => Ok(n.to_string()),
                    serde_json::Value::Bool(b) => Ok(b.to_string()),
                    serde_json::Value::Null => Ok(String::new()),
                    other => Err(D::Error::custom(format!(
                        "row {i}: table cells must be scalars, got {other}"
                    ))),
                })
                .collect()
        })
        .collect()
}

/// Errors from parsing or validating trajectories.
#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("line {line}: schema error: {message}")]
    Schema { line: usize, message: String },
    #[error("line {line}: agent type mismatch: expected {hint}, record says {found}")]
    AgentTypeMismatch {
        line: usize,
        hint: AgentType,
        found: AgentType,
    },
    #[error("trajectory {id}: final answer is empty")]
    MissingFinalAnswer { id: String },
    #[error("trajectory {id}: turn at position {position} has index {index}, expected {expected}")]
    NonContiguousTurns {
        id: String,
        position: usize,
        index: u32,
        expected: u32,
    },
    #[error(
        "trajectory {id}: table {table:?} row {row} has {got} values under a {expected}-column header"
    )]
    ArityMismatch {
        id: String,
        table: String,
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("trajectory {id}: duplicate item_id {item_id:?} within turn {turn} observation")]
    DuplicateItemId {
        id: String,
        item_id: String,
        turn: u32,
    },
    #[error("failed to read input: {0}")]
    Io(#[from] std::io::Error),
}

/// How the parser reacts to bad records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strictness {
    /// Skip malformed records, reporting each with its line number.
    #[default]
    Lenient,
    /// Fail on the first malformed record.
    Strict,
}

/// A record the parser skipped, with the 1-based line it came from.
#[derive(Debug, Clone, Serialize)]
pub struct ParseIssue {
    pub line: usize,
    pub message: String,
}

/// Parser configuration.
#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    /// Expected agent type; a record disagreeing with it is an error.
    pub agent_type_hint: Option<AgentType>,
    pub strictness: Strictness,
    /// Derive `visited`/`opened`/`in_patch` flags from `VisitDoc`,
    /// `OpenFile`, and `ModifyFile` actions before validation, for inputs
    /// that carry the engagement signal only in their action log.
    pub derive_flags: bool,
}

/// Result of parsing a stream: validated trajectories in input order plus
/// the records that were skipped (always empty under strict parsing).
#[derive(Debug, Default)]
pub struct ParseOutcome {
    pub trajectories: Vec<Trajectory>,
    pub skipped: Vec<ParseIssue>,
}

/// Parses trajectory JSONL. Every returned trajectory has passed
/// [`validate_trajectory`]; blank lines are ignored.
pub fn parse_trajectories(
    input: impl BufRead,
    opts: &ParseOptions,
) -> Result<ParseOutcome, TrajectoryError> {
    let mut outcome = ParseOutcome::default();
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_record(&line, line_no, opts) {
            Ok(traj) => outcome.trajectories.push(traj),
            Err(err) => match opts.strictness {
                Strictness::Strict => return Err(err),
                Strictness::Lenient => outcome.skipped.push(ParseIssue {
                    line: line_no,
                    message: err.to_string(),
                }),
            },
        }
    }
    Ok(outcome)
}

fn parse_record(
    line: &str,
    line_no: usize,
    opts: &ParseOptions,
) -> Result<Trajectory, TrajectoryError> {
    let mut traj: Trajectory =
        serde_json::from_str(line).map_err(|e| TrajectoryError::Schema {
            line: line_no,
            message: e.to_string(),
        })?;
    if let Some(hint) = opts.agent_type_hint {
        if hint != traj.agent_type {
            return Err(TrajectoryError::AgentTypeMismatch {
                line: line_no,
                hint,
                found: traj.agent_type,
            });
        }
    }
    if opts.derive_flags {
        derive_flags(&mut traj);
    }
    validate_trajectory(traj)
}

/// Marks engagement flags implied by the action log: `VisitDoc` payloads
/// mark matching observation items visited, `OpenFile` marks snapshot files
/// opened, and `ModifyFile` marks them opened and in the patch.
pub fn derive_flags(traj: &mut Trajectory) {
    let mut visited_ids: BTreeSet<String> = BTreeSet::new();
    let mut opened_paths: BTreeSet<String> = BTreeSet::new();
    let mut patched_paths: BTreeSet<String> = BTreeSet::new();
    for turn in &traj.turns {
        let payload = turn.action.payload.trim().to_string();
        match turn.action.kind {
            ActionKind::VisitDoc => {
                visited_ids.insert(payload);
            }
            ActionKind::OpenFile => {
                opened_paths.insert(payload);
            }
            ActionKind::ModifyFile => {
                opened_paths.insert(payload.clone());
                patched_paths.insert(payload);
            }
            _ => {}
        }
    }
    for turn in &mut traj.turns {
        for item in &mut turn.observation.items {
            if visited_ids.contains(&item.item_id) {
                item.visited = true;
            }
        }
    }
    if let Some(env) = &mut traj.env {
        for file in &mut env.files {
            if opened_paths.contains(&file.path) {
                file.opened = true;
            }
            if patched_paths.contains(&file.path) {
                file.opened = true;
                file.in_patch = true;
            }
        }
    }
}

/// Checks every type invariant and returns the trajectory unchanged iff all
/// hold: non-empty final answer, contiguous 1-based turn indices, unique
/// item ids per observation, and table rows matching header arity.
pub fn validate_trajectory(traj: Trajectory) -> Result<Trajectory, TrajectoryError> {
    if traj.final_turn.answer.is_empty() {
        return Err(TrajectoryError::MissingFinalAnswer { id: traj.id });
    }
    for (position, turn) in traj.turns.iter().enumerate() {
        let expected = position as u32 + 1;
        if turn.index != expected {
            return Err(TrajectoryError::NonContiguousTurns {
                id: traj.id,
                position: position + 1,
                index: turn.index,
                expected,
            });
        }
        let mut seen = BTreeSet::new();
        for item in &turn.observation.items {
            if !seen.insert(item.item_id.as_str()) {
                return Err(TrajectoryError::DuplicateItemId {
                    id: traj.id,
                    item_id: item.item_id.clone(),
                    turn: turn.index,
                });
            }
        }
    }
    if let Some(env) = &traj.env {
        for table in &env.tables {
            for (row_idx, row) in table.rows.iter().enumerate() {
                if row.len() != table.header.len() {
                    return Err(TrajectoryError::ArityMismatch {
                        id: traj.id,
                        table: table.name.clone(),
                        row: row_idx + 1,
                        got: row.len(),
                        expected: table.header.len(),
                    });
                }
            }
        }
    }
    Ok(traj)
}
