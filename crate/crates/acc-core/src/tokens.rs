//! Token counting for budget decisions.
//!
//! Budget packing needs a token count per evidence piece before any model
//! tokenizer is in the loop, so the default counter is a cheap deterministic
//! approximation. When exact counts are available (for example from a
//! tokenizer run offline), they can be supplied as a sidecar table keyed by
//! piece id and take precedence.

use std::collections::HashMap;
use std::io::BufRead;

use serde::Deserialize;
use thiserror::Error;

/// Errors raised while loading an external token-count table.
#[derive(Debug, Error)]
pub enum TokenTableError {
    #[error("token table line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("failed to read token table: {0}")]
    Io(#[from] std::io::Error),
}

/// One row of the sidecar token-count table.
#[derive(Debug, Deserialize)]
struct SidecarRow {
    piece_id: String,
    token_count: u64,
}

/// Counts tokens for budget packing.
#[derive(Debug, Clone)]
pub enum TokenCounter {
    /// `max(ceil(bytes / 4), whitespace-delimited words)`. The byte term
    /// tracks subword tokenizers on prose; the word term keeps code and
    /// tables (long lines, few spaces) from being undercounted to zero.
    Approximate,
    /// Exact counts per piece id, falling back to the approximation for ids
    /// missing from the table.
    External { table: HashMap<String, u64> },
}

impl TokenCounter {
    /// The default approximate counter.
    pub fn approximate() -> Self {
        TokenCounter::Approximate
    }

    /// Builds an external counter from an in-memory table.
    pub fn from_table(table: HashMap<String, u64>) -> Self {
        TokenCounter::External { table }
    }

    /// Loads an external counter from a JSONL sidecar with rows
    /// `{"piece_id": ..., "token_count": ...}`. Later rows for the same id
    /// overwrite earlier ones.
    pub fn from_sidecar(reader: impl BufRead) -> Result<Self, TokenTableError> {
        let mut table = HashMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row: SidecarRow =
                serde_json::from_str(&line).map_err(|e| TokenTableError::Parse {
                    line: idx + 1,
                    message: e.to_string(),
                })?;
            table.insert(row.piece_id, row.token_count);
        }
        Ok(TokenCounter::External { table })
    }

    /// Approximate token count of a text, independent of any sidecar table.
    pub fn count_text(&self, text: &str) -> u64 {
        approximate_tokens(text)
    }

    /// Token count for an evidence piece, preferring the sidecar entry for
    /// `piece_id` when one exists.
    pub fn count_piece(&self, piece_id: &str, content: &str) -> u64 {
        match self {
            TokenCounter::Approximate => approximate_tokens(content),
            TokenCounter::External { table } => table
                .get(piece_id)
                .copied()
                .unwrap_or_else(|| approximate_tokens(content)),
        }
    }
}

fn approximate_tokens(text: &str) -> u64 {
    let bytes = text.len() as u64;
    let by_bytes = bytes.div_ceil(4);
    let by_words = text.split_whitespace().count() as u64;
    by_bytes.max(by_words)
}
