//! Emission of the final training corpus and corpus statistics.
//!
//! Records go out as JSONL with a stable field order so that re-runs over
//! identical inputs produce byte-identical files. An adjacent manifest
//! carries per-agent counts and the run configuration; the length histogram
//! exports as CSV for downstream plotting.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compile::CompiledExample;
use crate::trajectory::AgentType;

/// Where a record came from and what went into it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub trajectory_id: String,
    pub pieces_included: Vec<String>,
    pub pieces_dropped: Vec<String>,
}

/// One emitted training record. Field order is the wire order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub example_id: String,
    pub agent_type: AgentType,
    pub question: String,
    pub context: String,
    pub rationale: String,
    pub answer: String,
    pub token_count: u64,
    pub seed: u64,
    pub provenance: Provenance,
}

impl DatasetRecord {
    /// Finalizes a compiled example with its rationale into a record.
    pub fn from_compiled(example: CompiledExample, rationale: String) -> Self {
        // The compiler names examples after their source trajectory.
        let trajectory_id = example.example_id.clone();
        Self {
            example_id: example.example_id,
            agent_type: example.agent_type,
            question: example.question,
            context: example.context,
            rationale,
            answer: example.answer,
            token_count: example.token_count,
            seed: example.seed,
            provenance: Provenance {
                trajectory_id,
                pieces_included: example.pieces_included,
                pieces_dropped: example.pieces_dropped,
            },
        }
    }
}

/// Errors from dataset I/O and statistics.
#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("no records: cannot compute statistics over an empty corpus")]
    EmptyCorpus,
    #[error("histogram needs at least one bin")]
    InvalidBins,
    #[error("dataset line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Writes records as JSONL in input order.
pub fn emit_dataset(records: &[DatasetRecord], mut writer: impl Write) -> Result<(), DatasetError> {
    for record in records {
        serde_json::to_writer(&mut writer, record)
            .map_err(|e| DatasetError::Io(std::io::Error::other(e)))?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads a dataset back from JSONL.
pub fn read_dataset(input: impl BufRead) -> Result<Vec<DatasetRecord>, DatasetError> {
    let mut records = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: DatasetRecord =
            serde_json::from_str(&line).map_err(|e| DatasetError::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?;
        records.push(record);
    }
    Ok(records)
}

/// Run summary written next to the dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub toolkit_version: String,
    /// Emitted records per agent type.
    pub counts: BTreeMap<String, u64>,
    pub total: u64,
    pub budget: u64,
    pub seed: u64,
    /// Input lines skipped by the lenient parser.
    pub skipped: Vec<serde_json::Value>,
    /// Trajectories that failed extraction or compilation.
    pub failures: Vec<serde_json::Value>,
    /// Examples deferred because the teacher was unavailable.
    pub deferred: Vec<String>,
    /// Examples excluded because no candidate rationale verified.
    #[serde(default)]
    pub unverified: Vec<String>,
    /// Verification pass rate per agent type, when a teacher ran.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pass_rates: Option<BTreeMap<String, f64>>,
    /// Resolved run configuration, for reproducibility.
    pub config: serde_json::Value,
}

impl Manifest {
    /// Counts records per agent type into a fresh manifest skeleton.
    pub fn tally(records: &[DatasetRecord], budget: u64, seed: u64) -> Self {
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        for record in records {
            *counts.entry(record.agent_type.to_string()).or_default() += 1;
        }
        Self {
            toolkit_version: crate::TOOLKIT_VERSION.to_string(),
            counts,
            total: records.len() as u64,
            budget,
            seed,
            skipped: Vec::new(),
            failures: Vec::new(),
            deferred: Vec::new(),
            unverified: Vec::new(),
            pass_rates: None,
            config: serde_json::Value::Null,
        }
    }

    /// Pretty-printed JSON with a trailing newline.
    pub fn to_json_pretty(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        text
    }
}

/// Token-length histogram with equal-width bins, final bin right-closed.
#[derive(Debug, Clone, PartialEq)]
pub struct LengthHistogram {
    /// `n_bins + 1` strictly increasing edges.
    pub bin_edges: Vec<f64>,
    /// Per-agent counts, one entry per bin.
    pub counts: BTreeMap<AgentType, Vec<u64>>,
    /// Counts over all agent types.
    pub totals: Vec<u64>,
}

impl LengthHistogram {
    pub fn n_bins(&self) -> usize {
        self.totals.len()
    }

    /// Total number of records binned.
    pub fn total_count(&self) -> u64 {
        self.totals.iter().sum()
    }

    /// CSV with columns `agent_type,bin_start,bin_end,count`: one row per
    /// (agent type, bin) for agent types present, then `all` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("agent_type,bin_start,bin_end,count\n");
        let mut push_rows = |name: &str, counts: &[u64]| {
            for (b, count) in counts.iter().enumerate() {
                out.push_str(&format!(
                    "{name},{},{},{count}\n",
                    self.bin_edges[b],
                    self.bin_edges[b + 1]
                ));
            }
        };
        for (agent_type, counts) in &self.counts {
            push_rows(&agent_type.to_string(), counts);
        }
        push_rows("all", &self.totals);
        out
    }
}

/// Bins records by token count into `n_bins` equal-width bins spanning
/// `[min, max]`. A corpus whose counts are all equal degenerates to one bin.
pub fn length_histogram(
    records: &[DatasetRecord],
    n_bins: usize,
) -> Result<LengthHistogram, DatasetError> {
    if n_bins == 0 {
        return Err(DatasetError::InvalidBins);
    }
    if records.is_empty() {
        return Err(DatasetError::EmptyCorpus);
    }
    let min = records.iter().map(|r| r.token_count).min().unwrap();
    let max = records.iter().map(|r| r.token_count).max().unwrap();
    let (n_bins, width) = if max == min {
        (1usize, 1.0f64)
    } else {
        (n_bins, (max - min) as f64 / n_bins as f64)
    };
    let bin_edges: Vec<f64> = (0..=n_bins).map(|i| min as f64 + width * i as f64).collect();

    let bin_of = |v: u64| -> usize {
        let idx = ((v - min) as f64 / width).floor() as usize;
        idx.min(n_bins - 1)
    };

    let mut counts: BTreeMap<AgentType, Vec<u64>> = BTreeMap::new();
    let mut totals = vec![0u64; n_bins];
    for record in records {
        let b = bin_of(record.token_count);
        counts
            .entry(record.agent_type)
            .or_insert_with(|| vec![0; n_bins])[b] += 1;
        totals[b] += 1;
    }
    Ok(LengthHistogram {
        bin_edges,
        counts,
        totals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, agent_type: AgentType, token_count: u64) -> DatasetRecord {
        DatasetRecord {
            example_id: id.to_string(),
            agent_type,
            question: "q".into(),
            context: "c".into(),
            rationale: "r".into(),
            answer: "a".into(),
            token_count,
            seed: 7,
            provenance: Provenance {
                trajectory_id: id.to_string(),
                pieces_included: vec!["p1".into()],
                pieces_dropped: vec![],
            },
        }
    }

    #[test]
    fn emission_is_deterministic_and_ordered() {
        let records = vec![
            record("e1", AgentType::Search, 10),
            record("e2", AgentType::Sql, 20),
        ];
        let mut a = Vec::new();
        let mut b = Vec::new();
        emit_dataset(&records, &mut a).unwrap();
        emit_dataset(&records, &mut b).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("{\"example_id\":\"e1\",\"agent_type\":\"search\",\"question\":"));
    }

    #[test]
    fn zero_records_emit_empty_file_and_zero_manifest() {
        let mut buf = Vec::new();
        emit_dataset(&[], &mut buf).unwrap();
        assert!(buf.is_empty());
        let manifest = Manifest::tally(&[], 131_072, 42);
        assert_eq!(manifest.total, 0);
        assert!(manifest.counts.is_empty());
    }

    #[test]
    fn round_trip_preserves_records() {
        let records = vec![
            record("e1", AgentType::Search, 10),
            record("e2", AgentType::Swe, 20),
        ];
        let mut buf = Vec::new();
        emit_dataset(&records, &mut buf).unwrap();
        let reread = read_dataset(buf.as_slice()).unwrap();
        assert_eq!(reread, records);
    }

    #[test]
    fn manifest_counts_by_agent_type() {
        let records = vec![
            record("e1", AgentType::Search, 10),
            record("e2", AgentType::Search, 12),
            record("e3", AgentType::Sql, 20),
        ];
        let manifest = Manifest::tally(&records, 100, 1);
        assert_eq!(manifest.counts["search"], 2);
        assert_eq!(manifest.counts["sql"], 1);
        assert_eq!(manifest.total, 3);
        assert!(manifest.to_json_pretty().ends_with("}\n"));
    }

    #[test]
    fn histogram_hand_binned_example() {
        let records = vec![
            record("e1", AgentType::Search, 10),
            record("e2", AgentType::Search, 20),
            record("e3", AgentType::Search, 30),
        ];
        let hist = length_histogram(&records, 2).unwrap();
        assert_eq!(hist.bin_edges, vec![10.0, 20.0, 30.0]);
        // [10,20) holds only 10; the right-closed final bin [20,30] holds
        // both 20 and 30.
        assert_eq!(hist.totals, vec![1, 2]);
        assert_eq!(hist.total_count(), 3);
    }

    #[test]
    fn histogram_single_record() {
        let records = vec![record("e1", AgentType::Sql, 77)];
        let hist = length_histogram(&records, 32).unwrap();
        assert_eq!(hist.totals, vec![1]);
        assert_eq!(hist.bin_edges.len(), 2);
        assert!(hist.bin_edges[0] < hist.bin_edges[1]);
    }

    #[test]
    fn histogram_conserves_counts() {
        let mut records = Vec::new();
        let mut state = 12345u64;
        for i in 0..500 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let agent_type = match state % 3 {
                0 => AgentType::Search,
                1 => AgentType::Swe,
                _ => AgentType::Sql,
            };
            records.push(record(&format!("e{i}"), agent_type, state % 10_000));
        }
        let hist = length_histogram(&records, 32).unwrap();
        assert_eq!(hist.total_count(), 500);
        let per_agent_total: u64 = hist.counts.values().flatten().sum();
        assert_eq!(per_agent_total, 500);
        assert!(hist.bin_edges.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn histogram_rejects_empty_and_zero_bins() {
        assert!(matches!(
            length_histogram(&[], 4),
            Err(DatasetError::EmptyCorpus)
        ));
        assert!(matches!(
            length_histogram(&[record("e", AgentType::Sql, 1)], 0),
            Err(DatasetError::InvalidBins)
        ));
    }

    #[test]
    fn histogram_csv_layout() {
        let records = vec![
            record("e1", AgentType::Search, 10),
            record("e2", AgentType::Sql, 30),
        ];
        let csv = length_histogram(&records, 2).unwrap().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "agent_type,bin_start,bin_end,count");
        // 2 agent types * 2 bins + 2 "all" rows.
        assert_eq!(lines.len(), 1 + 6);
        assert!(lines[1].starts_with("search,"));
        assert!(lines.last().unwrap().starts_with("all,"));
    }

    #[test]
    fn dataset_parse_errors_carry_line_numbers() {
        let input = "{\"example_id\":\"e1\"}\n";
        let err = read_dataset(input.as_bytes()).unwrap_err();
        assert!(matches!(err, DatasetError::Parse { line: 1, .. }));
    }
}
