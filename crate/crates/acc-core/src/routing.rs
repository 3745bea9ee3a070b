//! Expert-routing frequency statistics over serialized router traces.
//!
//! A router dump records, for every layer and token, which `k` experts the
//! gate selected. Tokens are split into equal-length groups along the
//! sequence (floor arithmetic, last group absorbing the remainder), and the
//! per-group frequency of an expert is the fraction of the group's tokens
//! that routed to it. Summed over experts the frequencies equal `k` exactly
//! — the module keeps integer selection counts internally so this identity
//! survives aggregation. Multi-sample aggregation uses running means
//! weighted by group size.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

/// File magic for router dumps.
pub const ROUTER_MAGIC: [u8; 4] = *b"RTRF";
/// Supported dump format version.
pub const ROUTER_VERSION: u32 = 1;
/// Default number of token groups.
pub const DEFAULT_GROUPS: usize = 32;
/// Default number of top-changing experts to report.
pub const DEFAULT_TOP: usize = 20;

/// Errors from router dump decoding or statistics.
#[derive(Debug, Error)]
pub enum RouterError {
    #[error("bad magic: expected \"RTRF\"")]
    BadMagic,
    #[error("unsupported dump version {0}")]
    BadVersion(u32),
    #[error("invalid dump: {0}")]
    InvalidDump(String),
    #[error("token groups would be empty: sequence length {seq_len} < {n_groups} groups")]
    EmptyGroup { seq_len: usize, n_groups: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("layer set mismatch: {0}")]
    LayerSetMismatch(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Top-k routing decisions for one traced sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouterDump {
    n_layers: usize,
    seq_len: usize,
    n_experts: usize,
    top_k: usize,
    /// `indices[(layer * seq_len + token) * top_k + slot]`.
    indices: Vec<u16>,
}

impl RouterDump {
    /// Validates shape, expert bounds, and per-token distinctness.
    pub fn new(
        n_layers: usize,
        seq_len: usize,
        n_experts: usize,
        top_k: usize,
        indices: Vec<u16>,
    ) -> Result<Self, RouterError> {
        if top_k == 0 || top_k > n_experts {
            return Err(RouterError::InvalidDump(format!(
                "top_k {top_k} out of range for {n_experts} experts"
            )));
        }
        let expected = n_layers * seq_len * top_k;
        if indices.len() != expected {
            return Err(RouterError::InvalidDump(format!(
                "expected {expected} indices, got {}",
                indices.len()
            )));
        }
        let dump = Self {
            n_layers,
            seq_len,
            n_experts,
            top_k,
            indices,
        };
        for layer in 0..n_layers {
            for token in 0..seq_len {
                let selected = dump.selected(layer, token);
                for (slot, &e) in selected.iter().enumerate() {
                    if (e as usize) >= n_experts {
                        return Err(RouterError::InvalidDump(format!(
                            "layer {layer} token {token}: expert {e} out of range"
                        )));
                    }
                    if selected[..slot].contains(&e) {
                        return Err(RouterError::InvalidDump(format!(
                            "layer {layer} token {token}: expert {e} selected twice"
                        )));
                    }
                }
            }
        }
        Ok(dump)
    }

    pub fn n_layers(&self) -> usize {
        self.n_layers
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn n_experts(&self) -> usize {
        self.n_experts
    }

    pub fn top_k(&self) -> usize {
        self.top_k
    }

    /// The experts selected for `token` at `layer`.
    pub fn selected(&self, layer: usize, token: usize) -> &[u16] {
        let base = (layer * self.seq_len + token) * self.top_k;
        &self.indices[base..base + self.top_k]
    }

    /// Reads a dump: magic, version, u32 shape fields, then u16 indices
    /// little-endian, `k` per token, layer-major.
    pub fn read(mut reader: impl Read) -> Result<Self, RouterError> {
        let mut magic = [0u8; 4];
        reader.read_exact(&mut magic)?;
        if magic != ROUTER_MAGIC {
            return Err(RouterError::BadMagic);
        }
        let version = read_u32(&mut reader)?;
        if version != ROUTER_VERSION {
            return Err(RouterError::BadVersion(version));
        }
        let n_layers = read_u32(&mut reader)? as usize;
        let seq_len = read_u32(&mut reader)? as usize;
        let n_experts = read_u32(&mut reader)? as usize;
        let top_k = read_u32(&mut reader)? as usize;
        let count = n_layers * seq_len * top_k;
        let mut bytes = vec![0u8; count * 2];
        reader.read_exact(&mut bytes).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                RouterError::InvalidDump("dump truncated".into())
            } else {
                RouterError::Io(e)
            }
        })?;
        let indices = bytes
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]))
            .collect();
        Self::new(n_layers, seq_len, n_experts, top_k, indices)
    }

    pub fn open(path: &Path) -> Result<Self, RouterError> {
        Self::read(BufReader::new(File::open(path)?))
    }

    /// Writes the dump in the wire format.
    pub fn write(&self, mut writer: impl Write) -> Result<(), RouterError> {
        writer.write_all(&ROUTER_MAGIC)?;
        writer.write_all(&ROUTER_VERSION.to_le_bytes())?;
        for field in [self.n_layers, self.seq_len, self.n_experts, self.top_k] {
            writer.write_all(&(field as u32).to_le_bytes())?;
        }
        for &e in &self.indices {
            writer.write_all(&e.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn write_file(&self, path: &Path) -> Result<(), RouterError> {
        let mut writer = BufWriter::new(File::create(path)?);
        self.write(&mut writer)?;
        writer.flush()?;
        Ok(())
    }
}

fn read_u32(reader: &mut impl Read) -> Result<u32, RouterError> {
    let mut buf = [0u8; 4];
    reader.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

/// Group boundaries: `n_groups` spans of `floor(T / n_groups)` tokens, the
/// last absorbing the remainder.
pub fn group_spans(seq_len: usize, n_groups: usize) -> Result<Vec<std::ops::Range<usize>>, RouterError> {
    if n_groups == 0 || seq_len < n_groups {
        return Err(RouterError::EmptyGroup { seq_len, n_groups });
    }
    let base = seq_len / n_groups;
    Ok((0..n_groups)
        .map(|i| {
            let start = i * base;
            let end = if i + 1 == n_groups { seq_len } else { start + base };
            start..end
        })
        .collect())
}

/// Selection counts for one sample: integers, so the per-group identity
/// `Σ_e count[l][e][g] = k · |group g|` is exact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpertFrequency {
    n_layers: usize,
    n_experts: usize,
    n_groups: usize,
    /// `counts[(layer * n_experts + expert) * n_groups + group]`.
    counts: Vec<u64>,
    /// Tokens per group.
    group_tokens: Vec<u64>,
}

impl ExpertFrequency {
    pub fn n_layers(&self) -> usize {
        self.n_layers
    }

    pub fn n_experts(&self) -> usize {
        self.n_experts
    }

    pub fn n_groups(&self) -> usize {
        self.n_groups
    }

    pub fn count(&self, layer: usize, expert: usize, group: usize) -> u64 {
        self.counts[(layer * self.n_experts + expert) * self.n_groups + group]
    }

    pub fn group_tokens(&self, group: usize) -> u64 {
        self.group_tokens[group]
    }

    /// Frequency in `[0, 1]`: selections divided by group tokens.
    pub fn frequency(&self, layer: usize, expert: usize, group: usize) -> f64 {
        self.count(layer, expert, group) as f64 / self.group_tokens[group] as f64
    }

    /// Sum of frequencies over experts for one (layer, group), computed by
    /// summing integer counts before the single division. Equals `top_k`
    /// exactly: the numerator is `k · |group|` by construction, so the
    /// correctly rounded quotient is exactly `k`.
    pub fn frequency_sum(&self, layer: usize, group: usize) -> f64 {
        let total: u64 = (0..self.n_experts)
            .map(|e| self.count(layer, e, group))
            .sum();
        total as f64 / self.group_tokens[group] as f64
    }

    /// Pools another sample's counts into this one (exact integer merge).
    /// Group counts add position-wise; sequence lengths may differ.
    pub fn merge(&mut self, other: &ExpertFrequency) -> Result<(), RouterError> {
        if self.n_layers != other.n_layers
            || self.n_experts != other.n_experts
            || self.n_groups != other.n_groups
        {
            return Err(RouterError::ShapeMismatch(format!(
                "cannot merge ({}, {}, {}) with ({}, {}, {})",
                self.n_layers,
                self.n_experts,
                self.n_groups,
                other.n_layers,
                other.n_experts,
                other.n_groups
            )));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        for (a, b) in self.group_tokens.iter_mut().zip(&other.group_tokens) {
            *a += b;
        }
        Ok(())
    }

    /// Frequencies as a dense table.
    pub fn table(&self) -> FrequencyTable {
        let values = (0..self.n_layers)
            .flat_map(|l| {
                (0..self.n_experts).flat_map(move |e| {
                    (0..self.n_groups).map(move |g| self.frequency(l, e, g))
                })
            })
            .collect();
        FrequencyTable {
            n_layers: self.n_layers,
            n_experts: self.n_experts,
            n_groups: self.n_groups,
            values,
        }
    }
}

/// Counts expert selections per (layer, expert, token group).
pub fn expert_frequencies(
    dump: &RouterDump,
    n_groups: usize,
) -> Result<ExpertFrequency, RouterError> {
    let spans = group_spans(dump.seq_len(), n_groups)?;
    let n_layers = dump.n_layers();
    let n_experts = dump.n_experts();
    let mut counts = vec![0u64; n_layers * n_experts * n_groups];
    for layer in 0..n_layers {
        for (group, span) in spans.iter().enumerate() {
            for token in span.clone() {
                for &e in dump.selected(layer, token) {
                    counts[(layer * n_experts + e as usize) * n_groups + group] += 1;
                }
            }
        }
    }
    Ok(ExpertFrequency {
        n_layers,
        n_experts,
        n_groups,
        counts,
        group_tokens: spans.iter().map(|s| s.len() as u64).collect(),
    })
}

/// Dense per-(layer, expert, group) frequency table.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTable {
    pub n_layers: usize,
    pub n_experts: usize,
    pub n_groups: usize,
    /// `values[(layer * n_experts + expert) * n_groups + group]`.
    pub values: Vec<f64>,
}

impl FrequencyTable {
    pub fn frequency(&self, layer: usize, expert: usize, group: usize) -> f64 {
        self.values[(layer * self.n_experts + expert) * self.n_groups + group]
    }
}

/// Streaming aggregator over samples: per-cell running means weighted by
/// group token count.
#[derive(Debug, Clone)]
pub struct RunningMeanAggregator {
    n_layers: usize,
    n_experts: usize,
    n_groups: usize,
    means: Vec<f64>,
    /// Accumulated token weight per group.
    weights: Vec<u64>,
    samples: usize,
}

impl RunningMeanAggregator {
    pub fn new(n_layers: usize, n_experts: usize, n_groups: usize) -> Self {
        Self {
            n_layers,
            n_experts,
            n_groups,
            means: vec![0.0; n_layers * n_experts * n_groups],
            weights: vec![0; n_groups],
            samples: 0,
        }
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Folds one sample in: `mean += (f_sample - mean) * w_sample / w_total`.
    pub fn add(&mut self, sample: &ExpertFrequency) -> Result<(), RouterError> {
        if sample.n_layers != self.n_layers
            || sample.n_experts != self.n_experts
            || sample.n_groups != self.n_groups
        {
            return Err(RouterError::ShapeMismatch(format!(
                "aggregator is ({}, {}, {}), sample is ({}, {}, {})",
                self.n_layers,
                self.n_experts,
                self.n_groups,
                sample.n_layers,
                sample.n_experts,
                sample.n_groups
            )));
        }
        for group in 0..self.n_groups {
            let w_sample = sample.group_tokens(group);
            let w_total = self.weights[group] + w_sample;
            for layer in 0..self.n_layers {
                for expert in 0..self.n_experts {
                    let idx = (layer * self.n_experts + expert) * self.n_groups + group;
                    let f = sample.frequency(layer, expert, group);
                    self.means[idx] += (f - self.means[idx]) * w_sample as f64 / w_total as f64;
                }
            }
        }
        for (w, s) in self.weights.iter_mut().zip(0..self.n_groups) {
            *w += sample.group_tokens(s);
        }
        self.samples += 1;
        Ok(())
    }

    pub fn table(&self) -> FrequencyTable {
        FrequencyTable {
            n_layers: self.n_layers,
            n_experts: self.n_experts,
            n_groups: self.n_groups,
            values: self.means.clone(),
        }
    }
}

/// One expert's routing change across token groups.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertDeltaRow {
    pub expert: usize,
    /// Mean of `|delta|` over groups; the ranking key.
    pub mean_abs_delta: f64,
    /// Fine-tuned minus baseline frequency per group, averaged over the
    /// selected layers.
    pub deltas: Vec<f64>,
}

/// Top-changing experts table.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertDeltaTable {
    pub n_groups: usize,
    pub rows: Vec<ExpertDeltaRow>,
}

impl ExpertDeltaTable {
    /// CSV with columns `expert,group,delta`, rows in rank order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("expert,group,delta\n");
        for row in &self.rows {
            for (group, delta) in row.deltas.iter().enumerate() {
                out.push_str(&format!("{},{group},{delta}\n", row.expert));
            }
        }
        out
    }
}

/// Per-expert frequency deltas averaged over `layers`, ranked by mean
/// absolute delta over groups (descending, ties by expert index), keeping
/// the `top_n` largest movers.
pub fn expert_delta(
    base: &FrequencyTable,
    sft: &FrequencyTable,
    layers: &[usize],
    top_n: usize,
) -> Result<ExpertDeltaTable, RouterError> {
    if base.n_experts != sft.n_experts || base.n_groups != sft.n_groups {
        return Err(RouterError::ShapeMismatch(format!(
            "base (E={}, groups={}) vs sft (E={}, groups={})",
            base.n_experts, base.n_groups, sft.n_experts, sft.n_groups
        )));
    }
    if base.n_layers != sft.n_layers {
        return Err(RouterError::LayerSetMismatch(format!(
            "base has {} layers, sft has {}",
            base.n_layers, sft.n_layers
        )));
    }
    if layers.is_empty() {
        return Err(RouterError::LayerSetMismatch("no layers selected".into()));
    }
    for &l in layers {
        if l >= base.n_layers {
            return Err(RouterError::LayerSetMismatch(format!(
                "layer {l} out of range for {}-layer dumps",
                base.n_layers
            )));
        }
    }

    let mut rows: Vec<ExpertDeltaRow> = (0..base.n_experts)
        .map(|expert| {
            let deltas: Vec<f64> = (0..base.n_groups)
                .map(|group| {
                    layers
                        .iter()
                        .map(|&l| {
                            sft.frequency(l, expert, group) - base.frequency(l, expert, group)
                        })
                        .sum::<f64>()
                        / layers.len() as f64
                })
                .collect();
            let mean_abs_delta =
                deltas.iter().map(|d| d.abs()).sum::<f64>() / deltas.len() as f64;
            ExpertDeltaRow {
                expert,
                mean_abs_delta,
                deltas,
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        b.mean_abs_delta
            .partial_cmp(&a.mean_abs_delta)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.expert.cmp(&b.expert))
    });
    rows.truncate(top_n);
    Ok(ExpertDeltaTable {
        n_groups: base.n_groups,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use std::io::Cursor;

    /// Random valid dump: distinct top-k via partial Fisher-Yates draw.
    fn random_dump(n_layers: usize, seq_len: usize, n_experts: usize, top_k: usize, seed: u64) -> RouterDump {
        let mut rng = SplitMix64::new(seed);
        let mut indices = Vec::with_capacity(n_layers * seq_len * top_k);
        for _ in 0..n_layers * seq_len {
            let mut pool: Vec<u16> = (0..n_experts as u16).collect();
            for slot in 0..top_k {
                let j = slot + (rng.next_u64() as usize) % (n_experts - slot);
                pool.swap(slot, j);
                indices.push(pool[slot]);
            }
        }
        RouterDump::new(n_layers, seq_len, n_experts, top_k, indices).unwrap()
    }

    #[test]
    fn groups_use_floor_with_remainder_in_last() {
        let spans = group_spans(100, 32).unwrap();
        assert_eq!(spans.len(), 32);
        assert!(spans[..31].iter().all(|s| s.len() == 3));
        assert_eq!(spans[31], 93..100);
        assert!(matches!(
            group_spans(31, 32),
            Err(RouterError::EmptyGroup { .. })
        ));
    }

    #[test]
    fn constant_routing_gives_unit_frequency() {
        let dump = RouterDump::new(2, 8, 4, 1, vec![0; 16]).unwrap();
        let freq = expert_frequencies(&dump, 4).unwrap();
        for layer in 0..2 {
            for group in 0..4 {
                assert_eq!(freq.frequency(layer, 0, group), 1.0);
                for expert in 1..4 {
                    assert_eq!(freq.frequency(layer, expert, group), 0.0);
                }
            }
        }
    }

    #[test]
    fn frequencies_sum_to_k_exactly() {
        for seed in 0..20u64 {
            let dump = random_dump(3, 50, 16, 4, seed);
            let freq = expert_frequencies(&dump, 7).unwrap();
            for layer in 0..3 {
                for group in 0..7 {
                    // Exact integer identity under the hood.
                    let count_sum: u64 =
                        (0..16).map(|e| freq.count(layer, e, group)).sum();
                    assert_eq!(count_sum, 4 * freq.group_tokens(group));
                    // Exact in floating point when counts are summed before
                    // the division.
                    assert_eq!(
                        freq.frequency_sum(layer, group),
                        4.0,
                        "seed {seed} layer {layer} group {group}"
                    );
                    // Summing the individual quotients is only near-exact.
                    let naive: f64 = (0..16).map(|e| freq.frequency(layer, e, group)).sum();
                    assert!((naive - 4.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn running_mean_matches_pooled_counts() {
        let dumps: Vec<RouterDump> = (0..5)
            .map(|i| random_dump(2, 33 + 7 * i as usize, 8, 2, 1000 + i))
            .collect();
        let mut aggregator = RunningMeanAggregator::new(2, 8, 4);
        let mut pooled: Option<ExpertFrequency> = None;
        for dump in &dumps {
            let freq = expert_frequencies(dump, 4).unwrap();
            aggregator.add(&freq).unwrap();
            match &mut pooled {
                Some(p) => p.merge(&freq).unwrap(),
                None => pooled = Some(freq),
            }
        }
        let running = aggregator.table();
        let pooled = pooled.unwrap().table();
        for (a, b) in running.values.iter().zip(&pooled.values) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn dump_round_trips_through_wire_format() {
        let dump = random_dump(2, 10, 8, 3, 77);
        let mut bytes = Vec::new();
        dump.write(&mut bytes).unwrap();
        let reread = RouterDump::read(Cursor::new(bytes)).unwrap();
        assert_eq!(reread, dump);
    }

    #[test]
    fn reader_rejects_corrupt_dumps() {
        let dump = random_dump(1, 4, 4, 2, 5);
        let mut bytes = Vec::new();
        dump.write(&mut bytes).unwrap();

        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(matches!(
            RouterDump::read(Cursor::new(bad_magic)).unwrap_err(),
            RouterError::BadMagic
        ));

        let truncated = bytes[..bytes.len() - 2].to_vec();
        assert!(matches!(
            RouterDump::read(Cursor::new(truncated)).unwrap_err(),
            RouterError::InvalidDump(_)
        ));

        // Out-of-range expert.
        assert!(RouterDump::new(1, 2, 4, 1, vec![9, 0]).is_err());
        // Duplicate expert for one token.
        assert!(RouterDump::new(1, 1, 4, 2, vec![3, 3]).is_err());
    }

    #[test]
    fn raised_expert_ranks_first_in_delta() {
        // Baseline: everything routes to expert 0. Fine-tuned: expert 1
        // takes 20% of tokens (the first of every five), uniformly.
        let t = 40;
        let base = RouterDump::new(1, t, 4, 1, vec![0; t]).unwrap();
        let sft_indices: Vec<u16> = (0..t).map(|i| u16::from(i % 5 == 0)).collect();
        let sft = RouterDump::new(1, t, 4, 1, sft_indices).unwrap();
        let base_f = expert_frequencies(&base, 8).unwrap().table();
        let sft_f = expert_frequencies(&sft, 8).unwrap().table();
        let table = expert_delta(&base_f, &sft_f, &[0], 4).unwrap();
        assert_eq!(table.rows[0].expert, 1);
        assert!((table.rows[0].mean_abs_delta - 0.2).abs() < 1e-12);
        assert!(table.rows[0].deltas.iter().all(|d| (d - 0.2).abs() < 1e-12));
        // Expert 0 lost the same mass.
        assert_eq!(table.rows[1].expert, 0);
        assert!((table.rows[1].mean_abs_delta - 0.2).abs() < 1e-12);
    }

    #[test]
    fn identical_dumps_rank_stably_with_zero_delta() {
        let dump = random_dump(2, 64, 8, 2, 9);
        let f = expert_frequencies(&dump, 8).unwrap().table();
        let table = expert_delta(&f, &f, &[0, 1], 8).unwrap();
        assert_eq!(table.rows.len(), 8);
        let experts: Vec<usize> = table.rows.iter().map(|r| r.expert).collect();
        assert_eq!(experts, (0..8).collect::<Vec<_>>());
        assert!(table.rows.iter().all(|r| r.mean_abs_delta == 0.0));
    }

    #[test]
    fn delta_is_antisymmetric_and_top_n_truncates() {
        let a = expert_frequencies(&random_dump(2, 64, 8, 2, 10), 8)
            .unwrap()
            .table();
        let b = expert_frequencies(&random_dump(2, 64, 8, 2, 20), 8)
            .unwrap()
            .table();
        let forward = expert_delta(&a, &b, &[0, 1], 8).unwrap();
        let backward = expert_delta(&b, &a, &[0, 1], 8).unwrap();
        for fr in &forward.rows {
            let br = backward.rows.iter().find(|r| r.expert == fr.expert).unwrap();
            for (x, y) in fr.deltas.iter().zip(&br.deltas) {
                assert!((x + y).abs() < 1e-15);
            }
        }
        let top2 = expert_delta(&a, &b, &[0], 2).unwrap();
        assert_eq!(top2.rows.len(), 2);
        assert!(top2.rows[0].mean_abs_delta >= top2.rows[1].mean_abs_delta);
    }

    #[test]
    fn layer_selection_is_validated() {
        let f = expert_frequencies(&random_dump(2, 32, 4, 1, 3), 4)
            .unwrap()
            .table();
        assert!(matches!(
            expert_delta(&f, &f, &[5], 4),
            Err(RouterError::LayerSetMismatch(_))
        ));
        assert!(matches!(
            expert_delta(&f, &f, &[], 4),
            Err(RouterError::LayerSetMismatch(_))
        ));
    }

    #[test]
    fn delta_csv_layout() {
        let f = expert_frequencies(&random_dump(1, 32, 4, 1, 3), 4)
            .unwrap()
            .table();
        let csv = expert_delta(&f, &f, &[0], 2).unwrap().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "expert,group,delta");
        assert_eq!(lines.len(), 1 + 2 * 4);
    }
}
