//! Attention-by-distance statistics over serialized attention traces.
//!
//! A dump holds one causal T×T matrix per (layer, head). Token distances
//! `d = i - j` are grouped into equal-width bins over `[0, T-1]`, and the
//! per-bin statistic is the average attention mass at the bin's distances,
//! normalized by how many positions can attend at each distance:
//!
//! ```text
//! m[l][h][b] = sum_{d in bin b} sum_{i=d}^{T-1} A[i][i-d]
//!              -----------------------------------------
//!                     sum_{d in bin b} (T - d)
//! ```
//!
//! Per-layer means average `m` over heads; model comparisons report the
//! difference of those means per (layer, bin) and, for long-range behavior,
//! the difference of per-head means over the last quarter of bins. Bins
//! whose distance set is empty (possible when bins outnumber distances) are
//! reported as absent, never as zero, so they cannot dilute tail means.
//!
//! All accumulation is in 64-bit floats regardless of the 32-bit dump
//! precision.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

/// File magic for attention dumps.
pub const ATTN_MAGIC: [u8; 4] = *b"ATNS";
/// Supported dump format version.
pub const ATTN_VERSION: u32 = 1;
/// Default number of distance bins.
pub const DEFAULT_BINS: usize = 32;

/// Errors from dump decoding or statistics.
#[derive(Debug, Error)]
pub enum AttnError {
    #[error("bad magic: expected \"ATNS\"")]
    BadMagic,
    #[error("unsupported dump version {0}")]
    BadVersion(u32),
    #[error("dump truncated: expected {expected} more bytes")]
    Truncated { expected: usize },
    #[error("matrix for layer {layer} head {head} violates causality at ({row}, {col})")]
    CausalityViolation {
        layer: usize,
        head: usize,
        row: usize,
        col: usize,
    },
    #[error(
        "matrix for layer {layer} head {head}: row {row} sums to {sum}, not 1 within 1e-4 despite normalized flag"
    )]
    NotNormalized {
        layer: usize,
        head: usize,
        row: usize,
        sum: f64,
    },
    #[error("matrix for layer {layer} head {head} has a non-finite or negative value at ({row}, {col})")]
    InvalidValue {
        layer: usize,
        head: usize,
        row: usize,
        col: usize,
    },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("binning mismatch: {0}")]
    BinningMismatch(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Header of an attention dump.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttnHeader {
    pub n_layers: u32,
    pub n_heads: u32,
    pub seq_len: u32,
    /// Whether rows are declared to sum to 1 (checked at read time).
    pub normalized: bool,
}

/// One causal attention matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalMatrix {
    seq_len: usize,
    values: Vec<f32>,
}

impl CausalMatrix {
    /// Validates causality (zero upper triangle) and value sanity.
    pub fn new(seq_len: usize, values: Vec<f32>) -> Result<Self, AttnError> {
        if values.len() != seq_len * seq_len {
            return Err(AttnError::ShapeMismatch(format!(
                "expected {} values for T={seq_len}, got {}",
                seq_len * seq_len,
                values.len()
            )));
        }
        let matrix = Self { seq_len, values };
        matrix.check(0, 0, false)?;
        Ok(matrix)
    }

    fn check(&self, layer: usize, head: usize, normalized: bool) -> Result<(), AttnError> {
        let t = self.seq_len;
        for i in 0..t {
            let row = &self.values[i * t..(i + 1) * t];
            let mut sum = 0.0f64;
            for (j, &v) in row.iter().enumerate() {
                if j > i {
                    if v != 0.0 {
                        return Err(AttnError::CausalityViolation {
                            layer,
                            head,
                            row: i,
                            col: j,
                        });
                    }
                } else if !v.is_finite() || v < 0.0 {
                    return Err(AttnError::InvalidValue {
                        layer,
                        head,
                        row: i,
                        col: j,
                    });
                } else {
                    sum += f64::from(v);
                }
            }
            if normalized && (sum - 1.0).abs() > 1e-4 {
                return Err(AttnError::NotNormalized {
                    layer,
                    head,
                    row: i,
                    sum,
                });
            }
        }
        Ok(())
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn at(&self, i: usize, j: usize) -> f32 {
        self.values[i * self.seq_len + j]
    }

    /// Sum of each subdiagonal: `diag_sums[d] = Σ_{i=d}^{T-1} A[i][i-d]`,
    /// accumulated in f64.
    pub fn diagonal_sums(&self) -> Vec<f64> {
        let t = self.seq_len;
        let mut sums = vec![0.0f64; t];
        for i in 0..t {
            let row = &self.values[i * t..i * t + i + 1];
            for (j, &v) in row.iter().enumerate() {
                sums[i - j] += f64::from(v);
            }
        }
        sums
    }
}

/// Streaming reader over the matrices of a dump, layer-major then head.
#[derive(Debug)]
pub struct AttnDumpReader<R: Read> {
    header: AttnHeader,
    reader: R,
    next_index: usize,
}

impl AttnDumpReader<BufReader<File>> {
    pub fn open(path: &Path) -> Result<Self, AttnError> {
        Self::new(BufReader::new(File::open(path)?))
    }
}

impl<R: Read> AttnDumpReader<R> {
    pub fn new(mut reader: R) -> Result<Self, AttnError> {
        let mut magic = [0u8; 4];
        reader.read_exact(&mut magic)?;
        if magic != ATTN_MAGIC {
            return Err(AttnError::BadMagic);
        }
        let version = read_u32(&mut reader)?;
        if version != ATTN_VERSION {
            return Err(AttnError::BadVersion(version));
        }
        let n_layers = read_u32(&mut reader)?;
        let n_heads = read_u32(&mut reader)?;
        let seq_len = read_u32(&mut reader)?;
        let mut flag = [0u8; 1];
        reader.read_exact(&mut flag)?;
        Ok(Self {
            header: AttnHeader {
                n_layers,
                n_heads,
                seq_len,
                normalized: flag[0] != 0,
            },
            reader,
            next_index: 0,
        })
    }

    pub fn header(&self) -> AttnHeader {
        self.header
    }

    fn matrix_count(&self) -> usize {
        self.header.n_layers as usize * self.header.n_heads as usize
    }

    /// Reads and validates the next (layer, head) matrix, or `None` when the
    /// dump is exhausted.
    pub fn next_matrix(&mut self) -> Option<Result<(usize, usize, CausalMatrix), AttnError>> {
        if self.next_index >= self.matrix_count() {
            return None;
        }
        let index = self.next_index;
        self.next_index += 1;
        let layer = index / self.header.n_heads as usize;
        let head = index % self.header.n_heads as usize;
        Some(self.read_matrix(layer, head))
    }

    fn read_matrix(&mut self, layer: usize, head: usize) -> Result<(usize, usize, CausalMatrix), AttnError> {
        let t = self.header.seq_len as usize;
        let mut bytes = vec![0u8; t * t * 4];
        self.reader.read_exact(&mut bytes).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                AttnError::Truncated { expected: t * t * 4 }
            } else {
                AttnError::Io(e)
            }
        })?;
        let values: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let matrix = CausalMatrix {
            seq_len: t,
            values,
        };
        matrix.check(layer, head, self.header.normalized)?;
        Ok((layer, head, matrix))
    }
}

fn read_u32(reader: &mut impl Read) -> Result<u32, AttnError> {
    let mut buf = [0u8; 4];
    reader.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

/// Writes a dump from matrices supplied layer-major then head.
pub fn write_attention_dump<'a>(
    mut writer: impl Write,
    header: AttnHeader,
    matrices: impl Iterator<Item = &'a CausalMatrix>,
) -> Result<(), AttnError> {
    writer.write_all(&ATTN_MAGIC)?;
    writer.write_all(&ATTN_VERSION.to_le_bytes())?;
    writer.write_all(&header.n_layers.to_le_bytes())?;
    writer.write_all(&header.n_heads.to_le_bytes())?;
    writer.write_all(&header.seq_len.to_le_bytes())?;
    writer.write_all(&[u8::from(header.normalized)])?;
    let mut written = 0usize;
    for matrix in matrices {
        if matrix.seq_len != header.seq_len as usize {
            return Err(AttnError::ShapeMismatch(format!(
                "matrix T={} does not match header T={}",
                matrix.seq_len, header.seq_len
            )));
        }
        for v in &matrix.values {
            writer.write_all(&v.to_le_bytes())?;
        }
        written += 1;
    }
    let expected = header.n_layers as usize * header.n_heads as usize;
    if written != expected {
        return Err(AttnError::ShapeMismatch(format!(
            "wrote {written} matrices, header promises {expected}"
        )));
    }
    Ok(())
}

/// Writes a dump to a file path.
pub fn write_attention_dump_file<'a>(
    path: &Path,
    header: AttnHeader,
    matrices: impl Iterator<Item = &'a CausalMatrix>,
) -> Result<(), AttnError> {
    let mut writer = BufWriter::new(File::create(path)?);
    write_attention_dump(&mut writer, header, matrices)?;
    writer.flush()?;
    Ok(())
}

/// Equal-width binning of token distances `0..=T-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceBinning {
    seq_len: usize,
    n_bins: usize,
}

impl DistanceBinning {
    /// Builds `n_bins` equal-width bins over `[0, T-1]`, final bin
    /// right-closed. When bins outnumber distances some bins are empty;
    /// they are flagged by [`DistanceBinning::empty_bins`], and statistics
    /// report them as absent.
    pub fn new(seq_len: usize, n_bins: usize) -> Result<Self, AttnError> {
        if seq_len < 1 {
            return Err(AttnError::InvalidInput("sequence length must be >= 1".into()));
        }
        if n_bins < 1 {
            return Err(AttnError::InvalidInput("bin count must be >= 1".into()));
        }
        Ok(Self { seq_len, n_bins })
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    /// Bin edges `e_0..=e_B` over `[0, T-1]`.
    pub fn edges(&self) -> Vec<f64> {
        let span = (self.seq_len - 1) as f64;
        (0..=self.n_bins)
            .map(|b| span * b as f64 / self.n_bins as f64)
            .collect()
    }

    /// The bin holding distance `d`. Integer arithmetic avoids edge-epsilon
    /// surprises: `bin = floor(d * B / (T-1))`, clamped so the maximum
    /// distance lands in the final (right-closed) bin.
    pub fn bin_of(&self, d: usize) -> usize {
        debug_assert!(d < self.seq_len);
        if self.seq_len == 1 {
            return 0;
        }
        let idx = (d as u128 * self.n_bins as u128 / (self.seq_len - 1) as u128) as usize;
        idx.min(self.n_bins - 1)
    }

    /// Distances belonging to bin `b`.
    pub fn distances_in(&self, b: usize) -> Vec<usize> {
        (0..self.seq_len).filter(|&d| self.bin_of(d) == b).collect()
    }

    /// Denominator weight of bin `b`: `Σ_{d in bin} (T - d)`; zero for
    /// empty bins.
    pub fn position_weight(&self, b: usize) -> u64 {
        self.distances_in(b)
            .into_iter()
            .map(|d| (self.seq_len - d) as u64)
            .sum()
    }

    /// Bins with no member distances.
    pub fn empty_bins(&self) -> Vec<usize> {
        let mut counts = vec![0u64; self.n_bins];
        for d in 0..self.seq_len {
            counts[self.bin_of(d)] += 1;
        }
        counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == 0)
            .map(|(b, _)| b)
            .collect()
    }

    /// True when any bin is empty (bins outnumber distances).
    pub fn is_degenerate(&self) -> bool {
        !self.empty_bins().is_empty()
    }
}

/// Per-bin means for one dump. Cells for empty bins are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinStats {
    pub n_layers: usize,
    pub n_heads: usize,
    pub n_bins: usize,
    pub seq_len: usize,
    /// `head_means[(layer * n_heads + head) * n_bins + bin]`.
    pub head_means: Vec<Option<f64>>,
    /// Mean over heads: `layer_means[layer * n_bins + bin]`.
    pub layer_means: Vec<Option<f64>>,
}

impl BinStats {
    pub fn head_mean(&self, layer: usize, head: usize, bin: usize) -> Option<f64> {
        self.head_means[(layer * self.n_heads + head) * self.n_bins + bin]
    }

    pub fn layer_mean(&self, layer: usize, bin: usize) -> Option<f64> {
        self.layer_means[layer * self.n_bins + bin]
    }
}

/// Per-bin means of one matrix; `None` for empty bins.
pub fn bin_means_matrix(
    matrix: &CausalMatrix,
    bins: &DistanceBinning,
) -> Result<Vec<Option<f64>>, AttnError> {
    if matrix.seq_len() != bins.seq_len() {
        return Err(AttnError::ShapeMismatch(format!(
            "matrix T={} vs binning T={}",
            matrix.seq_len(),
            bins.seq_len()
        )));
    }
    let diag_sums = matrix.diagonal_sums();
    let mut numerators = vec![0.0f64; bins.n_bins()];
    let mut weights = vec![0u64; bins.n_bins()];
    for (d, &sum) in diag_sums.iter().enumerate() {
        let b = bins.bin_of(d);
        numerators[b] += sum;
        weights[b] += (bins.seq_len() - d) as u64;
    }
    Ok(numerators
        .into_iter()
        .zip(weights)
        .map(|(num, w)| (w > 0).then(|| num / w as f64))
        .collect())
}

/// Consumes a dump and produces per-head and per-layer bin means.
pub fn attn_bin_means<R: Read>(
    reader: &mut AttnDumpReader<R>,
    bins: &DistanceBinning,
) -> Result<BinStats, AttnError> {
    let header = reader.header();
    if header.seq_len as usize != bins.seq_len() {
        return Err(AttnError::ShapeMismatch(format!(
            "dump T={} vs binning T={}",
            header.seq_len,
            bins.seq_len()
        )));
    }
    let n_layers = header.n_layers as usize;
    let n_heads = header.n_heads as usize;
    let n_bins = bins.n_bins();
    let mut head_means = vec![None; n_layers * n_heads * n_bins];
    while let Some(entry) = reader.next_matrix() {
        let (layer, head, matrix) = entry?;
        let means = bin_means_matrix(&matrix, bins)?;
        let base = (layer * n_heads + head) * n_bins;
        head_means[base..base + n_bins].copy_from_slice(&means);
    }

    let mut layer_means = vec![None; n_layers * n_bins];
    for layer in 0..n_layers {
        for bin in 0..n_bins {
            let mut sum = 0.0f64;
            let mut count = 0usize;
            for head in 0..n_heads {
                if let Some(m) = head_means[(layer * n_heads + head) * n_bins + bin] {
                    sum += m;
                    count += 1;
                }
            }
            if count > 0 {
                layer_means[layer * n_bins + bin] = Some(sum / count as f64);
            }
        }
    }
    Ok(BinStats {
        n_layers,
        n_heads,
        n_bins,
        seq_len: bins.seq_len(),
        head_means,
        layer_means,
    })
}

/// Per-(layer, bin) difference of layer means between two models.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaTable {
    pub n_layers: usize,
    pub n_bins: usize,
    /// `values[layer * n_bins + bin]`; `None` when either side is absent.
    pub values: Vec<Option<f64>>,
}

impl DeltaTable {
    pub fn at(&self, layer: usize, bin: usize) -> Option<f64> {
        self.values[layer * self.n_bins + bin]
    }

    /// CSV with columns `layer,bin,delta`; absent cells are skipped.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("layer,bin,delta\n");
        for layer in 0..self.n_layers {
            for bin in 0..self.n_bins {
                if let Some(delta) = self.at(layer, bin) {
                    out.push_str(&format!("{layer},{bin},{delta}\n"));
                }
            }
        }
        out
    }
}

fn check_comparable(base: &BinStats, sft: &BinStats) -> Result<(), AttnError> {
    if base.n_layers != sft.n_layers
        || base.n_bins != sft.n_bins
        || base.seq_len != sft.seq_len
    {
        return Err(AttnError::BinningMismatch(format!(
            "base (layers={}, bins={}, T={}) vs sft (layers={}, bins={}, T={})",
            base.n_layers, base.n_bins, base.seq_len, sft.n_layers, sft.n_bins, sft.seq_len
        )));
    }
    Ok(())
}

/// Fine-tuned minus baseline, per (layer, bin).
pub fn delta_heatmap(base: &BinStats, sft: &BinStats) -> Result<DeltaTable, AttnError> {
    check_comparable(base, sft)?;
    let values = sft
        .layer_means
        .iter()
        .zip(&base.layer_means)
        .map(|(s, b)| match (s, b) {
            (Some(s), Some(b)) => Some(s - b),
            _ => None,
        })
        .collect();
    Ok(DeltaTable {
        n_layers: base.n_layers,
        n_bins: base.n_bins,
        values,
    })
}

/// One head's long-range attention change.
#[derive(Debug, Clone, PartialEq)]
pub struct TailDelta {
    pub layer: usize,
    pub head: usize,
    /// Tail mean of the fine-tuned model minus the baseline's.
    pub delta: f64,
}

/// Index of the first tail bin: the tail is the last `ceil(B / 4)` bins.
pub fn tail_start(n_bins: usize) -> usize {
    n_bins - n_bins.div_ceil(4)
}

fn tail_mean(stats: &BinStats, layer: usize, head: usize) -> Option<f64> {
    let start = tail_start(stats.n_bins);
    let mut sum = 0.0f64;
    let mut count = 0usize;
    for bin in start..stats.n_bins {
        if let Some(m) = stats.head_mean(layer, head, bin) {
            sum += m;
            count += 1;
        }
    }
    (count > 0).then(|| sum / count as f64)
}

/// Per-head tail-mean differences, sorted by descending delta (ties broken
/// by layer then head). Heads whose tail bins are all empty are omitted.
pub fn tail_deltas(base: &BinStats, sft: &BinStats) -> Result<Vec<TailDelta>, AttnError> {
    check_comparable(base, sft)?;
    if base.n_heads != sft.n_heads {
        return Err(AttnError::BinningMismatch(format!(
            "base has {} heads, sft has {}",
            base.n_heads, sft.n_heads
        )));
    }
    let mut out = Vec::new();
    for layer in 0..base.n_layers {
        for head in 0..base.n_heads {
            if let (Some(b), Some(s)) = (tail_mean(base, layer, head), tail_mean(sft, layer, head))
            {
                out.push(TailDelta {
                    layer,
                    head,
                    delta: s - b,
                });
            }
        }
    }
    out.sort_by(|a, b| {
        b.delta
            .partial_cmp(&a.delta)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| (a.layer, a.head).cmp(&(b.layer, b.head)))
    });
    Ok(out)
}

/// CSV with columns `layer,head,delta` in ranked order.
pub fn tail_deltas_csv(deltas: &[TailDelta]) -> String {
    let mut out = String::from("layer,head,delta\n");
    for d in deltas {
        out.push_str(&format!("{},{},{}\n", d.layer, d.head, d.delta));
    }
    out
}
