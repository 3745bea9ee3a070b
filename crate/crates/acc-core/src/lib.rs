//! Toolkit for turning multi-turn agent trajectories (search, software
//! engineering, SQL) into single-shot long-context question-answering
//! training records.
//!
//! The pipeline is: parse trajectory JSONL ([`trajectory`]), extract gold and
//! distractor evidence per agent type ([`evidence`]), pack the evidence into a
//! token budget with a seeded shuffle ([`compile`]), optionally attach a
//! verified rationale from a teacher model ([`verify`]), and emit dataset
//! records plus a manifest and length histogram ([`dataset`]).
//!
//! Side-by-side with the data path there are analysis tools: supervision-mask
//! construction for the two training modes ([`mask`]), attention-by-distance
//! summaries ([`attention`]), expert-routing frequency summaries
//! ([`routing`]), and train/benchmark contamination checks ([`decontam`]).

pub mod attention;
pub mod compile;
pub mod dataset;
pub mod decontam;
pub mod evidence;
pub mod mask;
pub mod patch;
pub mod pipeline;
pub mod rng;
pub mod routing;
pub mod tokens;
pub mod trajectory;
pub mod verify;

pub use compile::{CompileError, CompileOptions, CompiledExample, DistractorPolicy};
pub use dataset::{DatasetRecord, LengthHistogram, Manifest, Provenance};
pub use decontam::{DecontamError, DecontamReport, EmbeddingRecord, QuestionRecord};
pub use evidence::{EvidenceError, EvidenceKind, EvidencePiece, EvidenceRole, EvidenceSet};
pub use mask::{MaskMode, SegmentLabel, SegmentedChat, SupervisionMask};
pub use pipeline::{PipelineConfig, PipelineError, PipelineOutcome};
pub use rng::SplitMix64;
pub use tokens::TokenCounter;
pub use trajectory::{AgentType, Strictness, Trajectory, TrajectoryError};
pub use verify::{TeacherClient, TeacherError, VerificationResult};

/// Version string recorded in emitted manifests.
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");
