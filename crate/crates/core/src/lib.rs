//! Diarization-aware multi-speaker ASR toolkit.
//!
//! Builds speaker/time enrollment triplets from diarization output, plans
//! long recordings into constraint-respecting chunks, simulates and augments
//! training mixtures, and scores systems with cpWER, tcpWER and DER. A small
//! double-precision reference of gated cross-attention fusion is included
//! with a gradient checker.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chunker;
pub mod enrollment;
pub mod error;
pub mod formats;
pub mod fusion;
pub mod metrics;
pub mod segment;
pub mod simkit;
pub mod timeline;

pub use error::{Error, Result};
pub use segment::{EmbeddingTable, Interval, Segment, SegmentList, SpeakerEmbedding};
