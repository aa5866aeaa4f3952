//! Chunk planning for long-form inference.
//!
//! Long segments are first cut into pieces no longer than the chunk
//! duration. Pieces are then packed greedily, in temporal order, into chunks
//! that respect the duration, total-segment and per-speaker limits. Every
//! chunk is enrolled against the same per-speaker embeddings so speakers stay
//! consistent across chunk boundaries.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::enrollment::{build_triplets, Triplet};
use crate::error::{Error, Result};
use crate::segment::{EmbeddingTable, Interval, Segment, SegmentList};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChunkConfig {
    pub max_chunk_duration: f64,
    pub max_total_segments: usize,
    pub max_segments_per_speaker: usize,
}

impl ChunkConfig {
    /// Ten segments per chunk, at most four from any one speaker.
    pub const ALIMEETING: ChunkConfig = ChunkConfig {
        max_chunk_duration: 30.0,
        max_total_segments: 10,
        max_segments_per_speaker: 4,
    };

    /// Eight segments per chunk, at most six from any one speaker.
    pub const MLC_SLM: ChunkConfig = ChunkConfig {
        max_chunk_duration: 30.0,
        max_total_segments: 8,
        max_segments_per_speaker: 6,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.max_chunk_duration > 0.0) || !self.max_chunk_duration.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "max chunk duration must be positive, got {}",
                self.max_chunk_duration
            )));
        }
        if self.max_total_segments == 0 || self.max_segments_per_speaker == 0 {
            return Err(Error::InvalidConfig(
                "segment limits must be positive".into(),
            ));
        }
        if self.max_segments_per_speaker > self.max_total_segments {
            return Err(Error::InvalidConfig(format!(
                "per-speaker limit {} exceeds total limit {}",
                self.max_segments_per_speaker, self.max_total_segments
            )));
        }
        Ok(())
    }
}

impl Default for ChunkConfig {
    fn default() -> Self {
        Self::ALIMEETING
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub session_id: String,
    pub window: Interval,
    pub segments: Vec<Segment>,
    pub triplets: Vec<Triplet>,
}

impl Chunk {
    pub fn speaker_counts(&self) -> BTreeMap<&str, usize> {
        let mut counts = BTreeMap::new();
        for seg in &self.segments {
            *counts.entry(seg.speaker.as_str()).or_insert(0) += 1;
        }
        counts
    }

    /// Checks every bound of `cfg`. Durations get a 1e-9 s allowance for
    /// the floating-point cut points of split segments.
    pub fn satisfies(&self, cfg: &ChunkConfig) -> bool {
        self.window.duration() <= cfg.max_chunk_duration + 1e-9
            && self.segments.len() <= cfg.max_total_segments
            && self
                .speaker_counts()
                .values()
                .all(|&n| n <= cfg.max_segments_per_speaker)
            && self
                .segments
                .iter()
                .all(|s| s.start >= self.window.start && s.end <= self.window.end)
    }
}

/// Cuts every segment longer than `max_dur` at multiples of `max_dur` from
/// its start. Speaker, session and words are copied to each piece.
pub fn split_long_segments(segs: &SegmentList, max_dur: f64) -> SegmentList {
    assert!(max_dur > 0.0, "max_dur must be positive");
    let mut out = Vec::with_capacity(segs.len());
    for seg in segs {
        let mut pieces = ((seg.end - seg.start) / max_dur).ceil().max(1.0) as usize;
        // Guard against a rounding-induced empty tail piece.
        while pieces > 1 && seg.start + (pieces - 1) as f64 * max_dur >= seg.end {
            pieces -= 1;
        }
        for k in 0..pieces {
            let start = seg.start + k as f64 * max_dur;
            let end = if k + 1 == pieces {
                seg.end
            } else {
                seg.start + (k + 1) as f64 * max_dur
            };
            out.push(Segment {
                start,
                end,
                ..seg.clone()
            });
        }
    }
    SegmentList::new(out)
}

fn temporal_order(a: &Segment, b: &Segment) -> Ordering {
    a.start
        .total_cmp(&b.start)
        .then(a.end.total_cmp(&b.end))
        .then_with(|| a.speaker.cmp(&b.speaker))
}

struct OpenChunk {
    window: Interval,
    segments: Vec<Segment>,
    per_speaker: BTreeMap<String, usize>,
}

impl OpenChunk {
    fn new(seg: Segment) -> Self {
        let mut per_speaker = BTreeMap::new();
        per_speaker.insert(seg.speaker.clone(), 1);
        Self {
            window: seg.interval(),
            segments: vec![seg],
            per_speaker,
        }
    }

    fn admits(&self, seg: &Segment, cfg: &ChunkConfig) -> bool {
        let start = self.window.start.min(seg.start);
        let end = self.window.end.max(seg.end);
        end - start <= cfg.max_chunk_duration
            && self.segments.len() < cfg.max_total_segments
            && self.per_speaker.get(&seg.speaker).copied().unwrap_or(0)
                < cfg.max_segments_per_speaker
    }

    fn push(&mut self, seg: Segment) {
        self.window.start = self.window.start.min(seg.start);
        self.window.end = self.window.end.max(seg.end);
        *self.per_speaker.entry(seg.speaker.clone()).or_insert(0) += 1;
        self.segments.push(seg);
    }
}

/// Greedy packing of one session's (already split) segments.
fn pack(mut segs: Vec<Segment>, cfg: &ChunkConfig) -> Vec<(Interval, Vec<Segment>)> {
    segs.sort_by(temporal_order);
    let mut done = Vec::new();
    let mut open: Option<OpenChunk> = None;
    for seg in segs {
        match open.as_mut() {
            Some(chunk) if chunk.admits(&seg, cfg) => chunk.push(seg),
            _ => {
                if let Some(chunk) = open.replace(OpenChunk::new(seg)) {
                    done.push((chunk.window, chunk.segments));
                }
            }
        }
    }
    if let Some(chunk) = open {
        done.push((chunk.window, chunk.segments));
    }
    done
}

/// Splits, packs and enrolls every session in `segs`. Sessions are planned
/// independently and emitted in session-id order.
pub fn plan_chunks(
    segs: &SegmentList,
    cfg: &ChunkConfig,
    embeddings: &EmbeddingTable,
    frame_rate: f64,
) -> Result<Vec<Chunk>> {
    cfg.validate()?;
    let split = split_long_segments(segs, cfg.max_chunk_duration);
    let mut chunks = Vec::new();
    for (session_id, session) in split.by_session() {
        for (window, members) in pack(session.segments, cfg) {
            let list = SegmentList::new(members);
            let triplets = build_triplets(&list, embeddings, window, frame_rate)?;
            chunks.push(Chunk {
                session_id: session_id.clone(),
                window,
                segments: list.segments,
                triplets,
            });
        }
    }
    Ok(chunks)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub covered: bool,
    /// Split input segments absent from every chunk.
    pub missing: usize,
    /// Chunk segments with no matching split input segment.
    pub unexpected: usize,
}

fn multiset_key(s: &Segment) -> (String, String, u64, u64, Option<String>) {
    (
        s.session_id.clone(),
        s.speaker.clone(),
        s.start.to_bits(),
        s.end.to_bits(),
        s.words.clone(),
    )
}

/// Compares the multiset of chunk segments against the split input.
pub fn chunk_coverage_check(input: &SegmentList, chunks: &[Chunk], max_dur: f64) -> CoverageReport {
    let mut expected: Vec<_> = split_long_segments(input, max_dur)
        .iter()
        .map(multiset_key)
        .collect();
    let mut actual: Vec<_> = chunks
        .iter()
        .flat_map(|c| c.segments.iter().map(multiset_key))
        .collect();
    expected.sort();
    actual.sort();

    let (mut i, mut j, mut missing, mut unexpected) = (0, 0, 0, 0);
    while i < expected.len() || j < actual.len() {
        match (expected.get(i), actual.get(j)) {
            (Some(e), Some(a)) if e == a => {
                i += 1;
                j += 1;
            }
            (Some(e), Some(a)) if e < a => {
                missing += 1;
                i += 1;
            }
            (Some(_), None) => {
                missing += 1;
                i += 1;
            }
            _ => {
                unexpected += 1;
                j += 1;
            }
        }
    }
    CoverageReport {
        covered: missing == 0 && unexpected == 0,
        missing,
        unexpected,
    }
}
