//! Shared value types: speaker-attributed segments and speaker embeddings.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One speaker-attributed time interval, in seconds.
///
/// `words` is `None` for pure diarization output (RTTM) and `Some` for
/// transcripts, where an empty string is a valid (silent) transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub session_id: String,
    pub speaker: String,
    pub start: f64,
    pub end: f64,
    pub words: Option<String>,
}

impl Segment {
    pub fn new(
        session_id: impl Into<String>,
        speaker: impl Into<String>,
        start: f64,
        end: f64,
        words: Option<String>,
    ) -> Result<Self> {
        let seg = Self {
            session_id: session_id.into(),
            speaker: speaker.into(),
            start,
            end,
            words,
        };
        seg.validate()?;
        Ok(seg)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.start.is_finite() || !self.end.is_finite() {
            return Err(Error::InvalidSegment(format!(
                "non-finite time [{}, {}]",
                self.start, self.end
            )));
        }
        if self.start < 0.0 {
            return Err(Error::InvalidSegment(format!(
                "negative start {}",
                self.start
            )));
        }
        if self.end <= self.start {
            return Err(Error::InvalidSegment(format!(
                "end {} is not after start {}",
                self.end, self.start
            )));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    pub fn interval(&self) -> Interval {
        Interval::new(self.start, self.end)
    }
}

/// Closed time interval in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

impl Interval {
    pub const fn new(start: f64, end: f64) -> Self {
        Self { start, end }
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// Ordered list of segments, possibly spanning several sessions.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SegmentList {
    pub segments: Vec<Segment>,
}

impl SegmentList {
    pub fn new(segments: Vec<Segment>) -> Self {
        Self { segments }
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Segment> {
        self.segments.iter()
    }

    /// Sorted, de-duplicated session ids.
    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.segments.iter().map(|s| s.session_id.clone()).collect();
        ids.sort();
        ids.dedup();
        ids
    }

    /// Sorted, de-duplicated speaker labels.
    pub fn speakers(&self) -> Vec<String> {
        let mut spk: Vec<String> = self.segments.iter().map(|s| s.speaker.clone()).collect();
        spk.sort();
        spk.dedup();
        spk
    }

    /// Splits by session id. Within a session the original order is kept.
    pub fn by_session(&self) -> BTreeMap<String, SegmentList> {
        let mut out: BTreeMap<String, SegmentList> = BTreeMap::new();
        for seg in &self.segments {
            out.entry(seg.session_id.clone())
                .or_default()
                .segments
                .push(seg.clone());
        }
        out
    }

    /// Splits by speaker label. Within a speaker the original order is kept.
    pub fn by_speaker(&self) -> BTreeMap<String, SegmentList> {
        let mut out: BTreeMap<String, SegmentList> = BTreeMap::new();
        for seg in &self.segments {
            out.entry(seg.speaker.clone())
                .or_default()
                .segments
                .push(seg.clone());
        }
        out
    }

    /// Returns the single session id, or an error when several are mixed.
    /// An empty list has no session and yields `None`.
    pub fn single_session(&self) -> Result<Option<String>> {
        let ids = self.session_ids();
        match ids.len() {
            0 => Ok(None),
            1 => Ok(ids.into_iter().next()),
            _ => Err(Error::MultipleSessions(ids)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.segments.iter().try_for_each(Segment::validate)
    }
}

impl FromIterator<Segment> for SegmentList {
    fn from_iter<I: IntoIterator<Item = Segment>>(iter: I) -> Self {
        Self::new(iter.into_iter().collect())
    }
}

impl IntoIterator for SegmentList {
    type Item = Segment;
    type IntoIter = std::vec::IntoIter<Segment>;

    fn into_iter(self) -> Self::IntoIter {
        self.segments.into_iter()
    }
}

impl<'a> IntoIterator for &'a SegmentList {
    type Item = &'a Segment;
    type IntoIter = std::slice::Iter<'a, Segment>;

    fn into_iter(self) -> Self::IntoIter {
        self.segments.iter()
    }
}

/// Fixed-length speaker representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpeakerEmbedding {
    pub values: Vec<f64>,
}

impl SpeakerEmbedding {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::DimMismatch {
                expected: 1,
                got: 0,
            });
        }
        Ok(Self { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Bitwise equality, treating `-0.0` and `0.0` as different.
    pub fn bit_eq(&self, other: &Self) -> bool {
        self.values.len() == other.values.len()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Speaker label to embedding lookup.
pub type EmbeddingTable = BTreeMap<String, SpeakerEmbedding>;
