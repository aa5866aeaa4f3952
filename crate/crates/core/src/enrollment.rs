//! Speaker/time enrollment triplets and the prompt records built from them.
//!
//! A triplet tells the decoder *who* (an embedding) spoke *when* (start and
//! end as fractions of the chunk). A [`PromptStructure`] pairs an
//! instruction with an ordered list of triplets and one label per triplet.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segment::{EmbeddingTable, Interval, Segment, SegmentList, SpeakerEmbedding};

/// Frames per second used for time normalization (10 ms hop).
pub const DEFAULT_FRAME_RATE: f64 = 100.0;

pub const DEFAULT_INSTRUCTION: &str = "Transcribe what each enrolled speaker says within the \
given time span. Answer with one line per triplet, in the order the triplets are given.";

/// Frame positions closer than this to the next frame boundary snap to it,
/// so decimal times such as 0.29 s land on frame 29 and not 28.
const FRAME_SNAP: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triplet {
    pub embedding: SpeakerEmbedding,
    pub start_norm: f64,
    pub end_norm: f64,
    /// The segment this triplet was built from, before clipping.
    pub source_segment: Segment,
}

impl Triplet {
    pub fn speaker(&self) -> &str {
        &self.source_segment.speaker
    }
}

fn frame_index(offset: f64, frame_rate: f64) -> f64 {
    (offset * frame_rate + FRAME_SNAP).floor()
}

/// Number of frames spanned by a window.
pub fn window_frames(window: Interval, frame_rate: f64) -> Result<u64> {
    if !(window.end > window.start) || !window.start.is_finite() || !window.end.is_finite() {
        return Err(Error::EmptyWindow(window.start, window.end));
    }
    if !(frame_rate > 0.0) || !frame_rate.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "frame rate must be positive, got {frame_rate}"
        )));
    }
    let frames = ((window.end - window.start) * frame_rate).round();
    if frames < 1.0 {
        return Err(Error::EmptyWindow(window.start, window.end));
    }
    Ok(frames as u64)
}

/// Builds one triplet per segment overlapping `window`.
///
/// Segments are clipped to the window, their boundaries converted to frame
/// indices (floor) and divided by the window's frame count. Pieces shorter
/// than one frame are dropped with a warning. The result is ordered by
/// normalized start.
pub fn build_triplets(
    segments: &SegmentList,
    embeddings: &EmbeddingTable,
    window: Interval,
    frame_rate: f64,
) -> Result<Vec<Triplet>> {
    let total = window_frames(window, frame_rate)? as f64;
    let mut triplets = Vec::with_capacity(segments.len());
    for seg in segments {
        let embedding = embeddings
            .get(&seg.speaker)
            .ok_or_else(|| Error::MissingEmbedding(seg.speaker.clone()))?;
        let start = seg.start.max(window.start);
        let end = seg.end.min(window.end);
        if end <= start {
            continue;
        }
        let start_frame = frame_index(start - window.start, frame_rate).clamp(0.0, total);
        let end_frame = frame_index(end - window.start, frame_rate).clamp(0.0, total);
        if end_frame <= start_frame {
            log::warn!(
                "dropping {} [{:.3}, {:.3}]: shorter than one frame inside the window",
                seg.speaker,
                seg.start,
                seg.end
            );
            continue;
        }
        triplets.push(Triplet {
            embedding: embedding.clone(),
            start_norm: start_frame / total,
            end_norm: end_frame / total,
            source_segment: seg.clone(),
        });
    }
    triplets.sort_by(|a, b| {
        a.start_norm
            .total_cmp(&b.start_norm)
            .then(a.end_norm.total_cmp(&b.end_norm))
    });
    Ok(triplets)
}

/// Element-wise mean of utterance-level embeddings.
///
/// Each component is summed in ascending order, so the result does not
/// depend on the order of the input list.
pub fn mean_pool_embedding(utterances: &[SpeakerEmbedding]) -> Result<SpeakerEmbedding> {
    let first = utterances.first().ok_or(Error::EmptyEmbeddings)?;
    let dim = first.dim();
    if let Some(bad) = utterances.iter().find(|e| e.dim() != dim) {
        return Err(Error::DimMismatch {
            expected: dim,
            got: bad.dim(),
        });
    }
    let n = utterances.len() as f64;
    let mut column = Vec::with_capacity(utterances.len());
    let values = (0..dim)
        .map(|d| {
            column.clear();
            column.extend(utterances.iter().map(|e| e.values[d]));
            column.sort_by(f64::total_cmp);
            column.iter().sum::<f64>() / n
        })
        .collect();
    SpeakerEmbedding::new(values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptStructure {
    pub instruction: String,
    pub triplet_slots: Vec<Triplet>,
    /// One transcript label per triplet, in the same order.
    pub labels: Vec<String>,
}

impl PromptStructure {
    pub fn len(&self) -> usize {
        self.triplet_slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplet_slots.is_empty()
    }

    /// One-line JSON training record.
    pub fn to_record(&self) -> String {
        serde_json::to_string(self).expect("prompt serializes")
    }

    pub fn from_record(line: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }
}

pub fn assemble_prompt(
    instruction: impl Into<String>,
    triplets: Vec<Triplet>,
    labels: Vec<String>,
) -> Result<PromptStructure> {
    if triplets.len() != labels.len() {
        return Err(Error::LengthMismatch {
            triplets: triplets.len(),
            labels: labels.len(),
        });
    }
    Ok(PromptStructure {
        instruction: instruction.into(),
        triplet_slots: triplets,
        labels,
    })
}

/// Serializes prompts as JSON lines, one record per chunk.
pub fn write_records(prompts: &[PromptStructure]) -> String {
    prompts.iter().map(|p| p.to_record() + "\n").collect()
}

/// Reads JSON-lines prompt records. Errors carry the 1-based line number.
pub fn read_records(
    text: &str,
) -> std::result::Result<Vec<PromptStructure>, (usize, serde_json::Error)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| PromptStructure::from_record(l).map_err(|e| (i + 1, e)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table(speakers: &[&str]) -> EmbeddingTable {
        speakers
            .iter()
            .enumerate()
            .map(|(i, s)| {
                (
                    s.to_string(),
                    SpeakerEmbedding::new(vec![i as f64, 1.0]).unwrap(),
                )
            })
            .collect()
    }

    fn seg(spk: &str, s: f64, e: f64) -> Segment {
        Segment::new("s1", spk, s, e, None).unwrap()
    }

    fn norms(t: &[Triplet]) -> Vec<(f64, f64)> {
        t.iter().map(|t| (t.start_norm, t.end_norm)).collect()
    }

    #[test]
    fn normalizes_by_frame_count() {
        let segs = SegmentList::new(vec![seg("A", 3.0, 6.0)]);
        let t = build_triplets(&segs, &table(&["A"]), Interval::new(0.0, 30.0), 100.0).unwrap();
        assert_eq!(norms(&t), vec![(0.1, 0.2)]);
    }

    #[test]
    fn clamps_past_window_end() {
        let segs = SegmentList::new(vec![seg("A", 20.0, 45.0)]);
        let t = build_triplets(&segs, &table(&["A"]), Interval::new(0.0, 30.0), 100.0).unwrap();
        assert_eq!(t[0].end_norm, 1.0);
        assert_eq!(t[0].source_segment.end, 45.0);
    }

    #[test]
    fn full_window() {
        let segs = SegmentList::new(vec![seg("A", 10.0, 40.0)]);
        let t = build_triplets(&segs, &table(&["A"]), Interval::new(10.0, 40.0), 100.0).unwrap();
        assert_eq!(norms(&t), vec![(0.0, 1.0)]);
    }

    #[test]
    fn decimal_times_hit_their_frame() {
        let segs = SegmentList::new(vec![seg("A", 0.29, 0.57)]);
        let t = build_triplets(&segs, &table(&["A"]), Interval::new(0.0, 1.0), 100.0).unwrap();
        assert_eq!(norms(&t), vec![(0.29, 0.57)]);
    }

    #[test]
    fn sub_frame_pieces_are_dropped() {
        let segs = SegmentList::new(vec![seg("A", 1.0, 1.004), seg("A", 2.0, 3.0)]);
        let t = build_triplets(&segs, &table(&["A"]), Interval::new(0.0, 10.0), 100.0).unwrap();
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn errors() {
        let segs = SegmentList::new(vec![seg("B", 1.0, 2.0)]);
        assert_eq!(
            build_triplets(&segs, &table(&["A"]), Interval::new(0.0, 10.0), 100.0),
            Err(Error::MissingEmbedding("B".into()))
        );
        assert!(matches!(
            build_triplets(&segs, &table(&["B"]), Interval::new(5.0, 5.0), 100.0),
            Err(Error::EmptyWindow(..))
        ));
    }

    #[test]
    fn ordered_by_start() {
        let segs = SegmentList::new(vec![
            seg("B", 5.0, 6.0),
            seg("A", 1.0, 2.0),
            seg("A", 3.0, 9.0),
        ]);
        let t =
            build_triplets(&segs, &table(&["A", "B"]), Interval::new(0.0, 10.0), 100.0).unwrap();
        assert_eq!(norms(&t), vec![(0.1, 0.2), (0.3, 0.9), (0.5, 0.6)]);
    }

    #[test]
    fn pooling() {
        let one = SpeakerEmbedding::new(vec![0.3, -1.5]).unwrap();
        assert_eq!(
            mean_pool_embedding(std::slice::from_ref(&one)).unwrap(),
            one
        );
        let pooled = mean_pool_embedding(&[
            SpeakerEmbedding::new(vec![1.0, 1.0]).unwrap(),
            SpeakerEmbedding::new(vec![3.0, 3.0]).unwrap(),
        ])
        .unwrap();
        assert_eq!(pooled.values, vec![2.0, 2.0]);
        assert_eq!(mean_pool_embedding(&[]), Err(Error::EmptyEmbeddings));
        assert!(matches!(
            mean_pool_embedding(&[one, SpeakerEmbedding::new(vec![1.0]).unwrap()]),
            Err(Error::DimMismatch {
                expected: 2,
                got: 1
            })
        ));
    }

    #[test]
    fn prompt_with_three_sentences_from_two_speakers() {
        let segs = SegmentList::new(vec![
            seg("A", 0.0, 2.0),
            seg("B", 1.5, 4.0),
            seg("A", 4.5, 6.0),
        ]);
        let t = build_triplets(&segs, &table(&["A", "B"]), Interval::new(0.0, 6.0), 100.0).unwrap();
        let labels = vec!["first".to_string(), "second".into(), "third".into()];
        let p = assemble_prompt(DEFAULT_INSTRUCTION, t, labels).unwrap();
        assert_eq!(p.len(), 3);
        let speakers: Vec<&str> = p.triplet_slots.iter().map(Triplet::speaker).collect();
        assert_eq!(speakers, ["A", "B", "A"]);
        assert_eq!(PromptStructure::from_record(&p.to_record()).unwrap(), p);

        let empty = assemble_prompt("x", vec![], vec![]).unwrap();
        assert!(empty.is_empty());
        assert!(matches!(
            assemble_prompt("x", vec![], vec!["orphan".into()]),
            Err(Error::LengthMismatch {
                triplets: 0,
                labels: 1
            })
        ));
    }

    #[test]
    fn jsonl_records() {
        let p = assemble_prompt("x", vec![], vec![]).unwrap();
        let text = write_records(&[p.clone(), p.clone()]);
        assert_eq!(read_records(&text).unwrap(), vec![p.clone(), p]);
        assert_eq!(read_records("{}\n{bad").unwrap_err().0, 1);
    }

    proptest! {
        #[test]
        fn bounds_and_shift_invariance(
            quarters in prop::collection::vec((0u32..200, 1u32..80), 1..8),
            shift in 0u32..500,
        ) {
            // Quarter-second grid and integer shifts keep the arithmetic exact.
            let window = Interval::new(0.0, 50.0);
            let segs: SegmentList = quarters
                .iter()
                .map(|&(s, d)| seg("A", s as f64 / 4.0, (s + d) as f64 / 4.0))
                .collect();
            let base = build_triplets(&segs, &table(&["A"]), window, 100.0).unwrap();
            for t in &base {
                prop_assert!(0.0 <= t.start_norm && t.start_norm < t.end_norm && t.end_norm <= 1.0);
            }
            let dt = shift as f64;
            let moved: SegmentList = segs
                .iter()
                .map(|s| seg("A", s.start + dt, s.end + dt))
                .collect();
            let shifted = build_triplets(
                &moved,
                &table(&["A"]),
                Interval::new(window.start + dt, window.end + dt),
                100.0,
            )
            .unwrap();
            prop_assert_eq!(norms(&base), norms(&shifted));
        }

        #[test]
        fn pooling_ignores_order(
            raw in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 3), 1..8),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let embs: Vec<SpeakerEmbedding> = raw.into_iter().map(|v| SpeakerEmbedding::new(v).unwrap()).collect();
            let mut shuffled = embs.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = mean_pool_embedding(&embs).unwrap();
            let b = mean_pool_embedding(&shuffled).unwrap();
            prop_assert!(a.bit_eq(&b));
        }
    }
}
