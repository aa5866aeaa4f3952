use crate::chunker::Chunk;
use crate::metrics::{tokenize, Tokenizer};
use crate::segment::{Segment, SegmentList};

const CONTAIN_EPS: f64 = 1e-9;

fn containing<'a>(
    reference: &'a SegmentList,
    session: &str,
    piece: &Segment,
) -> Option<&'a Segment> {
    reference.iter().find(|r| {
        r.session_id == session
            && r.speaker == piece.speaker
            && r.words.is_some()
            && r.start <= piece.start + CONTAIN_EPS
            && piece.end <= r.end + CONTAIN_EPS
    })
}

/// Words of `reference` whose time falls inside `[start, end)`. Token times
/// come from an equal partition of the reference segment; a token belongs
/// to the piece holding its midpoint.
fn words_in(reference: &Segment, start: f64, end: f64, tok: Tokenizer) -> String {
    let tokens = tokenize(reference.words.as_deref().unwrap_or(""), tok);
    let width = reference.duration() / tokens.len().max(1) as f64;
    let kept: Vec<&str> = tokens
        .iter()
        .enumerate()
        .filter(|(i, _)| {
            let mid = reference.start + (*i as f64 + 0.5) * width;
            start <= mid && mid < end
        })
        .map(|(_, t)| *t)
        .collect();
    match tok {
        Tokenizer::Word => kept.join(" "),
        Tokenizer::Char => kept.concat(),
    }
}

/// Perfect transcription of each enrolled speaker in `chunk`, read off the
/// reference. Slot `i` holds the words of the reference segment behind
/// triplet `i` that fall inside the triplet's span; the label is empty when
/// no reference segment covers it.
pub fn oracle_asr(chunk: &Chunk, reference: &SegmentList, tok: Tokenizer) -> Vec<String> {
    chunk
        .triplets
        .iter()
        .map(|t| {
            let piece = &t.source_segment;
            let start = piece.start.max(chunk.window.start);
            let end = piece.end.min(chunk.window.end);
            containing(reference, &chunk.session_id, piece)
                .map(|r| words_in(r, start, end, tok))
                .unwrap_or_default()
        })
        .collect()
}

/// Hypothesis segments assembled from per-triplet outputs of every chunk:
/// one segment per triplet, at the triplet's span and attributed to its
/// enrolled speaker.
pub fn oracle_hypothesis(chunks: &[Chunk], outputs: &[Vec<String>]) -> SegmentList {
    let mut segs = Vec::new();
    for (chunk, labels) in chunks.iter().zip(outputs) {
        for (t, words) in chunk.triplets.iter().zip(labels) {
            segs.push(Segment {
                session_id: chunk.session_id.clone(),
                speaker: t.speaker().to_string(),
                start: t.source_segment.start.max(chunk.window.start),
                end: t.source_segment.end.min(chunk.window.end),
                words: Some(words.clone()),
            });
        }
    }
    SegmentList::new(segs)
}
