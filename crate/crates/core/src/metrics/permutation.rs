use std::collections::{BTreeMap, HashMap};

use super::align::{align_with, within_collar};
use super::assign::solve_lexicographic;
use super::{check_collar, AlignmentReport, ErrorCounts, Tokenizer};
use crate::error::{Error, Result};
use crate::segment::{Segment, SegmentList};

#[derive(Default)]
struct Interner {
    ids: HashMap<String, u32>,
}

impl Interner {
    fn id(&mut self, token: &str) -> u32 {
        if let Some(&id) = self.ids.get(token) {
            return id;
        }
        let next = self.ids.len() as u32;
        self.ids.insert(token.to_string(), next);
        next
    }
}

fn check_sessions(reference: &SegmentList, hypothesis: &SegmentList) -> Result<()> {
    let mut ids = reference.session_ids();
    ids.extend(hypothesis.session_ids());
    ids.sort();
    ids.dedup();
    if ids.len() > 1 {
        return Err(Error::MultipleSessions(ids));
    }
    Ok(())
}

/// Per speaker (sorted by label), the concatenation of `f` over that
/// speaker's segments in time order.
fn speaker_streams<T>(
    list: &SegmentList,
    mut f: impl FnMut(&Segment, &str) -> Vec<T>,
) -> Result<Vec<(String, Vec<T>)>> {
    let mut by_speaker: BTreeMap<&str, Vec<(&Segment, &str)>> = BTreeMap::new();
    for (index, seg) in list.iter().enumerate() {
        let words = seg.words.as_deref().ok_or(Error::MissingWords { index })?;
        by_speaker
            .entry(&seg.speaker)
            .or_default()
            .push((seg, words));
    }
    Ok(by_speaker
        .into_iter()
        .map(|(speaker, mut segs)| {
            segs.sort_by(|(a, aw), (b, bw)| {
                a.start
                    .total_cmp(&b.start)
                    .then(a.end.total_cmp(&b.end))
                    .then(aw.cmp(bw))
            });
            let stream = segs.into_iter().flat_map(|(s, w)| f(s, w)).collect();
            (speaker.to_string(), stream)
        })
        .collect())
}

/// Pads the speaker sets to a square problem with empty pseudo-speakers and
/// picks the speaker mapping with the fewest total errors.
fn best_mapping<T>(
    refs: &[(String, Vec<T>)],
    hyps: &[(String, Vec<T>)],
    pair: impl Fn(&[T], &[T]) -> ErrorCounts,
) -> AlignmentReport {
    let (nr, nh) = (refs.len(), hyps.len());
    let n = nr.max(nh);
    let mut counts = vec![vec![ErrorCounts::default(); n]; n];
    for (i, row) in counts.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = match (hyps.get(i), refs.get(j)) {
                (Some(h), Some(r)) => pair(&r.1, &h.1),
                (Some(h), None) => ErrorCounts::all_inserted(h.1.len()),
                (None, Some(r)) => ErrorCounts::all_deleted(r.1.len()),
                (None, None) => ErrorCounts::default(),
            };
        }
    }
    let cost: Vec<Vec<f64>> = counts
        .iter()
        .map(|row| row.iter().map(|c| c.errors() as f64).collect())
        .collect();
    let (assignment, _) = solve_lexicographic(&cost);

    let total: ErrorCounts = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| counts[i][j])
        .sum();
    let speaker_mapping = hyps
        .iter()
        .enumerate()
        .map(|(i, (label, _))| (label.clone(), refs.get(assignment[i]).map(|r| r.0.clone())))
        .collect();
    AlignmentReport {
        counts: total,
        rate: total.rate(),
        speaker_mapping,
    }
}

/// Concatenated minimum-permutation word error rate of one session.
pub fn cpwer(
    reference: &SegmentList,
    hypothesis: &SegmentList,
    tokenizer: Tokenizer,
) -> Result<AlignmentReport> {
    check_sessions(reference, hypothesis)?;
    let mut interner = Interner::default();
    let mut ids = |_: &Segment, words: &str| -> Vec<u32> {
        tokenizer
            .tokenize(words)
            .into_iter()
            .map(|t| interner.id(t))
            .collect()
    };
    let refs = speaker_streams(reference, |s, w| ids(s, w))?;
    let hyps = speaker_streams(hypothesis, |s, w| ids(s, w))?;
    Ok(best_mapping(&refs, &hyps, |r, h| {
        align_with(r.len(), h.len(), |i, j| r[i] == h[j], |_, _| true)
    }))
}

#[derive(Clone, Copy)]
struct Timed {
    token: u32,
    begin: f64,
    end: f64,
}

/// Time-constrained cpWER: words pair up only when their times agree up to
/// `collar` seconds. Word times are spread evenly over each segment.
pub fn tcpwer(
    reference: &SegmentList,
    hypothesis: &SegmentList,
    collar: f64,
    tokenizer: Tokenizer,
) -> Result<AlignmentReport> {
    check_collar(collar)?;
    check_sessions(reference, hypothesis)?;
    let mut interner = Interner::default();
    let mut timed = |seg: &Segment, words: &str| -> Vec<Timed> {
        let tokens = tokenizer.tokenize(words);
        let n = tokens.len() as f64;
        let width = seg.end - seg.start;
        tokens
            .into_iter()
            .enumerate()
            .map(|(i, t)| Timed {
                token: interner.id(t),
                begin: seg.start + i as f64 * width / n,
                end: seg.start + (i + 1) as f64 * width / n,
            })
            .collect()
    };
    let refs = speaker_streams(reference, |s, w| timed(s, w))?;
    let hyps = speaker_streams(hypothesis, |s, w| timed(s, w))?;
    Ok(best_mapping(&refs, &hyps, |r, h| {
        align_with(
            r.len(),
            h.len(),
            |i, j| r[i].token == h[j].token,
            |i, j| within_collar(r[i].begin, r[i].end, h[j].begin, h[j].end, collar),
        )
    }))
}
