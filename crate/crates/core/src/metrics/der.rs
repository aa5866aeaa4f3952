use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::assign;
use super::check_collar;
use crate::error::{Error, Result};
use crate::segment::{Interval, SegmentList};
use crate::timeline::{self, Labelled};

/// Diarization error components, in seconds of scored time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerReport {
    pub missed: f64,
    pub false_alarm: f64,
    pub confusion: f64,
    /// Reference speech summed over speakers, so overlapped speech counts
    /// once per active speaker.
    pub total_ref_speech: f64,
    /// `None` when there is no scored reference speech.
    pub der: Option<f64>,
    pub scored_time: f64,
    /// Hypothesis speaker to the reference speaker it was mapped to, if the
    /// two overlap anywhere in scored time.
    pub speaker_mapping: BTreeMap<String, Option<String>>,
}

impl DerReport {
    pub fn error_time(&self) -> f64 {
        self.missed + self.false_alarm + self.confusion
    }
}

fn labelled(list: &SegmentList, speakers: &[String]) -> Vec<Labelled> {
    list.iter()
        .map(|s| Labelled {
            start: s.start,
            end: s.end,
            label: speakers.binary_search(&s.speaker).expect("speaker indexed"),
        })
        .collect()
}

/// Diarization error rate of a single session.
///
/// Scored time is the UEM (or, without one, the span from the earliest to
/// the latest segment of either side) minus `collar` seconds on both sides
/// of every reference boundary. Hypothesis speakers are mapped one-to-one
/// onto reference speakers so that total overlap is maximal.
pub fn der(
    reference: &SegmentList,
    hypothesis: &SegmentList,
    collar: f64,
    uem: Option<&[Interval]>,
) -> Result<DerReport> {
    check_collar(collar)?;
    let mut sessions = reference.session_ids();
    sessions.extend(hypothesis.session_ids());
    sessions.sort();
    sessions.dedup();
    if sessions.len() > 1 {
        return Err(Error::MultipleSessions(sessions));
    }
    reference.validate()?;
    hypothesis.validate()?;

    let ref_speakers = reference.speakers();
    let hyp_speakers = hypothesis.speakers();

    let base: Vec<Interval> = match uem {
        Some(regions) => regions.to_vec(),
        None => {
            let all = reference.iter().chain(hypothesis.iter());
            let lo = all.clone().map(|s| s.start).fold(f64::INFINITY, f64::min);
            let hi = all.map(|s| s.end).fold(f64::NEG_INFINITY, f64::max);
            if lo < hi {
                vec![Interval::new(lo, hi)]
            } else {
                Vec::new()
            }
        }
    };
    let holes: Vec<Interval> = if collar > 0.0 {
        reference
            .iter()
            .flat_map(|s| [s.start, s.end])
            .map(|b| Interval::new(b - collar, b + collar))
            .collect()
    } else {
        Vec::new()
    };
    let scored = timeline::subtract(&base, &holes);
    let scored_track: Vec<Labelled> = scored
        .iter()
        .map(|iv| Labelled {
            start: iv.start,
            end: iv.end,
            label: 0,
        })
        .collect();

    let ref_track = labelled(reference, &ref_speakers);
    let hyp_track = labelled(hypothesis, &hyp_speakers);
    let slices: Vec<timeline::Slice> = timeline::sweep(&[&ref_track, &hyp_track, &scored_track])
        .into_iter()
        .filter(|s| !s.active[2].is_empty())
        .collect();

    let (nr, nh) = (ref_speakers.len(), hyp_speakers.len());
    let mut overlap = vec![vec![0.0; nr]; nh];
    for slice in &slices {
        let dt = slice.duration();
        for &h in &slice.active[1] {
            for &r in &slice.active[0] {
                overlap[h][r] += dt;
            }
        }
    }
    let n = nr.max(nh);
    let cost: Vec<Vec<f64>> = (0..n)
        .map(|h| {
            (0..n)
                .map(|r| match (h < nh, r < nr) {
                    (true, true) => -overlap[h][r],
                    _ => 0.0,
                })
                .collect()
        })
        .collect();
    let (assignment, _) = assign::solve(&cost);
    let mapped: Vec<Option<usize>> = (0..nh)
        .map(|h| {
            let r = assignment[h];
            (r < nr && overlap[h][r] > 0.0).then_some(r)
        })
        .collect();

    let (mut missed, mut false_alarm, mut confusion, mut total) = (0.0, 0.0, 0.0, 0.0);
    for slice in &slices {
        let dt = slice.duration();
        let (refs, hyps) = (&slice.active[0], &slice.active[1]);
        let correct = hyps
            .iter()
            .filter(|&&h| mapped[h].is_some_and(|r| refs.binary_search(&r).is_ok()))
            .count();
        let (nref, nhyp) = (refs.len(), hyps.len());
        missed += nref.saturating_sub(nhyp) as f64 * dt;
        false_alarm += nhyp.saturating_sub(nref) as f64 * dt;
        confusion += (nref.min(nhyp) - correct) as f64 * dt;
        total += nref as f64 * dt;
    }

    let speaker_mapping = hyp_speakers
        .iter()
        .zip(&mapped)
        .map(|(h, r)| (h.clone(), r.map(|r| ref_speakers[r].clone())))
        .collect();
    Ok(DerReport {
        missed,
        false_alarm,
        confusion,
        total_ref_speech: total,
        der: (total > 0.0).then(|| (missed + false_alarm + confusion) / total),
        scored_time: timeline::total_duration(&scored),
        speaker_mapping,
    })
}
