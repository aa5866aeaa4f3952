//! Interval-set arithmetic and a boundary-event sweep.

use crate::segment::Interval;

/// Sorted, disjoint union of `intervals`. Touching intervals are merged and
/// empty ones dropped.
pub fn merge(intervals: &[Interval]) -> Vec<Interval> {
    let mut sorted: Vec<Interval> = intervals
        .iter()
        .copied()
        .filter(|iv| iv.end > iv.start)
        .collect();
    sorted.sort_by(|a, b| a.start.total_cmp(&b.start).then(a.end.total_cmp(&b.end)));
    let mut out: Vec<Interval> = Vec::with_capacity(sorted.len());
    for iv in sorted {
        match out.last_mut() {
            Some(last) if iv.start <= last.end => last.end = last.end.max(iv.end),
            _ => out.push(iv),
        }
    }
    out
}

/// `base \ holes`, both given as arbitrary interval lists.
pub fn subtract(base: &[Interval], holes: &[Interval]) -> Vec<Interval> {
    let base = merge(base);
    let holes = merge(holes);
    let mut out = Vec::new();
    let mut h = 0;
    for iv in base {
        let mut cursor = iv.start;
        while h < holes.len() && holes[h].end <= cursor {
            h += 1;
        }
        let mut k = h;
        while k < holes.len() && holes[k].start < iv.end {
            if holes[k].start > cursor {
                out.push(Interval::new(cursor, holes[k].start));
            }
            cursor = cursor.max(holes[k].end);
            k += 1;
        }
        if cursor < iv.end {
            out.push(Interval::new(cursor, iv.end));
        }
    }
    out
}

pub fn total_duration(intervals: &[Interval]) -> f64 {
    intervals.iter().map(Interval::duration).sum()
}

/// An interval labelled with a small integer (speaker index, region id).
#[derive(Debug, Clone, Copy)]
pub struct Labelled {
    pub start: f64,
    pub end: f64,
    pub label: usize,
}

/// A maximal stretch of time during which no track changes state.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice {
    pub start: f64,
    pub end: f64,
    /// Per track: sorted labels active throughout the slice.
    pub active: Vec<Vec<usize>>,
}

impl Slice {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// Sweeps all interval boundaries and returns the slices of positive length
/// where at least one track is active. A label counts once even if several
/// of its intervals overlap.
pub fn sweep(tracks: &[&[Labelled]]) -> Vec<Slice> {
    let mut events: Vec<(f64, usize, usize, i32)> = Vec::new();
    let mut widths = vec![0usize; tracks.len()];
    for (t, track) in tracks.iter().enumerate() {
        for iv in track.iter().filter(|iv| iv.end > iv.start) {
            events.push((iv.start, t, iv.label, 1));
            events.push((iv.end, t, iv.label, -1));
            widths[t] = widths[t].max(iv.label + 1);
        }
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut counts: Vec<Vec<i32>> = widths.iter().map(|&w| vec![0; w]).collect();
    let mut slices = Vec::new();
    let mut i = 0;
    while i < events.len() {
        let now = events[i].0;
        while i < events.len() && events[i].0 == now {
            let (_, t, label, delta) = events[i];
            counts[t][label] += delta;
            i += 1;
        }
        let Some(next) = events.get(i).map(|e| e.0) else {
            break;
        };
        let active: Vec<Vec<usize>> = counts
            .iter()
            .map(|c| (0..c.len()).filter(|&l| c[l] > 0).collect())
            .collect();
        if active.iter().any(|a| !a.is_empty()) {
            slices.push(Slice {
                start: now,
                end: next,
                active,
            });
        }
    }
    slices
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(s: f64, e: f64) -> Interval {
        Interval::new(s, e)
    }

    #[test]
    fn merge_joins_overlaps_and_touching() {
        assert_eq!(
            merge(&[iv(3.0, 4.0), iv(0.0, 1.0), iv(1.0, 2.0), iv(1.5, 2.5)]),
            vec![iv(0.0, 2.5), iv(3.0, 4.0)]
        );
    }

    #[test]
    fn subtract_cuts_holes() {
        assert_eq!(
            subtract(
                &[iv(0.0, 10.0)],
                &[iv(-1.0, 1.0), iv(4.0, 5.0), iv(9.0, 12.0)]
            ),
            vec![iv(1.0, 4.0), iv(5.0, 9.0)]
        );
        assert_eq!(subtract(&[iv(0.0, 1.0)], &[]), vec![iv(0.0, 1.0)]);
        assert!(subtract(&[iv(2.0, 3.0)], &[iv(0.0, 5.0)]).is_empty());
    }

    #[test]
    fn sweep_counts_labels_once() {
        let track = [
            Labelled {
                start: 0.0,
                end: 2.0,
                label: 0,
            },
            Labelled {
                start: 1.0,
                end: 3.0,
                label: 0,
            },
            Labelled {
                start: 1.5,
                end: 2.5,
                label: 1,
            },
        ];
        let slices = sweep(&[&track]);
        let summary: Vec<(f64, f64, Vec<usize>)> = slices
            .into_iter()
            .map(|s| (s.start, s.end, s.active[0].clone()))
            .collect();
        assert_eq!(
            summary,
            vec![
                (0.0, 1.0, vec![0]),
                (1.0, 1.5, vec![0]),
                (1.5, 2.0, vec![0, 1]),
                (2.0, 2.5, vec![0, 1]),
                (2.5, 3.0, vec![0]),
            ]
        );
    }
}
