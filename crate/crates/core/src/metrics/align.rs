use super::{check_collar, ErrorCounts, TimedWord, Tokenizer};
use crate::error::Result;
use crate::segment::Segment;

/// Lexicographic DP cell: fewest errors first, then most substitutions.
///
/// Once the error total and substitution count are fixed, deletions and
/// insertions follow from the sequence lengths, so this tie-break makes the
/// breakdown canonical and symmetric under swapping the two sequences.
#[derive(Clone, Copy, PartialEq, Eq)]
struct Cell {
    errors: usize,
    subs: usize,
}

impl Cell {
    fn better_than(self, other: Cell) -> bool {
        self.errors < other.errors || (self.errors == other.errors && self.subs > other.subs)
    }
}

/// Minimal-cost alignment of `n` reference against `m` hypothesis items.
/// `same(i, j)` tells whether the items are equal, `pairable(i, j)` whether
/// they may be aligned against each other at all.
pub(crate) fn align_with(
    n: usize,
    m: usize,
    same: impl Fn(usize, usize) -> bool,
    pairable: impl Fn(usize, usize) -> bool,
) -> ErrorCounts {
    let mut prev: Vec<Cell> = (0..=m).map(|j| Cell { errors: j, subs: 0 }).collect();
    let mut cur = prev.clone();
    for i in 1..=n {
        cur[0] = Cell { errors: i, subs: 0 };
        for j in 1..=m {
            let mut best = Cell {
                errors: prev[j].errors + 1,
                subs: prev[j].subs,
            };
            let ins = Cell {
                errors: cur[j - 1].errors + 1,
                subs: cur[j - 1].subs,
            };
            if ins.better_than(best) {
                best = ins;
            }
            if pairable(i - 1, j - 1) {
                let diag = prev[j - 1];
                let step = if same(i - 1, j - 1) {
                    diag
                } else {
                    Cell {
                        errors: diag.errors + 1,
                        subs: diag.subs + 1,
                    }
                };
                if step.better_than(best) {
                    best = step;
                }
            }
            cur[j] = best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let Cell { errors, subs } = prev[m];
    // n - m = D - I and errors - subs = D + I.
    let rest = errors - subs;
    let deletions = ((rest as isize + n as isize - m as isize) / 2) as usize;
    ErrorCounts {
        substitutions: subs,
        deletions,
        insertions: rest - deletions,
        ref_tokens: n,
    }
}

/// Unit-cost Levenshtein alignment with an S/D/I breakdown.
pub fn edit_distance<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> ErrorCounts {
    align_with(
        reference.len(),
        hypothesis.len(),
        |i, j| reference[i] == hypothesis[j],
        |_, _| true,
    )
}

/// Whether the hypothesis word, widened by `collar` on both sides, overlaps
/// the reference word.
pub(crate) fn within_collar(
    ref_begin: f64,
    ref_end: f64,
    hyp_begin: f64,
    hyp_end: f64,
    collar: f64,
) -> bool {
    ref_begin < hyp_end + collar && hyp_begin - collar < ref_end
}

/// Levenshtein alignment in which two words may only be matched or
/// substituted when their times agree up to `collar` seconds. Words that
/// are too far apart can only be deleted and inserted.
pub fn time_constrained_edit_distance(
    reference: &[TimedWord],
    hypothesis: &[TimedWord],
    collar: f64,
) -> Result<ErrorCounts> {
    check_collar(collar)?;
    Ok(align_with(
        reference.len(),
        hypothesis.len(),
        |i, j| reference[i].token == hypothesis[j].token,
        |i, j| {
            let (r, h) = (&reference[i], &hypothesis[j]);
            within_collar(r.begin, r.end, h.begin, h.end, collar)
        },
    ))
}

/// Spreads the segment's tokens evenly over its interval.
pub fn words_with_times(seg: &Segment, tokenizer: Tokenizer) -> Vec<TimedWord> {
    let Some(words) = seg.words.as_deref() else {
        return Vec::new();
    };
    let tokens = tokenizer.tokenize(words);
    let n = tokens.len() as f64;
    let width = seg.end - seg.start;
    tokens
        .into_iter()
        .enumerate()
        .map(|(i, tok)| TimedWord {
            token: tok.to_string(),
            begin: seg.start + i as f64 * width / n,
            end: seg.start + (i + 1) as f64 * width / n,
        })
        .collect()
}
