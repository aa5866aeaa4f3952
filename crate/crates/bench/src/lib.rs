//! Fixture generators shared by the benchmarks. Everything is derived from
//! the core crate's seeded simulator, so inputs are identical across runs.

use diarasr_core::simkit::{
    derive_seed, simulate_mixture, synthetic_pool, MixtureConfig, UtterancePool,
};
use diarasr_core::{Segment, SegmentList};

pub fn pool() -> UtterancePool {
    synthetic_pool(8, 40, 16, 1)
}

/// One simulated session of `n_speakers` speakers lasting at most
/// `max_duration` seconds.
pub fn session(
    pool: &UtterancePool,
    n_speakers: usize,
    max_duration: f64,
    seed: u64,
) -> SegmentList {
    let cfg = MixtureConfig {
        n_speakers,
        max_duration,
        ..MixtureConfig::default()
    };
    simulate_mixture(pool, &cfg, seed)
        .expect("valid mixture config")
        .reference
}

/// A hypothesis close to `reference`: times shifted by up to 0.4 s, every
/// seventh word replaced and speakers renamed.
pub fn perturbed(reference: &SegmentList, seed: u64) -> SegmentList {
    reference
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let shift = (derive_seed(seed, i as u64) % 801) as f64 / 1000.0 - 0.4;
            let words = s.words.as_ref().map(|w| {
                w.split_whitespace()
                    .enumerate()
                    .map(|(k, t)| if (k + i) % 7 == 0 { "uh" } else { t })
                    .collect::<Vec<_>>()
                    .join(" ")
            });
            let start = (s.start + shift).max(0.0);
            Segment {
                speaker: format!("hyp-{}", s.speaker),
                start,
                end: start + s.duration(),
                words,
                ..s.clone()
            }
        })
        .collect()
}

/// A long meeting built by laying simulated sessions end to end.
pub fn long_meeting(pool: &UtterancePool, minutes: usize) -> SegmentList {
    let mut segs = Vec::new();
    for k in 0..minutes * 2 {
        let offset = k as f64 * 30.0;
        for s in &session(pool, 4, 30.0, derive_seed(99, k as u64)) {
            segs.push(Segment {
                session_id: "long".into(),
                start: s.start + offset,
                end: s.end + offset,
                ..s.clone()
            });
        }
    }
    SegmentList::new(segs)
}

/// Deterministic dense cost matrix with integer entries.
pub fn cost_matrix(n: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (derive_seed(seed, (i * n + j) as u64) % 1000) as f64)
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic_and_valid() {
        let pool = pool();
        let r = session(&pool, 3, 60.0, 2);
        assert_eq!(r, session(&pool, 3, 60.0, 2));
        let h = perturbed(&r, 2);
        assert_eq!(h.len(), r.len());
        assert!(h.validate().is_ok());
        let long = long_meeting(&pool, 2);
        assert!(long.validate().is_ok());
        assert_eq!(long.session_ids(), ["long"]);
        assert_eq!(cost_matrix(4, 1), cost_matrix(4, 1));
    }
}
