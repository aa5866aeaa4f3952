use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{rng_for, Stream};
use crate::error::{Error, Result};
use crate::segment::{Segment, SegmentList, SpeakerEmbedding};
use crate::timeline::{self, Labelled};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub speaker: String,
    pub duration: f64,
    pub words: String,
    pub embedding: SpeakerEmbedding,
    /// 16-bit mono PCM, when audio is available.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<i16>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UtterancePool {
    pub utterances: Vec<Utterance>,
}

impl UtterancePool {
    pub fn speakers(&self) -> Vec<String> {
        let mut s: Vec<String> = self.utterances.iter().map(|u| u.speaker.clone()).collect();
        s.sort();
        s.dedup();
        s
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.utterances.first().map(|u| u.embedding.dim());
        for (i, u) in self.utterances.iter().enumerate() {
            if !(u.duration > 0.0) || !u.duration.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "utterance {i} has non-positive duration {}",
                    u.duration
                )));
            }
            if Some(u.embedding.dim()) != dim {
                return Err(Error::DimMismatch {
                    expected: dim.unwrap_or(0),
                    got: u.embedding.dim(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureConfig {
    pub n_speakers: usize,
    pub max_duration: f64,
    /// Silence between consecutive utterances is drawn uniformly from
    /// `[gap_min, gap_max]`; a negative gap makes them overlap.
    pub gap_min: f64,
    pub gap_max: f64,
}

impl Default for MixtureConfig {
    fn default() -> Self {
        Self {
            n_speakers: 2,
            max_duration: 30.0,
            gap_min: -1.0,
            gap_max: 1.0,
        }
    }
}

impl MixtureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_speakers == 0 {
            return Err(Error::InvalidConfig("n_speakers must be positive".into()));
        }
        if !(self.max_duration > 0.0) || !self.max_duration.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "max_duration must be positive, got {}",
                self.max_duration
            )));
        }
        if !(self.gap_min <= self.gap_max) || !self.gap_min.is_finite() || !self.gap_max.is_finite()
        {
            return Err(Error::InvalidConfig(format!(
                "invalid gap range [{}, {}]",
                self.gap_min, self.gap_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub utterance: usize,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixturePlan {
    pub session_id: String,
    pub placements: Vec<Placement>,
    pub reference: SegmentList,
    pub overlap_ratio: f64,
}

/// Places utterances from `cfg.n_speakers` distinct speakers one after the
/// other until the next one would run past `cfg.max_duration`.
///
/// The first `n_speakers` placements introduce every chosen speaker once;
/// later ones pick a random chosen speaker other than the previous one. A
/// placement never starts before the previous one, and never before the
/// same speaker's last utterance has ended.
pub fn simulate_mixture(
    pool: &UtterancePool,
    cfg: &MixtureConfig,
    seed: u64,
) -> Result<MixturePlan> {
    cfg.validate()?;
    if pool.utterances.is_empty() {
        return Err(Error::EmptyPool);
    }
    pool.validate()?;
    let speakers = pool.speakers();
    if speakers.len() < cfg.n_speakers {
        return Err(Error::InsufficientSpeakers {
            available: speakers.len(),
            requested: cfg.n_speakers,
        });
    }
    let mut by_speaker: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, u) in pool.utterances.iter().enumerate() {
        by_speaker.entry(&u.speaker).or_default().push(i);
    }

    let mut rng = rng_for(seed, Stream::Mixture);
    let chosen: Vec<&str> = sample(&mut rng, speakers.len(), cfg.n_speakers)
        .into_iter()
        .map(|i| speakers[i].as_str())
        .collect();

    let mut placements = Vec::new();
    let mut last_end: BTreeMap<&str, f64> = BTreeMap::new();
    let mut previous: Option<(usize, f64, f64)> = None; // chosen index, start, end
                                                        // Durations are positive, so offsets advance; the cap only bounds work.
    for k in 0..100_000 {
        let who = if k < chosen.len() {
            k
        } else if chosen.len() == 1 {
            0
        } else {
            let prev = previous.map_or(usize::MAX, |p| p.0);
            let pick = rng.random_range(0..chosen.len() - 1);
            if pick >= prev {
                pick + 1
            } else {
                pick
            }
        };
        let speaker = chosen[who];
        let gap = if cfg.gap_min == cfg.gap_max {
            cfg.gap_min
        } else {
            rng.random_range(cfg.gap_min..=cfg.gap_max)
        };
        let candidates = &by_speaker[speaker];
        let utterance = candidates[rng.random_range(0..candidates.len())];

        let mut offset = match previous {
            None => 0.0,
            Some((_, start, end)) => (end + gap).max(start),
        };
        offset = offset
            .max(last_end.get(speaker).copied().unwrap_or(0.0))
            .max(0.0);
        let end = offset + pool.utterances[utterance].duration;
        if end > cfg.max_duration {
            break;
        }
        placements.push(Placement { utterance, offset });
        last_end.insert(speaker, end);
        previous = Some((who, offset, end));
    }

    let session_id = format!("mix-{seed:016x}");
    let reference: SegmentList = placements
        .iter()
        .map(|p| {
            let u = &pool.utterances[p.utterance];
            Segment {
                session_id: session_id.clone(),
                speaker: u.speaker.clone(),
                start: p.offset,
                end: p.offset + u.duration,
                words: Some(u.words.clone()),
            }
        })
        .collect();
    let overlap_ratio = overlap_ratio(&reference);
    Ok(MixturePlan {
        session_id,
        placements,
        reference,
        overlap_ratio,
    })
}

/// Time with two or more distinct speakers active over time with at least
/// one active. Zero when there is no speech.
pub fn overlap_ratio(segs: &SegmentList) -> f64 {
    let speakers = segs.speakers();
    let track: Vec<Labelled> = segs
        .iter()
        .map(|s| Labelled {
            start: s.start,
            end: s.end,
            label: speakers.binary_search(&s.speaker).expect("speaker indexed"),
        })
        .collect();
    let (mut speech, mut overlapped) = (0.0, 0.0);
    for slice in timeline::sweep(&[&track]) {
        let active = slice.active[0].len();
        if active >= 1 {
            speech += slice.duration();
        }
        if active >= 2 {
            overlapped += slice.duration();
        }
    }
    if speech > 0.0 {
        overlapped / speech
    } else {
        0.0
    }
}

fn mean_overlap(pool: &UtterancePool, cfg: &MixtureConfig, seeds: &[u64]) -> Result<f64> {
    let mut total = 0.0;
    for &seed in seeds {
        total += simulate_mixture(pool, cfg, seed)?.overlap_ratio;
    }
    Ok(total / seeds.len().max(1) as f64)
}

/// Finds a gap range `[c - half_width, c + half_width]` whose mean overlap
/// ratio over `seeds` is closest to `target`, by bisection on the centre
/// `c`. Overlap falls as the centre grows.
pub fn calibrate_gap_range(
    pool: &UtterancePool,
    n_speakers: usize,
    max_duration: f64,
    target: f64,
    half_width: f64,
    seeds: &[u64],
) -> Result<MixtureConfig> {
    let longest = pool
        .utterances
        .iter()
        .map(|u| u.duration)
        .fold(0.0, f64::max);
    let with_centre = |c: f64| MixtureConfig {
        n_speakers,
        max_duration,
        gap_min: c - half_width,
        gap_max: c + half_width,
    };
    let (mut lo, mut hi) = (-longest - half_width, longest + half_width);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if mean_overlap(pool, &with_centre(mid), seeds)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(with_centre(0.5 * (lo + hi)))
}

/// Sums the placed utterances' samples with saturation. Returns `None` if
/// any placed utterance has no audio.
pub fn mix_pcm(pool: &UtterancePool, plan: &MixturePlan, sample_rate: u32) -> Option<Vec<i16>> {
    let rate = sample_rate as f64;
    let mut out: Vec<i16> = Vec::new();
    for p in &plan.placements {
        let samples = pool.utterances[p.utterance].samples.as_ref()?;
        let at = (p.offset * rate).round() as usize;
        if out.len() < at + samples.len() {
            out.resize(at + samples.len(), 0);
        }
        for (dst, &s) in out[at..].iter_mut().zip(samples) {
            *dst = dst.saturating_add(s);
        }
    }
    Some(out)
}

/// 16-bit little-endian mono PCM bytes.
pub fn pcm_to_le_bytes(samples: &[i16]) -> Vec<u8> {
    samples.iter().flat_map(|s| s.to_le_bytes()).collect()
}

const VOCABULARY: &[&str] = &[
    "the", "meeting", "budget", "plan", "we", "should", "review", "next", "week", "project",
    "agree", "maybe", "later", "numbers", "team", "report", "yes", "no", "think", "schedule",
    "customer", "design", "launch", "cost", "today", "question", "update", "data", "model", "test",
];

/// A pool of synthetic utterances: `per_speaker` utterances for each of
/// `n_speakers` speakers, 2 to 12 words at 0.3 to 0.6 s per word, with
/// embeddings scattered around a per-speaker centre.
pub fn synthetic_pool(
    n_speakers: usize,
    per_speaker: usize,
    dim: usize,
    seed: u64,
) -> UtterancePool {
    let mut rng = rng_for(seed, Stream::Pool);
    let mut utterances = Vec::with_capacity(n_speakers * per_speaker);
    for s in 0..n_speakers {
        let speaker = format!("spk{s:02}");
        let centre: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        for _ in 0..per_speaker {
            let n_words = rng.random_range(2..=12);
            let words: Vec<&str> = (0..n_words)
                .map(|_| VOCABULARY[rng.random_range(0..VOCABULARY.len())])
                .collect();
            let duration = (0..n_words).map(|_| rng.random_range(0.3..0.6)).sum();
            let values = centre
                .iter()
                .map(|c| c + rng.random_range(-0.05..0.05))
                .collect();
            utterances.push(Utterance {
                speaker: speaker.clone(),
                duration,
                words: words.join(" "),
                embedding: SpeakerEmbedding { values },
                samples: None,
            });
        }
    }
    UtterancePool { utterances }
}
