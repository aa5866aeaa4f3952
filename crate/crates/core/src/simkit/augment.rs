use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{rng_for, Stream};
use crate::enrollment::{PromptStructure, Triplet};
use crate::error::{Error, Result};
use crate::segment::SpeakerEmbedding;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub p_replace: f64,
    pub p_drop: f64,
    pub p_shuffle: f64,
    pub seed: u64,
}

impl AugmentConfig {
    /// Replacement 0.05, dropout 0.1, shuffling 0.2.
    pub fn training(seed: u64) -> Self {
        Self {
            p_replace: 0.05,
            p_drop: 0.1,
            p_shuffle: 0.2,
            seed,
        }
    }

    pub fn identity(seed: u64) -> Self {
        Self {
            p_replace: 0.0,
            p_drop: 0.0,
            p_shuffle: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("p_replace", self.p_replace),
            ("p_drop", self.p_drop),
            ("p_shuffle", self.p_shuffle),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!(
                    "{name} = {p} is not a probability"
                )));
            }
        }
        Ok(())
    }
}

/// An embedding available as a replacement, with the speaker it belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Donor {
    pub speaker: String,
    pub embedding: SpeakerEmbedding,
}

/// Provenance of one output slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotTrace {
    /// Index of the slot in the input prompt.
    pub origin: usize,
    pub replaced: bool,
}

/// Distinct (speaker, embedding) pairs found in a set of prompts.
pub fn donors_from_prompts(prompts: &[PromptStructure]) -> Vec<Donor> {
    let mut donors: Vec<Donor> = Vec::new();
    for t in prompts.iter().flat_map(|p| &p.triplet_slots) {
        let seen = donors
            .iter()
            .any(|d| d.speaker == t.speaker() && d.embedding.bit_eq(&t.embedding));
        if !seen {
            donors.push(Donor {
                speaker: t.speaker().to_string(),
                embedding: t.embedding.clone(),
            });
        }
    }
    donors
}

pub fn augment(prompt: &PromptStructure, cfg: &AugmentConfig, donors: &[Donor]) -> PromptStructure {
    augment_traced(prompt, cfg, donors).0
}

/// Applies embedding replacement, triplet dropout and triplet shuffling, in
/// that order, keeping labels aligned with their triplets throughout.
///
/// A replaced triplet gets the embedding of a random donor from another
/// speaker and an empty label; if no such donor exists it is left alone.
pub fn augment_traced(
    prompt: &PromptStructure,
    cfg: &AugmentConfig,
    donors: &[Donor],
) -> (PromptStructure, Vec<SlotTrace>) {
    let mut rng = rng_for(cfg.seed, Stream::Augment);
    let mut slots: Vec<(Triplet, String, SlotTrace)> = prompt
        .triplet_slots
        .iter()
        .cloned()
        .zip(prompt.labels.iter().cloned())
        .enumerate()
        .map(|(origin, (t, l))| {
            (
                t,
                l,
                SlotTrace {
                    origin,
                    replaced: false,
                },
            )
        })
        .collect();

    for (triplet, label, trace) in slots.iter_mut() {
        if rng.random::<f64>() >= cfg.p_replace {
            continue;
        }
        let eligible: Vec<&Donor> = donors
            .iter()
            .filter(|d| {
                d.speaker != triplet.speaker()
                    && d.embedding.dim() == triplet.embedding.dim()
                    && !d.embedding.bit_eq(&triplet.embedding)
            })
            .collect();
        if eligible.is_empty() {
            continue;
        }
        let donor = eligible[rng.random_range(0..eligible.len())];
        triplet.embedding = donor.embedding.clone();
        label.clear();
        trace.replaced = true;
    }

    slots.retain(|_| rng.random::<f64>() >= cfg.p_drop);

    if rng.random::<f64>() < cfg.p_shuffle {
        slots.shuffle(&mut rng);
    }

    let mut triplet_slots = Vec::with_capacity(slots.len());
    let mut labels = Vec::with_capacity(slots.len());
    let mut traces = Vec::with_capacity(slots.len());
    for (t, l, tr) in slots {
        triplet_slots.push(t);
        labels.push(l);
        traces.push(tr);
    }
    (
        PromptStructure {
            instruction: prompt.instruction.clone(),
            triplet_slots,
            labels,
        },
        traces,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enrollment::{assemble_prompt, build_triplets, DEFAULT_INSTRUCTION};
    use crate::segment::{EmbeddingTable, Interval, Segment, SegmentList};

    fn fixture() -> (PromptStructure, Vec<Donor>) {
        let table: EmbeddingTable = [("A", 1.0), ("B", 2.0), ("C", 3.0)]
            .iter()
            .map(|&(s, v)| {
                (
                    s.to_string(),
                    SpeakerEmbedding {
                        values: vec![v, -v],
                    },
                )
            })
            .collect();
        let segs: SegmentList = [("A", 0.0, 2.0), ("B", 1.0, 3.0), ("A", 3.5, 5.0)]
            .iter()
            .map(|&(s, a, b)| Segment::new("s1", s, a, b, None).unwrap())
            .collect();
        let triplets = build_triplets(&segs, &table, Interval::new(0.0, 5.0), 100.0).unwrap();
        let prompt = assemble_prompt(
            DEFAULT_INSTRUCTION,
            triplets,
            vec!["one".into(), "two".into(), "three".into()],
        )
        .unwrap();
        let donors = table
            .into_iter()
            .map(|(speaker, embedding)| Donor { speaker, embedding })
            .collect();
        (prompt, donors)
    }

    #[test]
    fn zero_probabilities_are_identity() {
        let (prompt, donors) = fixture();
        assert_eq!(
            augment(&prompt, &AugmentConfig::identity(5), &donors),
            prompt
        );
    }

    #[test]
    fn full_dropout_empties() {
        let (prompt, donors) = fixture();
        let cfg = AugmentConfig {
            p_drop: 1.0,
            ..AugmentConfig::identity(5)
        };
        let out = augment(&prompt, &cfg, &donors);
        assert!(out.triplet_slots.is_empty() && out.labels.is_empty());
        assert_eq!(out.instruction, prompt.instruction);
    }

    #[test]
    fn full_replacement_blanks_every_label() {
        let (prompt, donors) = fixture();
        let cfg = AugmentConfig {
            p_replace: 1.0,
            ..AugmentConfig::identity(11)
        };
        let (out, trace) = augment_traced(&prompt, &cfg, &donors);
        assert!(trace.iter().all(|t| t.replaced));
        for (t, l) in out.triplet_slots.iter().zip(&out.labels) {
            assert!(l.is_empty());
            let own = donors.iter().find(|d| d.speaker == t.speaker()).unwrap();
            assert!(!t.embedding.bit_eq(&own.embedding));
        }
    }

    #[test]
    fn replacement_needs_a_foreign_donor() {
        let (prompt, donors) = fixture();
        let only_a: Vec<Donor> = donors.into_iter().filter(|d| d.speaker == "A").collect();
        let cfg = AugmentConfig {
            p_replace: 1.0,
            ..AugmentConfig::identity(1)
        };
        let (out, trace) = augment_traced(&prompt, &cfg, &only_a);
        // Only B's triplet can take A's embedding.
        assert_eq!(trace.iter().filter(|t| t.replaced).count(), 1);
        assert_eq!(out.labels, vec!["one", "", "three"]);
    }

    #[test]
    fn training_config_is_reproducible() {
        let (prompt, donors) = fixture();
        for seed in 0..50 {
            let cfg = AugmentConfig::training(seed);
            let a = augment(&prompt, &cfg, &donors).to_record();
            let b = augment(&prompt, &cfg, &donors).to_record();
            assert_eq!(a, b);
        }
        assert!(AugmentConfig::training(0).validate().is_ok());
        assert!(AugmentConfig {
            p_drop: 1.5,
            ..AugmentConfig::identity(0)
        }
        .validate()
        .is_err());
    }

    #[test]
    fn donors_are_deduplicated() {
        let (prompt, _) = fixture();
        let donors = donors_from_prompts(&[prompt.clone(), prompt]);
        let speakers: Vec<&str> = donors.iter().map(|d| d.speaker.as_str()).collect();
        assert_eq!(speakers, ["A", "B"]);
    }
}
