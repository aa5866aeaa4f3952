//! Transcript and diarization scoring: edit-distance alignment, cpWER,
//! tcpWER and DER.

mod align;
pub mod assign;
mod der;
mod permutation;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use align::{edit_distance, time_constrained_edit_distance, words_with_times};
pub use der::{der, DerReport};
pub use permutation::{cpwer, tcpwer};

/// How transcript text is split into scoring tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tokenizer {
    /// Maximal runs of non-whitespace.
    #[default]
    Word,
    /// Every non-whitespace codepoint, in any script.
    Char,
}

impl Tokenizer {
    pub fn tokenize<'a>(&self, text: &'a str) -> Vec<&'a str> {
        match self {
            Tokenizer::Word => text.split_whitespace().collect(),
            Tokenizer::Char => text
                .char_indices()
                .filter(|(_, c)| !c.is_whitespace())
                .map(|(i, c)| &text[i..i + c.len_utf8()])
                .collect(),
        }
    }
}

impl fmt::Display for Tokenizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tokenizer::Word => "word",
            Tokenizer::Char => "char",
        })
    }
}

impl FromStr for Tokenizer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "word" => Ok(Tokenizer::Word),
            "char" => Ok(Tokenizer::Char),
            other => Err(format!(
                "unknown tokenizer `{other}` (expected word or char)"
            )),
        }
    }
}

pub fn tokenize(text: &str, tokenizer: Tokenizer) -> Vec<&str> {
    tokenizer.tokenize(text)
}

/// Substitution, deletion and insertion counts against a reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ErrorCounts {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub ref_tokens: usize,
}

impl ErrorCounts {
    pub fn errors(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }

    /// `errors / ref_tokens`. With no reference tokens the rate is `0` when
    /// there are no errors and undefined otherwise.
    pub fn rate(&self) -> Option<f64> {
        if self.ref_tokens > 0 {
            Some(self.errors() as f64 / self.ref_tokens as f64)
        } else if self.errors() == 0 {
            Some(0.0)
        } else {
            None
        }
    }

    pub fn all_deleted(ref_tokens: usize) -> Self {
        Self {
            deletions: ref_tokens,
            ref_tokens,
            ..Self::default()
        }
    }

    pub fn all_inserted(hyp_tokens: usize) -> Self {
        Self {
            insertions: hyp_tokens,
            ..Self::default()
        }
    }
}

impl std::ops::Add for ErrorCounts {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self {
            substitutions: self.substitutions + rhs.substitutions,
            deletions: self.deletions + rhs.deletions,
            insertions: self.insertions + rhs.insertions,
            ref_tokens: self.ref_tokens + rhs.ref_tokens,
        }
    }
}

impl std::ops::AddAssign for ErrorCounts {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl std::iter::Sum for ErrorCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), |a, b| a + b)
    }
}

/// Result of a permutation-based transcript metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub counts: ErrorCounts,
    /// `None` when the reference is empty but the hypothesis is not.
    pub rate: Option<f64>,
    /// Hypothesis speaker to reference speaker; `None` marks an unmatched
    /// hypothesis speaker.
    pub speaker_mapping: BTreeMap<String, Option<String>>,
}

/// A token with the time span it is assumed to occupy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedWord {
    pub token: String,
    pub begin: f64,
    pub end: f64,
}

pub(crate) fn check_collar(collar: f64) -> crate::Result<()> {
    if collar.is_nan() || collar < 0.0 {
        return Err(crate::Error::InvalidCollar(collar));
    }
    Ok(())
}
