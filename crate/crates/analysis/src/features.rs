//! Binary politeness markers detected with in-repo word lists.
//!
//! Text is lowercased and split into word tokens (letters, digits and
//! apostrophes). A single-word entry matches one token; a phrase matches a run
//! of consecutive tokens, so "good point" never fires inside "goodpoint".

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    PositiveEmotion,
    Hedges,
    FirstPersonSingular,
    Agreement,
    Acknowledgement,
}

impl Feature {
    pub const ALL: [Feature; 5] = [
        Feature::PositiveEmotion,
        Feature::Hedges,
        Feature::FirstPersonSingular,
        Feature::Agreement,
        Feature::Acknowledgement,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Feature::PositiveEmotion => "positive_emotion",
            Feature::Hedges => "hedges",
            Feature::FirstPersonSingular => "first_person_singular",
            Feature::Agreement => "agreement",
            Feature::Acknowledgement => "acknowledgement",
        }
    }

    pub fn lexicon(self) -> &'static [&'static str] {
        match self {
            Feature::PositiveEmotion => POSITIVE_EMOTION,
            Feature::Hedges => HEDGES,
            Feature::FirstPersonSingular => FIRST_PERSON_SINGULAR,
            Feature::Agreement => AGREEMENT,
            Feature::Acknowledgement => ACKNOWLEDGEMENT,
        }
    }
}

pub const POSITIVE_EMOTION: &[&str] = &[
    "good", "great", "glad", "happy", "love", "lovely", "nice", "wonderful", "excellent",
    "awesome", "fantastic", "appreciate", "appreciated", "thanks", "thank", "grateful",
    "enjoy", "enjoyed", "pleased", "pleasure", "hope", "hopeful", "kind", "helpful",
    "interesting", "respect", "welcome", "best", "better", "beautiful", "fun", "thoughtful",
];

pub const HEDGES: &[&str] = &[
    "maybe", "perhaps", "might", "somewhat", "possibly", "probably", "apparently", "arguably",
    "likely", "unlikely", "seems", "seem", "seemed", "suppose", "guess", "presumably",
    "roughly", "fairly", "sort of", "kind of", "tend to", "tends to", "in my opinion",
    "in my view", "to some extent",
];

pub const FIRST_PERSON_SINGULAR: &[&str] = &[
    "i", "me", "my", "mine", "myself", "i'm", "i've", "i'd", "i'll",
];

pub const AGREEMENT: &[&str] = &[
    "i agree", "agree with you", "agreed", "you're right", "you are right", "good point",
    "fair point", "great point", "valid point", "that's true", "that is true", "true enough",
    "exactly", "absolutely", "makes sense", "you have a point",
];

pub const ACKNOWLEDGEMENT: &[&str] = &[
    "i understand", "i see your", "i see what you", "i hear you", "i hear what you",
    "understand where you", "understand your", "i get that", "i get it", "i get what you",
    "i can see", "i see that", "i know what you mean", "thanks for sharing", "i recognize",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeatureError {
    #[error("cannot score empty text")]
    Empty,
}

/// One flag per [`Feature`], each 0 or 1.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureVector {
    pub positive_emotion: u8,
    pub hedges: u8,
    pub first_person_singular: u8,
    pub agreement: u8,
    pub acknowledgement: u8,
}

impl FeatureVector {
    pub fn get(&self, f: Feature) -> u8 {
        match f {
            Feature::PositiveEmotion => self.positive_emotion,
            Feature::Hedges => self.hedges,
            Feature::FirstPersonSingular => self.first_person_singular,
            Feature::Agreement => self.agreement,
            Feature::Acknowledgement => self.acknowledgement,
        }
    }

    fn set(&mut self, f: Feature, v: u8) {
        let slot = match f {
            Feature::PositiveEmotion => &mut self.positive_emotion,
            Feature::Hedges => &mut self.hedges,
            Feature::FirstPersonSingular => &mut self.first_person_singular,
            Feature::Agreement => &mut self.agreement,
            Feature::Acknowledgement => &mut self.acknowledgement,
        };
        *slot = v;
    }
}

/// Lowercased word tokens; curly apostrophes are folded to `'`.
pub fn tokens(text: &str) -> Vec<String> {
    text.to_lowercase()
        .replace(['\u{2019}', '\u{2018}'], "'")
        .split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .map(|t| t.trim_matches('\''))
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

fn contains_phrase(tokens: &[String], phrase: &str) -> bool {
    let words: Vec<&str> = phrase.split(' ').collect();
    tokens
        .windows(words.len())
        .any(|w| w.iter().zip(&words).all(|(t, p)| t == p))
}

pub fn has_feature(tokens: &[String], feature: Feature) -> bool {
    feature.lexicon().iter().any(|entry| contains_phrase(tokens, entry))
}

pub fn extract_features(text: &str) -> Result<FeatureVector, FeatureError> {
    if text.trim().is_empty() {
        return Err(FeatureError::Empty);
    }
    let tokens = tokens(text);
    let mut out = FeatureVector::default();
    for f in Feature::ALL {
        out.set(f, has_feature(&tokens, f) as u8);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixed_sentence() {
        let v = extract_features("I understand your point, and maybe you're right").unwrap();
        assert_eq!(v.first_person_singular, 1);
        assert_eq!(v.acknowledgement, 1);
        assert_eq!(v.hedges, 1);
        assert_eq!(v.agreement, 1);
        assert_eq!(v.positive_emotion, 0);
    }

    #[test]
    fn plain_claim_has_no_markers() {
        assert_eq!(extract_features("Guns save lives.").unwrap(), FeatureVector::default());
    }

    #[test]
    fn empty_is_rejected() {
        assert_eq!(extract_features("  "), Err(FeatureError::Empty));
    }

    #[test]
    fn word_boundaries_and_case() {
        let v = extract_features("MIGHTY Imagination, Goodpoint").unwrap();
        assert_eq!(v, FeatureVector::default());
        let v = extract_features("Good Point, I\u{2019}m listening").unwrap();
        assert_eq!((v.agreement, v.positive_emotion, v.first_person_singular), (1, 1, 1));
    }

    #[test]
    fn lexicons_are_lowercase_and_tokenizable() {
        for f in Feature::ALL {
            for entry in f.lexicon() {
                assert_eq!(tokens(entry).join(" "), *entry, "{f:?} entry {entry:?}");
            }
        }
    }
}
