use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::instrument::{
    Answer, IndexKind, Instrument, Item, Scale, SurveyResponse, STANCE_ITEM, STANCE_OPTIONS,
};
use crate::matching::Stance;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScoreError {
    #[error("item {0} is unanswered")]
    Missing(String),
    #[error("item {item} answer {value} is outside 1..=7")]
    OutOfRange { item: String, value: u8 },
    #[error("item {0} expects a Likert answer")]
    NotLikert(String),
    #[error("index has no items")]
    NoItems,
    #[error("unrecognized stance option {0:?}")]
    UnknownStance(String),
    #[error("attitude change needs both waves")]
    MissingWave,
}

/// Maps a 1..=7 answer onto 7..=1 for reverse-coded items.
pub fn reverse_code(score: u8) -> u8 {
    8 - score
}

/// Mean of `(score - 1) / 6 * 100` over `items`, reverse-coding flagged ones.
pub fn score_index(answers: &BTreeMap<String, Answer>, items: &[&Item]) -> Result<f64, ScoreError> {
    if items.is_empty() {
        return Err(ScoreError::NoItems);
    }
    let mut total = 0.0;
    for item in items {
        if item.scale != Scale::Likert7 {
            return Err(ScoreError::NotLikert(item.id.clone()));
        }
        let value = match answers.get(&item.id) {
            None => return Err(ScoreError::Missing(item.id.clone())),
            Some(Answer::Choice(_)) => return Err(ScoreError::NotLikert(item.id.clone())),
            Some(Answer::Likert(v)) => *v,
        };
        if !(1..=7).contains(&value) {
            return Err(ScoreError::OutOfRange {
                item: item.id.clone(),
                value,
            });
        }
        let coded = if item.reverse { reverse_code(value) } else { value };
        total += f64::from(coded - 1) / 6.0 * 100.0;
    }
    Ok(total / items.len() as f64)
}

/// Exact option text of the stance question to a [`Stance`].
pub fn stance_from_pre_survey(option: &str) -> Result<Stance, ScoreError> {
    let option = option.trim();
    STANCE_OPTIONS
        .iter()
        .position(|o| *o == option)
        .map(|i| Stance::ALL[i])
        .ok_or_else(|| ScoreError::UnknownStance(option.to_owned()))
}

/// `post - pre` on the policy-attitude index.
pub fn attitude_change(pre: Option<f64>, post: Option<f64>) -> Result<f64, ScoreError> {
    match (pre, post) {
        (Some(pre), Some(post)) => Ok(post - pre),
        _ => Err(ScoreError::MissingWave),
    }
}

/// Per-respondent outcomes; `None` marks an index that could not be scored
/// and is excluded from analysis.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutcomeIndices {
    pub conv_quality: Option<f64>,
    pub dem_reciprocity: Option<f64>,
    pub policy_attitude_pre: Option<f64>,
    pub policy_attitude: Option<f64>,
    pub stance: Option<Stance>,
}

impl OutcomeIndices {
    pub fn attitude_change(&self) -> Option<f64> {
        attitude_change(self.policy_attitude_pre, self.policy_attitude).ok()
    }
}

fn index_of(instrument: &Instrument, response: &SurveyResponse, kind: IndexKind) -> Option<f64> {
    let items = instrument.index_items(kind);
    match score_index(&response.answers, &items) {
        Ok(v) => Some(v),
        Err(e) => {
            tracing::debug!(participant = %response.participant, ?kind, error = %e, "index undefined");
            None
        }
    }
}

pub fn outcome_indices(
    pre_instrument: &Instrument,
    pre: Option<&SurveyResponse>,
    post_instrument: &Instrument,
    post: Option<&SurveyResponse>,
) -> OutcomeIndices {
    let stance = pre
        .and_then(|r| r.answers.get(STANCE_ITEM))
        .and_then(|a| match a {
            Answer::Choice(text) => stance_from_pre_survey(text).ok(),
            Answer::Likert(_) => None,
        });
    OutcomeIndices {
        conv_quality: post.and_then(|r| index_of(post_instrument, r, IndexKind::ConvQuality)),
        dem_reciprocity: post.and_then(|r| index_of(post_instrument, r, IndexKind::DemReciprocity)),
        policy_attitude_pre: pre.and_then(|r| index_of(pre_instrument, r, IndexKind::PolicyAttitude)),
        policy_attitude: post.and_then(|r| index_of(post_instrument, r, IndexKind::PolicyAttitude)),
        stance,
    }
}
