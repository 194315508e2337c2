//! Pre- and post-conversation instruments and outcome indices.
//!
//! Every Likert-7 index is the mean over its items of `(score - 1) / 6 * 100`
//! after reverse-coding, so indices live on a 0-100 scale.

mod instrument;
mod scoring;

pub use instrument::{
    Answer, IndexKind, Instrument, InstrumentError, InstrumentId, Item, Scale, SurveyResponse,
    STANCE_ITEM, STANCE_OPTIONS,
};
pub use scoring::{
    attitude_change, outcome_indices, reverse_code, score_index, stance_from_pre_survey,
    OutcomeIndices, ScoreError,
};
