//! Rebuilds conversation state from the event log.
//!
//! Replay folds records through the same core operations the hub uses, and
//! cross-checks every value the log carries (turn index, routing, dose)
//! against what the state machine recomputes.

use std::collections::BTreeMap;

use thiserror::Error;

use parley_core::conversation::{ArmKind, ConversationError, ConversationState, Decision, TreatmentArm};
use parley_core::{ConversationId, ParticipantId, Stance};

use crate::events::{Event, EventRecord, Routing};

#[derive(Debug, Error, PartialEq)]
pub enum ReplayError {
    #[error("seq gap: expected {expected}, found {found}")]
    SeqGap { expected: u64, found: u64 },
    #[error("seq {seq}: {kind} has no conversation id")]
    MissingConversation { seq: u64, kind: &'static str },
    #[error("seq {seq}: conversation {conversation} was not started")]
    UnknownConversation { seq: u64, conversation: ConversationId },
    #[error("seq {seq}: conversation {conversation} started twice")]
    DuplicateConversation { seq: u64, conversation: ConversationId },
    #[error("seq {seq}: {detail}")]
    Mismatch { seq: u64, detail: String },
    #[error("seq {seq}: {source}")]
    State {
        seq: u64,
        source: ConversationError,
    },
}

/// Incremental replayer; feed records in log order.
#[derive(Debug, Default)]
pub struct Replayer {
    /// Whether seq must start at 0 and grow by exactly one.
    contiguous: bool,
    last_seq: Option<u64>,
    matched: BTreeMap<ConversationId, ([ParticipantId; 2], u64)>,
    states: BTreeMap<ConversationId, ConversationState>,
}

impl Replayer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Requires `seq` to run 0, 1, 2, ... with no gaps.
    pub fn contiguous() -> Self {
        Self {
            contiguous: true,
            ..Self::default()
        }
    }

    pub fn states(&self) -> &BTreeMap<ConversationId, ConversationState> {
        &self.states
    }

    pub fn into_states(self) -> BTreeMap<ConversationId, ConversationState> {
        self.states
    }

    fn state(
        &mut self,
        record: &EventRecord,
    ) -> Result<&mut ConversationState, ReplayError> {
        let conversation = record
            .conversation
            .as_ref()
            .ok_or(ReplayError::MissingConversation {
                seq: record.seq,
                kind: record.event.name(),
            })?;
        self.states
            .get_mut(conversation)
            .ok_or_else(|| ReplayError::UnknownConversation {
                seq: record.seq,
                conversation: conversation.clone(),
            })
    }

    pub fn apply(&mut self, record: &EventRecord) -> Result<(), ReplayError> {
        let seq = record.seq;
        let expected = self.last_seq.map_or(0, |prev| prev + 1);
        let in_order = if self.contiguous {
            seq == expected
        } else {
            !matches!(self.last_seq, Some(prev) if seq <= prev)
        };
        if !in_order {
            return Err(ReplayError::SeqGap {
                expected,
                found: seq,
            });
        }
        self.last_seq = Some(seq);
        let state_err = |source| ReplayError::State { seq, source };
        let mismatch = |detail: String| ReplayError::Mismatch { seq, detail };
        match &record.event {
            Event::Matched { participants, .. } => {
                let conversation = record.conversation.clone().ok_or(ReplayError::MissingConversation {
                    seq,
                    kind: "Matched",
                })?;
                if self.states.contains_key(&conversation) || self.matched.contains_key(&conversation) {
                    return Err(ReplayError::DuplicateConversation { seq, conversation });
                }
                self.matched
                    .insert(conversation, (participants.clone(), record.at));
            }
            Event::ArmAssigned {
                arm, designated, ..
            } => {
                let conversation = record.conversation.clone().ok_or(ReplayError::MissingConversation {
                    seq,
                    kind: "ArmAssigned",
                })?;
                let (participants, at) = self.matched.remove(&conversation).ok_or_else(|| {
                    ReplayError::UnknownConversation {
                        seq,
                        conversation: conversation.clone(),
                    }
                })?;
                let state = ConversationState::new(
                    conversation.clone(),
                    participants,
                    TreatmentArm {
                        kind: *arm,
                        designated: designated.clone(),
                    },
                    at,
                )
                .map_err(state_err)?;
                self.states.insert(conversation, state);
            }
            Event::MessageComposed {
                message_id,
                author,
                turn_index,
                text,
                routing,
                ..
            } => {
                let at = record.at;
                let state = self.state(record)?;
                let message = state
                    .compose(message_id.clone(), author, text, at)
                    .map_err(state_err)?
                    .clone();
                if message.turn_index != *turn_index {
                    return Err(mismatch(format!(
                        "turn index {} recomputed as {}",
                        turn_index, message.turn_index
                    )));
                }
                let expected = match (state.intervention_decision(&message), state.arm.kind) {
                    (Decision::PassThrough, _) => Routing::PassThrough,
                    (Decision::Intercept, ArmKind::Treated) => Routing::Intercept,
                    (Decision::Intercept, ArmKind::Control) => Routing::Phantom,
                };
                if expected != *routing {
                    return Err(mismatch(format!("routing {routing:?} recomputed as {expected:?}")));
                }
            }
            Event::OfferShown { dose, .. } | Event::PhantomIntervention { dose, .. } => {
                let state = self.state(record)?;
                let got = state.record_intervention().map_err(state_err)?;
                if got != *dose {
                    return Err(mismatch(format!("dose {dose} recomputed as {got}")));
                }
            }
            Event::OfferFailed { .. } => {
                self.state(record)?.record_failed_attempt().map_err(state_err)?;
            }
            Event::MessageDelivered {
                message_id,
                final_text,
                provenance,
                ..
            } => {
                let at = record.at;
                self.state(record)?
                    .deliver(message_id, final_text, *provenance, at)
                    .map_err(state_err)?;
            }
            Event::ConversationEnded { reason, dose } => {
                let state = self.state(record)?;
                state.end(*reason);
                if state.dose() != *dose {
                    return Err(mismatch(format!("final dose {dose} recomputed as {}", state.dose())));
                }
                if state.status != parley_core::Status::Ended(*reason) {
                    return Err(mismatch(format!(
                        "end reason {reason:?} but state is {:?}",
                        state.status
                    )));
                }
            }
            Event::TutorialShown { .. }
            | Event::ChoiceMade { .. }
            | Event::OfferDiscarded { .. }
            | Event::ParticipantLeft { .. } => {
                if record.conversation.is_some() {
                    self.state(record)?;
                }
            }
            Event::Joined { .. } | Event::QueueTimedOut { .. } | Event::SurveySubmitted { .. } => {}
        }
        Ok(())
    }
}

/// Replays a whole log (seq must start at 0 and have no gaps).
pub fn replay(records: &[EventRecord]) -> Result<BTreeMap<ConversationId, ConversationState>, ReplayError> {
    let mut replayer = Replayer::contiguous();
    for record in records {
        replayer.apply(record)?;
    }
    Ok(replayer.into_states())
}

/// Replays the records of one conversation, e.g. after filtering a log.
/// `seq` must be strictly increasing.
pub fn replay_conversation(
    records: &[EventRecord],
) -> Result<Option<ConversationState>, ReplayError> {
    let mut replayer = Replayer::new();
    for record in records {
        replayer.apply(record)?;
    }
    Ok(replayer.into_states().into_values().next())
}

/// Stances per participant as recorded at join time.
pub fn joined_stances(records: &[EventRecord]) -> BTreeMap<ParticipantId, Stance> {
    records
        .iter()
        .filter_map(|r| match &r.event {
            Event::Joined { participant, stance } => Some((participant.clone(), *stance)),
            _ => None,
        })
        .collect()
}
