//! Conversation entities and the intervention cadence state machine.
//!
//! A conversation turn is a maximal run of consecutive messages by one
//! author. Only the designated participant's messages are candidates for
//! interception: the first message longer than four words in an armed turn
//! is intercepted, after which the designated participant's next turn is
//! skipped and the one after that is armed again. Control conversations run
//! the exact same machine but count phantom interventions, so both arms share
//! one notion of dose.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::Millis;
use crate::ids::{ConversationId, MessageId, ParticipantId};
use crate::rephrase::Strategy;
use crate::text::word_count;
use crate::MAX_INTERVENTIONS;

/// Messages must be strictly longer than this to be intercepted.
pub const INTERCEPT_MIN_EXCLUSIVE_WORDS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArmKind {
    Treated,
    Control,
}

/// Conversation-level assignment. `designated` is the participant who
/// receives offers (Treated) or whose would-be offers are counted (Control).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreatmentArm {
    pub kind: ArmKind,
    pub designated: ParticipantId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "strategy")]
pub enum Provenance {
    Original,
    AcceptedSuggestion(Strategy),
    Edited,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub id: MessageId,
    pub author: ParticipantId,
    pub turn_index: u32,
    pub original_text: String,
    pub final_text: String,
    pub provenance: Provenance,
    /// Composition time.
    pub timestamp: Millis,
    /// Set once the final text has been sent to the partner.
    pub delivered_at: Option<Millis>,
}

impl Message {
    pub fn is_delivered(&self) -> bool {
        self.delivered_at.is_some()
    }

    pub fn word_count(&self) -> usize {
        word_count(&self.original_text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EndReason {
    Complete,
    Departure,
    Fault,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Active,
    Ended(EndReason),
}

/// Eligibility of the designated participant's current turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cadence {
    /// The current (or next) designated turn may be intercepted.
    Armed,
    /// An interception happened in the current designated turn.
    Spent,
    /// Designated turn directly after an intercepted one; never intercepted.
    Resting,
    /// An offer was attempted in this turn but failed open. The turn is
    /// consumed, the next designated turn is armed again.
    Attempted,
}

impl Cadence {
    fn on_new_designated_turn(self) -> Self {
        match self {
            Cadence::Spent => Cadence::Resting,
            Cadence::Resting | Cadence::Armed | Cadence::Attempted => Cadence::Armed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: ParticipantId,
    pub index: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Intercept,
    PassThrough,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConversationError {
    #[error("participant {0} is not part of this conversation")]
    UnknownParticipant(ParticipantId),
    #[error("a conversation needs two distinct participants")]
    DuplicateParticipant,
    #[error("designated participant {0} is not part of the pair")]
    InvalidArm(ParticipantId),
    #[error("conversation is no longer active")]
    NotActive,
    #[error("message text is empty")]
    EmptyText,
    #[error("intervention counter already at {MAX_INTERVENTIONS}")]
    CounterOverflow,
    #[error("cadence is not armed for this turn")]
    NotArmed,
    #[error("no message {0} in this conversation")]
    UnknownMessage(MessageId),
    #[error("message {0} was already delivered")]
    AlreadyDelivered(MessageId),
    #[error("original provenance requires the original text")]
    ProvenanceMismatch,
}

/// Authoritative per-dyad record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversationState {
    pub id: ConversationId,
    pub participants: [ParticipantId; 2],
    pub arm: TreatmentArm,
    /// Messages in composition order.
    pub messages: Vec<Message>,
    pub current_turn: Option<Turn>,
    pub interventions_delivered: u8,
    pub phantom_interventions: u8,
    pub cadence: Cadence,
    pub status: Status,
    pub started_at: Millis,
}

impl ConversationState {
    pub fn new(
        id: ConversationId,
        participants: [ParticipantId; 2],
        arm: TreatmentArm,
        started_at: Millis,
    ) -> Result<Self, ConversationError> {
        if participants[0] == participants[1] {
            return Err(ConversationError::DuplicateParticipant);
        }
        if !participants.contains(&arm.designated) {
            return Err(ConversationError::InvalidArm(arm.designated));
        }
        Ok(Self {
            id,
            participants,
            arm,
            messages: Vec::new(),
            current_turn: None,
            interventions_delivered: 0,
            phantom_interventions: 0,
            cadence: Cadence::Armed,
            status: Status::Active,
            started_at,
        })
    }

    pub fn is_active(&self) -> bool {
        self.status == Status::Active
    }

    pub fn is_participant(&self, who: &ParticipantId) -> bool {
        self.participants.contains(who)
    }

    pub fn partner_of(&self, who: &ParticipantId) -> Option<&ParticipantId> {
        match &self.participants {
            [a, b] if a == who => Some(b),
            [a, b] if b == who => Some(a),
            _ => None,
        }
    }

    pub fn is_designated(&self, who: &ParticipantId) -> bool {
        &self.arm.designated == who
    }

    /// Whether the designated participant's current turn can be intercepted.
    pub fn cadence_armed(&self) -> bool {
        self.cadence == Cadence::Armed
    }

    /// Interventions delivered (Treated) or phantom-counted (Control).
    pub fn dose(&self) -> u8 {
        match self.arm.kind {
            ArmKind::Treated => self.interventions_delivered,
            ArmKind::Control => self.phantom_interventions,
        }
    }

    fn ensure_author(&self, author: &ParticipantId) -> Result<(), ConversationError> {
        if self.is_participant(author) {
            Ok(())
        } else {
            Err(ConversationError::UnknownParticipant(author.clone()))
        }
    }

    /// Moves the turn pointer for a new message by `author` and returns the
    /// message's turn index. The first message is turn 0; the index grows by
    /// one exactly when the speaker changes.
    pub fn advance_turn(&mut self, author: &ParticipantId) -> Result<u32, ConversationError> {
        if !self.is_active() {
            return Err(ConversationError::NotActive);
        }
        self.ensure_author(author)?;
        let (index, new_turn) = match &self.current_turn {
            None => (0, true),
            Some(turn) if &turn.speaker == author => (turn.index, false),
            Some(turn) => (turn.index + 1, true),
        };
        if new_turn {
            self.current_turn = Some(Turn {
                speaker: author.clone(),
                index,
            });
            if self.is_designated(author) {
                self.cadence = self.cadence.on_new_designated_turn();
            }
        }
        Ok(index)
    }

    /// Appends a newly composed, not yet delivered message.
    pub fn compose(
        &mut self,
        id: MessageId,
        author: &ParticipantId,
        text: &str,
        at: Millis,
    ) -> Result<&Message, ConversationError> {
        if text.trim().is_empty() {
            return Err(ConversationError::EmptyText);
        }
        let turn_index = self.advance_turn(author)?;
        self.messages.push(Message {
            id,
            author: author.clone(),
            turn_index,
            original_text: text.to_owned(),
            final_text: text.to_owned(),
            provenance: Provenance::Original,
            timestamp: at,
            delivered_at: None,
        });
        Ok(self.messages.last().expect("just pushed"))
    }

    fn counter(&self) -> u8 {
        self.dose()
    }

    /// Pure decision for a message composed in the current turn.
    pub fn intervention_decision(&self, message: &Message) -> Decision {
        let eligible = self.is_active()
            && self.is_designated(&message.author)
            && word_count(&message.original_text) > INTERCEPT_MIN_EXCLUSIVE_WORDS
            && self.cadence_armed()
            && self.counter() < MAX_INTERVENTIONS;
        if eligible {
            Decision::Intercept
        } else {
            Decision::PassThrough
        }
    }

    /// Counts one interception (real for Treated, phantom for Control),
    /// disarms the cadence and completes the conversation at the fourth.
    /// Returns the new dose.
    pub fn record_intervention(&mut self) -> Result<u8, ConversationError> {
        if self.counter() >= MAX_INTERVENTIONS {
            return Err(ConversationError::CounterOverflow);
        }
        if !self.is_active() {
            return Err(ConversationError::NotActive);
        }
        if !self.cadence_armed() {
            return Err(ConversationError::NotArmed);
        }
        let counter = match self.arm.kind {
            ArmKind::Treated => &mut self.interventions_delivered,
            ArmKind::Control => &mut self.phantom_interventions,
        };
        *counter += 1;
        let dose = *counter;
        self.cadence = Cadence::Spent;
        if dose == MAX_INTERVENTIONS {
            self.status = Status::Ended(EndReason::Complete);
        }
        Ok(dose)
    }

    /// Marks the current designated turn as consumed by an offer that failed
    /// open. Nothing is counted.
    pub fn record_failed_attempt(&mut self) -> Result<(), ConversationError> {
        if !self.cadence_armed() {
            return Err(ConversationError::NotArmed);
        }
        self.cadence = Cadence::Attempted;
        Ok(())
    }

    /// Finalizes a composed message. Allowed while active, and after a
    /// completion so the message that triggered the fourth offer still goes
    /// out.
    pub fn deliver(
        &mut self,
        id: &MessageId,
        final_text: &str,
        provenance: Provenance,
        at: Millis,
    ) -> Result<&Message, ConversationError> {
        if matches!(
            self.status,
            Status::Ended(EndReason::Departure | EndReason::Fault)
        ) {
            return Err(ConversationError::NotActive);
        }
        if final_text.trim().is_empty() {
            return Err(ConversationError::EmptyText);
        }
        let message = self
            .messages
            .iter_mut()
            .find(|m| &m.id == id)
            .ok_or_else(|| ConversationError::UnknownMessage(id.clone()))?;
        if message.is_delivered() {
            return Err(ConversationError::AlreadyDelivered(id.clone()));
        }
        if provenance == Provenance::Original && final_text != message.original_text {
            return Err(ConversationError::ProvenanceMismatch);
        }
        message.final_text = final_text.to_owned();
        message.provenance = provenance;
        message.delivered_at = Some(at);
        Ok(message)
    }

    /// Ends the conversation. Returns false if it had already ended.
    pub fn end(&mut self, reason: EndReason) -> bool {
        if self.is_active() {
            self.status = Status::Ended(reason);
            true
        } else {
            false
        }
    }

    pub fn message(&self, id: &MessageId) -> Option<&Message> {
        self.messages.iter().find(|m| &m.id == id)
    }

    /// The latest `k` delivered messages, oldest first.
    pub fn recent_delivered(&self, k: usize) -> Vec<&Message> {
        let mut recent: Vec<&Message> = self
            .messages
            .iter()
            .rev()
            .filter(|m| m.is_delivered())
            .take(k)
            .collect();
        recent.reverse();
        recent
    }

    /// Zero-based ordinal of `turn_index` among the turns taken by `author`.
    pub fn own_turn_ordinal(&self, author: &ParticipantId, turn_index: u32) -> usize {
        let mut seen: Vec<u32> = self
            .messages
            .iter()
            .filter(|m| &m.author == author && m.turn_index < turn_index)
            .map(|m| m.turn_index)
            .collect();
        seen.dedup();
        seen.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pid(s: &str) -> ParticipantId {
        ParticipantId::from(s)
    }

    fn state(kind: ArmKind) -> ConversationState {
        ConversationState::new(
            ConversationId::from("c1"),
            [pid("A"), pid("B")],
            TreatmentArm {
                kind,
                designated: pid("A"),
            },
            0,
        )
        .unwrap()
    }

    fn send(s: &mut ConversationState, n: usize, author: &str, text: &str) -> Decision {
        let id = MessageId::new(format!("m{n}"));
        let msg = s.compose(id.clone(), &pid(author), text, n as u64).unwrap().clone();
        let decision = s.intervention_decision(&msg);
        if decision == Decision::Intercept {
            s.record_intervention().unwrap();
        }
        s.deliver(&id, text, Provenance::Original, n as u64).unwrap();
        decision
    }

    #[test]
    fn turn_indices_follow_speaker_changes() {
        let cases: [(&[&str], &[u32]); 3] = [
            (&["A", "A", "B", "A"], &[0, 0, 1, 2]),
            (&["A"], &[0]),
            (&["A", "B", "B", "B", "A"], &[0, 1, 1, 1, 2]),
        ];
        for (authors, expected) in cases {
            let mut s = state(ArmKind::Treated);
            let got: Vec<u32> = authors
                .iter()
                .map(|a| s.advance_turn(&pid(a)).unwrap())
                .collect();
            assert_eq!(got, expected);
        }
    }

    #[test]
    fn advance_turn_rejects_strangers() {
        let mut s = state(ArmKind::Treated);
        assert_eq!(
            s.advance_turn(&pid("Z")),
            Err(ConversationError::UnknownParticipant(pid("Z")))
        );
    }

    #[test]
    fn short_first_message_passes_then_long_one_is_intercepted() {
        let mut s = state(ArmKind::Treated);
        assert_eq!(send(&mut s, 0, "A", "hi"), Decision::PassThrough);
        assert_eq!(
            send(&mut s, 1, "A", "I really think laws must change"),
            Decision::Intercept
        );
        assert_eq!(s.dose(), 1);
    }

    #[test]
    fn exactly_four_words_is_not_intercepted() {
        let mut s = state(ArmKind::Treated);
        assert_eq!(send(&mut s, 0, "A", "gun laws matter here"), Decision::PassThrough);
        assert!(s.cadence_armed());
    }

    #[test]
    fn every_other_designated_turn() {
        let mut s = state(ArmKind::Treated);
        let long = "this message is clearly long enough";
        assert_eq!(send(&mut s, 0, "A", long), Decision::Intercept);
        // only the first qualifying message in a turn
        assert_eq!(send(&mut s, 1, "A", long), Decision::PassThrough);
        send(&mut s, 2, "B", long);
        assert_eq!(send(&mut s, 3, "A", long), Decision::PassThrough);
        assert_eq!(send(&mut s, 4, "A", long), Decision::PassThrough);
        send(&mut s, 5, "B", long);
        assert_eq!(send(&mut s, 6, "A", "ok"), Decision::PassThrough);
        assert_eq!(send(&mut s, 7, "A", long), Decision::Intercept);
        assert_eq!(s.dose(), 2);
    }

    #[test]
    fn partner_is_never_intercepted() {
        let mut s = state(ArmKind::Treated);
        let twenty = vec!["word"; 20].join(" ");
        assert_eq!(send(&mut s, 0, "B", &twenty), Decision::PassThrough);
        assert_eq!(s.dose(), 0);
    }

    #[test]
    fn fourth_interception_completes() {
        let mut s = state(ArmKind::Treated);
        s.interventions_delivered = 3;
        assert_eq!(s.record_intervention(), Ok(4));
        assert_eq!(s.status, Status::Ended(EndReason::Complete));
        assert_eq!(s.dose(), 4);
        assert_eq!(
            s.record_intervention(),
            Err(ConversationError::CounterOverflow)
        );
    }

    #[test]
    fn first_interception_keeps_active() {
        let mut s = state(ArmKind::Treated);
        assert_eq!(s.record_intervention(), Ok(1));
        assert!(s.is_active());
    }

    #[test]
    fn control_counts_phantoms_only() {
        let mut s = state(ArmKind::Control);
        s.phantom_interventions = 1;
        assert_eq!(s.record_intervention(), Ok(2));
        assert_eq!(s.interventions_delivered, 0);
        assert_eq!(s.dose(), 2);
    }

    #[test]
    fn failed_attempt_consumes_turn_but_not_cadence() {
        let mut s = state(ArmKind::Treated);
        let long = "this message is clearly long enough";
        let m = s.compose(MessageId::from("m0"), &pid("A"), long, 0).unwrap().clone();
        assert_eq!(s.intervention_decision(&m), Decision::Intercept);
        s.record_failed_attempt().unwrap();
        s.deliver(&m.id, long, Provenance::Original, 0).unwrap();
        assert_eq!(send(&mut s, 1, "A", long), Decision::PassThrough);
        send(&mut s, 2, "B", long);
        assert_eq!(send(&mut s, 3, "A", long), Decision::Intercept);
        assert_eq!(s.dose(), 1);
    }

    #[test]
    fn fourth_message_still_delivered_after_completion() {
        let mut s = state(ArmKind::Treated);
        s.interventions_delivered = 3;
        let long = "this message is clearly long enough";
        let m = s.compose(MessageId::from("m0"), &pid("A"), long, 0).unwrap().clone();
        assert_eq!(s.intervention_decision(&m), Decision::Intercept);
        s.record_intervention().unwrap();
        assert!(!s.is_active());
        let delivered = s
            .deliver(&m.id, "softer text", Provenance::Edited, 5)
            .unwrap();
        assert_eq!(delivered.delivered_at, Some(5));
        assert_eq!(
            s.compose(MessageId::from("m1"), &pid("B"), "more", 6).unwrap_err(),
            ConversationError::NotActive
        );
    }

    #[test]
    fn delivery_rules() {
        let mut s = state(ArmKind::Treated);
        let m = s.compose(MessageId::from("m0"), &pid("B"), "hello", 0).unwrap().clone();
        assert_eq!(
            s.deliver(&m.id, "other", Provenance::Original, 1).unwrap_err(),
            ConversationError::ProvenanceMismatch
        );
        assert_eq!(
            s.deliver(&m.id, " ", Provenance::Edited, 1).unwrap_err(),
            ConversationError::EmptyText
        );
        s.deliver(&m.id, "hello", Provenance::Original, 1).unwrap();
        assert_eq!(
            s.deliver(&m.id, "hello", Provenance::Original, 1).unwrap_err(),
            ConversationError::AlreadyDelivered(m.id.clone())
        );
        s.end(EndReason::Departure);
        assert!(!s.end(EndReason::Departure));
    }

    #[test]
    fn arm_must_name_a_participant() {
        let err = ConversationState::new(
            ConversationId::from("c"),
            [pid("A"), pid("B")],
            TreatmentArm {
                kind: ArmKind::Treated,
                designated: pid("C"),
            },
            0,
        )
        .unwrap_err();
        assert_eq!(err, ConversationError::InvalidArm(pid("C")));
    }
}
