//! Core domain for running AI-mediated dyadic conversations.
//!
//! The crate holds everything that does not need a network socket or a
//! statistics package:
//!
//! - [`conversation`]: conversation entities and the intervention cadence
//!   state machine that decides which messages are intercepted.
//! - [`matching`]: stance queues that pair only disagreeing participants and
//!   randomize the treatment arm.
//! - [`rephrase`]: strategy prompts, the pluggable language-model provider,
//!   offer assembly and choice resolution.
//! - [`surveys`]: pre/post instruments and 0-100 outcome indices.
//! - [`tables`]: the flat per-message and per-participant export schema that
//!   the analysis side consumes.

pub mod clock;
pub mod conversation;
pub mod ids;
pub mod matching;
pub mod rephrase;
pub mod rng;
pub mod surveys;
pub mod tables;
pub mod text;

pub use clock::{Clock, ManualClock, Millis, SystemClock};
pub use conversation::{
    ArmKind, Cadence, ConversationError, ConversationState, Decision, EndReason, Message,
    Provenance, Status, TreatmentArm,
};
pub use ids::{ConversationId, MessageId, OfferId, ParticipantId};
pub use matching::{Matcher, QueueEntry, Stance};
pub use rephrase::{Choice, RephraseOffer, Selection, Strategy, Suggestion};
pub use text::word_count;

/// Interventions (real or phantom) after which a conversation is complete.
pub const MAX_INTERVENTIONS: u8 = 4;
