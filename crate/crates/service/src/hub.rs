//! The conversation hub.
//!
//! One [`Hub`] owns the matcher, every live conversation, every participant
//! session and the event sink. It is synchronous and never reads a wall
//! clock: callers pass `now` in and drive timeouts through [`Hub::tick`].
//! Provider calls happen outside the hub. An intercepted message yields an
//! [`OfferTicket`]; the caller runs the engine and hands the result back to
//! [`Hub::offer_ready`].
//!
//! Every effect is appended to the log before the frames that acknowledge it
//! are released. When an append fails the affected conversation ends with
//! `Fault` and the unlogged frames are dropped.

use std::collections::{BTreeMap, BTreeSet};

use rand::rngs::StdRng;
use serde::{Deserialize, Serialize};

use parley_core::conversation::{ArmKind, ConversationState, Decision, EndReason, Provenance, Status};
use parley_core::matching::{assign_arm, Matcher, QueueEntry};
use parley_core::rephrase::{
    choice_timeout, resolve_choice, ChoiceError, OfferFailure, OfferRequest, RephraseOffer,
    Resolution, Suggestion,
};
use parley_core::rng::{streams, substream};
use parley_core::surveys::{
    stance_from_pre_survey, Answer, Instrument, InstrumentId, Scale, STANCE_ITEM,
};
use parley_core::{
    Choice, ConversationId, MessageId, Millis, OfferId, ParticipantId, Selection, Stance,
};

use crate::events::{Event, EventRecord, EventSink, LeaveReason, Routing};
use crate::protocol::{ClientFrame, ErrorCode, ServerFrame, WireSelection, MAX_MESSAGE_CHARS};

pub const DEFAULT_TUTORIAL: &str = "While you chat, an assistant may suggest other ways to phrase \
some of your messages. You can send one of its suggestions, edit one, or send your own message \
unchanged. Your partner only sees the message you choose to send.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HubConfig {
    pub seed: u64,
    pub queue_timeout_ms: Millis,
    pub offer_timeout_ms: Millis,
    pub idle_timeout_ms: Millis,
    pub tutorial: String,
    /// Overrides the arm coin for scripted runs; the designated participant
    /// is still drawn at random.
    pub forced_arm: Option<ArmKind>,
    #[serde(skip)]
    pub pre_survey: Option<Instrument>,
    #[serde(skip)]
    pub post_survey: Option<Instrument>,
}

impl Default for HubConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            queue_timeout_ms: 300_000,
            offer_timeout_ms: 120_000,
            idle_timeout_ms: 180_000,
            tutorial: DEFAULT_TUTORIAL.to_owned(),
            forced_arm: None,
            pre_survey: None,
            post_survey: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outbound {
    pub to: ParticipantId,
    pub frame: ServerFrame,
}

/// A pending provider call for one intercepted message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OfferTicket {
    pub conversation: ConversationId,
    pub offer_id: OfferId,
    pub request: OfferRequest,
    pub requested_at: Millis,
}

#[derive(Debug, Default, Clone, PartialEq)]
pub struct Effects {
    pub frames: Vec<Outbound>,
    pub offer_requests: Vec<OfferTicket>,
}

impl Effects {
    pub fn frames_for<'a>(&'a self, who: &ParticipantId) -> impl Iterator<Item = &'a ServerFrame> + 'a {
        let who = who.clone();
        self.frames.iter().filter(move |o| o.to == who).map(|o| &o.frame)
    }

    pub fn merge(&mut self, other: Effects) {
        self.frames.extend(other.frames);
        self.offer_requests.extend(other.offer_requests);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Phase {
    Lobby,
    Queued,
    Unmatched,
    Chatting(ConversationId),
    /// Conversation over; only the post-survey remains.
    Finished(ConversationId),
}

#[derive(Debug, Clone)]
struct Session {
    token: String,
    stance: Option<Stance>,
    phase: Phase,
    last_seen: Millis,
    submissions: BTreeMap<InstrumentId, String>,
}

#[derive(Debug, Clone)]
enum Pending {
    Generating {
        message_id: MessageId,
        offer_id: OfferId,
        author: ParticipantId,
    },
    Offered {
        offer: RephraseOffer,
        author: ParticipantId,
    },
}

impl Pending {
    fn author(&self) -> &ParticipantId {
        match self {
            Pending::Generating { author, .. } | Pending::Offered { author, .. } => author,
        }
    }

    fn ids(&self) -> (&OfferId, &MessageId) {
        match self {
            Pending::Generating {
                offer_id,
                message_id,
                ..
            } => (offer_id, message_id),
            Pending::Offered { offer, .. } => (&offer.offer_id, &offer.message_id),
        }
    }
}

#[derive(Debug, Clone)]
struct Room {
    state: ConversationState,
    pending: Option<Pending>,
    messages: u32,
    offers: u32,
    /// A `ConversationEnded` record has been written (or the room faulted).
    closed: bool,
}

/// Frames and log appends produced by one hub call. Frames are held per
/// conversation so that a failed append can withdraw them.
struct Batch {
    effects: Effects,
    faulted: BTreeSet<ConversationId>,
    /// Index into `effects.frames` where each conversation's first frame of
    /// this batch was pushed.
    conv_frames: BTreeMap<ConversationId, Vec<usize>>,
    personal_fault: BTreeSet<ParticipantId>,
}

impl Batch {
    fn new() -> Self {
        Self {
            effects: Effects::default(),
            faulted: BTreeSet::new(),
            conv_frames: BTreeMap::new(),
            personal_fault: BTreeSet::new(),
        }
    }

    fn send(&mut self, to: &ParticipantId, frame: ServerFrame) {
        self.effects.frames.push(Outbound {
            to: to.clone(),
            frame,
        });
    }

    fn send_in(&mut self, conv: &ConversationId, to: &ParticipantId, frame: ServerFrame) {
        self.conv_frames
            .entry(conv.clone())
            .or_default()
            .push(self.effects.frames.len());
        self.send(to, frame);
    }
}

pub struct Hub {
    config: HubConfig,
    pre: Instrument,
    post: Instrument,
    sink: Box<dyn EventSink>,
    seq: u64,
    matcher: Matcher,
    sessions: BTreeMap<ParticipantId, Session>,
    rooms: BTreeMap<ConversationId, Room>,
    conversations: u64,
    arm_rng: StdRng,
    order_rng: StdRng,
}

fn violation(detail: impl Into<String>) -> ServerFrame {
    ServerFrame::error(ErrorCode::ProtocolViolation, detail)
}

impl Hub {
    pub fn new(config: HubConfig, sink: Box<dyn EventSink>) -> Self {
        let pre = config.pre_survey.clone().unwrap_or_else(Instrument::default_pre);
        let post = config.post_survey.clone().unwrap_or_else(Instrument::default_post);
        Self {
            arm_rng: substream(config.seed, streams::ARMS),
            order_rng: substream(config.seed, streams::DISPLAY_ORDER),
            config,
            pre,
            post,
            sink,
            seq: 0,
            matcher: Matcher::new(),
            sessions: BTreeMap::new(),
            rooms: BTreeMap::new(),
            conversations: 0,
        }
    }

    pub fn config(&self) -> &HubConfig {
        &self.config
    }

    pub fn instrument(&self, id: InstrumentId) -> &Instrument {
        match id {
            InstrumentId::PreSurvey => &self.pre,
            InstrumentId::PostSurvey => &self.post,
        }
    }

    /// Records appended so far.
    pub fn seq(&self) -> u64 {
        self.seq
    }

    pub fn conversation(&self, id: &ConversationId) -> Option<&ConversationState> {
        self.rooms.get(id).map(|r| &r.state)
    }

    pub fn conversations(&self) -> impl Iterator<Item = &ConversationState> {
        self.rooms.values().map(|r| &r.state)
    }

    pub fn phase(&self, who: &ParticipantId) -> Option<&Phase> {
        self.sessions.get(who).map(|s| &s.phase)
    }

    pub fn has_pending_offer(&self, id: &ConversationId) -> bool {
        self.rooms.get(id).is_some_and(|r| r.pending.is_some())
    }

    /// Conversations not yet closed, or with a pending offer.
    pub fn open_conversations(&self) -> usize {
        self.rooms.values().filter(|r| !r.closed).count()
    }

    fn emit(
        &mut self,
        batch: &mut Batch,
        conversation: Option<&ConversationId>,
        at: Millis,
        event: Event,
    ) -> bool {
        if conversation.is_some_and(|c| batch.faulted.contains(c)) {
            return false;
        }
        let record = EventRecord {
            seq: self.seq,
            conversation: conversation.cloned(),
            at,
            event,
        };
        match self.sink.append(&record) {
            Ok(()) => {
                self.seq += 1;
                true
            }
            Err(error) => {
                tracing::error!(%error, kind = record.event.name(), "event log append failed");
                match conversation {
                    Some(c) => {
                        batch.faulted.insert(c.clone());
                    }
                    None => {
                        if let Some(p) = event_participant(&record.event) {
                            batch.personal_fault.insert(p.clone());
                        }
                    }
                }
                false
            }
        }
    }

    /// Withdraws frames of faulted conversations and tells both members.
    fn finish(&mut self, mut batch: Batch) -> Effects {
        let mut drop: BTreeSet<usize> = BTreeSet::new();
        for conv in &batch.faulted {
            if let Some(indices) = batch.conv_frames.get(conv) {
                drop.extend(indices.iter().copied());
            }
        }
        if !drop.is_empty() {
            let frames = std::mem::take(&mut batch.effects.frames);
            batch.effects.frames = frames
                .into_iter()
                .enumerate()
                .filter(|(i, _)| !drop.contains(i))
                .map(|(_, f)| f)
                .collect();
        }
        for conv in std::mem::take(&mut batch.faulted) {
            batch
                .effects
                .offer_requests
                .retain(|t| t.conversation != conv);
            let Some(room) = self.rooms.get_mut(&conv) else {
                continue;
            };
            room.state.status = Status::Ended(EndReason::Fault);
            room.pending = None;
            room.closed = true;
            for p in room.state.participants.clone() {
                if let Some(s) = self.sessions.get_mut(&p) {
                    s.phase = Phase::Finished(conv.clone());
                }
                batch.send(&p, ServerFrame::error(ErrorCode::Fault, "event log unavailable"));
                batch.send(
                    &p,
                    ServerFrame::ConversationEnded {
                        conversation_id: conv.clone(),
                        reason: EndReason::Fault,
                    },
                );
                batch.send(
                    &p,
                    ServerFrame::RouteToSurvey {
                        instrument: InstrumentId::PostSurvey,
                    },
                );
            }
        }
        for p in std::mem::take(&mut batch.personal_fault) {
            batch.send(&p, ServerFrame::error(ErrorCode::Fault, "event log unavailable"));
        }
        batch.effects
    }

    /// Applies one client frame from an authenticated participant. `Hello`
    /// frames authenticate `from` itself.
    pub fn handle(&mut self, from: &ParticipantId, frame: ClientFrame, now: Millis) -> Effects {
        let mut batch = Batch::new();
        if let ClientFrame::Hello { participant, token } = frame {
            self.hello(&mut batch, participant, token, now);
            return self.finish(batch);
        }
        let Some(session) = self.sessions.get_mut(from) else {
            batch.send(
                from,
                ServerFrame::error(ErrorCode::NotAuthenticated, "send hello first"),
            );
            return self.finish(batch);
        };
        session.last_seen = session.last_seen.max(now);
        match frame {
            ClientFrame::Hello { .. } => unreachable!("handled above"),
            ClientFrame::Ping => batch.send(from, ServerFrame::Pong),
            ClientFrame::GetInstrument { instrument } => {
                let instrument = self.instrument(instrument).clone();
                batch.send(from, ServerFrame::Instrument { instrument });
            }
            ClientFrame::SubmitSurvey {
                wave,
                answers,
                submission_id,
            } => self.submit_survey(&mut batch, from, wave, answers, submission_id, now),
            ClientFrame::Join => self.join(&mut batch, from, now),
            ClientFrame::SendMessage { text } => self.send_message(&mut batch, from, text, now),
            ClientFrame::ChooseRephrasing {
                offer_id,
                selection,
            } => self.choose(&mut batch, from, offer_id, selection, now),
            ClientFrame::Leave => self.depart(&mut batch, from, LeaveReason::Left, now),
        }
        self.finish(batch)
    }

    fn hello(&mut self, batch: &mut Batch, participant: ParticipantId, token: String, now: Millis) {
        if token.trim().is_empty() || participant.as_str().trim().is_empty() {
            batch.send(
                &participant,
                ServerFrame::error(ErrorCode::NotAuthenticated, "participant and token are required"),
            );
            return;
        }
        let session = self
            .sessions
            .entry(participant.clone())
            .or_insert_with(|| Session {
                token: token.clone(),
                stance: None,
                phase: Phase::Lobby,
                last_seen: now,
                submissions: BTreeMap::new(),
            });
        if session.token != token {
            batch.send(
                &participant,
                ServerFrame::error(ErrorCode::NotAuthenticated, "token does not match"),
            );
            return;
        }
        session.last_seen = session.last_seen.max(now);
        let resumed_conversation = match &session.phase {
            Phase::Chatting(c) => Some(c.clone()),
            _ => None,
        };
        batch.send(
            &participant,
            ServerFrame::Welcome {
                participant: participant.clone(),
                resumed_conversation,
            },
        );
    }

    fn validate_answers(
        instrument: &Instrument,
        answers: &BTreeMap<String, Answer>,
    ) -> Result<(), String> {
        for id in answers.keys() {
            if instrument.item(id).is_none() {
                return Err(format!("unknown item {id}"));
            }
        }
        for item in &instrument.items {
            let answer = answers
                .get(&item.id)
                .ok_or_else(|| format!("item {} is unanswered", item.id))?;
            match (&item.scale, answer) {
                (Scale::Likert7, Answer::Likert(v)) if (1..=7).contains(v) => {}
                (Scale::Categorical(options), Answer::Choice(c)) if options.contains(c) => {}
                _ => return Err(format!("item {} has an invalid answer", item.id)),
            }
        }
        Ok(())
    }

    fn submit_survey(
        &mut self,
        batch: &mut Batch,
        from: &ParticipantId,
        wave: InstrumentId,
        answers: BTreeMap<String, Answer>,
        submission_id: String,
        now: Millis,
    ) {
        let session = &self.sessions[from];
        if let Some(previous) = session.submissions.get(&wave) {
            if *previous == submission_id {
                batch.send(
                    from,
                    ServerFrame::SurveyAccepted {
                        wave,
                        submission_id,
                        duplicate: true,
                    },
                );
            } else {
                batch.send(
                    from,
                    ServerFrame::error(ErrorCode::SurveyInvalid, "wave already submitted"),
                );
            }
            return;
        }
        let open = matches!(
            (&session.phase, wave),
            (Phase::Lobby | Phase::Unmatched, InstrumentId::PreSurvey)
                | (Phase::Finished(_), InstrumentId::PostSurvey)
        );
        if !open {
            batch.send(from, violation(format!("{wave:?} is not open")));
            return;
        }
        if let Err(detail) = Self::validate_answers(self.instrument(wave), &answers) {
            batch.send(from, ServerFrame::error(ErrorCode::SurveyInvalid, detail));
            return;
        }
        let stance = match (wave, answers.get(STANCE_ITEM)) {
            (InstrumentId::PreSurvey, Some(Answer::Choice(text))) => match stance_from_pre_survey(text) {
                Ok(s) => Some(s),
                Err(e) => {
                    batch.send(from, ServerFrame::error(ErrorCode::SurveyInvalid, e.to_string()));
                    return;
                }
            },
            _ => None,
        };
        let logged = self.emit(
            batch,
            None,
            now,
            Event::SurveySubmitted {
                participant: from.clone(),
                wave,
                submission_id: submission_id.clone(),
                answers,
            },
        );
        if !logged {
            return;
        }
        let session = self.sessions.get_mut(from).expect("checked above");
        session.submissions.insert(wave, submission_id.clone());
        if stance.is_some() {
            session.stance = stance;
        }
        batch.send(
            from,
            ServerFrame::SurveyAccepted {
                wave,
                submission_id,
                duplicate: false,
            },
        );
    }

    fn join(&mut self, batch: &mut Batch, from: &ParticipantId, now: Millis) {
        let session = &self.sessions[from];
        if !matches!(session.phase, Phase::Lobby | Phase::Unmatched) {
            batch.send(from, violation("already queued or matched"));
            return;
        }
        let Some(stance) = session.stance else {
            batch.send(from, violation("submit the pre-survey before joining"));
            return;
        };
        if !self.emit(
            batch,
            None,
            now,
            Event::Joined {
                participant: from.clone(),
                stance,
            },
        ) {
            return;
        }
        self.matcher
            .enqueue(QueueEntry {
                participant: from.clone(),
                stance,
                enqueued_at: now,
            })
            .expect("phase guards against double queueing");
        self.sessions.get_mut(from).expect("known").phase = Phase::Queued;
        batch.send(from, ServerFrame::Waiting);
        while let Some(pair) = self.matcher.try_match() {
            self.start_conversation(batch, pair, now);
        }
    }

    fn start_conversation(&mut self, batch: &mut Batch, pair: parley_core::matching::Pair, now: Millis) {
        self.conversations += 1;
        let id = ConversationId::new(format!("c{:06}", self.conversations));
        let mut arm = assign_arm(&pair, &mut self.arm_rng);
        if let Some(kind) = self.config.forced_arm {
            arm.kind = kind;
        }
        let participants = pair.participants();
        let state = ConversationState::new(id.clone(), participants.clone(), arm.clone(), now)
            .expect("pair members are distinct queue entries");
        self.rooms.insert(
            id.clone(),
            Room {
                state,
                pending: None,
                messages: 0,
                offers: 0,
                closed: false,
            },
        );
        for p in &participants {
            let s = self.sessions.get_mut(p).expect("queued participants have sessions");
            s.phase = Phase::Chatting(id.clone());
            s.last_seen = s.last_seen.max(now);
        }
        let ok = self.emit(
            batch,
            Some(&id),
            now,
            Event::Matched {
                participants: participants.clone(),
                stances: [pair.more_strict.stance, pair.other.stance],
            },
        ) && self.emit(
            batch,
            Some(&id),
            now,
            Event::ArmAssigned {
                arm: arm.kind,
                designated: arm.designated.clone(),
                seed: self.config.seed,
            },
        );
        if !ok {
            return;
        }
        for (me, partner) in [(0, 1), (1, 0)] {
            batch.send_in(
                &id,
                &participants[me],
                ServerFrame::Matched {
                    conversation_id: id.clone(),
                    partner: participants[partner].clone(),
                },
            );
        }
        if arm.kind == ArmKind::Treated
            && self.emit(
                batch,
                Some(&id),
                now,
                Event::TutorialShown {
                    participant: arm.designated.clone(),
                },
            )
        {
            batch.send_in(
                &id,
                &arm.designated,
                ServerFrame::Tutorial {
                    text: self.config.tutorial.clone(),
                },
            );
        }
    }

    fn room_of(&self, who: &ParticipantId) -> Option<ConversationId> {
        match &self.sessions.get(who)?.phase {
            Phase::Chatting(c) => Some(c.clone()),
            _ => None,
        }
    }

    fn send_message(&mut self, batch: &mut Batch, from: &ParticipantId, text: String, now: Millis) {
        if text.chars().count() > MAX_MESSAGE_CHARS {
            batch.send(
                from,
                ServerFrame::error(
                    ErrorCode::OversizedMessage,
                    format!("messages are limited to {MAX_MESSAGE_CHARS} characters"),
                ),
            );
            return;
        }
        if text.trim().is_empty() {
            batch.send(from, ServerFrame::error(ErrorCode::EmptyMessage, "message is empty"));
            return;
        }
        let Some(conv) = self.room_of(from) else {
            batch.send(
                from,
                ServerFrame::error(ErrorCode::UnknownConversation, "not in a conversation"),
            );
            return;
        };
        let room = self.rooms.get_mut(&conv).expect("session points at a room");
        if !room.state.is_active() {
            batch.send(
                from,
                ServerFrame::error(ErrorCode::ConversationClosing, "the conversation is ending"),
            );
            return;
        }
        if room.pending.as_ref().is_some_and(|p| p.author() == from) {
            batch.send(from, violation("resolve the pending rephrasing first"));
            return;
        }
        let message_id = MessageId::new(format!("{conv}-m{}", room.messages));
        room.messages += 1;
        let message = room
            .state
            .compose(message_id.clone(), from, &text, now)
            .expect("active conversation and member author")
            .clone();
        let decision = room.state.intervention_decision(&message);
        let kind = room.state.arm.kind;
        let routing = match (decision, kind) {
            (Decision::PassThrough, _) => Routing::PassThrough,
            (Decision::Intercept, ArmKind::Treated) => Routing::Intercept,
            (Decision::Intercept, ArmKind::Control) => Routing::Phantom,
        };
        let logged = self.emit(
            batch,
            Some(&conv),
            now,
            Event::MessageComposed {
                message_id: message_id.clone(),
                author: from.clone(),
                turn_index: message.turn_index,
                word_count: message.word_count(),
                text: text.clone(),
                routing,
            },
        );
        if !logged {
            return;
        }
        match routing {
            Routing::PassThrough => {
                self.deliver(batch, &conv, &message_id, &text, Provenance::Original, now);
            }
            Routing::Phantom => {
                let room = self.rooms.get_mut(&conv).expect("room");
                let dose = room.state.record_intervention().expect("decision said intercept");
                if self.emit(
                    batch,
                    Some(&conv),
                    now,
                    Event::PhantomIntervention {
                        message_id: message_id.clone(),
                        participant: from.clone(),
                        dose,
                    },
                ) {
                    self.deliver(batch, &conv, &message_id, &text, Provenance::Original, now);
                }
            }
            Routing::Intercept => {
                let room = self.rooms.get_mut(&conv).expect("room");
                room.offers += 1;
                let offer_id = OfferId::new(format!("{conv}-o{}", room.offers));
                let request = OfferRequest::from_state(&room.state, &message_id, from, &text);
                room.pending = Some(Pending::Generating {
                    message_id: message_id.clone(),
                    offer_id: offer_id.clone(),
                    author: from.clone(),
                });
                batch.send_in(&conv, from, ServerFrame::OfferPending { message_id });
                batch.effects.offer_requests.push(OfferTicket {
                    conversation: conv,
                    offer_id,
                    request,
                    requested_at: now,
                });
            }
        }
    }

    /// Finalizes a message, forwards it and closes a completed conversation.
    fn deliver(
        &mut self,
        batch: &mut Batch,
        conv: &ConversationId,
        message_id: &MessageId,
        final_text: &str,
        provenance: Provenance,
        now: Millis,
    ) {
        let room = self.rooms.get_mut(conv).expect("room");
        let message = room
            .state
            .deliver(message_id, final_text, provenance, now)
            .expect("message is composed and undelivered")
            .clone();
        let partner = room
            .state
            .partner_of(&message.author)
            .expect("author is a member")
            .clone();
        if !self.emit(
            batch,
            Some(conv),
            now,
            Event::MessageDelivered {
                message_id: message_id.clone(),
                author: message.author.clone(),
                final_text: final_text.to_owned(),
                provenance,
            },
        ) {
            return;
        }
        batch.send_in(
            conv,
            &message.author,
            ServerFrame::MessageDelivered {
                message_id: message_id.clone(),
                text: final_text.to_owned(),
            },
        );
        batch.send_in(
            conv,
            &partner,
            ServerFrame::PartnerMessage {
                message_id: message_id.clone(),
                text: final_text.to_owned(),
                turn_index: message.turn_index,
            },
        );
        let room = &self.rooms[conv];
        if room.state.status == Status::Ended(EndReason::Complete) && room.pending.is_none() {
            self.close(batch, conv, EndReason::Complete, now);
        }
    }

    /// Writes `ConversationEnded` and routes both members to the post-survey.
    fn close(&mut self, batch: &mut Batch, conv: &ConversationId, reason: EndReason, now: Millis) {
        let room = self.rooms.get_mut(conv).expect("room");
        if room.closed {
            return;
        }
        room.state.end(reason);
        room.closed = true;
        let dose = room.state.dose();
        let participants = room.state.participants.clone();
        let final_reason = match room.state.status {
            Status::Ended(r) => r,
            Status::Active => reason,
        };
        for p in &participants {
            if let Some(s) = self.sessions.get_mut(p) {
                s.phase = Phase::Finished(conv.clone());
            }
        }
        if !self.emit(
            batch,
            Some(conv),
            now,
            Event::ConversationEnded {
                reason: final_reason,
                dose,
            },
        ) {
            return;
        }
        for p in &participants {
            batch.send_in(
                conv,
                p,
                ServerFrame::ConversationEnded {
                    conversation_id: conv.clone(),
                    reason: final_reason,
                },
            );
            batch.send_in(
                conv,
                p,
                ServerFrame::RouteToSurvey {
                    instrument: InstrumentId::PostSurvey,
                },
            );
        }
    }

    /// Hands back the engine result for `ticket`. Stale tickets (the room
    /// closed or the pending message changed) are ignored.
    pub fn offer_ready(
        &mut self,
        ticket: &OfferTicket,
        result: Result<Vec<Suggestion>, OfferFailure>,
        now: Millis,
    ) -> Effects {
        let mut batch = Batch::new();
        let conv = &ticket.conversation;
        let Some(room) = self.rooms.get_mut(conv) else {
            return self.finish(batch);
        };
        let (message_id, author) = match &room.pending {
            Some(Pending::Generating {
                message_id,
                offer_id,
                author,
            }) if *offer_id == ticket.offer_id => (message_id.clone(), author.clone()),
            _ => return self.finish(batch),
        };
        let original = room
            .state
            .message(&message_id)
            .expect("pending message exists")
            .original_text
            .clone();
        let offer = result.and_then(|suggestions| {
            RephraseOffer::assemble(
                ticket.offer_id.clone(),
                message_id.clone(),
                original.clone(),
                suggestions,
                &mut self.order_rng,
                now,
            )
            .map_err(OfferFailure::from)
        });
        match offer {
            Ok(offer) => {
                let dose = room
                    .state
                    .record_intervention()
                    .expect("cadence stays armed while the author is blocked");
                let options = offer.displayed().map(|s| s.text.clone()).collect();
                room.pending = Some(Pending::Offered {
                    offer: offer.clone(),
                    author: author.clone(),
                });
                if self.emit(
                    &mut batch,
                    Some(conv),
                    now,
                    Event::OfferShown {
                        offer_id: offer.offer_id.clone(),
                        message_id: message_id.clone(),
                        participant: author.clone(),
                        suggestions: offer.suggestions.clone(),
                        display_order: offer.display_order,
                        dose,
                    },
                ) {
                    batch.send_in(
                        conv,
                        &author,
                        ServerFrame::RephraseOffer {
                            offer_id: offer.offer_id,
                            message_id,
                            original,
                            options,
                        },
                    );
                }
            }
            Err(failure) => {
                tracing::warn!(%conv, %failure, "rephrase offer failed open");
                room.pending = None;
                room.state
                    .record_failed_attempt()
                    .expect("cadence stays armed while the author is blocked");
                if self.emit(
                    &mut batch,
                    Some(conv),
                    now,
                    Event::OfferFailed {
                        message_id: message_id.clone(),
                        error: failure.to_string(),
                    },
                ) {
                    self.deliver(&mut batch, conv, &message_id, &original, Provenance::Original, now);
                }
            }
        }
        self.finish(batch)
    }

    fn choose(
        &mut self,
        batch: &mut Batch,
        from: &ParticipantId,
        offer_id: OfferId,
        selection: WireSelection,
        now: Millis,
    ) {
        let Some(conv) = self.room_of(from) else {
            batch.send(
                from,
                ServerFrame::error(ErrorCode::UnknownConversation, "not in a conversation"),
            );
            return;
        };
        let room = &self.rooms[&conv];
        let offer = match &room.pending {
            Some(Pending::Offered { offer, author }) if author == from => offer.clone(),
            _ => {
                batch.send(
                    from,
                    ServerFrame::error(ErrorCode::StaleOffer, format!("no live offer {offer_id}")),
                );
                return;
            }
        };
        let selection = match selection {
            WireSelection::Option { index } => match offer.display_order.get(index) {
                Some(s) => Selection::Suggestion(*s),
                None => {
                    batch.send(from, violation(format!("option {index} does not exist")));
                    return;
                }
            },
            WireSelection::Original => Selection::Original,
            WireSelection::Edited { text } => {
                if text.chars().count() > MAX_MESSAGE_CHARS {
                    batch.send(
                        from,
                        ServerFrame::error(ErrorCode::OversizedMessage, "edited text is too long"),
                    );
                    return;
                }
                Selection::Edited(text)
            }
        };
        let choice = Choice {
            offer_id,
            selection,
        };
        match resolve_choice(&offer, &choice) {
            Ok(resolution) => self.apply_resolution(batch, &conv, &offer, choice.selection, resolution, false, now),
            Err(ChoiceError::EmptyEdit) => {
                batch.send(from, ServerFrame::error(ErrorCode::EmptyMessage, "edited text is empty"))
            }
            Err(e @ ChoiceError::StaleOffer { .. }) => {
                batch.send(from, ServerFrame::error(ErrorCode::StaleOffer, e.to_string()))
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn apply_resolution(
        &mut self,
        batch: &mut Batch,
        conv: &ConversationId,
        offer: &RephraseOffer,
        selection: Selection,
        resolution: Resolution,
        timed_out: bool,
        now: Millis,
    ) {
        self.rooms.get_mut(conv).expect("room").pending = None;
        if self.emit(
            batch,
            Some(conv),
            now,
            Event::ChoiceMade {
                offer_id: offer.offer_id.clone(),
                message_id: offer.message_id.clone(),
                selection,
                timed_out,
            },
        ) {
            self.deliver(
                batch,
                conv,
                &offer.message_id,
                &resolution.final_text,
                resolution.provenance,
                now,
            );
        }
    }

    fn depart(&mut self, batch: &mut Batch, who: &ParticipantId, reason: LeaveReason, now: Millis) {
        let Some(session) = self.sessions.get_mut(who) else {
            return;
        };
        match session.phase.clone() {
            Phase::Queued => {
                self.matcher.remove(who);
                session.phase = Phase::Lobby;
                self.emit(
                    batch,
                    None,
                    now,
                    Event::ParticipantLeft {
                        participant: who.clone(),
                        reason,
                    },
                );
            }
            Phase::Chatting(conv) => {
                let room = self.rooms.get_mut(&conv).expect("room");
                if room.closed {
                    return;
                }
                let pending = room.pending.take();
                if !self.emit(
                    batch,
                    Some(&conv),
                    now,
                    Event::ParticipantLeft {
                        participant: who.clone(),
                        reason,
                    },
                ) {
                    return;
                }
                if let Some(p) = pending {
                    let (offer_id, message_id) = p.ids();
                    let event = Event::OfferDiscarded {
                        offer_id: offer_id.clone(),
                        message_id: message_id.clone(),
                    };
                    if !self.emit(batch, Some(&conv), now, event) {
                        return;
                    }
                }
                self.close(batch, &conv, EndReason::Departure, now);
            }
            Phase::Lobby | Phase::Unmatched | Phase::Finished(_) => {}
        }
    }

    /// Applies every timeout due at `now`: queue expiry, unanswered offers
    /// and idle participants, in that order.
    pub fn tick(&mut self, now: Millis) -> Effects {
        let mut batch = Batch::new();
        for entry in self.matcher.expire(now, self.config.queue_timeout_ms) {
            if let Some(s) = self.sessions.get_mut(&entry.participant) {
                s.phase = Phase::Unmatched;
            }
            if self.emit(
                &mut batch,
                None,
                now,
                Event::QueueTimedOut {
                    participant: entry.participant.clone(),
                },
            ) {
                batch.send(&entry.participant, ServerFrame::Unmatched);
            }
        }
        let expired: Vec<(ConversationId, RephraseOffer)> = self
            .rooms
            .iter()
            .filter_map(|(id, room)| match &room.pending {
                Some(Pending::Offered { offer, .. })
                    if choice_timeout(offer, now, self.config.offer_timeout_ms).is_some() =>
                {
                    Some((id.clone(), offer.clone()))
                }
                _ => None,
            })
            .collect();
        for (conv, offer) in expired {
            let resolution = choice_timeout(&offer, now, self.config.offer_timeout_ms).expect("filtered");
            self.apply_resolution(&mut batch, &conv, &offer, Selection::Original, resolution, true, now);
        }
        let idle: Vec<ParticipantId> = self
            .sessions
            .iter()
            .filter(|(_, s)| {
                matches!(s.phase, Phase::Chatting(_))
                    && now.saturating_sub(s.last_seen) >= self.config.idle_timeout_ms
            })
            .map(|(p, _)| p.clone())
            .collect();
        for p in idle {
            self.depart(&mut batch, &p, LeaveReason::Idle, now);
        }
        self.finish(batch)
    }

    /// Earliest time at which [`Hub::tick`] has work to do.
    pub fn next_deadline(&self) -> Option<Millis> {
        let queue = self
            .matcher
            .oldest_enqueued_at()
            .map(|t| t + self.config.queue_timeout_ms);
        let offers = self.rooms.values().filter_map(|r| match &r.pending {
            Some(Pending::Offered { offer, .. }) => Some(offer.created_at + self.config.offer_timeout_ms),
            _ => None,
        });
        let idle = self
            .sessions
            .values()
            .filter(|s| matches!(s.phase, Phase::Chatting(_)))
            .map(|s| s.last_seen + self.config.idle_timeout_ms);
        queue.into_iter().chain(offers).chain(idle).min()
    }
}

fn event_participant(event: &Event) -> Option<&ParticipantId> {
    match event {
        Event::Joined { participant, .. }
        | Event::QueueTimedOut { participant }
        | Event::ParticipantLeft { participant, .. }
        | Event::SurveySubmitted { participant, .. } => Some(participant),
        _ => None,
    }
}
