//! Discrete-event bot simulation.
//!
//! Bots speak the wire protocol to an in-process [`Hub`]: every frame in
//! either direction goes through the codec. Time is virtual. Provider calls
//! run against a [`ManualClock`] that starts at the current virtual time, and
//! the engine result is handed back to the hub when that clock says the
//! calls finished. Same seed and config give a byte-identical log.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::path::Path;
use std::sync::Arc;

use rand::rngs::StdRng;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use parley_core::conversation::{ArmKind, ConversationState, Status};
use parley_core::rephrase::{OfferFailure, RephraseEngine, Suggestion};
use parley_core::rng::{indexed_substream, streams, substream};
use parley_core::surveys::{Answer, IndexKind, Instrument, InstrumentId, Scale, STANCE_ITEM, STANCE_OPTIONS};
use parley_core::tables::Role;
use parley_core::{ConversationId, ManualClock, Millis, OfferId, ParticipantId, Stance};

use crate::events::{EventRecord, LogHeader, MemoryLog};
use crate::hub::{Effects, Hub, HubConfig, OfferTicket};
use crate::protocol::{decode_frame, encode_frame, ClientFrame, ServerFrame, WireSelection};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("simulation config: {0}")]
    Io(#[from] std::io::Error),
    #[error("simulation config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("simulation config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepartureStyle {
    /// Sends a `leave` frame.
    Leave,
    /// Goes silent; the idle timeout ends the conversation.
    Vanish,
}

/// Relative weights of the bot's reaction to a rephrasing offer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChoicePolicy {
    pub accept: f64,
    pub edit: f64,
    pub original: f64,
    /// Never answers; the offer times out.
    pub ignore: f64,
}

impl Default for ChoicePolicy {
    fn default() -> Self {
        Self {
            accept: 0.6,
            edit: 0.15,
            original: 0.2,
            ignore: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Persona {
    pub name: String,
    pub weight: f64,
    /// Inclusive range of messages per turn.
    pub messages_per_turn: [u32; 2],
    /// Inclusive range of words per message.
    pub words: [usize; 2],
    /// Own turns after which the bot leaves.
    pub max_turns: u32,
    /// Chance of departing at the start of each own turn.
    pub departure_hazard: f64,
    pub departure: DepartureStyle,
    pub choice: ChoicePolicy,
    pub reply_delay_ms: [Millis; 2],
    pub choice_delay_ms: [Millis; 2],
    pub survey_completion: f64,
}

impl Default for Persona {
    fn default() -> Self {
        Self {
            name: "default".into(),
            weight: 1.0,
            messages_per_turn: [1, 2],
            words: [3, 16],
            max_turns: 14,
            departure_hazard: 0.05,
            departure: DepartureStyle::Leave,
            choice: ChoicePolicy::default(),
            reply_delay_ms: [4_000, 25_000],
            choice_delay_ms: [3_000, 20_000],
            survey_completion: 0.95,
        }
    }
}

impl Persona {
    /// Six-word messages, one per turn, always accepts the first option and
    /// never leaves early.
    pub fn scripted_acceptor() -> Self {
        Self {
            name: "scripted".into(),
            messages_per_turn: [1, 1],
            words: [6, 6],
            max_turns: 40,
            departure_hazard: 0.0,
            choice: ChoicePolicy {
                accept: 1.0,
                edit: 0.0,
                original: 0.0,
                ignore: 0.0,
            },
            reply_delay_ms: [5_000, 5_000],
            choice_delay_ms: [2_000, 2_000],
            survey_completion: 1.0,
            ..Self::default()
        }
    }
}

/// How bots answer the surveys. Likert answers are drawn around a latent
/// value and clamped to 1..=7.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurveyModel {
    pub quality_mean: f64,
    pub noise: f64,
    /// Likert-point shift at dose 4 for the treated participant; scaled
    /// linearly with dose.
    pub gpt_self_effect: f64,
    pub gpt_partner_effect: f64,
}

impl Default for SurveyModel {
    fn default() -> Self {
        Self {
            quality_mean: 4.6,
            noise: 1.5,
            gpt_self_effect: 0.1,
            gpt_partner_effect: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub dyads: usize,
    pub arrival_gap_ms: Millis,
    pub heartbeat_ms: Millis,
    /// Hard stop for the virtual clock.
    pub horizon_ms: Millis,
    pub hub: HubConfig,
    pub personas: Vec<Persona>,
    pub survey: SurveyModel,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dyads: 50,
            arrival_gap_ms: 3_000,
            heartbeat_ms: 30_000,
            horizon_ms: 48 * 3_600_000,
            hub: HubConfig::default(),
            personas: vec![
                Persona::default(),
                Persona {
                    name: "terse".into(),
                    words: [2, 7],
                    departure_hazard: 0.1,
                    departure: DepartureStyle::Vanish,
                    choice: ChoicePolicy {
                        accept: 0.3,
                        edit: 0.1,
                        original: 0.5,
                        ignore: 0.1,
                    },
                    ..Persona::default()
                },
                Persona {
                    name: "talkative".into(),
                    messages_per_turn: [1, 3],
                    words: [6, 30],
                    max_turns: 20,
                    departure_hazard: 0.02,
                    choice: ChoicePolicy {
                        accept: 0.7,
                        edit: 0.2,
                        original: 0.1,
                        ignore: 0.0,
                    },
                    ..Persona::default()
                },
            ],
            survey: SurveyModel::default(),
        }
    }
}

impl SimConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, SimError> {
        let config: Self = toml::from_str(s)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// One dyad with scripted personas on both sides.
    pub fn scripted(arm: ArmKind) -> Self {
        Self {
            dyads: 1,
            hub: HubConfig {
                forced_arm: Some(arm),
                ..HubConfig::default()
            },
            personas: vec![Persona::scripted_acceptor()],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Invalid(m));
        if self.personas.is_empty() {
            return bad("at least one persona is required".into());
        }
        if self.heartbeat_ms == 0 || self.heartbeat_ms >= self.hub.idle_timeout_ms {
            return bad("heartbeat_ms must be positive and below the idle timeout".into());
        }
        for p in &self.personas {
            let c = p.choice;
            let weights = [p.weight, c.accept, c.edit, c.original, c.ignore];
            if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
                return bad(format!("persona {}: weights must be non-negative", p.name));
            }
            if c.accept + c.edit + c.original + c.ignore <= 0.0 {
                return bad(format!("persona {}: choice weights sum to zero", p.name));
            }
            if !(0.0..=1.0).contains(&p.departure_hazard) || !(0.0..=1.0).contains(&p.survey_completion) {
                return bad(format!("persona {}: probabilities must lie in [0, 1]", p.name));
            }
            if p.messages_per_turn[0] == 0 || p.messages_per_turn[0] > p.messages_per_turn[1] {
                return bad(format!("persona {}: bad messages_per_turn", p.name));
            }
            if p.words[0] == 0 || p.words[0] > p.words[1] {
                return bad(format!("persona {}: bad word range", p.name));
            }
            if p.reply_delay_ms[0] > p.reply_delay_ms[1] || p.choice_delay_ms[0] > p.choice_delay_ms[1] {
                return bad(format!("persona {}: bad delay range", p.name));
            }
            if p.max_turns == 0 {
                return bad(format!("persona {}: max_turns must be positive", p.name));
            }
        }
        if self.personas.iter().map(|p| p.weight).sum::<f64>() <= 0.0 {
            return bad("persona weights sum to zero".into());
        }
        Ok(())
    }
}

const VOCABULARY: &[&str] = &[
    "background", "checks", "guns", "laws", "safety", "rights", "families", "communities",
    "permits", "training", "owners", "hunting", "police", "schools", "violence", "freedom",
    "registration", "rifles", "handguns", "storage", "courts", "states", "federal", "crime",
    "protect", "should", "really", "people", "think", "because", "more", "less", "every",
    "need", "want", "believe", "policy", "enforcement", "waiting", "period", "mental",
    "health", "responsible", "dangerous", "legal", "buy", "sell", "carry", "concealed",
];

/// Each bot argues about one of these; most of its words come from its topic.
const TOPICS: &[&[&str]] = &[
    &["background", "checks", "private", "sales", "loophole", "database", "dealers", "screening"],
    &["mental", "health", "treatment", "crisis", "counselors", "warning", "signs", "support"],
    &["concealed", "carry", "permits", "holsters", "training", "license", "reciprocity", "defense"],
    &["hunting", "rifles", "deer", "season", "ammunition", "outdoors", "tradition", "sportsmen"],
    &["schools", "students", "teachers", "campus", "lockdown", "drills", "security", "children"],
    &["storage", "safes", "locks", "accidents", "households", "kids", "secure", "unloaded"],
];
const TOPIC_SHARE: f64 = 0.7;

fn sentence(rng: &mut StdRng, topic: usize, words: usize) -> String {
    (0..words)
        .map(|_| {
            let pool = if rng.random_bool(TOPIC_SHARE) { TOPICS[topic] } else { VOCABULARY };
            pool[rng.random_range(0..pool.len())]
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn in_range<T>(rng: &mut StdRng, range: [T; 2]) -> T
where
    T: rand::distr::uniform::SampleUniform + PartialOrd + Copy,
{
    rng.random_range(range[0]..=range[1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BotPhase {
    Waiting,
    Chatting,
    Surveying,
    Done,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Awaiting {
    Nothing,
    Delivery,
    Offer,
}

struct Bot {
    id: ParticipantId,
    stance: Stance,
    persona: usize,
    topic: usize,
    rng: StdRng,
    survey_rng: StdRng,
    /// Latent policy attitude on the Likert scale.
    attitude: f64,
    phase: BotPhase,
    conversation: Option<ConversationId>,
    own_turns: u32,
    burst_left: u32,
    awaiting: Awaiting,
    speak_scheduled: bool,
    vanished: bool,
}

#[derive(Debug, Clone)]
enum Action {
    Arrive(usize),
    Speak(usize),
    Choose(usize, OfferId, usize),
    OfferReady(OfferTicket, Result<Vec<Suggestion>, OfferFailure>),
    Heartbeat(usize),
    PostSurvey(usize),
    Tick,
}

#[derive(Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    pub participants: usize,
    pub conversations: usize,
    pub completed: usize,
    pub departed: usize,
    pub faulted: usize,
    pub unmatched: usize,
    pub offers_requested: usize,
    /// Conversations still open at the horizon.
    pub stuck: usize,
    pub end_ms: Millis,
}

pub struct SimOutcome {
    pub header: LogHeader,
    pub records: Vec<EventRecord>,
    /// Live hub state of every conversation at the end of the run.
    pub live: BTreeMap<ConversationId, ConversationState>,
    pub stats: SimStats,
}

pub struct Simulation {
    config: SimConfig,
    hub: Hub,
    log: MemoryLog,
    engine: Arc<RephraseEngine>,
    bots: Vec<Bot>,
    index: BTreeMap<ParticipantId, usize>,
    queue: BinaryHeap<Reverse<(Millis, u64)>>,
    actions: BTreeMap<u64, Action>,
    next_action: u64,
    tick_at: Option<Millis>,
    now: Millis,
    stats: SimStats,
}

impl Simulation {
    pub fn new(seed: u64, config: SimConfig, engine: Arc<RephraseEngine>) -> Result<Self, SimError> {
        config.validate()?;
        let log = MemoryLog::new();
        let hub_config = HubConfig {
            seed,
            ..config.hub.clone()
        };
        let hub = Hub::new(hub_config, Box::new(log.clone()));
        let mut persona_rng = substream(seed, streams::PERSONAS);
        let total_weight: f64 = config.personas.iter().map(|p| p.weight).sum();
        let mut bots = Vec::new();
        let mut index = BTreeMap::new();
        for i in 0..config.dyads * 2 {
            let stance = if i % 2 == 0 {
                Stance::MoreStrict
            } else if persona_rng.random_bool(0.5) {
                Stance::AboutRight
            } else {
                Stance::LessStrict
            };
            let mut pick = persona_rng.random_range(0.0..total_weight);
            let persona = config
                .personas
                .iter()
                .position(|p| {
                    pick -= p.weight;
                    pick < 0.0
                })
                .unwrap_or(config.personas.len() - 1);
            let mut survey_rng = indexed_substream(seed, streams::SURVEYS, i as u64);
            let centre = match stance {
                Stance::MoreStrict => 5.8,
                Stance::AboutRight => 3.8,
                Stance::LessStrict => 2.2,
            };
            let attitude = centre + survey_rng.random_range(-0.8..0.8);
            let id = ParticipantId::new(format!("b{i:04}"));
            index.insert(id.clone(), i);
            let mut rng = indexed_substream(seed, streams::SCHEDULE, i as u64);
            bots.push(Bot {
                id,
                stance,
                persona,
                topic: rng.random_range(0..TOPICS.len()),
                rng,
                survey_rng,
                attitude,
                phase: BotPhase::Waiting,
                conversation: None,
                own_turns: 0,
                burst_left: 0,
                awaiting: Awaiting::Nothing,
                speak_scheduled: false,
                vanished: false,
            });
        }
        let mut sim = Self {
            stats: SimStats {
                participants: bots.len(),
                ..SimStats::default()
            },
            config,
            hub,
            log,
            engine,
            bots,
            index,
            queue: BinaryHeap::new(),
            actions: BTreeMap::new(),
            next_action: 0,
            tick_at: None,
            now: 0,
        };
        for i in 0..sim.bots.len() {
            let at = (i / 2) as Millis * sim.config.arrival_gap_ms + (i % 2) as Millis * 500;
            sim.schedule(at, Action::Arrive(i));
        }
        Ok(sim)
    }

    fn schedule(&mut self, at: Millis, action: Action) {
        let key = self.next_action;
        self.next_action += 1;
        self.actions.insert(key, action);
        self.queue.push(Reverse((at, key)));
    }

    fn persona(&self, bot: usize) -> &Persona {
        &self.config.personas[self.bots[bot].persona]
    }

    pub fn run(mut self) -> SimOutcome {
        while let Some(Reverse((at, key))) = self.queue.pop() {
            if at > self.config.horizon_ms {
                break;
            }
            self.now = at;
            let action = self.actions.remove(&key).expect("scheduled action");
            self.step(action);
            self.schedule_tick();
        }
        for room in self.hub.conversations() {
            self.stats.conversations += 1;
            match room.status {
                Status::Ended(parley_core::EndReason::Complete) => self.stats.completed += 1,
                Status::Ended(parley_core::EndReason::Departure) => self.stats.departed += 1,
                Status::Ended(parley_core::EndReason::Fault) => self.stats.faulted += 1,
                Status::Active => {}
            }
        }
        self.stats.stuck = self.hub.open_conversations();
        self.stats.end_ms = self.now;
        let live = self
            .hub
            .conversations()
            .map(|s| (s.id.clone(), s.clone()))
            .collect();
        SimOutcome {
            header: LogHeader::new(self.hub.config().seed),
            records: self.log.records(),
            live,
            stats: self.stats,
        }
    }

    fn schedule_tick(&mut self) {
        if let Some(deadline) = self.hub.next_deadline() {
            let deadline = deadline.max(self.now);
            if self.tick_at.is_none_or(|t| deadline < t) {
                self.tick_at = Some(deadline);
                self.schedule(deadline, Action::Tick);
            }
        }
    }

    fn step(&mut self, action: Action) {
        match action {
            Action::Arrive(b) => {
                self.send(b, ClientFrame::Hello {
                    participant: self.bots[b].id.clone(),
                    token: format!("tok-{}", self.bots[b].id),
                });
                let answers = self.pre_answers(b);
                self.send(b, ClientFrame::SubmitSurvey {
                    wave: InstrumentId::PreSurvey,
                    answers,
                    submission_id: format!("{}-pre", self.bots[b].id),
                });
                self.send(b, ClientFrame::Join);
                let next = self.now + self.config.heartbeat_ms;
                self.schedule(next, Action::Heartbeat(b));
            }
            Action::Heartbeat(b) => {
                let bot = &self.bots[b];
                if bot.vanished || bot.phase == BotPhase::Done {
                    return;
                }
                self.send(b, ClientFrame::Ping);
                let next = self.now + self.config.heartbeat_ms;
                self.schedule(next, Action::Heartbeat(b));
            }
            Action::Speak(b) => self.speak(b),
            Action::Choose(b, offer_id, index) => {
                let bot = &self.bots[b];
                if bot.vanished || bot.awaiting != Awaiting::Offer || bot.phase != BotPhase::Chatting {
                    return;
                }
                let persona = self.persona(b).clone();
                let bot = &mut self.bots[b];
                let c = persona.choice;
                let mut pick = bot.rng.random_range(0.0..(c.accept + c.edit + c.original));
                let selection = if pick < c.accept {
                    WireSelection::Option { index }
                } else {
                    pick -= c.accept;
                    if pick < c.edit {
                        let words = in_range(&mut bot.rng, persona.words);
                        WireSelection::Edited {
                            text: format!("well {}", sentence(&mut bot.rng, bot.topic, words)),
                        }
                    } else {
                        WireSelection::Original
                    }
                };
                self.send(b, ClientFrame::ChooseRephrasing { offer_id, selection });
            }
            Action::OfferReady(ticket, result) => {
                let effects = self.hub.offer_ready(&ticket, result, self.now);
                self.dispatch(effects);
            }
            Action::PostSurvey(b) => {
                let answers = self.post_answers(b);
                self.send(b, ClientFrame::SubmitSurvey {
                    wave: InstrumentId::PostSurvey,
                    answers,
                    submission_id: format!("{}-post", self.bots[b].id),
                });
                self.bots[b].phase = BotPhase::Done;
            }
            Action::Tick => {
                if self.tick_at == Some(self.now) {
                    self.tick_at = None;
                }
                let effects = self.hub.tick(self.now);
                self.dispatch(effects);
            }
        }
    }

    fn speak(&mut self, b: usize) {
        self.bots[b].speak_scheduled = false;
        let persona = self.persona(b).clone();
        let bot = &mut self.bots[b];
        if bot.vanished || bot.phase != BotPhase::Chatting || bot.awaiting != Awaiting::Nothing {
            return;
        }
        if bot.burst_left == 0 {
            if bot.own_turns >= persona.max_turns || bot.rng.random_bool(persona.departure_hazard) {
                match persona.departure {
                    DepartureStyle::Leave => self.send(b, ClientFrame::Leave),
                    DepartureStyle::Vanish => self.bots[b].vanished = true,
                }
                return;
            }
            bot.own_turns += 1;
            bot.burst_left = in_range(&mut bot.rng, persona.messages_per_turn);
        }
        let words = in_range(&mut bot.rng, persona.words);
        let text = sentence(&mut bot.rng, bot.topic, words);
        bot.burst_left -= 1;
        bot.awaiting = Awaiting::Delivery;
        self.send(b, ClientFrame::SendMessage { text });
    }

    fn schedule_speak(&mut self, b: usize, delay: [Millis; 2]) {
        let bot = &mut self.bots[b];
        if bot.speak_scheduled || bot.vanished {
            return;
        }
        bot.speak_scheduled = true;
        let at = self.now + in_range(&mut bot.rng, delay);
        self.schedule(at, Action::Speak(b));
    }

    fn send(&mut self, b: usize, frame: ClientFrame) {
        let bytes = encode_frame(&frame);
        let frame: ClientFrame = decode_frame(&bytes).expect("client frames round-trip");
        let from = self.bots[b].id.clone();
        let effects = self.hub.handle(&from, frame, self.now);
        self.dispatch(effects);
    }

    fn dispatch(&mut self, effects: Effects) {
        for ticket in effects.offer_requests {
            self.stats.offers_requested += 1;
            let clock = ManualClock::starting_at(self.now);
            let result = self.engine.fetch_suggestions(&ticket.request, &clock);
            let done = parley_core::Clock::now_ms(&clock).max(self.now);
            self.schedule(done, Action::OfferReady(ticket, result));
        }
        for out in effects.frames {
            let bytes = encode_frame(&out.frame);
            let frame: ServerFrame = decode_frame(&bytes).expect("server frames round-trip");
            if let Some(&b) = self.index.get(&out.to) {
                self.on_frame(b, frame);
            }
        }
    }

    fn on_frame(&mut self, b: usize, frame: ServerFrame) {
        if self.bots[b].vanished {
            return;
        }
        let persona = self.persona(b).clone();
        match frame {
            ServerFrame::Matched { conversation_id, .. } => {
                let bot = &mut self.bots[b];
                bot.phase = BotPhase::Chatting;
                bot.conversation = Some(conversation_id);
                if bot.stance == Stance::MoreStrict {
                    self.schedule_speak(b, persona.reply_delay_ms);
                }
            }
            ServerFrame::OfferPending { .. } => self.bots[b].awaiting = Awaiting::Offer,
            ServerFrame::RephraseOffer {
                offer_id, options, ..
            } => {
                let bot = &mut self.bots[b];
                let c = persona.choice;
                let total = c.accept + c.edit + c.original + c.ignore;
                if bot.rng.random_range(0.0..total) < c.ignore {
                    return;
                }
                let index = bot.rng.random_range(0..options.len());
                let at = self.now + in_range(&mut bot.rng, persona.choice_delay_ms);
                self.schedule(at, Action::Choose(b, offer_id, index));
            }
            ServerFrame::MessageDelivered { .. } => {
                let bot = &mut self.bots[b];
                bot.awaiting = Awaiting::Nothing;
                if bot.burst_left > 0 {
                    self.schedule_speak(b, [1_000, 4_000]);
                }
            }
            ServerFrame::PartnerMessage { .. } => {
                let bot = &self.bots[b];
                if bot.phase == BotPhase::Chatting && bot.burst_left == 0 && bot.awaiting == Awaiting::Nothing {
                    self.schedule_speak(b, persona.reply_delay_ms);
                }
            }
            ServerFrame::Error { .. } => {
                let bot = &mut self.bots[b];
                bot.awaiting = Awaiting::Nothing;
                bot.burst_left = 0;
            }
            ServerFrame::ConversationEnded { .. } => {
                let bot = &mut self.bots[b];
                bot.phase = BotPhase::Surveying;
                if bot.rng.random_bool(persona.survey_completion) {
                    let at = self.now + in_range(&mut bot.rng, [20_000, 90_000]);
                    self.schedule(at, Action::PostSurvey(b));
                } else {
                    bot.phase = BotPhase::Done;
                }
            }
            ServerFrame::Unmatched => {
                self.stats.unmatched += 1;
                self.bots[b].phase = BotPhase::Done;
            }
            ServerFrame::Welcome { .. }
            | ServerFrame::Instrument { .. }
            | ServerFrame::SurveyAccepted { .. }
            | ServerFrame::Waiting
            | ServerFrame::Tutorial { .. }
            | ServerFrame::RouteToSurvey { .. }
            | ServerFrame::Pong => {}
        }
    }

    fn likert(rng: &mut StdRng, latent: f64, noise: f64) -> u8 {
        let v = latent + rng.random_range(-noise..=noise);
        v.round().clamp(1.0, 7.0) as u8
    }

    fn pre_answers(&mut self, b: usize) -> BTreeMap<String, Answer> {
        let instrument = self.hub.instrument(InstrumentId::PreSurvey).clone();
        let bot = &mut self.bots[b];
        let stance_text = STANCE_OPTIONS[Stance::ALL.iter().position(|s| *s == bot.stance).expect("stance")];
        let mut answers = BTreeMap::new();
        for item in &instrument.items {
            let answer = if item.id == STANCE_ITEM {
                Answer::Choice(stance_text.to_owned())
            } else {
                Self::answer_item(&mut bot.survey_rng, item, bot.attitude, 0.8)
            };
            answers.insert(item.id.clone(), answer);
        }
        answers
    }

    fn answer_item(rng: &mut StdRng, item: &parley_core::surveys::Item, latent: f64, noise: f64) -> Answer {
        match &item.scale {
            Scale::Likert7 => {
                let v = Self::likert(rng, latent, noise);
                Answer::Likert(if item.reverse { 8 - v } else { v })
            }
            Scale::Categorical(options) => Answer::Choice(options[rng.random_range(0..options.len())].clone()),
        }
    }

    fn post_answers(&mut self, b: usize) -> BTreeMap<String, Answer> {
        let instrument: Instrument = self.hub.instrument(InstrumentId::PostSurvey).clone();
        let model = self.config.survey.clone();
        let role_shift = self.bots[b]
            .conversation
            .as_ref()
            .and_then(|c| self.hub.conversation(c))
            .map(|state| {
                let designated = state.is_designated(&self.bots[b].id);
                let scale = f64::from(state.dose()) / 4.0;
                match Role::of(state.arm.kind, designated) {
                    Role::GPTSelf => model.gpt_self_effect * scale,
                    Role::GPTPartner => model.gpt_partner_effect * scale,
                    Role::ControlMember => 0.0,
                }
            })
            .unwrap_or(0.0);
        let bot = &mut self.bots[b];
        let mut answers = BTreeMap::new();
        for item in &instrument.items {
            let answer = match item.index {
                Some(IndexKind::PolicyAttitude) => Self::answer_item(&mut bot.survey_rng, item, bot.attitude, 0.8),
                Some(_) => Self::answer_item(
                    &mut bot.survey_rng,
                    item,
                    model.quality_mean + role_shift,
                    model.noise,
                ),
                None => Self::answer_item(&mut bot.survey_rng, item, 4.0, model.noise),
            };
            answers.insert(item.id.clone(), answer);
        }
        answers
    }
}

/// Runs a full simulation.
pub fn simulate(seed: u64, config: SimConfig, engine: Arc<RephraseEngine>) -> Result<SimOutcome, SimError> {
    Ok(Simulation::new(seed, config, engine)?.run())
}
