//! Append-only event log.
//!
//! On disk a run is one newline-delimited JSON file: a [`LogHeader`] line
//! followed by one [`EventRecord`] per line. `seq` starts at 0 and increases
//! by exactly one per record across the whole file, so it is also strictly
//! increasing within every conversation. Field names below are the contract
//! read by replay and export:
//!
//! ```text
//! {"schema":"parley-events/1","seed":7,"created_by":"parley 0.1.0"}
//! {"seq":0,"conversation":null,"at":0,"kind":"Joined","participant":"b0000","stance":"MoreStrict"}
//! {"seq":3,"conversation":"c000001","at":40,"kind":"ArmAssigned","arm":"Treated","designated":"b0001","seed":7}
//! ```

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use parley_core::conversation::{ArmKind, EndReason, Provenance};
use parley_core::surveys::{Answer, InstrumentId};
use parley_core::{
    ConversationId, MessageId, Millis, OfferId, ParticipantId, Selection, Stance, Strategy,
    Suggestion,
};

pub const LOG_SCHEMA: &str = "parley-events/1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogHeader {
    pub schema: String,
    pub seed: u64,
    pub created_by: String,
}

impl LogHeader {
    pub fn new(seed: u64) -> Self {
        Self {
            schema: LOG_SCHEMA.to_owned(),
            seed,
            created_by: format!("parley {}", env!("CARGO_PKG_VERSION")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LeaveReason {
    /// Explicit `leave` frame.
    Left,
    /// No frames for the idle timeout.
    Idle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Routing {
    Intercept,
    Phantom,
    PassThrough,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Event {
    Joined {
        participant: ParticipantId,
        stance: Stance,
    },
    QueueTimedOut {
        participant: ParticipantId,
    },
    Matched {
        participants: [ParticipantId; 2],
        stances: [Stance; 2],
    },
    ArmAssigned {
        arm: ArmKind,
        designated: ParticipantId,
        seed: u64,
    },
    TutorialShown {
        participant: ParticipantId,
    },
    MessageComposed {
        message_id: MessageId,
        author: ParticipantId,
        turn_index: u32,
        text: String,
        word_count: usize,
        routing: Routing,
    },
    OfferFailed {
        message_id: MessageId,
        error: String,
    },
    OfferShown {
        offer_id: OfferId,
        message_id: MessageId,
        participant: ParticipantId,
        suggestions: Vec<Suggestion>,
        display_order: [Strategy; 3],
        dose: u8,
    },
    ChoiceMade {
        offer_id: OfferId,
        message_id: MessageId,
        selection: Selection,
        timed_out: bool,
    },
    OfferDiscarded {
        offer_id: OfferId,
        message_id: MessageId,
    },
    MessageDelivered {
        message_id: MessageId,
        author: ParticipantId,
        final_text: String,
        provenance: Provenance,
    },
    PhantomIntervention {
        message_id: MessageId,
        participant: ParticipantId,
        dose: u8,
    },
    ParticipantLeft {
        participant: ParticipantId,
        reason: LeaveReason,
    },
    ConversationEnded {
        reason: EndReason,
        dose: u8,
    },
    SurveySubmitted {
        participant: ParticipantId,
        wave: InstrumentId,
        submission_id: String,
        answers: std::collections::BTreeMap<String, Answer>,
    },
}

impl Event {
    pub fn name(&self) -> &'static str {
        match self {
            Event::Joined { .. } => "Joined",
            Event::QueueTimedOut { .. } => "QueueTimedOut",
            Event::Matched { .. } => "Matched",
            Event::ArmAssigned { .. } => "ArmAssigned",
            Event::TutorialShown { .. } => "TutorialShown",
            Event::MessageComposed { .. } => "MessageComposed",
            Event::OfferFailed { .. } => "OfferFailed",
            Event::OfferShown { .. } => "OfferShown",
            Event::ChoiceMade { .. } => "ChoiceMade",
            Event::OfferDiscarded { .. } => "OfferDiscarded",
            Event::MessageDelivered { .. } => "MessageDelivered",
            Event::PhantomIntervention { .. } => "PhantomIntervention",
            Event::ParticipantLeft { .. } => "ParticipantLeft",
            Event::ConversationEnded { .. } => "ConversationEnded",
            Event::SurveySubmitted { .. } => "SurveySubmitted",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub seq: u64,
    pub conversation: Option<ConversationId>,
    pub at: Millis,
    #[serde(flatten)]
    pub event: Event,
}

pub trait EventSink: Send {
    fn append(&mut self, record: &EventRecord) -> io::Result<()>;
}

/// In-memory log; clones share the same buffer.
#[derive(Debug, Clone, Default)]
pub struct MemoryLog {
    records: Arc<Mutex<Vec<EventRecord>>>,
}

impl MemoryLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> Vec<EventRecord> {
        self.records.lock().expect("log poisoned").clone()
    }
}

impl EventSink for MemoryLog {
    fn append(&mut self, record: &EventRecord) -> io::Result<()> {
        self.records.lock().expect("log poisoned").push(record.clone());
        Ok(())
    }
}

/// Newline-delimited JSON file, flushed after every record.
pub struct FileLog {
    writer: BufWriter<File>,
}

impl FileLog {
    pub fn create(path: &Path, header: &LogHeader) -> io::Result<Self> {
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .truncate(true)
            .open(path)?;
        let mut writer = BufWriter::new(file);
        serde_json::to_writer(&mut writer, header)?;
        writer.write_all(b"\n")?;
        writer.flush()?;
        Ok(Self { writer })
    }
}

impl EventSink for FileLog {
    fn append(&mut self, record: &EventRecord) -> io::Result<()> {
        serde_json::to_writer(&mut self.writer, record)?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()
    }
}

/// Sink that fails every append after the first `ok` records.
#[derive(Debug, Clone)]
pub struct FailingSink {
    pub ok: usize,
    inner: MemoryLog,
}

impl FailingSink {
    pub fn after(ok: usize) -> Self {
        Self {
            ok,
            inner: MemoryLog::new(),
        }
    }

    pub fn records(&self) -> Vec<EventRecord> {
        self.inner.records()
    }
}

impl EventSink for FailingSink {
    fn append(&mut self, record: &EventRecord) -> io::Result<()> {
        if self.inner.records().len() >= self.ok {
            return Err(io::Error::other("disk full"));
        }
        self.inner.append(record)
    }
}

#[derive(Debug, Error)]
pub enum LogReadError {
    #[error("event log: {0}")]
    Io(#[from] io::Error),
    #[error("event log line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error("event log has no header line")]
    MissingHeader,
    #[error("event log schema {found:?} is not {LOG_SCHEMA:?}")]
    Schema { found: String },
}

pub fn write_log(path: &Path, header: &LogHeader, records: &[EventRecord]) -> io::Result<()> {
    let mut log = FileLog::create(path, header)?;
    for record in records {
        log.append(record)?;
    }
    Ok(())
}

pub fn read_log(path: &Path) -> Result<(LogHeader, Vec<EventRecord>), LogReadError> {
    parse_log(BufReader::new(File::open(path)?))
}

pub fn parse_log<R: BufRead>(reader: R) -> Result<(LogHeader, Vec<EventRecord>), LogReadError> {
    let mut lines = reader.lines().enumerate();
    let header: LogHeader = loop {
        match lines.next() {
            None => return Err(LogReadError::MissingHeader),
            Some((_, line)) if line.as_ref().is_ok_and(|l| l.trim().is_empty()) => continue,
            Some((i, line)) => {
                break serde_json::from_str(&line?)
                    .map_err(|source| LogReadError::Parse { line: i + 1, source })?
            }
        }
    };
    if header.schema != LOG_SCHEMA {
        return Err(LogReadError::Schema {
            found: header.schema,
        });
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record =
            serde_json::from_str(&line).map_err(|source| LogReadError::Parse { line: i + 1, source })?;
        records.push(record);
    }
    Ok((header, records))
}
