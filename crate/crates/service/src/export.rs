//! Flattens an event log into the message and participant tables.
//!
//! Conversation state comes from [`replay`], so the tables can never disagree
//! with what the hub recorded. Only matched participants get a row.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use thiserror::Error;

use parley_core::conversation::{Provenance, Status};
use parley_core::surveys::{outcome_indices, Instrument, InstrumentId, SurveyResponse};
use parley_core::tables::{
    write_messages, write_participants, MessageRow, ParticipantRow, Role, TableError,
};
use parley_core::ParticipantId;

use crate::events::{Event, EventRecord};
use crate::replay::{joined_stances, replay, ReplayError};

pub const MESSAGES_FILE: &str = "messages.csv";
pub const PARTICIPANTS_FILE: &str = "participants.csv";

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("replay: {0}")]
    Replay(#[from] ReplayError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("export io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Tables {
    pub messages: Vec<MessageRow>,
    pub participants: Vec<ParticipantRow>,
}

fn provenance_columns(p: &Provenance) -> (&'static str, Option<parley_core::Strategy>) {
    match p {
        Provenance::Original => ("Original", None),
        Provenance::AcceptedSuggestion(s) => ("AcceptedSuggestion", Some(*s)),
        Provenance::Edited => ("Edited", None),
    }
}

/// Builds both tables. A participant who submitted a wave more than once is
/// scored on the last submission.
pub fn export(
    records: &[EventRecord],
    pre: &Instrument,
    post: &Instrument,
) -> Result<Tables, ExportError> {
    let states = replay(records)?;
    let stances = joined_stances(records);
    let mut surveys: BTreeMap<(ParticipantId, InstrumentId), SurveyResponse> = BTreeMap::new();
    for r in records {
        if let Event::SurveySubmitted {
            participant,
            wave,
            answers,
            ..
        } = &r.event
        {
            surveys.insert(
                (participant.clone(), *wave),
                SurveyResponse {
                    participant: participant.clone(),
                    wave: *wave,
                    answers: answers.clone(),
                },
            );
        }
    }

    let mut tables = Tables::default();
    for state in states.values() {
        let arm = state.arm.kind;
        let end_reason = match state.status {
            Status::Ended(r) => Some(r),
            Status::Active => None,
        };
        for m in &state.messages {
            let (provenance, strategy) = provenance_columns(&m.provenance);
            tables.messages.push(MessageRow {
                conversation_id: state.id.to_string(),
                message_id: m.id.to_string(),
                author: m.author.to_string(),
                role: Role::of(arm, state.is_designated(&m.author)),
                arm,
                turn_index: m.turn_index,
                composed_at: m.timestamp,
                delivered: m.is_delivered(),
                word_count: m.word_count(),
                original_text: m.original_text.clone(),
                final_text: m.final_text.clone(),
                provenance: provenance.to_owned(),
                strategy,
                rephrased: strategy.is_some(),
            });
        }
        for p in &state.participants {
            let designated = state.is_designated(p);
            let authored = || state.messages.iter().filter(move |m| &m.author == p);
            let outcomes = outcome_indices(
                pre,
                surveys.get(&(p.clone(), InstrumentId::PreSurvey)),
                post,
                surveys.get(&(p.clone(), InstrumentId::PostSurvey)),
            );
            tables.participants.push(ParticipantRow {
                participant_id: p.to_string(),
                conversation_id: state.id.to_string(),
                role: Role::of(arm, designated),
                arm,
                designated,
                stance: stances.get(p).copied().or(outcomes.stance),
                dose: state.dose(),
                end_reason,
                messages_sent: authored().filter(|m| m.is_delivered()).count(),
                suggestions_accepted: authored()
                    .filter(|m| matches!(m.provenance, Provenance::AcceptedSuggestion(_)))
                    .count(),
                conv_quality: outcomes.conv_quality,
                dem_reciprocity: outcomes.dem_reciprocity,
                policy_attitude_pre: outcomes.policy_attitude_pre,
                policy_attitude_post: outcomes.policy_attitude,
                attitude_change: outcomes.attitude_change(),
            });
        }
    }
    Ok(tables)
}

/// Writes `messages.csv` and `participants.csv` into `dir`.
pub fn write_tables(dir: &Path, seed: u64, tables: &Tables) -> Result<(), ExportError> {
    std::fs::create_dir_all(dir)?;
    write_messages(
        BufWriter::new(File::create(dir.join(MESSAGES_FILE))?),
        seed,
        &tables.messages,
    )?;
    write_participants(
        BufWriter::new(File::create(dir.join(PARTICIPANTS_FILE))?),
        seed,
        &tables.participants,
    )?;
    Ok(())
}
