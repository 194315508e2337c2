//! Flat export schema shared by the exporter and the analysis pipeline.
//!
//! Column names are a stable contract: readers check them and report the
//! first missing column by name.

use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conversation::{ArmKind, EndReason};
use crate::matching::Stance;
use crate::rephrase::Strategy;

/// Analysis role of a participant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    /// Received the rephrasing suggestions.
    GPTSelf,
    /// Partner of a participant who received suggestions.
    GPTPartner,
    /// Either member of a control conversation.
    ControlMember,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::GPTSelf, Role::GPTPartner, Role::ControlMember];

    pub fn of(arm: ArmKind, designated: bool) -> Self {
        match (arm, designated) {
            (ArmKind::Treated, true) => Role::GPTSelf,
            (ArmKind::Treated, false) => Role::GPTPartner,
            (ArmKind::Control, _) => Role::ControlMember,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Role::GPTSelf => "GPTSelf",
            Role::GPTPartner => "GPTPartner",
            Role::ControlMember => "ControlMember",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Role::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown role {s:?}"))
    }
}

pub const MESSAGE_COLUMNS: [&str; 14] = [
    "conversation_id",
    "message_id",
    "author",
    "role",
    "arm",
    "turn_index",
    "composed_at",
    "delivered",
    "word_count",
    "original_text",
    "final_text",
    "provenance",
    "strategy",
    "rephrased",
];

/// One composed message. `rephrased` is true when an AI suggestion replaced
/// the original, in which case `original_text` is the replaced counterpart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageRow {
    pub conversation_id: String,
    pub message_id: String,
    pub author: String,
    pub role: Role,
    pub arm: ArmKind,
    pub turn_index: u32,
    pub composed_at: u64,
    pub delivered: bool,
    pub word_count: usize,
    pub original_text: String,
    pub final_text: String,
    /// `Original`, `AcceptedSuggestion` or `Edited`.
    pub provenance: String,
    pub strategy: Option<Strategy>,
    pub rephrased: bool,
}

pub const PARTICIPANT_COLUMNS: [&str; 15] = [
    "participant_id",
    "conversation_id",
    "role",
    "arm",
    "designated",
    "stance",
    "dose",
    "end_reason",
    "messages_sent",
    "suggestions_accepted",
    "conv_quality",
    "dem_reciprocity",
    "policy_attitude_pre",
    "policy_attitude_post",
    "attitude_change",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantRow {
    pub participant_id: String,
    pub conversation_id: String,
    pub role: Role,
    pub arm: ArmKind,
    pub designated: bool,
    pub stance: Option<Stance>,
    /// Conversation dose, shared by both members.
    pub dose: u8,
    pub end_reason: Option<EndReason>,
    pub messages_sent: usize,
    pub suggestions_accepted: usize,
    pub conv_quality: Option<f64>,
    pub dem_reciprocity: Option<f64>,
    pub policy_attitude_pre: Option<f64>,
    pub policy_attitude_post: Option<f64>,
    pub attitude_change: Option<f64>,
}

/// First line of every table file, as a `#` comment: `# parley-tables/1 seed=<u64>`.
pub const TABLE_SCHEMA: &str = "parley-tables/1";

#[derive(Debug, Error)]
pub enum TableError {
    #[error("table io: {0}")]
    Io(#[from] std::io::Error),
    #[error("table csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{table}: missing column {column:?}")]
    MissingColumn { table: String, column: String },
    #[error("{table}: unexpected column {column:?}")]
    UnexpectedColumn { table: String, column: String },
    #[error("{table}: column {column:?} out of order")]
    ColumnOrder { table: String, column: String },
    #[error("{table}: bad header line {line:?}")]
    BadHeader { table: String, line: String },
}

/// Writes rows under a seed comment and an explicit header, so an empty
/// table still carries its columns.
pub fn write_table<T: Serialize>(
    out: impl Write,
    seed: u64,
    columns: &[&str],
    rows: &[T],
) -> Result<(), TableError> {
    let mut out = out;
    writeln!(out, "# {TABLE_SCHEMA} seed={seed}")?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(columns)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a table written by [`write_table`]. Columns must match exactly; the
/// first missing column is reported by name. Returns the seed if present.
pub fn read_table<T: DeserializeOwned>(
    input: impl Read,
    table: &str,
    columns: &[&str],
) -> Result<(Option<u64>, Vec<T>), TableError> {
    let mut input = BufReader::new(input);
    let mut first = String::new();
    input.read_line(&mut first)?;
    let (seed, rest): (Option<u64>, Vec<u8>) = if let Some(comment) = first.strip_prefix('#') {
        let bad = || TableError::BadHeader {
            table: table.to_owned(),
            line: first.trim_end().to_owned(),
        };
        let mut parts = comment.split_whitespace();
        if parts.next() != Some(TABLE_SCHEMA) {
            return Err(bad());
        }
        let seed = parts
            .find_map(|p| p.strip_prefix("seed="))
            .map(|s| s.parse::<u64>().map_err(|_| bad()))
            .transpose()?;
        (seed, Vec::new())
    } else {
        (None, first.into_bytes())
    };
    let mut reader = csv::ReaderBuilder::new().from_reader(rest.chain(input));
    let header = reader.headers()?.clone();
    for column in columns {
        if !header.iter().any(|h| h == *column) {
            return Err(TableError::MissingColumn {
                table: table.to_owned(),
                column: (*column).to_owned(),
            });
        }
    }
    if let Some(extra) = header.iter().find(|h| !columns.contains(h)) {
        return Err(TableError::UnexpectedColumn {
            table: table.to_owned(),
            column: extra.to_owned(),
        });
    }
    if let Some((h, _)) = header.iter().zip(columns).find(|(h, c)| h != *c) {
        return Err(TableError::ColumnOrder {
            table: table.to_owned(),
            column: h.to_owned(),
        });
    }
    let rows = reader.deserialize().collect::<Result<Vec<T>, _>>()?;
    Ok((seed, rows))
}

pub fn write_messages(out: impl Write, seed: u64, rows: &[MessageRow]) -> Result<(), TableError> {
    write_table(out, seed, &MESSAGE_COLUMNS, rows)
}

pub fn write_participants(out: impl Write, seed: u64, rows: &[ParticipantRow]) -> Result<(), TableError> {
    write_table(out, seed, &PARTICIPANT_COLUMNS, rows)
}

pub fn read_messages(input: impl Read) -> Result<(Option<u64>, Vec<MessageRow>), TableError> {
    read_table(input, "messages", &MESSAGE_COLUMNS)
}

pub fn read_participants(input: impl Read) -> Result<(Option<u64>, Vec<ParticipantRow>), TableError> {
    read_table(input, "participants", &PARTICIPANT_COLUMNS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roles_follow_arm_and_designation() {
        assert_eq!(Role::of(ArmKind::Treated, true), Role::GPTSelf);
        assert_eq!(Role::of(ArmKind::Treated, false), Role::GPTPartner);
        assert_eq!(Role::of(ArmKind::Control, true), Role::ControlMember);
        assert_eq!("GPTPartner".parse::<Role>(), Ok(Role::GPTPartner));
    }

    #[test]
    fn csv_headers_match_column_lists() {
        let mut w = csv::Writer::from_writer(vec![]);
        w.serialize(ParticipantRow {
            participant_id: "p".into(),
            conversation_id: "c".into(),
            role: Role::GPTSelf,
            arm: ArmKind::Treated,
            designated: true,
            stance: Some(Stance::MoreStrict),
            dose: 2,
            end_reason: None,
            messages_sent: 3,
            suggestions_accepted: 1,
            conv_quality: Some(50.0),
            dem_reciprocity: None,
            policy_attitude_pre: None,
            policy_attitude_post: None,
            attitude_change: None,
        })
        .unwrap();
        let out = String::from_utf8(w.into_inner().unwrap()).unwrap();
        let header = out.lines().next().unwrap();
        assert_eq!(header, PARTICIPANT_COLUMNS.join(","));
        assert!(out.lines().nth(1).unwrap().starts_with("p,c,GPTSelf,Treated,true,MoreStrict,2,,3,1,50.0,"));
    }

    fn participant(id: &str) -> ParticipantRow {
        ParticipantRow {
            participant_id: id.into(),
            conversation_id: "c000001".into(),
            role: Role::ControlMember,
            arm: ArmKind::Control,
            designated: false,
            stance: None,
            dose: 4,
            end_reason: Some(EndReason::Complete),
            messages_sent: 7,
            suggestions_accepted: 0,
            conv_quality: None,
            dem_reciprocity: Some(12.5),
            policy_attitude_pre: Some(0.0),
            policy_attitude_post: Some(100.0),
            attitude_change: Some(100.0),
        }
    }

    #[test]
    fn tables_round_trip_with_seed() {
        let rows = vec![participant("a"), participant("b")];
        let mut buf = Vec::new();
        write_participants(&mut buf, 77, &rows).unwrap();
        let (seed, back) = read_participants(buf.as_slice()).unwrap();
        assert_eq!(seed, Some(77));
        assert_eq!(back, rows);
    }

    #[test]
    fn empty_table_keeps_header() {
        let mut buf = Vec::new();
        write_messages(&mut buf, 1, &[]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), MESSAGE_COLUMNS.join(","));
        assert!(read_messages(buf.as_slice()).unwrap().1.is_empty());
    }

    #[test]
    fn missing_column_is_named() {
        let mut buf = Vec::new();
        write_participants(&mut buf, 3, &[participant("a")]).unwrap();
        let text = String::from_utf8(buf).unwrap().replace("attitude_change", "att_change");
        match read_participants(text.as_bytes()) {
            Err(TableError::MissingColumn { column, .. }) => assert_eq!(column, "attitude_change"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn headerless_comment_is_optional() {
        let mut buf = Vec::new();
        write_participants(&mut buf, 3, &[participant("a")]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let body = text.split_once('\n').unwrap().1;
        let (seed, rows) = read_participants(body.as_bytes()).unwrap();
        assert_eq!((seed, rows.len()), (None, 1));
    }
}
