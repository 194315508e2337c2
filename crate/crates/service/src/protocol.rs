//! Wire protocol.
//!
//! Every frame is a 4-byte big-endian length followed by that many bytes of
//! UTF-8 JSON holding exactly one object. Each object carries the protocol
//! version under `"v"` and its frame type under `"type"`. Over WebSocket each
//! binary message carries one complete length-prefixed frame.
//!
//! Client to server:
//!
//! | type                | fields                                       |
//! |---------------------|----------------------------------------------|
//! | `hello`             | `participant`, `token`                       |
//! | `get_instrument`    | `instrument`                                 |
//! | `submit_survey`     | `wave`, `answers`, `submission_id`           |
//! | `join`              |                                              |
//! | `send_message`      | `text`                                       |
//! | `choose_rephrasing` | `offer_id`, `selection`                      |
//! | `leave`             |                                              |
//! | `ping`              |                                              |
//!
//! Server to client: `welcome`, `instrument`, `survey_accepted`, `waiting`,
//! `matched`, `tutorial`, `offer_pending`, `rephrase_offer`,
//! `message_delivered`, `partner_message`, `conversation_ended`,
//! `route_to_survey`, `unmatched`, `error`, `pong`.

use std::collections::BTreeMap;
use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use parley_core::conversation::EndReason;
use parley_core::surveys::{Answer, Instrument, InstrumentId};
use parley_core::{ConversationId, MessageId, OfferId, ParticipantId};

pub const PROTOCOL_VERSION: u32 = 1;
pub const MAX_FRAME_BYTES: usize = 64 * 1024;
/// Longest chat message accepted, in characters.
pub const MAX_MESSAGE_CHARS: usize = 2_000;

/// The author's pick on an offer. Options are indexed in display order; the
/// client never learns which strategy produced which option.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WireSelection {
    Option { index: usize },
    Original,
    Edited { text: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientFrame {
    Hello {
        participant: ParticipantId,
        token: String,
    },
    GetInstrument {
        instrument: InstrumentId,
    },
    SubmitSurvey {
        wave: InstrumentId,
        answers: BTreeMap<String, Answer>,
        submission_id: String,
    },
    Join,
    SendMessage {
        text: String,
    },
    ChooseRephrasing {
        offer_id: OfferId,
        selection: WireSelection,
    },
    Leave,
    Ping,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    UnsupportedVersion,
    InvalidFrame,
    NotAuthenticated,
    ProtocolViolation,
    UnknownConversation,
    OversizedMessage,
    EmptyMessage,
    StaleOffer,
    SurveyInvalid,
    ConversationClosing,
    Fault,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerFrame {
    Welcome {
        participant: ParticipantId,
        resumed_conversation: Option<ConversationId>,
    },
    Instrument {
        instrument: Instrument,
    },
    SurveyAccepted {
        wave: InstrumentId,
        submission_id: String,
        duplicate: bool,
    },
    Waiting,
    Matched {
        conversation_id: ConversationId,
        partner: ParticipantId,
    },
    Tutorial {
        text: String,
    },
    /// The message is being rephrased; the composer stays locked.
    OfferPending {
        message_id: MessageId,
    },
    RephraseOffer {
        offer_id: OfferId,
        message_id: MessageId,
        original: String,
        options: Vec<String>,
    },
    MessageDelivered {
        message_id: MessageId,
        text: String,
    },
    PartnerMessage {
        message_id: MessageId,
        text: String,
        turn_index: u32,
    },
    ConversationEnded {
        conversation_id: ConversationId,
        reason: EndReason,
    },
    RouteToSurvey {
        instrument: InstrumentId,
    },
    Unmatched,
    Error {
        code: ErrorCode,
        detail: String,
    },
    Pong,
}

impl ServerFrame {
    pub fn error(code: ErrorCode, detail: impl Into<String>) -> Self {
        ServerFrame::Error {
            code,
            detail: detail.into(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    v: u32,
    #[serde(flatten)]
    body: T,
}

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("frame of {0} bytes exceeds the {MAX_FRAME_BYTES}-byte limit")]
    TooLarge(usize),
    #[error("malformed frame: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("unsupported protocol version {0}")]
    Version(u32),
    #[error("truncated frame")]
    Truncated,
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// JSON payload of a frame, without the length prefix.
pub fn encode_payload<T: Serialize>(body: &T) -> Vec<u8> {
    serde_json::to_vec(&Envelope {
        v: PROTOCOL_VERSION,
        body,
    })
    .expect("frames always serialize")
}

pub fn decode_payload<T: for<'de> Deserialize<'de>>(payload: &[u8]) -> Result<T, CodecError> {
    #[derive(Deserialize)]
    struct VersionOnly {
        v: u32,
    }
    let VersionOnly { v } = serde_json::from_slice(payload)?;
    if v != PROTOCOL_VERSION {
        return Err(CodecError::Version(v));
    }
    let envelope: Envelope<T> = serde_json::from_slice(payload)?;
    Ok(envelope.body)
}

/// Length-prefixed frame bytes.
pub fn encode_frame<T: Serialize>(body: &T) -> Vec<u8> {
    let payload = encode_payload(body);
    let mut out = Vec::with_capacity(payload.len() + 4);
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.extend_from_slice(&payload);
    out
}

/// Decodes one complete length-prefixed frame held in `bytes`.
pub fn decode_frame<T: for<'de> Deserialize<'de>>(bytes: &[u8]) -> Result<T, CodecError> {
    if bytes.len() < 4 {
        return Err(CodecError::Truncated);
    }
    let len = u32::from_be_bytes(bytes[..4].try_into().expect("4 bytes")) as usize;
    if len > MAX_FRAME_BYTES {
        return Err(CodecError::TooLarge(len));
    }
    if bytes.len() != 4 + len {
        return Err(CodecError::Truncated);
    }
    decode_payload(&bytes[4..])
}

/// Blocking frame reader; `Ok(None)` on clean end of stream.
pub fn read_frame<R: Read>(reader: &mut R) -> Result<Option<Vec<u8>>, CodecError> {
    let mut len = [0u8; 4];
    match reader.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_FRAME_BYTES {
        return Err(CodecError::TooLarge(len));
    }
    let mut payload = vec![0; len];
    reader.read_exact(&mut payload)?;
    Ok(Some(payload))
}

pub fn write_frame<W: Write, T: Serialize>(writer: &mut W, body: &T) -> io::Result<()> {
    writer.write_all(&encode_frame(body))?;
    writer.flush()
}

/// Async counterparts for the TCP transport.
pub mod tokio_io {
    use tokio::io::{AsyncRead, AsyncReadExt, AsyncWrite, AsyncWriteExt};

    use super::*;

    pub async fn read_frame<R: AsyncRead + Unpin>(
        reader: &mut R,
    ) -> Result<Option<Vec<u8>>, CodecError> {
        let mut len = [0u8; 4];
        match reader.read_exact(&mut len).await {
            Ok(_) => {}
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
            Err(e) => return Err(e.into()),
        }
        let len = u32::from_be_bytes(len) as usize;
        if len > MAX_FRAME_BYTES {
            return Err(CodecError::TooLarge(len));
        }
        let mut payload = vec![0; len];
        reader.read_exact(&mut payload).await?;
        Ok(Some(payload))
    }

    pub async fn write_frame<W: AsyncWrite + Unpin, T: Serialize>(
        writer: &mut W,
        body: &T,
    ) -> io::Result<()> {
        writer.write_all(&encode_frame(body)).await?;
        writer.flush().await
    }
}
