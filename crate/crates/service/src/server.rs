//! Network front end: one actor task owns the [`Hub`]; transports talk to it
//! over a channel.
//!
//! TCP connections carry length-prefixed frames. The `/ws` route carries the
//! same length-prefixed bytes, one frame per binary message. Provider calls
//! run on the blocking pool and come back as commands, so a slow provider
//! never stalls the hub.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message as WsMessage, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use tokio::net::TcpListener;
use tokio::sync::{mpsc, oneshot};

use parley_core::rephrase::{OfferFailure, RephraseEngine};
use parley_core::{Clock, ParticipantId, Suggestion, SystemClock};

use crate::hub::{Effects, Hub, OfferTicket};
use crate::protocol::tokio_io::{read_frame, write_frame};
use crate::protocol::{decode_frame, decode_payload, encode_frame, ClientFrame, CodecError, ErrorCode, ServerFrame};

pub const TICK_INTERVAL: Duration = Duration::from_secs(1);

type ConnId = u64;

enum Command {
    Open {
        conn: ConnId,
        tx: mpsc::UnboundedSender<ServerFrame>,
    },
    Frame {
        conn: ConnId,
        frame: ClientFrame,
    },
    Close {
        conn: ConnId,
    },
    OfferDone {
        ticket: OfferTicket,
        result: Result<Vec<Suggestion>, OfferFailure>,
    },
    Shutdown(oneshot::Sender<Hub>),
}

/// Cloneable handle to the hub actor.
#[derive(Clone)]
pub struct HubHandle {
    tx: mpsc::UnboundedSender<Command>,
    next_conn: Arc<std::sync::atomic::AtomicU64>,
}

/// One open connection as seen by a transport.
pub struct Link {
    conn: ConnId,
    handle: HubHandle,
    direct: mpsc::UnboundedSender<ServerFrame>,
}

impl Link {
    /// Decodes a payload and forwards it; codec errors are answered on this
    /// connection only.
    pub fn submit_payload(&self, payload: &[u8]) {
        match decode_payload::<ClientFrame>(payload) {
            Ok(frame) => self.submit(frame),
            Err(e) => self.reject(&e),
        }
    }

    pub fn submit(&self, frame: ClientFrame) {
        let _ = self.handle.tx.send(Command::Frame {
            conn: self.conn,
            frame,
        });
    }

    pub fn reject(&self, error: &CodecError) {
        let code = match error {
            CodecError::Version(_) => ErrorCode::UnsupportedVersion,
            _ => ErrorCode::InvalidFrame,
        };
        self.reply_error(code, error.to_string());
    }

    pub fn reply_error(&self, code: ErrorCode, detail: impl Into<String>) {
        let _ = self.direct.send(ServerFrame::error(code, detail));
    }
}

impl Drop for Link {
    fn drop(&mut self) {
        let _ = self.handle.tx.send(Command::Close { conn: self.conn });
    }
}

impl HubHandle {
    /// Registers a connection; the receiver yields frames to write to it.
    pub fn open(&self) -> (Link, mpsc::UnboundedReceiver<ServerFrame>) {
        let conn = self
            .next_conn
            .fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        let (tx, outbound) = mpsc::unbounded_channel();
        let _ = self.tx.send(Command::Open {
            conn,
            tx: tx.clone(),
        });
        let link = Link {
            conn,
            handle: self.clone(),
            direct: tx,
        };
        (link, outbound)
    }

    /// Stops the actor and returns the hub, e.g. to inspect state in tests.
    pub async fn shutdown(self) -> Option<Hub> {
        let (tx, rx) = oneshot::channel();
        self.tx.send(Command::Shutdown(tx)).ok()?;
        rx.await.ok()
    }
}

struct Actor {
    hub: Hub,
    engine: Arc<RephraseEngine>,
    clock: SystemClock,
    commands: mpsc::WeakUnboundedSender<Command>,
    conns: HashMap<ConnId, (mpsc::UnboundedSender<ServerFrame>, Option<ParticipantId>)>,
    bound: HashMap<ParticipantId, ConnId>,
}

impl Actor {
    fn now(&self) -> u64 {
        self.clock.now_ms()
    }

    fn direct(&self, conn: ConnId, frame: ServerFrame) {
        if let Some((tx, _)) = self.conns.get(&conn) {
            let _ = tx.send(frame);
        }
    }

    fn dispatch(&self, fx: Effects) {
        for out in fx.frames {
            match self.bound.get(&out.to) {
                Some(conn) => self.direct(*conn, out.frame),
                None => tracing::debug!(to = %out.to, "dropping frame for offline participant"),
            }
        }
        for ticket in fx.offer_requests {
            let Some(commands) = self.commands.upgrade() else {
                return;
            };
            let engine = self.engine.clone();
            tokio::task::spawn_blocking(move || {
                let result = engine.fetch_suggestions(&ticket.request, &SystemClock::new());
                let _ = commands.send(Command::OfferDone { ticket, result });
            });
        }
    }

    fn hello(&mut self, conn: ConnId, frame: ClientFrame) {
        let ClientFrame::Hello { participant, .. } = &frame else {
            unreachable!()
        };
        let participant = participant.clone();
        match self.conns.get(&conn) {
            None => return,
            Some((_, Some(existing))) if *existing != participant => {
                self.direct(
                    conn,
                    ServerFrame::error(ErrorCode::ProtocolViolation, "connection already bound"),
                );
                return;
            }
            _ => {}
        }
        let now = self.now();
        let mut fx = self.hub.handle(&participant, frame, now);
        let welcomed = fx
            .frames
            .iter()
            .any(|o| o.to == participant && matches!(o.frame, ServerFrame::Welcome { .. }));
        if welcomed {
            if let Some(old) = self.bound.insert(participant.clone(), conn) {
                if old != conn {
                    if let Some((_, who)) = self.conns.get_mut(&old) {
                        *who = None;
                    }
                }
            }
            if let Some((_, who)) = self.conns.get_mut(&conn) {
                *who = Some(participant);
            }
        } else {
            // A rejected hello must not reach a session someone else holds.
            let (mine, rest): (Vec<_>, Vec<_>) =
                fx.frames.into_iter().partition(|o| o.to == participant);
            for o in mine {
                self.direct(conn, o.frame);
            }
            fx.frames = rest;
        }
        self.dispatch(fx);
    }

    fn handle(&mut self, command: Command) -> Option<oneshot::Sender<Hub>> {
        match command {
            Command::Open { conn, tx } => {
                self.conns.insert(conn, (tx, None));
            }
            Command::Close { conn } => {
                if let Some((_, Some(who))) = self.conns.remove(&conn) {
                    if self.bound.get(&who) == Some(&conn) {
                        self.bound.remove(&who);
                    }
                }
            }
            Command::Frame { conn, frame } => {
                if matches!(frame, ClientFrame::Hello { .. }) {
                    self.hello(conn, frame);
                } else if let Some((_, Some(who))) = self.conns.get(&conn) {
                    let who = who.clone();
                    let now = self.now();
                    let fx = self.hub.handle(&who, frame, now);
                    self.dispatch(fx);
                } else {
                    self.direct(
                        conn,
                        ServerFrame::error(ErrorCode::NotAuthenticated, "send hello first"),
                    );
                }
            }
            Command::OfferDone { ticket, result } => {
                let now = self.now();
                let fx = self.hub.offer_ready(&ticket, result, now);
                self.dispatch(fx);
            }
            Command::Shutdown(reply) => return Some(reply),
        }
        None
    }
}

/// Starts the hub actor on the current runtime.
pub fn spawn_hub(hub: Hub, engine: Arc<RephraseEngine>) -> HubHandle {
    let (tx, mut rx) = mpsc::unbounded_channel();
    let mut actor = Actor {
        hub,
        engine,
        clock: SystemClock::new(),
        commands: tx.downgrade(),
        conns: HashMap::new(),
        bound: HashMap::new(),
    };
    tokio::spawn(async move {
        let mut ticker = tokio::time::interval(TICK_INTERVAL);
        ticker.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
        loop {
            tokio::select! {
                command = rx.recv() => {
                    let Some(command) = command else { break };
                    if let Some(reply) = actor.handle(command) {
                        let _ = reply.send(actor.hub);
                        return;
                    }
                }
                _ = ticker.tick() => {
                    let now = actor.now();
                    let fx = actor.hub.tick(now);
                    actor.dispatch(fx);
                }
            }
        }
    });
    HubHandle {
        tx,
        next_conn: Arc::new(std::sync::atomic::AtomicU64::new(1)),
    }
}

/// Accepts TCP connections until the listener fails.
pub async fn serve_tcp(listener: TcpListener, handle: HubHandle) -> std::io::Result<()> {
    loop {
        let (stream, peer) = listener.accept().await?;
        tracing::info!(%peer, "tcp connection");
        let handle = handle.clone();
        tokio::spawn(async move {
            let (mut rd, mut wr) = stream.into_split();
            let (link, mut outbound) = handle.open();
            let writer = tokio::spawn(async move {
                while let Some(frame) = outbound.recv().await {
                    if write_frame(&mut wr, &frame).await.is_err() {
                        break;
                    }
                }
            });
            loop {
                match read_frame(&mut rd).await {
                    Ok(Some(payload)) => link.submit_payload(&payload),
                    Ok(None) => break,
                    Err(e) => {
                        // The stream can't be resynchronised after a bad length.
                        link.reject(&e);
                        break;
                    }
                }
            }
            drop(link);
            let _ = writer.await;
            tracing::info!(%peer, "tcp connection closed");
        });
    }
}

/// Router exposing the WebSocket transport at `/ws`.
pub fn ws_router(handle: HubHandle) -> Router {
    Router::new().route("/ws", get(ws_upgrade)).with_state(handle)
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(handle): State<HubHandle>) -> Response {
    ws.on_upgrade(move |socket| ws_connection(socket, handle))
}

async fn ws_connection(socket: WebSocket, handle: HubHandle) {
    let (mut sink, mut stream) = socket.split();
    let (link, mut outbound) = handle.open();
    let writer = tokio::spawn(async move {
        while let Some(frame) = outbound.recv().await {
            if sink.send(WsMessage::Binary(encode_frame(&frame).into())).await.is_err() {
                break;
            }
        }
    });
    while let Some(Ok(message)) = stream.next().await {
        match message {
            WsMessage::Binary(bytes) => match decode_frame::<ClientFrame>(&bytes) {
                Ok(frame) => link.submit(frame),
                Err(e) => link.reject(&e),
            },
            WsMessage::Text(_) => link.reply_error(ErrorCode::InvalidFrame, "frames are binary"),
            WsMessage::Close(_) => break,
            WsMessage::Ping(_) | WsMessage::Pong(_) => {}
        }
    }
    drop(link);
    let _ = writer.await;
}
