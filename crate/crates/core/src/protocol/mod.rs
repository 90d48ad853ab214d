//! Line-delimited JSON protocol that lets external agents drive either side
//! of an episode in lockstep.

mod client;
mod message;
mod server;

pub use client::{Client, ClientError, ClientReport, RemoteAgent};
pub use message::{decode, encode, read_frame, DecodeError, ErrorCode, Message, MAX_FRAME_BYTES, PROTOCOL_VERSION};
pub use server::{
    serve_stdio, serve_streams, Connection, EpisodeSummary, EvaderSlot, PursuerSlot, ServeOptions, Server,
    ServerError, Session, SessionOptions, SessionReport, SlotSpec, DEFAULT_ACTION_TIMEOUT, DEFAULT_HANDSHAKE_TIMEOUT,
};
