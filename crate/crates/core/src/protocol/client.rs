use std::io::{BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};

use thiserror::Error;

use super::message::{encode, read_frame, DecodeError, ErrorCode, Message};
use crate::agents::{EvaderAgent, PursuerAgent};
use crate::episode::{EpisodeConfig, Observation};
use crate::world::Team;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error("server refused the connection ({code:?}): {detail}")]
    Rejected { code: ErrorCode, detail: String },
    #[error("server closed the connection")]
    Closed,
    #[error("observation arrived before any config")]
    NoConfig,
}

/// A scripted agent playing one side of a remote session.
pub enum RemoteAgent {
    Pursuer(Box<dyn PursuerAgent>),
    Evader(Box<dyn EvaderAgent>),
}

impl RemoteAgent {
    pub fn role(&self) -> Team {
        match self {
            RemoteAgent::Pursuer(_) => Team::Pursuer,
            RemoteAgent::Evader(_) => Team::Evader,
        }
    }

    fn reset(&mut self, config: &EpisodeConfig) {
        match self {
            RemoteAgent::Pursuer(a) => a.reset(config),
            RemoteAgent::Evader(a) => a.reset(config),
        }
    }

    fn act(&mut self, obs: &Observation) -> Message {
        match self {
            RemoteAgent::Pursuer(a) => Message::pursuer_act(&a.act(obs)),
            RemoteAgent::Evader(a) => Message::evader_act(&a.act(obs)),
        }
    }
}

/// What a client saw over a whole session.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClientReport {
    pub scores: Vec<u64>,
    /// Non-fatal error frames, in arrival order.
    pub notices: Vec<(ErrorCode, String)>,
    pub steps: u64,
}

/// Blocking line-protocol client.
pub struct Client {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    role: Team,
}

impl Client {
    /// Connects and sends the hello; refusals surface on the first `recv`.
    pub fn connect(addr: impl ToSocketAddrs, role: Team) -> Result<Self, ClientError> {
        Self::connect_with(addr, Message::hello(role), role)
    }

    /// Connects and opens with an arbitrary first frame.
    pub fn connect_with(addr: impl ToSocketAddrs, first: Message, role: Team) -> Result<Self, ClientError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        let mut client = Self { reader: BufReader::new(stream.try_clone()?), writer: stream, role };
        client.send(&first)?;
        Ok(client)
    }

    pub fn role(&self) -> Team {
        self.role
    }

    /// Bounds how long `recv` blocks; `None` waits forever.
    pub fn set_read_timeout(&self, timeout: Option<std::time::Duration>) -> Result<(), ClientError> {
        self.writer.set_read_timeout(timeout)?;
        Ok(())
    }

    pub fn send(&mut self, message: &Message) -> Result<(), ClientError> {
        self.writer.write_all(&encode(message))?;
        Ok(())
    }

    pub fn send_raw(&mut self, bytes: &[u8]) -> Result<(), ClientError> {
        self.writer.write_all(bytes)?;
        Ok(())
    }

    pub fn recv(&mut self) -> Result<Message, ClientError> {
        match read_frame(&mut self.reader)? {
            Some(frame) => Ok(frame?),
            None => Err(ClientError::Closed),
        }
    }

    /// Plays `episodes` episodes with `agent`, answering every observation.
    pub fn play(&mut self, episodes: u64, agent: &mut RemoteAgent) -> Result<ClientReport, ClientError> {
        let mut report = ClientReport::default();
        let mut configured = false;
        while (report.scores.len() as u64) < episodes {
            match self.recv()? {
                Message::Config(config) => {
                    agent.reset(&config);
                    configured = true;
                }
                Message::Obs { observation, .. } => {
                    if !configured {
                        return Err(ClientError::NoConfig);
                    }
                    let act = agent.act(&observation);
                    self.send(&act)?;
                    report.steps += 1;
                }
                Message::EpisodeEnd { score, .. } => report.scores.push(score),
                Message::Error { code, detail } => match code {
                    ErrorCode::SlotTaken | ErrorCode::VersionMismatch | ErrorCode::HandshakeTimeout => {
                        return Err(ClientError::Rejected { code, detail })
                    }
                    _ => report.notices.push((code, detail)),
                },
                Message::Result { .. } | Message::Hello { .. } | Message::Act { .. } => {}
            }
        }
        Ok(report)
    }
}
