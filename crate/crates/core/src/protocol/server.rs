use std::io::{BufReader, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

use super::message::{encode, read_frame, DecodeError, ErrorCode, Message, PROTOCOL_VERSION};
use crate::agents::{evader_agent, pursuer_agent, EvaderAgent, PursuerAgent};
use crate::episode::{Episode, EpisodeConfig, EpisodeLog, EvaderAction, Observation, PursuerAction};
use crate::error::{ConfigError, UnknownAgent};
use crate::world::Team;

pub const DEFAULT_ACTION_TIMEOUT: Duration = Duration::from_millis(1000);
pub const DEFAULT_HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    UnknownAgent(#[from] UnknownAgent),
    #[error("invalid serve options: {0}")]
    Options(String),
}

enum Inbound {
    Frame(Message),
    Bad(DecodeError),
    Closed,
}

enum Received {
    Frame(Message),
    Bad(DecodeError),
    Closed,
    TimedOut,
}

/// A framed, bidirectional byte stream to one remote agent. Incoming frames
/// are read on a background thread so waits can time out.
pub struct Connection {
    writer: Box<dyn Write + Send>,
    inbox: Receiver<Inbound>,
    socket: Option<TcpStream>,
    open: bool,
}

impl Connection {
    pub fn new<R, W>(reader: R, writer: W) -> Self
    where
        R: Read + Send + 'static,
        W: Write + Send + 'static,
    {
        let (tx, inbox) = mpsc::channel();
        thread::spawn(move || {
            let mut reader = BufReader::new(reader);
            loop {
                let item = match read_frame(&mut reader) {
                    Ok(Some(Ok(m))) => Inbound::Frame(m),
                    Ok(Some(Err(e))) => Inbound::Bad(e),
                    Ok(None) | Err(_) => {
                        let _ = tx.send(Inbound::Closed);
                        return;
                    }
                };
                if tx.send(item).is_err() {
                    return;
                }
            }
        });
        Self { writer: Box::new(writer), inbox, socket: None, open: true }
    }

    pub fn tcp(stream: TcpStream) -> std::io::Result<Self> {
        stream.set_nodelay(true)?;
        let mut conn = Self::new(stream.try_clone()?, stream.try_clone()?);
        conn.socket = Some(stream);
        Ok(conn)
    }

    pub fn is_open(&self) -> bool {
        self.open
    }

    fn send(&mut self, message: &Message) -> bool {
        if self.open {
            let ok = self.writer.write_all(&encode(message)).and_then(|_| self.writer.flush());
            self.open = ok.is_ok();
        }
        self.open
    }

    fn recv_until(&mut self, deadline: Instant) -> Received {
        if !self.open {
            return Received::Closed;
        }
        let wait = deadline.saturating_duration_since(Instant::now());
        match self.inbox.recv_timeout(wait) {
            Ok(Inbound::Frame(m)) => Received::Frame(m),
            Ok(Inbound::Bad(e)) => Received::Bad(e),
            Ok(Inbound::Closed) | Err(RecvTimeoutError::Disconnected) => {
                self.open = false;
                Received::Closed
            }
            Err(RecvTimeoutError::Timeout) => Received::TimedOut,
        }
    }

    /// Discards frames that arrived after their round was closed.
    fn drain_stale(&mut self) {
        while let Ok(item) = self.inbox.try_recv() {
            if matches!(item, Inbound::Closed) {
                self.open = false;
            }
        }
    }

    fn close(&mut self) {
        self.open = false;
        if let Some(socket) = &self.socket {
            let _ = socket.shutdown(Shutdown::Both);
        }
    }
}

impl Drop for Connection {
    fn drop(&mut self) {
        self.close();
    }
}

pub enum PursuerSlot {
    Remote(Connection),
    Scripted(Box<dyn PursuerAgent>),
}

pub enum EvaderSlot {
    Remote(Connection),
    Scripted(Box<dyn EvaderAgent>),
}

#[derive(Debug, Clone)]
pub struct SessionOptions {
    /// Episode `i` of the session uses `config.seed + i`.
    pub config: EpisodeConfig,
    pub episodes: u64,
    pub action_timeout: Duration,
    /// Built-in reflexes for a remotely driven evader army.
    pub remote_evader_reflexes: bool,
    pub record_logs: bool,
}

impl SessionOptions {
    pub fn new(config: EpisodeConfig) -> Self {
        Self {
            config,
            episodes: 1,
            action_timeout: DEFAULT_ACTION_TIMEOUT,
            remote_evader_reflexes: true,
            record_logs: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSummary {
    pub episode: u64,
    pub seed: u64,
    pub score: u64,
    pub duration: f64,
    pub steps: u64,
    /// A remote agent disconnected before the episode finished.
    pub aborted: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SessionReport {
    pub episodes: Vec<EpisodeSummary>,
    /// Filled when `record_logs` is set.
    pub logs: Vec<EpisodeLog>,
}

enum Reply {
    Act { name: String, x: Option<i64>, y: Option<i64> },
    NoOp,
    Lost,
}

/// Lockstep driver for one pursuer slot and one evader slot.
pub struct Session {
    options: SessionOptions,
    pursuer: PursuerSlot,
    evader: EvaderSlot,
}

impl Session {
    pub fn new(options: SessionOptions, pursuer: PursuerSlot, evader: EvaderSlot) -> Result<Self, ServerError> {
        options.config.validate()?;
        Ok(Self { options, pursuer, evader })
    }

    /// Plays the configured episodes, stopping early if a remote agent leaves.
    pub fn run(&mut self) -> SessionReport {
        let mut report = SessionReport::default();
        for index in 0..self.options.episodes {
            let mut log = self.options.record_logs.then(EpisodeLog::default);
            let summary = self.run_episode(index, log.as_mut());
            let aborted = summary.aborted;
            report.episodes.push(summary);
            report.logs.extend(log);
            if aborted {
                break;
            }
        }
        report
    }

    fn run_episode(&mut self, index: u64, mut log: Option<&mut EpisodeLog>) -> EpisodeSummary {
        let config = self.options.config.clone().with_seed(self.options.config.seed.wrapping_add(index));
        let (mut episode, mut obs_p, mut obs_e) = Episode::reset(config.clone()).expect("config validated");
        match &mut self.pursuer {
            PursuerSlot::Scripted(agent) => agent.reset(&config),
            PursuerSlot::Remote(conn) => {
                conn.send(&Message::Config(config.clone()));
            }
        }
        let reflexes = match &mut self.evader {
            EvaderSlot::Scripted(agent) => {
                agent.reset(&config);
                agent.reflexes()
            }
            EvaderSlot::Remote(conn) => {
                conn.send(&Message::Config(config.clone()));
                self.options.remote_evader_reflexes
            }
        };
        episode.set_evader_reflexes(reflexes);

        let mut aborted = false;
        loop {
            let step = episode.steps();
            if let PursuerSlot::Remote(conn) = &mut self.pursuer {
                send_obs(conn, index, step, &obs_p);
            }
            if let EvaderSlot::Remote(conn) = &mut self.evader {
                send_obs(conn, index, step, &obs_e);
            }
            let deadline = Instant::now() + self.options.action_timeout;

            let act_p = match &mut self.pursuer {
                PursuerSlot::Scripted(agent) => Some(agent.act(&obs_p)),
                PursuerSlot::Remote(conn) => match await_act(conn, deadline) {
                    Reply::Act { name, x, y } => Some(
                        PursuerAction::parse(&name, x, y, &config)
                            .unwrap_or_else(|e| reject(conn, e.to_string(), PursuerAction::NoOp)),
                    ),
                    Reply::NoOp => Some(PursuerAction::NoOp),
                    Reply::Lost => None,
                },
            };
            let act_e = match &mut self.evader {
                EvaderSlot::Scripted(agent) => Some(agent.act(&obs_e)),
                EvaderSlot::Remote(conn) => match await_act(conn, deadline) {
                    Reply::Act { name, x, y } => Some(
                        EvaderAction::parse(&name, x, y, &config)
                            .unwrap_or_else(|e| reject(conn, e.to_string(), EvaderAction::NoOp)),
                    ),
                    Reply::NoOp => Some(EvaderAction::NoOp),
                    Reply::Lost => None,
                },
            };
            let (Some(act_p), Some(act_e)) = (act_p, act_e) else {
                aborted = true;
                break;
            };

            let result = episode.step(act_p, act_e).expect("episode is running");
            if let Some(log) = log.as_deref_mut() {
                log.record(&episode, act_p, act_e, &result);
            }
            let score = result.episode_score;
            if let PursuerSlot::Remote(conn) = &mut self.pursuer {
                conn.send(&Message::Result { reward: result.reward_pursuer, done: result.done, score });
            }
            if let EvaderSlot::Remote(conn) = &mut self.evader {
                conn.send(&Message::Result { reward: result.reward_evader, done: result.done, score });
            }
            if result.done {
                break;
            }
            obs_p = result.obs_pursuer;
            obs_e = result.obs_evader;
        }

        let end = Message::EpisodeEnd {
            score: episode.score(),
            kills: episode.world().kills,
            duration: episode.world().clock,
        };
        if let PursuerSlot::Remote(conn) = &mut self.pursuer {
            conn.send(&end);
        }
        if let EvaderSlot::Remote(conn) = &mut self.evader {
            conn.send(&end);
        }
        EpisodeSummary {
            episode: index,
            seed: config.seed,
            score: episode.score(),
            duration: episode.world().clock,
            steps: episode.steps(),
            aborted,
        }
    }
}

fn send_obs(conn: &mut Connection, episode: u64, step: u64, observation: &Observation) {
    conn.drain_stale();
    conn.send(&Message::Obs { episode, step, observation: observation.clone() });
}

fn reject<T>(conn: &mut Connection, detail: String, fallback: T) -> T {
    conn.send(&Message::error(ErrorCode::BadAction, detail));
    fallback
}

fn await_act(conn: &mut Connection, deadline: Instant) -> Reply {
    loop {
        match conn.recv_until(deadline) {
            Received::Frame(Message::Act { name, x, y }) => return Reply::Act { name, x, y },
            Received::Frame(other) => {
                let detail = format!("expected act, got {}", frame_kind(&other));
                conn.send(&Message::error(ErrorCode::UnexpectedMessage, detail));
            }
            Received::Bad(e) => {
                conn.send(&Message::error(ErrorCode::BadFrame, e.to_string()));
                return Reply::NoOp;
            }
            Received::TimedOut => {
                conn.send(&Message::error(ErrorCode::Timeout, "no act before the deadline; no_op substituted"));
                return Reply::NoOp;
            }
            Received::Closed => return Reply::Lost,
        }
    }
}

fn frame_kind(m: &Message) -> &'static str {
    match m {
        Message::Hello { .. } => "hello",
        Message::Config(_) => "config",
        Message::Obs { .. } => "obs",
        Message::Act { .. } => "act",
        Message::Result { .. } => "result",
        Message::EpisodeEnd { .. } => "episode_end",
        Message::Error { .. } => "error",
    }
}

/// Who drives a slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SlotSpec {
    /// A client that connects and says hello.
    Remote,
    /// A registered scripted agent, by name.
    Scripted(String),
}

impl SlotSpec {
    /// `"socket"` and `"remote"` mean a remote client; anything else names a scripted agent.
    pub fn parse(name: &str) -> Self {
        match name {
            "socket" | "remote" => SlotSpec::Remote,
            other => SlotSpec::Scripted(other.to_owned()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub session: SessionOptions,
    pub pursuer: SlotSpec,
    pub evader: SlotSpec,
    pub handshake_timeout: Duration,
}

impl ServeOptions {
    pub fn new(config: EpisodeConfig, pursuer: SlotSpec, evader: SlotSpec) -> Self {
        Self { session: SessionOptions::new(config), pursuer, evader, handshake_timeout: DEFAULT_HANDSHAKE_TIMEOUT }
    }

    fn remote_slots(&self) -> usize {
        [&self.pursuer, &self.evader].iter().filter(|s| ***s == SlotSpec::Remote).count()
    }
}

/// Slots filled so far while waiting for remote agents.
struct Binder {
    pursuer: Option<PursuerSlot>,
    evader: Option<EvaderSlot>,
    handshake_timeout: Duration,
}

impl Binder {
    fn new(options: &ServeOptions) -> Result<Self, ServerError> {
        options.session.config.validate()?;
        let pursuer = match &options.pursuer {
            SlotSpec::Scripted(name) => Some(PursuerSlot::Scripted(pursuer_agent(name)?)),
            SlotSpec::Remote => None,
        };
        let evader = match &options.evader {
            SlotSpec::Scripted(name) => Some(EvaderSlot::Scripted(evader_agent(name)?)),
            SlotSpec::Remote => None,
        };
        Ok(Self { pursuer, evader, handshake_timeout: options.handshake_timeout })
    }

    fn complete(&self) -> bool {
        self.pursuer.is_some() && self.evader.is_some()
    }

    /// Waits for the hello and binds the connection, or explains the refusal
    /// to the client and drops it.
    fn offer(&mut self, mut conn: Connection) {
        let deadline = Instant::now() + self.handshake_timeout;
        let (role, version) = match conn.recv_until(deadline) {
            Received::Frame(Message::Hello { role, protocol_version }) => (role, protocol_version),
            Received::Frame(other) => {
                let detail = format!("expected hello, got {}", frame_kind(&other));
                conn.send(&Message::error(ErrorCode::UnexpectedMessage, detail));
                return;
            }
            Received::Bad(e) => {
                conn.send(&Message::error(ErrorCode::BadFrame, e.to_string()));
                return;
            }
            Received::TimedOut => {
                conn.send(&Message::error(ErrorCode::HandshakeTimeout, "no hello received"));
                return;
            }
            Received::Closed => return,
        };
        if version != PROTOCOL_VERSION {
            let detail = format!("server speaks protocol_version {PROTOCOL_VERSION}, client sent {version}");
            conn.send(&Message::error(ErrorCode::VersionMismatch, detail));
            return;
        }
        let taken = match role {
            Team::Pursuer => self.pursuer.is_some(),
            Team::Evader => self.evader.is_some(),
        };
        if taken {
            let role = match role {
                Team::Pursuer => "pursuer",
                Team::Evader => "evader",
            };
            conn.send(&Message::error(ErrorCode::SlotTaken, format!("{role} slot is already bound")));
            return;
        }
        match role {
            Team::Pursuer => self.pursuer = Some(PursuerSlot::Remote(conn)),
            Team::Evader => self.evader = Some(EvaderSlot::Remote(conn)),
        }
    }

    fn into_session(self, options: &ServeOptions) -> Result<Session, ServerError> {
        let (Some(pursuer), Some(evader)) = (self.pursuer, self.evader) else {
            return Err(ServerError::Options("both slots must be bound".into()));
        };
        Session::new(options.session.clone(), pursuer, evader)
    }
}

/// TCP front end: accepts clients until both slots are bound, then runs the session.
pub struct Server {
    listener: TcpListener,
}

impl Server {
    pub fn bind(addr: impl ToSocketAddrs + std::fmt::Debug) -> Result<Self, ServerError> {
        let label = format!("{addr:?}");
        TcpListener::bind(addr)
            .map(|listener| Self { listener })
            .map_err(|source| ServerError::Bind { addr: label, source })
    }

    pub fn local_addr(&self) -> Result<SocketAddr, ServerError> {
        Ok(self.listener.local_addr()?)
    }

    pub fn run(&self, options: &ServeOptions) -> Result<SessionReport, ServerError> {
        let mut binder = Binder::new(options)?;
        while !binder.complete() {
            let (stream, _) = self.listener.accept()?;
            match Connection::tcp(stream) {
                Ok(conn) => binder.offer(conn),
                Err(_) => continue,
            }
        }
        Ok(binder.into_session(options)?.run())
    }
}

/// Serves exactly one remote agent over the given streams (standard input and
/// output in the CLI); the other slot must be scripted.
pub fn serve_streams<R, W>(reader: R, writer: W, options: &ServeOptions) -> Result<SessionReport, ServerError>
where
    R: Read + Send + 'static,
    W: Write + Send + 'static,
{
    if options.remote_slots() != 1 {
        return Err(ServerError::Options("stream mode needs exactly one remote slot and one scripted slot".into()));
    }
    let mut binder = Binder::new(options)?;
    binder.offer(Connection::new(reader, writer));
    if !binder.complete() {
        return Err(ServerError::Options("the client did not claim the remote slot".into()));
    }
    Ok(binder.into_session(options)?.run())
}

pub fn serve_stdio(options: &ServeOptions) -> Result<SessionReport, ServerError> {
    serve_streams(std::io::stdin(), std::io::stdout(), options)
}
