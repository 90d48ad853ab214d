//! Deterministic pursuit–evasion arena: a continuous-space world with fog of
//! war, a fixed-step episode engine, scripted agents, closed-form capture-time
//! predictions and a line-delimited JSON server for remote agents.

pub mod agents;
pub mod episode;
pub mod error;
pub mod harness;
pub mod protocol;
pub mod theory;
pub mod world;

pub use agents::{evader_agent, pursuer_agent, EvaderAgent, PursuerAgent};
pub use episode::{
    CaptureTime, Episode, EpisodeConfig, EpisodeLog, EvaderAction, MapId, Observation, PursuerAction, StepResult,
};
pub use error::{ActionError, ConfigError, EpisodeError, TheoryError, UnknownAgent};
pub use world::{GameDomain, Team, UnitKind, Vec2, WorldState};
