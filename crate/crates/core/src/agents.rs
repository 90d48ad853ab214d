//! Scripted policies: the traversal pursuer, the built-in zergling and drone
//! behaviours, and the random and cluster evaders.
//!
//! Agents only see [`Observation`]s, exactly what a remote agent would receive
//! over the wire, so a scripted agent behaves identically in-process and
//! behind a socket. Built-in behaviours read the world directly and are
//! stateless.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::episode::{Camera, EpisodeConfig, EvaderAction, Observation, PursuerAction};
use crate::error::UnknownAgent;
use crate::world::{distance, GameDomain, Order, Team, Vec2, WorldState};

pub trait PursuerAgent: Send {
    fn name(&self) -> &'static str;
    /// Called once before every episode.
    fn reset(&mut self, config: &EpisodeConfig);
    fn act(&mut self, obs: &Observation) -> PursuerAction;
}

pub trait EvaderAgent: Send {
    fn name(&self) -> &'static str;
    fn reset(&mut self, config: &EpisodeConfig);
    fn act(&mut self, obs: &Observation) -> EvaderAction;
    /// Whether built-in unit behaviour stays active while this agent plays.
    fn reflexes(&self) -> bool {
        true
    }
}

pub const PURSUER_AGENTS: &[&str] = &["traversal", "noop"];
pub const EVADER_AGENTS: &[&str] = &["builtin", "random", "cluster", "stationary"];

pub fn pursuer_agent(name: &str) -> Result<Box<dyn PursuerAgent>, UnknownAgent> {
    match name {
        "traversal" => Ok(Box::new(TraversalPursuer::new())),
        "noop" => Ok(Box::new(NoOpPursuer)),
        _ => Err(UnknownAgent { role: "pursuer", name: name.to_owned(), known: PURSUER_AGENTS.join(", ") }),
    }
}

pub fn evader_agent(name: &str) -> Result<Box<dyn EvaderAgent>, UnknownAgent> {
    match name {
        "builtin" => Ok(Box::new(BuiltinEvader { reflexes: true })),
        "stationary" => Ok(Box::new(BuiltinEvader { reflexes: false })),
        "random" => Ok(Box::new(RandomEvader::new())),
        "cluster" => Ok(Box::new(ClusterEvader::new())),
        _ => Err(UnknownAgent { role: "evader", name: name.to_owned(), known: EVADER_AGENTS.join(", ") }),
    }
}

fn agent_rng(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ salt)
}

fn minimap_domain(obs: &Observation) -> GameDomain {
    GameDomain::new(obs.minimap.width() as u32, obs.minimap.height() as u32)
}

// ---------------------------------------------------------------------------
// built-in unit behaviour

/// Zerglings hold until a pursuer comes within sight, then attack-move at the
/// nearest one. Returns an order for every alive evader.
pub fn builtin_zergling_policy(world: &WorldState) -> Vec<(u32, Order)> {
    world
        .alive(Team::Evader)
        .map(|z| {
            let mut nearest: Option<(f64, Vec2)> = None;
            for p in world.alive(Team::Pursuer) {
                let d = distance(z.pos, p.pos);
                if d <= z.stats.sight && nearest.is_none_or(|(bd, _)| d < bd) {
                    nearest = Some((d, p.pos));
                }
            }
            let order = nearest.map_or(Order::Hold, |(_, pos)| Order::AttackMove(pos));
            (z.id, order)
        })
        .collect()
}

/// Drones hold until a pursuer comes within sight, then run at full speed
/// directly away from the centroid of the pursuers they see. Against a wall
/// the velocity is projected onto the wall. With `flee` off every drone holds.
pub fn builtin_drone_policy(world: &WorldState, dt: f64, flee: bool) -> Vec<(u32, Order)> {
    let (w, h) = (f64::from(world.domain.width), f64::from(world.domain.height));
    world
        .alive(Team::Evader)
        .map(|d| {
            if !flee {
                return (d.id, Order::Hold);
            }
            let threats: Vec<Vec2> = world
                .alive(Team::Pursuer)
                .filter(|p| distance(d.pos, p.pos) <= d.stats.sight)
                .map(|p| p.pos)
                .collect();
            if threats.is_empty() {
                return (d.id, Order::Hold);
            }
            let n = threats.len() as f64;
            let centroid = threats.iter().fold(Vec2::ZERO, |acc, p| acc + *p) * (1.0 / n);
            let away = d.pos - centroid;
            let Some(mut dir) = away.normalized() else {
                return (d.id, Order::Hold);
            };
            let blocked_x = (d.pos.x <= 0.0 && dir.x < 0.0) || (d.pos.x >= w && dir.x > 0.0);
            let blocked_y = (d.pos.y <= 0.0 && dir.y < 0.0) || (d.pos.y >= h && dir.y > 0.0);
            if blocked_x {
                dir.x = 0.0;
            }
            if blocked_y {
                dir.y = 0.0;
            }
            if blocked_x && blocked_y {
                // cornered: slide out along the edge across the main threat axis
                let inward = |at_low: bool| if at_low { 1.0 } else { -1.0 };
                dir = if away.x.abs() <= away.y.abs() {
                    Vec2::new(inward(d.pos.x <= 0.0), 0.0)
                } else {
                    Vec2::new(0.0, inward(d.pos.y <= 0.0))
                };
            }
            match dir.normalized() {
                Some(dir) => (d.id, Order::Move(d.pos + dir * (d.stats.speed * dt))),
                None => (d.id, Order::Hold),
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// trivial agents

/// Leaves the evaders to their built-in behaviour (or to standing still when
/// reflexes are off).
#[derive(Debug, Clone)]
pub struct BuiltinEvader {
    reflexes: bool,
}

impl EvaderAgent for BuiltinEvader {
    fn name(&self) -> &'static str {
        if self.reflexes {
            "builtin"
        } else {
            "stationary"
        }
    }

    fn reset(&mut self, _config: &EpisodeConfig) {}

    fn act(&mut self, _obs: &Observation) -> EvaderAction {
        EvaderAction::NoOp
    }

    fn reflexes(&self) -> bool {
        self.reflexes
    }
}

#[derive(Debug, Clone, Default)]
pub struct NoOpPursuer;

impl PursuerAgent for NoOpPursuer {
    fn name(&self) -> &'static str {
        "noop"
    }

    fn reset(&mut self, _config: &EpisodeConfig) {}

    fn act(&mut self, _obs: &Observation) -> PursuerAction {
        PursuerAction::NoOp
    }
}

// ---------------------------------------------------------------------------
// traversal pursuer

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Sweeping,
    /// Camera is moving onto a spotted evader.
    Acquiring,
    Attacking,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepDirection {
    PlusX,
    MinusX,
}

impl SweepDirection {
    fn flipped(self) -> Self {
        match self {
            SweepDirection::PlusX => SweepDirection::MinusX,
            SweepDirection::MinusX => SweepDirection::PlusX,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraversalState {
    pub lane_index: usize,
    pub lane_spacing: f64,
    pub sweep_direction: SweepDirection,
    pub phase: Phase,
    pub current_waypoint: (u32, u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Leg {
    Approach,
    Lane,
    Transition,
}

/// Time the group spent on one lane, from its start cell to its end cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneTiming {
    pub lane: usize,
    pub started: f64,
    pub finished: f64,
}

/// Row of each sweep lane for an arena `height` cells tall.
///
/// Lane centres sit at `spacing/2 + k*spacing`; the last one is pulled back to
/// `height - spacing/2` so the final band is no wider than a regular lane.
pub fn lane_rows(height: u32, spacing: f64) -> Vec<u32> {
    assert!(spacing > 0.0, "lane spacing must be positive");
    let h = f64::from(height);
    let count = (h / spacing).ceil().max(1.0) as u32;
    let mut rows: Vec<u32> = (0..count)
        .map(|k| {
            let center = (spacing / 2.0 + f64::from(k) * spacing).min(h - spacing / 2.0).max(0.0);
            (center.floor() as u32).min(height - 1)
        })
        .collect();
    rows.dedup();
    rows
}

/// Boustrophedon sweeper: lanes `2r` apart traversed end to end with
/// alternating direction, interrupted to chase down any evader that shows up
/// on the minimap.
#[derive(Debug, Clone)]
pub struct TraversalPursuer {
    width: u32,
    lanes: Vec<u32>,
    state: TraversalState,
    leg: Leg,
    issued: Option<(u32, u32)>,
    engagement_started: Option<f64>,
    kills_seen: u64,
    ignore_until: f64,
    pursuit_budget: f64,
    lane_started: f64,
    lane_log: Vec<LaneTiming>,
}

impl Default for TraversalPursuer {
    fn default() -> Self {
        Self::new()
    }
}

impl TraversalPursuer {
    pub const PURSUIT_BUDGET: f64 = 5.0;

    pub fn new() -> Self {
        Self {
            width: 1,
            lanes: vec![0],
            state: TraversalState {
                lane_index: 0,
                lane_spacing: 1.0,
                sweep_direction: SweepDirection::PlusX,
                phase: Phase::Sweeping,
                current_waypoint: (0, 0),
            },
            leg: Leg::Approach,
            issued: None,
            engagement_started: None,
            kills_seen: 0,
            ignore_until: 0.0,
            pursuit_budget: Self::PURSUIT_BUDGET,
            lane_started: 0.0,
            lane_log: Vec::new(),
        }
    }

    pub fn state(&self) -> &TraversalState {
        &self.state
    }

    pub fn lanes(&self) -> &[u32] {
        &self.lanes
    }

    /// Completed lanes of the current episode.
    pub fn lane_log(&self) -> &[LaneTiming] {
        &self.lane_log
    }

    /// The sweep path as world-space waypoints: start of lane 0, then each
    /// lane's end and the following lane's start, for one full cycle.
    pub fn sweep_path(&self) -> Vec<Vec2> {
        let mut path = Vec::new();
        let mut x_end = 0u32;
        let mut direction = SweepDirection::PlusX;
        for &row in &self.lanes {
            path.push(GameDomain::cell_center((x_end, row)));
            x_end = self.lane_end_x(direction);
            path.push(GameDomain::cell_center((x_end, row)));
            direction = direction.flipped();
        }
        path
    }

    fn lane_end_x(&self, direction: SweepDirection) -> u32 {
        match direction {
            SweepDirection::PlusX => self.width - 1,
            SweepDirection::MinusX => 0,
        }
    }

    fn advance_leg(&mut self, clock: f64) {
        let (x, _) = self.state.current_waypoint;
        match self.leg {
            Leg::Approach | Leg::Transition => {
                self.leg = Leg::Lane;
                self.lane_started = clock;
                let row = self.lanes[self.state.lane_index];
                self.state.current_waypoint = (self.lane_end_x(self.state.sweep_direction), row);
            }
            Leg::Lane => {
                self.lane_log.push(LaneTiming { lane: self.state.lane_index, started: self.lane_started, finished: clock });
                self.state.sweep_direction = self.state.sweep_direction.flipped();
                self.state.lane_index = (self.state.lane_index + 1) % self.lanes.len();
                self.leg = Leg::Transition;
                self.state.current_waypoint = (x, self.lanes[self.state.lane_index]);
            }
        }
    }

    /// Attack-moves to `target` when it is on screen, otherwise brings the
    /// camera there first.
    fn command(&mut self, target: (u32, u32), camera: Camera) -> PursuerAction {
        match camera.to_screen(target) {
            Some((x, y)) => PursuerAction::AttackScreen { x, y },
            None => PursuerAction::MoveCamera { x: target.0, y: target.1 },
        }
    }
}

impl PursuerAgent for TraversalPursuer {
    fn name(&self) -> &'static str {
        "traversal"
    }

    fn reset(&mut self, config: &EpisodeConfig) {
        let spacing = 2.0 * config.pursuer_type.stats().attack_range;
        *self = Self::new();
        self.width = config.domain.width;
        self.lanes = lane_rows(config.domain.height, spacing);
        self.state.lane_spacing = spacing;
        self.state.current_waypoint = (0, self.lanes[0]);
    }

    fn act(&mut self, obs: &Observation) -> PursuerAction {
        let clock = obs.scalars.clock;
        let Some(group) = obs.own_centroid() else {
            return PursuerAction::NoOp;
        };
        if !obs.scalars.selected {
            return PursuerAction::SelectArmy;
        }
        let domain = minimap_domain(obs);
        let camera = obs.scalars.camera;

        let enemies = obs.minimap.enemy_cells();
        // the budget limits one chase, so a kill restarts it
        if obs.scalars.kills != self.kills_seen {
            self.kills_seen = obs.scalars.kills;
            self.engagement_started = None;
        }
        if enemies.is_empty() {
            self.engagement_started = None;
        } else if clock >= self.ignore_until {
            let started = *self.engagement_started.get_or_insert(clock);
            if clock - started <= self.pursuit_budget {
                let target = enemies
                    .iter()
                    .map(|(cell, _)| *cell)
                    .min_by(|a, b| {
                        let da = distance(group, GameDomain::cell_center(*a));
                        let db = distance(group, GameDomain::cell_center(*b));
                        da.total_cmp(&db)
                    })
                    .expect("non-empty");
                self.issued = None;
                let action = self.command(target, camera);
                self.state.phase = match action {
                    PursuerAction::AttackScreen { .. } => Phase::Attacking,
                    _ => Phase::Acquiring,
                };
                return action;
            }
            // chase took too long: go back to sweeping for a while
            self.engagement_started = None;
            self.ignore_until = clock + self.pursuit_budget;
        }

        self.state.phase = Phase::Sweeping;
        if domain.cell_of(group) == self.state.current_waypoint {
            self.advance_leg(clock);
        }
        let waypoint = self.state.current_waypoint;
        if self.issued == Some(waypoint) {
            return PursuerAction::NoOp;
        }
        let action = self.command(waypoint, camera);
        if matches!(action, PursuerAction::AttackScreen { .. }) {
            self.issued = Some(waypoint);
        }
        action
    }
}

// ---------------------------------------------------------------------------
// evader agents

/// Sends the whole evader army to a uniformly random cell every decision step.
#[derive(Debug, Clone)]
pub struct RandomEvader {
    rng: ChaCha8Rng,
}

impl RandomEvader {
    const SALT: u64 = 0x5eed_0000_0000_0001;

    pub fn new() -> Self {
        Self { rng: agent_rng(0, Self::SALT) }
    }
}

impl Default for RandomEvader {
    fn default() -> Self {
        Self::new()
    }
}

impl EvaderAgent for RandomEvader {
    fn name(&self) -> &'static str {
        "random"
    }

    fn reset(&mut self, config: &EpisodeConfig) {
        self.rng = agent_rng(config.seed, Self::SALT);
    }

    fn act(&mut self, obs: &Observation) -> EvaderAction {
        if !obs.scalars.selected {
            return EvaderAction::SelectArmy;
        }
        let domain = minimap_domain(obs);
        EvaderAction::MoveMinimap { x: self.rng.gen_range(0..domain.width), y: self.rng.gen_range(0..domain.height) }
    }
}

#[derive(Debug, Clone)]
pub struct ClusterState {
    pub target: Vec2,
    pub dwell_remaining: f64,
    pub dwell_length: f64,
    pub rng: ChaCha8Rng,
}

/// Moves the evaders as one team to a random spot (a corner half of the
/// time), waits there, and repeats.
#[derive(Debug, Clone)]
pub struct ClusterEvader {
    state: ClusterState,
    corner_bias: f64,
    last_clock: Option<f64>,
}

impl ClusterEvader {
    const SALT: u64 = 0x5eed_0000_0000_0002;
    pub const DWELL_LENGTH: f64 = 10.0;
    pub const CORNER_BIAS: f64 = 0.5;

    pub fn new() -> Self {
        Self::with_params(Self::DWELL_LENGTH, Self::CORNER_BIAS)
    }

    pub fn with_params(dwell_length: f64, corner_bias: f64) -> Self {
        Self {
            state: ClusterState {
                target: Vec2::ZERO,
                dwell_remaining: 0.0,
                dwell_length,
                rng: agent_rng(0, Self::SALT),
            },
            corner_bias,
            last_clock: None,
        }
    }

    pub fn state(&self) -> &ClusterState {
        &self.state
    }

    fn pick_target(&mut self, domain: GameDomain) -> (u32, u32) {
        let rng = &mut self.state.rng;
        let (w, h) = (domain.width, domain.height);
        if rng.gen_bool(self.corner_bias) {
            [(0, 0), (w - 1, 0), (0, h - 1), (w - 1, h - 1)][rng.gen_range(0..4)]
        } else {
            (rng.gen_range(0..w), rng.gen_range(0..h))
        }
    }
}

impl Default for ClusterEvader {
    fn default() -> Self {
        Self::new()
    }
}

impl EvaderAgent for ClusterEvader {
    fn name(&self) -> &'static str {
        "cluster"
    }

    fn reset(&mut self, config: &EpisodeConfig) {
        *self = Self::with_params(self.state.dwell_length, self.corner_bias);
        self.state.rng = agent_rng(config.seed, Self::SALT);
    }

    fn act(&mut self, obs: &Observation) -> EvaderAction {
        let clock = obs.scalars.clock;
        let elapsed = self.last_clock.map_or(0.0, |t| clock - t);
        self.last_clock = Some(clock);
        self.state.dwell_remaining = (self.state.dwell_remaining - elapsed).max(0.0);

        if !obs.scalars.selected {
            return EvaderAction::SelectArmy;
        }
        if self.state.dwell_remaining > 0.0 {
            return EvaderAction::NoOp;
        }
        let cell = self.pick_target(minimap_domain(obs));
        self.state.target = GameDomain::cell_center(cell);
        self.state.dwell_remaining = self.state.dwell_length;
        EvaderAction::MoveMinimap { x: cell.0, y: cell.1 }
    }
}
