//! The two mini-games on top of the arena physics: action model, camera and
//! selection state, fog-filtered observations, the decision-step loop,
//! respawn, reward and termination.

use serde::{Deserialize, Serialize};

use crate::agents::{builtin_drone_policy, builtin_zergling_policy};
use crate::error::{ActionError, ConfigError, EpisodeError};
use crate::world::{visible_enemies, GameDomain, Order, OrderSource, Team, UnitKind, Vec2, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapId {
    #[serde(alias = "find-and-defeat-zerglings")]
    FindAndDefeatZerglings,
    #[serde(alias = "find-and-defeat-drones")]
    FindAndDefeatDrones,
}

impl MapId {
    pub fn units(self) -> (UnitKind, UnitKind) {
        match self {
            MapId::FindAndDefeatZerglings => (UnitKind::Marine, UnitKind::Zergling),
            MapId::FindAndDefeatDrones => (UnitKind::VoidRay, UnitKind::Drone),
        }
    }
}

impl std::str::FromStr for MapId {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "find_and_defeat_zerglings" | "zerglings" => Ok(MapId::FindAndDefeatZerglings),
            "find_and_defeat_drones" | "drones" => Ok(MapId::FindAndDefeatDrones),
            _ => Err(ConfigError::UnknownMap(s.to_owned())),
        }
    }
}

/// Episode parameters. The JSON form uses exactly these field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeConfig {
    pub map_id: MapId,
    pub domain: GameDomain,
    pub n_pursuers: u32,
    pub n_evaders: u32,
    pub pursuer_type: UnitKind,
    pub evader_type: UnitKind,
    /// Episode length in seconds.
    pub t_final: f64,
    /// Simulation tick in seconds.
    pub tick: f64,
    /// Ticks per decision step.
    pub decision_period: u32,
    /// Side of the square camera window, in cells.
    pub camera_size: u32,
    pub seed: u64,
}

impl EpisodeConfig {
    pub fn for_map(map_id: MapId) -> Self {
        let (pursuer_type, evader_type) = map_id.units();
        Self {
            map_id,
            domain: GameDomain::default(),
            n_pursuers: 3,
            n_evaders: 25,
            pursuer_type,
            evader_type,
            t_final: 180.0,
            tick: 0.125,
            decision_period: 2,
            camera_size: 16,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Overlays the keys of a JSON object onto this config.
    ///
    /// A `map_id` key switches the unit types to that map's defaults unless
    /// the same document also names them.
    pub fn with_overrides(self, overrides: &serde_json::Value) -> Result<Self, ConfigError> {
        let serde_json::Value::Object(patch) = overrides else {
            return Err(ConfigError::Invalid("config overrides must be a JSON object".into()));
        };
        let mut base = self;
        if let Some(map) = patch.get("map_id") {
            let map: MapId = serde_json::from_value(map.clone())
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
            let seed = base.seed;
            base = EpisodeConfig::for_map(map).with_seed(seed);
        }
        let mut merged = serde_json::to_value(&base).expect("config serializes");
        let target = merged.as_object_mut().expect("config is an object");
        for (key, value) in patch {
            if !target.contains_key(key) {
                return Err(ConfigError::Invalid(format!("unknown config key `{key}`")));
            }
            target.insert(key.clone(), value.clone());
        }
        let config: EpisodeConfig =
            serde_json::from_value(merged).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: EpisodeConfig =
            serde_json::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: &str| Err(ConfigError::Invalid(msg.to_owned()));
        if self.domain.width == 0 || self.domain.height == 0 {
            return bad("domain extents must be positive");
        }
        if !(self.t_final.is_finite() && self.t_final > 0.0) {
            return bad("t_final must be positive");
        }
        if !(self.tick.is_finite() && self.tick > 0.0) {
            return bad("tick must be positive");
        }
        if self.decision_period == 0 {
            return bad("decision_period must be at least 1");
        }
        if self.camera_size == 0
            || self.camera_size > self.domain.width
            || self.camera_size > self.domain.height
        {
            return bad("camera_size must fit inside the domain");
        }
        if self.n_pursuers == 0 || self.n_evaders == 0 {
            return bad("unit counts must be at least 1");
        }
        Ok(())
    }

    /// Seconds of simulated time per decision step.
    pub fn step_seconds(&self) -> f64 {
        self.tick * f64::from(self.decision_period)
    }

    /// Number of decision steps in an episode that is not cut short.
    pub fn max_steps(&self) -> u64 {
        (self.t_final / self.step_seconds() - 1e-9).ceil() as u64
    }
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self::for_map(MapId::FindAndDefeatZerglings)
    }
}

/// Size of the flattened discrete action space: one entry per minimap cell
/// plus the four non-spatial actions.
pub fn action_space_size(config: &EpisodeConfig) -> u64 {
    u64::from(config.domain.width) * u64::from(config.domain.height) + 4
}

/// Camera window, identified by its top-left cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Camera {
    pub x: u32,
    pub y: u32,
    pub size: u32,
}

impl Camera {
    /// Window of `size` cells centred as closely as the arena allows on `cell`.
    pub fn centered_on(cell: (u32, u32), size: u32, domain: &GameDomain) -> Self {
        let half = size / 2;
        let x = cell.0.saturating_sub(half).min(domain.width - size);
        let y = cell.1.saturating_sub(half).min(domain.height - size);
        Self { x, y, size }
    }

    pub fn centered(size: u32, domain: &GameDomain) -> Self {
        Self::centered_on((domain.width / 2, domain.height / 2), size, domain)
    }

    pub fn contains(&self, cell: (u32, u32)) -> bool {
        (self.x..self.x + self.size).contains(&cell.0) && (self.y..self.y + self.size).contains(&cell.1)
    }

    pub fn to_screen(&self, cell: (u32, u32)) -> Option<(u32, u32)> {
        self.contains(cell).then(|| (cell.0 - self.x, cell.1 - self.y))
    }

    pub fn to_world(&self, screen: (u32, u32)) -> (u32, u32) {
        (self.x + screen.0, self.y + screen.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum PursuerAction {
    SelectArmy,
    /// Centre the camera on a minimap cell.
    MoveCamera { x: u32, y: u32 },
    /// Attack-move the selected army to a cell of the camera window.
    AttackScreen { x: u32, y: u32 },
    NoOp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum EvaderAction {
    SelectArmy,
    /// Move the selected army to a minimap cell.
    MoveMinimap { x: u32, y: u32 },
    NoOp,
}

fn coords(name: &str, x: Option<i64>, y: Option<i64>, bound: (u32, u32)) -> Result<(u32, u32), ActionError> {
    let (Some(x), Some(y)) = (x, y) else {
        return Err(ActionError::MissingCoordinates(name.to_owned()));
    };
    let in_range = |v: i64, hi: u32| u32::try_from(v).ok().filter(|v| *v < hi);
    match (in_range(x, bound.0), in_range(y, bound.1)) {
        (Some(x), Some(y)) => Ok((x, y)),
        _ => Err(ActionError::OutOfRange { name: name.to_owned(), x, y }),
    }
}

impl PursuerAction {
    pub fn name(&self) -> &'static str {
        match self {
            PursuerAction::SelectArmy => "select_army",
            PursuerAction::MoveCamera { .. } => "move_camera",
            PursuerAction::AttackScreen { .. } => "attack_screen",
            PursuerAction::NoOp => "no_op",
        }
    }

    pub fn coords(&self) -> Option<(u32, u32)> {
        match *self {
            PursuerAction::MoveCamera { x, y } | PursuerAction::AttackScreen { x, y } => Some((x, y)),
            _ => None,
        }
    }

    /// Builds an action from its wire name and optional coordinates, checking
    /// coordinate ranges against the config.
    pub fn parse(name: &str, x: Option<i64>, y: Option<i64>, config: &EpisodeConfig) -> Result<Self, ActionError> {
        let minimap = (config.domain.width, config.domain.height);
        let screen = (config.camera_size, config.camera_size);
        match name {
            "select_army" => Ok(PursuerAction::SelectArmy),
            "no_op" => Ok(PursuerAction::NoOp),
            "move_camera" => coords(name, x, y, minimap).map(|(x, y)| PursuerAction::MoveCamera { x, y }),
            "attack_screen" => coords(name, x, y, screen).map(|(x, y)| PursuerAction::AttackScreen { x, y }),
            other => Err(ActionError::UnknownAction(other.to_owned())),
        }
    }
}

impl EvaderAction {
    pub fn name(&self) -> &'static str {
        match self {
            EvaderAction::SelectArmy => "select_army",
            EvaderAction::MoveMinimap { .. } => "move_minimap",
            EvaderAction::NoOp => "no_op",
        }
    }

    pub fn coords(&self) -> Option<(u32, u32)> {
        match *self {
            EvaderAction::MoveMinimap { x, y } => Some((x, y)),
            _ => None,
        }
    }

    pub fn parse(name: &str, x: Option<i64>, y: Option<i64>, config: &EpisodeConfig) -> Result<Self, ActionError> {
        let minimap = (config.domain.width, config.domain.height);
        match name {
            "select_army" => Ok(EvaderAction::SelectArmy),
            "no_op" => Ok(EvaderAction::NoOp),
            "move_minimap" => coords(name, x, y, minimap).map(|(x, y)| EvaderAction::MoveMinimap { x, y }),
            other => Err(ActionError::UnknownAction(other.to_owned())),
        }
    }
}

/// Fog mask, own units and visible enemy units, one integer grid each,
/// indexed `[row][column]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayers {
    pub fog: Vec<Vec<u8>>,
    pub own_units: Vec<Vec<u16>>,
    pub enemy_units: Vec<Vec<u16>>,
}

impl FeatureLayers {
    fn empty(width: u32, height: u32) -> Self {
        let (w, h) = (width as usize, height as usize);
        Self {
            fog: vec![vec![0; w]; h],
            own_units: vec![vec![0; w]; h],
            enemy_units: vec![vec![0; w]; h],
        }
    }

    pub fn width(&self) -> usize {
        self.fog.first().map_or(0, Vec::len)
    }

    pub fn height(&self) -> usize {
        self.fog.len()
    }

    fn cells(grid: &[Vec<u16>]) -> Vec<((u32, u32), u16)> {
        let mut out = Vec::new();
        for (y, row) in grid.iter().enumerate() {
            for (x, &n) in row.iter().enumerate() {
                if n > 0 {
                    out.push(((x as u32, y as u32), n));
                }
            }
        }
        out
    }

    /// Occupied own-unit cells with their unit counts, row-major.
    pub fn own_cells(&self) -> Vec<((u32, u32), u16)> {
        Self::cells(&self.own_units)
    }

    /// Occupied enemy cells with their unit counts, row-major.
    pub fn enemy_cells(&self) -> Vec<((u32, u32), u16)> {
        Self::cells(&self.enemy_units)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scalars {
    pub team: Team,
    pub clock: f64,
    pub kills: u64,
    pub own_alive: u32,
    pub camera: Camera,
    pub selected: bool,
}

/// What one team perceives at a decision step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub minimap: FeatureLayers,
    pub screen: FeatureLayers,
    pub scalars: Scalars,
    pub available_actions: Vec<String>,
}

impl Observation {
    /// Count-weighted mean of own-unit cell centres on the minimap.
    pub fn own_centroid(&self) -> Option<Vec2> {
        let cells = self.minimap.own_cells();
        let total: f64 = cells.iter().map(|(_, n)| f64::from(*n)).sum();
        if total == 0.0 {
            return None;
        }
        let (sx, sy) = cells.iter().fold((0.0, 0.0), |(sx, sy), (c, n)| {
            let p = GameDomain::cell_center(*c);
            (sx + p.x * f64::from(*n), sy + p.y * f64::from(*n))
        });
        Some(Vec2::new(sx / total, sy / total))
    }
}

/// Sets every cell whose centre lies within `sight` of `pos`. Each row is a
/// contiguous run, found analytically and then settled with the exact test.
fn mark_sight(fog: &mut [Vec<u8>], pos: Vec2, sight: f64) {
    let inside = |x: i64, y: usize| crate::world::distance(pos, GameDomain::cell_center((x as u32, y as u32))) <= sight;
    for y in 0..fog.len() {
        let dy = y as f64 + 0.5 - pos.y;
        if dy.abs() > sight + 1e-9 {
            continue;
        }
        let half = (sight * sight - dy * dy).max(0.0).sqrt();
        let mut lo = (pos.x - half - 0.5).ceil() as i64;
        let mut hi = (pos.x + half - 0.5).floor() as i64;
        let width = fog[y].len() as i64;
        lo = lo.clamp(0, width - 1);
        hi = hi.clamp(0, width - 1);
        while lo > 0 && inside(lo - 1, y) {
            lo -= 1;
        }
        while lo <= hi && !inside(lo, y) {
            lo += 1;
        }
        while hi + 1 < width && inside(hi + 1, y) {
            hi += 1;
        }
        while hi >= lo && !inside(hi, y) {
            hi -= 1;
        }
        for x in lo..=hi {
            fog[y][x as usize] = 1;
        }
    }
}

/// Renders one team's fog-filtered view of the world.
pub fn render_observation(world: &WorldState, team: Team, camera: Camera, selected: bool) -> Observation {
    let domain = world.domain;
    let mut minimap = FeatureLayers::empty(domain.width, domain.height);
    let own: Vec<_> = world.alive(team).collect();

    for unit in &own {
        mark_sight(&mut minimap.fog, unit.pos, unit.stats.sight);
    }
    for unit in &own {
        let (x, y) = domain.cell_of(unit.pos);
        minimap.own_units[y as usize][x as usize] += 1;
    }
    for id in visible_enemies(team, world) {
        let enemy = world.unit(id).expect("visible enemy exists");
        let (x, y) = domain.cell_of(enemy.pos);
        minimap.enemy_units[y as usize][x as usize] += 1;
    }

    let crop = |grid: &Vec<Vec<u8>>| -> Vec<Vec<u8>> {
        grid[camera.y as usize..(camera.y + camera.size) as usize]
            .iter()
            .map(|row| row[camera.x as usize..(camera.x + camera.size) as usize].to_vec())
            .collect()
    };
    let crop16 = |grid: &Vec<Vec<u16>>| -> Vec<Vec<u16>> {
        grid[camera.y as usize..(camera.y + camera.size) as usize]
            .iter()
            .map(|row| row[camera.x as usize..(camera.x + camera.size) as usize].to_vec())
            .collect()
    };
    let screen = FeatureLayers {
        fog: crop(&minimap.fog),
        own_units: crop16(&minimap.own_units),
        enemy_units: crop16(&minimap.enemy_units),
    };

    let mut available_actions = vec!["no_op".to_owned(), "select_army".to_owned()];
    match team {
        Team::Pursuer => {
            available_actions.push("move_camera".to_owned());
            if selected {
                available_actions.push("attack_screen".to_owned());
            }
        }
        Team::Evader => {
            if selected {
                available_actions.push("move_minimap".to_owned());
            }
        }
    }

    Observation {
        minimap,
        screen,
        scalars: Scalars {
            team,
            clock: world.clock,
            kills: world.kills,
            own_alive: own.len() as u32,
            camera,
            selected,
        },
        available_actions,
    }
}

/// Result of an episode's capture-time estimate `t_f / score`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CaptureTime {
    Seconds(f64),
    /// Nothing was captured; compares as +∞.
    NoCapture,
}

impl CaptureTime {
    pub fn as_f64(self) -> f64 {
        match self {
            CaptureTime::Seconds(s) => s,
            CaptureTime::NoCapture => f64::INFINITY,
        }
    }
}

impl PartialOrd for CaptureTime {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        self.as_f64().partial_cmp(&other.as_f64())
    }
}

impl std::fmt::Display for CaptureTime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CaptureTime::Seconds(s) => write!(f, "{s}"),
            CaptureTime::NoCapture => f.write_str("inf"),
        }
    }
}

/// Empirical expected capture time: elapsed time divided by captures.
pub fn empirical_capture_time(score: u64, t_f: f64) -> Result<CaptureTime, EpisodeError> {
    if !(t_f >= 0.0) {
        return Err(EpisodeError::NegativeTime(t_f));
    }
    Ok(if score == 0 {
        CaptureTime::NoCapture
    } else {
        CaptureTime::Seconds(t_f / score as f64)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub obs_pursuer: Observation,
    pub obs_evader: Observation,
    pub reward_pursuer: i64,
    pub reward_evader: i64,
    pub done: bool,
    pub episode_score: u64,
    /// The pursuer action needed a selection that did not exist.
    pub pursuer_action_ignored: bool,
    pub evader_action_ignored: bool,
    pub respawned: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct ControlState {
    camera: Camera,
    selected: bool,
}

/// One running mini-game.
#[derive(Debug, Clone)]
pub struct Episode {
    config: EpisodeConfig,
    world: WorldState,
    pursuer: ControlState,
    evader: ControlState,
    evader_reflexes: bool,
    ticks: u64,
    steps: u64,
    done: bool,
}

impl Episode {
    /// Starts an episode: pursuers stacked at the arena centre, evaders
    /// scattered uniformly by the seeded generator.
    pub fn reset(config: EpisodeConfig) -> Result<(Self, Observation, Observation), ConfigError> {
        config.validate()?;
        let mut world = WorldState::new(config.domain, config.seed);
        for _ in 0..config.n_pursuers {
            world.spawn(Team::Pursuer, config.pursuer_type.stats(), config.domain.center());
        }
        for _ in 0..config.n_evaders {
            world.spawn_uniform(Team::Evader, config.evader_type.stats());
        }
        Self::from_world(config, world)
    }

    /// Starts an episode from a hand-built world (scenario setups and tests).
    pub fn from_world(config: EpisodeConfig, world: WorldState) -> Result<(Self, Observation, Observation), ConfigError> {
        config.validate()?;
        if world.domain != config.domain {
            return Err(ConfigError::Invalid("world domain differs from config".into()));
        }
        let camera = Camera::centered(config.camera_size, &config.domain);
        let control = ControlState { camera, selected: false };
        let episode = Self {
            config,
            world,
            pursuer: control,
            evader: control,
            evader_reflexes: true,
            ticks: 0,
            steps: 0,
            done: false,
        };
        let (p, e) = episode.observations();
        Ok((episode, p, e))
    }

    /// Enables or disables built-in evader behaviour (zergling rush, drone flee).
    pub fn set_evader_reflexes(&mut self, enabled: bool) {
        self.evader_reflexes = enabled;
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.config
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn world_mut(&mut self) -> &mut WorldState {
        &mut self.world
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn score(&self) -> u64 {
        self.world.kills
    }

    pub fn observations(&self) -> (Observation, Observation) {
        (
            render_observation(&self.world, Team::Pursuer, self.pursuer.camera, self.pursuer.selected),
            render_observation(&self.world, Team::Evader, self.evader.camera, self.evader.selected),
        )
    }

    /// Returns true if the action was ignored for lack of a selection.
    fn apply_pursuer(&mut self, action: PursuerAction) -> bool {
        let domain = self.config.domain;
        match action {
            PursuerAction::NoOp => false,
            PursuerAction::SelectArmy => {
                self.pursuer.selected = self.world.alive_count(Team::Pursuer) > 0;
                false
            }
            PursuerAction::MoveCamera { x, y } => {
                if x >= domain.width || y >= domain.height {
                    return true;
                }
                self.pursuer.camera = Camera::centered_on((x, y), self.config.camera_size, &domain);
                false
            }
            PursuerAction::AttackScreen { x, y } => {
                let size = self.config.camera_size;
                if !self.pursuer.selected || x >= size || y >= size {
                    return true;
                }
                let target = GameDomain::cell_center(self.pursuer.camera.to_world((x, y)));
                for unit in self.world.units.iter_mut().filter(|u| u.alive && u.team == Team::Pursuer) {
                    unit.order = Order::AttackMove(target);
                    unit.order_source = OrderSource::Agent;
                }
                false
            }
        }
    }

    fn apply_evader(&mut self, action: EvaderAction) -> bool {
        let domain = self.config.domain;
        match action {
            EvaderAction::NoOp => false,
            EvaderAction::SelectArmy => {
                self.evader.selected = self.world.alive_count(Team::Evader) > 0;
                false
            }
            EvaderAction::MoveMinimap { x, y } => {
                if !self.evader.selected || x >= domain.width || y >= domain.height {
                    return true;
                }
                let target = GameDomain::cell_center((x, y));
                for unit in self.world.units.iter_mut().filter(|u| u.alive && u.team == Team::Evader) {
                    unit.order = Order::Move(target);
                    unit.order_source = OrderSource::Agent;
                }
                false
            }
        }
    }

    /// Built-in behaviour only drives evaders that are idle or already under
    /// reflex control; an explicit agent order is never overridden.
    fn apply_reflexes(&mut self) {
        if !self.evader_reflexes {
            return;
        }
        let orders = match self.config.map_id {
            MapId::FindAndDefeatZerglings => builtin_zergling_policy(&self.world),
            MapId::FindAndDefeatDrones => builtin_drone_policy(&self.world, self.config.tick, true),
        };
        for (id, order) in orders {
            let unit = self.world.unit_mut(id).expect("policy returns live ids");
            if unit.order_source == OrderSource::Reflex || unit.order == Order::Hold {
                unit.order = order;
                unit.order_source = if order == Order::Hold { OrderSource::Agent } else { OrderSource::Reflex };
            }
        }
    }

    fn respawn_evaders(&mut self) {
        self.world.prune_dead();
        let stats = self.config.evader_type.stats();
        for _ in 0..self.config.n_evaders {
            self.world.spawn_uniform(Team::Evader, stats);
        }
    }

    /// Advances one decision step: apply both actions, then simulate
    /// `decision_period` ticks of movement and combat.
    pub fn step(&mut self, act_p: PursuerAction, act_e: EvaderAction) -> Result<StepResult, EpisodeError> {
        if self.done {
            return Err(EpisodeError::Finished);
        }
        let pursuer_action_ignored = self.apply_pursuer(act_p);
        let evader_action_ignored = self.apply_evader(act_e);
        let kills_before = self.world.kills;
        let mut respawned = false;

        for _ in 0..self.config.decision_period {
            self.apply_reflexes();
            let report = self.world.tick(self.config.tick);
            self.ticks += 1;
            self.world.clock = self.ticks as f64 * self.config.tick;
            if report.evader_deaths > 0 && self.world.alive_count(Team::Evader) == 0 {
                self.respawn_evaders();
                respawned = true;
            }
        }
        self.steps += 1;

        if self.world.alive_count(Team::Pursuer) == 0 {
            self.pursuer.selected = false;
        }
        self.done = self.steps >= self.config.max_steps() || self.world.alive_count(Team::Pursuer) == 0;

        let reward = (self.world.kills - kills_before) as i64;
        let (obs_pursuer, obs_evader) = self.observations();
        Ok(StepResult {
            obs_pursuer,
            obs_evader,
            reward_pursuer: reward,
            reward_evader: -reward,
            done: self.done,
            episode_score: self.world.kills,
            pursuer_action_ignored,
            evader_action_ignored,
            respawned,
        })
    }

    /// FNV-1a digest over every unit's id, position, health and liveness.
    pub fn state_digest(&self) -> u64 {
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |bytes: &[u8]| {
            for b in bytes {
                hash ^= u64::from(*b);
                hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        feed(&self.world.clock.to_bits().to_le_bytes());
        for u in &self.world.units {
            feed(&u.id.to_le_bytes());
            feed(&u.pos.x.to_bits().to_le_bytes());
            feed(&u.pos.y.to_bits().to_le_bytes());
            feed(&u.health.to_bits().to_le_bytes());
            feed(&[u8::from(u.alive)]);
        }
        hash
    }
}

/// One line of an episode log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub step: u64,
    pub clock: f64,
    pub pursuer_action: PursuerAction,
    pub evader_action: EvaderAction,
    pub reward_pursuer: i64,
    pub score: u64,
    pub pursuers_alive: u32,
    pub evaders_alive: u32,
    pub done: bool,
    pub digest: String,
}

/// Step-by-step record of an episode, serialized as one JSON object per line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeLog {
    pub entries: Vec<LogEntry>,
}

impl EpisodeLog {
    pub fn record(&mut self, episode: &Episode, act_p: PursuerAction, act_e: EvaderAction, result: &StepResult) {
        let world = episode.world();
        self.entries.push(LogEntry {
            step: episode.steps(),
            clock: world.clock,
            pursuer_action: act_p,
            evader_action: act_e,
            reward_pursuer: result.reward_pursuer,
            score: result.episode_score,
            pursuers_alive: world.alive_count(Team::Pursuer) as u32,
            evaders_alive: world.alive_count(Team::Evader) as u32,
            done: result.done,
            digest: format!("{:016x}", episode.state_digest()),
        });
    }

    pub fn to_ndjson(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for entry in &self.entries {
            serde_json::to_writer(&mut out, entry).expect("log entry serializes");
            out.push(b'\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn drones() -> EpisodeConfig {
        EpisodeConfig::for_map(MapId::FindAndDefeatDrones)
    }

    #[test]
    fn row_runs_match_the_per_cell_sight_test() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut probes: Vec<(Vec2, f64)> = vec![(Vec2::new(0.5, 0.5), 9.0), (Vec2::new(32.0, 0.0), 8.0)];
        for _ in 0..300 {
            let pos = Vec2::new(rng.gen_range(0.0..=32.0), rng.gen_range(0.0..=32.0));
            probes.push((pos, rng.gen_range(0.1..12.0)));
        }
        for (pos, sight) in probes {
            let mut fast = vec![vec![0u8; 32]; 32];
            mark_sight(&mut fast, pos, sight);
            for (y, row) in fast.iter().enumerate() {
                for (x, cell) in row.iter().enumerate() {
                    let d = crate::world::distance(pos, GameDomain::cell_center((x as u32, y as u32)));
                    assert_eq!(*cell == 1, d <= sight, "{pos:?} sight {sight} cell ({x},{y})");
                }
            }
        }
    }

    #[test]
    fn action_space_examples() {
        let mut cfg = EpisodeConfig::default();
        assert_eq!(action_space_size(&cfg), 1028);
        cfg.domain = GameDomain::new(16, 16);
        assert_eq!(action_space_size(&cfg), 260);
        cfg.domain = GameDomain::new(1, 1);
        assert_eq!(action_space_size(&cfg), 5);
    }

    #[test]
    fn default_reset_counts() {
        let (ep, p, e) = Episode::reset(EpisodeConfig::default().with_seed(42)).unwrap();
        assert_eq!(ep.world().alive_count(Team::Evader), 25);
        assert_eq!(ep.world().alive_count(Team::Pursuer), 3);
        assert_eq!(p.scalars.camera, Camera { x: 8, y: 8, size: 16 });
        assert!(!p.scalars.selected && !e.scalars.selected);
        assert_eq!(ep.world().clock, 0.0);
        assert_eq!(ep.score(), 0);
    }

    #[test]
    fn reset_is_deterministic() {
        let (a, ..) = Episode::reset(EpisodeConfig::default().with_seed(42)).unwrap();
        let (b, ..) = Episode::reset(EpisodeConfig::default().with_seed(42)).unwrap();
        assert_eq!(a.state_digest(), b.state_digest());
        let (c, ..) = Episode::reset(EpisodeConfig::default().with_seed(43)).unwrap();
        assert_ne!(a.state_digest(), c.state_digest());
    }

    #[test]
    fn single_evader_setup() {
        let cfg = EpisodeConfig { n_evaders: 1, ..EpisodeConfig::default() };
        let (ep, ..) = Episode::reset(cfg).unwrap();
        assert_eq!(ep.world().alive_count(Team::Evader), 1);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let cfg = EpisodeConfig { decision_period: 0, ..EpisodeConfig::default() };
        assert!(Episode::reset(cfg).is_err());
        let cfg = EpisodeConfig { camera_size: 40, ..EpisodeConfig::default() };
        assert!(Episode::reset(cfg).is_err());
        let cfg = EpisodeConfig { t_final: 0.0, ..EpisodeConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = EpisodeConfig { n_evaders: 0, ..EpisodeConfig::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_json_uses_field_names_and_rejects_unknown_keys() {
        let cfg = EpisodeConfig::for_map(MapId::FindAndDefeatDrones).with_seed(9);
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains("\"map_id\":\"find_and_defeat_drones\""));
        assert!(text.contains("\"l_x\":32"));
        assert_eq!(EpisodeConfig::from_json(&text).unwrap(), cfg);

        let patched = EpisodeConfig::default()
            .with_overrides(&serde_json::json!({"map_id": "find_and_defeat_drones", "n_evaders": 5}))
            .unwrap();
        assert_eq!(patched.evader_type, UnitKind::Drone);
        assert_eq!(patched.n_evaders, 5);
        assert!(EpisodeConfig::default().with_overrides(&serde_json::json!({"bogus": 1})).is_err());
    }

    #[test]
    fn null_step_advances_the_clock_only() {
        let mut cfg = drones();
        cfg.n_evaders = 1;
        let mut world = WorldState::new(cfg.domain, 1);
        world.spawn(Team::Pursuer, UnitKind::VoidRay.stats(), Vec2::new(2.0, 2.0));
        world.spawn(Team::Evader, UnitKind::Drone.stats(), Vec2::new(30.0, 30.0));
        let (mut ep, ..) = Episode::from_world(cfg, world).unwrap();
        let r = ep.step(PursuerAction::NoOp, EvaderAction::NoOp).unwrap();
        assert_eq!((r.reward_pursuer, r.reward_evader), (0, 0));
        assert_eq!(ep.world().clock, 0.25);
        assert!(!r.done);
    }

    #[test]
    fn attack_screen_without_selection_is_ignored() {
        let (mut ep, ..) = Episode::reset(EpisodeConfig::default().with_seed(1)).unwrap();
        let r = ep.step(PursuerAction::AttackScreen { x: 3, y: 3 }, EvaderAction::NoOp).unwrap();
        assert!(r.pursuer_action_ignored);
        assert!(ep.world().alive(Team::Pursuer).all(|u| u.order == Order::Hold));

        let r = ep.step(PursuerAction::SelectArmy, EvaderAction::MoveMinimap { x: 1, y: 1 }).unwrap();
        assert!(!r.pursuer_action_ignored);
        assert!(r.evader_action_ignored);
        assert!(r.obs_pursuer.available_actions.contains(&"attack_screen".to_owned()));
        let r = ep.step(PursuerAction::AttackScreen { x: 3, y: 3 }, EvaderAction::NoOp).unwrap();
        assert!(!r.pursuer_action_ignored);
        let target = GameDomain::cell_center((11, 11));
        assert!(ep.world().alive(Team::Pursuer).all(|u| u.order == Order::AttackMove(target)));
    }

    #[test]
    fn attack_screen_kills_a_visible_evader() {
        let mut cfg = drones();
        cfg.n_evaders = 2;
        let mut world = WorldState::new(cfg.domain, 3);
        for _ in 0..3 {
            world.spawn(Team::Pursuer, UnitKind::VoidRay.stats(), Vec2::new(16.5, 16.5));
        }
        world.spawn(Team::Evader, UnitKind::Drone.stats(), Vec2::new(20.5, 16.5));
        world.spawn(Team::Evader, UnitKind::Drone.stats(), Vec2::new(2.0, 2.0));
        let (mut ep, ..) = Episode::from_world(cfg, world).unwrap();
        ep.set_evader_reflexes(false);
        ep.step(PursuerAction::SelectArmy, EvaderAction::NoOp).unwrap();
        // camera origin is (8,8); the drone sits in world cell (20,16)
        let mut total = 0;
        for _ in 0..8 {
            let r = ep.step(PursuerAction::AttackScreen { x: 12, y: 8 }, EvaderAction::NoOp).unwrap();
            assert_eq!(r.reward_evader, -r.reward_pursuer);
            total += r.reward_pursuer;
        }
        // 40 hp / (3 * 16.8 hp/s) = 0.79 s, well under 8 steps of 0.25 s
        assert_eq!(total, 1);
        assert_eq!(ep.score(), 1);
    }

    #[test]
    fn respawn_happens_only_when_the_last_evader_dies() {
        let mut cfg = drones();
        cfg.n_evaders = 2;
        let mut world = WorldState::new(cfg.domain, 3);
        for _ in 0..3 {
            world.spawn(Team::Pursuer, UnitKind::VoidRay.stats(), Vec2::new(16.5, 16.5));
        }
        world.spawn(Team::Evader, UnitKind::Drone.stats(), Vec2::new(17.0, 16.5));
        world.spawn(Team::Evader, UnitKind::Drone.stats(), Vec2::new(18.0, 16.5));
        let (mut ep, ..) = Episode::from_world(cfg, world).unwrap();
        ep.set_evader_reflexes(false);
        ep.step(PursuerAction::SelectArmy, EvaderAction::NoOp).unwrap();
        let mut respawns = 0;
        for _ in 0..12 {
            let r = ep.step(PursuerAction::AttackScreen { x: 8, y: 8 }, EvaderAction::NoOp).unwrap();
            let alive = ep.world().alive_count(Team::Evader) as u64;
            assert_eq!(ep.world().kills + alive, ep.world().evaders_spawned);
            if r.respawned {
                respawns += 1;
                assert_eq!(alive, 2);
                assert_eq!(ep.score(), 2);
                break;
            }
            assert!(alive >= 1);
        }
        assert_eq!(respawns, 1);
    }

    #[test]
    fn full_episode_has_720_steps() {
        let mut cfg = drones().with_seed(5);
        assert_eq!(cfg.max_steps(), 720);
        cfg.n_evaders = 1;
        let (mut ep, ..) = Episode::reset(cfg).unwrap();
        let mut steps = 0;
        loop {
            steps += 1;
            if ep.step(PursuerAction::NoOp, EvaderAction::NoOp).unwrap().done {
                break;
            }
        }
        assert_eq!(steps, 720);
        assert_eq!(ep.world().clock, 180.0);
        assert!(matches!(ep.step(PursuerAction::NoOp, EvaderAction::NoOp), Err(EpisodeError::Finished)));
    }

    #[test]
    fn render_hides_far_evaders() {
        let cfg = drones();
        let mut world = WorldState::new(cfg.domain, 3);
        for _ in 0..3 {
            world.spawn(Team::Pursuer, UnitKind::VoidRay.stats(), Vec2::new(10.0, 10.0));
        }
        world.spawn(Team::Evader, UnitKind::Drone.stats(), Vec2::new(22.0, 10.0));
        let obs = render_observation(&world, Team::Pursuer, Camera::centered(16, &cfg.domain), false);
        assert!(obs.minimap.enemy_cells().is_empty());
        let own = obs.minimap.own_cells();
        assert_eq!(own.iter().map(|(_, n)| u32::from(*n)).sum::<u32>(), 3);
        assert_eq!(own.len(), 1);

        // the drone sees nothing either: 12 > 8
        let obs = render_observation(&world, Team::Evader, Camera::centered(16, &cfg.domain), false);
        assert!(obs.minimap.enemy_cells().is_empty());
    }

    #[test]
    fn screen_window_crops_the_camera() {
        let cfg = drones();
        let mut world = WorldState::new(cfg.domain, 3);
        world.spawn(Team::Pursuer, UnitKind::VoidRay.stats(), Vec2::new(8.2, 8.2));
        world.spawn(Team::Pursuer, UnitKind::VoidRay.stats(), Vec2::new(23.9, 23.9));
        world.spawn(Team::Pursuer, UnitKind::VoidRay.stats(), Vec2::new(24.1, 24.1));
        let camera = Camera { x: 8, y: 8, size: 16 };
        let obs = render_observation(&world, Team::Pursuer, camera, true);
        assert_eq!((obs.screen.width(), obs.screen.height()), (16, 16));
        assert_eq!(obs.screen.own_units[0][0], 1);
        assert_eq!(obs.screen.own_units[15][15], 1);
        assert_eq!(obs.screen.own_cells().len(), 2);
        assert_eq!(obs.minimap.own_cells().len(), 3);
    }

    #[test]
    fn camera_clamps_to_the_arena() {
        let d = GameDomain::default();
        assert_eq!(Camera::centered_on((0, 0), 16, &d), Camera { x: 0, y: 0, size: 16 });
        assert_eq!(Camera::centered_on((31, 31), 16, &d), Camera { x: 16, y: 16, size: 16 });
        assert_eq!(Camera::centered_on((20, 5), 16, &d), Camera { x: 12, y: 0, size: 16 });
        assert!(Camera::centered_on((20, 5), 16, &d).contains((20, 5)));
    }

    #[test]
    fn capture_time_examples() {
        assert_eq!(empirical_capture_time(45, 180.0).unwrap(), CaptureTime::Seconds(4.0));
        assert_eq!(empirical_capture_time(0, 180.0).unwrap(), CaptureTime::NoCapture);
        let v = empirical_capture_time(70, 180.0).unwrap().as_f64();
        assert!((v - 2.571_428).abs() < 1e-5);
        assert!(CaptureTime::NoCapture > CaptureTime::Seconds(1e300));
        assert!(empirical_capture_time(3, -1.0).is_err());
    }

    #[test]
    fn action_parsing_checks_ranges() {
        let cfg = EpisodeConfig::default();
        assert_eq!(
            PursuerAction::parse("attack_screen", Some(15), Some(0), &cfg).unwrap(),
            PursuerAction::AttackScreen { x: 15, y: 0 }
        );
        assert!(PursuerAction::parse("attack_screen", Some(16), Some(0), &cfg).is_err());
        assert!(PursuerAction::parse("attack_screen", None, None, &cfg).is_err());
        assert!(PursuerAction::parse("move_camera", Some(31), Some(-1), &cfg).is_err());
        assert!(EvaderAction::parse("move_minimap", Some(31), Some(31), &cfg).is_ok());
        assert!(EvaderAction::parse("attack_screen", Some(1), Some(1), &cfg).is_err());
    }
}
