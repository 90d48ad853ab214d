//! Arena physics: geometry, unit state, fog-of-war visibility, kinematics
//! and combat resolution.
//!
//! Positions are continuous and measured in map cells. The origin is the
//! top-left corner of the arena, `x` grows to the right and `y` grows down.

use std::collections::BTreeSet;
use std::ops::{Add, Mul, Sub};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A point or displacement on the arena plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn length(self) -> f64 {
        (self.x * self.x + self.y * self.y).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Unit vector in the same direction, or `None` for the zero vector.
    pub fn normalized(self) -> Option<Vec2> {
        let len = self.length();
        (len > 0.0).then(|| Vec2::new(self.x / len, self.y / len))
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

/// Euclidean distance in map cells.
pub fn distance(p: Vec2, q: Vec2) -> f64 {
    (p - q).length()
}

/// Rectangular arena measured in whole cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameDomain {
    #[serde(rename = "l_x")]
    pub width: u32,
    #[serde(rename = "l_y")]
    pub height: u32,
}

impl GameDomain {
    pub const fn new(width: u32, height: u32) -> Self {
        Self { width, height }
    }

    pub fn area(&self) -> f64 {
        f64::from(self.width) * f64::from(self.height)
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(f64::from(self.width) / 2.0, f64::from(self.height) / 2.0)
    }

    pub fn contains(&self, p: Vec2) -> bool {
        (0.0..=f64::from(self.width)).contains(&p.x) && (0.0..=f64::from(self.height)).contains(&p.y)
    }

    pub fn clamp(&self, p: Vec2) -> Vec2 {
        Vec2::new(
            p.x.clamp(0.0, f64::from(self.width)),
            p.y.clamp(0.0, f64::from(self.height)),
        )
    }

    /// The grid cell containing `p`; points on the far edges map to the last cell.
    pub fn cell_of(&self, p: Vec2) -> (u32, u32) {
        let cx = (p.x.floor().max(0.0) as u32).min(self.width - 1);
        let cy = (p.y.floor().max(0.0) as u32).min(self.height - 1);
        (cx, cy)
    }

    pub fn cell_center(cell: (u32, u32)) -> Vec2 {
        Vec2::new(f64::from(cell.0) + 0.5, f64::from(cell.1) + 0.5)
    }
}

impl Default for GameDomain {
    fn default() -> Self {
        Self::new(32, 32)
    }
}

/// Longest straight line that fits inside the arena (its diagonal).
pub fn longest_internal_distance(domain: &GameDomain) -> f64 {
    let (w, h) = (f64::from(domain.width), f64::from(domain.height));
    (w * w + h * h).sqrt()
}

/// Shipped unit types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitKind {
    Marine,
    Zergling,
    Drone,
    VoidRay,
}

impl UnitKind {
    pub const ALL: [UnitKind; 4] = [Self::Marine, Self::Zergling, Self::Drone, Self::VoidRay];

    pub fn stats(self) -> UnitStats {
        let (health_max, sight, attack_range, speed, dps) = match self {
            UnitKind::Marine => (45.0, 9.0, 5.0, 3.15, 9.8),
            UnitKind::Zergling => (35.0, 8.0, 0.1, 4.13, 10.0),
            UnitKind::Drone => (40.0, 8.0, 0.1, 3.94, 4.67),
            UnitKind::VoidRay => (150.0, 10.0, 6.0, 3.85, 16.8),
        };
        UnitStats { kind: self, health_max, sight, attack_range, speed, dps }
    }

    pub fn name(self) -> &'static str {
        match self {
            UnitKind::Marine => "marine",
            UnitKind::Zergling => "zergling",
            UnitKind::Drone => "drone",
            UnitKind::VoidRay => "void_ray",
        }
    }
}

/// Combat parameters of a unit type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitStats {
    pub kind: UnitKind,
    pub health_max: f64,
    pub sight: f64,
    pub attack_range: f64,
    /// cells per second
    pub speed: f64,
    /// hit points per second
    pub dps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Team {
    Pursuer,
    Evader,
}

impl Team {
    pub fn opponent(self) -> Team {
        match self {
            Team::Pursuer => Team::Evader,
            Team::Evader => Team::Pursuer,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Order {
    #[default]
    Hold,
    Move(Vec2),
    /// Move toward the point, stopping to fire whenever an enemy is in range.
    AttackMove(Vec2),
}

impl Order {
    pub fn waypoint(&self) -> Option<Vec2> {
        match *self {
            Order::Hold => None,
            Order::Move(p) | Order::AttackMove(p) => Some(p),
        }
    }
}

/// Who gave a unit its current order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OrderSource {
    #[default]
    Agent,
    /// Built-in unit behaviour.
    Reflex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Unit {
    pub id: u32,
    pub team: Team,
    pub stats: UnitStats,
    pub pos: Vec2,
    pub health: f64,
    pub alive: bool,
    pub order: Order,
    pub order_source: OrderSource,
}

/// A single unit's contribution to combat during one tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DamageEvent {
    pub attacker: u32,
    pub target: u32,
    pub amount: f64,
}

/// Outcome of [`resolve_combat`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CombatReport {
    pub events: Vec<DamageEvent>,
    /// Units that died this tick, in id order.
    pub deaths: Vec<u32>,
    pub evader_deaths: u64,
}

/// Complete simulation state. Units are kept sorted by id.
#[derive(Debug, Clone)]
pub struct WorldState {
    pub domain: GameDomain,
    pub units: Vec<Unit>,
    pub clock: f64,
    pub rng: ChaCha8Rng,
    /// Cumulative defeated-evader count.
    pub kills: u64,
    pub evaders_spawned: u64,
    next_id: u32,
}

impl WorldState {
    pub fn new(domain: GameDomain, seed: u64) -> Self {
        Self {
            domain,
            units: Vec::new(),
            clock: 0.0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            kills: 0,
            evaders_spawned: 0,
            next_id: 0,
        }
    }

    /// Adds a unit at `pos` (clamped into the arena) and returns its id.
    pub fn spawn(&mut self, team: Team, stats: UnitStats, pos: Vec2) -> u32 {
        let id = self.next_id;
        self.next_id += 1;
        if team == Team::Evader {
            self.evaders_spawned += 1;
        }
        self.units.push(Unit {
            id,
            team,
            stats,
            pos: self.domain.clamp(pos),
            health: stats.health_max,
            alive: true,
            order: Order::Hold,
            order_source: OrderSource::Agent,
        });
        id
    }

    /// Adds a unit at a uniformly random position drawn from the world generator.
    pub fn spawn_uniform(&mut self, team: Team, stats: UnitStats) -> u32 {
        let x = self.rng.gen::<f64>() * f64::from(self.domain.width);
        let y = self.rng.gen::<f64>() * f64::from(self.domain.height);
        self.spawn(team, stats, Vec2::new(x, y))
    }

    pub fn unit(&self, id: u32) -> Option<&Unit> {
        self.units
            .binary_search_by_key(&id, |u| u.id)
            .ok()
            .map(|i| &self.units[i])
    }

    pub fn unit_mut(&mut self, id: u32) -> Option<&mut Unit> {
        self.units
            .binary_search_by_key(&id, |u| u.id)
            .ok()
            .map(move |i| &mut self.units[i])
    }

    pub fn alive(&self, team: Team) -> impl Iterator<Item = &Unit> + '_ {
        self.units.iter().filter(move |u| u.alive && u.team == team)
    }

    pub fn alive_count(&self, team: Team) -> usize {
        self.alive(team).count()
    }

    /// Drops dead units from the roster. Counters are unaffected.
    pub fn prune_dead(&mut self) {
        self.units.retain(|u| u.alive);
    }

    /// One fixed-length tick: movement, then simultaneous combat.
    ///
    /// Attack-moving units with an enemy already in range stand still and fire.
    pub fn tick(&mut self, dt: f64) -> CombatReport {
        let visible_to_pursuers = visible_enemies(Team::Pursuer, self);
        let visible_to_evaders = visible_enemies(Team::Evader, self);
        let engaged: Vec<bool> = self
            .units
            .iter()
            .map(|u| {
                let visible = match u.team {
                    Team::Pursuer => &visible_to_pursuers,
                    Team::Evader => &visible_to_evaders,
                };
                u.alive
                    && matches!(u.order, Order::AttackMove(_))
                    && nearest_target(self, u, visible).is_some()
            })
            .collect();

        let domain = self.domain;
        for (unit, engaged) in self.units.iter_mut().zip(engaged) {
            if !unit.alive || engaged {
                continue;
            }
            unit.pos = advance_unit(unit, dt, &domain);
            if let Order::Move(w) = unit.order {
                if unit.pos == domain.clamp(w) {
                    unit.order = Order::Hold;
                }
            }
        }

        let report = resolve_combat(self, dt);
        self.clock += dt;
        report
    }
}

/// Ids of alive enemies of `team` that lie within sight of at least one alive
/// member of `team`.
pub fn visible_enemies(team: Team, world: &WorldState) -> BTreeSet<u32> {
    let observers: Vec<&Unit> = world.alive(team).collect();
    world
        .alive(team.opponent())
        .filter(|e| observers.iter().any(|o| distance(o.pos, e.pos) <= o.stats.sight))
        .map(|e| e.id)
        .collect()
}

fn nearest_target(world: &WorldState, unit: &Unit, visible: &BTreeSet<u32>) -> Option<u32> {
    let mut best: Option<(f64, u32)> = None;
    for enemy in world.alive(unit.team.opponent()) {
        if !visible.contains(&enemy.id) {
            continue;
        }
        let d = distance(unit.pos, enemy.pos);
        if d > unit.stats.attack_range {
            continue;
        }
        // units are iterated in id order, so strict < keeps the lowest id on ties
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, enemy.id));
        }
    }
    best.map(|(_, id)| id)
}

/// Position of `unit` after moving for `dt` seconds under its current order.
pub fn advance_unit(unit: &Unit, dt: f64, domain: &GameDomain) -> Vec2 {
    let Some(waypoint) = unit.order.waypoint() else {
        return unit.pos;
    };
    let delta = waypoint - unit.pos;
    let step = unit.stats.speed * dt;
    let next = match delta.normalized() {
        Some(dir) if delta.length() > step => unit.pos + dir * step,
        _ => waypoint,
    };
    domain.clamp(next)
}

/// Applies one tick of continuous-rate damage.
///
/// Every alive attack-moving unit hits its nearest visible enemy in range
/// (lowest id on ties). Damage is computed from the state before any of it is
/// applied, so evaluation order does not matter.
pub fn resolve_combat(world: &mut WorldState, dt: f64) -> CombatReport {
    let visible_to_pursuers = visible_enemies(Team::Pursuer, world);
    let visible_to_evaders = visible_enemies(Team::Evader, world);

    let mut events = Vec::new();
    for unit in world.units.iter().filter(|u| u.alive) {
        if !matches!(unit.order, Order::AttackMove(_)) {
            continue;
        }
        let visible = match unit.team {
            Team::Pursuer => &visible_to_pursuers,
            Team::Evader => &visible_to_evaders,
        };
        if let Some(target) = nearest_target(world, unit, visible) {
            events.push(DamageEvent { attacker: unit.id, target, amount: unit.stats.dps * dt });
        }
    }

    let mut report = CombatReport::default();
    for event in &events {
        if let Some(target) = world.unit_mut(event.target) {
            target.health -= event.amount;
        }
    }
    for unit in world.units.iter_mut() {
        if unit.alive && unit.health <= 0.0 {
            unit.health = 0.0;
            unit.alive = false;
            unit.order = Order::Hold;
            report.deaths.push(unit.id);
            if unit.team == Team::Evader {
                report.evader_deaths += 1;
            }
        }
    }
    world.kills += report.evader_deaths;
    report.events = events;
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn world_32() -> WorldState {
        WorldState::new(GameDomain::default(), 7)
    }

    #[test]
    fn distance_examples() {
        assert_eq!(distance(Vec2::new(0.0, 0.0), Vec2::new(3.0, 4.0)), 5.0);
        assert_eq!(distance(Vec2::new(7.0, 7.0), Vec2::new(7.0, 7.0)), 0.0);
        let diag = distance(Vec2::ZERO, Vec2::new(32.0, 32.0));
        assert!((diag - 45.254_834).abs() < 1e-6);
    }

    #[test]
    fn longest_distance_examples() {
        assert!((longest_internal_distance(&GameDomain::new(32, 32)) - 32.0 * 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(longest_internal_distance(&GameDomain::new(3, 4)), 5.0);
    }

    #[test]
    fn shipped_units_see_at_least_as_far_as_they_shoot() {
        for kind in UnitKind::ALL {
            let s = kind.stats();
            assert!(s.sight >= s.attack_range, "{kind:?}");
            assert!(s.health_max > 0.0 && s.speed > 0.0 && s.dps > 0.0);
        }
    }

    #[test]
    fn visibility_radius_is_inclusive() {
        let mut w = world_32();
        w.spawn(Team::Pursuer, UnitKind::Marine.stats(), Vec2::new(0.0, 0.0));
        let z = w.spawn(Team::Evader, UnitKind::Zergling.stats(), Vec2::new(0.0, 8.0));
        assert_eq!(visible_enemies(Team::Pursuer, &w), BTreeSet::from([z]));

        w.unit_mut(z).unwrap().pos = Vec2::new(0.0, 9.01);
        assert!(visible_enemies(Team::Pursuer, &w).is_empty());
    }

    #[test]
    fn no_observers_means_no_visibility() {
        let mut w = world_32();
        let m = w.spawn(Team::Pursuer, UnitKind::Marine.stats(), Vec2::new(0.0, 0.0));
        w.spawn(Team::Evader, UnitKind::Zergling.stats(), Vec2::new(0.0, 1.0));
        w.unit_mut(m).unwrap().alive = false;
        assert!(visible_enemies(Team::Pursuer, &w).is_empty());
    }

    #[test]
    fn advance_examples() {
        let mut w = world_32();
        let id = w.spawn(Team::Pursuer, UnitKind::Marine.stats(), Vec2::ZERO);
        let u = w.unit_mut(id).unwrap();
        u.order = Order::Move(Vec2::new(10.0, 0.0));
        assert_eq!(advance_unit(u, 1.0, &GameDomain::default()), Vec2::new(3.15, 0.0));

        u.pos = Vec2::new(4.0, 4.0);
        u.order = Order::Move(Vec2::new(4.0, 4.0));
        assert_eq!(advance_unit(u, 1.0, &GameDomain::default()), Vec2::new(4.0, 4.0));

        u.order = Order::Hold;
        assert_eq!(advance_unit(u, 1.0, &GameDomain::default()), Vec2::new(4.0, 4.0));

        u.pos = Vec2::new(1.0, 0.0);
        u.stats.speed = 4.0;
        u.order = Order::Move(Vec2::new(-5.0, 0.0));
        assert_eq!(advance_unit(u, 1.0, &GameDomain::default()), Vec2::new(0.0, 0.0));
    }

    #[test]
    fn focused_fire_on_a_zergling() {
        let mut w = world_32();
        for _ in 0..3 {
            let id = w.spawn(Team::Pursuer, UnitKind::Marine.stats(), Vec2::new(10.0, 10.0));
            w.unit_mut(id).unwrap().order = Order::AttackMove(Vec2::new(10.0, 10.0));
        }
        let z = w.spawn(Team::Evader, UnitKind::Zergling.stats(), Vec2::new(10.0, 13.0));
        let report = resolve_combat(&mut w, 1.0);
        assert_eq!(report.events.len(), 3);
        assert!((w.unit(z).unwrap().health - (35.0 - 3.0 * 9.8)).abs() < 1e-9);
        assert!(report.deaths.is_empty());

        let time_to_kill: f64 = 35.0 / (3.0 * 9.8);
        assert!((time_to_kill - 1.190_476).abs() < 1e-6);
        resolve_combat(&mut w, 1.0);
        assert!(!w.unit(z).unwrap().alive);
        assert_eq!(w.kills, 1);
    }

    #[test]
    fn out_of_range_targets_take_no_damage() {
        let mut w = world_32();
        let m = w.spawn(Team::Pursuer, UnitKind::Marine.stats(), Vec2::new(10.0, 10.0));
        w.unit_mut(m).unwrap().order = Order::AttackMove(Vec2::new(10.0, 10.0));
        w.spawn(Team::Evader, UnitKind::Zergling.stats(), Vec2::new(15.1, 10.0));
        assert!(resolve_combat(&mut w, 1.0).events.is_empty());
    }

    #[test]
    fn held_units_do_not_fire() {
        let mut w = world_32();
        w.spawn(Team::Pursuer, UnitKind::Marine.stats(), Vec2::new(10.0, 10.0));
        w.spawn(Team::Evader, UnitKind::Zergling.stats(), Vec2::new(11.0, 10.0));
        assert!(resolve_combat(&mut w, 1.0).events.is_empty());
    }

    #[test]
    fn nearest_target_ties_go_to_lowest_id() {
        let mut w = world_32();
        let m = w.spawn(Team::Pursuer, UnitKind::Marine.stats(), Vec2::new(10.0, 10.0));
        w.unit_mut(m).unwrap().order = Order::AttackMove(Vec2::new(10.0, 10.0));
        let a = w.spawn(Team::Evader, UnitKind::Zergling.stats(), Vec2::new(12.0, 10.0));
        w.spawn(Team::Evader, UnitKind::Zergling.stats(), Vec2::new(8.0, 10.0));
        let report = resolve_combat(&mut w, 0.5);
        assert_eq!(report.events[0].target, a);
    }

    #[test]
    fn engaged_attack_movers_stand_still() {
        let mut w = world_32();
        let m = w.spawn(Team::Pursuer, UnitKind::Marine.stats(), Vec2::new(10.0, 10.0));
        w.unit_mut(m).unwrap().order = Order::AttackMove(Vec2::new(30.0, 10.0));
        w.spawn(Team::Evader, UnitKind::Drone.stats(), Vec2::new(10.0, 14.0));
        w.tick(0.125);
        assert_eq!(w.unit(m).unwrap().pos, Vec2::new(10.0, 10.0));
    }

    #[test]
    fn move_orders_complete_into_hold() {
        let mut w = world_32();
        let m = w.spawn(Team::Pursuer, UnitKind::Marine.stats(), Vec2::new(10.0, 10.0));
        w.unit_mut(m).unwrap().order = Order::Move(Vec2::new(10.2, 10.0));
        w.tick(0.125);
        let u = w.unit(m).unwrap();
        assert_eq!(u.pos, Vec2::new(10.2, 10.0));
        assert_eq!(u.order, Order::Hold);
    }
}
