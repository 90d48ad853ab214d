//! Closed-form capture-time predictions for block-by-block search of the arena
//! and the expected score they imply, plus Monte Carlo oracles that check them.
//!
//! The arena is tiled by `a × c` blocks; a searcher clears one block per round
//! and a hidden evader sits in a uniformly random block, so each round
//! succeeds with probability `p = N/M` and the expected number of rounds is
//! `1/p`.

use rand::seq::index::sample;
use rand::Rng;
use serde::Serialize;

use crate::episode::MapId;
use crate::error::TheoryError;
use crate::world::{longest_internal_distance, GameDomain};

/// 99% two-sided standard-normal quantile.
const Z_99: f64 = 2.575_829_303_548_901;

/// Block decomposition of the arena.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchGridSpec {
    /// Block width along x (`a`).
    pub block_width: f64,
    /// Lane height along y (`c`).
    pub lane_height: f64,
    /// Height of the last, possibly partial, lane (`c̄ ≤ c`).
    pub residual: f64,
}

impl SearchGridSpec {
    pub fn new(domain: &GameDomain, block_width: f64, lane_height: f64) -> Result<Self, TheoryError> {
        let (w, h) = (f64::from(domain.width), f64::from(domain.height));
        if !(block_width > 0.0 && block_width <= w) {
            return Err(TheoryError::InvalidGrid(format!("block width {block_width} outside (0, {w}]")));
        }
        if !(lane_height > 0.0) {
            return Err(TheoryError::InvalidGrid(format!("lane height {lane_height} must be positive")));
        }
        let lanes = (h / lane_height).ceil();
        let residual = h - (lanes - 1.0) * lane_height;
        Ok(Self { block_width, lane_height, residual })
    }

    /// Whole-width blocks and lanes twice the attack range tall.
    pub fn for_attack_range(domain: &GameDomain, attack_range: f64) -> Result<Self, TheoryError> {
        Self::new(domain, f64::from(domain.width), 2.0 * attack_range)
    }
}

/// How the longest internal distance `R` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Diagonal {
    /// `√(l_x² + l_y²)`.
    #[default]
    Exact,
    /// `1.4 · l_x`, the hand-rounded square-arena value.
    Rounded,
}

impl Diagonal {
    pub fn length(self, domain: &GameDomain) -> f64 {
        match self {
            Diagonal::Exact => longest_internal_distance(domain),
            Diagonal::Rounded => 1.4 * f64::from(domain.width),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoryInputs {
    pub domain: GameDomain,
    pub attack_range: f64,
    pub speed: f64,
    pub n_evaders: u64,
    pub n_pursuers: u64,
    pub evader_health: f64,
    /// Damage per second of one pursuer.
    pub dps: f64,
    pub t_final: f64,
    /// Charge every search round the trip across the arena (mobile evaders).
    pub use_diagonal: bool,
    pub diagonal: Diagonal,
}

impl TheoryInputs {
    /// Default-episode parameters for a map, with the diagonal term dropped.
    pub fn for_map(map: MapId) -> Self {
        let (pursuer, evader) = map.units();
        let (p, e) = (pursuer.stats(), evader.stats());
        Self {
            domain: GameDomain::default(),
            attack_range: p.attack_range,
            speed: p.speed,
            n_evaders: 25,
            n_pursuers: 3,
            evader_health: e.health_max,
            dps: p.dps,
            t_final: 180.0,
            use_diagonal: false,
            diagonal: Diagonal::Exact,
        }
    }

    pub fn with_diagonal(mut self, diagonal: Diagonal) -> Self {
        self.use_diagonal = true;
        self.diagonal = diagonal;
        self
    }

    pub fn validate(&self) -> Result<(), TheoryError> {
        let positive = [
            ("attack_range", self.attack_range),
            ("speed", self.speed),
            ("evader_health", self.evader_health),
            ("dps", self.dps),
            ("t_final", self.t_final),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(TheoryError::InvalidInput(format!("{name} must be positive, got {value}")));
            }
        }
        if self.n_evaders == 0 || self.n_pursuers == 0 {
            return Err(TheoryError::InvalidInput("unit counts must be positive".into()));
        }
        if self.domain.width == 0 || self.domain.height == 0 {
            return Err(TheoryError::InvalidInput("domain must be non-empty".into()));
        }
        if self.attack_range > f64::from(self.domain.width.min(self.domain.height)) {
            return Err(TheoryError::InvalidInput("attack range exceeds the domain".into()));
        }
        Ok(())
    }

    /// Time to kill every evader with all of them already in range.
    pub fn kill_time(&self) -> f64 {
        self.n_evaders as f64 * self.evader_health / (self.n_pursuers as f64 * self.dps)
    }

    fn diagonal_term(&self) -> f64 {
        if self.use_diagonal {
            self.diagonal.length(&self.domain)
        } else {
            0.0
        }
    }
}

/// Everything the closed forms predict for one parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoryReport {
    pub blocks: u64,
    pub capture_probability: f64,
    /// Seconds per search round.
    pub round_time: f64,
    pub capture_time: f64,
    pub kill_time: f64,
    pub reward: f64,
}

/// Number of blocks `M = (l_x/a)·⌈l_y/c⌉`.
pub fn block_count(spec: &SearchGridSpec, domain: &GameDomain) -> Result<u64, TheoryError> {
    let columns = f64::from(domain.width) / spec.block_width;
    if (columns - columns.round()).abs() > 1e-9 {
        return Err(TheoryError::NonIntegralBlocks(columns));
    }
    let lanes = (f64::from(domain.height) / spec.lane_height).ceil();
    Ok((columns.round() * lanes) as u64)
}

/// Chance that one search round finds one of `evaders` evaders hidden in
/// distinct blocks among `blocks`.
pub fn capture_probability(blocks: u64, evaders: u64) -> Result<f64, TheoryError> {
    if blocks == 0 || evaders == 0 {
        return Err(TheoryError::InvalidGrid("need at least one block and one evader".into()));
    }
    if evaders > blocks {
        return Err(TheoryError::TooManyEvaders { evaders, blocks });
    }
    Ok((evaders as f64 / blocks as f64).min(1.0))
}

/// Probability that `rounds` consecutive rounds all miss.
pub fn survival_probability(p: f64, rounds: u32) -> f64 {
    (1.0 - p).powi(rounds as i32)
}

/// Seconds per search round: optional diagonal trip, one block across and one lane down.
pub fn round_time(inputs: &TheoryInputs, spec: &SearchGridSpec) -> f64 {
    (inputs.diagonal_term() + spec.block_width + spec.lane_height) / inputs.speed
}

/// Expected time to capture a single evader.
pub fn expected_capture_time(inputs: &TheoryInputs, spec: &SearchGridSpec) -> Result<f64, TheoryError> {
    expected_capture_time_multi(inputs, spec, 1)
}

/// Expected capture time against `evaders` independent evaders: each round is
/// `evaders` times likelier to succeed but must be repeated per evader, so
/// the result does not depend on `evaders`.
pub fn expected_capture_time_multi(
    inputs: &TheoryInputs,
    spec: &SearchGridSpec,
    evaders: u64,
) -> Result<f64, TheoryError> {
    inputs.validate()?;
    let blocks = block_count(spec, &inputs.domain)?;
    let p = capture_probability(blocks, evaders)?;
    Ok(evaders as f64 * round_time(inputs, spec) / p)
}

/// Expected score: search rounds that fit in the time left after killing,
/// times evaders per wave.
pub fn reward_estimate(inputs: &TheoryInputs, capture_time: f64) -> Result<f64, TheoryError> {
    if !(capture_time > 0.0) {
        return Err(TheoryError::InvalidInput(format!("capture time must be positive, got {capture_time}")));
    }
    let kill_time = inputs.kill_time();
    if kill_time >= inputs.t_final {
        return Err(TheoryError::KillTimeExceedsEpisode { kill_time, t_final: inputs.t_final });
    }
    Ok((inputs.t_final - kill_time) / capture_time * inputs.n_evaders as f64)
}

pub fn theory_report(inputs: &TheoryInputs, spec: &SearchGridSpec) -> Result<TheoryReport, TheoryError> {
    inputs.validate()?;
    let blocks = block_count(spec, &inputs.domain)?;
    let capture_probability = capture_probability(blocks, 1)?;
    let capture_time = expected_capture_time(inputs, spec)?;
    Ok(TheoryReport {
        blocks,
        capture_probability,
        round_time: round_time(inputs, spec),
        capture_time,
        kill_time: inputs.kill_time(),
        reward: reward_estimate(inputs, capture_time)?,
    })
}

/// Sample mean of a Monte Carlo estimate with its 99% normal half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleEstimate {
    pub mean: f64,
    pub half_width: f64,
    pub trials: u64,
}

impl OracleEstimate {
    fn from_samples(samples: impl Iterator<Item = f64>) -> Self {
        let (mut n, mut mean, mut m2) = (0u64, 0.0f64, 0.0f64);
        for x in samples {
            n += 1;
            let delta = x - mean;
            mean += delta / n as f64;
            m2 += delta * (x - mean);
        }
        let variance = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
        Self { mean, half_width: Z_99 * (variance / n as f64).sqrt(), trials: n }
    }

    /// Relative deviation of the mean from `expected`.
    pub fn relative_error(&self, expected: f64) -> f64 {
        (self.mean - expected).abs() / expected.abs()
    }

    /// Weighted combination of independently seeded shards.
    pub fn combine(shards: &[OracleEstimate]) -> Self {
        let trials: u64 = shards.iter().map(|s| s.trials).sum();
        let n = trials as f64;
        let mean = shards.iter().map(|s| s.mean * s.trials as f64).sum::<f64>() / n;
        // half-widths scale as 1/√n, so shard variances of the mean add with weight (n_i/n)²
        let var_of_mean: f64 = shards
            .iter()
            .map(|s| {
                let w = s.trials as f64 / n;
                w * w * (s.half_width / Z_99).powi(2)
            })
            .sum();
        Self { mean, half_width: Z_99 * var_of_mean.sqrt(), trials }
    }
}

/// Simulates repeated search rounds, each succeeding with probability `p`
/// and costing `round_time`; the successful round is counted in full.
pub fn random_block_search_oracle<R: Rng + ?Sized>(
    p: f64,
    round_time: f64,
    trials: u64,
    rng: &mut R,
) -> Result<OracleEstimate, TheoryError> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(TheoryError::InvalidProbability(p));
    }
    if trials == 0 {
        return Err(TheoryError::InvalidInput("need at least one trial".into()));
    }
    Ok(OracleEstimate::from_samples((0..trials).map(|_| {
        let mut rounds = 1u64;
        while !rng.gen_bool(p) {
            rounds += 1;
        }
        rounds as f64 * round_time
    })))
}

/// Searches one uniformly random block per round against `evaders` evaders
/// re-hidden each round in distinct random blocks. Each sample is the time to
/// the first capture multiplied by `evaders`.
pub fn multi_evader_search_oracle<R: Rng + ?Sized>(
    blocks: u64,
    evaders: u64,
    round_time: f64,
    trials: u64,
    rng: &mut R,
) -> Result<OracleEstimate, TheoryError> {
    if evaders == 0 || evaders > blocks {
        return Err(TheoryError::TooManyEvaders { evaders, blocks });
    }
    if trials == 0 {
        return Err(TheoryError::InvalidInput("need at least one trial".into()));
    }
    let (m, n) = (blocks as usize, evaders as usize);
    Ok(OracleEstimate::from_samples((0..trials).map(|_| {
        let mut rounds = 1u64;
        loop {
            let searched = rng.gen_range(0..m);
            if sample(rng, m, n).iter().any(|b| b == searched) {
                break;
            }
            rounds += 1;
        }
        evaders as f64 * rounds as f64 * round_time
    })))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn square() -> GameDomain {
        GameDomain::new(32, 32)
    }

    #[test]
    fn block_count_examples() {
        let d = square();
        assert_eq!(block_count(&SearchGridSpec::new(&d, 32.0, 12.0).unwrap(), &d).unwrap(), 3);
        assert_eq!(block_count(&SearchGridSpec::new(&d, 32.0, 10.0).unwrap(), &d).unwrap(), 4);
        assert_eq!(block_count(&SearchGridSpec::new(&d, 32.0, 32.0).unwrap(), &d).unwrap(), 1);
        // divisible case equals area / (a·c)
        assert_eq!(block_count(&SearchGridSpec::new(&d, 8.0, 4.0).unwrap(), &d).unwrap(), 32);
        assert!(matches!(
            block_count(&SearchGridSpec::new(&d, 10.0, 4.0).unwrap(), &d),
            Err(TheoryError::NonIntegralBlocks(_))
        ));
    }

    #[test]
    fn residual_lane_is_no_taller_than_a_lane() {
        let d = square();
        let spec = SearchGridSpec::new(&d, 32.0, 10.0).unwrap();
        assert_eq!(spec.residual, 2.0);
        let spec = SearchGridSpec::new(&d, 32.0, 8.0).unwrap();
        assert_eq!(spec.residual, 8.0);
    }

    #[test]
    fn capture_probability_examples() {
        assert_eq!(capture_probability(4, 1).unwrap(), 0.25);
        assert_eq!(capture_probability(4, 2).unwrap(), 0.5);
        assert_eq!(capture_probability(1, 1).unwrap(), 1.0);
        assert!(matches!(capture_probability(4, 5), Err(TheoryError::TooManyEvaders { .. })));
    }

    #[test]
    fn survival_examples() {
        assert_eq!(survival_probability(0.3, 0), 1.0);
        assert_eq!(survival_probability(0.25, 2), 0.5625);
        assert_eq!(survival_probability(1.0, 1), 0.0);
    }

    #[test]
    fn capture_time_examples() {
        let marine = TheoryInputs::for_map(MapId::FindAndDefeatZerglings);
        let spec = SearchGridSpec::for_attack_range(&marine.domain, marine.attack_range).unwrap();
        let v = expected_capture_time(&marine, &spec).unwrap();
        assert!((v - 32.0 * 4.0 * 1.3125 / 3.15).abs() < 1e-12);
        assert!((v - 53.333_333).abs() < 1e-5);

        let void_ray = TheoryInputs::for_map(MapId::FindAndDefeatDrones);
        let spec = SearchGridSpec::for_attack_range(&void_ray.domain, void_ray.attack_range).unwrap();
        let v = expected_capture_time(&void_ray, &spec).unwrap();
        assert!((v - 34.285_714).abs() < 1e-5);

        let rounded = void_ray.with_diagonal(Diagonal::Rounded);
        let v = expected_capture_time(&rounded, &spec).unwrap();
        assert!((v - 96.0 * (1.0 + 1.4 + 0.375) / 3.85).abs() < 1e-9);
        assert!((v - 69.194_805).abs() < 1e-5);
    }

    #[test]
    fn multi_evader_time_matches_single() {
        let inputs = TheoryInputs::for_map(MapId::FindAndDefeatDrones);
        let spec = SearchGridSpec::new(&inputs.domain, 1.0, 1.0).unwrap();
        let single = expected_capture_time(&inputs, &spec).unwrap();
        for n in [1, 5, 25, 1024] {
            let multi = expected_capture_time_multi(&inputs, &spec, n).unwrap();
            assert!((multi - single).abs() <= 1e-9 * single, "n={n}");
        }
    }

    #[test]
    fn reward_examples() {
        let marine = TheoryInputs::for_map(MapId::FindAndDefeatZerglings);
        let spec = SearchGridSpec::for_attack_range(&marine.domain, marine.attack_range).unwrap();
        let r = theory_report(&marine, &spec).unwrap().reward;
        assert!((r - 70.42).abs() < 0.01, "{r}");

        let void_ray = TheoryInputs::for_map(MapId::FindAndDefeatDrones);
        let spec = SearchGridSpec::for_attack_range(&void_ray.domain, void_ray.attack_range).unwrap();
        let r = theory_report(&void_ray, &spec).unwrap().reward;
        assert!((r - 116.78).abs() < 0.01, "{r}");
        let r = theory_report(&void_ray.with_diagonal(Diagonal::Rounded), &spec).unwrap().reward;
        assert!((r - 57.87).abs() < 0.01, "{r}");
    }

    #[test]
    fn reward_rejects_impossible_kill_times() {
        let mut inputs = TheoryInputs::for_map(MapId::FindAndDefeatDrones);
        inputs.dps = 0.01;
        assert!(matches!(reward_estimate(&inputs, 30.0), Err(TheoryError::KillTimeExceedsEpisode { .. })));
        assert!(reward_estimate(&TheoryInputs::for_map(MapId::FindAndDefeatDrones), 0.0).is_err());
    }

    #[test]
    fn oracle_with_certain_capture_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let est = random_block_search_oracle(1.0, 3.5, 1000, &mut rng).unwrap();
        assert_eq!(est.mean, 3.5);
        assert_eq!(est.half_width, 0.0);
    }

    #[test]
    fn oracle_geometric_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let est = random_block_search_oracle(0.5, 1.0, 100_000, &mut rng).unwrap();
        assert!((est.mean - 2.0).abs() <= est.half_width.max(0.02), "{est:?}");
        assert!(random_block_search_oracle(0.0, 1.0, 10, &mut rng).is_err());
    }

    #[test]
    fn half_width_shrinks_with_root_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let small = random_block_search_oracle(0.25, 1.0, 10_000, &mut rng).unwrap();
        let large = random_block_search_oracle(0.25, 1.0, 1_000_000, &mut rng).unwrap();
        let ratio = small.half_width / large.half_width;
        assert!((8.5..11.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn shards_combine_by_weight() {
        let a = OracleEstimate { mean: 1.0, half_width: 0.2, trials: 100 };
        let b = OracleEstimate { mean: 4.0, half_width: 0.1, trials: 300 };
        let c = OracleEstimate::combine(&[a, b]);
        assert_eq!(c.trials, 400);
        assert!((c.mean - 3.25).abs() < 1e-12);
    }

    #[test]
    fn diagonal_lengths() {
        assert!((Diagonal::Rounded.length(&square()) - 44.8).abs() < 1e-12);
        assert!((Diagonal::Exact.length(&square()) - 45.254_834).abs() < 1e-6);
    }
}
