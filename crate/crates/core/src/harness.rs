//! Experiment driver behind the command-line tool: batch runs with CSV
//! output, theory tables and oracle validation.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::agents::{evader_agent, pursuer_agent, EvaderAgent, PursuerAgent};
use crate::episode::{empirical_capture_time, CaptureTime, Episode, EpisodeConfig, EpisodeLog, MapId};
use crate::error::{ConfigError, EpisodeError, TheoryError, UnknownAgent};
use crate::theory::{
    block_count, capture_probability, expected_capture_time, expected_capture_time_multi,
    multi_evader_search_oracle, random_block_search_oracle, reward_estimate, round_time, theory_report, Diagonal,
    SearchGridSpec, TheoryInputs, TheoryReport,
};
use crate::world::Team;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    UnknownAgent(#[from] UnknownAgent),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Episode(#[from] EpisodeError),
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("episodes must be at least 1")]
    NoEpisodes,
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub map_id: MapId,
    pub pursuer: String,
    pub evader: String,
    pub episodes: u64,
    pub seed: u64,
    pub csv: Option<PathBuf>,
    /// JSON object overlaid on the map's default config.
    pub overrides: Option<serde_json::Value>,
}

impl ExperimentSpec {
    pub fn new(map_id: MapId, pursuer: &str, evader: &str, episodes: u64, seed: u64) -> Self {
        Self {
            map_id,
            pursuer: pursuer.to_owned(),
            evader: evader.to_owned(),
            episodes,
            seed,
            csv: None,
            overrides: None,
        }
    }

    /// Config of episode `index`; its seed is `seed + index`.
    pub fn episode_config(&self, index: u64) -> Result<EpisodeConfig, ConfigError> {
        let mut config = EpisodeConfig::for_map(self.map_id);
        if let Some(overrides) = &self.overrides {
            config = config.with_overrides(overrides)?;
        }
        Ok(config.with_seed(self.seed.wrapping_add(index)))
    }
}

/// One row of the results CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeRecord {
    pub episode: u64,
    pub seed: u64,
    pub score: u64,
    /// Episode duration over score, `inf` when nothing was captured.
    #[serde(serialize_with = "serialize_capture_time")]
    pub capture_time: CaptureTime,
    pub pursuers_surviving: u32,
    /// Wall-clock cost; kept out of the CSV so output is reproducible.
    #[serde(skip)]
    pub wall_ms: u128,
}

fn serialize_capture_time<S: serde::Serializer>(v: &CaptureTime, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub episodes: u64,
    pub mean_score: f64,
    pub std_score: f64,
    /// Mean over episodes that captured at least once.
    pub mean_capture_time: f64,
    pub no_capture_episodes: u64,
}

impl Summary {
    pub fn from_records(records: &[EpisodeRecord]) -> Self {
        let n = records.len() as f64;
        let mean_score = records.iter().map(|r| r.score as f64).sum::<f64>() / n;
        let var = if records.len() > 1 {
            records.iter().map(|r| (r.score as f64 - mean_score).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let finite: Vec<f64> = records
            .iter()
            .filter_map(|r| match r.capture_time {
                CaptureTime::Seconds(s) => Some(s),
                CaptureTime::NoCapture => None,
            })
            .collect();
        let mean_capture_time = if finite.is_empty() {
            f64::INFINITY
        } else {
            finite.iter().sum::<f64>() / finite.len() as f64
        };
        Self {
            episodes: records.len() as u64,
            mean_score,
            std_score: var.sqrt(),
            mean_capture_time,
            no_capture_episodes: (records.len() - finite.len()) as u64,
        }
    }
}

impl std::fmt::Display for Summary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "episodes {}  mean score {:.2}  stddev {:.2}  mean capture time {:.3} s",
            self.episodes, self.mean_score, self.std_score, self.mean_capture_time
        )?;
        if self.no_capture_episodes > 0 {
            write!(f, "  ({} without captures)", self.no_capture_episodes)?;
        }
        Ok(())
    }
}

/// Final state of one played episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    pub score: u64,
    pub duration: f64,
    pub pursuers_surviving: u32,
    pub steps: u64,
}

/// Plays one full episode in-process, optionally recording every step.
pub fn play_episode(
    config: &EpisodeConfig,
    pursuer: &mut dyn PursuerAgent,
    evader: &mut dyn EvaderAgent,
    mut log: Option<&mut EpisodeLog>,
) -> Result<EpisodeOutcome, HarnessError> {
    let (mut episode, mut obs_p, mut obs_e) = Episode::reset(config.clone())?;
    episode.set_evader_reflexes(evader.reflexes());
    pursuer.reset(config);
    evader.reset(config);
    loop {
        let act_p = pursuer.act(&obs_p);
        let act_e = evader.act(&obs_e);
        let result = episode.step(act_p, act_e)?;
        if let Some(log) = log.as_deref_mut() {
            log.record(&episode, act_p, act_e, &result);
        }
        if result.done {
            break;
        }
        obs_p = result.obs_pursuer;
        obs_e = result.obs_evader;
    }
    Ok(EpisodeOutcome {
        score: episode.score(),
        duration: episode.world().clock,
        pursuers_surviving: episode.world().alive_count(Team::Pursuer) as u32,
        steps: episode.steps(),
    })
}

/// Plays every episode of the experiment (in parallel) and returns the rows in
/// episode order together with their summary. Writes the CSV when asked to.
pub fn run(spec: &ExperimentSpec) -> Result<(Vec<EpisodeRecord>, Summary), HarnessError> {
    if spec.episodes == 0 {
        return Err(HarnessError::NoEpisodes);
    }
    pursuer_agent(&spec.pursuer)?;
    evader_agent(&spec.evader)?;
    spec.episode_config(0)?;

    let mut records = (0..spec.episodes)
        .into_par_iter()
        .map(|index| -> Result<EpisodeRecord, HarnessError> {
            let config = spec.episode_config(index)?;
            let mut pursuer = pursuer_agent(&spec.pursuer)?;
            let mut evader = evader_agent(&spec.evader)?;
            let started = Instant::now();
            let outcome = play_episode(&config, pursuer.as_mut(), evader.as_mut(), None)?;
            Ok(EpisodeRecord {
                episode: index,
                seed: config.seed,
                score: outcome.score,
                capture_time: empirical_capture_time(outcome.score, outcome.duration)?,
                pursuers_surviving: outcome.pursuers_surviving,
                wall_ms: started.elapsed().as_millis(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    records.sort_by_key(|r| r.episode);

    if let Some(path) = &spec.csv {
        let file = std::fs::File::create(path).map_err(|source| HarnessError::Output { path: path.clone(), source })?;
        write_csv(&records, file)?;
    }
    let summary = Summary::from_records(&records);
    Ok((records, summary))
}

/// Header `episode,seed,score,capture_time,pursuers_surviving`, one row per episode.
pub fn write_csv<W: Write>(records: &[EpisodeRecord], out: W) -> Result<(), csv::Error> {
    let mut writer = csv::Writer::from_writer(out);
    if records.is_empty() {
        writer.write_record(["episode", "seed", "score", "capture_time", "pursuers_surviving"])?;
    }
    for record in records {
        writer.serialize(record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Closed-form predictions for a map under both search models.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoryTable {
    pub map_id: MapId,
    pub inputs: TheoryInputs,
    pub grid: SearchGridSpec,
    /// Consecutive traversal, no diagonal term.
    pub traversal: TheoryReport,
    /// Random block search with the exact diagonal.
    pub random_search: TheoryReport,
    /// Random block search with the diagonal rounded to `1.4 · l_x`.
    pub random_search_rounded: TheoryReport,
}

pub fn theory(map_id: MapId, overrides: Option<&serde_json::Value>) -> Result<TheoryTable, HarnessError> {
    let mut config = EpisodeConfig::for_map(map_id);
    if let Some(overrides) = overrides {
        config = config.with_overrides(overrides)?;
    }
    let (p, e) = (config.pursuer_type.stats(), config.evader_type.stats());
    let inputs = TheoryInputs {
        domain: config.domain,
        attack_range: p.attack_range,
        speed: p.speed,
        n_evaders: u64::from(config.n_evaders),
        n_pursuers: u64::from(config.n_pursuers),
        evader_health: e.health_max,
        dps: p.dps,
        t_final: config.t_final,
        use_diagonal: false,
        diagonal: Diagonal::Exact,
    };
    let grid = SearchGridSpec::for_attack_range(&inputs.domain, inputs.attack_range)?;
    Ok(TheoryTable {
        map_id,
        inputs,
        grid,
        traversal: theory_report(&inputs, &grid)?,
        random_search: theory_report(&inputs.with_diagonal(Diagonal::Exact), &grid)?,
        random_search_rounded: theory_report(&inputs.with_diagonal(Diagonal::Rounded), &grid)?,
    })
}

impl std::fmt::Display for TheoryTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let i = &self.inputs;
        writeln!(
            f,
            "map {:?}: r={} U={} N_e={} N_p={} H_e={} DPS={} T_f={}",
            self.map_id, i.attack_range, i.speed, i.n_evaders, i.n_pursuers, i.evader_health, i.dps, i.t_final
        )?;
        writeln!(f, "{:<28} {:>4} {:>8} {:>10} {:>10} {:>8} {:>8}", "model", "M", "p", "round s", "v s", "T_k s", "reward")?;
        for (name, r) in [
            ("traversal (no R)", &self.traversal),
            ("random search (R exact)", &self.random_search),
            ("random search (R = 1.4 l_x)", &self.random_search_rounded),
        ] {
            writeln!(
                f,
                "{:<28} {:>4} {:>8.4} {:>10.3} {:>10.3} {:>8.3} {:>8.2}",
                name, r.blocks, r.capture_probability, r.round_time, r.capture_time, r.kill_time, r.reward
            )?;
        }
        Ok(())
    }
}

/// One oracle-versus-closed-form comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationCheck {
    pub name: String,
    pub expected: f64,
    pub observed: f64,
    pub half_width: f64,
    pub relative_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub trials: u64,
    pub tolerance: f64,
    pub checks: Vec<ValidationCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "[{}] {:<40} expected {:>9.4}  oracle {:>9.4} ± {:.4}  deviation {:.3}%",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.expected,
                c.observed,
                c.half_width,
                100.0 * c.relative_error
            )?;
        }
        Ok(())
    }
}

pub const VALIDATION_TOLERANCE: f64 = 0.02;

/// Capture-time formula under test; swapped out by negative-control tests.
pub type CaptureTimeFn = fn(&TheoryInputs, &SearchGridSpec) -> Result<f64, TheoryError>;

/// Runs the Monte Carlo oracles against the closed forms for both shipped
/// unit pairs (with and without the diagonal term) and the multi-evader sweep.
pub fn validate(trials: u64, seed: u64) -> Result<ValidationReport, HarnessError> {
    validate_with(trials, seed, expected_capture_time)
}

pub fn validate_with(trials: u64, seed: u64, formula: CaptureTimeFn) -> Result<ValidationReport, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    let mut check = |name: String, expected: f64, est: crate::theory::OracleEstimate| {
        let relative_error = est.relative_error(expected);
        checks.push(ValidationCheck {
            name,
            expected,
            observed: est.mean,
            half_width: est.half_width,
            relative_error,
            passed: relative_error <= VALIDATION_TOLERANCE,
        });
    };

    for map in [MapId::FindAndDefeatZerglings, MapId::FindAndDefeatDrones] {
        let base = TheoryInputs::for_map(map);
        let grid = SearchGridSpec::for_attack_range(&base.domain, base.attack_range)?;
        for (label, inputs) in [("traversal", base), ("random search", base.with_diagonal(Diagonal::Exact))] {
            let p = capture_probability(block_count(&grid, &inputs.domain)?, 1)?;
            let est = random_block_search_oracle(p, round_time(&inputs, &grid), trials, &mut rng)?;
            check(format!("{} {label}", map.units().0.name()), formula(&inputs, &grid)?, est);
        }
    }

    // 50 unit-wide blocks in a single lane
    let mut sweep = TheoryInputs::for_map(MapId::FindAndDefeatDrones);
    sweep.domain = crate::world::GameDomain::new(50, 2);
    sweep.attack_range = 1.0;
    let grid = SearchGridSpec::new(&sweep.domain, 1.0, 2.0)?;
    let blocks = block_count(&grid, &sweep.domain)?;
    for n in [1u64, 5, 25] {
        let est = multi_evader_search_oracle(blocks, n, round_time(&sweep, &grid), trials, &mut rng)?;
        check(format!("{n} evaders over {blocks} blocks"), expected_capture_time_multi(&sweep, &grid, n)?, est);
    }

    Ok(ValidationReport { trials, tolerance: VALIDATION_TOLERANCE, checks })
}

/// Expected score for a theory table row, exposed for callers that only have `v`.
pub fn predicted_score(inputs: &TheoryInputs, capture_time: f64) -> Result<f64, HarnessError> {
    Ok(reward_estimate(inputs, capture_time)?)
}
