#![allow(dead_code)]

use std::thread;

use pursuit_arena::agents::{evader_agent, pursuer_agent, PursuerAgent, TraversalPursuer};
use pursuit_arena::episode::{Episode, EpisodeConfig, EpisodeLog, EvaderAction, MapId};
use pursuit_arena::harness::play_episode;
use pursuit_arena::protocol::{Client, RemoteAgent, ServeOptions, Server, SlotSpec};
use pursuit_arena::world::{Team, WorldState};

/// Lane time of one uninterrupted sweep of an empty arena, and the length of
/// all lanes divided by the pursuer speed.
pub fn sweep_duration(map: MapId) -> (f64, f64) {
    let config = EpisodeConfig::for_map(map);
    let stats = config.pursuer_type.stats();
    let mut world = WorldState::new(config.domain, 0);
    for _ in 0..config.n_pursuers {
        world.spawn(Team::Pursuer, stats, config.domain.center());
    }
    let (mut episode, mut obs, _) = Episode::from_world(config.clone(), world).unwrap();
    let mut agent = TraversalPursuer::new();
    agent.reset(&config);
    let lanes = agent.lanes().len();
    while agent.lane_log().len() < lanes {
        let result = episode.step(agent.act(&obs), EvaderAction::NoOp).unwrap();
        assert!(!result.done, "sweep did not finish within the episode");
        obs = result.obs_pursuer;
    }
    let measured = agent.lane_log().iter().map(|l| l.finished - l.started).sum();
    let lane_height = 2.0 * stats.attack_range;
    let bound = f64::from(config.domain.width) * (f64::from(config.domain.height) / lane_height).ceil() / stats.speed;
    (measured, bound)
}

pub fn in_process_log(config: &EpisodeConfig, pursuer: &str, evader: &str) -> EpisodeLog {
    let mut log = EpisodeLog::default();
    let mut p = pursuer_agent(pursuer).unwrap();
    let mut e = evader_agent(evader).unwrap();
    play_episode(config, p.as_mut(), e.as_mut(), Some(&mut log)).unwrap();
    log
}

/// Plays one episode with both agents connected over loopback TCP and
/// returns the server's log.
pub fn loopback_log(config: &EpisodeConfig, pursuer: &str, evader: &str) -> EpisodeLog {
    let server = Server::bind("127.0.0.1:0").unwrap();
    let addr = server.local_addr().unwrap();
    let mut options = ServeOptions::new(config.clone(), SlotSpec::Remote, SlotSpec::Remote);
    options.session.record_logs = true;
    let handle = thread::spawn(move || server.run(&options).unwrap());

    let clients: Vec<_> = [
        RemoteAgent::Pursuer(pursuer_agent(pursuer).unwrap()),
        RemoteAgent::Evader(evader_agent(evader).unwrap()),
    ]
    .into_iter()
    .map(|mut agent| {
        thread::spawn(move || {
            let mut client = Client::connect(addr, agent.role()).unwrap();
            client.play(1, &mut agent).unwrap()
        })
    })
    .collect();
    for c in clients {
        let report = c.join().unwrap();
        assert!(report.notices.is_empty(), "{:?}", report.notices);
    }
    let report = handle.join().unwrap();
    assert!(!report.episodes[0].aborted);
    report.logs.into_iter().next().unwrap()
}
