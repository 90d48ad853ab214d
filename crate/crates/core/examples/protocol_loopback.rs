//! Runs a full lockstep session over TCP on localhost, with both sides played
//! by scripted agents through the wire protocol.

use std::thread;

use pursuit_arena::protocol::{Client, RemoteAgent, ServeOptions, Server, SlotSpec};
use pursuit_arena::world::Team;
use pursuit_arena::{evader_agent, pursuer_agent, EpisodeConfig, MapId};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = EpisodeConfig::for_map(MapId::FindAndDefeatDrones).with_seed(3);
    let mut options = ServeOptions::new(config, SlotSpec::Remote, SlotSpec::Remote);
    options.session.episodes = 2;
    let server = Server::bind("127.0.0.1:0")?;
    let addr = server.local_addr()?;
    let host = thread::spawn(move || server.run(&options));

    let evader = thread::spawn(move || -> Result<_, String> {
        let mut client = Client::connect(addr, Team::Evader).map_err(|e| e.to_string())?;
        let mut agent = RemoteAgent::Evader(evader_agent("random").map_err(|e| e.to_string())?);
        client.play(2, &mut agent).map_err(|e| e.to_string())
    });
    let mut client = Client::connect(addr, Team::Pursuer)?;
    let pursuer = client.play(2, &mut RemoteAgent::Pursuer(pursuer_agent("traversal")?))?;
    let evader = evader.join().expect("evader thread")?;

    println!("pursuer saw scores {:?} over {} steps", pursuer.scores, pursuer.steps);
    println!("evader saw scores {:?} over {} steps", evader.scores, evader.steps);
    for ep in host.join().expect("server thread")?.episodes {
        println!("episode {} seed {}: score {} in {:.1} s", ep.episode, ep.seed, ep.score, ep.duration);
    }
    Ok(())
}
