//! Connects to a running server as the evader and plays it with a scripted
//! policy. Start the server first:
//!
//! ```text
//! pursuit-arena serve --pursuer traversal --evader socket --episodes 3
//! cargo run --example remote_evader_client -- 127.0.0.1:5000 cluster 3
//! ```

use pursuit_arena::evader_agent;
use pursuit_arena::protocol::{Client, RemoteAgent};
use pursuit_arena::world::Team;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let addr = args.next().unwrap_or_else(|| "127.0.0.1:5000".into());
    let policy = args.next().unwrap_or_else(|| "random".into());
    let episodes = args.next().map_or(Ok(1), |s| s.parse())?;

    let mut client = Client::connect(addr.as_str(), Team::Evader)?;
    let report = client.play(episodes, &mut RemoteAgent::Evader(evader_agent(&policy)?))?;
    println!("scores {:?} after {} steps", report.scores, report.steps);
    for (code, detail) in report.notices {
        println!("notice {code:?}: {detail}");
    }
    Ok(())
}
