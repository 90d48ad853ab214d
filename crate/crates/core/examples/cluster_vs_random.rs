//! How much an adversarial evader policy lowers the score of the same
//! pursuer, compared with a random one.

use pursuit_arena::harness::{self, ExperimentSpec};
use pursuit_arena::MapId;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let episodes = std::env::args().nth(1).map_or(40, |s| s.parse().expect("episode count"));
    let mut means = Vec::new();
    for evader in ["random", "cluster", "stationary", "builtin"] {
        let spec = ExperimentSpec::new(MapId::FindAndDefeatDrones, "traversal", evader, episodes, 100);
        let (_, summary) = harness::run(&spec)?;
        println!("{evader:>10}: {summary}");
        means.push(summary.mean_score);
    }
    println!("cluster scores {:.1}% below random", 100.0 * (1.0 - means[1] / means[0]));
    Ok(())
}
