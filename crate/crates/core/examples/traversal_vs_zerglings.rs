//! The lane-sweeping pursuer against the built-in zergling behaviour, with
//! the per-episode records written to CSV.

use pursuit_arena::harness::{self, ExperimentSpec};
use pursuit_arena::MapId;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut spec = ExperimentSpec::new(MapId::FindAndDefeatZerglings, "traversal", "builtin", 50, 0);
    let dir = std::env::temp_dir();
    spec.csv = Some(dir.join("traversal_vs_zerglings.csv"));
    let (records, summary) = harness::run(&spec)?;
    println!("{summary}");
    let wiped = records.iter().filter(|r| r.pursuers_surviving == 0).count();
    println!("{wiped} of {} episodes ended with every marine dead", records.len());
    println!("rows written to {}", spec.csv.unwrap().display());
    Ok(())
}
