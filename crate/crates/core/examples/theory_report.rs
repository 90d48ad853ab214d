//! Closed-form capture times and score predictions for both maps, plus a
//! what-if with a longer episode.

use pursuit_arena::harness;
use pursuit_arena::theory::{theory_report, Diagonal, SearchGridSpec, TheoryInputs};
use pursuit_arena::MapId;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for map in [MapId::FindAndDefeatZerglings, MapId::FindAndDefeatDrones] {
        print!("{}", harness::theory(map, None)?);
        println!();
    }

    let longer = serde_json::json!({ "t_final": 360.0 });
    print!("{}", harness::theory(MapId::FindAndDefeatDrones, Some(&longer))?);

    // the theory layer can also be driven directly
    let inputs = TheoryInputs::for_map(MapId::FindAndDefeatDrones).with_diagonal(Diagonal::Exact);
    let grid = SearchGridSpec::for_attack_range(&inputs.domain, inputs.attack_range)?;
    let report = theory_report(&inputs, &grid)?;
    println!("\nmobile evaders, diagonal charged every round: reward {:.2}", report.reward);
    Ok(())
}
