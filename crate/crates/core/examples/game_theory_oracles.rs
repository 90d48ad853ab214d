//! Drives the Monte Carlo oracles directly and compares them with the
//! closed-form expected capture time for a single hidden evader.

use pursuit_arena::theory::{
    block_count, capture_probability, expected_capture_time, random_block_search_oracle, round_time,
    SearchGridSpec, TheoryInputs,
};
use pursuit_arena::MapId;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let inputs = TheoryInputs::for_map(MapId::FindAndDefeatDrones);
    let grid = SearchGridSpec::for_attack_range(&inputs.domain, inputs.attack_range)?;
    let blocks = block_count(&grid, &inputs.domain)?;
    let p = capture_probability(blocks, 1)?;
    let closed = expected_capture_time(&inputs, &grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    println!("{blocks} blocks, capture probability {p:.4} per round");
    for trials in [1_000, 10_000, 100_000] {
        let est = random_block_search_oracle(p, round_time(&inputs, &grid), trials, &mut rng)?;
        println!(
            "{trials:>7} trials: {:.2} ± {:.2} s (closed form {closed:.2} s, error {:.2}%)",
            est.mean,
            est.half_width,
            100.0 * est.relative_error(closed)
        );
    }
    Ok(())
}
